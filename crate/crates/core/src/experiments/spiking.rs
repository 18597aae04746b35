//! First threshold crossings of the membrane voltage.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundStrategy;
use crate::engine::{run_path, PathObserver, SimulationConfig};
use crate::error::{invalid, Result};
use crate::experiments::{par_trials, stats};
use crate::hh::{ChannelModel, HHParams, SubunitModel};
use crate::model::{FlowSegment, HybridState, PdmpModel, PulseCurrent};
use crate::numeric::bisect;

/// Crossing times are resolved to this many ms.
pub const CROSSING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HhKind {
    Subunit,
    Channel,
}

/// First time in `[seg.start.time, end]` where the flow reaches `threshold`.
///
/// The drive is constant between its switching times, so on each piece
/// the flow relaxes monotonically; a crossing is bracketed by the piece
/// endpoints and refined by bisection.
pub fn first_crossing_in_segment<P: PdmpModel>(
    model: &P,
    seg: &FlowSegment<P::Mode>,
    end: f64,
    threshold: f64,
) -> Result<Option<f64>> {
    let t0 = seg.start.time;
    let drive = model.drive();
    let mut cuts = vec![t0];
    for edge in [drive.start, drive.end] {
        if drive.amplitude != 0.0 && edge > t0 && edge < end {
            cuts.push(edge);
        }
    }
    cuts.push(end);
    let v_at = |t: f64| model.flow(seg, (t - t0).max(0.0));
    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        if v_at(a)? >= threshold {
            return Ok(Some(a));
        }
        if v_at(b)? >= threshold {
            let t = bisect(|t| v_at(t).map_or(f64::NAN, |v| v - threshold), a, b, CROSSING_TOL);
            return Ok(Some(t));
        }
    }
    Ok(None)
}

struct SpikeDetector<'a, P: PdmpModel> {
    model: &'a P,
    threshold: f64,
    found: Option<f64>,
    error: Option<crate::error::PdmpError>,
}

impl<P: PdmpModel> PathObserver<P::Mode> for SpikeDetector<'_, P> {
    fn segment_done(&mut self, seg: &FlowSegment<P::Mode>, end: f64) -> ControlFlow<()> {
        match first_crossing_in_segment(self.model, seg, end, self.threshold) {
            Ok(None) => ControlFlow::Continue(()),
            Ok(Some(t)) => {
                self.found = Some(t);
                ControlFlow::Break(())
            }
            Err(e) => {
                self.error = Some(e);
                ControlFlow::Break(())
            }
        }
    }
}

/// Spiking time of one path, or `None` if V stays below `threshold` on
/// `[t0, horizon]`. The path is only simulated up to the crossing.
pub fn spike_time<P: PdmpModel>(model: &P, cfg: &SimulationConfig<P::Mode>, threshold: f64) -> Result<Option<f64>> {
    let mut rng = cfg.rng();
    let mut det = SpikeDetector {
        model,
        threshold,
        found: None,
        error: None,
    };
    run_path(model, cfg, &mut rng, &mut det)?;
    match det.error {
        Some(e) => Err(e),
        None => Ok(det.found),
    }
}

/// Spiking times of `trials` independent paths.
pub fn spiking_times<P: PdmpModel>(
    model: &P,
    initial: HybridState<P::Mode>,
    strategy: BoundStrategy,
    threshold: f64,
    horizon: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    par_trials(trials, |i| {
        let cfg = SimulationConfig::new(initial, horizon, strategy).with_stream(seed, i);
        spike_time(model, &cfg, threshold)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikingReport {
    pub model: HhKind,
    pub n_chan: u32,
    pub trials: u64,
    pub spikes: u64,
    pub spike_fraction: f64,
    /// Mean spiking time over trials that spiked.
    pub mean_spike_time: Option<f64>,
    pub std_spike_time: Option<f64>,
    pub threshold: f64,
    pub horizon: f64,
}

impl SpikingReport {
    pub fn from_times(model: HhKind, n_chan: u32, threshold: f64, horizon: f64, times: &[Option<f64>]) -> Self {
        let hits: Vec<f64> = times.iter().flatten().copied().collect();
        let (mean, std) = if hits.is_empty() {
            (None, None)
        } else {
            let (m, s) = stats::mean_and_std(&hits);
            (Some(m), Some(s))
        };
        Self {
            model,
            n_chan,
            trials: times.len() as u64,
            spikes: hits.len() as u64,
            spike_fraction: hits.len() as f64 / times.len().max(1) as f64,
            mean_spike_time: mean,
            std_spike_time: std,
            threshold,
            horizon,
        }
    }
}

/// Spiking statistics for each channel count.
#[allow(clippy::too_many_arguments)]
pub fn spiking_experiment(
    kind: HhKind,
    n_chan_list: &[u32],
    threshold: f64,
    horizon: f64,
    pulse: PulseCurrent,
    strategy: BoundStrategy,
    trials: u64,
    seed: u64,
) -> Result<Vec<SpikingReport>> {
    if trials < 100 {
        return Err(invalid("trials", "need at least 100 trials"));
    }
    if !(threshold.is_finite()) {
        return Err(invalid("threshold", "must be finite"));
    }
    n_chan_list
        .iter()
        .map(|&n| {
            let params = HHParams::standard(n).with_pulse(pulse);
            let times = match kind {
                HhKind::Subunit => {
                    let m = SubunitModel::new(params)?;
                    spiking_times(&m, m.initial_state(), strategy, threshold, horizon, trials, seed)?
                }
                HhKind::Channel => {
                    let m = ChannelModel::new(params)?;
                    spiking_times(&m, m.initial_state(), strategy, threshold, horizon, trials, seed)?
                }
            };
            Ok(SpikingReport::from_times(kind, n, threshold, horizon, &times))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(v0: f64, a: f64, b: f64, t0: f64) -> FlowSegment<crate::hh::SubunitMode> {
        FlowSegment {
            start: HybridState {
                mode: Default::default(),
                voltage: v0,
                time: t0,
            },
            a,
            b,
        }
    }

    #[test]
    fn crossing_matches_closed_form() {
        // Pure leak plus pulse: V(t) = K/a (1 - e^{-a (t - 1)}) on [1, 2].
        let m = SubunitModel::new(HHParams::standard(1)).unwrap();
        let s = seg(0.0, 0.3, 0.0, 0.0);
        let k: f64 = 30.0;
        let a: f64 = 0.3;
        let nu = 20.0;
        let exact = 1.0 - (1.0 - nu * a / k).ln() / a;
        let t = first_crossing_in_segment(&m, &s, 10.0, nu).unwrap().unwrap();
        assert!((t - exact).abs() < 1e-8, "{t} vs {exact}");
        assert_eq!(first_crossing_in_segment(&m, &s, 10.0, 40.0).unwrap(), None);
    }

    #[test]
    fn threshold_below_rest_spikes_at_zero() {
        let r = spiking_experiment(
            HhKind::Subunit,
            &[5],
            -1.0,
            10.0,
            HHParams::standard(1).pulse,
            BoundStrategy::OptimalQAdaptive,
            100,
            1,
        )
        .unwrap();
        assert_eq!(r[0].spike_fraction, 1.0);
        assert_eq!(r[0].mean_spike_time, Some(0.0));
    }

    #[test]
    fn spike_times_lie_in_horizon_and_cross() {
        let m = ChannelModel::new(HHParams::standard(50)).unwrap();
        let times = spiking_times(&m, m.initial_state(), BoundStrategy::OptimalQAdaptive, 60.0, 10.0, 200, 3).unwrap();
        let hits: Vec<f64> = times.iter().flatten().copied().collect();
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|&t| (0.0..=10.0).contains(&t)));
    }
}

//! The thinning loop.
//!
//! Between jumps, candidate times are generated by inverting the integrated
//! envelope at cumulative unit-exponential spacings and each candidate is
//! kept with probability `lambda / envelope`. One uniform is spent on the
//! spacing and one on the acceptance test, in that order.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::bounds::{build_envelope, BoundStrategy, EnvelopeOptions, RateEnvelope};
use crate::error::{invalid, PdmpError, Result};
use crate::model::{FlowSegment, HybridState, PdmpModel, Trajectory};
use crate::rng::RngStream;

pub const DEFAULT_PROPOSAL_CAP: u64 = 1_000_000;

/// Relative slack allowed when checking that the envelope dominates the
/// rate; covers rounding in the closed-form flow only.
const DOMINATION_RTOL: f64 = 1e-9;

/// Proposal counts of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThinningStats {
    pub total_proposed: u64,
    pub total_accepted: u64,
    /// Proposals needed for each accepted jump, the accepted one included.
    pub per_interjump_proposals: Vec<u32>,
    /// Proposals after the last accepted jump that fell inside the horizon.
    pub residual_proposals: u64,
}

impl ThinningStats {
    /// `accepted / proposed`, or `None` without proposals.
    pub fn acceptance_ratio(&self) -> Option<f64> {
        (self.total_proposed > 0).then(|| self.total_accepted as f64 / self.total_proposed as f64)
    }

    pub fn mean_tau(&self) -> Option<f64> {
        let n = self.per_interjump_proposals.len();
        (n > 0).then(|| self.per_interjump_proposals.iter().map(|&x| x as f64).sum::<f64>() / n as f64)
    }

    pub fn is_consistent(&self) -> bool {
        let completed: u64 = self.per_interjump_proposals.iter().map(|&x| u64::from(x)).sum();
        self.total_accepted <= self.total_proposed
            && self.per_interjump_proposals.iter().all(|&x| x >= 1)
            && self.total_accepted == self.per_interjump_proposals.len() as u64
            && completed + self.residual_proposals == self.total_proposed
    }

    fn record_jump(&mut self, proposals: u64) {
        self.total_proposed += proposals;
        self.total_accepted += 1;
        self.per_interjump_proposals.push(proposals.min(u64::from(u32::MAX)) as u32);
    }
}

/// Outcome of a single inter-jump draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpDraw {
    /// Accepted time, or `None` if no candidate was accepted before `limit`.
    pub time: Option<f64>,
    /// Candidates proposed, counting the accepted one.
    pub proposals: u64,
}

/// Draw the next jump time after the start of `seg`.
///
/// Candidates beyond `limit` (absolute time) end the search without being
/// counted. Every proposed time is appended to `candidates` when given.
pub fn next_jump<P: PdmpModel>(
    model: &P,
    seg: &FlowSegment<P::Mode>,
    env: &mut RateEnvelope<'_>,
    rng: &mut RngStream,
    limit: f64,
    cap: u64,
    mut candidates: Option<&mut Vec<f64>>,
) -> Result<JumpDraw> {
    let anchor = seg.start.time;
    let limit_offset = limit - anchor;
    let mut mass = 0.0;
    let mut proposals = 0u64;
    loop {
        mass += rng.next_exponential();
        let Some((offset, level)) = env.inverse_within(mass, limit_offset)? else {
            return Ok(JumpDraw { time: None, proposals });
        };
        proposals += 1;
        let t = anchor + offset;
        if proposals > cap {
            return Err(PdmpError::CapExceeded {
                cap,
                partial: Box::new(ThinningStats {
                    total_proposed: proposals - 1,
                    residual_proposals: proposals - 1,
                    ..Default::default()
                }),
            });
        }
        if let Some(c) = candidates.as_deref_mut() {
            c.push(t);
        }
        let v = model.flow(seg, offset)?;
        let lambda = model.rate(&HybridState {
            mode: seg.start.mode,
            voltage: v,
            time: t,
        });
        if lambda > level * (1.0 + DOMINATION_RTOL) {
            return Err(PdmpError::EnvelopeViolation {
                rate: lambda,
                bound: level,
                time: t,
            });
        }
        let u = rng.next_uniform();
        if u * level <= lambda {
            return Ok(JumpDraw { time: Some(t), proposals });
        }
    }
}

/// Candidates that were not accepted, in order.
pub fn collect_rejected(candidates: &[f64], accepted: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(candidates.len().saturating_sub(accepted.len()));
    let mut j = 0;
    for &c in candidates {
        if j < accepted.len() && c == accepted[j] {
            j += 1;
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig<M> {
    pub horizon: f64,
    pub strategy: BoundStrategy,
    pub initial_state: HybridState<M>,
    pub seed: u64,
    pub stream_id: u64,
    pub proposal_cap: u64,
    pub record_candidates: bool,
    /// Tail probability defining the adaptive head width.
    pub epsilon_quantile: f64,
}

impl<M> SimulationConfig<M> {
    pub fn new(initial_state: HybridState<M>, horizon: f64, strategy: BoundStrategy) -> Self {
        Self {
            horizon,
            strategy,
            initial_state,
            seed: 0,
            stream_id: 0,
            proposal_cap: DEFAULT_PROPOSAL_CAP,
            record_candidates: false,
            epsilon_quantile: crate::bounds::DEFAULT_EPSILON_QUANTILE,
        }
    }

    pub fn with_stream(mut self, seed: u64, stream_id: u64) -> Self {
        self.seed = seed;
        self.stream_id = stream_id;
        self
    }

    pub fn with_candidates(mut self, record: bool) -> Self {
        self.record_candidates = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > self.initial_state.time) {
            return Err(invalid("horizon", format!("{} must exceed the initial time", self.horizon)));
        }
        if self.proposal_cap < 1000 {
            return Err(invalid("proposal_cap", "must be >= 1000"));
        }
        if !(self.epsilon_quantile > 0.0 && self.epsilon_quantile < 1.0) {
            return Err(invalid("epsilon_quantile", "must lie in (0, 1)"));
        }
        self.strategy.validate()
    }

    pub fn rng(&self) -> RngStream {
        RngStream::new(self.seed, self.stream_id)
    }

    pub fn envelope_options(&self) -> EnvelopeOptions {
        EnvelopeOptions {
            epsilon_quantile: self.epsilon_quantile,
            epsilon_fallback: self.horizon - self.initial_state.time,
        }
    }
}

/// Callbacks fired while a path is generated.
pub trait PathObserver<M> {
    /// A segment is complete on `[seg.start.time, end]`. `end` is the next
    /// jump time or the horizon. Returning `Break` stops the run.
    fn segment_done(&mut self, _seg: &FlowSegment<M>, _end: f64) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    /// A jump was accepted and the next segment starts at `seg`.
    fn jumped(&mut self, _seg: &FlowSegment<M>) {}
}

impl<M> PathObserver<M> for () {}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSummary<M> {
    pub stats: ThinningStats,
    /// Time at which the run ended: the horizon or an observer stop.
    pub end_time: f64,
    pub final_state: HybridState<M>,
    pub stopped_early: bool,
    pub candidates: Option<Vec<f64>>,
}

/// Run the thinning loop, reporting segments to `observer`, without storing
/// the trajectory.
pub fn run_path<P, O>(model: &P, cfg: &SimulationConfig<P::Mode>, rng: &mut RngStream, observer: &mut O) -> Result<PathSummary<P::Mode>>
where
    P: PdmpModel,
    O: PathObserver<P::Mode>,
{
    cfg.validate()?;
    if !model.is_valid_mode(&cfg.initial_state.mode) {
        return Err(invalid("initial_state", "mode is not valid for this model"));
    }
    let opts = cfg.envelope_options();
    let mut stats = ThinningStats::default();
    let mut candidates = cfg.record_candidates.then(Vec::new);
    let mut seg = model.segment(cfg.initial_state);
    loop {
        let mut env = build_envelope(model, &seg, cfg.strategy, &opts)?;
        let draw = next_jump(model, &seg, &mut env, rng, cfg.horizon, cfg.proposal_cap, candidates.as_mut())
            .map_err(|e| match e {
                PdmpError::CapExceeded { cap, partial } => {
                    let mut s = stats.clone();
                    s.total_proposed += partial.total_proposed;
                    s.residual_proposals += partial.total_proposed;
                    PdmpError::CapExceeded { cap, partial: Box::new(s) }
                }
                other => other,
            })?;
        let Some(t) = draw.time else {
            stats.total_proposed += draw.proposals;
            stats.residual_proposals += draw.proposals;
            let stopped = observer.segment_done(&seg, cfg.horizon).is_break();
            let v = model.flow(&seg, cfg.horizon - seg.start.time)?;
            return Ok(PathSummary {
                stats,
                end_time: cfg.horizon,
                final_state: HybridState {
                    mode: seg.start.mode,
                    voltage: v,
                    time: cfg.horizon,
                },
                stopped_early: stopped,
                candidates,
            });
        };
        stats.record_jump(draw.proposals);
        let v = model.flow(&seg, t - seg.start.time)?;
        let pre = HybridState {
            mode: seg.start.mode,
            voltage: v,
            time: t,
        };
        if observer.segment_done(&seg, t).is_break() {
            return Ok(PathSummary {
                stats,
                end_time: t,
                final_state: pre,
                stopped_early: true,
                candidates,
            });
        }
        let mode = model.sample_kernel(&pre, rng)?;
        if !model.is_valid_mode(&mode) {
            return Err(PdmpError::Model(format!("kernel produced invalid mode {mode:?}")));
        }
        seg = model.segment(HybridState { mode, ..pre });
        observer.jumped(&seg);
    }
}

struct Recorder<M> {
    traj: Trajectory<M>,
}

impl<M: Copy> PathObserver<M> for Recorder<M> {
    fn jumped(&mut self, seg: &FlowSegment<M>) {
        self.traj.push(*seg);
    }
}

/// Simulate one path on `[initial time, horizon]` and keep the trajectory.
pub fn simulate_path<P: PdmpModel>(model: &P, cfg: &SimulationConfig<P::Mode>) -> Result<(Trajectory<P::Mode>, ThinningStats)> {
    let mut rng = cfg.rng();
    let first = model.segment(cfg.initial_state);
    let mut rec = Recorder {
        traj: Trajectory::start(first, cfg.horizon, false),
    };
    let summary = run_path(model, cfg, &mut rng, &mut rec)?;
    let mut traj = rec.traj;
    traj.candidates = summary.candidates;
    Ok((traj, summary.stats))
}

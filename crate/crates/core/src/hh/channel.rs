use serde::{Deserialize, Serialize};

use crate::error::{PdmpError, Result};
use crate::hh::subunit::{draw_index, gate_event_weights, GateEvent, SubunitMode};
use crate::hh::{gate_rate, GateRates, HHParams};
use crate::model::{FlowSegment, HybridState, PdmpModel, PulseCurrent, VoltageBounds, Window};
use crate::rng::RngStream;

/// Channel counts: `na[i][j]` sodium channels in `m_i h_j`, `k[l]`
/// potassium channels in `n_l`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelMode {
    pub na: [[u32; 2]; 4],
    pub k: [u32; 5],
}

impl ChannelMode {
    /// Every sodium channel in `m0h0`, every potassium channel in `n0`.
    pub fn resting(n_na: u32, n_k: u32) -> Self {
        let mut m = Self::default();
        m.na[0][0] = n_na;
        m.k[0] = n_k;
        m
    }

    pub fn n_na(&self) -> u32 {
        self.na.iter().flatten().sum()
    }

    pub fn n_k(&self) -> u32 {
        self.k.iter().sum()
    }

    /// Projection onto open gate counts.
    pub fn eta(&self) -> SubunitMode {
        let open_n = (0..5).map(|l| l as u32 * self.k[l]).sum();
        let open_m = (0..4).map(|i| i as u32 * (self.na[i][0] + self.na[i][1])).sum();
        let open_h = (0..4).map(|i| self.na[i][1]).sum();
        SubunitMode { open_n, open_m, open_h }
    }

    /// Channels in the conducting states `m3h1` and `n4`.
    pub fn conducting(&self) -> (u32, u32) {
        (self.na[3][1], self.k[4])
    }
}

/// A single channel moving along one kinetic edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelEdge {
    Na { from: (usize, usize), to: (usize, usize) },
    K { from: usize, to: usize },
}

impl ChannelEdge {
    pub fn apply(self, mode: &ChannelMode) -> ChannelMode {
        let mut m = *mode;
        match self {
            ChannelEdge::Na { from, to } => {
                m.na[from.0][from.1] -= 1;
                m.na[to.0][to.1] += 1;
            }
            ChannelEdge::K { from, to } => {
                m.k[from] -= 1;
                m.k[to] += 1;
            }
        }
        m
    }
}

/// Coefficients of the potassium ladder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KineticScheme {
    /// `n_l -> n_{l+1}` at `(4 - l) alpha_n`, `n_l -> n_{l-1}` at `l beta_n`.
    #[default]
    Standard,
    /// Closing coefficients `1, 2, 2, 4` for `n1..n4`, as printed in the
    /// kinetic diagram this model is usually quoted with. Not consistent
    /// with independent gates; available for comparison only.
    LiteralDiagram,
}

impl KineticScheme {
    fn k_close_coefficient(self, l: usize) -> f64 {
        match self {
            KineticScheme::Standard => l as f64,
            KineticScheme::LiteralDiagram => [0.0, 1.0, 2.0, 2.0, 4.0][l],
        }
    }
}

/// Channel edge for a given gate event, chosen with weights equal to the
/// number of gates of that type in each source state that can switch.
fn edge_weights(mode: &ChannelMode, event: GateEvent) -> Vec<(ChannelEdge, f64)> {
    let mut out = Vec::with_capacity(6);
    match event {
        GateEvent::MOpen | GateEvent::MClose => {
            for j in 0..2 {
                for i in 0..4usize {
                    let (w, to) = if event == GateEvent::MOpen {
                        ((3 - i) as f64, i + 1)
                    } else {
                        (i as f64, i.wrapping_sub(1))
                    };
                    let c = mode.na[i][j];
                    if w > 0.0 && c > 0 {
                        out.push((ChannelEdge::Na { from: (i, j), to: (to, j) }, w * f64::from(c)));
                    }
                }
            }
        }
        GateEvent::HOpen | GateEvent::HClose => {
            let (from_j, to_j) = if event == GateEvent::HOpen { (0, 1) } else { (1, 0) };
            for i in 0..4 {
                let c = mode.na[i][from_j];
                if c > 0 {
                    out.push((ChannelEdge::Na { from: (i, from_j), to: (i, to_j) }, f64::from(c)));
                }
            }
        }
        GateEvent::NOpen | GateEvent::NClose => {
            for l in 0..5usize {
                let (w, to) = if event == GateEvent::NOpen {
                    ((4 - l) as f64, l + 1)
                } else {
                    (l as f64, l.wrapping_sub(1))
                };
                let c = mode.k[l];
                if w > 0.0 && c > 0 {
                    out.push((ChannelEdge::K { from: l, to }, w * f64::from(c)));
                }
            }
        }
    }
    out
}

/// Conditional probabilities of each channel edge given a gate event.
pub fn edge_kernel(mode: &ChannelMode, event: GateEvent) -> Result<Vec<(ChannelEdge, f64)>> {
    let w = edge_weights(mode, event);
    let total: f64 = w.iter().map(|e| e.1).sum();
    if !(total > 0.0) {
        return Err(PdmpError::Inconsistent(format!("no channel can realize {event:?} from {mode:?}")));
    }
    Ok(w.into_iter().map(|(e, x)| (e, x / total)).collect())
}

/// Full transition law as (gate event probability) x (edge probability).
pub fn decomposed_kernel(mode: &ChannelMode, totals: [u32; 3], v: f64) -> Result<Vec<(ChannelEdge, f64)>> {
    let w = gate_event_weights(mode.eta(), totals, &GateRates::at(v));
    let lambda: f64 = w.iter().sum();
    if !(lambda > 0.0) {
        return Err(PdmpError::NoTransition);
    }
    let mut out = Vec::new();
    for (event, &we) in GateEvent::ALL.iter().zip(&w) {
        if we > 0.0 {
            for (edge, p) in edge_kernel(mode, *event)? {
                out.push((edge, we / lambda * p));
            }
        }
    }
    Ok(out)
}

/// Rates of every kinetic edge out of `mode` (per-channel rate times the
/// number of channels in the source state).
pub fn direct_edge_rates(mode: &ChannelMode, v: f64, scheme: KineticScheme) -> Vec<(ChannelEdge, f64)> {
    let r = GateRates::at(v);
    let mut out = Vec::with_capacity(28);
    for j in 0..2 {
        for i in 0..3 {
            let c = f64::from(mode.na[i][j]);
            out.push((ChannelEdge::Na { from: (i, j), to: (i + 1, j) }, (3 - i) as f64 * r.alpha_m * c));
        }
        for i in 1..4 {
            let c = f64::from(mode.na[i][j]);
            out.push((ChannelEdge::Na { from: (i, j), to: (i - 1, j) }, i as f64 * r.beta_m * c));
        }
    }
    for i in 0..4 {
        out.push((ChannelEdge::Na { from: (i, 0), to: (i, 1) }, r.alpha_h * f64::from(mode.na[i][0])));
        out.push((ChannelEdge::Na { from: (i, 1), to: (i, 0) }, r.beta_h * f64::from(mode.na[i][1])));
    }
    for l in 0..4 {
        out.push((ChannelEdge::K { from: l, to: l + 1 }, (4 - l) as f64 * r.alpha_n * f64::from(mode.k[l])));
    }
    for l in 1..5 {
        out.push((ChannelEdge::K { from: l, to: l - 1 }, scheme.k_close_coefficient(l) * r.beta_n * f64::from(mode.k[l])));
    }
    out
}

/// Transition law of the 28-edge chain, normalized by its own total rate.
pub fn direct_kernel(mode: &ChannelMode, v: f64, scheme: KineticScheme) -> Result<Vec<(ChannelEdge, f64)>> {
    let rates = direct_edge_rates(mode, v, scheme);
    let total: f64 = rates.iter().map(|e| e.1).sum();
    if !(total > 0.0) {
        return Err(PdmpError::NoTransition);
    }
    Ok(rates.into_iter().filter(|e| e.1 > 0.0).map(|(e, r)| (e, r / total)).collect())
}

/// Kinetic-scheme model: conductance follows the fraction of channels in
/// the conducting states.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    params: HHParams,
    drive: PulseCurrent,
}

impl ChannelModel {
    pub fn new(params: HHParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            drive: params.drive(),
            params,
        })
    }

    pub fn params(&self) -> &HHParams {
        &self.params
    }

    pub fn initial_state(&self) -> HybridState<ChannelMode> {
        HybridState {
            mode: ChannelMode::resting(self.params.n_na, self.params.n_k),
            voltage: 0.0,
            time: 0.0,
        }
    }

    pub fn flow_coefficients(&self, mode: &ChannelMode) -> (f64, f64) {
        let p = &self.params;
        let (na_open, k_open) = mode.conducting();
        let fna = f64::from(na_open) / f64::from(p.n_na);
        let fk = f64::from(k_open) / f64::from(p.n_k);
        let a = (p.g_l + p.g_na * fna + p.g_k * fk) / p.capacitance;
        let b = (p.g_l * p.v_l + p.g_na * p.v_na * fna + p.g_k * p.v_k * fk) / p.capacitance;
        (a, b)
    }

    pub fn rate_at(&self, mode: &ChannelMode, v: f64) -> f64 {
        gate_rate(mode.eta().as_array(), self.params.gate_totals(), &GateRates::at(v))
    }

    /// Two-stage draw: a gate event, then the channel edge realizing it.
    pub fn sample_transition(&self, mode: &ChannelMode, v: f64, rng: &mut RngStream) -> Result<ChannelEdge> {
        let w = gate_event_weights(mode.eta(), self.params.gate_totals(), &GateRates::at(v));
        let event = GateEvent::ALL[draw_index(&w, rng).ok_or(PdmpError::NoTransition)?];
        let edges = edge_weights(mode, event);
        let weights: Vec<f64> = edges.iter().map(|e| e.1).collect();
        let idx = draw_index(&weights, rng)
            .ok_or_else(|| PdmpError::Inconsistent(format!("no channel can realize {event:?} from {mode:?}")))?;
        Ok(edges[idx].0)
    }
}

impl PdmpModel for ChannelModel {
    type Mode = ChannelMode;

    fn segment(&self, state: HybridState<ChannelMode>) -> FlowSegment<ChannelMode> {
        let (a, b) = self.flow_coefficients(&state.mode);
        FlowSegment { start: state, a, b }
    }

    fn drive(&self) -> PulseCurrent {
        self.drive
    }

    #[inline]
    fn rate(&self, x: &HybridState<ChannelMode>) -> f64 {
        self.rate_at(&x.mode, x.voltage)
    }

    fn sample_kernel(&self, x: &HybridState<ChannelMode>, rng: &mut RngStream) -> Result<ChannelMode> {
        Ok(self.sample_transition(&x.mode, x.voltage, rng)?.apply(&x.mode))
    }

    fn voltage_bounds(&self, seg: &FlowSegment<ChannelMode>, window: Window) -> VoltageBounds {
        self.params.clamp(crate::model::linear_flow_bounds(seg, &self.drive, window))
    }

    fn rate_sup_from_bounds(&self, mode: &ChannelMode, b: VoltageBounds) -> f64 {
        gate_rate(mode.eta().as_array(), self.params.gate_totals(), &GateRates::sup_over(b.low, b.high))
    }

    fn rate_inf_from_bounds(&self, mode: &ChannelMode, b: VoltageBounds) -> f64 {
        gate_rate(mode.eta().as_array(), self.params.gate_totals(), &GateRates::inf_over(b.low, b.high))
    }

    fn global_rate_bound(&self) -> Option<f64> {
        Some(self.params.global_rate_bound())
    }

    fn is_valid_mode(&self, mode: &ChannelMode) -> bool {
        mode.n_na() == self.params.n_na && mode.n_k() == self.params.n_k
    }
}

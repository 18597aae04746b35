use serde::{Deserialize, Serialize};

use crate::error::{PdmpError, Result};
use crate::hh::{gate_rate, GateRates, HHParams};
use crate::model::{FlowSegment, HybridState, PdmpModel, PulseCurrent, VoltageBounds, Window};
use crate::rng::RngStream;

/// Numbers of open `n`, `m` and `h` gates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubunitMode {
    pub open_n: u32,
    pub open_m: u32,
    pub open_h: u32,
}

impl SubunitMode {
    pub fn new(open_n: u32, open_m: u32, open_h: u32) -> Self {
        Self { open_n, open_m, open_h }
    }

    pub fn as_array(&self) -> [u32; 3] {
        [self.open_n, self.open_m, self.open_h]
    }

    pub fn apply(self, event: GateEvent) -> Self {
        let mut m = self;
        match event {
            GateEvent::NOpen => m.open_n += 1,
            GateEvent::NClose => m.open_n -= 1,
            GateEvent::MOpen => m.open_m += 1,
            GateEvent::MClose => m.open_m -= 1,
            GateEvent::HOpen => m.open_h += 1,
            GateEvent::HClose => m.open_h -= 1,
        }
        m
    }
}

/// A single gate opening or closing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateEvent {
    NOpen,
    NClose,
    MOpen,
    MClose,
    HOpen,
    HClose,
}

impl GateEvent {
    pub const ALL: [GateEvent; 6] = [
        GateEvent::NOpen,
        GateEvent::NClose,
        GateEvent::MOpen,
        GateEvent::MClose,
        GateEvent::HOpen,
        GateEvent::HClose,
    ];
}

/// Rates of the six gate events; they sum to the total jump rate.
pub fn gate_event_weights(open: SubunitMode, totals: [u32; 3], r: &GateRates) -> [f64; 6] {
    let [on, om, oh] = open.as_array().map(f64::from);
    let [tn, tm, th] = totals.map(f64::from);
    [
        r.alpha_n * (tn - on),
        r.beta_n * on,
        r.alpha_m * (tm - om),
        r.beta_m * om,
        r.alpha_h * (th - oh),
        r.beta_h * oh,
    ]
}

/// Index drawn proportionally to `weights`; only positive weights can win.
pub(crate) fn draw_index(weights: &[f64], rng: &mut RngStream) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.next_uniform() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// Draw a gate event at voltage `v`.
pub fn sample_gate_event(open: SubunitMode, totals: [u32; 3], v: f64, rng: &mut RngStream) -> Result<GateEvent> {
    let w = gate_event_weights(open, totals, &GateRates::at(v));
    draw_index(&w, rng).map(|i| GateEvent::ALL[i]).ok_or(PdmpError::NoTransition)
}

/// Gate-count model: conductance follows the fraction of open gates.
#[derive(Clone, Debug)]
pub struct SubunitModel {
    params: HHParams,
    drive: PulseCurrent,
}

impl SubunitModel {
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

    /// All gates closed, V = 0, t = 0.
    pub fn initial_state(&self) -> HybridState<SubunitMode> {
        HybridState {
            mode: SubunitMode::default(),
            voltage: 0.0,
            time: 0.0,
        }
    }

    /// Flow coefficients `(a, b)` for a gate configuration.
    pub fn flow_coefficients(&self, mode: &SubunitMode) -> (f64, f64) {
        let p = &self.params;
        let [tn, tm, th] = p.gate_totals().map(f64::from);
        let fm = f64::from(mode.open_m) / tm;
        let na = fm * fm * fm * (f64::from(mode.open_h) / th);
        let fn_ = f64::from(mode.open_n) / tn;
        let k = fn_ * fn_ * fn_ * fn_;
        let a = (p.g_l + p.g_na * na + p.g_k * k) / p.capacitance;
        let b = (p.g_l * p.v_l + p.g_na * p.v_na * na + p.g_k * p.v_k * k) / p.capacitance;
        (a, b)
    }

    pub fn rate_at(&self, mode: &SubunitMode, v: f64) -> f64 {
        gate_rate(mode.as_array(), self.params.gate_totals(), &GateRates::at(v))
    }
}

impl PdmpModel for SubunitModel {
    type Mode = SubunitMode;

    fn segment(&self, state: HybridState<SubunitMode>) -> FlowSegment<SubunitMode> {
        let (a, b) = self.flow_coefficients(&state.mode);
        FlowSegment { start: state, a, b }
    }

    fn drive(&self) -> PulseCurrent {
        self.drive
    }

    #[inline]
    fn rate(&self, x: &HybridState<SubunitMode>) -> f64 {
        self.rate_at(&x.mode, x.voltage)
    }

    fn sample_kernel(&self, x: &HybridState<SubunitMode>, rng: &mut RngStream) -> Result<SubunitMode> {
        let event = sample_gate_event(x.mode, self.params.gate_totals(), x.voltage, rng)?;
        Ok(x.mode.apply(event))
    }

    fn voltage_bounds(&self, seg: &FlowSegment<SubunitMode>, window: Window) -> VoltageBounds {
        self.params.clamp(crate::model::linear_flow_bounds(seg, &self.drive, window))
    }

    fn rate_sup_from_bounds(&self, mode: &SubunitMode, b: VoltageBounds) -> f64 {
        gate_rate(mode.as_array(), self.params.gate_totals(), &GateRates::sup_over(b.low, b.high))
    }

    fn rate_inf_from_bounds(&self, mode: &SubunitMode, b: VoltageBounds) -> f64 {
        gate_rate(mode.as_array(), self.params.gate_totals(), &GateRates::inf_over(b.low, b.high))
    }

    fn global_rate_bound(&self) -> Option<f64> {
        Some(self.params.global_rate_bound())
    }

    fn is_valid_mode(&self, mode: &SubunitMode) -> bool {
        let [tn, tm, th] = self.params.gate_totals();
        mode.open_n <= tn && mode.open_m <= tm && mode.open_h <= th
    }
}

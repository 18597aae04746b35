//! The PDMP model contract: hybrid states, closed-form linear flows,
//! trajectories and the [`PdmpModel`] trait every simulated model implements.
//!
//! All implemented models share a scalar continuous component driven by the
//! affine ODE `dV/dt = -a V + b + I(t)` between jumps, where `a` and `b`
//! depend on the discrete mode and `I` is a rectangular pulse (already divided
//! by the membrane capacitance). Flows are evaluated from the segment start
//! by offset, never by absolute time, so long horizons lose no precision.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{PdmpError, Result};
use crate::rng::RngStream;

/// A PDMP point: discrete mode, continuous voltage and absolute time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridState<M> {
    pub mode: M,
    pub voltage: f64,
    pub time: f64,
}

impl<M> HybridState<M> {
    pub fn new(mode: M, voltage: f64, time: f64) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(crate::error::invalid("time", format!("{time} must be finite and >= 0")));
        }
        if !voltage.is_finite() {
            return Err(crate::error::invalid("voltage", format!("{voltage} is not finite")));
        }
        Ok(Self {
            mode,
            voltage,
            time,
        })
    }
}

/// Rectangular stimulation `I(t) = amplitude * 1[start, end](t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseCurrent {
    pub amplitude: f64,
    pub start: f64,
    pub end: f64,
}

impl PulseCurrent {
    pub fn new(amplitude: f64, start: f64, end: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(crate::error::invalid("pulse.amplitude", "must be finite and >= 0"));
        }
        if !(start <= end && start.is_finite() && end.is_finite()) {
            return Err(crate::error::invalid("pulse", format!("need t1 <= t2, got ({start}, {end})")));
        }
        Ok(Self {
            amplitude,
            start,
            end,
        })
    }

    pub const fn none() -> Self {
        Self {
            amplitude: 0.0,
            start: 0.0,
            end: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        if t >= self.start && t <= self.end {
            self.amplitude
        } else {
            0.0
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            amplitude: self.amplitude * factor,
            ..*self
        }
    }

    /// Support of the pulse intersected with `[anchor, anchor + upto]`,
    /// expressed as offsets from `anchor`. `None` when empty or when the
    /// amplitude is zero.
    #[inline]
    fn overlap(&self, anchor: f64, upto: f64) -> Option<(f64, f64)> {
        if self.amplitude == 0.0 {
            return None;
        }
        let lo = (self.start - anchor).max(0.0);
        let hi = (self.end - anchor).min(upto);
        (hi > lo).then_some((lo, hi))
    }
}

/// `int_{anchor}^{t} e^{a (s - anchor)} I(s) ds` in closed form.
pub fn pulse_integral(a: f64, anchor: f64, t: f64, pulse: &PulseCurrent) -> Result<f64> {
    if t < anchor {
        return Err(crate::error::invalid("t", "must be >= anchor"));
    }
    let Some((lo, hi)) = pulse.overlap(anchor, t - anchor) else {
        return Ok(0.0);
    };
    let v = if a == 0.0 {
        pulse.amplitude * (hi - lo)
    } else {
        pulse.amplitude / a * ((a * hi).exp() - (a * lo).exp())
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PdmpError::NumericOverflow {
            what: "pulse integral",
        })
    }
}

/// One deterministic piece of a trajectory: `dV/dt = -a V + b + I(t)`
/// started from `start`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSegment<M> {
    pub start: HybridState<M>,
    pub a: f64,
    pub b: f64,
}

impl<M> FlowSegment<M> {
    pub fn start_time(&self) -> f64 {
        self.start.time
    }

    /// Equilibrium `b / a` of the current-free flow (infinite when `a == 0`).
    pub fn equilibrium(&self) -> f64 {
        if self.a == 0.0 {
            f64::INFINITY.copysign(self.b)
        } else {
            self.b / self.a
        }
    }

    /// Current-free part `f(s) = b/a + (V0 - b/a) e^{-a s}`.
    #[inline]
    pub fn free_part(&self, offset: f64) -> f64 {
        if self.a == 0.0 {
            self.start.voltage + self.b * offset
        } else {
            let eq = self.b / self.a;
            eq + (self.start.voltage - eq) * (-self.a * offset).exp()
        }
    }

    /// Driven part `e^{-a s} int_0^s e^{a r} I(T + r) dr`, evaluated without
    /// growing exponentials.
    #[inline]
    pub fn driven_part(&self, offset: f64, drive: &PulseCurrent) -> f64 {
        match drive.overlap(self.start.time, offset) {
            None => 0.0,
            Some((lo, hi)) => {
                if self.a == 0.0 {
                    drive.amplitude * (hi - lo)
                } else {
                    drive.amplitude / self.a
                        * ((self.a * (hi - offset)).exp() - (self.a * (lo - offset)).exp())
                }
            }
        }
    }

    /// Voltage at `offset >= 0` after the segment start.
    #[inline]
    pub fn voltage_at_offset(&self, offset: f64, drive: &PulseCurrent) -> Result<f64> {
        if offset == 0.0 {
            return Ok(self.start.voltage);
        }
        let v = self.free_part(offset) + self.driven_part(offset, drive);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(PdmpError::NumericOverflow { what: "flow" })
        }
    }
}

/// Closed-form flow at absolute time `t >= seg.start_time()`.
pub fn evaluate_flow<M>(seg: &FlowSegment<M>, t: f64, drive: &PulseCurrent) -> Result<f64> {
    let offset = t - seg.start.time;
    if offset < 0.0 {
        return Err(crate::error::invalid("t", "must not precede the segment start"));
    }
    seg.voltage_at_offset(offset, drive)
}

/// Offset window `[start, end)` after a segment start; `end` may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub const WHOLE: Window = Window {
        start: 0.0,
        end: f64::INFINITY,
    };

    pub fn new(start: f64, end: f64) -> Self {
        debug_assert!(start >= 0.0 && start < end);
        Self { start, end }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageBounds {
    pub low: f64,
    pub high: f64,
}

impl VoltageBounds {
    pub fn point(v: f64) -> Self {
        Self { low: v, high: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

/// Rigorous bounds of a linear flow over an offset window.
///
/// The current-free part is monotone, so its extremes sit at the window
/// endpoints (or at the equilibrium `b/a` for an unbounded window). The
/// driven part is padded by `e^{-a u1} G(u2)` above and `e^{-a u2} G(u1)`
/// below, with `G(u) = int_0^u e^{a r} I dr`; on the unbounded window the
/// upper padding is `K / a`. The driven part never exceeds `K / a`, so the
/// finite-window padding is capped there; this also keeps every window
/// bound inside the whole-flow bound.
pub fn linear_flow_bounds<M>(seg: &FlowSegment<M>, drive: &PulseCurrent, window: Window) -> VoltageBounds {
    let a = seg.a;
    let k = drive.amplitude;
    let f1 = seg.free_part(window.start);
    if window.end.is_infinite() {
        let eq = seg.equilibrium();
        let pad = if k == 0.0 {
            0.0
        } else if a == 0.0 {
            f64::INFINITY
        } else {
            k / a
        };
        return VoltageBounds {
            low: f1.min(eq),
            high: f1.max(eq) + pad,
        };
    }
    let f2 = seg.free_part(window.end);
    let anchor = seg.start.time;
    let upper_pad = match drive.overlap(anchor, window.end) {
        None => 0.0,
        Some((lo, hi)) if a == 0.0 => k * (hi - lo),
        Some((lo, hi)) => {
            let whole = k / a;
            let exponent = a * (hi - window.start);
            if exponent > 700.0 {
                whole
            } else {
                whole.min(k / a * ((a * (lo - window.start)).exp() * (a * (hi - lo)).exp_m1()))
            }
        }
    };
    let lower_pad = match drive.overlap(anchor, window.start) {
        None => 0.0,
        Some((lo, hi)) if a == 0.0 => k * (hi - lo),
        Some((lo, hi)) => k / a * ((a * (hi - window.end)).exp() - (a * (lo - window.end)).exp()),
    };
    VoltageBounds {
        low: f1.min(f2) + lower_pad,
        high: f1.max(f2) + upper_pad,
    }
}

/// Behavioural contract of a simulable PDMP with a scalar linear flow.
pub trait PdmpModel: Sync {
    type Mode: Copy + Debug + PartialEq + Send + Sync + Serialize;

    /// Flow coefficients for the segment starting at `state`.
    fn segment(&self, state: HybridState<Self::Mode>) -> FlowSegment<Self::Mode>;

    /// External drive divided by capacitance.
    fn drive(&self) -> PulseCurrent {
        PulseCurrent::none()
    }

    /// Voltage at `offset` along the flow of `seg`.
    #[inline]
    fn flow(&self, seg: &FlowSegment<Self::Mode>, offset: f64) -> Result<f64> {
        seg.voltage_at_offset(offset, &self.drive())
    }

    /// Jump rate at a point on the flow.
    fn rate(&self, x: &HybridState<Self::Mode>) -> f64;

    /// Draw the post-jump mode from the kernel at the pre-jump point `x`.
    fn sample_kernel(&self, x: &HybridState<Self::Mode>, rng: &mut RngStream) -> Result<Self::Mode>;

    /// Bounds on the flow voltage over a window of offsets.
    fn voltage_bounds(&self, seg: &FlowSegment<Self::Mode>, window: Window) -> VoltageBounds {
        linear_flow_bounds(seg, &self.drive(), window)
    }

    /// Upper bound on the rate for the given mode over a voltage interval.
    fn rate_sup_from_bounds(&self, mode: &Self::Mode, bounds: VoltageBounds) -> f64;

    /// Lower bound on the rate for the given mode over a voltage interval.
    fn rate_inf_from_bounds(&self, _mode: &Self::Mode, _bounds: VoltageBounds) -> f64 {
        0.0
    }

    /// State-independent supremum of the rate, if finite.
    fn global_rate_bound(&self) -> Option<f64> {
        None
    }

    fn is_valid_mode(&self, mode: &Self::Mode) -> bool;
}

/// Accepted jump times with post-jump states and per-segment flows.
///
/// Index 0 holds the initial time and state, so the number of jumps is
/// `jump_times.len() - 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory<M> {
    pub jump_times: Vec<f64>,
    pub post_jump_states: Vec<HybridState<M>>,
    pub segments: Vec<FlowSegment<M>>,
    pub horizon: f64,
    /// Every proposed time, when candidate recording was requested.
    pub candidates: Option<Vec<f64>>,
}

impl<M: Copy> Trajectory<M> {
    pub(crate) fn start(seg: FlowSegment<M>, horizon: f64, record_candidates: bool) -> Self {
        Self {
            jump_times: vec![seg.start.time],
            post_jump_states: vec![seg.start],
            segments: vec![seg],
            horizon,
            candidates: record_candidates.then(Vec::new),
        }
    }

    pub(crate) fn push(&mut self, seg: FlowSegment<M>) {
        self.jump_times.push(seg.start.time);
        self.post_jump_states.push(seg.start);
        self.segments.push(seg);
    }

    pub fn jump_count(&self) -> usize {
        self.jump_times.len() - 1
    }

    /// Accepted jump times, excluding the initial time.
    pub fn jumps(&self) -> &[f64] {
        &self.jump_times[1..]
    }

    /// End time of segment `i`: the next jump or the horizon.
    pub fn segment_end(&self, i: usize) -> f64 {
        self.jump_times.get(i + 1).copied().unwrap_or(self.horizon)
    }

    pub fn is_well_formed(&self) -> bool {
        let n = self.jump_times.len();
        n >= 1
            && self.post_jump_states.len() == n
            && self.segments.len() == n
            && self.jump_times.windows(2).all(|w| w[0] < w[1])
            && self.jump_times[n - 1] <= self.horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;

    fn seg(v0: f64, a: f64, b: f64, t0: f64) -> FlowSegment<()> {
        FlowSegment {
            start: HybridState {
                mode: (),
                voltage: v0,
                time: t0,
            },
            a,
            b,
        }
    }

    /// Classical RK4 with step doubling until the relative change is below `rtol`.
    fn rk4_oracle(v0: f64, a: f64, b: f64, pulse: &PulseCurrent, t0: f64, dt: f64, rtol: f64) -> f64 {
        let integrate = |steps: usize| {
            // Align steps with the pulse edges so the right-hand side is smooth within each step.
            let mut marks = vec![t0, t0 + dt];
            for e in [pulse.start, pulse.end] {
                if e > t0 && e < t0 + dt {
                    marks.push(e);
                }
            }
            marks.sort_by(f64::total_cmp);
            let mut v = v0;
            for w in marks.windows(2) {
                let h = (w[1] - w[0]) / steps as f64;
                let mid = 0.5 * (w[0] + w[1]);
                let drive = pulse.at(mid);
                let rhs_piece = |v: f64| -a * v + b + drive;
                for _ in 0..steps {
                    let k1 = rhs_piece(v);
                    let k2 = rhs_piece(v + 0.5 * h * k1);
                    let k3 = rhs_piece(v + 0.5 * h * k2);
                    let k4 = rhs_piece(v + h * k3);
                    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
            }
            v
        };
        let mut steps = 64;
        let mut prev = integrate(steps);
        loop {
            steps *= 2;
            let next = integrate(steps);
            if (next - prev).abs() <= rtol * next.abs().max(1e-12) || steps > 1 << 20 {
                return next;
            }
            prev = next;
        }
    }

    #[test]
    fn zero_fixed_point() {
        let s = seg(0.0, 1.0, 0.0, 0.0);
        for t in [0.0, 0.5, 3.0, 100.0] {
            assert_eq!(evaluate_flow(&s, t, &PulseCurrent::none()).unwrap(), 0.0);
        }
    }

    #[test]
    fn equilibrium_is_fixed() {
        let s = seg(4.0, 0.5, 2.0, 1.0);
        for t in [1.0, 2.0, 50.0] {
            let v = evaluate_flow(&s, t, &PulseCurrent::none()).unwrap();
            assert!((v - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relaxation_matches_rk4() {
        // dV/dt = -0.5 V + 1 from 0 over 2 ms.
        let s = seg(0.0, 0.5, 1.0, 0.0);
        let v = evaluate_flow(&s, 2.0, &PulseCurrent::none()).unwrap();
        let oracle = rk4_oracle(0.0, 0.5, 1.0, &PulseCurrent::none(), 0.0, 2.0, 1e-10);
        assert!((oracle - 1.264_241_117_657_115).abs() < 1e-9);
        assert!((v - oracle).abs() < 1e-9 * oracle);
    }

    #[test]
    fn pulse_integral_cases() {
        let p0 = PulseCurrent::new(0.0, 1.0, 2.0).unwrap();
        assert_eq!(pulse_integral(1.0, 0.0, 5.0, &p0).unwrap(), 0.0);
        let p = PulseCurrent::new(30.0, 1.0, 2.0).unwrap();
        assert_eq!(pulse_integral(1.0, 0.0, 0.7, &p).unwrap(), 0.0);
        let v = pulse_integral(1.0, 0.0, 3.0, &p).unwrap();
        let quad = adaptive_simpson(&|s: f64| s.exp() * 30.0, 1.0, 2.0, 1e-12);
        let closed = 30.0 * (2f64.exp() - 1f64.exp());
        assert!((quad - closed).abs() < 1e-9);
        assert!((quad - 140.123_228).abs() < 1e-5);
        assert!((v - quad).abs() < 1e-10 * quad);
    }

    #[test]
    fn pulse_integral_overflow_is_reported() {
        let p = PulseCurrent::new(1.0, 0.0, 1e6).unwrap();
        assert!(matches!(
            pulse_integral(10.0, 0.0, 1e5, &p),
            Err(PdmpError::NumericOverflow { .. })
        ));
    }

    #[test]
    fn flow_is_continuous_at_start() {
        let p = PulseCurrent::new(30.0, 0.0, 2.0).unwrap();
        // Leak-only flow under the pulse: slopes stay below ~35 mV/ms.
        for v0 in [-12.0, 0.0, 57.3, 114.9] {
            let s = seg(v0, 0.3, 0.0, 0.5);
            let d = 1e-12 * (1.0 + f64::abs(v0));
            let v = s.voltage_at_offset(d, &p).unwrap();
            assert!((v - v0).abs() < 1e-9);
        }
        // Steep flows: the jump is bounded by slope times offset.
        for v0 in [-12.0, 0.0, 57.3, 114.9] {
            let s = seg(v0, 156.3, 13368.0, 0.5);
            let slope = (-156.3 * v0 + 13368.0 + 30.0f64).abs();
            for d in [1e-6, 1e-9, 1e-12] {
                let v = s.voltage_at_offset(d, &p).unwrap();
                assert!((v - v0).abs() <= slope * d * (1.0 + 1e-3) + 1e-12);
            }
        }
    }

    #[test]
    fn bounds_at_equilibrium_collapse() {
        let s = seg(2.0, 0.5, 1.0, 0.0);
        let b = linear_flow_bounds(&s, &PulseCurrent::none(), Window::WHOLE);
        assert_eq!(b, VoltageBounds::point(2.0));
    }

    #[test]
    fn whole_window_padding_is_k_over_a() {
        let s = seg(10.0, 2.0, 4.0, 0.0);
        let p = PulseCurrent::new(30.0, 1.0, 2.0).unwrap();
        let b = linear_flow_bounds(&s, &p, Window::WHOLE);
        assert!((b.high - (10.0 + 15.0)).abs() < 1e-12);
        assert_eq!(b.low, 2.0);
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn closed_form_matches_rk4(
            a in 0.3f64..60.0,
            b in -50.0f64..200.0,
            k in 0.0f64..40.0,
            t1 in 0.0f64..3.0,
            width in 0.0f64..2.0,
            v0 in -12.0f64..115.0,
            t0 in 0.0f64..3.0,
            dt in 0.001f64..4.0,
        ) {
            let p = PulseCurrent::new(k, t1, t1 + width).unwrap();
            let s = seg(v0, a, b, t0);
            let v = evaluate_flow(&s, t0 + dt, &p).unwrap();
            let oracle = rk4_oracle(v0, a, b, &p, t0, dt, 1e-12);
            prop_assert!((v - oracle).abs() <= 1e-8 * oracle.abs().max(1.0), "{v} vs {oracle}");
        }

        #[test]
        fn window_bounds_contain_dense_flow(
            a in 0.3f64..160.0,
            b in -500.0f64..14000.0,
            k in 0.0f64..40.0,
            t1 in 0.0f64..3.0,
            v0 in -12.0f64..115.0,
            t0 in 0.0f64..3.0,
            u1 in 0.0f64..2.0,
            len in 0.0005f64..2.0,
        ) {
            let p = PulseCurrent::new(k, t1, t1 + 1.0).unwrap();
            let s = seg(v0, a, b, t0);
            for window in [Window::new(u1, u1 + len), Window::new(u1, f64::INFINITY)] {
                let bounds = linear_flow_bounds(&s, &p, window);
                let stop = window.end.min(window.start + 20.0);
                let n = (((stop - window.start) / 1e-3).ceil() as usize).min(4000);
                for i in 0..n {
                    let off = window.start + (stop - window.start) * i as f64 / n as f64;
                    let v = s.voltage_at_offset(off, &p).unwrap();
                    let slack = 1e-9 * v.abs().max(1.0);
                    prop_assert!(v >= bounds.low - slack && v <= bounds.high + slack,
                        "v={v} bounds={bounds:?} window={window:?}");
                }
            }
        }
    }
}

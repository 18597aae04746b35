//! Stochastic Hodgkin-Huxley models.
//!
//! Two discrete descriptions of the same membrane patch share the rate
//! functions and constants here: [`SubunitModel`] tracks open gate counts,
//! [`ChannelModel`] tracks how many channels sit in each kinetic state.
//! A fixed-step RK4 integrator of the four-dimensional deterministic system
//! lives in [`deterministic`].

pub mod channel;
pub mod deterministic;
pub mod rates;
pub mod subunit;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{PulseCurrent, VoltageBounds};

pub use channel::{ChannelMode, ChannelModel, KineticScheme};
pub use rates::GateRates;
pub use subunit::{GateEvent, SubunitMode, SubunitModel};

/// Membrane constants, channel counts and stimulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HHParams {
    pub v_na: f64,
    pub g_na: f64,
    pub v_k: f64,
    pub g_k: f64,
    pub v_l: f64,
    pub g_l: f64,
    pub capacitance: f64,
    pub n_na: u32,
    pub n_k: u32,
    pub pulse: PulseCurrent,
    /// Intersect flow bounds with the invariant voltage region before
    /// evaluating rate bounds.
    #[serde(default)]
    pub clamp_to_invariant_region: bool,
}

impl HHParams {
    /// Standard constants with `n_chan` sodium and potassium channels and
    /// the default stimulation `30 * 1[1, 2]`.
    pub fn standard(n_chan: u32) -> Self {
        Self {
            v_na: 115.0,
            g_na: 120.0,
            v_k: -12.0,
            g_k: 36.0,
            v_l: 0.0,
            g_l: 0.3,
            capacitance: 1.0,
            n_na: n_chan,
            n_k: n_chan,
            pulse: PulseCurrent {
                amplitude: 30.0,
                start: 1.0,
                end: 2.0,
            },
            clamp_to_invariant_region: false,
        }
    }

    pub fn with_pulse(mut self, pulse: PulseCurrent) -> Self {
        self.pulse = pulse;
        self
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp_to_invariant_region = clamp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_l > 0.0) {
            return Err(invalid("g_l", "leak conductance must be > 0"));
        }
        if !(self.capacitance > 0.0) {
            return Err(invalid("capacitance", "must be > 0"));
        }
        if !(self.g_na >= 0.0 && self.g_k >= 0.0) {
            return Err(invalid("conductance", "must be >= 0"));
        }
        if self.n_na == 0 || self.n_k == 0 {
            return Err(invalid("n_chan", "channel counts must be >= 1"));
        }
        PulseCurrent::new(self.pulse.amplitude, self.pulse.start, self.pulse.end)?;
        Ok(())
    }

    /// Gate totals `(N_n, N_m, N_h)`.
    pub fn gate_totals(&self) -> [u32; 3] {
        [4 * self.n_k, 3 * self.n_na, self.n_na]
    }

    /// Drive divided by the capacitance.
    pub fn drive(&self) -> PulseCurrent {
        self.pulse.scaled(1.0 / self.capacitance)
    }

    /// Voltage interval that no trajectory started inside can leave.
    ///
    /// Below the lowest reversal potential every current pushes V up. Above
    /// `max(reversals)` every ionic current pushes V down, and the leak alone
    /// beats the drive once `V > V_L + K / g_L`.
    pub fn invariant_region(&self) -> VoltageBounds {
        let low = self.v_na.min(self.v_k).min(self.v_l);
        let top = self.v_na.max(self.v_k).max(self.v_l);
        VoltageBounds {
            low,
            high: top.max(self.v_l + self.pulse.amplitude / self.g_l),
        }
    }

    pub fn clamp(&self, b: VoltageBounds) -> VoltageBounds {
        if !self.clamp_to_invariant_region {
            return b;
        }
        let r = self.invariant_region();
        let low = b.low.clamp(r.low, r.high);
        let high = b.high.clamp(r.low, r.high);
        VoltageBounds { low, high: high.max(low) }
    }

    /// State-independent bound: every gate moves at its fastest possible
    /// rate over the invariant region.
    pub fn global_rate_bound(&self) -> f64 {
        let r = self.invariant_region();
        let up = GateRates::sup_over(r.low, r.high);
        let [nn, nm, nh] = self.gate_totals().map(f64::from);
        nm * up.alpha_m.max(up.beta_m) + nh * up.alpha_h.max(up.beta_h) + nn * up.alpha_n.max(up.beta_n)
    }
}

/// Total gate-switching rate for open counts `(n, m, h)` out of `totals`.
#[inline]
pub fn gate_rate(open: [u32; 3], totals: [u32; 3], r: &GateRates) -> f64 {
    let [on, om, oh] = open.map(f64::from);
    let [tn, tm, th] = totals.map(f64::from);
    (r.alpha_m * (tm - om) + r.beta_m * om) + (r.alpha_h * (th - oh) + r.beta_h * oh) + (r.alpha_n * (tn - on) + r.beta_n * on)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hh::rates::*;

    #[test]
    fn global_bound_single_channel() {
        let p = HHParams::standard(1);
        let expected = 3.0 * alpha_m(115.0) + beta_h(115.0) + 4.0 * alpha_n(115.0);
        assert!((p.global_rate_bound() - expected).abs() < 1e-12);
        // Independent evaluation of the three terms.
        let am = -9.0 / ((-9.0f64).exp() - 1.0);
        let bh = 1.0 / ((-8.5f64).exp() + 1.0);
        let an = -1.05 / ((-10.5f64).exp() - 1.0);
        assert!((expected - (3.0 * am + bh + 4.0 * an)).abs() < 1e-12);
        // 32.2032 to four decimals.
        assert!((expected - 32.203_24).abs() < 1e-5, "{expected}");
    }

    #[test]
    fn invariant_region_with_default_pulse() {
        let r = HHParams::standard(1).invariant_region();
        assert_eq!((r.low, r.high), (-12.0, 115.0));
        let big = HHParams::standard(1).with_pulse(PulseCurrent::new(60.0, 1.0, 2.0).unwrap());
        assert_eq!(big.invariant_region().high, 200.0);
    }

    #[test]
    fn closed_gates_rate_at_rest() {
        let p = HHParams::standard(1);
        let lam = gate_rate([0, 0, 0], p.gate_totals(), &GateRates::at(0.0));
        let direct = 3.0 * (2.5 / (2.5f64.exp() - 1.0)) + 0.07 + 4.0 * (0.1 / (1f64.exp() - 1.0));
        assert!((lam - direct).abs() < 1e-14);
        assert!((lam - 0.973_48).abs() < 1e-5, "{lam}");
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = HHParams::standard(3);
        p.g_l = 0.0;
        assert!(p.validate().is_err());
        assert!(HHParams::standard(0).validate().is_err());
        assert!(HHParams::standard(1).validate().is_ok());
    }
}

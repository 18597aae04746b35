//! Small PDMPs with known answers, used by the validation suite and the
//! `constant-test` / `poisson-test` CLI models.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{FlowSegment, HybridState, PdmpModel, VoltageBounds};
use crate::rng::RngStream;

/// Constant jump rate `c` with a two-state flip-flop mode and a frozen
/// voltage. Every envelope strategy reports the configured level `c_tilde`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantRateModel {
    rate: f64,
    envelope: f64,
}

impl ConstantRateModel {
    pub fn new(rate: f64, envelope: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid("rate", "must be finite and >= 0"));
        }
        if !(envelope >= rate && envelope.is_finite()) {
            return Err(invalid("envelope", "must be finite and >= rate"));
        }
        Ok(Self { rate, envelope })
    }

    pub fn rate_value(&self) -> f64 {
        self.rate
    }

    pub fn envelope_level(&self) -> f64 {
        self.envelope
    }

    pub fn initial_state(&self) -> HybridState<bool> {
        HybridState {
            mode: false,
            voltage: 0.0,
            time: 0.0,
        }
    }
}

impl PdmpModel for ConstantRateModel {
    type Mode = bool;

    fn segment(&self, state: HybridState<bool>) -> FlowSegment<bool> {
        FlowSegment {
            a: 1.0,
            b: state.voltage,
            start: state,
        }
    }

    fn rate(&self, _x: &HybridState<bool>) -> f64 {
        self.rate
    }

    fn sample_kernel(&self, x: &HybridState<bool>, _rng: &mut RngStream) -> Result<bool> {
        Ok(!x.mode)
    }

    fn rate_sup_from_bounds(&self, _mode: &bool, _b: VoltageBounds) -> f64 {
        self.envelope
    }

    fn rate_inf_from_bounds(&self, _mode: &bool, _b: VoltageBounds) -> f64 {
        self.rate
    }

    fn global_rate_bound(&self) -> Option<f64> {
        Some(self.envelope)
    }

    fn is_valid_mode(&self, _mode: &bool) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateProfile {
    /// `lambda(t) = t`.
    Linear,
    /// `lambda(t) = 1 + sin^2(t)`.
    SinSquared,
}

impl RateProfile {
    pub fn at(self, t: f64) -> f64 {
        match self {
            RateProfile::Linear => t,
            RateProfile::SinSquared => 1.0 + t.sin().powi(2),
        }
    }

    /// `int_0^t lambda`.
    pub fn integral(self, t: f64) -> f64 {
        match self {
            RateProfile::Linear => 0.5 * t * t,
            RateProfile::SinSquared => 1.5 * t - (2.0 * t).sin() / 4.0,
        }
    }

    /// Exact supremum over `[low, high]`.
    pub fn sup_over(self, low: f64, high: f64) -> f64 {
        match self {
            RateProfile::Linear => high,
            RateProfile::SinSquared => {
                if !high.is_finite() || high - low >= PI {
                    return 2.0;
                }
                // Peaks sit at pi/2 + k pi.
                let k = ((low - FRAC_PI_2) / PI).ceil();
                if FRAC_PI_2 + k * PI <= high {
                    2.0
                } else {
                    self.at(low).max(self.at(high))
                }
            }
        }
    }

    pub fn inf_over(self, low: f64, high: f64) -> f64 {
        match self {
            RateProfile::Linear => low.max(0.0),
            RateProfile::SinSquared => {
                if !high.is_finite() || high - low >= PI {
                    return 1.0;
                }
                let k = (low / PI).ceil();
                if k * PI <= high {
                    1.0
                } else {
                    self.at(low).min(self.at(high))
                }
            }
        }
    }
}

/// Inhomogeneous Poisson process with intensity `lambda(t)`: the voltage is
/// the clock (`dV/dt = 1`, V = t) and the mode counts jumps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClockModel {
    profile: RateProfile,
    global: Option<f64>,
}

impl ClockModel {
    /// `global` overrides the default constant bound (2 for `SinSquared`,
    /// none for `Linear`).
    pub fn new(profile: RateProfile, global: Option<f64>) -> Self {
        let default = match profile {
            RateProfile::Linear => None,
            RateProfile::SinSquared => Some(2.0),
        };
        Self {
            profile,
            global: global.or(default),
        }
    }

    pub fn profile(&self) -> RateProfile {
        self.profile
    }

    pub fn initial_state(&self) -> HybridState<u64> {
        HybridState {
            mode: 0,
            voltage: 0.0,
            time: 0.0,
        }
    }
}

impl PdmpModel for ClockModel {
    type Mode = u64;

    fn segment(&self, state: HybridState<u64>) -> FlowSegment<u64> {
        FlowSegment { start: state, a: 0.0, b: 1.0 }
    }

    fn rate(&self, x: &HybridState<u64>) -> f64 {
        self.profile.at(x.voltage)
    }

    fn sample_kernel(&self, x: &HybridState<u64>, _rng: &mut RngStream) -> Result<u64> {
        Ok(x.mode + 1)
    }

    fn rate_sup_from_bounds(&self, _mode: &u64, b: VoltageBounds) -> f64 {
        self.profile.sup_over(b.low, b.high)
    }

    fn rate_inf_from_bounds(&self, _mode: &u64, b: VoltageBounds) -> f64 {
        self.profile.inf_over(b.low, b.high)
    }

    fn global_rate_bound(&self) -> Option<f64> {
        self.global
    }

    fn is_valid_mode(&self, _mode: &u64) -> bool {
        true
    }
}

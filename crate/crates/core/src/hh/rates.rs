//! Voltage-dependent opening and closing rates (1/ms, V in mV).

use crate::numeric::x_over_expm1;

#[inline]
pub fn alpha_n(v: f64) -> f64 {
    0.1 * x_over_expm1(1.0 - 0.1 * v)
}

#[inline]
pub fn beta_n(v: f64) -> f64 {
    0.125 * (-v / 80.0).exp()
}

#[inline]
pub fn alpha_m(v: f64) -> f64 {
    x_over_expm1(2.5 - 0.1 * v)
}

#[inline]
pub fn beta_m(v: f64) -> f64 {
    4.0 * (-v / 18.0).exp()
}

#[inline]
pub fn alpha_h(v: f64) -> f64 {
    0.07 * (-v / 20.0).exp()
}

#[inline]
pub fn beta_h(v: f64) -> f64 {
    1.0 / ((3.0 - 0.1 * v).exp() + 1.0)
}

/// All six rates at one voltage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateRates {
    pub alpha_n: f64,
    pub beta_n: f64,
    pub alpha_m: f64,
    pub beta_m: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
}

impl GateRates {
    #[inline]
    pub fn at(v: f64) -> Self {
        Self {
            alpha_n: alpha_n(v),
            beta_n: beta_n(v),
            alpha_m: alpha_m(v),
            beta_m: beta_m(v),
            alpha_h: alpha_h(v),
            beta_h: beta_h(v),
        }
    }

    /// Rates picked so that each one is at its maximum over `[low, high]`:
    /// `alpha_n`, `alpha_m`, `beta_h` increase with V; the others decrease.
    #[inline]
    pub fn sup_over(low: f64, high: f64) -> Self {
        Self::mixed(high, low)
    }

    /// Rates at their minimum over `[low, high]`.
    #[inline]
    pub fn inf_over(low: f64, high: f64) -> Self {
        Self::mixed(low, high)
    }

    #[inline]
    fn mixed(v_increasing: f64, v_decreasing: f64) -> Self {
        Self {
            alpha_n: alpha_n(v_increasing),
            beta_n: beta_n(v_decreasing),
            alpha_m: alpha_m(v_increasing),
            beta_m: beta_m(v_decreasing),
            alpha_h: alpha_h(v_decreasing),
            beta_h: beta_h(v_increasing),
        }
    }

    pub fn all_non_negative(&self) -> bool {
        [self.alpha_n, self.beta_n, self.alpha_m, self.beta_m, self.alpha_h, self.beta_h]
            .iter()
            .all(|&r| r >= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn removable_singularities() {
        assert!((alpha_n(10.0) - 0.1).abs() < 1e-15);
        assert!((alpha_m(25.0) - 1.0).abs() < 1e-15);
        for d in [1e-6, -1e-6, 1e-7, -1e-9] {
            assert!((alpha_n(10.0 + d) - 0.1).abs() < 1e-7);
            assert!((alpha_m(25.0 + d) - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn values_at_rest() {
        assert!((alpha_h(0.0) - 0.07).abs() < 1e-15);
        assert!((beta_m(0.0) - 4.0).abs() < 1e-15);
        assert!((beta_n(0.0) - 0.125).abs() < 1e-15);
        // Direct quotient away from the singular points.
        let an = 0.1 / (1f64.exp() - 1.0);
        let am = 2.5 / (2.5f64.exp() - 1.0);
        assert!((alpha_n(0.0) - an).abs() < 1e-15);
        assert!((alpha_m(0.0) - am).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn monotone_directions(v in -50.0f64..150.0, dv in 1e-3f64..20.0) {
            let (lo, hi) = (GateRates::at(v), GateRates::at(v + dv));
            prop_assert!(hi.alpha_n > lo.alpha_n);
            prop_assert!(hi.alpha_m > lo.alpha_m);
            prop_assert!(hi.beta_h > lo.beta_h);
            prop_assert!(hi.beta_n < lo.beta_n);
            prop_assert!(hi.beta_m < lo.beta_m);
            prop_assert!(hi.alpha_h < lo.alpha_h);
            prop_assert!(lo.all_non_negative() && hi.all_non_negative());
        }

        #[test]
        fn quotient_form_agrees_off_singularity(v in -50.0f64..150.0) {
            prop_assume!((v - 10.0).abs() > 1e-3 && (v - 25.0).abs() > 1e-3);
            let an = (0.1 - 0.01 * v) / ((1.0 - 0.1 * v).exp() - 1.0);
            let am = (2.5 - 0.1 * v) / ((2.5 - 0.1 * v).exp() - 1.0);
            prop_assert!((alpha_n(v) - an).abs() <= 1e-9 * an.abs().max(1e-3));
            prop_assert!((alpha_m(v) - am).abs() <= 1e-9 * am.abs().max(1e-3));
        }
    }
}

//! Fixed-step RK4 integration of the four-dimensional deterministic system.
//! Used only as a reference for spiking times.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::hh::rates::GateRates;
use crate::hh::HHParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HHPoint {
    pub v: f64,
    pub m: f64,
    pub h: f64,
    pub n: f64,
}

impl HHPoint {
    /// Gate values at their voltage-`v` equilibria `alpha / (alpha + beta)`.
    pub fn steady(v: f64) -> Self {
        let r = GateRates::at(v);
        Self {
            v,
            m: r.alpha_m / (r.alpha_m + r.beta_m),
            h: r.alpha_h / (r.alpha_h + r.beta_h),
            n: r.alpha_n / (r.alpha_n + r.beta_n),
        }
    }

    fn axpy(&self, k: &HHPoint, s: f64) -> Self {
        Self {
            v: self.v + s * k.v,
            m: self.m + s * k.m,
            h: self.h + s * k.h,
            n: self.n + s * k.n,
        }
    }
}

/// Right-hand side at time `t`.
pub fn derivative(p: &HHParams, t: f64, x: &HHPoint) -> HHPoint {
    let r = GateRates::at(x.v);
    let i_na = p.g_na * x.m.powi(3) * x.h * (x.v - p.v_na);
    let i_k = p.g_k * x.n.powi(4) * (x.v - p.v_k);
    let i_l = p.g_l * (x.v - p.v_l);
    HHPoint {
        v: (p.pulse.at(t) - i_na - i_k - i_l) / p.capacitance,
        m: (1.0 - x.m) * r.alpha_m - x.m * r.beta_m,
        h: (1.0 - x.h) * r.alpha_h - x.h * r.beta_h,
        n: (1.0 - x.n) * r.alpha_n - x.n * r.beta_n,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterministicPath {
    pub times: Vec<f64>,
    pub points: Vec<HHPoint>,
}

impl DeterministicPath {
    /// First time V reaches `threshold`, linearly interpolated between grid
    /// points.
    pub fn first_crossing(&self, threshold: f64) -> Option<f64> {
        if self.points.first()?.v >= threshold {
            return Some(self.times[0]);
        }
        self.points.windows(2).zip(self.times.windows(2)).find_map(|(p, t)| {
            (p[1].v >= threshold).then(|| t[0] + (threshold - p[0].v) / (p[1].v - p[0].v) * (t[1] - t[0]))
        })
    }
}

/// Integrate from `start` over `[0, horizon]` with step `step`.
pub fn deterministic_hh(p: &HHParams, start: HHPoint, horizon: f64, step: f64) -> Result<DeterministicPath> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", "must be finite and > 0"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be finite and > 0"));
    }
    let steps = (horizon / step).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = start;
    times.push(0.0);
    points.push(x);
    for i in 0..steps {
        let t = i as f64 * step;
        let k1 = derivative(p, t, &x);
        let k2 = derivative(p, t + 0.5 * step, &x.axpy(&k1, 0.5 * step));
        let k3 = derivative(p, t + 0.5 * step, &x.axpy(&k2, 0.5 * step));
        let k4 = derivative(p, t + step, &x.axpy(&k3, step));
        x = HHPoint {
            v: x.v + step / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
            m: x.m + step / 6.0 * (k1.m + 2.0 * k2.m + 2.0 * k3.m + k4.m),
            h: x.h + step / 6.0 * (k1.h + 2.0 * k2.h + 2.0 * k3.h + k4.h),
            n: x.n + step / 6.0 * (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n),
        };
        times.push((i + 1) as f64 * step);
        points.push(x);
    }
    Ok(DeterministicPath { times, points })
}

/// Spiking time of the deterministic model started with closed gates at V = 0.
pub fn deterministic_spike_time(p: &HHParams, threshold: f64, horizon: f64, step: f64) -> Result<Option<f64>> {
    let start = HHPoint { v: 0.0, m: 0.0, h: 0.0, n: 0.0 };
    Ok(deterministic_hh(p, start, horizon, step)?.first_crossing(threshold))
}

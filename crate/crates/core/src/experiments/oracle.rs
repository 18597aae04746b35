//! Independent first-jump sampler by numerical inversion of the cumulative
//! hazard. Slow; meant for small validation cases only.

use crate::error::{PdmpError, Result};
use crate::model::{FlowSegment, HybridState, PdmpModel};
use crate::numeric::{adaptive_simpson, bisect, CompensatedSum};
use crate::rng::RngStream;

const ROOT_TOL: f64 = 1e-10;

pub struct InversionOracle<F: Fn(f64) -> f64> {
    rate: F,
    grid: Vec<f64>,
    cumulative: Vec<f64>,
    quad_tol: f64,
}

impl<F: Fn(f64) -> f64> InversionOracle<F> {
    /// `rate(s)` is the jump rate at offset `s`; the hazard is tabulated on
    /// `cells` equal cells over `[0, horizon]`.
    pub fn new(rate: F, horizon: f64, cells: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || cells == 0 {
            return Err(PdmpError::Oracle("need a finite positive horizon and at least one cell".into()));
        }
        let quad_tol = 1e-12;
        let h = horizon / cells as f64;
        let grid: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let mut acc = CompensatedSum::new();
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        for w in grid.windows(2) {
            acc.add(adaptive_simpson(&rate, w[0], w[1], quad_tol));
            cumulative.push(acc.value());
        }
        if !cumulative.iter().all(|c| c.is_finite()) {
            return Err(PdmpError::Oracle("cumulative hazard is not finite".into()));
        }
        Ok(Self {
            rate,
            grid,
            cumulative,
            quad_tol,
        })
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    /// Cumulative hazard at offset `t` in `[0, horizon]`.
    pub fn hazard(&self, t: f64) -> f64 {
        let k = self.grid.partition_point(|&g| g <= t).saturating_sub(1).min(self.grid.len() - 2);
        self.cumulative[k] + adaptive_simpson(&self.rate, self.grid[k], t, self.quad_tol)
    }

    /// Offset at which the cumulative hazard reaches `target`, or `None`
    /// when the horizon comes first.
    pub fn invert(&self, target: f64) -> Result<Option<f64>> {
        let total = *self.cumulative.last().expect("non-empty");
        if target >= total {
            return Ok(None);
        }
        let k = self.cumulative[1..].partition_point(|&c| c <= target);
        let (lo, hi) = (self.grid[k], self.grid[k + 1]);
        let t = bisect(|t| self.hazard(t) - target, lo, hi, ROOT_TOL);
        let resid = self.hazard(t) - target;
        if !resid.is_finite() {
            return Err(PdmpError::Oracle(format!("root search diverged at target {target}")));
        }
        Ok(Some(t))
    }

    /// First jump offset `Lambda^{-1}(-ln U)`.
    pub fn sample(&self, rng: &mut RngStream) -> Result<Option<f64>> {
        self.invert(rng.next_exponential())
    }
}

/// Oracle for the true rate along the flow from a frozen post-jump state.
pub fn flow_oracle<'a, P: PdmpModel>(
    model: &'a P,
    seg: FlowSegment<P::Mode>,
    horizon: f64,
    cells: usize,
) -> Result<InversionOracle<impl Fn(f64) -> f64 + 'a>> {
    let rate = move |s: f64| {
        let v = model.flow(&seg, s).unwrap_or(f64::NAN);
        model.rate(&HybridState {
            mode: seg.start.mode,
            voltage: v,
            time: seg.start.time + s,
        })
    };
    InversionOracle::new(rate, horizon, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::stats::ks_one_sample;

    #[test]
    fn constant_rate_gives_exponential() {
        let c = 1.7;
        let o = InversionOracle::new(|_| c, 40.0, 40).unwrap();
        let mut rng = RngStream::new(4, 0);
        let mut xs: Vec<f64> = (0..20_000).map(|_| o.sample(&mut rng).unwrap().unwrap()).collect();
        assert!(ks_one_sample(&mut xs, |t| 1.0 - (-c * t).exp()) > 0.01);
    }

    #[test]
    fn linear_rate_inverts_exactly() {
        let o = InversionOracle::new(|t| t, 10.0, 20).unwrap();
        for target in [0.01, 0.5, 2.0, 12.5] {
            let t = o.invert(target).unwrap().unwrap();
            assert!((t - (2.0 * target).sqrt()).abs() < 1e-9);
        }
        assert_eq!(o.invert(50.0).unwrap(), None);
    }
}

//! Checks against processes whose thinning statistics are known exactly.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete, Poisson};

use crate::bounds::BoundStrategy;
use crate::engine::{collect_rejected, run_path, SimulationConfig};
use crate::error::{invalid, Result};
use crate::experiments::{estimate_acceptance, par_trials, run_trial, stats};
use crate::testmodels::{ClockModel, ConstantRateModel, RateProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialCheck {
    /// Number of proposals conditioned on.
    pub n: u64,
    /// Trials with exactly `n` proposals.
    pub samples: u64,
    pub p_success: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonReport {
    pub horizon: f64,
    pub trials: u64,
    /// `int lambda / int envelope` over the horizon.
    pub expected_acceptance: f64,
    pub mean_acceptance: f64,
    pub std_error: f64,
    pub binomial_horizon: f64,
    pub binomial: Vec<BinomialCheck>,
}

/// Thin a Poisson process of intensity `1 + sin^2 t` out of a homogeneous
/// one of intensity 2. Compares the mean acceptance ratio on
/// `[0, horizon]` with the intensity ratio, and the accepted count given
/// `n` proposals on `[0, binomial_horizon]` with `Binomial(n, p)`.
pub fn validate_poisson_thinning(
    horizon: f64,
    binomial_horizon: f64,
    binomial_ns: &[u64],
    trials: u64,
    seed: u64,
) -> Result<PoissonReport> {
    let model = ClockModel::new(RateProfile::SinSquared, Some(2.0));
    let profile = model.profile();
    let acc = estimate_acceptance(&model, model.initial_state(), BoundStrategy::Global, horizon, trials, seed)?;
    let expected_acceptance = profile.integral(horizon) / (2.0 * horizon);

    let outcomes = par_trials(trials, |i| {
        run_trial(&model, model.initial_state(), BoundStrategy::Global, binomial_horizon, seed ^ 0x5eed, i)
    })?;
    let p = profile.integral(binomial_horizon) / (2.0 * binomial_horizon);
    let binomial = binomial_ns
        .iter()
        .map(|&n| {
            let accepted: Vec<u64> = outcomes.iter().filter(|o| o.proposed == n).map(|o| o.accepted).collect();
            let law = Binomial::new(p, n).map_err(|e| invalid("binomial", e.to_string()))?;
            Ok(BinomialCheck {
                n,
                samples: accepted.len() as u64,
                p_success: p,
                p_value: stats::chi_square_gof(&accepted, |k| law.pmf(k)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PoissonReport {
        horizon,
        trials,
        expected_acceptance,
        mean_acceptance: acc.mean_acceptance,
        std_error: acc.std_error,
        binomial_horizon,
        binomial,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoxReport {
    pub rate: f64,
    pub envelope: f64,
    pub horizon: f64,
    pub trials: u64,
    pub mean_rejected: f64,
    pub expected_rejected: f64,
    /// Chi-square p-value of the rejected count against `Poisson((envelope - rate) T)`.
    pub p_value: f64,
    /// Sample covariance of rejected counts on the two halves of the horizon.
    pub covariance: f64,
    pub covariance_se: f64,
}

/// Rejected points of a constant-rate model thinned from a constant
/// envelope form a Poisson process of intensity `envelope - rate`.
pub fn validate_cox(rate: f64, envelope: f64, horizon: f64, trials: u64, seed: u64) -> Result<CoxReport> {
    let model = ConstantRateModel::new(rate, envelope)?;
    let half = 0.5 * horizon;
    let counts = par_trials(trials, |i| {
        let cfg = SimulationConfig::new(model.initial_state(), horizon, BoundStrategy::Global)
            .with_stream(seed, i)
            .with_candidates(true);
        let mut rng = cfg.rng();
        let mut accepted = Vec::new();
        let mut rec = AcceptedTimes(&mut accepted);
        let s = run_path(&model, &cfg, &mut rng, &mut rec)?;
        let cand = s.candidates.unwrap_or_default();
        let rejected = collect_rejected(&cand, &accepted);
        let first = rejected.iter().filter(|&&t| t < half).count() as u64;
        Ok((first, rejected.len() as u64 - first))
    })?;
    let totals: Vec<u64> = counts.iter().map(|(a, b)| a + b).collect();
    let mu = (envelope - rate) * horizon;
    let p_value = if mu > 0.0 {
        let law = Poisson::new(mu).map_err(|e| invalid("poisson", e.to_string()))?;
        stats::chi_square_gof(&totals, |k| law.pmf(k))
    } else if totals.iter().all(|&t| t == 0) {
        1.0
    } else {
        0.0
    };
    let xs: Vec<f64> = counts.iter().map(|c| c.0 as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.1 as f64).collect();
    let (mx, _) = stats::mean_and_se(&xs);
    let (my, _) = stats::mean_and_se(&ys);
    let prods: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let (covariance, covariance_se) = stats::mean_and_se(&prods);
    Ok(CoxReport {
        rate,
        envelope,
        horizon,
        trials,
        mean_rejected: totals.iter().sum::<u64>() as f64 / trials as f64,
        expected_rejected: mu,
        p_value,
        covariance,
        covariance_se,
    })
}

struct AcceptedTimes<'a>(&'a mut Vec<f64>);

impl<M> crate::engine::PathObserver<M> for AcceptedTimes<'_> {
    fn jumped(&mut self, seg: &crate::model::FlowSegment<M>) {
        self.0.push(seg.start.time);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_rates_reject_nothing() {
        let r = validate_cox(1.0, 1.0, 10.0, 500, 1).unwrap();
        assert_eq!(r.mean_rejected, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn rejected_points_are_poisson() {
        let r = validate_cox(1.0, 3.0, 10.0, 20_000, 2).unwrap();
        assert_eq!(r.expected_rejected, 20.0);
        assert!(r.p_value > 0.01, "{r:?}");
        assert!(r.covariance.abs() < 3.0 * r.covariance_se, "{r:?}");
    }

    #[test]
    fn expected_acceptance_constant() {
        let e = RateProfile::SinSquared.integral(10.0) / 20.0;
        // int_0^10 sin^2 = 5 - sin(20) / 4.
        assert!((e - (15.0 - (20f64).sin() / 4.0) / 20.0).abs() < 1e-15);
        assert!((e - 0.738_59).abs() < 1e-5);
    }
}

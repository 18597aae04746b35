//! Monte Carlo harness.
//!
//! Trial `i` always uses stream `i` of the master seed, trials run in
//! parallel through rayon and are merged in trial order, so every report is
//! a deterministic function of its inputs.

pub mod exactness;
pub mod oracle;
pub mod poisson;
pub mod spiking;
pub mod stats;

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{build_envelope, BoundStrategy, EnvelopeOptions};
use crate::engine::{next_jump, run_path, PathObserver, SimulationConfig, DEFAULT_PROPOSAL_CAP};
use crate::error::{invalid, PdmpError, Result};
use crate::model::{FlowSegment, HybridState, PdmpModel};
use crate::numeric::CompensatedSum;
use crate::rng::RngStream;

pub use exactness::{compare_first_jump_laws, compare_with_oracle, state_along_path, KsComparison};
pub use oracle::InversionOracle;
pub use poisson::{validate_cox, validate_poisson_thinning, BinomialCheck, CoxReport, PoissonReport};
pub use spiking::{spiking_experiment, spiking_times, HhKind, SpikingReport};

/// Run `f(trial)` for every trial in parallel and collect results in trial
/// order. The first error (by trial index) wins.
pub fn par_trials<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

/// Per-path counts used by the acceptance estimators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Proposals inside the horizon.
    pub proposed: u64,
    pub accepted: u64,
    /// Proposals spent on completed inter-jump intervals.
    pub completed_proposals: u64,
    /// Longest time between consecutive events (jumps or horizon).
    pub max_interjump: f64,
}

#[derive(Default)]
struct GapTracker {
    max_gap: f64,
}

impl<M> PathObserver<M> for GapTracker {
    fn segment_done(&mut self, seg: &FlowSegment<M>, end: f64) -> ControlFlow<()> {
        self.max_gap = self.max_gap.max(end - seg.start.time);
        ControlFlow::Continue(())
    }
}

/// Simulate one path and reduce it to counts.
pub fn run_trial<P: PdmpModel>(
    model: &P,
    initial: HybridState<P::Mode>,
    strategy: BoundStrategy,
    horizon: f64,
    seed: u64,
    trial: u64,
) -> Result<TrialOutcome> {
    let cfg = SimulationConfig::new(initial, horizon, strategy).with_stream(seed, trial);
    let mut rng = cfg.rng();
    let mut gaps = GapTracker::default();
    let s = run_path(model, &cfg, &mut rng, &mut gaps)?.stats;
    let completed = s.total_proposed - s.residual_proposals;
    Ok(TrialOutcome {
        proposed: s.total_proposed,
        accepted: s.total_accepted,
        completed_proposals: completed,
        max_interjump: gaps.max_gap,
    })
}

/// Acceptance-rate estimate for one strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub strategy: BoundStrategy,
    pub trials: u64,
    /// Mean over trials with at least one proposal of accepted / proposed.
    pub mean_acceptance: f64,
    pub std_error: f64,
    /// Proposals per accepted jump, pooled over all trials.
    pub mean_tau: Option<f64>,
    pub mean_tau_se: Option<f64>,
    /// Trials without any proposal inside the horizon.
    pub empty_trials: u64,
    pub total_proposed: u64,
    pub total_accepted: u64,
    /// Longest observed time between consecutive events (jumps or horizon).
    pub max_interjump: f64,
}

/// Reduce trial outcomes to a report.
pub fn summarize_acceptance(strategy: BoundStrategy, outcomes: &[TrialOutcome]) -> Result<AcceptanceReport> {
    let ratios: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.proposed > 0)
        .map(|o| o.accepted as f64 / o.proposed as f64)
        .collect();
    if ratios.is_empty() {
        return Err(PdmpError::Degenerate("no trial proposed any point inside the horizon".into()));
    }
    let (mean_acceptance, std_error) = stats::mean_and_se(&ratios);
    let jumps: CompensatedSum = outcomes.iter().map(|o| o.accepted as f64).collect();
    let taus: CompensatedSum = outcomes.iter().map(|o| o.completed_proposals as f64).collect();
    let (jumps, taus) = (jumps.value(), taus.value());
    let (mean_tau, mean_tau_se) = if jumps > 0.0 {
        let r = taus / jumps;
        let n = outcomes.len() as f64;
        let ss: CompensatedSum = outcomes
            .iter()
            .map(|o| (o.completed_proposals as f64 - r * o.accepted as f64).powi(2))
            .collect();
        let se = if n > 1.0 { (ss.value() * n / (n - 1.0)).sqrt() / jumps } else { 0.0 };
        (Some(r), Some(se))
    } else {
        (None, None)
    };
    Ok(AcceptanceReport {
        strategy,
        trials: outcomes.len() as u64,
        mean_acceptance,
        std_error,
        mean_tau,
        mean_tau_se,
        empty_trials: outcomes.iter().filter(|o| o.proposed == 0).count() as u64,
        total_proposed: outcomes.iter().map(|o| o.proposed).sum(),
        total_accepted: outcomes.iter().map(|o| o.accepted).sum(),
        max_interjump: outcomes.iter().map(|o| o.max_interjump).fold(0.0, f64::max),
    })
}

/// Monte Carlo estimate of the mean acceptance ratio over `[t0, horizon]`.
pub fn estimate_acceptance<P: PdmpModel>(
    model: &P,
    initial: HybridState<P::Mode>,
    strategy: BoundStrategy,
    horizon: f64,
    trials: u64,
    seed: u64,
) -> Result<AcceptanceReport> {
    if trials < 100 {
        return Err(invalid("trials", "need at least 100 trials"));
    }
    strategy.validate()?;
    let outcomes = par_trials(trials, |i| run_trial(model, initial, strategy, horizon, seed, i))?;
    summarize_acceptance(strategy, &outcomes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonFamily {
    OptimalP,
    OptimalQ,
}

impl EpsilonFamily {
    pub fn strategy(self, epsilon: f64) -> BoundStrategy {
        match self {
            EpsilonFamily::OptimalP => BoundStrategy::OptimalP { epsilon },
            EpsilonFamily::OptimalQ => BoundStrategy::OptimalQ { epsilon },
        }
    }
}

/// One acceptance report per `epsilon`, each with its own copy of the seed.
pub fn sweep_epsilon<P: PdmpModel>(
    model: &P,
    initial: HybridState<P::Mode>,
    family: EpsilonFamily,
    epsilons: &[f64],
    horizon: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<AcceptanceReport>> {
    if epsilons.is_empty() {
        return Err(invalid("epsilon", "need at least one value"));
    }
    epsilons
        .iter()
        .map(|&eps| estimate_acceptance(model, initial, family.strategy(eps), horizon, trials, seed))
        .collect()
}

/// First jump time of each trial from `initial`, without a horizon cut.
pub fn first_jump_times<P: PdmpModel>(
    model: &P,
    initial: HybridState<P::Mode>,
    strategy: BoundStrategy,
    trials: u64,
    seed: u64,
    options: &EnvelopeOptions,
) -> Result<Vec<f64>> {
    let seg = model.segment(initial);
    par_trials(trials, |i| {
        let mut rng = RngStream::new(seed, i);
        let mut env = build_envelope(model, &seg, strategy, options)?;
        let d = next_jump(model, &seg, &mut env, &mut rng, f64::INFINITY, DEFAULT_PROPOSAL_CAP, None)?;
        d.time.ok_or_else(|| PdmpError::Inconsistent("unbounded draw returned no time".into()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testmodels::ConstantRateModel;

    #[test]
    fn tight_envelope_has_unit_acceptance() {
        let m = ConstantRateModel::new(2.0, 2.0).unwrap();
        let r = estimate_acceptance(&m, m.initial_state(), BoundStrategy::Local, 5.0, 200, 1).unwrap();
        assert_eq!(r.mean_acceptance, 1.0);
        assert_eq!(r.mean_tau, Some(1.0));
    }

    #[test]
    fn sweep_on_constant_model_is_flat() {
        let m = ConstantRateModel::new(2.0, 2.0).unwrap();
        let r = sweep_epsilon(&m, m.initial_state(), EpsilonFamily::OptimalP, &[0.5, 0.1], 5.0, 200, 1).unwrap();
        assert!(r.iter().all(|x| x.mean_acceptance == 1.0));
        assert!(sweep_epsilon(&m, m.initial_state(), EpsilonFamily::OptimalP, &[], 5.0, 200, 1).is_err());
    }

    #[test]
    fn all_empty_trials_is_degenerate() {
        let m = ConstantRateModel::new(1e-12, 1e-12).unwrap();
        let r = estimate_acceptance(&m, m.initial_state(), BoundStrategy::Global, 1.0, 100, 1);
        assert!(matches!(r, Err(PdmpError::Degenerate(_))));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let m = ConstantRateModel::new(1.0, 3.0).unwrap();
        let a = estimate_acceptance(&m, m.initial_state(), BoundStrategy::Global, 5.0, 300, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_acceptance(&m, m.initial_state(), BoundStrategy::Global, 5.0, 300, 9).unwrap());
        assert_eq!(a, b);
    }
}

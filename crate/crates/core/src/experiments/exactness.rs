//! Distributional checks that thinning samples the true jump law whatever
//! the envelope.

use serde::{Deserialize, Serialize};

use crate::bounds::{lower_local_rate, BoundStrategy, EnvelopeOptions};
use crate::engine::{simulate_path, SimulationConfig};
use crate::error::{invalid, PdmpError, Result};
use crate::experiments::oracle::flow_oracle;
use crate::experiments::{first_jump_times, par_trials, stats};
use crate::model::{HybridState, PdmpModel};
use crate::rng::RngStream;

/// Cells used to tabulate the oracle hazard.
const ORACLE_CELLS: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsComparison {
    pub label: String,
    pub n_a: u64,
    pub n_b: u64,
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS between first jump times from `initial` under two
/// strategies. The samples use independent seeds.
pub fn compare_first_jump_laws<P: PdmpModel>(
    model: &P,
    initial: HybridState<P::Mode>,
    a: BoundStrategy,
    b: BoundStrategy,
    trials: u64,
    seed: u64,
) -> Result<KsComparison> {
    let opts = EnvelopeOptions::default();
    let mut xs = first_jump_times(model, initial, a, trials, seed, &opts)?;
    let mut ys = first_jump_times(model, initial, b, trials, seed.wrapping_add(1), &opts)?;
    let (statistic, p_value) = stats::ks_two_sample(&mut xs, &mut ys);
    Ok(KsComparison {
        label: format!("first jump: {a} vs {b}"),
        n_a: trials,
        n_b: trials,
        statistic,
        p_value,
    })
}

/// Two-sample KS between thinning first-jump draws from `state` and draws
/// from the numerical inversion oracle for the same frozen state.
pub fn compare_with_oracle<P: PdmpModel>(
    model: &P,
    state: HybridState<P::Mode>,
    strategy: BoundStrategy,
    trials: u64,
    seed: u64,
) -> Result<KsComparison> {
    let seg = model.segment(state);
    let lower = lower_local_rate(model, &seg);
    if !(lower > 0.0 && lower.is_finite()) {
        return Err(invalid("state", "oracle needs a positive lower rate along the flow"));
    }
    // P(T > horizon) <= exp(-40).
    let horizon = 40.0 / lower;
    let oracle = flow_oracle(model, seg, horizon, ORACLE_CELLS)?;
    let shifted = HybridState { time: 0.0, ..state };
    let mut thin = first_jump_times(model, shifted, strategy, trials, seed, &EnvelopeOptions::default())?;
    let mut exact = par_trials(trials, |i| {
        let mut rng = RngStream::new(seed.wrapping_add(1), i);
        oracle
            .sample(&mut rng)?
            .ok_or_else(|| PdmpError::Oracle("oracle draw beyond its horizon".into()))
    })?;
    let (statistic, p_value) = stats::ks_two_sample(&mut thin, &mut exact);
    Ok(KsComparison {
        label: format!("first jump: {strategy} vs inversion oracle"),
        n_a: trials,
        n_b: trials,
        statistic,
        p_value,
    })
}

/// Last post-jump state of a path run up to `at`, used as a frozen state.
pub fn state_along_path<P: PdmpModel>(
    model: &P,
    initial: HybridState<P::Mode>,
    at: f64,
    seed: u64,
) -> Result<HybridState<P::Mode>> {
    let cfg = SimulationConfig::new(initial, at, BoundStrategy::Local).with_stream(seed, 0);
    let (traj, _) = simulate_path(model, &cfg)?;
    Ok(*traj.post_jump_states.last().expect("trajectory holds its initial state"))
}

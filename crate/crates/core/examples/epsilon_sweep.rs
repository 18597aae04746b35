//! Acceptance rate and mean proposals per jump as the partition width of
//! the optimal bounds shrinks.
//!
//! Usage: `cargo run --release --example epsilon_sweep -- [n_chan] [trials]`

use pdmp_thinning::experiments::{sweep_epsilon, EpsilonFamily};
use pdmp_thinning::hh::{HHParams, SubunitModel};

fn main() -> pdmp_thinning::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_chan: u32 = args.first().and_then(|s| s.parse().ok()).unwrap_or(30);
    let trials: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let model = SubunitModel::new(HHParams::standard(n_chan))?;
    let eps = [0.5, 0.1, 0.05, 0.02, 0.01, 0.005];
    for family in [EpsilonFamily::OptimalP, EpsilonFamily::OptimalQ] {
        println!("{family:?}, subunit model, N = {n_chan}");
        let reports = sweep_epsilon(&model, model.initial_state(), family, &eps, 10.0, trials, 3)?;
        for r in reports {
            println!(
                "  {:<18} acceptance {:.4} ({:.4})  mean tau {:.4}  max gap {:.4} ms",
                r.strategy.label(),
                r.mean_acceptance,
                r.std_error,
                r.mean_tau.unwrap_or(f64::NAN),
                r.max_interjump
            );
        }
    }
    Ok(())
}

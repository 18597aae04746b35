//! Spike probability and spiking-time statistics as the number of channels
//! grows, next to the deterministic reference.
//!
//! Usage: `cargo run --release --example spiking_times -- [trials]`

use pdmp_thinning::experiments::{spiking_experiment, HhKind};
use pdmp_thinning::hh::deterministic::deterministic_spike_time;
use pdmp_thinning::hh::HHParams;
use pdmp_thinning::{BoundStrategy, PulseCurrent};

fn main() -> pdmp_thinning::Result<()> {
    let trials: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let pulse = PulseCurrent::new(30.0, 1.0, 2.0)?;
    let reference = deterministic_spike_time(&HHParams::standard(1), 60.0, 10.0, 1e-4)?;
    println!("deterministic spiking time: {:.4} ms", reference.unwrap_or(f64::NAN));
    for kind in [HhKind::Subunit, HhKind::Channel] {
        let reports =
            spiking_experiment(kind, &[30, 100, 300, 1000], 60.0, 10.0, pulse, BoundStrategy::OptimalQAdaptive, trials, 11)?;
        for r in reports {
            println!(
                "{kind:?} N = {:>4}: spike fraction {:.3}, mean {:.4} ms, std {:.4} ms",
                r.n_chan,
                r.spike_fraction,
                r.mean_spike_time.unwrap_or(f64::NAN),
                r.std_spike_time.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

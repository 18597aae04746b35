//! Acceptance rates of every bound strategy on both HH models.
//!
//! Usage: `cargo run --release --example compare_bounds -- [n_chan] [trials] [clamp]`

use pdmp_thinning::experiments::estimate_acceptance;
use pdmp_thinning::hh::{ChannelModel, HHParams, SubunitModel};
use pdmp_thinning::BoundStrategy;

fn main() -> pdmp_thinning::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_chan: u32 = args.first().and_then(|s| s.parse().ok()).unwrap_or(30);
    let trials: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let clamp = args.get(2).is_some_and(|s| s == "clamp");
    let params = HHParams::standard(n_chan).with_clamp(clamp);
    let strategies = [
        BoundStrategy::Global,
        BoundStrategy::Local,
        BoundStrategy::OptimalP { epsilon: 0.01 },
        BoundStrategy::OptimalQ { epsilon: 0.01 },
        BoundStrategy::OptimalQAdaptive,
    ];
    let sub = SubunitModel::new(params)?;
    let chan = ChannelModel::new(params)?;
    println!("N = {n_chan}, {trials} trials, T = 10");
    println!("{:<22} {:>18} {:>18}", "strategy", "subunit", "channel");
    for s in strategies {
        let a = estimate_acceptance(&sub, sub.initial_state(), s, 10.0, trials, 1)?;
        let b = estimate_acceptance(&chan, chan.initial_state(), s, 10.0, trials, 1)?;
        println!(
            "{:<22} {:>9.4} ({:.4}) {:>9.4} ({:.4})",
            s.label(),
            a.mean_acceptance,
            a.std_error,
            b.mean_acceptance,
            b.std_error
        );
    }
    Ok(())
}

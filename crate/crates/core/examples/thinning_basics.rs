//! Simulate an inhomogeneous Poisson process of intensity `1 + sin^2 t` by
//! thinning a homogeneous process of intensity 2, and print the path.

use pdmp_thinning::testmodels::{ClockModel, RateProfile};
use pdmp_thinning::{simulate_path, BoundStrategy, SimulationConfig};

fn main() -> pdmp_thinning::Result<()> {
    let model = ClockModel::new(RateProfile::SinSquared, Some(2.0));
    let cfg = SimulationConfig::new(model.initial_state(), 10.0, BoundStrategy::Global).with_stream(42, 0);
    let (traj, stats) = simulate_path(&model, &cfg)?;

    println!("accepted {} of {} proposals on [0, 10]", stats.total_accepted, stats.total_proposed);
    if let Some(r) = stats.acceptance_ratio() {
        let exact = RateProfile::SinSquared.integral(10.0) / 20.0;
        println!("acceptance ratio {r:.3} (expected {exact:.3})");
    }
    for (i, t) in traj.jumps().iter().enumerate() {
        println!("jump {:>2} at t = {t:.4}", i + 1);
    }
    Ok(())
}

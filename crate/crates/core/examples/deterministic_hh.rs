//! RK4 integration of the deterministic Hodgkin-Huxley system and its first
//! crossing of 60 mV.

use pdmp_thinning::hh::deterministic::{deterministic_hh, HHPoint};
use pdmp_thinning::hh::HHParams;

fn main() -> pdmp_thinning::Result<()> {
    let p = HHParams::standard(1);
    let start = HHPoint { v: 0.0, m: 0.0, h: 0.0, n: 0.0 };
    for step in [1e-2, 1e-3, 1e-4, 5e-5] {
        let path = deterministic_hh(&p, start, 10.0, step)?;
        println!("step {step:e}: crossing at {:.6} ms", path.first_crossing(60.0).unwrap_or(f64::NAN));
    }
    let path = deterministic_hh(&p, start, 10.0, 1e-3)?;
    for (t, x) in path.times.iter().zip(&path.points).step_by(500) {
        println!("t = {t:5.2}  V = {:8.3}  m = {:.3}  h = {:.3}  n = {:.3}", x.v, x.m, x.h, x.n);
    }
    Ok(())
}

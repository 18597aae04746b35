//! Checks against processes with exactly known thinning statistics.

use pdmp_thinning::experiments::{validate_cox, validate_poisson_thinning};

fn main() -> pdmp_thinning::Result<()> {
    let r = validate_poisson_thinning(10.0, 3.0, &[3, 4, 5, 6, 7, 8], 10_000, 1)?;
    println!(
        "acceptance {:.5} +- {:.5}, exact {:.5}",
        r.mean_acceptance, r.std_error, r.expected_acceptance
    );
    for b in &r.binomial {
        println!("  n = {}: {} paths, chi-square p = {:.3}", b.n, b.samples, b.p_value);
    }
    let c = validate_cox(1.0, 3.0, 10.0, 10_000, 2)?;
    println!(
        "rejected points: mean {:.3} (expected {}), Poisson p = {:.3}, half-window covariance {:.4} +- {:.4}",
        c.mean_rejected, c.expected_rejected, c.p_value, c.covariance, c.covariance_se
    );
    Ok(())
}

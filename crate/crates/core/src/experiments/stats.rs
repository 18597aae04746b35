//! Goodness-of-fit tests and summary statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::numeric::CompensatedSum;

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Sample mean and (n - 1)-normalized standard deviation.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let (m, se) = mean_and_se(xs);
    (m, se * (xs.len() as f64).sqrt())
}

/// Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powi(j as i32 - 1) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS test against a continuous CDF. Sorts `xs` in place.
/// Returns the asymptotic p-value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> f64 {
    ks_one_sample_stat(xs, cdf).1
}

/// KS statistic and p-value.
pub fn ks_one_sample_stat<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> (f64, f64) {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, ks_p_value(d, n))
}

/// Two-sample KS statistic and p-value. Sorts both inputs.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    (d, ks_p_value(d, n_eff))
}

/// Pearson chi-square p-value for observed vs expected cell counts after
/// merging neighbouring cells until every expected count is at least 5.
pub fn chi_square_cells(observed: &[f64], expected: &[f64]) -> f64 {
    chi_square_cells_stat(observed, expected).1
}

/// Chi-square statistic, p-value and degrees of freedom after merging.
pub fn chi_square_cells_stat(observed: &[f64], expected: &[f64]) -> (f64, f64, usize) {
    assert_eq!(observed.len(), expected.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    if cells.len() < 2 {
        return (0.0, 1.0, 0);
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len() - 1;
    let p = 1.0 - ChiSquared::new(df as f64).expect("df >= 1").cdf(stat);
    (stat, p, df)
}

/// Chi-square goodness of fit of integer samples to a pmf on `0, 1, ...`.
/// The last cell absorbs the upper tail.
pub fn chi_square_gof<F: Fn(u64) -> f64>(samples: &[u64], pmf: F) -> f64 {
    let n = samples.len() as f64;
    let kmax = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut observed = vec![0.0; kmax + 2];
    for &s in samples {
        observed[s as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..=kmax).map(|k| n * pmf(k as u64)).collect();
    let covered: f64 = expected.iter().sum();
    expected.push((n - covered).max(0.0));
    chi_square_cells(&observed, &expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use statrs::distribution::{Binomial, Discrete};

    #[test]
    fn kolmogorov_tail_reference_points() {
        // Known quantiles of the Kolmogorov distribution.
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn uniform_sample_passes_and_shifted_fails() {
        let mut rng = RngStream::new(1, 0);
        let mut xs: Vec<f64> = (0..20_000).map(|_| rng.next_uniform()).collect();
        assert!(ks_one_sample(&mut xs.clone(), |x| x.clamp(0.0, 1.0)) > 0.01);
        for x in xs.iter_mut() {
            *x = (*x + 0.02).min(1.0);
        }
        assert!(ks_one_sample(&mut xs, |x| x.clamp(0.0, 1.0)) < 1e-6);
    }

    #[test]
    fn two_sample_ks_detects_scale_change() {
        let mut rng = RngStream::new(2, 0);
        let mut a: Vec<f64> = (0..5000).map(|_| rng.next_exponential()).collect();
        let mut b: Vec<f64> = (0..5000).map(|_| rng.next_exponential()).collect();
        let mut c: Vec<f64> = (0..5000).map(|_| 1.1 * rng.next_exponential()).collect();
        assert!(ks_two_sample(&mut a, &mut b).1 > 0.01);
        assert!(ks_two_sample(&mut a, &mut c).1 < 0.01);
    }

    #[test]
    fn binomial_chi_square() {
        let mut rng = RngStream::new(3, 0);
        let (n, p) = (6u64, 0.3);
        let xs: Vec<u64> = (0..10_000).map(|_| (0..n).filter(|_| rng.next_uniform() < p).count() as u64).collect();
        let bin = Binomial::new(p, n).unwrap();
        assert!(chi_square_gof(&xs, |k| bin.pmf(k)) > 0.01);
        let wrong = Binomial::new(0.33, n).unwrap();
        assert!(chi_square_gof(&xs, |k| wrong.pmf(k)) < 0.01);
    }

    #[test]
    fn mean_se_of_constant() {
        let (m, se) = mean_and_se(&[2.0; 10]);
        assert_eq!((m, se), (2.0, 0.0));
    }
}

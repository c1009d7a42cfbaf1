//! Statistical helpers for frequency tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Standard deviation of the mean of `n` Bernoulli(p) draws.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_p_value(statistic: f64, dof: usize) -> f64 {
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(statistic)
}

/// Pearson chi-square goodness of fit of `observed` against `expected`.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum()
}

/// p-value of a fair-coin frequency test on `ones` out of `n` draws.
pub fn fair_coin_p_value(ones: usize, n: usize) -> f64 {
    let half = n as f64 / 2.0;
    let stat = chi_square(&[ones as f64, (n - ones) as f64], &[half, half]);
    chi_square_p_value(stat, 1)
}

/// Chi-square test of homogeneity for a `groups x 2` table of
/// `(successes, trials)`. Returns `(statistic, dof, p_value)`.
pub fn homogeneity_test(groups: &[(usize, usize)]) -> (f64, usize, f64) {
    let total: usize = groups.iter().map(|g| g.1).sum();
    let successes: usize = groups.iter().map(|g| g.0).sum();
    let pooled = successes as f64 / total as f64;
    let mut stat = 0.0;
    for &(s, n) in groups {
        let exp1 = pooled * n as f64;
        let exp0 = n as f64 - exp1;
        if exp1 > 0.0 {
            stat += (s as f64 - exp1).powi(2) / exp1;
        }
        if exp0 > 0.0 {
            stat += ((n - s) as f64 - exp0).powi(2) / exp0;
        }
    }
    let dof = groups.len().saturating_sub(1).max(1);
    (stat, dof, chi_square_p_value(stat, dof))
}

//! Statistical helpers for the Monte Carlo test policy.
//!
//! All randomized assertions in this workspace use either 3-sigma
//! normal-approximation bands or a chi-square goodness-of-fit test at
//! significance 0.001, with fixed seeds. The chi-square p-value needs the
//! regularized incomplete gamma function, implemented here with the usual
//! series / continued-fraction split.

/// Natural log of the gamma function, Lanczos approximation (g = 7, n = 9).
///
/// Accurate to ~1e-13 for positive arguments, which is all this crate needs.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires a positive argument");
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.9999999999998099;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..500 {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz algorithm.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Chi-square goodness of fit of observed counts against cell probabilities.
///
/// `probs` must sum to 1 (within 1e-9); cells with zero probability must have
/// zero observations and are skipped. Degrees of freedom are the number of
/// nonzero-probability cells minus one.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let psum: f64 = probs.iter().sum();
    assert!((psum - 1.0).abs() < 1e-9, "cell probabilities must sum to 1");
    let n = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&obs, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            assert_eq!(obs, 0, "observation in a zero-probability cell");
            continue;
        }
        cells += 1;
        let expected = n * p;
        let diff = obs as f64 - expected;
        stat += diff * diff / expected;
    }
    assert!(cells >= 2, "need at least two cells");
    let df = cells - 1;
    let p_value = regularized_gamma_q(df as f64 / 2.0, stat / 2.0);
    ChiSquare {
        statistic: stat,
        degrees_of_freedom: df,
        p_value,
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    assert!(!samples.is_empty());
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard deviation of an empirical binomial proportion at `p` over `trials`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Gamma(1) = Gamma(2) = 1, Gamma(5) = 24, Gamma(0.5) = sqrt(pi).
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(2.0)).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_tail_matches_tables() {
        // Classic critical values: P(chi2_1 > 3.8415) = 0.05,
        // P(chi2_15 > 37.697) = 0.001, P(chi2_7 > 24.322) = 0.001.
        let p1 = regularized_gamma_q(0.5, 3.8415 / 2.0);
        assert!((p1 - 0.05).abs() < 1e-4, "p1 = {p1}");
        let p15 = regularized_gamma_q(7.5, 37.697 / 2.0);
        assert!((p15 - 0.001).abs() < 1e-5, "p15 = {p15}");
        let p7 = regularized_gamma_q(3.5, 24.322 / 2.0);
        assert!((p7 - 0.001).abs() < 1e-5, "p7 = {p7}");
    }

    #[test]
    fn gamma_p_q_sum_to_one() {
        for a in [0.5, 1.0, 2.5, 8.0, 30.0] {
            for x in [0.1, 1.0, 5.0, 20.0, 60.0] {
                let p = regularized_gamma_p(a, x);
                let q = regularized_gamma_q(a, x);
                assert!((p + q - 1.0).abs() < 1e-12, "a={a} x={x}");
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn chi_square_gof_uniform_counts() {
        let obs = [250u64, 250, 250, 250];
        let ps = [0.25; 4];
        let res = chi_square_gof(&obs, &ps);
        assert_eq!(res.degrees_of_freedom, 3);
        assert!(res.statistic < 1e-12);
        assert!((res.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chi_square_gof_detects_bias() {
        let obs = [900u64, 100];
        let ps = [0.5, 0.5];
        let res = chi_square_gof(&obs, &ps);
        assert!(res.p_value < 1e-6);
    }

    #[test]
    fn mean_and_se_basics() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        // Sample variance 5/3, SE = sqrt(5/12).
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}

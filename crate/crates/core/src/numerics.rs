//! Log-space density kernels and small numerical helpers.

/// Positivity floor for stick residuals; keeps log-densities finite without
/// visibly perturbing row sums.
pub const STICK_FLOOR: f64 = 1e-300;

/// Positivity floor applied to Poisson rates before evaluating the log-pmf.
pub const RATE_FLOOR: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_COEF: [f64; 8] = [
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, c) in LANCZOS_COEF.iter().enumerate() {
        acc += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// log B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log density of Beta(a, b) at x ∈ (0, 1); −∞ outside the open interval.
pub fn beta_lpdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

/// Log density of Gamma(shape, rate) at x > 0; −∞ otherwise.
pub fn gamma_lpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) || !(shape > 0.0) || !(rate > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}

/// Log pmf of Poisson(mu) at count y. The rate is floored at [`RATE_FLOOR`].
pub fn poisson_lpmf(y: u64, mu: f64) -> f64 {
    let mu = mu.max(RATE_FLOOR);
    let yf = y as f64;
    yf * mu.ln() - mu - ln_gamma(yf + 1.0)
}

/// Digamma function ψ₀(x) for x > 0: recurrence up the axis, then the
/// asymptotic series.
pub fn digamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let z = inv * inv;
    acc + x.ln()
        - 0.5 * inv
        - z * (1.0 / 12.0
            - z * (1.0 / 120.0 - z * (1.0 / 252.0 - z * (1.0 / 240.0 - z / 132.0))))
}

/// log Σ exp(x_i) with max shift; −∞ for an empty or all-−∞ input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`]; the argument is clamped into the open unit interval.
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(STICK_FLOOR, 1.0 - 1e-16);
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_recurrence() {
        for i in 0..50 {
            let x = 0.1 + 0.37 * i as f64;
            let lhs = ln_gamma(x + 1.0);
            let rhs = x.ln() + ln_gamma(x);
            assert!((lhs - rhs).abs() < 1e-10, "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn digamma_known_values_and_lgamma_consistency() {
        // psi0(1) = -Euler-Mascheroni.
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-12);
        // psi0(x+1) = psi0(x) + 1/x.
        for x in [0.3, 1.7, 4.2, 9.9] {
            assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-11);
        }
        // Derivative of ln Gamma.
        for x in [0.8, 2.3, 7.7, 31.0] {
            let h = 1e-6;
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((digamma(x) - fd).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn poisson_lpmf_matches_hand_values() {
        assert!((poisson_lpmf(0, 1.0) - (-1.0)).abs() < 1e-13);
        // Pois(3; 3) = 27/6 e^{-3}
        let expect = (4.5f64).ln() - 3.0;
        assert!((poisson_lpmf(3, 3.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn beta_lpdf_uniform_is_flat() {
        assert!(beta_lpdf(0.3, 1.0, 1.0).abs() < 1e-13);
        assert_eq!(beta_lpdf(0.0, 2.0, 2.0), f64::NEG_INFINITY);
        assert_eq!(beta_lpdf(1.0, 2.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_lpdf_exponential_case() {
        // Gamma(1, 1) is Exp(1): log pdf at x is -x.
        for x in [0.1, 0.5, 2.0, 7.3] {
            assert!((gamma_lpdf(x, 1.0, 1.0) + x).abs() < 1e-12);
        }
    }

    #[test]
    fn logsumexp_shifts() {
        let v = [1000.0, 1000.0];
        assert!((logsumexp(&v) - (1000.0 + 2.0f64.ln())).abs() < 1e-10);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn sigmoid_logit_roundtrip() {
        for x in [-30.0, -3.0, 0.0, 0.5, 10.0] {
            assert!((logit(sigmoid(x)) - x).abs() < 1e-9);
        }
        assert_eq!(logit(0.5), 0.0);
    }
}

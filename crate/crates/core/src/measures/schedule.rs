//! Summable prior weights over the positive integers.
//!
//! `weight(k) = w / ((k+1)·log₂²(k+1))`, i.e. the classic `w/(k log² k)` rule
//! shifted by one so that it is defined at `k = 1`. The normalizer `w` makes
//! the infinite series sum to one; `-log₂ weight(k) = log₂ k + 2 log₂ log₂ k + O(1)`.

use std::sync::OnceLock;

const DIRECT_TERMS: u64 = 100_000;

fn term(k: f64) -> f64 {
    let l = k.log2();
    1.0 / (k * l * l)
}

/// `Σ_{k≥2} 1/(k log₂² k)`: direct partial sum up to `N`, then an
/// Euler–Maclaurin tail `∫_N^∞ f − f(N)/2 − f'(N)/12`.
fn series_total() -> f64 {
    // Neumaier summation of the direct part
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 2..=DIRECT_TERMS {
        let t = term(k as f64);
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    let n = DIRECT_TERMS as f64;
    let ln2 = std::f64::consts::LN_2;
    let ln_n = n.ln();
    let integral = ln2 * ln2 / ln_n;
    let derivative = -ln2 * ln2 * (ln_n + 2.0) / (n * n * ln_n.powi(3));
    sum + comp + integral - term(n) / 2.0 - derivative / 12.0
}

/// The normalizer `w`.
pub fn normalizer() -> f64 {
    static W: OnceLock<f64> = OnceLock::new();
    *W.get_or_init(|| 1.0 / series_total())
}

/// Weight of index `k ≥ 1`.
pub fn weight(k: u64) -> f64 {
    assert!(k >= 1, "weight schedule is indexed from 1");
    normalizer() * term((k + 1) as f64)
}

/// `log₂ weight(k)`, accurate for astronomically large `k` given as `log₂ k`.
pub fn log2_weight_of_log(log2_k: f64) -> f64 {
    // log₂(k+1) ≈ log₂ k once k is large; callers only use this for k ≥ 2^30
    normalizer().log2() - log2_k - 2.0 * log2_k.log2()
}

pub fn log2_weight(k: u64) -> f64 {
    weight(k).log2()
}

/// `Σ_{k=1}^{K} weight(k)`.
pub fn partial_sum(upto: u64) -> f64 {
    (1..=upto).map(weight).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_weights() {
        let w = normalizer();
        assert_eq!(weight(1), w / 2.0);
        assert!((weight(3) - w / 16.0).abs() < 1e-16);
    }

    #[test]
    fn normalizer_matches_high_precision_oracle() {
        // mpmath: partial sum to 1e5 plus Euler–Maclaurin tail to f'''(N),
        // carried at 30 digits.
        let oracle = 0.986_551_052_472_059_988;
        assert!((normalizer() - oracle).abs() < 1e-12, "{}", normalizer());
    }

    #[test]
    fn normalizer_is_bracketed_by_integral_tails() {
        // Σ_{k=2}^{N} f(k) + ∫_{N+1}^∞ f ≤ S ≤ Σ_{k=2}^{N} f(k) + ∫_N^∞ f
        let n = 20_000u64;
        let head: f64 = (2..=n).map(|k| term(k as f64)).sum();
        let c = std::f64::consts::LN_2.powi(2);
        let lo = head + c / ((n + 1) as f64).ln();
        let hi = head + c / (n as f64).ln();
        let s = 1.0 / normalizer();
        assert!(lo <= s && s <= hi, "{lo} <= {s} <= {hi}");
    }

    #[test]
    fn monotone_and_summable() {
        let mut prev = f64::INFINITY;
        let mut acc = 0.0;
        for k in 1..5000 {
            let w = weight(k);
            assert!(w > 0.0 && w <= prev);
            let next = acc + w;
            assert!(next > acc && next <= 1.0);
            acc = next;
            prev = w;
        }
    }

    #[test]
    fn log_form_agrees_for_large_indices() {
        let k = 1u64 << 40;
        let exact = log2_weight(k);
        let approx = log2_weight_of_log(40.0);
        assert!((exact - approx).abs() < 1e-9);
    }
}

//! Log-space combinatorics shared by the degree and and-or modules.
//!
//! Factorials show up as `ln(l!)` inside Poisson pmfs and binomial
//! coefficients for degrees up to a few hundred; direct `f64` factorials
//! overflow past 170, so everything is kept in log space.

use std::sync::OnceLock;

/// Largest `n` for which `ln_factorial(n)` is tabulated. Slot degrees in
/// this crate stay far below this (β ≈ 40 ⇒ degrees ≲ 150).
const LN_FACT_TABLE_LEN: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE_LEN);
        t.push(0.0);
        let mut acc = 0.0_f64;
        for n in 1..LN_FACT_TABLE_LEN {
            acc += (n as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// ln(n!) by cumulative summation (exact to a few ulps for n < 4096).
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_fact_table();
    assert!(
        n < table.len(),
        "ln_factorial: n = {n} beyond tabulated range"
    );
    table[n]
}

/// ln C(n, k). Requires k ≤ n.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Poisson pmf at `l` for mean `mu > 0`, evaluated in log space.
pub fn poisson_pmf(l: usize, mu: f64) -> f64 {
    debug_assert!(mu > 0.0);
    (l as f64 * mu.ln() - mu - ln_factorial(l)).exp()
}

/// Binomial pmf Bin(n, p) at k, evaluated in log space. p ∈ [0, 1].
pub fn binomial_pmf(k: usize, n: usize, p: f64) -> f64 {
    debug_assert!(k <= n);
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Upper tail P(X > d) of Poisson(mu), summed backwards from where the pmf
/// has decayed to nothing so small tails don't cancel against 1.
pub fn poisson_upper_tail(d: usize, mu: f64) -> f64 {
    let hi = poisson_support_bound(mu);
    if d >= hi {
        return 0.0;
    }
    let mut tail = 0.0;
    for l in ((d + 1)..=hi).rev() {
        tail += poisson_pmf(l, mu);
    }
    tail
}

/// Degree beyond which Poisson(mu) mass is below ~1e-30 (safe summation cap).
pub fn poisson_support_bound(mu: f64) -> usize {
    let bound = mu + 16.0 * mu.sqrt() + 40.0;
    bound.ceil() as usize
}

/// Stable FNV-1a 64-bit hash, used to fingerprint scenario parameters in
/// provenance metadata. Stable across platforms and compiler versions,
/// unlike `std::hash`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120.0_f64.ln()).abs() < 1e-13);
        assert!((ln_factorial(10) - 3628800.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn binomial_row_sums_to_one() {
        for &n in &[1usize, 5, 20, 90] {
            for &p in &[0.0, 0.3, 0.5, 0.97, 1.0] {
                let sum: f64 = (0..=n).map(|k| binomial_pmf(k, n, p)).sum();
                assert!((sum - 1.0).abs() < 1e-12, "n={n} p={p} sum={sum}");
            }
        }
    }

    #[test]
    fn poisson_pmf_matches_direct_evaluation() {
        // β^l e^{-β} / l! for small l where direct f64 evaluation is exact
        let direct = 27.0 * (-3.0_f64).exp() / 6.0;
        assert!((poisson_pmf(3, 3.0) - direct).abs() < 1e-15);
    }

    #[test]
    fn poisson_tail_decreases() {
        let t5 = poisson_upper_tail(5, 3.0);
        let t10 = poisson_upper_tail(10, 3.0);
        assert!(t5 > t10);
        assert!(t10 > 0.0);
        assert_eq!(poisson_upper_tail(10_000, 3.0), 0.0);
    }

    #[test]
    fn fnv1a64_reference_vector() {
        // FNV-1a("") and FNV-1a("a") published reference values
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}

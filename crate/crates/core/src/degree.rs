//! Node- and edge-perspective degree distributions of frameless ALOHA.
//!
//! Users transmit in each slot of the contention period independently with
//! activation probability `p_A = β/N`, so slot degrees are Binomial(N, β/N)
//! ≈ Poisson(β) and user degrees over M = (1+ε)N slots are ≈ Poisson((1+ε)β).
//! Both distributions are represented truncated, with the discarded upper
//! tail carried explicitly so normalization checks stay meaningful.

use crate::error::{Error, Result};
use crate::numeric::{poisson_pmf, poisson_support_bound, poisson_upper_tail};

/// Default truncation tolerance for constructors that take none.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// A probability distribution over node degrees `0..=d_max`, truncated so
/// that the mass beyond `d_max` (carried in `tail_mass`) is small.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl DegreeDistribution {
    /// Build from explicit per-degree probabilities (degree 0 first).
    /// `tail_mass` is set to the deficit `1 - Σ probs`, which must be
    /// non-negative up to rounding.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("degree distribution must be non-empty"));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::domain("degree probabilities must lie in [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if sum > 1.0 + 1e-12 {
            return Err(Error::domain(format!(
                "degree probabilities sum to {sum} > 1"
            )));
        }
        let tail_mass = (1.0 - sum).max(0.0);
        Ok(Self { probs, tail_mass })
    }

    /// Truncated Poisson with the given mean: smallest `d_max` whose upper
    /// tail P(X > d_max) is at most `tail_tol`.
    pub fn poisson(mean: f64, tail_tol: f64) -> Result<Self> {
        if !(mean > 0.0) {
            return Err(Error::domain(format!("Poisson mean must be > 0, got {mean}")));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::domain(format!(
                "tail tolerance must lie in (0, 1), got {tail_tol}"
            )));
        }
        let hi = poisson_support_bound(mean);
        // Backward cumulative tails: tail[d] = P(X > d), free of 1-x cancellation.
        let mut d_max = hi;
        let mut tail = 0.0;
        for d in (0..hi).rev() {
            let next_tail = tail + poisson_pmf(d + 1, mean);
            if next_tail > tail_tol {
                break;
            }
            tail = next_tail;
            d_max = d;
        }
        let probs = (0..=d_max).map(|l| poisson_pmf(l, mean)).collect();
        Ok(Self {
            probs,
            tail_mass: poisson_upper_tail(d_max, mean),
        })
    }

    /// Largest represented degree.
    pub fn d_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability of degree `k` (0 beyond the represented range).
    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Mean over the represented support.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum()
    }

    /// Edge-perspective transform: the probability that an edge attaches to
    /// a node of degree `k` is `k·Λ_k / Σ_v v·Λ_v`. Degree 0 maps to 0 and
    /// the output is renormalized over the represented support.
    pub fn edge_perspective(&self) -> Result<DegreeDistribution> {
        let mean = self.mean();
        if !(mean > 0.0) {
            return Err(Error::domain(
                "edge perspective undefined for zero-mean degree distribution",
            ));
        }
        let mut probs: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p / mean)
            .collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        Ok(DegreeDistribution {
            probs,
            tail_mass: 0.0,
        })
    }
}

/// Access parameters of a frameless ALOHA contention period.
///
/// `epsilon = M/N - 1`; the finite-N fields are only set in simulator
/// contexts, asymptotic analysis uses `(beta, epsilon)` alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessParams {
    pub beta: f64,
    pub epsilon: f64,
    pub n_users: Option<u64>,
    pub n_slots: Option<u64>,
}

impl AccessParams {
    /// Asymptotic parameters: no finite-N fields.
    pub fn asymptotic(beta: f64, epsilon: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::domain(format!("beta must be > 0, got {beta}")));
        }
        if !(epsilon > -1.0) {
            return Err(Error::domain(format!("epsilon must be > -1, got {epsilon}")));
        }
        Ok(Self {
            beta,
            epsilon,
            n_users: None,
            n_slots: None,
        })
    }

    /// Finite-N parameters; `M` is derived as round(N·(1+ε)) and `epsilon`
    /// re-resolved to the realized ratio `M/N - 1`.
    pub fn finite(beta: f64, epsilon: f64, n_users: u64) -> Result<Self> {
        let base = Self::asymptotic(beta, epsilon)?;
        if n_users == 0 {
            return Err(Error::domain("n_users must be positive"));
        }
        let p_a = beta / n_users as f64;
        if !(p_a > 0.0 && p_a <= 1.0) {
            return Err(Error::domain(format!(
                "activation probability beta/N = {p_a} outside (0, 1]"
            )));
        }
        let n_slots = (n_users as f64 * (1.0 + epsilon)).round() as u64;
        if n_slots == 0 {
            return Err(Error::domain("derived n_slots must be positive"));
        }
        Ok(Self {
            epsilon: n_slots as f64 / n_users as f64 - 1.0,
            n_users: Some(n_users),
            n_slots: Some(n_slots),
            ..base
        })
    }

    /// Per-slot activation probability `β/N` (finite-N contexts).
    pub fn activation_probability(&self) -> Option<f64> {
        self.n_users.map(|n| self.beta / n as f64)
    }
}

/// Slot-degree distribution Ω: Poisson(β), truncated at `tail_tol`.
pub fn slot_degree_dist(beta: f64, tail_tol: f64) -> Result<DegreeDistribution> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be > 0, got {beta}")));
    }
    DegreeDistribution::poisson(beta, tail_tol)
}

/// User-degree distribution Λ: Poisson with mean `(1+ε)β`, the mean forced
/// by E[|u_i|] = (1+ε)β, truncated at `tail_tol`.
pub fn user_degree_dist(beta: f64, epsilon: f64, tail_tol: f64) -> Result<DegreeDistribution> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be > 0, got {beta}")));
    }
    if !(epsilon > -1.0) {
        return Err(Error::domain(format!("epsilon must be > -1, got {epsilon}")));
    }
    DegreeDistribution::poisson((1.0 + epsilon) * beta, tail_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_dist_poisson_pmf_values() {
        // Ω_0 at β = 1 is e^{-1}
        let d = slot_degree_dist(1.0, 1e-10).unwrap();
        assert!((d.prob(0) - (-1.0_f64).exp()).abs() < 1e-15);

        // Ω_3 at β = 3 is 27 e^{-3} / 6 ≈ 0.224042 (direct pmf evaluation)
        let d = slot_degree_dist(3.0, 1e-10).unwrap();
        assert!((d.prob(3) - 27.0 * (-3.0_f64).exp() / 6.0).abs() < 1e-15);
        assert!((d.prob(3) - 0.22404180765538774).abs() < 1e-15);
    }

    #[test]
    fn slot_dist_truncation_point_beta_37() {
        // Smallest d with Poisson(37) upper tail < 1e-10 is 82, computed by
        // summing the pmf at 60-digit precision (P(X>82) = 5.558e-11).
        let d = slot_degree_dist(37.0, 1e-10).unwrap();
        assert_eq!(d.d_max(), 82);
        assert!(d.tail_mass() <= 1e-10);
        assert!((d.tail_mass() - 5.558e-11).abs() < 1e-13);
    }

    #[test]
    fn user_dist_mean_is_one_plus_eps_beta() {
        let d = user_degree_dist(2.0, 0.0, 1e-12).unwrap();
        assert!((d.mean() - 2.0).abs() < 1e-10);

        // (β, M/N) = (37, 0.023) gives mean user degree 0.851
        let d = user_degree_dist(37.0, 0.023 - 1.0, 1e-12).unwrap();
        assert!((d.mean() - 0.851).abs() < 1e-10);

        // Λ_2 at β = 1, ε = 1 is Poisson(2) pmf at 2 = 2² e^{-2} / 2
        let d = user_degree_dist(1.0, 1.0, 1e-10).unwrap();
        assert!((d.prob(2) - 0.27067056647322538).abs() < 1e-15);
    }

    #[test]
    fn constructors_reject_bad_domains() {
        assert!(slot_degree_dist(0.0, 1e-10).is_err());
        assert!(slot_degree_dist(-1.0, 1e-10).is_err());
        assert!(slot_degree_dist(1.0, 0.0).is_err());
        assert!(slot_degree_dist(1.0, 1.0).is_err());
        assert!(user_degree_dist(1.0, -1.0, 1e-10).is_err());
        assert!(user_degree_dist(-2.0, 0.5, 1e-10).is_err());
    }

    #[test]
    fn edge_perspective_point_mass_is_invariant() {
        let d = DegreeDistribution::from_probs(vec![0.0, 0.0, 1.0]).unwrap();
        let e = d.edge_perspective().unwrap();
        assert_eq!(e.prob(2), 1.0);
        assert_eq!(e.prob(1), 0.0);
    }

    #[test]
    fn edge_perspective_uniform_over_1_2() {
        let d = DegreeDistribution::from_probs(vec![0.0, 0.5, 0.5]).unwrap();
        let e = d.edge_perspective().unwrap();
        assert!((e.prob(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.prob(2) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn edge_perspective_of_poisson_is_shifted_poisson() {
        // k·Poisson(μ)_k / μ = Poisson(μ)_{k-1}; checked entrywise for μ = 3.
        let mu = 3.0;
        let d = DegreeDistribution::poisson(mu, 1e-15).unwrap();
        let e = d.edge_perspective().unwrap();
        for l in 1..=10 {
            let shifted = poisson_pmf(l - 1, mu);
            assert!(
                (e.prob(l) - shifted).abs() < 1e-12,
                "l={l}: {} vs {}",
                e.prob(l),
                shifted
            );
        }
        assert_eq!(e.prob(0), 0.0);
    }

    #[test]
    fn edge_perspective_preserves_mass() {
        for &(beta, tol) in &[(0.5, 1e-10), (3.0, 1e-12), (37.0, 1e-10)] {
            let d = slot_degree_dist(beta, tol).unwrap();
            let e = d.edge_perspective().unwrap();
            let total: f64 = e.probs().iter().sum::<f64>() + e.tail_mass();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_perspective_rejects_zero_mean() {
        let d = DegreeDistribution::from_probs(vec![1.0]).unwrap();
        assert!(d.edge_perspective().is_err());
    }

    #[test]
    fn poisson_mass_and_mean_within_tail_tolerance() {
        for &beta in &[0.3, 1.0, 3.0, 37.0] {
            let d = slot_degree_dist(beta, 1e-10).unwrap();
            let total: f64 = d.probs().iter().sum::<f64>() + d.tail_mass();
            assert!((total - 1.0).abs() < 1e-12, "beta={beta}");
            // truncation removes at most tail·d_max of the mean
            let mean_err = (d.mean() - beta).abs();
            assert!(mean_err < 1e-10 * (d.d_max() as f64 + 1.0), "beta={beta}");
        }
    }

    #[test]
    fn access_params_finite_resolves_m() {
        let p = AccessParams::finite(3.0, 0.0, 100).unwrap();
        assert_eq!(p.n_slots, Some(100));
        assert!((p.activation_probability().unwrap() - 0.03).abs() < 1e-15);

        let p = AccessParams::finite(37.0, 0.023 - 1.0, 1000).unwrap();
        assert_eq!(p.n_slots, Some(23));
        assert!((p.epsilon - (23.0 / 1000.0 - 1.0)).abs() < 1e-15);

        // p_A = β/N > 1 rejected
        assert!(AccessParams::finite(10.0, 0.0, 5).is_err());
        assert!(AccessParams::asymptotic(1.0, -1.0).is_err());
    }
}

//! Asymptotic and-or tree evaluation with capture.
//!
//! Tracks the probability `r` that a user-side edge is still unrecovered
//! and the probability `q` that a slot-side edge failed to resolve it.
//! For Poisson-distributed degrees both update maps close over the edge
//! perspective:
//!
//! ```text
//! r = f(q) = exp(-(1+ε)·β·(1-q))
//! q = g(r) = 1 - Σ_l  ω_l · Σ_t C(t)·Bin(l-1, r; t)           ω_l = Poisson(β) at l-1
//! ```
//!
//! Iterating from `q_0 = 1` descends monotonically to the fixed point;
//! `P_R = 1 - lim r` and the throughput is `T = P_R/(1+ε)`.

use rayon::prelude::*;

use crate::capture::CaptureVector;
use crate::error::{Error, Result};
use crate::numeric::{binomial_pmf, poisson_pmf, poisson_support_bound, poisson_upper_tail};

/// Fixed-point iteration trace.
#[derive(Debug, Clone)]
pub struct FixedPointTrace {
    /// (r_m, q_m) pairs, m = 1..
    pub iterates: Vec<(f64, f64)>,
    pub converged: bool,
    /// Final user-resolution probability `1 - lim r_m`.
    pub p_r: f64,
    /// `p_r / (1+ε)`.
    pub throughput: f64,
    pub iterations_used: usize,
    /// Poisson slot-degree mass on degrees above the capture vector's
    /// range; those slots are treated as unrecoverable, so a large value
    /// means `t_max` should be raised.
    pub truncation_mass: f64,
}

/// Convergence controls for [`evaluate`].
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Absolute stop threshold on |r_m - r_{m-1}|.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// User-side update `r = exp(-(1+ε)β(1-q))`.
pub fn user_update(q: f64, beta: f64, epsilon: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q));
    (-(1.0 + epsilon) * beta * (1.0 - q)).exp()
}

/// Slot-side update `q = g(r)`.
///
/// The outer sum runs over slot degrees until the Poisson edge mass is
/// exhausted (bound depends on β only, never on the capture range, so
/// zero-extending the capture vector cannot change the result). `C(t)` is
/// zero beyond the vector's range; inner terms with `C(t) = 0` are skipped,
/// which contributes exactly nothing to the sum.
pub fn slot_update(r: f64, beta: f64, capture: &CaptureVector) -> f64 {
    debug_assert!((0.0..=1.0).contains(&r));
    let l_max = poisson_support_bound(beta) + 1;
    let t_len = capture.t_max();
    let mut recovered = 0.0_f64;
    for l in 1..=l_max {
        let omega = poisson_pmf(l - 1, beta);
        if omega == 0.0 {
            continue;
        }
        let t_hi = (l - 1).min(t_len - 1);
        let mut inner = 0.0_f64;
        for t in 0..=t_hi {
            let c = capture.value(t);
            if c == 0.0 {
                continue;
            }
            inner += c * binomial_pmf(t, l - 1, r);
        }
        recovered += omega * inner;
    }
    (1.0 - recovered).clamp(0.0, 1.0)
}

/// Run the fixed-point iteration from `q_0 = 1`.
///
/// Non-convergence within `max_iter` is reported through the `converged`
/// flag, not an error: the iteration is monotone for any capture vector
/// with non-increasing `C(t)`, so hitting the cap means `tol` is too tight.
pub fn evaluate(
    beta: f64,
    epsilon: f64,
    capture: &CaptureVector,
    options: &EvalOptions,
) -> FixedPointTrace {
    assert!(beta > 0.0, "beta must be > 0");
    assert!(epsilon > -1.0, "epsilon must be > -1");
    assert!(options.tol > 0.0, "tol must be > 0");
    assert!(options.max_iter >= 1, "max_iter must be >= 1");

    // Monotone descent is only guaranteed when C(t) is non-increasing
    // (more interferers never help); only then do we enforce it.
    let monotone_capture = capture.values().windows(2).all(|w| w[1] <= w[0]);

    let truncation_mass = poisson_upper_tail(capture.t_max(), beta);
    let mut iterates = Vec::new();
    let mut q_prev = 1.0_f64;
    let mut r_prev = f64::INFINITY;
    let mut converged = false;

    for _ in 0..options.max_iter {
        let r = user_update(q_prev, beta, epsilon);
        let q = slot_update(r, beta, capture);
        assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&q));
        if monotone_capture && r_prev.is_finite() {
            assert!(
                r <= r_prev + 1e-12 && q <= q_prev + 1e-12,
                "fixed-point iterates must descend: r {r_prev}->{r}, q {q_prev}->{q}"
            );
        }
        iterates.push((r, q));
        if r_prev.is_finite() && (r_prev - r).abs() < options.tol {
            converged = true;
            break;
        }
        r_prev = r;
        q_prev = q;
    }

    let r_final = iterates.last().map(|&(r, _)| r).unwrap_or(1.0);
    let p_r = 1.0 - r_final;
    FixedPointTrace {
        iterations_used: iterates.len(),
        iterates,
        converged,
        p_r,
        throughput: p_r / (1.0 + epsilon),
        truncation_mass,
    }
}

/// Result of a β optimization at fixed ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaOptimum {
    pub beta_star: f64,
    pub p_r_star: f64,
    pub t_star: f64,
}

/// Evaluate every β in the grid and return the P_R-argmax, ties broken
/// toward smaller β (fewer transmissions per user at equal resolution).
pub fn sweep_beta(
    epsilon: f64,
    capture: &CaptureVector,
    beta_grid: &[f64],
    options: &EvalOptions,
) -> Result<BetaOptimum> {
    if beta_grid.is_empty() {
        return Err(Error::domain("beta grid must be non-empty"));
    }
    if beta_grid.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::domain("beta grid entries must be > 0"));
    }
    let traces: Vec<(f64, FixedPointTrace)> = beta_grid
        .par_iter()
        .map(|&b| (b, evaluate(b, epsilon, capture, options)))
        .collect();
    let mut best: Option<BetaOptimum> = None;
    for (b, trace) in traces {
        let better = match &best {
            None => true,
            Some(opt) => {
                trace.p_r > opt.p_r_star || (trace.p_r == opt.p_r_star && b < opt.beta_star)
            }
        };
        if better {
            best = Some(BetaOptimum {
                beta_star: b,
                p_r_star: trace.p_r,
                t_star: trace.throughput,
            });
        }
    }
    Ok(best.unwrap())
}

/// Grid argmax followed by `refine_rounds` of local refinement: each round
/// re-grids ±1 coarse step around the incumbent at 10× resolution.
pub fn optimize_beta(
    epsilon: f64,
    capture: &CaptureVector,
    beta_grid: &[f64],
    refine_rounds: usize,
    options: &EvalOptions,
) -> Result<BetaOptimum> {
    let mut grid: Vec<f64> = beta_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = sweep_beta(epsilon, capture, &grid, options)?;
    for _ in 0..refine_rounds {
        if grid.len() < 2 {
            break;
        }
        let idx = grid
            .iter()
            .position(|&b| b == best.beta_star)
            .unwrap_or(grid.len() / 2);
        let left = if idx > 0 { grid[idx - 1] } else { grid[idx] };
        let right = if idx + 1 < grid.len() {
            grid[idx + 1]
        } else {
            grid[idx]
        };
        if right <= left {
            break;
        }
        grid = linspace(left.max(f64::MIN_POSITIVE), right, 21);
        let refined = sweep_beta(epsilon, capture, &grid, options)?;
        if refined.p_r_star > best.p_r_star
            || (refined.p_r_star == best.p_r_star && refined.beta_star < best.beta_star)
        {
            best = refined;
        }
    }
    Ok(best)
}

/// One row of a ratio sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub m_over_n: f64,
    pub beta_star: f64,
    pub p_r_star: f64,
    pub t_star: f64,
}

/// Full (β, P_R, T) curve sample, emitted when curves are requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub m_over_n: f64,
    pub beta: f64,
    pub p_r: f64,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Per-(ratio, β) evaluations over the unrefined grid, if requested.
    pub curves: Option<Vec<CurvePoint>>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub eval: EvalOptions,
    pub refine_rounds: usize,
    pub include_curves: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            eval: EvalOptions::default(),
            refine_rounds: 2,
            include_curves: false,
        }
    }
}

/// Optimize β for every ratio M/N in the grid.
///
/// The reported `t_star` is `p_r_star / (M/N)` computed from the ratio
/// itself, so the `T* = P_R*/(M/N)` identity holds exactly for the emitted
/// rows.
pub fn sweep_ratio(
    ratio_grid: &[f64],
    capture: &CaptureVector,
    beta_grid: &[f64],
    options: &SweepOptions,
) -> Result<SweepResult> {
    if ratio_grid.is_empty() {
        return Err(Error::domain("ratio grid must be non-empty"));
    }
    if ratio_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::domain("ratios must be > 0"));
    }
    let per_ratio: Vec<(SweepPoint, Vec<CurvePoint>)> = ratio_grid
        .par_iter()
        .map(|&ratio| {
            let epsilon = ratio - 1.0;
            let best = optimize_beta(epsilon, capture, beta_grid, options.refine_rounds, &options.eval)?;
            let point = SweepPoint {
                m_over_n: ratio,
                beta_star: best.beta_star,
                p_r_star: best.p_r_star,
                t_star: best.p_r_star / ratio,
            };
            let curve = if options.include_curves {
                beta_grid
                    .iter()
                    .map(|&b| {
                        let trace = evaluate(b, epsilon, capture, &options.eval);
                        CurvePoint {
                            m_over_n: ratio,
                            beta: b,
                            p_r: trace.p_r,
                            t: trace.p_r / ratio,
                        }
                    })
                    .collect()
            } else {
                Vec::new()
            };
            Ok((point, curve))
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(per_ratio.len());
    let mut curves = Vec::new();
    for (p, c) in per_ratio {
        points.push(p);
        curves.extend(c);
    }
    Ok(SweepResult {
        points,
        curves: options.include_curves.then_some(curves),
    })
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && hi >= lo);
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                lo + i as f64 * step
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{chain_capture, synthetic_table, SyntheticKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn collision_vector(t_max: usize) -> CaptureVector {
        chain_capture(&synthetic_table(SyntheticKind::Collision, t_max).unwrap())
    }

    #[test]
    fn user_update_examples() {
        assert_eq!(user_update(1.0, 5.0, 0.3), 1.0);
        assert!((user_update(0.0, 2.0, 0.0) - (-2.0_f64).exp()).abs() < 1e-15);
        assert!((user_update(0.5, 3.0, 0.5) - (-2.25_f64).exp()).abs() < 1e-15);
        assert!((user_update(0.5, 3.0, 0.5) - 0.10539922456186434).abs() < 1e-15);
    }

    #[test]
    fn slot_update_perfect_mud_telescopes_to_zero() {
        // C ≡ 1: the inner sum is the full binomial expansion, so every slot
        // resolves its edge and q = 0 up to the Poisson truncation tail.
        let c = CaptureVector::constant(1.0, 60).unwrap();
        for &r in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let q = slot_update(r, 3.0, &c);
            assert!(q.abs() < 1e-12, "r={r} q={q}");
        }
    }

    #[test]
    fn slot_update_collision_examples() {
        // collision channel at r = 1: only degree-1 slots resolve the edge
        let c = collision_vector(30);
        let q = slot_update(1.0, 1.0, &c);
        assert!((q - (1.0 - (-1.0_f64).exp())).abs() < 1e-12);
        assert!((q - 0.63212055882855768).abs() < 1e-12);

        // singleton-prob(0.85) scales the same term by p(1|1)
        let t = synthetic_table(SyntheticKind::SingletonProb(0.85), 30).unwrap();
        let c = chain_capture(&t);
        let q = slot_update(1.0, 1.0, &c);
        assert!((q - (1.0 - 0.85 * (-1.0_f64).exp())).abs() < 1e-12);
        assert!((q - 0.68730247500427403).abs() < 1e-12);
    }

    #[test]
    fn slot_update_zero_extension_is_bit_identical() {
        let base = collision_vector(20);
        let mut extended_values = base.values().to_vec();
        extended_values.extend(std::iter::repeat(0.0).take(20));
        let extended = CaptureVector::from_values(extended_values).unwrap();
        for &r in &[0.0, 0.1, 0.37, 0.99, 1.0] {
            let a = slot_update(r, 2.5, &base);
            let b = slot_update(r, 2.5, &extended);
            assert_eq!(a.to_bits(), b.to_bits(), "r={r}");
        }
    }

    #[test]
    fn evaluate_zero_extension_is_bit_identical() {
        let base = collision_vector(25);
        let mut doubled_values = base.values().to_vec();
        doubled_values.extend(std::iter::repeat(0.0).take(25));
        let doubled = CaptureVector::from_values(doubled_values).unwrap();
        let opts = EvalOptions::default();
        let a = evaluate(3.0, 0.0, &base, &opts);
        let b = evaluate(3.0, 0.0, &doubled, &opts);
        assert_eq!(a.p_r.to_bits(), b.p_r.to_bits());
        assert_eq!(a.iterations_used, b.iterations_used);
    }

    #[test]
    fn evaluate_perfect_mud_closed_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let c = CaptureVector::constant(1.0, 220).unwrap();
        for _ in 0..20 {
            let beta = rng.gen::<f64>() * 39.9 + 0.1;
            let epsilon = rng.gen::<f64>() * 3.9 - 0.9;
            let trace = evaluate(beta, epsilon, &c, &EvalOptions::default());
            let expected = 1.0 - (-(1.0 + epsilon) * beta).exp();
            assert!(
                (trace.p_r - expected).abs() < 1e-9,
                "beta={beta} eps={epsilon}: {} vs {expected}",
                trace.p_r
            );
            assert!(trace.converged);
        }
    }

    #[test]
    fn evaluate_zero_capture_gives_zero() {
        let c = CaptureVector::constant(0.0, 10).unwrap();
        let trace = evaluate(2.0, 0.0, &c, &EvalOptions::default());
        assert_eq!(trace.p_r, 0.0);
        assert_eq!(trace.throughput, 0.0);
        assert!(trace.converged);
    }

    #[test]
    fn evaluate_throughput_identity_and_monotone_iterates() {
        let c = collision_vector(40);
        for &(beta, eps) in &[(1.0, 0.0), (3.0, 0.5), (2.0, -0.5)] {
            let trace = evaluate(beta, eps, &c, &EvalOptions::default());
            // stored pair is exactly consistent
            assert_eq!(trace.throughput.to_bits(), (trace.p_r / (1.0 + eps)).to_bits());
            // q_0 = 1 and monotone non-increasing iterates within slack
            let mut prev = (1.0_f64, 1.0_f64);
            for &(r, q) in &trace.iterates {
                assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&q));
                assert!(r <= prev.0 + 1e-12 && q <= prev.1 + 1e-12);
                prev = (r, q);
            }
        }
    }

    #[test]
    fn evaluate_reports_non_convergence() {
        let c = collision_vector(40);
        let opts = EvalOptions {
            tol: 1e-300,
            max_iter: 3,
        };
        let trace = evaluate(3.0, 0.0, &c, &opts);
        assert!(!trace.converged);
        assert_eq!(trace.iterations_used, 3);
    }

    #[test]
    fn evaluate_truncation_mass_warns_small_t_max() {
        let c = CaptureVector::constant(1.0, 2).unwrap();
        let trace = evaluate(10.0, 0.0, &c, &EvalOptions::default());
        assert!(trace.truncation_mass > 1e-6);
        let c = CaptureVector::constant(1.0, 80).unwrap();
        let trace = evaluate(10.0, 0.0, &c, &EvalOptions::default());
        assert!(trace.truncation_mass < 1e-12);
    }

    #[test]
    fn sweep_beta_perfect_mud_prefers_largest() {
        let c = CaptureVector::constant(1.0, 120).unwrap();
        let best = sweep_beta(0.0, &c, &[1.0, 2.0, 3.0], &EvalOptions::default()).unwrap();
        assert_eq!(best.beta_star, 3.0);
        assert!((best.p_r_star - (1.0 - (-3.0_f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn sweep_beta_ties_break_toward_smaller_beta() {
        // C ≡ 0 makes every β equally (un)attractive
        let c = CaptureVector::constant(0.0, 10).unwrap();
        let best = sweep_beta(0.0, &c, &[2.0, 1.0, 3.0], &EvalOptions::default()).unwrap();
        assert_eq!(best.beta_star, 1.0);
        assert_eq!(best.p_r_star, 0.0);
    }

    #[test]
    fn singleton_prob_one_equals_collision() {
        let a = chain_capture(&synthetic_table(SyntheticKind::SingletonProb(1.0), 25).unwrap());
        let b = collision_vector(25);
        let grid = linspace(0.5, 5.0, 10);
        let opts = EvalOptions::default();
        let best_a = sweep_beta(0.0, &a, &grid, &opts).unwrap();
        let best_b = sweep_beta(0.0, &b, &grid, &opts).unwrap();
        assert_eq!(best_a, best_b);
    }

    #[test]
    fn collision_channel_optimum_regression() {
        // Regression values frozen from the first run of the evaluator and
        // cross-checked against an independent finite-N peeling simulation
        // (N = 32,000 gives empirical P_R ≈ 0.62 at β = 2.5): at M/N = 1 the
        // resolution probability climbs until the iterative-cancellation
        // cliff at β ≈ 2.72 and collapses beyond it.
        let c = collision_vector(60);
        let grid = linspace(1.0, 6.0, 26);
        let best = optimize_beta(0.0, &c, &grid, 2, &EvalOptions::default()).unwrap();
        assert!(
            (best.beta_star - 2.716).abs() < 1e-3,
            "beta_star={}",
            best.beta_star
        );
        assert!(
            (best.t_star - 0.63196).abs() < 1e-4,
            "t_star={}",
            best.t_star
        );
    }

    #[test]
    fn sweep_ratio_shapes_and_identity() {
        let c = collision_vector(40);
        let ratios = [0.5, 1.0, 1.5];
        let grid = linspace(0.5, 5.0, 10);
        let opts = SweepOptions {
            include_curves: true,
            refine_rounds: 1,
            ..Default::default()
        };
        let res = sweep_ratio(&ratios, &c, &grid, &opts).unwrap();
        assert_eq!(res.points.len(), 3);
        for p in &res.points {
            assert_eq!(p.t_star.to_bits(), (p.p_r_star / p.m_over_n).to_bits());
        }
        let curves = res.curves.unwrap();
        assert_eq!(curves.len(), 3 * grid.len());
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let c = collision_vector(10);
        assert!(sweep_beta(0.0, &c, &[], &EvalOptions::default()).is_err());
        assert!(sweep_beta(0.0, &c, &[0.0], &EvalOptions::default()).is_err());
        assert!(sweep_ratio(&[-1.0], &c, &[1.0], &SweepOptions::default()).is_err());
    }
}

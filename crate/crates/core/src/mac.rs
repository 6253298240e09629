//! Finite-N frameless ALOHA simulator with inter-/intra-slot IC.
//!
//! Slots are processed in arrival order. On each arrival the receiver
//! first cancels replicas of already-recovered users, then loops: query
//! the capture oracle on the slot's unrecovered users, cancel the newly
//! recovered ones inside the slot and propagate the cancellations to all
//! earlier slots. Earlier slots whose residual degree changed are pushed
//! onto a work queue and re-processed with the same loop until the queue
//! drains.
//!
//! A slot that produced no recoveries at residual degree `d` is not
//! re-queried until its degree changes: a deterministic receiver on the
//! same input yields the same output, and re-sampling the stochastic
//! table oracle at an unchanged degree would fabricate capture
//! probability.

use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};

use crate::capture::CaptureTable;
use crate::error::{Error, Result};

/// Bipartite user/slot contention graph.
#[derive(Debug, Clone)]
pub struct ContentionGraph {
    n_users: usize,
    slot_users: Vec<Vec<u32>>,
    user_slots: Vec<Vec<u32>>,
}

impl ContentionGraph {
    /// Build from explicit per-slot user lists.
    pub fn from_slot_lists(n_users: usize, slot_users: Vec<Vec<u32>>) -> Result<Self> {
        let mut user_slots = vec![Vec::new(); n_users];
        for (j, users) in slot_users.iter().enumerate() {
            let mut seen = vec![];
            for &u in users {
                if u as usize >= n_users {
                    return Err(Error::domain(format!("user {u} out of range in slot {j}")));
                }
                if seen.contains(&u) {
                    return Err(Error::domain(format!(
                        "user {u} transmits twice in slot {j}"
                    )));
                }
                seen.push(u);
                user_slots[u as usize].push(j as u32);
            }
        }
        Ok(Self {
            n_users,
            slot_users,
            user_slots,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_slots(&self) -> usize {
        self.slot_users.len()
    }

    pub fn slot_users(&self, slot: usize) -> &[u32] {
        &self.slot_users[slot]
    }

    pub fn user_slots(&self, user: usize) -> &[u32] {
        &self.user_slots[user]
    }

    /// Mean number of transmissions per slot.
    pub fn mean_slot_degree(&self) -> f64 {
        let edges: usize = self.slot_users.iter().map(Vec::len).sum();
        edges as f64 / self.n_slots() as f64
    }
}

/// Draw a contention graph: each (user, slot) edge is present independently
/// with activation probability `β/N`.
pub fn generate_graph(
    n_users: usize,
    n_slots: usize,
    beta: f64,
    rng: &mut ChaCha12Rng,
) -> Result<ContentionGraph> {
    if n_users == 0 || n_slots == 0 {
        return Err(Error::domain("graph needs at least one user and one slot"));
    }
    let p_a = beta / n_users as f64;
    if !(p_a > 0.0 && p_a <= 1.0) {
        return Err(Error::domain(format!(
            "activation probability beta/N = {p_a} outside (0, 1]"
        )));
    }
    // Per slot, draw the transmitter count Binomial(N, p_A), then pick which
    // users uniformly; equivalent to N independent Bernoulli draws but O(k).
    let binom = Binomial::new(n_users as u64, p_a)
        .map_err(|e| Error::domain(format!("binomial setup failed: {e}")))?;
    let mut slot_users = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        let k = binom.sample(rng) as usize;
        let mut users: Vec<u32> = sample_indices(rng, n_users, k)
            .into_iter()
            .map(|u| u as u32)
            .collect();
        users.sort_unstable();
        slot_users.push(users);
    }
    ContentionGraph::from_slot_lists(n_users, slot_users)
}

/// Decides which of a slot's unrecovered users one detector pass recovers.
pub trait SlotOracle {
    /// `unrecovered` holds the user ids still colliding in `slot`; the
    /// returned recoveries must be a subset of it.
    fn query(&mut self, slot: usize, unrecovered: &[u32], rng: &mut ChaCha12Rng) -> Vec<u32>;
}

/// Stochastic oracle backed by a capture table: samples `s ~ p(·|d)` and
/// picks the recovered users uniformly (the exchangeability assumption
/// behind the referent split). Residual degrees above the table range are
/// treated as unrecoverable.
pub struct TableOracle<'a> {
    table: &'a CaptureTable,
}

impl<'a> TableOracle<'a> {
    pub fn new(table: &'a CaptureTable) -> Self {
        Self { table }
    }
}

impl SlotOracle for TableOracle<'_> {
    fn query(&mut self, _slot: usize, unrecovered: &[u32], rng: &mut ChaCha12Rng) -> Vec<u32> {
        let d = unrecovered.len();
        if d == 0 || d > self.table.t_max() {
            return Vec::new();
        }
        let row = self.table.row(d);
        let x: f64 = rng.gen();
        let mut cum = 0.0;
        let mut s = 0;
        for (k, &p) in row.iter().enumerate() {
            cum += p;
            if x < cum {
                s = k;
                break;
            }
        }
        if s == 0 {
            return Vec::new();
        }
        sample_indices(rng, d, s)
            .into_iter()
            .map(|i| unrecovered[i])
            .collect()
    }
}

/// Outcome of one receiver run over a contention period.
#[derive(Debug, Clone)]
pub struct ReceiverReport {
    pub n_users: usize,
    pub n_slots: usize,
    pub recovered_count: usize,
    /// Users in the order they were recovered.
    pub recovery_order: Vec<u32>,
    /// Residual degree of each slot when the receiver stopped.
    pub final_residual_degree: Vec<usize>,
    pub oracle_queries: u64,
    /// Fraction of users resolved.
    pub p_r: f64,
    /// Resolved users per slot, `N·P_R/M`.
    pub throughput: f64,
}

/// Run the interference-cancelling receiver over the whole contention
/// period against the given capture oracle.
pub fn run_receiver(
    graph: &ContentionGraph,
    oracle: &mut dyn SlotOracle,
    rng: &mut ChaCha12Rng,
) -> ReceiverReport {
    let n_slots = graph.n_slots();
    let n_users = graph.n_users();
    let mut recovered = vec![false; n_users];
    let mut recovery_order = Vec::new();
    // residual degree, maintained only for arrived slots
    let mut residual_degree = vec![0usize; n_slots];
    // last residual degree at which the oracle returned nothing
    let mut failed_at: Vec<Option<usize>> = vec![None; n_slots];
    let mut in_queue = vec![false; n_slots];
    let mut queries: u64 = 0;

    let mut queue: VecDeque<usize> = VecDeque::new();
    for arrival in 0..n_slots {
        // inter-slot IC of everything recovered before this slot arrived
        residual_degree[arrival] = graph
            .slot_users(arrival)
            .iter()
            .filter(|&&u| !recovered[u as usize])
            .count();

        queue.push_back(arrival);
        in_queue[arrival] = true;
        while let Some(slot) = queue.pop_front() {
            in_queue[slot] = false;
            loop {
                let d = residual_degree[slot];
                if d == 0 || failed_at[slot] == Some(d) {
                    break;
                }
                let unrecovered: Vec<u32> = graph
                    .slot_users(slot)
                    .iter()
                    .copied()
                    .filter(|&u| !recovered[u as usize])
                    .collect();
                debug_assert_eq!(unrecovered.len(), d);
                queries += 1;
                let newly = oracle.query(slot, &unrecovered, rng);
                if newly.is_empty() {
                    failed_at[slot] = Some(d);
                    break;
                }
                debug_assert!(newly.iter().all(|u| unrecovered.contains(u)));
                for &u in &newly {
                    debug_assert!(!recovered[u as usize]);
                    recovered[u as usize] = true;
                    recovery_order.push(u);
                }
                // intra-slot IC
                residual_degree[slot] -= newly.len();
                // inter-slot IC toward every other already-arrived slot
                for &u in &newly {
                    for &other in graph.user_slots(u as usize) {
                        let other = other as usize;
                        if other == slot || other > arrival {
                            continue;
                        }
                        residual_degree[other] -= 1;
                        if !in_queue[other] {
                            queue.push_back(other);
                            in_queue[other] = true;
                        }
                    }
                }
            }
        }
    }

    let recovered_count = recovery_order.len();
    let p_r = recovered_count as f64 / n_users as f64;
    ReceiverReport {
        n_users,
        n_slots,
        recovered_count,
        recovery_order,
        final_residual_degree: residual_degree,
        oracle_queries: queries,
        p_r,
        throughput: recovered_count as f64 / n_slots as f64,
    }
}

/// Aggregate statistics over repeated receiver runs.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalStats {
    pub runs: usize,
    pub mean_p_r: f64,
    pub mean_throughput: f64,
    /// 95% normal-approximation half-widths; absent for a single run.
    pub ci_half_p_r: Option<f64>,
    pub ci_half_throughput: Option<f64>,
}

/// Sample means and 95% half-widths (1.96·s/√R) over the reports.
pub fn empirical_stats(reports: &[ReceiverReport]) -> Result<EmpiricalStats> {
    if reports.is_empty() {
        return Err(Error::domain("need at least one report"));
    }
    let r = reports.len();
    let mean = |f: fn(&ReceiverReport) -> f64| reports.iter().map(f).sum::<f64>() / r as f64;
    let mean_p_r = mean(|x| x.p_r);
    let mean_t = mean(|x| x.throughput);
    let half = |vals: Vec<f64>, m: f64| {
        if r < 2 {
            return None;
        }
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (r - 1) as f64;
        Some(1.96 * (var / r as f64).sqrt())
    };
    Ok(EmpiricalStats {
        runs: r,
        mean_p_r,
        mean_throughput: mean_t,
        ci_half_p_r: half(reports.iter().map(|x| x.p_r).collect(), mean_p_r),
        ci_half_throughput: half(reports.iter().map(|x| x.throughput).collect(), mean_t),
    })
}

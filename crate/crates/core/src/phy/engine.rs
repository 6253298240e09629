//! Slot-level Monte-Carlo engine and capture-table estimation.
//!
//! Every trial derives its own ChaCha stream from (scenario seed, slot
//! degree, trial index) and draws, in fixed order: the active set, all
//! users' channels, the actives' info bits and a unit-variance noise
//! vector. The noise is scaled by σ afterwards, so trials with the same
//! seed but different SNR share every random quantity — capture tables at
//! different SNRs are exactly paired.

use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::capture::{CaptureTable, TableMeta, TableSource};
use crate::error::{Error, Result};
use crate::mac::SlotOracle;
use crate::seed::{self, tag};

use super::convcode::{encode_frame, viterbi_decode};
use super::gomp::{detect_gomp, GompDiagnostics};
use super::spreading::gen_spreading;
use super::system::SystemMatrix;
use super::{gen_channels, PhyScenario};

/// Result of one simulated slot.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    /// True number of active users.
    pub t_a: usize,
    /// Active users whose frames decoded without error.
    pub recovered: Vec<usize>,
    /// `|recovered|`.
    pub s: usize,
    pub diagnostics: GompDiagnostics,
}

fn draw_unit_noise(f_prime: usize, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
    (0..f_prime)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

fn random_info_bits(n: usize, rng: &mut ChaCha12Rng) -> Vec<u8> {
    (0..n).map(|_| rng.gen::<bool>() as u8).collect()
}

/// Simulate one slot with `t_a` active users drawn uniformly.
///
/// The spreading sequences are scenario-scoped (drawn once from the
/// scenario seed); channels, bits and noise come from `rng`.
pub fn run_slot(
    scenario: &PhyScenario,
    sequences: &[Vec<f64>],
    t_a: usize,
    rng: &mut ChaCha12Rng,
) -> Result<SlotOutcome> {
    if t_a == 0 || t_a > scenario.n_users {
        return Err(Error::domain(format!(
            "t_a must lie in 1..=n_users, got {t_a}"
        )));
    }
    let l = scenario.symbols_per_frame;
    let active: Vec<usize> = sample_indices(rng, scenario.n_users, t_a).into_vec();
    let channels = gen_channels(
        scenario.n_users,
        scenario.channel_taps,
        scenario.pdp_decay,
        rng,
    );
    let info: Vec<Vec<u8>> = (0..t_a)
        .map(|_| random_info_bits(scenario.info_bits(), rng))
        .collect();
    let noise = draw_unit_noise(scenario.received_chips(), rng);

    let system = SystemMatrix::build(sequences, &channels, l)?;
    let frames: Vec<Vec<f64>> = info
        .iter()
        .map(|bits| encode_frame(bits, l))
        .collect::<Result<_>>()?;
    let sigma = scenario.noise_variance().sqrt();
    let mut y: Vec<Complex64> = noise.iter().map(|&n| n * sigma).collect();
    let frame_refs: Vec<(usize, &[f64])> = active
        .iter()
        .zip(&frames)
        .map(|(&u, f)| (u, f.as_slice()))
        .collect();
    system.synthesize(&frame_refs, &mut y);

    let detection = detect_gomp(&y, &system, &scenario.detector, scenario.noise_variance());

    // Only true actives can be counted: an inactive user transmitted no
    // frame, so no decode of it can match anything.
    let mut recovered = Vec::new();
    for (slot_idx, &user) in active.iter().enumerate() {
        if let Some(det_idx) = detection.users.iter().position(|&u| u == user) {
            let soft: Vec<f64> = detection.symbols[det_idx].iter().map(|c| c.re).collect();
            let decoded = viterbi_decode(&soft)?;
            if decoded == info[slot_idx] {
                recovered.push(user);
            }
        }
    }
    recovered.sort_unstable();
    let s = recovered.len();
    Ok(SlotOutcome {
        t_a,
        recovered,
        s,
        diagnostics: detection.diagnostics,
    })
}

/// Empirical pmf of `s` over `t_sim` independent slot trials at degree
/// `t_a`: `p(s|t_a) ≈ #{s}/t_sim`. Deterministic for a given scenario seed
/// at any parallelism degree.
pub fn estimate_capture_row(scenario: &PhyScenario, t_a: usize, t_sim: u64) -> Result<Vec<f64>> {
    scenario.validate()?;
    if t_sim == 0 {
        return Err(Error::domain("t_sim must be >= 1"));
    }
    let sequences = scenario_sequences(scenario);
    let counts = (0..t_sim)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seed::rng(scenario.seed, &[tag::TRIAL, t_a as u64, trial]);
            run_slot(scenario, &sequences, t_a, &mut rng).map(|o| o.s)
        })
        .try_fold(
            || vec![0u64; t_a + 1],
            |mut acc, s| {
                s.map(|s| {
                    acc[s] += 1;
                    acc
                })
            },
        )
        .try_reduce(
            || vec![0u64; t_a + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / t_sim as f64)
        .collect())
}

/// Estimate the full table for `t_a = 1..=t_max`.
pub fn estimate_capture_table(
    scenario: &PhyScenario,
    t_max: usize,
    t_sim: u64,
) -> Result<CaptureTable> {
    if t_max == 0 {
        return Err(Error::domain("t_max must be >= 1"));
    }
    let rows: Vec<Vec<f64>> = (1..=t_max)
        .map(|t_a| estimate_capture_row(scenario, t_a, t_sim))
        .collect::<Result<_>>()?;
    CaptureTable::from_rows(
        rows,
        TableMeta {
            source: TableSource::MonteCarlo,
            snr_db: Some(scenario.snr_db),
            t_sim: Some(t_sim),
            seed: Some(scenario.seed),
            phy_hash: Some(scenario.phy_hash()),
        },
    )
}

/// Scenario-scoped spreading sequences (fixed PN identities per user).
pub(crate) fn scenario_sequences(scenario: &PhyScenario) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(scenario.seed, &[tag::SPREADING]);
    gen_spreading(scenario.n_users, scenario.spreading_factor, &mut rng)
}

/// Capture oracle that simulates each slot's actual waveform.
///
/// Channels, data frames and per-slot noise are drawn once per contention
/// period (channels are static across a period, replicas carry the same
/// packet). A query rebuilds the slot's residual signal from the currently
/// unrecovered users — cancelled users leave nothing behind (perfect IC) —
/// and runs the full detector + decoder chain on it.
pub struct PhyOracle {
    scenario: PhyScenario,
    system: SystemMatrix,
    frames: Vec<Vec<f64>>,
    info: Vec<Vec<u8>>,
    period_seed: u64,
    sigma: f64,
}

impl PhyOracle {
    /// Set up one contention period. `period_rng_seed` individualizes the
    /// period (channels, data, noise); the scenario seed fixes spreading.
    pub fn new(scenario: &PhyScenario, period_seed: u64) -> Result<Self> {
        scenario.validate()?;
        let sequences = scenario_sequences(scenario);
        let mut rng = seed::rng(period_seed, &[tag::PERIOD]);
        let channels = gen_channels(
            scenario.n_users,
            scenario.channel_taps,
            scenario.pdp_decay,
            &mut rng,
        );
        let info: Vec<Vec<u8>> = (0..scenario.n_users)
            .map(|_| random_info_bits(scenario.info_bits(), &mut rng))
            .collect();
        let frames: Vec<Vec<f64>> = info
            .iter()
            .map(|bits| encode_frame(bits, scenario.symbols_per_frame))
            .collect::<Result<_>>()?;
        let system = SystemMatrix::build(&sequences, &channels, scenario.symbols_per_frame)?;
        Ok(Self {
            scenario: scenario.clone(),
            system,
            frames,
            info,
            period_seed,
            sigma: scenario.noise_variance().sqrt(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.scenario.n_users
    }
}

impl SlotOracle for PhyOracle {
    fn query(&mut self, slot: usize, unrecovered: &[u32], _rng: &mut ChaCha12Rng) -> Vec<u32> {
        if unrecovered.is_empty() {
            return Vec::new();
        }
        // per-slot noise is a pure function of (period seed, slot): requeries
        // after cancellation see the same stored observation
        let mut noise_rng = seed::rng(self.period_seed, &[tag::PERIOD, slot as u64]);
        let noise = draw_unit_noise(self.scenario.received_chips(), &mut noise_rng);
        let mut y: Vec<Complex64> = noise.iter().map(|&n| n * self.sigma).collect();
        let frame_refs: Vec<(usize, &[f64])> = unrecovered
            .iter()
            .map(|&u| (u as usize, self.frames[u as usize].as_slice()))
            .collect();
        self.system.synthesize(&frame_refs, &mut y);
        let detection = detect_gomp(
            &y,
            &self.system,
            &self.scenario.detector,
            self.scenario.noise_variance(),
        );
        let mut recovered = Vec::new();
        for &u in unrecovered {
            if let Some(det_idx) = detection.users.iter().position(|&d| d == u as usize) {
                let soft: Vec<f64> = detection.symbols[det_idx].iter().map(|c| c.re).collect();
                match viterbi_decode(&soft) {
                    Ok(decoded) if decoded == self.info[u as usize] => recovered.push(u),
                    _ => {}
                }
            }
        }
        recovered
    }
}

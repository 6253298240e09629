//! Monte-Carlo physical layer: overloaded CDMA with joint activity-and-data
//! detection.
//!
//! Each slot carries the superposition of the active users' spread,
//! channel-convolved BPSK frames plus noise, `y = A·x + n`. The receiver
//! never knows which users are active; the group-pursuit detector
//! ([`gomp`]) exploits the block sparsity of `x` to recover activity and
//! symbols jointly, and a terminated rate-1/2 convolutional code
//! ([`convcode`]) decides frame success. Capture tables are estimated by
//! repeating independent slot simulations ([`engine`]).

mod channel;
mod convcode;
mod engine;
mod gomp;
mod spreading;
mod system;

pub use channel::{gen_channels, pdp_weights};
pub use convcode::{encode_frame, info_bits_per_frame, viterbi_decode, TAIL_BITS};
pub use engine::{
    estimate_capture_row, estimate_capture_table, run_slot, PhyOracle, SlotOutcome,
};
pub use gomp::{detect_gomp, Detection, GompDiagnostics};
pub use spreading::gen_spreading;
pub use system::SystemMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fnv1a64;

/// Group-pursuit detector knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GompSettings {
    /// Hard cap on selected user groups.
    pub max_groups: usize,
    /// Relative residual-energy stop: quit once `‖r‖² ≤ residual_stop·‖y‖²`.
    pub residual_stop: f64,
    /// Post-selection prune: a user is declared active only if its mean
    /// estimated symbol energy reaches this fraction of the nominal (unit)
    /// symbol energy.
    pub activity_threshold: f64,
}

impl Default for GompSettings {
    fn default() -> Self {
        Self {
            max_groups: 32,
            residual_stop: 0.05,
            activity_threshold: 0.1,
        }
    }
}

/// Full parameter set of one physical-layer scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyScenario {
    /// Total number of users N.
    pub n_users: usize,
    /// Chips per symbol N_s; kept below N so the system is overloaded.
    pub spreading_factor: usize,
    /// Transmitted (coded) BPSK symbols per frame L.
    pub symbols_per_frame: usize,
    /// Channel impulse-response length L_h.
    pub channel_taps: usize,
    /// Exponential power-delay-profile decay rate per tap.
    pub pdp_decay: f64,
    /// Code rate as (numerator, denominator); only 1/2 is supported.
    pub code_rate: (u32, u32),
    /// 1/σ²_n in dB.
    pub snr_db: f64,
    pub detector: GompSettings,
    /// Master seed; spreading sequences derive from it once per scenario,
    /// channels/bits/noise once per trial.
    pub seed: u64,
}

impl Default for PhyScenario {
    fn default() -> Self {
        Self {
            n_users: 128,
            spreading_factor: 32,
            symbols_per_frame: 8,
            channel_taps: 6,
            pdp_decay: 1.0,
            code_rate: (1, 2),
            snr_db: 10.0,
            detector: GompSettings::default(),
            seed: 0,
        }
    }
}

impl PhyScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::config("n_users must be >= 1"));
        }
        if self.spreading_factor == 0 {
            return Err(Error::config("spreading_factor must be >= 1"));
        }
        if self.spreading_factor >= self.n_users {
            return Err(Error::config(format!(
                "spreading_factor {} must be < n_users {} (overloaded system)",
                self.spreading_factor, self.n_users
            )));
        }
        if self.symbols_per_frame % 2 != 0 || self.symbols_per_frame < 6 {
            return Err(Error::config(
                "symbols_per_frame must be even and >= 6 (rate-1/2 code with 2 tail bits)",
            ));
        }
        if self.channel_taps == 0 {
            return Err(Error::config("channel_taps must be >= 1"));
        }
        if self.pdp_decay < 0.0 {
            return Err(Error::config("pdp_decay must be >= 0"));
        }
        if self.code_rate != (1, 2) {
            return Err(Error::config(format!(
                "unsupported code rate {}/{}; only 1/2 is implemented",
                self.code_rate.0, self.code_rate.1
            )));
        }
        let d = &self.detector;
        if d.max_groups == 0 || d.max_groups > self.n_users {
            return Err(Error::config("max_groups must lie in 1..=n_users"));
        }
        if !(d.residual_stop > 0.0 && d.residual_stop <= 1.0) {
            return Err(Error::config("residual_stop must lie in (0, 1]"));
        }
        if !(d.activity_threshold > 0.0 && d.activity_threshold <= 1.0) {
            return Err(Error::config("activity_threshold must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Chips per frame after spreading, F = L·N_s.
    pub fn chips_per_frame(&self) -> usize {
        self.symbols_per_frame * self.spreading_factor
    }

    /// Received chips per slot, F' = F + L_h − 1.
    pub fn received_chips(&self) -> usize {
        self.chips_per_frame() + self.channel_taps - 1
    }

    /// Complex noise variance per received chip, σ²_n = 10^(−snr_db/10).
    /// A single active user's receive energy per symbol averages 1 (unit
    /// spreading norm, unit mean channel power), so 1/σ²_n is its mean
    /// post-despreading SNR per symbol.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    /// Information bits carried per frame.
    pub fn info_bits(&self) -> usize {
        info_bits_per_frame(self.symbols_per_frame)
    }

    /// Stable fingerprint of the physical setup (everything except the
    /// seed, which provenance records separately).
    pub fn phy_hash(&self) -> String {
        let canonical = format!(
            "n={};ns={};l={};lh={};decay={:.12e};rate={}/{};snr={:.12e};mg={};rs={:.12e};at={:.12e}",
            self.n_users,
            self.spreading_factor,
            self.symbols_per_frame,
            self.channel_taps,
            self.pdp_decay,
            self.code_rate.0,
            self.code_rate.1,
            self.snr_db,
            self.detector.max_groups,
            self.detector.residual_stop,
            self.detector.activity_threshold,
        );
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid_paper_setup() {
        let s = PhyScenario::default();
        s.validate().unwrap();
        assert_eq!(s.chips_per_frame(), 256);
        assert_eq!(s.received_chips(), 261);
        assert_eq!(s.info_bits(), 2);
        assert!((s.noise_variance() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut s = PhyScenario::default();
        s.spreading_factor = 128;
        assert!(s.validate().is_err()); // not overloaded

        let mut s = PhyScenario::default();
        s.symbols_per_frame = 7;
        assert!(s.validate().is_err());

        let mut s = PhyScenario::default();
        s.symbols_per_frame = 4;
        assert!(s.validate().is_err()); // no room for info bits

        let mut s = PhyScenario::default();
        s.code_rate = (1, 3);
        assert!(s.validate().is_err());

        let mut s = PhyScenario::default();
        s.detector.residual_stop = 0.0;
        assert!(s.validate().is_err());

        let mut s = PhyScenario::default();
        s.detector.max_groups = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn phy_hash_ignores_seed_but_tracks_parameters() {
        let a = PhyScenario::default();
        let mut b = PhyScenario::default();
        b.seed = 999;
        assert_eq!(a.phy_hash(), b.phy_hash());
        b.snr_db = 5.0;
        assert_ne!(a.phy_hash(), b.phy_hash());
    }
}

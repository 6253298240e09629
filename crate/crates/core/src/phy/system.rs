//! The slot observation model `y = A·x + n`.
//!
//! Column (user i, symbol m) of `A` is user i's spreading sequence placed
//! at chip offset m·N_s, convolved with the user's channel and zero-padded
//! to F' chips. The sequence and channel are the same for every symbol of
//! a user, so one convolution window per user describes the whole column
//! group; columns only differ by their offset.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SystemMatrix {
    n_users: usize,
    l_symbols: usize,
    n_s: usize,
    f_prime: usize,
    /// Per-user convolution window `conv(sequence, channel)`, length
    /// N_s + L_h − 1.
    windows: Vec<Vec<Complex64>>,
}

impl SystemMatrix {
    /// Build from per-user spreading sequences and channel tap vectors.
    pub fn build(
        sequences: &[Vec<f64>],
        channels: &[Vec<Complex64>],
        l_symbols: usize,
    ) -> Result<Self> {
        if sequences.is_empty() || sequences.len() != channels.len() {
            return Err(Error::domain(
                "need one spreading sequence and one channel per user",
            ));
        }
        if l_symbols == 0 {
            return Err(Error::domain("l_symbols must be >= 1"));
        }
        let n_s = sequences[0].len();
        let l_h = channels[0].len();
        if n_s == 0 || l_h == 0 {
            return Err(Error::domain("empty spreading sequence or channel"));
        }
        if sequences.iter().any(|s| s.len() != n_s)
            || channels.iter().any(|h| h.len() != l_h)
        {
            return Err(Error::domain("inconsistent sequence or channel lengths"));
        }
        let window_len = n_s + l_h - 1;
        let windows = sequences
            .iter()
            .zip(channels)
            .map(|(seq, h)| {
                let mut w = vec![Complex64::new(0.0, 0.0); window_len];
                for (j, &c) in seq.iter().enumerate() {
                    for (k, &tap) in h.iter().enumerate() {
                        w[j + k] += tap * c;
                    }
                }
                w
            })
            .collect();
        Ok(Self {
            n_users: sequences.len(),
            l_symbols,
            n_s,
            f_prime: l_symbols * n_s + l_h - 1,
            windows,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn l_symbols(&self) -> usize {
        self.l_symbols
    }

    pub fn f_prime(&self) -> usize {
        self.f_prime
    }

    /// Squared norm of any column of the user's group (all symbols share
    /// the window).
    pub fn column_energy(&self, user: usize) -> f64 {
        self.windows[user].iter().map(|c| c.norm_sqr()).sum()
    }

    /// Inner product `⟨a_{user,symbol}, v⟩ = Σ conj(a)·v`.
    pub fn correlate_column(&self, user: usize, symbol: usize, v: &[Complex64]) -> Complex64 {
        debug_assert_eq!(v.len(), self.f_prime);
        let off = symbol * self.n_s;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &w) in self.windows[user].iter().enumerate() {
            acc += w.conj() * v[off + k];
        }
        acc
    }

    /// `target += scale · a_{user,symbol}`.
    pub fn add_scaled_column(
        &self,
        user: usize,
        symbol: usize,
        scale: Complex64,
        target: &mut [Complex64],
    ) {
        debug_assert_eq!(target.len(), self.f_prime);
        let off = symbol * self.n_s;
        for (k, &w) in self.windows[user].iter().enumerate() {
            target[off + k] += scale * w;
        }
    }

    /// Materialize one column (tests and small-system checks).
    pub fn dense_column(&self, user: usize, symbol: usize) -> Vec<Complex64> {
        let mut col = vec![Complex64::new(0.0, 0.0); self.f_prime];
        self.add_scaled_column(user, symbol, Complex64::new(1.0, 0.0), &mut col);
        col
    }

    /// Superpose users' BPSK frames into `target`: `target += Σ_i A_i x_i`.
    pub fn synthesize(&self, frames: &[(usize, &[f64])], target: &mut [Complex64]) {
        for &(user, symbols) in frames {
            debug_assert_eq!(symbols.len(), self.l_symbols);
            for (m, &x) in symbols.iter().enumerate() {
                if x != 0.0 {
                    self.add_scaled_column(user, m, Complex64::new(x, 0.0), target);
                }
            }
        }
    }
}

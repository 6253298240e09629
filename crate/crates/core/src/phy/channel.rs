//! Rayleigh multipath channels with exponential power delay profile.

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Per-tap mean powers `e^{-k·decay}` normalized to total power 1.
pub fn pdp_weights(l_h: usize, decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..l_h).map(|k| (-(k as f64) * decay).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// Draw i.i.d. user channels: tap k is circular complex Gaussian with
/// variance `pdp_weights[k]`, so each user's expected total power is 1.
pub fn gen_channels(
    n_users: usize,
    l_h: usize,
    decay: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<Vec<Complex64>> {
    let weights = pdp_weights(l_h, decay);
    let scales: Vec<f64> = weights.iter().map(|w| (w / 2.0).sqrt()).collect();
    (0..n_users)
        .map(|_| {
            scales
                .iter()
                .map(|&s| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re * s, im * s)
                })
                .collect()
        })
        .collect()
}

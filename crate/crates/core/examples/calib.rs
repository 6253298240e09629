use aloha_csmud::phy::*;
use aloha_csmud::seed::{self, tag};
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let t_sim = 600u64;
    for snr in [10.0, 5.0] {
        let scenario = PhyScenario {
            snr_db: snr,
            seed: 1,
            ..Default::default()
        };
        let sequences = {
            let mut rng = seed::rng(scenario.seed, &[tag::SPREADING]);
            gen_spreading(scenario.n_users, scenario.spreading_factor, &mut rng)
        };
        let l = scenario.symbols_per_frame;
        let sigma = scenario.noise_variance().sqrt();

        let (mut ok, mut miss_select, mut decode_err) = (0u64, 0u64, 0u64);
        let mut fade_when_missed = Vec::new();
        for trial in 0..t_sim {
            let mut rng = seed::rng(scenario.seed, &[tag::TRIAL, 1, trial]);
            let active: Vec<usize> = sample_indices(&mut rng, scenario.n_users, 1).into_vec();
            let channels = gen_channels(
                scenario.n_users,
                scenario.channel_taps,
                scenario.pdp_decay,
                &mut rng,
            );
            let info: Vec<u8> = (0..scenario.info_bits()).map(|_| rng.gen::<bool>() as u8).collect();
            let noise: Vec<Complex64> = (0..scenario.received_chips())
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect();
            let user = active[0];
            let system = SystemMatrix::build(&sequences, &channels, l).unwrap();
            let frame = encode_frame(&info, l).unwrap();
            let mut y: Vec<Complex64> = noise.iter().map(|&n| n * sigma).collect();
            system.synthesize(&[(user, frame.as_slice())], &mut y);
            let det = detect_gomp(&y, &system, &scenario.detector, scenario.noise_variance());
            let h2: f64 = channels[user].iter().map(|c| c.norm_sqr()).sum();
            match det.users.iter().position(|&u| u == user) {
                None => {
                    miss_select += 1;
                    fade_when_missed.push(h2);
                    if miss_select <= 6 {
                        println!(
                            "  miss trial={trial}: h2={h2:.3} sel={} stop={:?} resid={:.3} ytot={:.3}",
                            det.diagnostics.selected_groups,
                            det.diagnostics.stop,
                            det.diagnostics.final_residual_energy,
                            y.iter().map(|c| c.norm_sqr()).sum::<f64>()
                        );
                    }
                }
                Some(idx) => {
                    let soft: Vec<f64> = det.symbols[idx].iter().map(|c| c.re).collect();
                    if viterbi_decode(&soft).unwrap() == info {
                        ok += 1;
                    } else {
                        decode_err += 1;
                    }
                }
            }
        }
        fade_when_missed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = fade_when_missed.get(fade_when_missed.len() / 2).copied().unwrap_or(0.0);
        let max = fade_when_missed.last().copied().unwrap_or(0.0);
        println!(
            "snr={snr}: p(1|1)={:.3}  miss={:.3} decode_err={:.3}  missed-fade median={:.3} max={:.3}",
            ok as f64 / t_sim as f64,
            miss_select as f64 / t_sim as f64,
            decode_err as f64 / t_sim as f64,
            med,
            max
        );
    }
}

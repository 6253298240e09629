//! Terminated rate-1/2 convolutional code with soft-decision Viterbi
//! decoding.
//!
//! Constraint length 3, generators (7, 5) octal, zero-terminated. A frame
//! of `L` BPSK symbols carries `L/2` encoder inputs of which the last two
//! flush the register, leaving `L/2 - 2` information bits.

use crate::error::{Error, Result};

/// Zero-termination bits appended to every frame (constraint length − 1).
pub const TAIL_BITS: usize = 2;

const NUM_STATES: usize = 4;

/// Information bits carried by a frame of `l_symbols` coded BPSK symbols.
pub fn info_bits_per_frame(l_symbols: usize) -> usize {
    (l_symbols / 2).saturating_sub(TAIL_BITS)
}

/// One encoder step: state holds the previous two inputs (d1 most recent).
/// G1 = 7 = 111: out1 = b ⊕ d1 ⊕ d2; G2 = 5 = 101: out2 = b ⊕ d2.
#[inline]
fn encode_step(state: usize, b: u8) -> (usize, u8, u8) {
    let d1 = (state >> 1) as u8;
    let d2 = (state & 1) as u8;
    let out1 = b ^ d1 ^ d2;
    let out2 = b ^ d2;
    let next = ((b as usize) << 1) | d1 as usize;
    (next, out1, out2)
}

/// Encode `info` bits into a frame of `l_symbols` BPSK symbols {0→+1, 1→−1}.
pub fn encode_frame(info: &[u8], l_symbols: usize) -> Result<Vec<f64>> {
    let expected = info_bits_per_frame(l_symbols);
    if l_symbols % 2 != 0 || expected == 0 {
        return Err(Error::domain(format!(
            "frame of {l_symbols} symbols cannot carry a terminated rate-1/2 codeword"
        )));
    }
    if info.len() != expected {
        return Err(Error::domain(format!(
            "expected {expected} info bits for {l_symbols} symbols, got {}",
            info.len()
        )));
    }
    if info.iter().any(|&b| b > 1) {
        return Err(Error::domain("info bits must be 0 or 1"));
    }
    let mut symbols = Vec::with_capacity(l_symbols);
    let mut state = 0usize;
    for &b in info.iter().chain(std::iter::repeat(&0u8).take(TAIL_BITS)) {
        let (next, o1, o2) = encode_step(state, b);
        symbols.push(1.0 - 2.0 * o1 as f64);
        symbols.push(1.0 - 2.0 * o2 as f64);
        state = next;
    }
    debug_assert_eq!(state, 0, "zero termination must flush the register");
    Ok(symbols)
}

/// Soft-decision Viterbi decoding of a terminated frame.
///
/// `soft` holds one value per coded symbol, positive favouring bit 0
/// (BPSK +1). Path metrics are correlations, maximized over the trellis
/// that starts and ends in state 0, with the final [`TAIL_BITS`] inputs
/// pinned to 0. Returns the information bits.
pub fn viterbi_decode(soft: &[f64]) -> Result<Vec<u8>> {
    if soft.len() % 2 != 0 || soft.len() < 2 * (TAIL_BITS + 1) {
        return Err(Error::domain(format!(
            "soft input length {} is not a terminated rate-1/2 frame",
            soft.len()
        )));
    }
    let steps = soft.len() / 2;
    let n_info = steps - TAIL_BITS;

    const NEG: f64 = f64::NEG_INFINITY;
    let mut metric = [NEG; NUM_STATES];
    metric[0] = 0.0;
    // survivor input bit per (step, state)
    let mut survivor = vec![[0u8; NUM_STATES]; steps];
    let mut prev_state = vec![[0usize; NUM_STATES]; steps];

    for step in 0..steps {
        let tail = step >= n_info;
        let mut next_metric = [NEG; NUM_STATES];
        let mut next_survivor = [0u8; NUM_STATES];
        let mut next_prev = [0usize; NUM_STATES];
        for state in 0..NUM_STATES {
            if metric[state] == NEG {
                continue;
            }
            for b in 0..=if tail { 0u8 } else { 1u8 } {
                let (next, o1, o2) = encode_step(state, b);
                let m = metric[state]
                    + soft[2 * step] * (1.0 - 2.0 * o1 as f64)
                    + soft[2 * step + 1] * (1.0 - 2.0 * o2 as f64);
                if m > next_metric[next] {
                    next_metric[next] = m;
                    next_survivor[next] = b;
                    next_prev[next] = state;
                }
            }
        }
        metric = next_metric;
        survivor[step] = next_survivor;
        prev_state[step] = next_prev;
    }

    // traceback from the terminated state
    let mut state = 0usize;
    let mut bits = vec![0u8; steps];
    for step in (0..steps).rev() {
        bits[step] = survivor[step][state];
        state = prev_state[step][state];
    }
    bits.truncate(n_info);
    Ok(bits)
}

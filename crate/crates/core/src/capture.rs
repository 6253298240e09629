//! Capture-probability tables and the recovery-chain capture vector.
//!
//! A `CaptureTable` holds `p(s|t_A)`: the probability that one detector
//! pass over a slot with `t_A` active users recovers exactly `s` of them.
//! All colliding transmissions are statistically equivalent, so the
//! probability that a specific ("referent") user is among the `s` recovered
//! is `c(s|t_A) = (s/t_A)·p(s|t_A)`; the remainder `u = p - c` covers
//! recoveries that miss the referent but still shrink the slot for the
//! next intra-slot cancellation round. `chain_capture` accumulates all
//! such rounds into `C(t)`, the probability that the referent user is
//! eventually recovered from a slot where it faces `t` interferers.

use crate::error::{Error, Result};

/// Row-sum slack accepted when validating tables (Monte-Carlo rows are
/// counts/T_sim and sum to 1 up to rounding).
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Where a capture table came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableSource {
    MonteCarlo,
    SyntheticCollision,
    SyntheticPerfect,
    SyntheticSingleton,
    File,
}

impl TableSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            TableSource::MonteCarlo => "monte-carlo",
            TableSource::SyntheticCollision => "synthetic-collision",
            TableSource::SyntheticPerfect => "synthetic-perfect",
            TableSource::SyntheticSingleton => "synthetic-singleton",
            TableSource::File => "file",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "monte-carlo" => TableSource::MonteCarlo,
            "synthetic-collision" => TableSource::SyntheticCollision,
            "synthetic-perfect" => TableSource::SyntheticPerfect,
            "synthetic-singleton" => TableSource::SyntheticSingleton,
            "file" => TableSource::File,
            _ => return None,
        })
    }
}

/// Provenance of a capture table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    pub source: TableSource,
    pub snr_db: Option<f64>,
    pub t_sim: Option<u64>,
    pub seed: Option<u64>,
    pub phy_hash: Option<String>,
}

impl TableMeta {
    pub fn synthetic(source: TableSource) -> Self {
        Self {
            source,
            snr_db: None,
            t_sim: None,
            seed: None,
            phy_hash: None,
        }
    }
}

/// Lower-triangular matrix of capture probabilities `p(s|t_A)` for
/// `1 ≤ t_A ≤ t_max`, `0 ≤ s ≤ t_A`, with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureTable {
    /// rows[i] is the row for t_A = i+1 and has length i+2 (s = 0..=t_A).
    rows: Vec<Vec<f64>>,
    meta: TableMeta,
}

impl CaptureTable {
    /// Validating constructor. Row `i` must cover `s = 0..=i+1` and sum to
    /// 1 within [`ROW_SUM_TOL`].
    pub fn from_rows(rows: Vec<Vec<f64>>, meta: TableMeta) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("capture table needs at least one row"));
        }
        for (i, row) in rows.iter().enumerate() {
            let t_a = i + 1;
            if row.len() != t_a + 1 {
                return Err(Error::domain(format!(
                    "row t_A={t_a} has {} entries, expected {}",
                    row.len(),
                    t_a + 1
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::domain(format!(
                    "row t_A={t_a} has probabilities outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::domain(format!(
                    "row t_A={t_a} sums to {sum}, violates |sum-1| <= {ROW_SUM_TOL}"
                )));
            }
        }
        Ok(Self { rows, meta })
    }

    pub fn t_max(&self) -> usize {
        self.rows.len()
    }

    /// `p(s|t_A)`; panics on out-of-range indices.
    pub fn prob(&self, s: usize, t_a: usize) -> f64 {
        assert!(t_a >= 1 && t_a <= self.t_max(), "t_A out of range");
        assert!(s <= t_a, "s out of range");
        self.rows[t_a - 1][s]
    }

    /// Full row `s = 0..=t_A`.
    pub fn row(&self, t_a: usize) -> &[f64] {
        assert!(t_a >= 1 && t_a <= self.t_max());
        &self.rows[t_a - 1]
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: TableMeta) {
        self.meta = meta;
    }
}

/// The referent/non-referent split of a capture table: `c(s|t_A)` is the
/// part of `p(s|t_A)` where the referent user is among the `s` recovered,
/// `u(s|t_A)` the part where it is not. Indexed `[t_A-1][s-1]` for s ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSplit {
    pub c: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl CaptureSplit {
    pub fn c_prob(&self, s: usize, t_a: usize) -> f64 {
        self.c[t_a - 1][s - 1]
    }

    pub fn u_prob(&self, s: usize, t_a: usize) -> f64 {
        self.u[t_a - 1][s - 1]
    }
}

/// Referent split: `c(s|t_A) = C(t_A-1, s-1)/C(t_A, s) · p(s|t_A)`, which
/// reduces to `(s/t_A)·p(s|t_A)`; `u = p - c` entrywise.
pub fn split(table: &CaptureTable) -> CaptureSplit {
    let t_max = table.t_max();
    let mut c = Vec::with_capacity(t_max);
    let mut u = Vec::with_capacity(t_max);
    for t_a in 1..=t_max {
        let mut c_row = Vec::with_capacity(t_a);
        let mut u_row = Vec::with_capacity(t_a);
        for s in 1..=t_a {
            let p = table.prob(s, t_a);
            let cs = (s as f64 / t_a as f64) * p;
            c_row.push(cs);
            u_row.push(p - cs);
        }
        c.push(c_row);
        u.push(u_row);
    }
    CaptureSplit { c, u }
}

/// Per-interferer-count capture probabilities `C(t)`, `t = 0..t_max-1`.
/// Beyond the represented range `C(t)` is taken as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureVector {
    values: Vec<f64>,
}

impl CaptureVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("capture vector must be non-empty"));
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::domain("capture probabilities must lie in [0, 1]"));
        }
        Ok(Self { values })
    }

    /// C ≡ value over `t = 0..t_max-1` (value 1.0 = perfect detector).
    pub fn constant(value: f64, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::domain("t_max must be >= 1"));
        }
        Self::from_values(vec![value; t_max])
    }

    pub fn t_max(&self) -> usize {
        self.values.len()
    }

    /// `C(t)`, zero beyond the represented range.
    pub fn value(&self, t: usize) -> f64 {
        self.values.get(t).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Capture probability `C(t)` via the recovery-chain dynamic program.
///
/// Let `R(m)` be the probability that the referent user is eventually
/// recovered from a slot currently holding `m` active users. Each detector
/// pass either recovers a batch containing the referent (`c`), or recovers
/// a referent-free batch of size `s` and leaves a residual slot of `m - s`
/// users for the next round (`u`):
///
/// ```text
/// R(0) = 0,   R(m) = Σ_{s=1..m} [ c(s|m) + u(s|m)·R(m-s) ]
/// ```
///
/// `C(t) = R(t+1)`. Expanding the recursion reproduces exactly the sum over
/// all chains (s_1, ..., s_q) with s_i ≥ 1, Σ s_i ≤ t_A, ending in a
/// referent capture; the brute-force enumeration lives in the tests.
pub fn chain_capture(table: &CaptureTable) -> CaptureVector {
    let t_max = table.t_max();
    let sp = split(table);
    let mut r = vec![0.0_f64; t_max + 1];
    for m in 1..=t_max {
        let mut acc = 0.0;
        for s in 1..=m {
            acc += sp.c_prob(s, m) + sp.u_prob(s, m) * r[m - s];
        }
        r[m] = acc;
    }
    CaptureVector {
        values: (0..t_max).map(|t| r[t + 1]).collect(),
    }
}

/// Synthetic table kinds for tests, validation and oracle plumbing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// Only singleton slots decodable: p(1|1) = 1, multi-user rows all on s=0.
    Collision,
    /// Every pass recovers everyone: p(t_A|t_A) = 1.
    PerfectMud,
    /// Collision channel with imperfect singleton decoding p(1|1) = p1.
    SingletonProb(f64),
}

/// Build a synthetic capture table of the given kind with `t_max` rows.
pub fn synthetic_table(kind: SyntheticKind, t_max: usize) -> Result<CaptureTable> {
    if t_max < 1 {
        return Err(Error::domain("t_max must be >= 1"));
    }
    let p1 = match kind {
        SyntheticKind::Collision => 1.0,
        SyntheticKind::PerfectMud => 1.0,
        SyntheticKind::SingletonProb(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("p1 must lie in [0, 1], got {p}")));
            }
            p
        }
    };
    let mut rows = Vec::with_capacity(t_max);
    for t_a in 1..=t_max {
        let mut row = vec![0.0; t_a + 1];
        match kind {
            SyntheticKind::PerfectMud => row[t_a] = 1.0,
            SyntheticKind::Collision | SyntheticKind::SingletonProb(_) => {
                if t_a == 1 {
                    row[1] = p1;
                    row[0] = 1.0 - p1;
                } else {
                    row[0] = 1.0;
                }
            }
        }
        rows.push(row);
    }
    let source = match kind {
        SyntheticKind::Collision => TableSource::SyntheticCollision,
        SyntheticKind::PerfectMud => TableSource::SyntheticPerfect,
        SyntheticKind::SingletonProb(_) => TableSource::SyntheticSingleton,
    };
    CaptureTable::from_rows(rows, TableMeta::synthetic(source))
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn split_examples() {
        // p(1|1) = 0.85: with a single active user the referent is the only
        // candidate, so all of it is referent capture.
        let t = synthetic_table(SyntheticKind::SingletonProb(0.85), 1).unwrap();
        let sp = split(&t);
        assert_eq!(sp.c_prob(1, 1), 0.85);
        assert_eq!(sp.u_prob(1, 1), 0.0);

        // p(2|4) = 0.6 splits as s/t_A = 1/2
        let rows = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.4, 0.0, 0.6, 0.0, 0.0],
        ];
        let t = CaptureTable::from_rows(rows, TableMeta::synthetic(TableSource::File)).unwrap();
        let sp = split(&t);
        assert_eq!(sp.c_prob(2, 4), 0.3);
        assert_eq!(sp.u_prob(2, 4), 0.3);

        // p(3|3) = 1: everyone recovered includes the referent
        let t = synthetic_table(SyntheticKind::PerfectMud, 3).unwrap();
        let sp = split(&t);
        assert_eq!(sp.c_prob(3, 3), 1.0);
        assert_eq!(sp.u_prob(3, 3), 0.0);
    }

    #[test]
    fn split_identities_on_random_tables() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let t = random_table(&mut rng, 8);
            let sp = split(&t);
            for t_a in 1..=8 {
                for s in 1..=t_a {
                    let p = t.prob(s, t_a);
                    let c = sp.c_prob(s, t_a);
                    let u = sp.u_prob(s, t_a);
                    assert!((c + u - p).abs() <= 2.0 * f64::EPSILON * p.max(1.0));
                    assert!(c >= 0.0 && c <= p + f64::EPSILON);
                    let expected_c = (s as f64 / t_a as f64) * p;
                    assert_eq!(c, expected_c);
                }
            }
        }
    }

    #[test]
    fn chain_capture_perfect_mud_is_one() {
        let t = synthetic_table(SyntheticKind::PerfectMud, 6).unwrap();
        let c = chain_capture(&t);
        for t_i in 0..6 {
            assert_eq!(c.value(t_i), 1.0);
        }
    }

    #[test]
    fn chain_capture_collision_channel() {
        let t = synthetic_table(SyntheticKind::Collision, 5).unwrap();
        let c = chain_capture(&t);
        assert_eq!(c.value(0), 1.0);
        for t_i in 1..5 {
            assert_eq!(c.value(t_i), 0.0);
        }
    }

    #[test]
    fn chain_capture_matches_bruteforce() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..100 {
            let t = random_table(&mut rng, 6);
            let dp = chain_capture(&t);
            for t_a in 1..=6 {
                let exact = chain_capture_bruteforce(&t, t_a);
                assert!(
                    (dp.value(t_a - 1) - exact).abs() < 1e-12,
                    "t_A={t_a}: dp={} brute={}",
                    dp.value(t_a - 1),
                    exact
                );
            }
        }
    }

    #[test]
    fn chain_capture_c0_equals_p11_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = random_table(&mut rng, 4);
            let c = chain_capture(&t);
            assert_eq!(c.value(0), t.prob(1, 1));
        }
    }

    #[test]
    fn chain_capture_monotone_in_table_mass() {
        // moving mass from s=0 to any s >= 1 never decreases any C(t)
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..50 {
            let t = random_table(&mut rng, 6);
            let base = chain_capture(&t);
            let t_a = 1 + (rng.gen::<usize>() % 6);
            let s = 1 + (rng.gen::<usize>() % t_a);
            let mut rows: Vec<Vec<f64>> = (1..=6).map(|ta| t.row(ta).to_vec()).collect();
            let delta = rows[t_a - 1][0] * rng.gen::<f64>();
            rows[t_a - 1][0] -= delta;
            rows[t_a - 1][s] += delta;
            let perturbed =
                CaptureTable::from_rows(rows, TableMeta::synthetic(TableSource::File)).unwrap();
            let bumped = chain_capture(&perturbed);
            for ti in 0..6 {
                assert!(
                    bumped.value(ti) >= base.value(ti) - 1e-15,
                    "C({ti}) decreased after moving mass up"
                );
            }
        }
    }

    #[test]
    fn synthetic_table_shapes() {
        let t = synthetic_table(SyntheticKind::Collision, 3).unwrap();
        assert_eq!(t.row(1), &[0.0, 1.0]);
        assert_eq!(t.row(2), &[1.0, 0.0, 0.0]);
        assert_eq!(t.row(3), &[1.0, 0.0, 0.0, 0.0]);

        let t = synthetic_table(SyntheticKind::PerfectMud, 2).unwrap();
        assert_eq!(t.row(1), &[0.0, 1.0]);
        assert_eq!(t.row(2), &[0.0, 0.0, 1.0]);

        let t = synthetic_table(SyntheticKind::SingletonProb(0.85), 1).unwrap();
        assert_eq!(t.row(1), &[0.15000000000000002, 0.85]);
        assert!((t.row(1)[0] + t.row(1)[1] - 1.0).abs() < 1e-15);

        assert!(synthetic_table(SyntheticKind::SingletonProb(1.5), 1).is_err());
        assert!(synthetic_table(SyntheticKind::Collision, 0).is_err());
    }

    #[test]
    fn from_rows_validation() {
        // wrong row length
        let bad = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        assert!(CaptureTable::from_rows(bad, TableMeta::synthetic(TableSource::File)).is_err());
        // row sum violation
        let bad = vec![vec![0.5, 0.6]];
        assert!(CaptureTable::from_rows(bad, TableMeta::synthetic(TableSource::File)).is_err());
        // out-of-range entry
        let bad = vec![vec![-0.1, 1.1]];
        assert!(CaptureTable::from_rows(bad, TableMeta::synthetic(TableSource::File)).is_err());
    }
}

//! Code specifications: frozen positions and dynamic freezing constraints.
//!
//! A [`CodeSpec`] stores the constraint matrix `V` in sparse form. Row `j`
//! ends in its pivot column `i_j` and says `u_{i_j} = Σ_{s ∈ cols} u_s`.
//! A row without columns is a static frozen symbol (always 0).
//!
//! Text format:
//!
//! ```text
//! polar-subcode v1 m=3 k=4
//! 0:
//! 1:
//! 2:
//! 4:
//! ```
//!
//! one line per row, `pivot:` followed by the ascending earlier columns.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{frame_rng, AwgnChannel};
use crate::decoders::GenieSc;
use crate::gf2::{self, BitMatrix, Gf2Error};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("dimension k={k} out of range for n={n}")]
    DimensionOutOfRange { n: usize, k: usize },
    #[error("invalid constraint row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("reliability order has length {got}, expected {expected}")]
    ReliabilityLength { got: usize, expected: usize },
    #[error("cannot add {requested} checks to a code of dimension {k}")]
    TooManyChecks { requested: usize, k: usize },
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the constraint matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstraintRow {
    pub pivot: usize,
    /// Earlier columns `s < pivot` with `V_{js} = 1`, ascending.
    pub cols: Vec<usize>,
}

impl ConstraintRow {
    pub fn frozen(pivot: usize) -> Self {
        Self { pivot, cols: Vec::new() }
    }

    pub fn is_dynamic(&self) -> bool {
        !self.cols.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    m: usize,
    k: usize,
    rows: Vec<ConstraintRow>,
    row_index: Vec<Option<u32>>,
    dynamic_slot: Vec<Option<u32>>,
    column_slots: Vec<Vec<u32>>,
    num_dynamic: usize,
}

impl CodeSpec {
    /// Validates the rows: pivots strictly increasing and below `n`, columns
    /// strictly increasing and below their pivot.
    pub fn new(m: usize, rows: Vec<ConstraintRow>) -> Result<Self, ConstructionError> {
        let n = 1usize << m;
        if rows.len() > n {
            return Err(ConstructionError::DimensionOutOfRange { n, k: 0 });
        }
        let mut prev_pivot = None;
        for (j, row) in rows.iter().enumerate() {
            let bad = |reason: String| ConstructionError::InvalidRow { row: j, reason };
            if row.pivot >= n {
                return Err(bad(format!("pivot {} >= n = {n}", row.pivot)));
            }
            if prev_pivot.is_some_and(|p| p >= row.pivot) {
                return Err(bad(format!("pivot {} not increasing", row.pivot)));
            }
            prev_pivot = Some(row.pivot);
            if row.cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("columns not strictly increasing".into()));
            }
            if row.cols.last().is_some_and(|&c| c >= row.pivot) {
                return Err(bad("column not before pivot".into()));
            }
        }

        let mut row_index = vec![None; n];
        let mut dynamic_slot = vec![None; rows.len()];
        let mut column_slots = vec![Vec::new(); n];
        let mut num_dynamic = 0u32;
        for (j, row) in rows.iter().enumerate() {
            row_index[row.pivot] = Some(j as u32);
            if row.is_dynamic() {
                dynamic_slot[j] = Some(num_dynamic);
                for &c in &row.cols {
                    column_slots[c].push(num_dynamic);
                }
                num_dynamic += 1;
            }
        }
        Ok(Self {
            m,
            k: n - rows.len(),
            rows,
            row_index,
            dynamic_slot,
            column_slots,
            num_dynamic: num_dynamic as usize,
        })
    }

    /// Builds a spec from a normalized constraint matrix (rows with distinct,
    /// ascending last-nonzero columns).
    pub fn from_constraint_matrix(m: usize, v: &BitMatrix) -> Result<Self, ConstructionError> {
        let n = 1usize << m;
        assert_eq!(v.cols(), n);
        let rows = (0..v.rows())
            .map(|j| {
                let pivot = v.last_nonzero(j).ok_or_else(|| ConstructionError::InvalidRow {
                    row: j,
                    reason: "zero row".into(),
                })?;
                let cols = (0..pivot).filter(|&c| v.get(j, c)).collect();
                Ok(ConstraintRow { pivot, cols })
            })
            .collect::<Result<Vec<_>, ConstructionError>>()?;
        Self::new(m, rows)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        1 << self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    /// Constraint row whose pivot is `phase`, if the symbol is frozen.
    #[inline]
    pub fn row_at(&self, phase: usize) -> Option<&ConstraintRow> {
        self.row_index[phase].map(|j| &self.rows[j as usize])
    }

    #[inline]
    pub fn is_frozen(&self, phase: usize) -> bool {
        self.row_index[phase].is_some()
    }

    /// Bit position of the dynamic row pivoting at `phase` in a path's
    /// dynamic-frozen bitmask; `None` for static frozen and unfrozen phases.
    #[inline]
    pub fn dynamic_slot_at(&self, phase: usize) -> Option<usize> {
        self.row_index[phase].and_then(|j| self.dynamic_slot[j as usize].map(|s| s as usize))
    }

    /// Bitmask positions of the dynamic rows that list column `phase`.
    #[inline]
    pub fn rows_listing(&self, phase: usize) -> &[u32] {
        &self.column_slots[phase]
    }

    pub fn num_dynamic(&self) -> usize {
        self.num_dynamic
    }

    /// Dense `(n-k) × n` constraint matrix.
    pub fn constraint_matrix(&self) -> BitMatrix {
        let mut v = BitMatrix::zeros(self.rows.len(), self.n());
        for (j, row) in self.rows.iter().enumerate() {
            v.set(j, row.pivot, true);
            for &c in &row.cols {
                v.set(j, c, true);
            }
        }
        v
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("polar-subcode v1 m={} k={}\n", self.m, self.k);
        for row in &self.rows {
            write!(out, "{}:", row.pivot).unwrap();
            for c in &row.cols {
                write!(out, " {c}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ConstructionError> {
        let perr = |line: usize, reason: &str| ConstructionError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("polar-subcode") || fields.next() != Some("v1") {
            return Err(perr(1, "expected header `polar-subcode v1 m=<m> k=<k>`"));
        }
        let (mut m, mut k) = (None, None);
        for f in fields {
            match f.split_once('=') {
                Some(("m", v)) => m = v.parse::<usize>().ok(),
                Some(("k", v)) => k = v.parse::<usize>().ok(),
                _ => return Err(perr(1, &format!("unknown header field `{f}`"))),
            }
        }
        let m = m.ok_or_else(|| perr(1, "missing or invalid m"))?;
        let k = k.ok_or_else(|| perr(1, "missing or invalid k"))?;
        if m > 24 {
            return Err(perr(1, "m too large"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let (pivot, rest) = line
                .split_once(':')
                .ok_or_else(|| perr(i + 1, "expected `pivot: cols...`"))?;
            let pivot = pivot
                .trim()
                .parse()
                .map_err(|_| perr(i + 1, "invalid pivot"))?;
            let cols = rest
                .split_whitespace()
                .map(|c| c.parse().map_err(|_| perr(i + 1, "invalid column")))
                .collect::<Result<Vec<usize>, _>>()?;
            rows.push(ConstraintRow { pivot, cols });
        }
        let spec = Self::new(m, rows)?;
        if spec.k != k {
            return Err(perr(1, &format!("header k={k} but {} rows imply k={}", spec.rows.len(), spec.k)));
        }
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConstructionError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConstructionError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Per-subchannel error estimates and the induced order, least reliable first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityOrder {
    error_rates: Vec<f64>,
    order: Vec<usize>,
}

impl ReliabilityOrder {
    /// Sorts by decreasing error rate. Ties go to the index of lower Hamming
    /// weight (less reliable under the Arikan kernel), then to the lower index.
    pub fn from_error_rates(error_rates: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..error_rates.len()).collect();
        order.sort_by(|&a, &b| {
            error_rates[b]
                .total_cmp(&error_rates[a])
                .then(a.count_ones().cmp(&b.count_ones()))
                .then(a.cmp(&b))
        });
        Self { error_rates, order }
    }

    /// Uses an explicit order, least reliable first.
    pub fn from_order(order: Vec<usize>) -> Self {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            assert!(i < order.len() && !seen[i], "order is not a permutation");
            seen[i] = true;
        }
        Self {
            error_rates: Vec::new(),
            order,
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn error_rates(&self) -> &[f64] {
        &self.error_rates
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Genie-aided Monte-Carlo SC error frequency of each subchannel.
///
/// The all-zero codeword is sent; phase `i` counts an error when
/// `S_m^{(i)} < 0` and half an error when it is exactly zero.
pub fn estimate_reliability(m: usize, channel: AwgnChannel, frames: usize, seed: u64) -> ReliabilityOrder {
    assert!(frames > 0);
    let n = 1 << m;
    const CHUNK: usize = 256;
    let zeros = vec![0u8; n];
    let half_errors = (0..frames.div_ceil(CHUNK))
        .into_par_iter()
        .map_init(
            || (GenieSc::new(m), Vec::new()),
            |(genie, llrs), chunk| {
                let mut counts = vec![0u64; n];
                for f in chunk * CHUNK..((chunk + 1) * CHUNK).min(frames) {
                    let mut rng = frame_rng(seed, u64::MAX, f as u64);
                    channel.transmit_into(&zeros, &mut rng, llrs);
                    channel.llr_in_place(llrs);
                    for (c, &s) in counts.iter_mut().zip(genie.run(llrs, &zeros)) {
                        *c += if s < 0.0 { 2 } else { u64::from(s == 0.0) };
                    }
                }
                counts
            },
        )
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    ReliabilityOrder::from_error_rates(
        half_errors
            .into_iter()
            .map(|c| c as f64 / (2 * frames) as f64)
            .collect(),
    )
}

/// Plain polar code: the `n - k` least reliable subchannels are statically frozen.
pub fn construct_polar(m: usize, k: usize, reliability: &ReliabilityOrder) -> Result<CodeSpec, ConstructionError> {
    let n = 1usize << m;
    if k > n {
        return Err(ConstructionError::DimensionOutOfRange { n, k });
    }
    if reliability.len() != n {
        return Err(ConstructionError::ReliabilityLength {
            got: reliability.len(),
            expected: n,
        });
    }
    let mut frozen: Vec<usize> = reliability.order()[..n - k].to_vec();
    frozen.sort_unstable();
    CodeSpec::new(m, frozen.into_iter().map(ConstraintRow::frozen).collect())
}

/// Extended BCH code re-expressed through the polar transform:
/// `V = normalize(H · G_mᵀ)`. The dimension follows from the rank of `H`.
pub fn construct_ebch_subcode(m: usize, design_distance: usize) -> Result<CodeSpec, ConstructionError> {
    let h = gf2::ebch_check_matrix(m, design_distance)?;
    let g = BitMatrix::kronecker_power(&BitMatrix::arikan_kernel(), m)?;
    let v = gf2::normalize_constraints(&h.mat_mul(&g.transpose())?)?;
    CodeSpec::from_constraint_matrix(m, &v)
}

/// Adds `extra_checks` dynamic frozen symbols to `base`.
///
/// The least reliable unfrozen positions of `base` become pivots; each new
/// row includes every remaining unfrozen earlier position independently with
/// probability 1/2, drawn from a ChaCha8 stream seeded by `seed`. This is a
/// simple randomized construction, not an optimized subcode design.
pub fn construct_randomized_subcode(
    base: &CodeSpec,
    reliability: &ReliabilityOrder,
    extra_checks: usize,
    seed: u64,
) -> Result<CodeSpec, ConstructionError> {
    if extra_checks > base.k() {
        return Err(ConstructionError::TooManyChecks {
            requested: extra_checks,
            k: base.k(),
        });
    }
    if reliability.len() != base.n() {
        return Err(ConstructionError::ReliabilityLength {
            got: reliability.len(),
            expected: base.n(),
        });
    }
    if extra_checks == 0 {
        return Ok(base.clone());
    }
    let mut pivots: Vec<usize> = reliability
        .order()
        .iter()
        .copied()
        .filter(|&p| !base.is_frozen(p))
        .take(extra_checks)
        .collect();
    pivots.sort_unstable();
    let unfrozen: Vec<usize> = (0..base.n())
        .filter(|&p| !base.is_frozen(p) && pivots.binary_search(&p).is_err())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<ConstraintRow> = base.rows().to_vec();
    for &pivot in &pivots {
        let cols = unfrozen
            .iter()
            .copied()
            .take_while(|&s| s < pivot)
            .filter(|_| rng.random::<bool>())
            .collect();
        rows.push(ConstraintRow { pivot, cols });
    }
    rows.sort_by_key(|r| r.pivot);
    CodeSpec::new(base.m(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode, is_codeword};

    fn natural_order(m: usize) -> ReliabilityOrder {
        ReliabilityOrder::from_order((0..1 << m).collect())
    }

    #[test]
    fn polar_worse_channel_frozen() {
        let spec = construct_polar(1, 1, &natural_order(1)).unwrap();
        assert_eq!(spec.rows(), &[ConstraintRow::frozen(0)]);
    }

    #[test]
    fn polar_rate_one() {
        let spec = construct_polar(3, 8, &natural_order(3)).unwrap();
        assert!(spec.rows().is_empty());
        assert_eq!(spec.k(), 8);
    }

    #[test]
    fn polar_k_out_of_range() {
        assert!(matches!(
            construct_polar(2, 5, &natural_order(2)),
            Err(ConstructionError::DimensionOutOfRange { n: 4, k: 5 })
        ));
    }

    #[test]
    fn invalid_rows_rejected() {
        assert!(CodeSpec::new(2, vec![ConstraintRow::frozen(2), ConstraintRow::frozen(1)]).is_err());
        assert!(CodeSpec::new(2, vec![ConstraintRow { pivot: 1, cols: vec![1] }]).is_err());
        assert!(CodeSpec::new(2, vec![ConstraintRow::frozen(4)]).is_err());
        assert!(CodeSpec::new(3, vec![ConstraintRow { pivot: 5, cols: vec![3, 1] }]).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let spec = construct_ebch_subcode(4, 6).unwrap();
        let text = spec.to_text();
        let back = CodeSpec::from_text(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn text_format_layout() {
        let spec = CodeSpec::new(
            3,
            vec![ConstraintRow::frozen(0), ConstraintRow { pivot: 5, cols: vec![1, 3] }],
        )
        .unwrap();
        assert_eq!(spec.to_text(), "polar-subcode v1 m=3 k=6\n0:\n5: 1 3\n");
    }

    #[test]
    fn text_errors() {
        assert!(CodeSpec::from_text("").is_err());
        assert!(CodeSpec::from_text("polar-subcode v2 m=3 k=8\n").is_err());
        assert!(CodeSpec::from_text("polar-subcode v1 m=3 k=7\n").is_err());
        assert!(CodeSpec::from_text("polar-subcode v1 m=3 k=7\n2 1\n").is_err());
        assert!(CodeSpec::from_text("polar-subcode v1 m=3 k=7\n2: x\n").is_err());
    }

    #[test]
    fn ebch_parity_code() {
        let spec = construct_ebch_subcode(3, 2).unwrap();
        assert_eq!(spec.rows().len(), 1);
        for w in 0..1u32 << spec.k() {
            let info: Vec<u8> = (0..spec.k()).map(|i| (w >> i & 1) as u8).collect();
            let c = encode(&spec, &info).codeword;
            assert_eq!(c.iter().map(|&b| b as u32).sum::<u32>() % 2, 0);
        }
    }

    #[test]
    fn ebch_codewords_satisfy_checks() {
        let h = gf2::ebch_check_matrix(4, 4).unwrap();
        let spec = construct_ebch_subcode(4, 4).unwrap();
        assert_eq!(spec.k(), 11);
        for w in 0..1u32 << spec.k() {
            let info: Vec<u8> = (0..spec.k()).map(|i| (w >> i & 1) as u8).collect();
            let c = encode(&spec, &info).codeword;
            assert!(h.mul_vec(&c).iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn ebch_64_needs_dynamic_rows() {
        let spec = construct_ebch_subcode(6, 8).unwrap();
        assert_eq!(spec.k(), 64 - 19);
        assert!(spec.num_dynamic() > 0);
    }

    #[test]
    fn randomized_subcode_properties() {
        // least reliable first: low Hamming weight, then low index
        let mut order: Vec<usize> = (0..128).collect();
        order.sort_by_key(|&i| (i.count_ones(), i));
        let rel = ReliabilityOrder::from_order(order);
        let base = construct_polar(7, 70, &rel).unwrap();
        assert_eq!(construct_randomized_subcode(&base, &rel, 0, 1).unwrap(), base);

        let a = construct_randomized_subcode(&base, &rel, 6, 1).unwrap();
        let b = construct_randomized_subcode(&base, &rel, 6, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.k()), (128, 64));
        assert!(a.num_dynamic() <= 6);
        assert!(a.num_dynamic() >= 4);
        assert_ne!(a, construct_randomized_subcode(&base, &rel, 6, 2).unwrap());

        // an input that ignores a dynamic constraint is not a codeword
        let row = a.rows().iter().find(|r| r.is_dynamic()).unwrap();
        let mut u = vec![0u8; 128];
        u[row.cols[0]] = 1;
        let mut x = u.clone();
        crate::encoder::polar_transform(&mut x);
        assert!(!is_codeword(&a, &x));
        assert!(matches!(
            construct_randomized_subcode(&base, &rel, 71, 1),
            Err(ConstructionError::TooManyChecks { .. })
        ));
    }

    #[test]
    fn genie_reliability_n8() {
        let channel = AwgnChannel::from_eb_n0(2.0, 0.5);
        let rel = estimate_reliability(3, channel, 20_000, 11);
        let spec = construct_polar(3, 4, &rel).unwrap();
        let frozen: Vec<usize> = spec.rows().iter().map(|r| r.pivot).collect();
        assert_eq!(frozen, vec![0, 1, 2, 4]);
        // reliabilities are monotone along the partial order 0 < 1 < 3 < 7
        let p = rel.error_rates();
        assert!(p[0] > p[1] && p[1] > p[3] && p[3] > p[7]);
    }
}

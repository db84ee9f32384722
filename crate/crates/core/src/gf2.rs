//! Dense linear algebra over GF(2) and arithmetic in GF(2^t).
//!
//! [`BitMatrix`] stores rows as packed `u64` words. It houses the polar
//! transform `G_m = F^{⊗m}`, BCH check matrices and constraint matrices.
//! Row pivots throughout this module follow the *last* nonzero column of a
//! row, so elimination proceeds from right to left.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Gf2Error {
    #[error("kernel must be square, got {rows}x{cols}")]
    NonSquareKernel { rows: usize, cols: usize },
    #[error("dimension mismatch: {left_rows}x{left_cols} times {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("constraint matrix has {rows} rows but rank {rank}")]
    RankDeficient { rows: usize, rank: usize },
    #[error("no primitive polynomial tabulated for GF(2^{0})")]
    UnsupportedExtension(usize),
    #[error("invalid eBCH parameters m={m}, design distance={design_distance}")]
    InvalidBchParameters { m: usize, design_distance: usize },
}

const WORD: usize = 64;

/// Binary matrix with row-major packed storage.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(WORD);
        Self {
            rows,
            cols,
            words_per_row,
            bits: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut out = Self::zeros(size, size);
        for i in 0..size {
            out.set(i, i, true);
        }
        out
    }

    /// Builds a matrix from rows of 0/1 values. All rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut out = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            assert_eq!(row.len(), cols, "ragged row {i}");
            for (j, &b) in row.iter().enumerate() {
                out.set(i, j, b & 1 == 1);
            }
        }
        out
    }

    /// Arikan kernel `[[1,0],[1,1]]`.
    pub fn arikan_kernel() -> Self {
        Self::from_rows(&[[1u8, 0], [1, 1]])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.rows && col < self.cols);
        (self.bits[row * self.words_per_row + col / WORD] >> (col % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.rows && col < self.cols);
        let w = &mut self.bits[row * self.words_per_row + col / WORD];
        let mask = 1u64 << (col % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    fn row_words_mut(&mut self, row: usize) -> &mut [u64] {
        &mut self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    /// Row `row` as a vector of 0/1 values.
    pub fn row(&self, row: usize) -> Vec<u8> {
        (0..self.cols).map(|c| self.get(row, c) as u8).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.row(r)).collect()
    }

    /// Index of the last nonzero column of `row`, if any.
    pub fn last_nonzero(&self, row: usize) -> Option<usize> {
        last_set_bit(self.row_words(row))
    }

    /// `row[dst] ^= row[src]`
    pub fn xor_row_into(&mut self, src: usize, dst: usize) {
        assert_ne!(src, dst);
        let w = self.words_per_row;
        let (a, b) = (src * w, dst * w);
        for i in 0..w {
            let v = self.bits[a + i];
            self.bits[b + i] ^= v;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let w = self.words_per_row;
        for i in 0..w {
            self.bits.swap(a * w + i, b * w + i);
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.set(c, r, true);
                }
            }
        }
        out
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self, Gf2Error> {
        if self.cols != other.cols {
            return Err(Gf2Error::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let mut out = self.clone();
        out.rows += other.rows;
        out.bits.extend_from_slice(&other.bits);
        Ok(out)
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            out.row_words_mut(i).copy_from_slice(self.row_words(r));
        }
        out
    }

    /// Product over GF(2).
    pub fn mat_mul(&self, other: &Self) -> Result<Self, Gf2Error> {
        if self.cols != other.rows {
            return Err(Gf2Error::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) {
                    let w = out.words_per_row;
                    for i in 0..w {
                        out.bits[r * w + i] ^= other.bits[k * w + i];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul_vec(&self, v: &[u8]) -> Vec<u8> {
        assert_eq!(v.len(), self.rows);
        let mut acc = vec![0u64; self.words_per_row];
        for (r, &b) in v.iter().enumerate() {
            if b & 1 == 1 {
                for (a, w) in acc.iter_mut().zip(self.row_words(r)) {
                    *a ^= w;
                }
            }
        }
        (0..self.cols)
            .map(|c| ((acc[c / WORD] >> (c % WORD)) & 1) as u8)
            .collect()
    }

    /// Matrix times column vector: `self · vᵀ`.
    pub fn mul_vec(&self, v: &[u8]) -> Vec<u8> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .filter(|&c| v[c] & 1 == 1 && self.get(r, c))
                    .count() as u8
                    & 1
            })
            .collect()
    }

    pub fn kronecker(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if !self.get(r, c) {
                    continue;
                }
                for rr in 0..other.rows {
                    for cc in 0..other.cols {
                        if other.get(rr, cc) {
                            out.set(r * other.rows + rr, c * other.cols + cc, true);
                        }
                    }
                }
            }
        }
        out
    }

    /// `m`-fold Kronecker power of a square kernel; `m = 0` gives the 1×1 identity.
    pub fn kronecker_power(kernel: &Self, m: usize) -> Result<Self, Gf2Error> {
        if kernel.rows != kernel.cols {
            return Err(Gf2Error::NonSquareKernel {
                rows: kernel.rows,
                cols: kernel.cols,
            });
        }
        let mut out = Self::identity(1);
        for _ in 0..m {
            out = out.kronecker(kernel);
        }
        Ok(out)
    }

    /// Rank over GF(2).
    pub fn rank(&self) -> usize {
        let mut basis = XorBasis::new(self.cols);
        (0..self.rows)
            .filter(|&r| basis.insert(self.row_words(r).to_vec()).is_some())
            .count()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Keeps a maximal linearly independent subset of rows, in original order.
    pub fn independent_rows(&self) -> Self {
        let mut basis = XorBasis::new(self.cols);
        let keep: Vec<usize> = (0..self.rows)
            .filter(|&r| basis.insert(self.row_words(r).to_vec()).is_some())
            .collect();
        self.select_rows(&keep)
    }

    /// All vectors `x` with `self · xᵀ = 0`, by enumeration. Only for small `cols`.
    pub fn null_space_vectors(&self) -> Vec<Vec<u8>> {
        assert!(self.cols <= 24, "exhaustive enumeration limited to 24 columns");
        (0u64..1 << self.cols)
            .filter(|&x| {
                (0..self.rows).all(|r| {
                    let w = self.row_words(r)[0];
                    (w & x).count_ones().is_multiple_of(2)
                })
            })
            .map(|x| (0..self.cols).map(|c| ((x >> c) & 1) as u8).collect())
            .collect()
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let s: String = (0..self.cols)
                .map(|c| if self.get(r, c) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {s}")?;
        }
        Ok(())
    }
}

fn last_set_bit(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .rev()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * WORD + (WORD - 1 - w.leading_zeros() as usize))
}

/// Incremental basis keyed by the last nonzero column of each member.
struct XorBasis {
    by_pivot: Vec<Option<Vec<u64>>>,
}

impl XorBasis {
    fn new(cols: usize) -> Self {
        Self {
            by_pivot: vec![None; cols],
        }
    }

    /// Reduces `v` against the basis; if something nonzero remains it is added
    /// and its pivot returned.
    fn insert(&mut self, mut v: Vec<u64>) -> Option<usize> {
        while let Some(p) = last_set_bit(&v) {
            match &self.by_pivot[p] {
                Some(b) => {
                    for (x, y) in v.iter_mut().zip(b) {
                        *x ^= y;
                    }
                }
                None => {
                    self.by_pivot[p] = Some(v);
                    return Some(p);
                }
            }
        }
        None
    }
}

/// Brings a full-row-rank matrix into the form `Q·raw` whose rows end in
/// pairwise distinct columns, sorted by ascending last-nonzero column.
///
/// Each row is reduced against the rows already accepted until its last
/// nonzero column is new. The resulting `Q` is one valid choice among many.
pub fn normalize_constraints(raw: &BitMatrix) -> Result<BitMatrix, Gf2Error> {
    let mut basis = XorBasis::new(raw.cols);
    let mut rank = 0;
    for r in 0..raw.rows {
        if basis.insert(raw.row_words(r).to_vec()).is_some() {
            rank += 1;
        }
    }
    if rank != raw.rows {
        return Err(Gf2Error::RankDeficient {
            rows: raw.rows,
            rank,
        });
    }
    let mut out = BitMatrix::zeros(rank, raw.cols);
    for (i, words) in basis.by_pivot.into_iter().flatten().enumerate() {
        out.row_words_mut(i).copy_from_slice(&words);
    }
    Ok(out)
}

/// Primitive polynomials (bit `i` = coefficient of `x^i`) for `t = 2..=16`.
const PRIMITIVE_POLYS: [u32; 15] = [
    0b111,               // x^2 + x + 1
    0b1011,              // x^3 + x + 1
    0b1_0011,            // x^4 + x + 1
    0b10_0101,           // x^5 + x^2 + 1
    0b100_0011,          // x^6 + x + 1
    0b1000_1001,         // x^7 + x^3 + 1
    0x11D,               // x^8 + x^4 + x^3 + x^2 + 1
    0x211,               // x^9 + x^4 + 1
    0x409,               // x^10 + x^3 + 1
    0x805,               // x^11 + x^2 + 1
    0x1053,              // x^12 + x^6 + x^4 + x + 1
    0x201B,              // x^13 + x^4 + x^3 + x + 1
    0x4443,              // x^14 + x^10 + x^6 + x + 1
    0x8003,              // x^15 + x + 1
    0x1100B,             // x^16 + x^12 + x^3 + x + 1
];

/// GF(2^t) in polynomial basis with log/antilog tables.
#[derive(Debug, Clone)]
pub struct Gf2mField {
    t: usize,
    primitive_poly: u32,
    log: Vec<u32>,
    antilog: Vec<u32>,
}

impl Gf2mField {
    pub fn new(t: usize) -> Result<Self, Gf2Error> {
        if !(2..=16).contains(&t) {
            return Err(Gf2Error::UnsupportedExtension(t));
        }
        let poly = PRIMITIVE_POLYS[t - 2];
        let order = (1usize << t) - 1;
        let mut antilog = vec![0u32; order];
        let mut log = vec![u32::MAX; order + 1];
        let mut x = 1u32;
        for (i, a) in antilog.iter_mut().enumerate() {
            *a = x;
            assert_eq!(log[x as usize], u32::MAX, "polynomial for t={t} is not primitive");
            log[x as usize] = i as u32;
            x <<= 1;
            if x >> t & 1 == 1 {
                x ^= poly;
            }
        }
        assert_eq!(x, 1, "alpha^(2^t-1) != 1 for t={t}");
        Ok(Self {
            t,
            primitive_poly: poly,
            log,
            antilog,
        })
    }

    pub fn degree(&self) -> usize {
        self.t
    }

    pub fn primitive_poly(&self) -> u32 {
        self.primitive_poly
    }

    /// Number of nonzero elements, `2^t - 1`.
    pub fn order(&self) -> usize {
        self.antilog.len()
    }

    pub fn alpha_pow(&self, e: usize) -> u32 {
        self.antilog[e % self.order()]
    }

    /// Discrete log of a nonzero element.
    pub fn log(&self, x: u32) -> Option<usize> {
        if x == 0 {
            None
        } else {
            Some(self.log[x as usize] as usize)
        }
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let e = self.log[a as usize] as usize + self.log[b as usize] as usize;
        self.antilog[e % self.order()]
    }

    pub fn pow(&self, a: u32, e: usize) -> u32 {
        if e == 0 {
            return 1;
        }
        match self.log(a) {
            None => 0,
            Some(l) => self.antilog[(l * e) % self.order()],
        }
    }
}

/// Size of the cyclotomic coset of `j` modulo `2^m - 1`.
pub fn cyclotomic_coset_size(j: usize, m: usize) -> usize {
    let order = (1usize << m) - 1;
    let j = j % order;
    let mut x = (2 * j) % order;
    let mut size = 1;
    while x != j {
        x = (2 * x) % order;
        size += 1;
    }
    size
}

/// Check matrix of the extended primitive narrow-sense BCH code of length
/// `2^m` whose extended minimum distance is at least `design_distance`.
///
/// Coordinate `i` is labelled by the field element whose polynomial-basis
/// representation is the integer `i`; coordinate 0 (the zero element) is the
/// extension position. With this labelling the code is affine-invariant.
/// Rows: the all-ones parity row followed by the binary expansions of
/// `Σ c_i x_i^j = 0` for odd `j ≤ design_distance - 2`. Dependent rows are
/// dropped, so the row count equals the rank.
pub fn ebch_check_matrix(m: usize, design_distance: usize) -> Result<BitMatrix, Gf2Error> {
    let n = 1usize << m;
    if m < 1 || design_distance < 2 || design_distance >= n {
        return Err(Gf2Error::InvalidBchParameters { m, design_distance });
    }
    let mut h = BitMatrix::zeros(1, n);
    for c in 0..n {
        h.set(0, c, true);
    }
    if design_distance > 2 {
        let field = Gf2mField::new(m)?;
        let mut j = 1;
        while j + 2 <= design_distance {
            let mut block = BitMatrix::zeros(m, n);
            for c in 1..n {
                let v = field.pow(c as u32, j);
                for b in 0..m {
                    if v >> b & 1 == 1 {
                        block.set(b, c, true);
                    }
                }
            }
            h = h.vstack(&block)?;
            j += 2;
        }
    }
    Ok(h.independent_rows())
}

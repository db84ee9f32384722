//! Successive cancellation datapath shared by all decoders.
//!
//! Layer `λ ∈ [0, m]` holds LLR arrays `S_λ` and partial-sum arrays `C_λ`
//! of length `2^{m-λ}`. Layer 0 carries the channel LLRs and, once the last
//! phase is decided, the codeword. Arrays are pooled per layer and shared
//! between paths through reference counts; a path that needs to write into a
//! shared array gets a fresh one *without* copying, since every write
//! overwrites the whole array before it is read again.
//!
//! Partial sums use a co-located layout. After an odd phase `φ` with
//! `δ = tz(φ + 1)`, the odd-branch sums of layers `m, m-1, ..., m-δ+1`
//! are written into the array of layer `λ₀ = m - δ` at offsets
//! `2^{m-λ}(2^{λ-λ₀} - 1)` and folded down until the whole array holds the
//! even-branch sums of layer `λ₀`. One array per path and layer therefore
//! suffices, half of the two-copy layout.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DatapathError {
    #[error("all {capacity} paths are in use")]
    PathsExhausted { capacity: usize },
    #[error("no free {kind} array at layer {layer}")]
    PoolExhausted { kind: ArrayKind, layer: usize },
    #[error("LLR vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrayKind {
    Llr,
    PartialSum,
}

impl std::fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArrayKind::Llr => "LLR",
            ArrayKind::PartialSum => "partial-sum",
        })
    }
}

/// Min-sum check-node update `sgn(a) sgn(b) min(|a|, |b|)`.
#[inline]
pub fn min_sum_q(a: f64, b: f64) -> f64 {
    let r = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -r
    } else {
        r
    }
}

/// Variable-node update `(-1)^v a + b`.
#[inline]
pub fn min_sum_p(v: u8, a: f64, b: f64) -> f64 {
    if v & 1 == 0 {
        a + b
    } else {
        b - a
    }
}

/// Path metric penalty for deciding `v` when the LLR is `s`: zero when the
/// sign agrees with `(-1)^v` (or `s = 0`), `-|s|` otherwise.
#[inline]
pub fn penalty_tau(s: f64, v: u8) -> f64 {
    let disagrees = if v & 1 == 0 { s < 0.0 } else { s > 0.0 };
    if disagrees {
        -s.abs()
    } else {
        0.0
    }
}

/// Hard decision on a modified LLR; zero decides 0.
#[inline]
pub fn hard_decision(s: f64) -> u8 {
    u8::from(s < 0.0)
}

/// Counted real additions and comparisons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub additions: u64,
    pub comparisons: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.additions + self.comparisons
    }
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.additions += rhs.additions;
        self.comparisons += rhs.comparisons;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathHandle(u32);

impl PathHandle {
    /// For [`PathArrays`] implementations that manage their own indices.
    pub fn from_index(i: usize) -> Self {
        Self(u32::try_from(i).expect("path index fits in u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Decoder-visible state of a path besides its arrays.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PathState {
    /// Number of decided symbols.
    pub phase: usize,
    /// Accumulated penalty `R`; nonpositive and nonincreasing in the phase.
    pub penalty: f64,
}

/// Storage for the paths of a successive cancellation decoder.
///
/// [`Workspace`] is the production implementation; the trait exists so the
/// decoders can be run against an independent reference implementation.
pub trait PathArrays {
    fn m(&self) -> usize;
    /// Maximum number of simultaneously active paths.
    fn capacity(&self) -> usize;
    fn active_paths(&self) -> usize;
    /// Kills every path, loads the channel LLRs and returns the root path.
    fn start(&mut self, llrs: &[f64]) -> Result<PathHandle, DatapathError>;
    /// Computes `S_m^{(phase)}` for path `l`, whose first `phase` symbols are decided.
    fn calc_s(&mut self, l: PathHandle, phase: usize) -> Result<f64, DatapathError>;
    /// Stores the decision for `phase` without propagating it.
    fn write_bit(&mut self, l: PathHandle, phase: usize, bit: u8) -> Result<(), DatapathError>;
    /// Propagates partial sums after the odd phase `phase`.
    fn update_c(&mut self, l: PathHandle, phase: usize) -> Result<(), DatapathError>;
    fn clone_path(&mut self, l: PathHandle) -> Result<PathHandle, DatapathError>;
    fn kill_path(&mut self, l: PathHandle);
    /// Layer-0 partial sums; the codeword once all `n` phases are decided.
    fn codeword(&self, l: PathHandle) -> &[u8];
    fn state(&self, l: PathHandle) -> &PathState;
    fn state_mut(&mut self, l: PathHandle) -> &mut PathState;
    /// Dynamic-frozen accumulator bits of a path.
    fn mask(&self, l: PathHandle) -> &[u64];
    fn mask_mut(&mut self, l: PathHandle) -> &mut [u64];
    fn ops(&self) -> OpCounts;
    fn reset_ops(&mut self);

    /// Writes the decision and propagates it when the phase is odd.
    fn decide(&mut self, l: PathHandle, phase: usize, bit: u8) -> Result<(), DatapathError> {
        self.write_bit(l, phase, bit)?;
        if phase % 2 == 1 {
            self.update_c(l, phase)?;
        }
        Ok(())
    }
}

const UNBOUND: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Pool<T> {
    len: usize,
    limit: usize,
    data: Vec<T>,
    refs: Vec<u32>,
    free: Vec<u32>,
}

impl<T: Copy + Default> Pool<T> {
    fn new(len: usize, limit: usize) -> Self {
        Self {
            len,
            limit,
            data: Vec::new(),
            refs: Vec::new(),
            free: Vec::new(),
        }
    }

    fn alloc(&mut self) -> Option<u32> {
        let slot = match self.free.pop() {
            Some(s) => s,
            None if self.refs.len() < self.limit => {
                self.refs.push(0);
                self.data.resize(self.data.len() + self.len, T::default());
                (self.refs.len() - 1) as u32
            }
            None => return None,
        };
        self.refs[slot as usize] = 1;
        Some(slot)
    }

    fn release(&mut self, slot: u32) {
        let r = &mut self.refs[slot as usize];
        debug_assert!(*r > 0);
        *r -= 1;
        if *r == 0 {
            self.free.push(slot);
        }
    }

    #[inline]
    fn get(&self, slot: u32) -> &[T] {
        let s = slot as usize * self.len;
        &self.data[s..s + self.len]
    }

    #[inline]
    fn get_mut(&mut self, slot: u32) -> &mut [T] {
        let s = slot as usize * self.len;
        &mut self.data[s..s + self.len]
    }

    fn slots_in_use(&self) -> usize {
        self.refs.iter().filter(|&&r| r > 0).count()
    }
}

/// Copy-on-write binding: a private slot is reused, a shared one is
/// abandoned for a fresh slot with unspecified contents.
fn writable<T: Copy + Default>(
    pool: &mut Pool<T>,
    binding: &mut u32,
    kind: ArrayKind,
    layer: usize,
) -> Result<u32, DatapathError> {
    let exhausted = DatapathError::PoolExhausted { kind, layer };
    let slot = match *binding {
        UNBOUND => pool.alloc().ok_or(exhausted)?,
        s if pool.refs[s as usize] > 1 => {
            pool.refs[s as usize] -= 1;
            pool.alloc().ok_or(exhausted)?
        }
        s => s,
    };
    *binding = slot;
    Ok(slot)
}

/// Reference-counted lazy-copy path storage with co-located partial sums.
#[derive(Debug, Clone)]
pub struct Workspace {
    m: usize,
    capacity: usize,
    mask_words: usize,
    llr: Vec<Pool<f64>>,
    bits: Vec<Pool<u8>>,
    llr_bind: Vec<u32>,
    bit_bind: Vec<u32>,
    states: Vec<PathState>,
    masks: Vec<u64>,
    active: Vec<bool>,
    free_paths: Vec<u32>,
    used_paths: usize,
    n_active: usize,
    ops: OpCounts,
}

impl Workspace {
    /// Storage for up to `capacity` paths of length `2^m`, each with a
    /// dynamic-frozen bitmask of `mask_bits` bits.
    pub fn new(m: usize, capacity: usize, mask_bits: usize) -> Self {
        assert!(capacity >= 1);
        assert!(m <= 24);
        let mask_words = mask_bits.div_ceil(64);
        let layers = m + 1;
        Self {
            m,
            capacity,
            mask_words,
            llr: (0..layers).map(|l| Pool::new(1 << (m - l), capacity)).collect(),
            bits: (0..layers).map(|l| Pool::new(1 << (m - l), capacity)).collect(),
            llr_bind: vec![UNBOUND; capacity * layers],
            bit_bind: vec![UNBOUND; capacity * layers],
            states: vec![PathState::default(); capacity],
            masks: vec![0; capacity * mask_words],
            active: vec![false; capacity],
            free_paths: Vec::new(),
            used_paths: 0,
            n_active: 0,
            ops: OpCounts::default(),
        }
    }

    pub fn n(&self) -> usize {
        1 << self.m
    }

    #[inline]
    fn bind_index(&self, l: PathHandle, layer: usize) -> usize {
        l.index() * (self.m + 1) + layer
    }

    fn assign_path(&mut self) -> Result<PathHandle, DatapathError> {
        let idx = match self.free_paths.pop() {
            Some(i) => i,
            None if self.used_paths < self.capacity => {
                self.used_paths += 1;
                (self.used_paths - 1) as u32
            }
            None => {
                return Err(DatapathError::PathsExhausted {
                    capacity: self.capacity,
                })
            }
        };
        self.active[idx as usize] = true;
        self.n_active += 1;
        Ok(PathHandle(idx))
    }

    pub fn is_active(&self, l: PathHandle) -> bool {
        self.active[l.index()]
    }

    /// Slot bound to path `l` at `layer`, if any.
    pub fn slot(&self, kind: ArrayKind, l: PathHandle, layer: usize) -> Option<u32> {
        let b = self.bind_index(l, layer);
        let s = match kind {
            ArrayKind::Llr => self.llr_bind[b],
            ArrayKind::PartialSum => self.bit_bind[b],
        };
        (s != UNBOUND).then_some(s)
    }

    pub fn ref_count(&self, kind: ArrayKind, layer: usize, slot: u32) -> u32 {
        match kind {
            ArrayKind::Llr => self.llr[layer].refs[slot as usize],
            ArrayKind::PartialSum => self.bits[layer].refs[slot as usize],
        }
    }

    /// Number of slots with a nonzero reference count.
    pub fn slots_in_use(&self, kind: ArrayKind, layer: usize) -> usize {
        match kind {
            ArrayKind::Llr => self.llr[layer].slots_in_use(),
            ArrayKind::PartialSum => self.bits[layer].slots_in_use(),
        }
    }

    /// Read-only LLR array of `l` at `layer`.
    pub fn llr(&self, l: PathHandle, layer: usize) -> Option<&[f64]> {
        self.slot(ArrayKind::Llr, l, layer).map(|s| self.llr[layer].get(s))
    }

    /// Read-only partial-sum array of `l` at `layer`.
    pub fn partial_sums(&self, l: PathHandle, layer: usize) -> Option<&[u8]> {
        self.slot(ArrayKind::PartialSum, l, layer).map(|s| self.bits[layer].get(s))
    }

    /// Writable LLR array; a shared array is replaced by a fresh one whose
    /// contents are unspecified.
    pub fn writable_llr(&mut self, l: PathHandle, layer: usize) -> Result<&mut [f64], DatapathError> {
        let b = self.bind_index(l, layer);
        let slot = writable(&mut self.llr[layer], &mut self.llr_bind[b], ArrayKind::Llr, layer)?;
        Ok(self.llr[layer].get_mut(slot))
    }

    /// Writable partial-sum array, same semantics as [`Self::writable_llr`].
    pub fn writable_partial_sums(&mut self, l: PathHandle, layer: usize) -> Result<&mut [u8], DatapathError> {
        let b = self.bind_index(l, layer);
        let slot = writable(&mut self.bits[layer], &mut self.bit_bind[b], ArrayKind::PartialSum, layer)?;
        Ok(self.bits[layer].get_mut(slot))
    }

    /// Partial-sum storage per path in bits: one array per layer, `2n - 1`.
    pub fn partial_sum_bits_per_path(&self) -> usize {
        self.bits.iter().map(|p| p.len).sum()
    }

    fn read_slot(&self, kind: ArrayKind, l: PathHandle, layer: usize) -> u32 {
        self.slot(kind, l, layer)
            .unwrap_or_else(|| panic!("path {} has no {kind} array at layer {layer}", l.index()))
    }
}

impl PathArrays for Workspace {
    fn m(&self) -> usize {
        self.m
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn active_paths(&self) -> usize {
        self.n_active
    }

    fn start(&mut self, llrs: &[f64]) -> Result<PathHandle, DatapathError> {
        if llrs.len() != self.n() {
            return Err(DatapathError::LengthMismatch {
                got: llrs.len(),
                expected: self.n(),
            });
        }
        for i in 0..self.used_paths {
            if self.active[i] {
                self.kill_path(PathHandle(i as u32));
            }
        }
        let root = self.assign_path()?;
        self.writable_llr(root, 0)?.copy_from_slice(llrs);
        self.states[root.index()] = PathState::default();
        self.mask_mut(root).fill(0);
        Ok(root)
    }

    fn calc_s(&mut self, l: PathHandle, phase: usize) -> Result<f64, DatapathError> {
        let m = self.m;
        debug_assert!(phase < self.n());
        if m == 0 {
            return Ok(self.llr(l, 0).expect("root LLRs")[0]);
        }
        let d = if phase == 0 {
            m - 1
        } else {
            (phase.trailing_zeros() as usize).min(m - 1)
        };
        let mut layer = m - d;
        let mut half = 1usize << (m - layer);
        let base = l.index() * (m + 1);

        if (phase >> d) & 1 == 1 {
            let c_slot = self.read_slot(ArrayKind::PartialSum, l, layer);
            let src_slot = self.read_slot(ArrayKind::Llr, l, layer - 1);
            let dst_slot = writable(&mut self.llr[layer], &mut self.llr_bind[base + layer], ArrayKind::Llr, layer)?;
            let (lo, hi) = self.llr.split_at_mut(layer);
            let src = lo[layer - 1].get(src_slot);
            let dst = hi[0].get_mut(dst_slot);
            let c = self.bits[layer].get(c_slot);
            for (beta, out) in dst.iter_mut().enumerate() {
                *out = min_sum_p(c[beta], src[beta], src[beta + half]);
            }
            self.ops.additions += half as u64;
            layer += 1;
            half /= 2;
        }
        while layer <= m {
            let src_slot = self.read_slot(ArrayKind::Llr, l, layer - 1);
            let dst_slot = writable(&mut self.llr[layer], &mut self.llr_bind[base + layer], ArrayKind::Llr, layer)?;
            let (lo, hi) = self.llr.split_at_mut(layer);
            let src = lo[layer - 1].get(src_slot);
            let dst = hi[0].get_mut(dst_slot);
            for (beta, out) in dst.iter_mut().enumerate() {
                *out = min_sum_q(src[beta + half], src[beta]);
            }
            self.ops.comparisons += half as u64;
            layer += 1;
            half /= 2;
        }
        Ok(self.llr(l, m).expect("just written")[0])
    }

    fn write_bit(&mut self, l: PathHandle, phase: usize, bit: u8) -> Result<(), DatapathError> {
        let delta = (phase + 1).trailing_zeros() as usize;
        let landing = self.m - delta;
        let arr = self.writable_partial_sums(l, landing)?;
        // odd phases land at the end of the co-located region
        arr[(1usize << delta) - 1] = bit & 1;
        Ok(())
    }

    fn update_c(&mut self, l: PathHandle, phase: usize) -> Result<(), DatapathError> {
        debug_assert!(phase % 2 == 1);
        let m = self.m;
        let delta = (phase + 1).trailing_zeros() as usize;
        let landing = m - delta;
        let base = l.index() * (m + 1);
        let slot = writable(
            &mut self.bits[landing],
            &mut self.bit_bind[base + landing],
            ArrayKind::PartialSum,
            landing,
        )?;
        let (lo, hi) = self.bits.split_at_mut(landing + 1);
        let region = lo[landing].get_mut(slot);
        let mut len = 1usize;
        let mut upper = (1usize << delta) - 1;
        let mut lower = upper - 1;
        for layer in (landing + 1..=m).rev() {
            let even_slot = self.bit_bind[base + layer];
            debug_assert_ne!(even_slot, UNBOUND);
            let even = hi[layer - landing - 1].get(even_slot);
            for beta in 0..len {
                region[lower + beta] = even[beta] ^ region[upper + beta];
            }
            upper = lower;
            len *= 2;
            lower = lower.wrapping_sub(len);
        }
        Ok(())
    }

    fn clone_path(&mut self, l: PathHandle) -> Result<PathHandle, DatapathError> {
        debug_assert!(self.is_active(l));
        let child = self.assign_path()?;
        let layers = self.m + 1;
        let (src, dst) = (l.index() * layers, child.index() * layers);
        for layer in 0..layers {
            let s = self.llr_bind[src + layer];
            if s != UNBOUND {
                self.llr[layer].refs[s as usize] += 1;
            }
            self.llr_bind[dst + layer] = s;
            let s = self.bit_bind[src + layer];
            if s != UNBOUND {
                self.bits[layer].refs[s as usize] += 1;
            }
            self.bit_bind[dst + layer] = s;
        }
        self.states[child.index()] = self.states[l.index()];
        let w = self.mask_words;
        self.masks.copy_within(l.index() * w..(l.index() + 1) * w, child.index() * w);
        Ok(child)
    }

    fn kill_path(&mut self, l: PathHandle) {
        assert!(self.active[l.index()], "killing inactive path {}", l.index());
        let layers = self.m + 1;
        let base = l.index() * layers;
        for layer in 0..layers {
            let s = std::mem::replace(&mut self.llr_bind[base + layer], UNBOUND);
            if s != UNBOUND {
                self.llr[layer].release(s);
            }
            let s = std::mem::replace(&mut self.bit_bind[base + layer], UNBOUND);
            if s != UNBOUND {
                self.bits[layer].release(s);
            }
        }
        self.active[l.index()] = false;
        self.free_paths.push(l.0);
        self.n_active -= 1;
    }

    fn codeword(&self, l: PathHandle) -> &[u8] {
        self.partial_sums(l, 0).expect("no codeword: final phase not decided")
    }

    fn state(&self, l: PathHandle) -> &PathState {
        &self.states[l.index()]
    }

    fn state_mut(&mut self, l: PathHandle) -> &mut PathState {
        &mut self.states[l.index()]
    }

    fn mask(&self, l: PathHandle) -> &[u64] {
        let w = self.mask_words;
        &self.masks[l.index() * w..(l.index() + 1) * w]
    }

    fn mask_mut(&mut self, l: PathHandle) -> &mut [u64] {
        let w = self.mask_words;
        &mut self.masks[l.index() * w..(l.index() + 1) * w]
    }

    fn ops(&self) -> OpCounts {
        self.ops
    }

    fn reset_ops(&mut self) {
        self.ops = OpCounts::default();
    }
}

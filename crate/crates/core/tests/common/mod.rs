//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use polarseq::channel::{frame_rng, AwgnChannel};
use polarseq::construction::{
    construct_polar, construct_randomized_subcode, estimate_reliability, CodeSpec, ConstraintRow, ReliabilityOrder,
};
use polarseq::datapath::{min_sum_p, min_sum_q, DatapathError, OpCounts, PathArrays, PathHandle, PathState};
use polarseq::encoder::{encode, polar_transform};
use rand::Rng;

/// Max-log metric of a codeword: `-Σ |L_i|` over positions whose LLR sign
/// disagrees with the bit. Zero LLRs never disagree.
pub fn metric(codeword: &[u8], llrs: &[f64]) -> f64 {
    codeword
        .iter()
        .zip(llrs)
        .map(|(&c, &l)| if (c == 0 && l < 0.0) || (c == 1 && l > 0.0) { -l.abs() } else { 0.0 })
        .sum()
}

pub fn codebook(spec: &CodeSpec) -> Vec<Vec<u8>> {
    let k = spec.k();
    assert!(k <= 16);
    (0..1u32 << k)
        .map(|w| {
            let info: Vec<u8> = (0..k).map(|i| ((w >> i) & 1) as u8).collect();
            encode(spec, &info).codeword
        })
        .collect()
}

pub struct MlDecision {
    pub codeword: Vec<u8>,
    pub metric: f64,
    /// Best metric reached by more than one codeword.
    pub tied: bool,
}

/// Exhaustive maximum of the max-log metric over the codebook.
pub fn ml_decode(book: &[Vec<u8>], llrs: &[f64]) -> MlDecision {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    let mut count = 0;
    for (i, c) in book.iter().enumerate() {
        let m = metric(c, llrs);
        if m > best + 1e-12 {
            best = m;
            arg = i;
            count = 1;
        } else if (m - best).abs() <= 1e-12 {
            count += 1;
        }
    }
    MlDecision {
        codeword: book[arg].clone(),
        metric: best,
        tied: count > 1,
    }
}

/// `S_m^{(φ)}` from its definition: the difference between the best
/// max-log metrics with `u_φ = 0` and `u_φ = 1`, maximized over all
/// continuations and with `u_0..u_{φ-1}` fixed to `prefix`.
pub fn brute_force_s(llrs: &[f64], prefix: &[u8]) -> f64 {
    let n = llrs.len();
    let phase = prefix.len();
    let free = n - phase - 1;
    let mut best = [f64::NEG_INFINITY; 2];
    let mut u = vec![0u8; n];
    u[..phase].copy_from_slice(prefix);
    for v in 0..2u8 {
        u[phase] = v;
        for tail in 0..1u64 << free {
            for j in 0..free {
                u[phase + 1 + j] = ((tail >> j) & 1) as u8;
            }
            let mut x = u.clone();
            polar_transform(&mut x);
            let corr: f64 = x.iter().zip(llrs).map(|(&b, &l)| if b == 0 { l / 2.0 } else { -l / 2.0 }).sum();
            best[v as usize] = best[v as usize].max(corr);
        }
    }
    best[0] - best[1]
}

#[derive(Debug, Clone)]
struct DeepPath {
    llr: Vec<Vec<f64>>,
    // partial sums of the even (0) and odd (1) branch at each layer
    c: [Vec<Vec<u8>>; 2],
    state: PathState,
    mask: Vec<u64>,
}

/// Path storage without sharing: every path owns full copies of all arrays
/// and partial sums are kept in the two-copy recursive layout.
#[derive(Debug, Clone)]
pub struct DeepCopyArrays {
    m: usize,
    capacity: usize,
    mask_words: usize,
    paths: Vec<Option<DeepPath>>,
    ops: OpCounts,
}

impl DeepCopyArrays {
    pub fn new(m: usize, capacity: usize, mask_bits: usize) -> Self {
        Self {
            m,
            capacity,
            mask_words: mask_bits.div_ceil(64),
            paths: vec![None; capacity],
            ops: OpCounts::default(),
        }
    }

    pub fn for_spec(spec: &CodeSpec, capacity: usize) -> Self {
        Self::new(spec.m(), capacity, spec.num_dynamic())
    }

    fn path(&self, l: PathHandle) -> &DeepPath {
        self.paths[l.index()].as_ref().expect("active path")
    }

    fn path_mut(&mut self, l: PathHandle) -> &mut DeepPath {
        self.paths[l.index()].as_mut().expect("active path")
    }

    fn calc(&mut self, l: PathHandle, layer: usize, branch: usize) {
        if layer == 0 {
            return;
        }
        if branch.is_multiple_of(2) {
            self.calc(l, layer - 1, branch >> 1);
        }
        let half = 1usize << (self.m - layer);
        let p = self.paths[l.index()].as_mut().expect("active path");
        for beta in 0..half {
            let (a, b) = (p.llr[layer - 1][beta], p.llr[layer - 1][beta + half]);
            p.llr[layer][beta] = if branch.is_multiple_of(2) {
                min_sum_q(b, a)
            } else {
                min_sum_p(p.c[0][layer][beta], a, b)
            };
        }
        if branch.is_multiple_of(2) {
            self.ops.comparisons += half as u64;
        } else {
            self.ops.additions += half as u64;
        }
    }

    fn update(&mut self, l: PathHandle, layer: usize, branch: usize) {
        let half = 1usize << (self.m - layer);
        let parent = branch >> 1;
        let p = self.path_mut(l);
        for beta in 0..half {
            let (c0, c1) = (p.c[0][layer][beta], p.c[1][layer][beta]);
            p.c[parent % 2][layer - 1][beta] = c0 ^ c1;
            p.c[parent % 2][layer - 1][beta + half] = c1;
        }
        if parent % 2 == 1 {
            self.update(l, layer - 1, parent);
        }
    }
}

impl PathArrays for DeepCopyArrays {
    fn m(&self) -> usize {
        self.m
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn active_paths(&self) -> usize {
        self.paths.iter().filter(|p| p.is_some()).count()
    }

    fn start(&mut self, llrs: &[f64]) -> Result<PathHandle, DatapathError> {
        let n = 1usize << self.m;
        if llrs.len() != n {
            return Err(DatapathError::LengthMismatch {
                got: llrs.len(),
                expected: n,
            });
        }
        self.paths.iter_mut().for_each(|p| *p = None);
        let sizes: Vec<usize> = (0..=self.m).map(|layer| 1usize << (self.m - layer)).collect();
        let mut llr: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
        llr[0].copy_from_slice(llrs);
        let zeros: Vec<Vec<u8>> = sizes.iter().map(|&s| vec![0; s]).collect();
        self.paths[0] = Some(DeepPath {
            llr,
            c: [zeros.clone(), zeros],
            state: PathState::default(),
            mask: vec![0; self.mask_words],
        });
        Ok(PathHandle::from_index(0))
    }

    fn calc_s(&mut self, l: PathHandle, phase: usize) -> Result<f64, DatapathError> {
        self.calc(l, self.m, phase);
        Ok(self.path(l).llr[self.m][0])
    }

    fn write_bit(&mut self, l: PathHandle, phase: usize, bit: u8) -> Result<(), DatapathError> {
        let m = self.m;
        self.path_mut(l).c[phase % 2][m][0] = bit;
        Ok(())
    }

    fn update_c(&mut self, l: PathHandle, phase: usize) -> Result<(), DatapathError> {
        assert!(phase % 2 == 1);
        self.update(l, self.m, phase);
        Ok(())
    }

    fn clone_path(&mut self, l: PathHandle) -> Result<PathHandle, DatapathError> {
        let slot = self.paths.iter().position(|p| p.is_none()).ok_or(DatapathError::PathsExhausted {
            capacity: self.capacity,
        })?;
        self.paths[slot] = Some(self.path(l).clone());
        Ok(PathHandle::from_index(slot))
    }

    fn kill_path(&mut self, l: PathHandle) {
        assert!(self.paths[l.index()].take().is_some(), "killing inactive path");
    }

    fn codeword(&self, l: PathHandle) -> &[u8] {
        &self.path(l).c[0][0]
    }

    fn state(&self, l: PathHandle) -> &PathState {
        &self.path(l).state
    }

    fn state_mut(&mut self, l: PathHandle) -> &mut PathState {
        &mut self.path_mut(l).state
    }

    fn mask(&self, l: PathHandle) -> &[u64] {
        &self.path(l).mask
    }

    fn mask_mut(&mut self, l: PathHandle) -> &mut [u64] {
        &mut self.path_mut(l).mask
    }

    fn ops(&self) -> OpCounts {
        self.ops
    }

    fn reset_ops(&mut self) {
        self.ops = OpCounts::default();
    }
}

/// (8,4) polar code, frozen {0, 1, 2, 4}.
pub fn polar_8_4() -> CodeSpec {
    CodeSpec::new(3, [0, 1, 2, 4].into_iter().map(ConstraintRow::frozen).collect()).unwrap()
}

/// (16,8) polar code under the usual reliability order of length 16.
pub fn polar_16_8() -> CodeSpec {
    CodeSpec::new(4, [0, 1, 2, 3, 4, 5, 6, 8].into_iter().map(ConstraintRow::frozen).collect()).unwrap()
}

/// Least reliable first by Hamming weight, then index.
pub fn weight_order(m: usize) -> ReliabilityOrder {
    let mut order: Vec<usize> = (0..1 << m).collect();
    order.sort_by_key(|&i| (i.count_ones(), i));
    ReliabilityOrder::from_order(order)
}

/// Polar subcode of length `2^m` and dimension `k`: a polar code of
/// dimension `k + extra` designed at 2.5 dB by genie-aided simulation, with
/// `extra` random dynamic checks on its least reliable information symbols.
pub fn random_subcode(m: usize, k: usize, extra: usize, seed: u64) -> CodeSpec {
    let n = 1usize << m;
    let rel = estimate_reliability(m, AwgnChannel::from_eb_n0(2.5, k as f64 / n as f64), 20_000, 2024);
    let base = construct_polar(m, k + extra, &rel).unwrap();
    construct_randomized_subcode(&base, &rel, extra, seed).unwrap()
}

/// Random information word, encoding and channel LLRs for one frame.
pub fn noisy_frame(spec: &CodeSpec, ebn0_db: f64, seed: u64, frame: u64) -> (Vec<u8>, Vec<u8>, Vec<f64>) {
    let ch = AwgnChannel::from_eb_n0(ebn0_db, spec.rate());
    let mut rng = frame_rng(seed, 0, frame);
    let info: Vec<u8> = (0..spec.k()).map(|_| rng.random_range(0..2u8)).collect();
    let cw = encode(spec, &info).codeword;
    let y = ch.transmit(&cw, &mut rng);
    let llrs = ch.llr(&y);
    (info, cw, llrs)
}

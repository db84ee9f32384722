//! SC, min-sum SCL and sequential decoders over the shared datapath.
//!
//! All decoders are generic over [`PathArrays`] so they can be checked
//! against an independent path-storage implementation. Each decoder owns its
//! storage and is reused across frames.

use std::sync::Arc;

use thiserror::Error;

use crate::bias::BiasTable;
use crate::construction::CodeSpec;
use crate::datapath::{hard_decision, penalty_tau, OpCounts, PathArrays, PathHandle, Workspace};
use crate::encoder::{info_of_input, input_of_codeword};
use crate::queue::PriorityQueue;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecoderError {
    #[error("list size must be at least 1")]
    EmptyList,
    #[error("invalid sequential decoder parameters: L={max_visits}, D={capacity} (need L >= 1, D >= 2)")]
    InvalidSeqConfig { max_visits: usize, capacity: usize },
    #[error("bias table is for m={table}, code has m={code}")]
    BiasMismatch { table: usize, code: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    Decoded,
    /// The sequential decoder's queue ran empty before a full path was popped.
    Abandoned,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeStats {
    /// Path extensions; for the sequential decoder the number of pops that
    /// extended a path (the final pop of a complete path is not counted).
    pub iterations: u64,
    /// `t_φ`: pops per phase (sequential decoder only).
    pub pops_per_phase: Vec<u32>,
    pub ops: OpCounts,
    /// Largest queue size (sequential) or number of active paths (SC/SCL).
    pub peak_queue: usize,
    pub killed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub codeword: Vec<u8>,
    pub info: Vec<u8>,
    /// Accumulated penalty `R` of the returned path.
    pub score: f64,
    pub status: DecodeStatus,
    pub stats: DecodeStats,
}

impl DecodeResult {
    fn decoded(spec: &CodeSpec, codeword: Vec<u8>, score: f64, stats: DecodeStats) -> Self {
        let info = info_of_input(spec, &input_of_codeword(&codeword));
        Self {
            codeword,
            info,
            score,
            status: DecodeStatus::Decoded,
            stats,
        }
    }

    fn abandoned(spec: &CodeSpec, stats: DecodeStats) -> Self {
        Self {
            codeword: vec![0; spec.n()],
            info: vec![0; spec.k()],
            score: f64::NEG_INFINITY,
            status: DecodeStatus::Abandoned,
            stats,
        }
    }
}

/// Value of the frozen symbol at `phase` given a path's accumulator bits.
#[inline]
pub fn evaluate_dyn_frozen(spec: &CodeSpec, mask: &[u64], phase: usize) -> u8 {
    match spec.dynamic_slot_at(phase) {
        Some(s) => ((mask[s / 64] >> (s % 64)) & 1) as u8,
        None => 0,
    }
}

/// Folds the decided bit `u_phase` into every dynamic row listing it.
#[inline]
pub fn update_dyn_frozen(spec: &CodeSpec, mask: &mut [u64], phase: usize, bit: u8) {
    if bit & 1 == 1 {
        for &s in spec.rows_listing(phase) {
            mask[s as usize / 64] ^= 1 << (s % 64);
        }
    }
}

fn check_arrays<P: PathArrays>(arrays: &P, spec: &CodeSpec) {
    assert_eq!(arrays.m(), spec.m(), "path storage built for a different length");
}

fn check_mask<P: PathArrays>(arrays: &P, spec: &CodeSpec, root: PathHandle) {
    assert!(arrays.mask(root).len() * 64 >= spec.num_dynamic(), "mask too short for the code");
}

/// Decides `bit` at the current phase of `l` and advances the path.
fn extend<P: PathArrays>(arrays: &mut P, spec: &CodeSpec, l: PathHandle, bit: u8, penalty: f64) {
    let phase = arrays.state(l).phase;
    arrays.decide(l, phase, bit).expect("partial-sum pool sized for capacity");
    update_dyn_frozen(spec, arrays.mask_mut(l), phase, bit);
    let st = arrays.state_mut(l);
    st.phase += 1;
    st.penalty += penalty;
}

/// Storage sized for `spec` with room for `capacity` paths.
pub fn workspace_for(spec: &CodeSpec, capacity: usize) -> Workspace {
    Workspace::new(spec.m(), capacity, spec.num_dynamic())
}

/// Successive cancellation along a fixed input vector, exposing every `S_m^{(φ)}`.
#[derive(Debug, Clone)]
pub struct GenieSc {
    ws: Workspace,
    llrs: Vec<f64>,
}

impl GenieSc {
    pub fn new(m: usize) -> Self {
        Self {
            ws: Workspace::new(m, 1, 0),
            llrs: Vec::with_capacity(1 << m),
        }
    }

    /// Returns `S_m^{(φ)}` for every phase when the decoder is forced to follow `input`.
    pub fn run(&mut self, llrs: &[f64], input: &[u8]) -> &[f64] {
        let l = self.ws.start(llrs).expect("length checked by caller");
        self.llrs.clear();
        for (phase, &bit) in input.iter().enumerate() {
            let s = self.ws.calc_s(l, phase).expect("single path");
            self.llrs.push(s);
            self.ws.decide(l, phase, bit).expect("single path");
        }
        &self.llrs
    }
}

#[derive(Debug, Clone)]
pub struct ScDecoder<P: PathArrays = Workspace> {
    arrays: P,
}

impl ScDecoder<Workspace> {
    pub fn new(spec: &CodeSpec) -> Self {
        Self::with_arrays(workspace_for(spec, 1))
    }
}

impl<P: PathArrays> ScDecoder<P> {
    pub fn with_arrays(arrays: P) -> Self {
        Self { arrays }
    }

    pub fn decode(&mut self, spec: &CodeSpec, llrs: &[f64]) -> DecodeResult {
        check_arrays(&self.arrays, spec);
        let a = &mut self.arrays;
        a.reset_ops();
        let mut decision_ops = OpCounts::default();
        let l = a.start(llrs).expect("LLR length");
        check_mask(a, spec, l);
        for phase in 0..spec.n() {
            let s = a.calc_s(l, phase).expect("single path");
            let bit = if spec.is_frozen(phase) {
                evaluate_dyn_frozen(spec, a.mask(l), phase)
            } else {
                hard_decision(s)
            };
            let tau = penalty_tau(s, bit);
            decision_ops.comparisons += 1;
            decision_ops.additions += u64::from(tau != 0.0);
            extend(a, spec, l, bit, tau);
        }
        let mut stats = DecodeStats {
            iterations: spec.n() as u64,
            peak_queue: 1,
            ops: a.ops(),
            ..Default::default()
        };
        stats.ops += decision_ops;
        DecodeResult::decoded(spec, a.codeword(l).to_vec(), a.state(l).penalty, stats)
    }
}

pub fn sc_decode(llrs: &[f64], spec: &CodeSpec) -> DecodeResult {
    ScDecoder::new(spec).decode(spec, llrs)
}

/// Min-sum list decoder keeping the `list_size` paths with largest `R`.
#[derive(Debug, Clone)]
pub struct SclDecoder<P: PathArrays = Workspace> {
    arrays: P,
    list_size: usize,
    paths: Vec<PathHandle>,
    llr: Vec<f64>,
    candidates: Vec<(f64, usize, u8)>,
}

impl SclDecoder<Workspace> {
    pub fn new(spec: &CodeSpec, list_size: usize) -> Result<Self, DecoderError> {
        if list_size == 0 {
            return Err(DecoderError::EmptyList);
        }
        Ok(Self::with_arrays(workspace_for(spec, list_size), list_size))
    }
}

impl<P: PathArrays> SclDecoder<P> {
    pub fn with_arrays(arrays: P, list_size: usize) -> Self {
        assert!(list_size >= 1 && arrays.capacity() >= list_size);
        Self {
            arrays,
            list_size,
            paths: Vec::new(),
            llr: Vec::new(),
            candidates: Vec::new(),
        }
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn decode(&mut self, spec: &CodeSpec, llrs: &[f64]) -> DecodeResult {
        check_arrays(&self.arrays, spec);
        let a = &mut self.arrays;
        a.reset_ops();
        let mut extra = OpCounts::default();
        let mut killed = 0u64;
        let mut peak = 1usize;
        self.paths.clear();
        self.paths.push(a.start(llrs).expect("LLR length"));
        check_mask(a, spec, self.paths[0]);

        for phase in 0..spec.n() {
            self.llr.clear();
            for &l in &self.paths {
                self.llr.push(a.calc_s(l, phase).expect("within capacity"));
            }
            extra.comparisons += self.paths.len() as u64;
            if spec.is_frozen(phase) {
                for (&l, &s) in self.paths.iter().zip(&self.llr) {
                    let bit = evaluate_dyn_frozen(spec, a.mask(l), phase);
                    let tau = penalty_tau(s, bit);
                    extra.additions += u64::from(tau != 0.0);
                    extend(a, spec, l, bit, tau);
                }
                continue;
            }

            // candidate order before sorting: path order, hard decision first
            self.candidates.clear();
            for (i, (&l, &s)) in self.paths.iter().zip(&self.llr).enumerate() {
                let r = a.state(l).penalty;
                let v = hard_decision(s);
                self.candidates.push((r, i, v));
                self.candidates.push((r - s.abs(), i, v ^ 1));
            }
            extra.additions += self.paths.len() as u64;
            let mut cmp = 0u64;
            self.candidates.sort_by(|x, y| {
                cmp += 1;
                y.0.total_cmp(&x.0)
            });
            extra.comparisons += cmp;
            self.candidates.truncate(self.list_size);

            let mut uses = vec![0u8; self.paths.len()];
            for &(_, i, _) in &self.candidates {
                uses[i] += 1;
            }
            for (i, &u) in uses.iter().enumerate() {
                if u == 0 {
                    a.kill_path(self.paths[i]);
                    killed += 1;
                }
            }
            // first use of a path keeps it, the second gets a clone taken
            // before either decision is written
            let mut clones: Vec<Option<PathHandle>> = vec![None; self.paths.len()];
            for (i, &u) in uses.iter().enumerate() {
                if u == 2 {
                    clones[i] = Some(a.clone_path(self.paths[i]).expect("list capacity"));
                }
            }
            let mut taken = vec![false; self.paths.len()];
            let mut next = Vec::with_capacity(self.candidates.len());
            for &(r, i, bit) in &self.candidates {
                let l = if taken[i] { clones[i].expect("cloned") } else { self.paths[i] };
                taken[i] = true;
                let delta = r - a.state(l).penalty;
                extend(a, spec, l, bit, delta);
                a.state_mut(l).penalty = r;
                next.push(l);
            }
            self.paths = next;
            peak = peak.max(self.paths.len());
        }

        let best = self
            .paths
            .iter()
            .copied()
            .reduce(|b, l| if a.state(l).penalty > a.state(b).penalty { l } else { b })
            .expect("list is never empty");
        extra.comparisons += self.paths.len() as u64 - 1;
        let mut stats = DecodeStats {
            iterations: spec.n() as u64,
            ops: a.ops(),
            peak_queue: peak,
            killed,
            ..Default::default()
        };
        stats.ops += extra;
        let result = DecodeResult::decoded(spec, a.codeword(best).to_vec(), a.state(best).penalty, stats);
        for &l in &self.paths {
            a.kill_path(l);
        }
        self.paths.clear();
        result
    }
}

pub fn scl_decode(llrs: &[f64], spec: &CodeSpec, list_size: usize) -> Result<DecodeResult, DecoderError> {
    Ok(SclDecoder::new(spec, list_size)?.decode(spec, llrs))
}

/// Parameters of the sequential decoder.
#[derive(Debug, Clone)]
pub struct SeqConfig {
    /// `L`: maximum number of pops per phase.
    pub max_visits: usize,
    /// `D`: priority queue capacity.
    pub capacity: usize,
    pub bias: Arc<BiasTable>,
}

impl SeqConfig {
    pub fn new(max_visits: usize, capacity: usize, bias: Arc<BiasTable>) -> Result<Self, DecoderError> {
        if max_visits < 1 || capacity < 2 {
            return Err(DecoderError::InvalidSeqConfig { max_visits, capacity });
        }
        Ok(Self {
            max_visits,
            capacity,
            bias,
        })
    }
}

/// Stack decoder: best-first search on `M = R - Ψ(φ)` with at most `L` pops
/// per phase and at most `D` queued paths.
#[derive(Debug, Clone)]
pub struct SeqDecoder<P: PathArrays = Workspace> {
    arrays: P,
    cfg: SeqConfig,
    queue: PriorityQueue,
}

impl SeqDecoder<Workspace> {
    pub fn new(spec: &CodeSpec, cfg: SeqConfig) -> Result<Self, DecoderError> {
        let arrays = workspace_for(spec, cfg.capacity);
        Self::with_arrays(arrays, cfg)
    }
}

impl<P: PathArrays> SeqDecoder<P> {
    pub fn with_arrays(arrays: P, cfg: SeqConfig) -> Result<Self, DecoderError> {
        if cfg.max_visits < 1 || cfg.capacity < 2 {
            return Err(DecoderError::InvalidSeqConfig {
                max_visits: cfg.max_visits,
                capacity: cfg.capacity,
            });
        }
        if cfg.bias.m() != arrays.m() {
            return Err(DecoderError::BiasMismatch {
                table: cfg.bias.m(),
                code: arrays.m(),
            });
        }
        assert!(arrays.capacity() >= cfg.capacity);
        Ok(Self {
            queue: PriorityQueue::new(cfg.capacity),
            arrays,
            cfg,
        })
    }

    pub fn config(&self) -> &SeqConfig {
        &self.cfg
    }

    pub fn decode(&mut self, spec: &CodeSpec, llrs: &[f64]) -> DecodeResult {
        check_arrays(&self.arrays, spec);
        let n = spec.n();
        let (big_l, big_d) = (self.cfg.max_visits, self.cfg.capacity);
        let psi = &self.cfg.bias;
        let a = &mut self.arrays;
        let q = &mut self.queue;
        a.reset_ops();
        q.clear();
        q.reset_comparisons();
        let mut extra = OpCounts::default();
        let mut visits = vec![0u32; n];
        let mut iterations = 0u64;
        let mut killed = 0u64;

        let root = a.start(llrs).expect("LLR length");
        check_mask(a, spec, root);
        q.push(0.0, 0, root);
        let mut peak = 1usize;

        let outcome = loop {
            let Some(top) = q.pop_max() else {
                break None;
            };
            let l = top.path;
            let phase = a.state(l).phase;
            debug_assert_eq!(top.score, a.state(l).penalty - psi.psi(phase));
            if phase == n {
                break Some(l);
            }
            visits[phase] += 1;
            iterations += 1;
            assert!(
                iterations <= (big_l * n) as u64,
                "sequential decoder exceeded L*n = {} iterations",
                big_l * n
            );

            let s = a.calc_s(l, phase).expect("workspace capacity D");
            let next_psi = psi.psi(phase + 1);
            if spec.is_frozen(phase) {
                let bit = evaluate_dyn_frozen(spec, a.mask(l), phase);
                let tau = penalty_tau(s, bit);
                extra.comparisons += 1;
                extra.additions += u64::from(tau != 0.0);
                extend(a, spec, l, bit, tau);
                q.push(a.state(l).penalty - next_psi, (phase + 1) as u32, l);
            } else {
                if a.active_paths() >= big_d - 1 {
                    if let Some(worst) = q.evict_min() {
                        a.kill_path(worst.path);
                        killed += 1;
                    }
                }
                let fork = a.clone_path(l).expect("workspace capacity D");
                let v = hard_decision(s);
                extra.comparisons += 1;
                extra.additions += 1;
                extend(a, spec, l, v, 0.0);
                extend(a, spec, fork, v ^ 1, -s.abs());
                let depth = (phase + 1) as u32;
                q.push_pair(
                    (a.state(l).penalty - next_psi, depth, l),
                    (a.state(fork).penalty - next_psi, depth, fork),
                );
            }
            peak = peak.max(q.len());

            if visits[phase] as usize >= big_l {
                for e in q.remove_where(|e| e.phase as usize <= phase) {
                    a.kill_path(e.path);
                    killed += 1;
                }
            }
        };

        extra.comparisons += q.comparisons();
        let mut stats = DecodeStats {
            iterations,
            pops_per_phase: visits,
            ops: a.ops(),
            peak_queue: peak,
            killed,
        };
        stats.ops += extra;
        match outcome {
            Some(l) => DecodeResult::decoded(spec, a.codeword(l).to_vec(), a.state(l).penalty, stats),
            None => DecodeResult::abandoned(spec, stats),
        }
    }
}

pub fn seq_decode(llrs: &[f64], spec: &CodeSpec, cfg: &SeqConfig) -> Result<DecodeResult, DecoderError> {
    Ok(SeqDecoder::new(spec, cfg.clone())?.decode(spec, llrs))
}

//! Bias function `Ψ(φ)`: the expected accumulated penalty of the correct
//! path after `φ` decisions.
//!
//! Two estimators are provided. Density evolution tracks the distribution of
//! the min-sum LLRs on a uniform lattice, which both kernels preserve: `Q`
//! maps lattice points to lattice points and `P` (with the correct bit 0)
//! adds them. Monte Carlo runs a genie-aided SC decoder on the all-zero
//! codeword.
//!
//! File format:
//!
//! ```text
//! bias v1 m=2 sigma=0.8 method=de a=60 h=0.0625
//! 0 0
//! 1 -0.61
//! ...
//! ```
//!
//! `n + 1` lines `φ value`, optionally followed by a standard error.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::channel::{frame_rng, AwgnChannel};
use crate::datapath::penalty_tau;
use crate::decoders::GenieSc;

#[derive(Debug, Error)]
pub enum BiasError {
    #[error("invalid grid: a={a}, h={h} (need a > 0, h > 0, a/h integral)")]
    InvalidGrid { a: f64, h: f64 },
    #[error("frame count must be positive")]
    NoFrames,
    #[error("grid overflow: {mass:e} of probability beyond -a/2 at a={a}")]
    GridOverflow { a: f64, mass: f64 },
    #[error("bias table is for m={found}, expected m={expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("bias table is for sigma={found}, expected sigma={expected}")]
    ChannelMismatch { expected: f64, found: f64 },
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Distribution on the lattice `{-a, -a + h, ..., a}`, stored as point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedCdf {
    a: f64,
    h: f64,
    pmf: Vec<f64>,
}

fn half_points(a: f64, h: f64) -> Result<usize, BiasError> {
    let r = a / h;
    if !(a > 0.0 && h > 0.0 && r.is_finite() && (r - r.round()).abs() < 1e-9 && r >= 1.0) {
        return Err(BiasError::InvalidGrid { a, h });
    }
    Ok(r.round() as usize)
}

impl DiscretizedCdf {
    pub fn from_pmf(a: f64, h: f64, pmf: Vec<f64>) -> Result<Self, BiasError> {
        let k0 = half_points(a, h)?;
        assert_eq!(pmf.len(), 2 * k0 + 1, "pmf length does not match grid");
        Ok(Self { a, h, pmf })
    }

    /// Point mass at `x`, rounded to the nearest grid point and clamped.
    pub fn point_mass(a: f64, h: f64, x: f64) -> Result<Self, BiasError> {
        let k0 = half_points(a, h)?;
        let mut pmf = vec![0.0; 2 * k0 + 1];
        pmf[Self::index_of(k0, h, x)] = 1.0;
        Ok(Self { a, h, pmf })
    }

    /// `N(mean, var)` rounded to the grid; tails beyond the edges are folded
    /// onto the edge points.
    pub fn gaussian(a: f64, h: f64, mean: f64, var: f64) -> Result<Self, BiasError> {
        let k0 = half_points(a, h)?;
        let sd = var.sqrt();
        let cdf = |x: f64| 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2));
        let upper = |x: f64| 0.5 * erfc((x - mean) / (sd * std::f64::consts::SQRT_2));
        let k = 2 * k0 + 1;
        let mut pmf = Vec::with_capacity(k);
        for i in 0..k {
            let x = (i as f64 - k0 as f64) * h;
            let (lo, hi) = (x - 0.5 * h, x + 0.5 * h);
            let p = if i == 0 {
                cdf(hi)
            } else if i == k - 1 {
                upper(lo)
            } else if x < mean {
                cdf(hi) - cdf(lo)
            } else {
                // subtract upper tails on the right for precision
                upper(lo) - upper(hi)
            };
            pmf.push(p.max(0.0));
        }
        Ok(Self { a, h, pmf })
    }

    /// Channel LLR distribution `N(2/σ², 4/σ²)` for the all-zero codeword.
    pub fn channel(a: f64, h: f64, sigma: f64) -> Result<Self, BiasError> {
        let s2 = sigma * sigma;
        Self::gaussian(a, h, 2.0 / s2, 4.0 / s2)
    }

    fn index_of(k0: usize, h: f64, x: f64) -> usize {
        let i = (x / h).round() + k0 as f64;
        i.clamp(0.0, (2 * k0) as f64) as usize
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn k0(&self) -> usize {
        (self.pmf.len() - 1) / 2
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let (k0, h) = (self.k0() as f64, self.h);
        (0..self.pmf.len()).map(move |i| (i as f64 - k0) * h)
    }

    /// CDF values at the grid points.
    pub fn values(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.pmf
            .iter()
            .map(|p| {
                acc += p;
                acc.min(1.0)
            })
            .collect()
    }

    /// `F(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k0 = self.k0() as f64;
        let idx = (x / self.h + k0 + 1e-9).floor();
        if idx < 0.0 {
            return 0.0;
        }
        let last = (idx as usize).min(self.pmf.len() - 1);
        self.pmf[..=last].iter().sum::<f64>().min(1.0)
    }

    /// `∫_{-∞}^0 F(x) dx = E[max(-X, 0)]`, exact for the step CDF.
    pub fn negative_tail_integral(&self) -> f64 {
        let k0 = self.k0();
        (0..k0).map(|i| self.pmf[i] * (k0 - i) as f64 * self.h).sum()
    }

    /// Probability at or below `-a/2`.
    pub fn low_mass(&self) -> f64 {
        let k0 = self.k0();
        self.pmf[..=k0 / 2].iter().sum()
    }
}

/// Distribution of `Q(X₁, X₂)` for independent copies of `X`.
pub fn cdf_evolve_even(f: &DiscretizedCdf) -> DiscretizedCdf {
    let k0 = f.k0();
    let p = &f.pmf;
    let k = p.len();
    // pos[j] = P(X >= j h), neg[j] = P(X <= -j h) for j >= 1
    let mut pos = vec![0.0; k0 + 2];
    let mut neg = vec![0.0; k0 + 2];
    for j in (1..=k0).rev() {
        pos[j] = pos[j + 1] + p[k0 + j];
        neg[j] = neg[j + 1] + p[k0 - j];
    }
    // P(Y >= j h) = pos² + neg², P(Y <= -j h) = 2 pos neg
    let t = |j: usize| pos[j] * pos[j] + neg[j] * neg[j];
    let u = |j: usize| 2.0 * pos[j] * neg[j];
    let mut out = vec![0.0; k];
    for j in 1..=k0 {
        out[k0 + j] = (t(j) - t(j + 1)).max(0.0);
        out[k0 - j] = (u(j) - u(j + 1)).max(0.0);
    }
    out[k0] = (1.0 - t(1) - u(1)).max(0.0);
    DiscretizedCdf {
        a: f.a,
        h: f.h,
        pmf: out,
    }
}

/// FFT plans for the self-convolution of distributions on one grid.
pub struct Convolver {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
}

impl Convolver {
    pub fn new(points: usize) -> Self {
        let size = (2 * points - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            buf: vec![Complex::default(); size],
        }
    }

    /// Distribution of `X₁ + X₂`, re-clamped to the grid with the overflow
    /// folded onto the edge points.
    pub fn evolve_odd(&mut self, f: &DiscretizedCdf) -> DiscretizedCdf {
        let k = f.pmf.len();
        assert!(2 * k - 1 <= self.size, "convolver built for a smaller grid");
        let k0 = f.k0();
        for (b, &p) in self.buf.iter_mut().zip(f.pmf.iter().chain(std::iter::repeat(&0.0))) {
            *b = Complex::new(p, 0.0);
        }
        self.forward.process(&mut self.buf);
        self.buf.iter_mut().for_each(|z| *z = *z * *z);
        self.inverse.process(&mut self.buf);
        let scale = 1.0 / self.size as f64;
        let mut out = vec![0.0; k];
        // sum index t represents (t - 2 k0) h
        for t in 0..2 * k - 1 {
            let mass = (self.buf[t].re * scale).max(0.0);
            let j = (t as isize - k0 as isize).clamp(0, k as isize - 1) as usize;
            out[j] += mass;
        }
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= total);
        DiscretizedCdf {
            a: f.a,
            h: f.h,
            pmf: out,
        }
    }
}

/// Distribution of `X₁ + X₂` for independent copies of `X`.
pub fn cdf_evolve_odd(f: &DiscretizedCdf) -> DiscretizedCdf {
    Convolver::new(f.pmf.len()).evolve_odd(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasMethod {
    DensityEvolution,
    MonteCarlo,
    /// `Ψ ≡ 0`, for testing.
    Zero,
}

impl BiasMethod {
    pub fn tag(self) -> &'static str {
        match self {
            BiasMethod::DensityEvolution => "de",
            BiasMethod::MonteCarlo => "mc",
            BiasMethod::Zero => "zero",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "de" => Some(BiasMethod::DensityEvolution),
            "mc" => Some(BiasMethod::MonteCarlo),
            "zero" => Some(BiasMethod::Zero),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    m: usize,
    sigma: f64,
    method: BiasMethod,
    psi: Vec<f64>,
    std_err: Option<Vec<f64>>,
    /// Extra header fields (grid or frame parameters), as `key=value` words.
    params: Vec<(String, String)>,
}

impl BiasTable {
    pub fn new(m: usize, sigma: f64, method: BiasMethod, psi: Vec<f64>) -> Self {
        assert_eq!(psi.len(), (1 << m) + 1);
        Self {
            m,
            sigma,
            method,
            psi,
            std_err: None,
            params: Vec::new(),
        }
    }

    /// `Ψ ≡ 0`; the sequential decoder then ranks paths by `R` alone.
    pub fn zero(m: usize) -> Self {
        Self::new(m, 0.0, BiasMethod::Zero, vec![0.0; (1 << m) + 1])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn method(&self) -> BiasMethod {
        self.method
    }

    #[inline]
    pub fn psi(&self, phase: usize) -> f64 {
        self.psi[phase]
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    pub fn std_err(&self) -> Option<&[f64]> {
        self.std_err.as_deref()
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Rejects a table computed for another length or channel. Sigmas must
    /// agree to a relative `1e-9`, since they pass through decimal text.
    pub fn check(&self, m: usize, sigma: f64) -> Result<(), BiasError> {
        if self.m != m {
            return Err(BiasError::LengthMismatch {
                expected: m,
                found: self.m,
            });
        }
        if self.method != BiasMethod::Zero && (self.sigma - sigma).abs() > 1e-9 * sigma.abs() {
            return Err(BiasError::ChannelMismatch {
                expected: sigma,
                found: self.sigma,
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("bias v1 m={} sigma={} method={}", self.m, self.sigma, self.method.tag());
        for (k, v) in &self.params {
            write!(s, " {k}={v}").unwrap();
        }
        s.push('\n');
        for (i, v) in self.psi.iter().enumerate() {
            match &self.std_err {
                Some(se) => writeln!(s, "{i} {v} {}", se[i]).unwrap(),
                None => writeln!(s, "{i} {v}").unwrap(),
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, BiasError> {
        let err = |line: usize, reason: &str| BiasError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let mut words = header.split_whitespace();
        if words.next() != Some("bias") || words.next() != Some("v1") {
            return Err(err(1, "expected header `bias v1`"));
        }
        let (mut m, mut sigma, mut method) = (None, None, None);
        let mut params = Vec::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| err(1, "header field without `=`"))?;
            match k {
                "m" => m = Some(v.parse::<usize>().map_err(|_| err(1, "bad m"))?),
                "sigma" => sigma = Some(v.parse::<f64>().map_err(|_| err(1, "bad sigma"))?),
                "method" => method = Some(BiasMethod::from_tag(v).ok_or_else(|| err(1, "unknown method"))?),
                _ => params.push((k.to_string(), v.to_string())),
            }
        }
        let m = m.ok_or_else(|| err(1, "missing m"))?;
        if m > 24 {
            return Err(err(1, "m too large"));
        }
        let sigma = sigma.ok_or_else(|| err(1, "missing sigma"))?;
        let method = method.ok_or_else(|| err(1, "missing method"))?;
        let n = 1usize << m;
        let mut psi = Vec::with_capacity(n + 1);
        let mut se = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let mut f = line.split_whitespace();
            let idx: usize = f
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(lineno, "bad phase"))?;
            if idx != psi.len() {
                return Err(err(lineno, "phases out of order"));
            }
            let v: f64 = f
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(lineno, "bad value"))?;
            psi.push(v);
            if let Some(t) = f.next() {
                se.push(t.parse::<f64>().map_err(|_| err(lineno, "bad standard error"))?);
            }
            if f.next().is_some() {
                return Err(err(lineno, "trailing fields"));
            }
        }
        if psi.len() != n + 1 {
            return Err(err(0, &format!("expected {} values, found {}", n + 1, psi.len())));
        }
        if !se.is_empty() && se.len() != psi.len() {
            return Err(err(0, "standard errors on some lines only"));
        }
        Ok(Self {
            m,
            sigma,
            method,
            psi,
            std_err: (!se.is_empty()).then_some(se),
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BiasError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BiasError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Loads a table and checks it against the code length and channel.
    pub fn load_for(path: impl AsRef<Path>, m: usize, sigma: f64) -> Result<Self, BiasError> {
        let t = Self::load(path)?;
        t.check(m, sigma)?;
        Ok(t)
    }
}

/// Density evolution grid. Defaults: `a = 60`, `h = 1/16`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeParams {
    pub a: f64,
    pub h: f64,
    /// Largest tolerated probability at or below `-a/2` in any evolved
    /// distribution before the grid is doubled.
    pub tolerance: f64,
    pub max_widenings: usize,
}

impl Default for DeParams {
    fn default() -> Self {
        Self {
            a: 60.0,
            h: 1.0 / 16.0,
            tolerance: 1e-6,
            max_widenings: 3,
        }
    }
}

/// `Ψ` by density evolution of the min-sum LLR distributions.
///
/// Phase `φ` is reached through layers `1..=m`; at layer `λ` bit `m - λ` of
/// `φ` selects the odd (sum) transform. Shared prefixes are evolved once.
/// Positive mass saturating at `+a` is harmless since it never produces
/// negative LLRs; negative mass near `-a` triggers a wider grid.
pub fn bias_de(m: usize, channel: AwgnChannel, params: DeParams) -> Result<BiasTable, BiasError> {
    let mut a = params.a;
    let mut widenings = 0;
    loop {
        match de_tails(m, channel.sigma(), a, params.h, params.tolerance) {
            Ok(tails) => {
                let mut psi = Vec::with_capacity(tails.len() + 1);
                psi.push(0.0);
                let mut acc = 0.0;
                for t in tails {
                    acc -= t;
                    psi.push(acc);
                }
                let mut table = BiasTable::new(m, channel.sigma(), BiasMethod::DensityEvolution, psi);
                table.params = vec![("a".into(), a.to_string()), ("h".into(), params.h.to_string())];
                return Ok(table);
            }
            Err(BiasError::GridOverflow { .. }) if widenings < params.max_widenings => {
                a *= 2.0;
                widenings += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn de_tails(m: usize, sigma: f64, a: f64, h: f64, tol: f64) -> Result<Vec<f64>, BiasError> {
    let root = DiscretizedCdf::channel(a, h, sigma)?;
    let mut conv = Convolver::new(root.pmf.len());
    let mut tails = vec![0.0; 1 << m];
    fn walk(
        f: &DiscretizedCdf,
        depth: usize,
        m: usize,
        prefix: usize,
        tol: f64,
        conv: &mut Convolver,
        tails: &mut [f64],
    ) -> Result<(), BiasError> {
        if depth == m {
            tails[prefix] = f.negative_tail_integral();
            return Ok(());
        }
        for bit in 0..2 {
            let g = if bit == 0 { cdf_evolve_even(f) } else { conv.evolve_odd(f) };
            let low = g.low_mass();
            if low > tol {
                return Err(BiasError::GridOverflow { a: f.a, mass: low });
            }
            walk(&g, depth + 1, m, prefix << 1 | bit, tol, conv, tails)?;
        }
        Ok(())
    }
    walk(&root, 0, m, 0, tol, &mut conv, &mut tails)?;
    Ok(tails)
}

/// `Ψ` as the sample mean of the genie-aided correct-path penalty.
///
/// Frames use independent counter-derived streams and partial sums are
/// merged in frame order, so the result does not depend on thread count.
pub fn bias_mc(m: usize, channel: AwgnChannel, frames: usize, seed: u64) -> Result<BiasTable, BiasError> {
    if frames == 0 {
        return Err(BiasError::NoFrames);
    }
    let n = 1usize << m;
    const CHUNK: usize = 512;
    let zeros = vec![0u8; n];
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..frames.div_ceil(CHUNK))
        .into_par_iter()
        .map_init(
            || (GenieSc::new(m), Vec::new()),
            |(genie, llrs), chunk| {
                let mut sum = vec![0.0; n + 1];
                let mut sq = vec![0.0; n + 1];
                for f in chunk * CHUNK..((chunk + 1) * CHUNK).min(frames) {
                    let mut rng = frame_rng(seed, u64::MAX - 1, f as u64);
                    channel.transmit_into(&zeros, &mut rng, llrs);
                    channel.llr_in_place(llrs);
                    let mut r = 0.0;
                    for (phase, &s) in genie.run(llrs, &zeros).iter().enumerate() {
                        r += penalty_tau(s, 0);
                        sum[phase + 1] += r;
                        sq[phase + 1] += r * r;
                    }
                }
                (sum, sq)
            },
        )
        .collect();
    let mut sum = vec![0.0; n + 1];
    let mut sq = vec![0.0; n + 1];
    for (s, q) in partial {
        sum.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        sq.iter_mut().zip(q).for_each(|(a, b)| *a += b);
    }
    let nf = frames as f64;
    let psi: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let se = psi
        .iter()
        .zip(&sq)
        .map(|(mean, q)| {
            if frames < 2 {
                return 0.0;
            }
            let var = ((q - nf * mean * mean) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
        .collect();
    let mut table = BiasTable::new(m, channel.sigma(), BiasMethod::MonteCarlo, psi);
    table.std_err = Some(se);
    table.params = vec![("frames".into(), frames.to_string()), ("seed".into(), seed.to_string())];
    Ok(table)
}

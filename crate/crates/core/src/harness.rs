//! Monte-Carlo FER/BER campaigns over a list of Eb/N0 points.
//!
//! Frames are simulated in parallel batches but folded into the report in
//! frame order, stopping at exactly the frame that reaches the error target.
//! Each frame draws its information word and noise from its own seeded
//! stream, so reports depend only on the campaign and the master seed, never
//! on the worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::bias::{bias_de, bias_mc, BiasError, BiasTable, DeParams};
use crate::channel::{eb_n0_to_sigma, frame_rng, random_bits, AwgnChannel};
use crate::construction::{CodeSpec, ConstructionError};
use crate::decoders::{
    DecodeResult, DecodeStatus, DecoderError, ScDecoder, SclDecoder, SeqConfig, SeqDecoder,
};
use crate::encoder::encode;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("SNR list is empty")]
    NoSnrPoints,
    #[error("stop rule needs min_errors >= 1 and max_frames >= 1")]
    InvalidStopRule,
    #[error("worker count must be positive")]
    NoWorkers,
    #[error("the sequential decoder needs a bias table (Psi); pass one or choose de, mc or zero")]
    MissingBias,
    #[error("no bias table for {snr_db} dB (sigma={sigma})")]
    NoTableForSnr { snr_db: f64, sigma: f64 },
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Bias(#[from] BiasError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecoderKind {
    Sc,
    Scl { list: usize },
    Seq { max_visits: usize, capacity: usize },
}

impl DecoderKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderKind::Sc => "sc",
            DecoderKind::Scl { .. } => "scl",
            DecoderKind::Seq { .. } => "seq",
        }
    }
}

/// Where the sequential decoder's `Ψ` comes from at each SNR point.
#[derive(Debug, Clone)]
pub enum BiasSource {
    Zero,
    DensityEvolution(DeParams),
    MonteCarlo { frames: usize, seed: u64 },
    /// Precomputed tables, matched to SNR points by sigma.
    Tables(Vec<Arc<BiasTable>>),
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub spec: Arc<CodeSpec>,
    pub decoder: DecoderKind,
    pub bias: Option<BiasSource>,
    pub snr_db: Vec<f64>,
    pub min_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Campaign {
    pub const DEFAULT_MIN_ERRORS: u64 = 100;
    pub const DEFAULT_MAX_FRAMES: u64 = 1_000_000;

    pub fn new(spec: Arc<CodeSpec>, decoder: DecoderKind, snr_db: Vec<f64>) -> Self {
        Self {
            spec,
            decoder,
            bias: None,
            snr_db,
            min_errors: Self::DEFAULT_MIN_ERRORS,
            max_frames: Self::DEFAULT_MAX_FRAMES,
            seed: 1,
            workers: 1,
        }
    }

    pub fn sigma_at(&self, snr_db: f64) -> f64 {
        eb_n0_to_sigma(snr_db, self.spec.rate())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.snr_db.is_empty() {
            return Err(HarnessError::NoSnrPoints);
        }
        if self.min_errors == 0 || self.max_frames == 0 {
            return Err(HarnessError::InvalidStopRule);
        }
        if self.workers == 0 {
            return Err(HarnessError::NoWorkers);
        }
        if self.spec.k() == 0 {
            return Err(HarnessError::Config("code has dimension 0".into()));
        }
        match self.decoder {
            DecoderKind::Scl { list: 0 } => return Err(DecoderError::EmptyList.into()),
            DecoderKind::Seq { max_visits, capacity } => {
                if max_visits < 1 || capacity < 2 {
                    return Err(DecoderError::InvalidSeqConfig { max_visits, capacity }.into());
                }
                if self.bias.is_none() {
                    return Err(HarnessError::MissingBias);
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Bias table for every SNR point, or `None` for decoders without one.
    pub fn resolve_bias(&self) -> Result<Vec<Option<Arc<BiasTable>>>, HarnessError> {
        let m = self.spec.m();
        if !matches!(self.decoder, DecoderKind::Seq { .. }) {
            return Ok(vec![None; self.snr_db.len()]);
        }
        let source = self.bias.as_ref().ok_or(HarnessError::MissingBias)?;
        self.snr_db
            .iter()
            .map(|&snr| {
                let sigma = self.sigma_at(snr);
                let ch = AwgnChannel::new(sigma);
                let t = match source {
                    BiasSource::Zero => Arc::new(BiasTable::zero(m)),
                    BiasSource::DensityEvolution(p) => Arc::new(bias_de(m, ch, *p)?),
                    BiasSource::MonteCarlo { frames, seed } => Arc::new(bias_mc(m, ch, *frames, *seed)?),
                    BiasSource::Tables(tables) => tables
                        .iter()
                        .find(|t| t.check(m, sigma).is_ok())
                        .cloned()
                        .ok_or(HarnessError::NoTableForSnr { snr_db: snr, sigma })?,
                };
                Ok(Some(t))
            })
            .collect()
    }
}

/// One decoder of any kind, reusable across frames.
#[derive(Debug, Clone)]
pub enum AnyDecoder {
    Sc(ScDecoder),
    Scl(SclDecoder),
    Seq(SeqDecoder),
}

impl AnyDecoder {
    pub fn new(spec: &CodeSpec, kind: &DecoderKind, bias: Option<Arc<BiasTable>>) -> Result<Self, HarnessError> {
        Ok(match *kind {
            DecoderKind::Sc => AnyDecoder::Sc(ScDecoder::new(spec)),
            DecoderKind::Scl { list } => AnyDecoder::Scl(SclDecoder::new(spec, list)?),
            DecoderKind::Seq { max_visits, capacity } => {
                let bias = bias.ok_or(HarnessError::MissingBias)?;
                AnyDecoder::Seq(SeqDecoder::new(spec, SeqConfig::new(max_visits, capacity, bias)?)?)
            }
        })
    }

    pub fn decode(&mut self, spec: &CodeSpec, llrs: &[f64]) -> DecodeResult {
        match self {
            AnyDecoder::Sc(d) => d.decode(spec, llrs),
            AnyDecoder::Scl(d) => d.decode(spec, llrs),
            AnyDecoder::Seq(d) => d.decode(spec, llrs),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct FrameOutcome {
    frame_error: bool,
    bit_errors: u64,
    abandoned: bool,
    iterations: u64,
    ops: u64,
    peak: u64,
}

/// Accumulated statistics of one SNR point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub sigma: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub info_bits: u64,
    pub abandoned: u64,
    pub total_iterations: u64,
    pub total_ops: u64,
    pub total_peak: u64,
    pub max_iterations: u64,
    pub max_peak: u64,
}

impl SnrPoint {
    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn fer(&self) -> f64 {
        Self::ratio(self.frame_errors, self.frames)
    }

    pub fn ber(&self) -> f64 {
        Self::ratio(self.bit_errors, self.info_bits)
    }

    pub fn avg_iterations(&self) -> f64 {
        Self::ratio(self.total_iterations, self.frames)
    }

    pub fn avg_ops(&self) -> f64 {
        Self::ratio(self.total_ops, self.frames)
    }

    pub fn avg_peak(&self) -> f64 {
        Self::ratio(self.total_peak, self.frames)
    }

    /// Binomial standard deviation of the FER estimate.
    pub fn fer_sigma(&self) -> f64 {
        let p = self.fer();
        if self.frames == 0 {
            return 0.0;
        }
        (p * (1.0 - p) / self.frames as f64).sqrt()
    }

    /// 95% normal-approximation confidence radius of the FER.
    pub fn fer_radius(&self) -> f64 {
        1.96 * self.fer_sigma()
    }

    pub fn ber_radius(&self) -> f64 {
        let p = self.ber();
        if self.info_bits == 0 {
            return 0.0;
        }
        1.96 * (p * (1.0 - p) / self.info_bits as f64).sqrt()
    }

    fn absorb(&mut self, o: &FrameOutcome, k: usize) {
        self.frames += 1;
        self.frame_errors += u64::from(o.frame_error);
        self.bit_errors += o.bit_errors;
        self.info_bits += k as u64;
        self.abandoned += u64::from(o.abandoned);
        self.total_iterations += o.iterations;
        self.total_ops += o.ops;
        self.total_peak += o.peak;
        self.max_iterations = self.max_iterations.max(o.iterations);
        self.max_peak = self.max_peak.max(o.peak);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimReport {
    pub points: Vec<SnrPoint>,
}

fn simulate_frame(
    spec: &CodeSpec,
    decoder: &mut AnyDecoder,
    channel: AwgnChannel,
    seed: u64,
    stream: u64,
    frame: u64,
    llrs: &mut Vec<f64>,
) -> FrameOutcome {
    let mut rng = frame_rng(seed, stream, frame);
    let info = random_bits(&mut rng, spec.k());
    let tx = encode(spec, &info);
    channel.transmit_into(&tx.codeword, &mut rng, llrs);
    channel.llr_in_place(llrs);
    let r = decoder.decode(spec, llrs);
    let abandoned = r.status == DecodeStatus::Abandoned;
    FrameOutcome {
        frame_error: abandoned || r.codeword != tx.codeword,
        bit_errors: info.iter().zip(&r.info).filter(|(a, b)| a != b).count() as u64,
        abandoned,
        iterations: r.stats.iterations,
        ops: r.stats.ops.total(),
        peak: r.stats.peak_queue as u64,
    }
}

pub fn run_campaign(c: &Campaign) -> Result<SimReport, HarnessError> {
    c.validate()?;
    let tables = c.resolve_bias()?;
    let spec = &*c.spec;
    let mut decoders: Vec<Vec<AnyDecoder>> = Vec::with_capacity(c.snr_db.len());
    for table in &tables {
        decoders.push(
            (0..c.workers)
                .map(|_| AnyDecoder::new(spec, &c.decoder, table.clone()))
                .collect::<Result<_, _>>()?,
        );
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(c.workers).build()?;
    let per_worker = 64u64;
    let batch = per_worker * c.workers as u64;

    let mut report = SimReport::default();
    for (stream, (&snr, workers)) in c.snr_db.iter().zip(decoders.iter_mut()).enumerate() {
        let sigma = c.sigma_at(snr);
        let channel = AwgnChannel::new(sigma);
        let mut point = SnrPoint {
            snr_db: snr,
            sigma,
            ..Default::default()
        };
        let mut next = 0u64;
        'frames: while point.frames < c.max_frames && point.frame_errors < c.min_errors {
            let end = (next + batch).min(c.max_frames);
            let outcomes: Vec<Vec<FrameOutcome>> = pool.install(|| {
                workers
                    .par_iter_mut()
                    .enumerate()
                    .map(|(w, dec)| {
                        let lo = next + w as u64 * per_worker;
                        let hi = (lo + per_worker).min(end);
                        let mut llrs = Vec::with_capacity(spec.n());
                        (lo..hi)
                            .map(|f| simulate_frame(spec, dec, channel, c.seed, stream as u64, f, &mut llrs))
                            .collect()
                    })
                    .collect()
            });
            for o in outcomes.iter().flatten() {
                point.absorb(o, spec.k());
                if point.frame_errors >= c.min_errors || point.frames >= c.max_frames {
                    break 'frames;
                }
            }
            next = end;
        }
        report.points.push(point);
    }
    Ok(report)
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

pub const CSV_HEADER: &str = "snr_db,frames,fer,ber,avg_iters,avg_ops,avg_peak_pq,abandoned";

pub fn emit_csv(report: &SimReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in &report.points {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            format_sig(p.snr_db, 6),
            p.frames,
            format_sig(p.fer(), 6),
            format_sig(p.ber(), 6),
            format_sig(p.avg_iterations(), 6),
            format_sig(p.avg_ops(), 6),
            format_sig(p.avg_peak(), 6),
            p.abandoned
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub snr_db: f64,
    pub frames: u64,
    pub fer: f64,
    pub ber: f64,
    pub avg_iters: f64,
    pub avg_ops: f64,
    pub avg_peak_pq: f64,
    pub abandoned: u64,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, HarnessError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(HarnessError::Config("unexpected CSV header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let bad = || HarnessError::Config(format!("malformed CSV row `{l}`"));
            if f.len() != 8 {
                return Err(bad());
            }
            let real = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            let int = |i: usize| f[i].parse::<u64>().map_err(|_| bad());
            Ok(CsvRow {
                snr_db: real(0)?,
                frames: int(1)?,
                fer: real(2)?,
                ber: real(3)?,
                avg_iters: real(4)?,
                avg_ops: real(5)?,
                avg_peak_pq: real(6)?,
                abandoned: int(7)?,
            })
        })
        .collect()
}

/// Physicists' Gauss–Hermite rule: nodes and weights for `∫ e^{-t²} f(t) dt`.
pub fn gauss_hermite(points: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on the orthonormal recurrence with the usual
    // asymptotic starting guesses
    let n = points;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Information density of one BI-AWGN use as a function of the LLR of the sent bit.
fn info_density(llr: f64) -> f64 {
    // 1 - log2(1 + e^{-L}), stable for both signs
    let softplus = if llr > 0.0 {
        (-llr).exp().ln_1p()
    } else {
        -llr + llr.exp().ln_1p()
    };
    1.0 - softplus / std::f64::consts::LN_2
}

/// Capacity `C` (bits) and dispersion `V` (bits²) of BPSK over AWGN.
pub fn capacity_dispersion(sigma: f64) -> (f64, f64) {
    let (t, w) = gauss_hermite(96);
    let mu = 2.0 / (sigma * sigma);
    let sd = 2.0 / sigma;
    let norm = std::f64::consts::PI.sqrt();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (ti, wi) in t.iter().zip(&w) {
        let i = info_density(mu + std::f64::consts::SQRT_2 * sd * ti);
        m1 += wi * i;
        m2 += wi * i * i;
    }
    let c = m1 / norm;
    (c, (m2 / norm - c * c).max(0.0))
}

/// Normal approximation of the best achievable FER of an `(n, k)` code on
/// BPSK-AWGN at `ebn0_db`: `Q((nC - k + ½ log₂ n) / √(nV))`.
pub fn normal_approximation_fer(n: usize, k: usize, ebn0_db: f64) -> f64 {
    normal_approximation_fer_sigma(n, k, eb_n0_to_sigma(ebn0_db, k as f64 / n as f64))
}

/// Same, at a fixed noise level.
pub fn normal_approximation_fer_sigma(n: usize, k: usize, sigma: f64) -> f64 {
    let (c, v) = capacity_dispersion(sigma);
    let nf = n as f64;
    let arg = (nf * c - k as f64 + 0.5 * nf.log2()) / (nf * v).sqrt();
    0.5 * erfc(arg / std::f64::consts::SQRT_2)
}

/// Campaign file, TOML:
///
/// ```toml
/// spec = "code.txt"          # relative to the file
/// decoder = "seq"            # sc | scl | seq
/// list = 32                  # scl list size
/// max_visits = 32            # seq L
/// capacity = 4096            # seq D, default L·n
/// bias = "de"                # de | mc | zero | comma-separated table files
/// snr_db = [1.0, 1.5, 2.0]
/// min_errors = 100
/// max_frames = 1000000
/// seed = 1
/// workers = 4
/// out = "results.csv"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub spec: PathBuf,
    pub decoder: String,
    pub list: Option<usize>,
    pub max_visits: Option<usize>,
    pub capacity: Option<usize>,
    pub bias: Option<String>,
    pub snr_db: Vec<f64>,
    pub min_errors: Option<u64>,
    pub max_frames: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl CampaignConfig {
    pub const DEFAULT_LIST: usize = 8;
    pub const DEFAULT_MC_FRAMES: usize = 100_000;

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            cfg.spec = dir.join(&cfg.spec);
            cfg.out = cfg.out.map(|o| dir.join(o));
            if let Some(b) = &cfg.bias {
                if !matches!(b.as_str(), "de" | "mc" | "zero") {
                    let joined: Vec<String> = b
                        .split(',')
                        .map(|f| dir.join(f.trim()).to_string_lossy().into_owned())
                        .collect();
                    cfg.bias = Some(joined.join(","));
                }
            }
        }
        Ok(cfg)
    }

    pub fn decoder_kind(&self, n: usize) -> Result<DecoderKind, HarnessError> {
        Ok(match self.decoder.as_str() {
            "sc" => DecoderKind::Sc,
            "scl" => DecoderKind::Scl {
                list: self.list.unwrap_or(Self::DEFAULT_LIST),
            },
            "seq" => {
                let max_visits = self.max_visits.or(self.list).unwrap_or(Self::DEFAULT_LIST);
                DecoderKind::Seq {
                    max_visits,
                    capacity: self.capacity.unwrap_or(max_visits * n),
                }
            }
            other => return Err(HarnessError::Config(format!("unknown decoder `{other}`"))),
        })
    }

    pub fn bias_source(&self) -> Result<Option<BiasSource>, HarnessError> {
        let seed = self.seed.unwrap_or(1);
        Ok(match self.bias.as_deref() {
            None => None,
            Some("de") => Some(BiasSource::DensityEvolution(DeParams::default())),
            Some("mc") => Some(BiasSource::MonteCarlo {
                frames: Self::DEFAULT_MC_FRAMES,
                seed,
            }),
            Some("zero") => Some(BiasSource::Zero),
            Some(files) => Some(BiasSource::Tables(
                files
                    .split(',')
                    .map(|f| BiasTable::load(f.trim()).map(Arc::new))
                    .collect::<Result<_, _>>()?,
            )),
        })
    }

    pub fn to_campaign(&self) -> Result<Campaign, HarnessError> {
        let spec = Arc::new(CodeSpec::load(&self.spec)?);
        let decoder = self.decoder_kind(spec.n())?;
        let c = Campaign {
            decoder,
            bias: self.bias_source()?,
            snr_db: self.snr_db.clone(),
            min_errors: self.min_errors.unwrap_or(Campaign::DEFAULT_MIN_ERRORS),
            max_frames: self.max_frames.unwrap_or(Campaign::DEFAULT_MAX_FRAMES),
            seed: self.seed.unwrap_or(1),
            workers: self.workers.unwrap_or_else(default_workers),
            spec,
        };
        c.validate()?;
        Ok(c)
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::ConstraintRow;

    fn small_spec() -> Arc<CodeSpec> {
        Arc::new(CodeSpec::new(3, [0, 1, 2, 4].into_iter().map(ConstraintRow::frozen).collect()).unwrap())
    }

    #[test]
    fn format_examples() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(1.0, 6), "1");
        assert_eq!(format_sig(0.1234567, 6), "0.123457");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_sig(0.000012345678, 6), "1.23457e-05");
        assert_eq!(format_sig(-2.5, 6), "-2.5");
        assert_eq!(format_sig(0.0001, 6), "0.0001");
        assert_eq!(format_sig(999999.6, 6), "1e+06");
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(emit_csv(&SimReport::default()), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_round_trip() {
        let report = SimReport {
            points: vec![SnrPoint {
                snr_db: 1.5,
                sigma: 0.8,
                frames: 12345,
                frame_errors: 101,
                bit_errors: 333,
                info_bits: 12345 * 64,
                abandoned: 2,
                total_iterations: 12345 * 130 + 7,
                total_ops: 999_999_999,
                total_peak: 55555,
                ..Default::default()
            }],
        };
        let text = emit_csv(&report);
        let rows = parse_csv(&text).unwrap();
        let p = &report.points[0];
        let r = rows[0];
        assert_eq!((r.frames, r.abandoned), (12345, 2));
        for (got, want) in [(r.fer, p.fer()), (r.ber, p.ber()), (r.avg_iters, p.avg_iterations()), (r.avg_ops, p.avg_ops())] {
            assert!((got - want).abs() <= 5e-6 * want.abs());
        }
        // parsing is exact on what was written
        let again = SimReport {
            points: vec![SnrPoint {
                snr_db: r.snr_db,
                frames: 1,
                ..Default::default()
            }],
        };
        assert_eq!(parse_csv(&emit_csv(&again)).unwrap()[0].snr_db, 1.5);
    }

    #[test]
    fn gauss_hermite_moments() {
        let (t, w) = gauss_hermite(40);
        let pi = std::f64::consts::PI;
        let m0: f64 = w.iter().sum();
        let m2: f64 = t.iter().zip(&w).map(|(t, w)| w * t * t).sum();
        let m4: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(4)).sum();
        assert!((m0 - pi.sqrt()).abs() < 1e-12);
        assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
        assert!((m4 - 0.75 * pi.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn capacity_limits() {
        let (c, v) = capacity_dispersion(0.05);
        assert!((c - 1.0).abs() < 1e-9 && v < 1e-9);
        let (c, _) = capacity_dispersion(20.0);
        assert!(c < 0.01);
    }

    #[test]
    fn normal_approximation_shape() {
        let p3 = normal_approximation_fer(128, 64, 3.0);
        let p2 = normal_approximation_fer(128, 64, 2.0);
        assert!(p3 > 0.0 && p3 < 1.0);
        assert!(p2 > p3);
        let sigma = eb_n0_to_sigma(3.0, 0.5);
        let by_rate: Vec<f64> = [64, 32, 16, 4, 1].iter().map(|&k| normal_approximation_fer_sigma(128, k, sigma)).collect();
        assert!(by_rate.windows(2).all(|w| w[1] < w[0]));
        assert!(by_rate[4] < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let mut c = Campaign::new(small_spec(), DecoderKind::Seq { max_visits: 4, capacity: 32 }, vec![2.0]);
        assert!(matches!(c.validate(), Err(HarnessError::MissingBias)));
        c.bias = Some(BiasSource::Zero);
        assert!(c.validate().is_ok());
        c.snr_db.clear();
        assert!(matches!(c.validate(), Err(HarnessError::NoSnrPoints)));
    }

    #[test]
    fn clean_channel_has_no_errors() {
        let mut c = Campaign::new(small_spec(), DecoderKind::Scl { list: 4 }, vec![20.0]);
        c.max_frames = 1000;
        let r = run_campaign(&c).unwrap();
        assert_eq!(r.points[0].frames, 1000);
        assert_eq!(r.points[0].frame_errors, 0);
    }

    #[test]
    fn stops_at_error_target() {
        let mut c = Campaign::new(small_spec(), DecoderKind::Sc, vec![-2.0]);
        c.min_errors = 17;
        c.workers = 3;
        let r = run_campaign(&c).unwrap();
        assert_eq!(r.points[0].frame_errors, 17);
    }

    #[test]
    fn config_parsing() {
        let cfg = CampaignConfig::from_toml(
            "spec = \"s.txt\"\ndecoder = \"seq\"\nmax_visits = 4\nbias = \"de\"\nsnr_db = [1.0, 2.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.decoder_kind(128).unwrap(), DecoderKind::Seq { max_visits: 4, capacity: 512 });
        assert!(matches!(cfg.bias_source().unwrap(), Some(BiasSource::DensityEvolution(_))));
        assert!(CampaignConfig::from_toml("spec = \"s\"\ndecoder = \"sc\"\nsnr_db = []\nbogus = 1\n").is_err());
    }
}

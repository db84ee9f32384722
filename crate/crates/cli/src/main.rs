//! `polarseq` command-line driver: code construction, bias tables, single-frame
//! encoding and decoding, and simulation campaigns.
//!
//! Arguments may be written as `key=value` as well as `--key value`. Every
//! command prints its fully resolved settings and their SHA-256 hash to
//! stderr before doing any work.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or file format, 4 numerical
//! validation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polarseq::bias::{bias_de, bias_mc, BiasError, BiasTable, DeParams};
use polarseq::channel::{eb_n0_to_sigma, frame_rng, random_bits, AwgnChannel};
use polarseq::construction::{
    construct_ebch_subcode, construct_polar, construct_randomized_subcode, estimate_reliability, CodeSpec,
    ConstructionError,
};
use polarseq::decoders::{DecodeStatus, DecoderError};
use polarseq::encoder::encode;
use polarseq::harness::{
    default_workers, emit_csv, AnyDecoder, CampaignConfig, DecoderKind, HarnessError,
};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::Io(_) | ConstructionError::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<BiasError> for CliError {
    fn from(e: BiasError) -> Self {
        match e {
            BiasError::Io(_) | BiasError::Parse { .. } => CliError::Io(e.to_string()),
            BiasError::InvalidGrid { .. } | BiasError::NoFrames => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DecoderError> for CliError {
    fn from(e: DecoderError) -> Self {
        match e {
            DecoderError::BiasMismatch { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Bias(b) => b.into(),
            HarnessError::Construction(c) => c.into(),
            HarnessError::Decoder(d) => d.into(),
            HarnessError::Io(_) | HarnessError::ThreadPool(_) => CliError::Io(e.to_string()),
            HarnessError::NoTableForSnr { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "polarseq", version, about = "Polar subcodes with sequential decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a code and write its spec file.
    Construct(ConstructArgs),
    /// Compute a bias table Psi.
    Bias(BiasArgs),
    /// Encode one information word.
    Encode(EncodeArgs),
    /// Decode one frame.
    Decode(DecodeArgs),
    /// Run a simulation campaign and write CSV.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CodeKind {
    Polar,
    Ebch,
    Randomized,
}

#[derive(Args)]
struct ConstructArgs {
    kind: CodeKind,
    #[arg(long)]
    m: usize,
    /// Dimension (polar, randomized).
    #[arg(long)]
    k: Option<usize>,
    /// Design distance (ebch).
    #[arg(long)]
    d: Option<usize>,
    /// Number of random dynamic checks (randomized).
    #[arg(long, default_value_t = 8)]
    extra: usize,
    /// Design Eb/N0 in dB for the reliability estimate.
    #[arg(long, default_value_t = 2.5, allow_hyphen_values = true)]
    design_snr: f64,
    /// Genie-aided frames for the reliability estimate.
    #[arg(long, default_value_t = 20_000)]
    frames: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BiasMethodArg {
    De,
    Mc,
    /// Print de and mc side by side.
    Compare,
}

#[derive(Args)]
struct ChannelArgs {
    /// Noise standard deviation; overrides --snr-db.
    #[arg(long)]
    sigma: Option<f64>,
    /// Eb/N0 in dB, converted with --rate.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
}

impl ChannelArgs {
    fn sigma(&self) -> Result<f64, CliError> {
        let sigma = match (self.sigma, self.snr_db) {
            (Some(s), _) => s,
            (None, Some(db)) => eb_n0_to_sigma(db, self.rate),
            (None, None) => return Err(CliError::Usage("give --sigma or --snr-db".into())),
        };
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(CliError::Usage(format!("sigma must be positive, got {sigma}")));
        }
        Ok(sigma)
    }
}

#[derive(Args)]
struct BiasArgs {
    method: BiasMethodArg,
    #[arg(long)]
    m: usize,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Density-evolution grid half-width.
    #[arg(long, default_value_t = 60.0)]
    a: f64,
    /// Density-evolution grid step.
    #[arg(long, default_value_t = 0.0625)]
    h: f64,
    /// Monte-Carlo frames.
    #[arg(long, default_value_t = 100_000)]
    frames: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Information bits as a 0/1 string; random when omitted.
    #[arg(long)]
    info: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DecoderArg {
    Sc,
    Scl,
    Seq,
}

impl DecoderArg {
    fn name(self) -> &'static str {
        match self {
            DecoderArg::Sc => "sc",
            DecoderArg::Scl => "scl",
            DecoderArg::Seq => "seq",
        }
    }
}

#[derive(Args)]
struct DecoderFlags {
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
    /// SCL list size; also the default seq L.
    #[arg(long)]
    list: Option<usize>,
    /// Seq L: maximum pops per phase.
    #[arg(long)]
    max_visits: Option<usize>,
    /// Seq D: queue capacity (default L*n).
    #[arg(long)]
    capacity: Option<usize>,
    /// Psi for seq: de, mc, zero, or comma-separated table files.
    #[arg(long)]
    bias: Option<String>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[command(flatten)]
    decoder: DecoderFlags,
    /// Comma-separated channel LLRs; otherwise a random frame is simulated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    llrs: Option<Vec<f64>>,
    /// Noise standard deviation; overrides --snr-db.
    #[arg(long)]
    sigma: Option<f64>,
    /// Eb/N0 in dB at the code rate.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    frame: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Campaign TOML file; other flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    decoder: DecoderFlags,
    /// Comma-separated Eb/N0 points in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    max_frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Rewrites bare `key=value` arguments to `--key value`.
fn rewrite_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for a in args {
        // the value of a preceding `--flag` is left alone
        let after_flag = out.last().is_some_and(|p| p.starts_with('-') && !p.contains('='));
        match a.split_once('=') {
            Some((key, value))
                if !after_flag
                    && !a.starts_with('-')
                    && !key.is_empty()
                    && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') =>
            {
                out.push(format!("--{}", key.replace('_', "-")));
                out.push(value.to_string());
            }
            _ => out.push(a),
        }
    }
    out
}

/// Prints the resolved settings and their hash. The output location does
/// not enter the hash.
fn announce(command: &str, settings: &[(&str, String)]) {
    let mut line = format!("polarseq {command}");
    let mut hashed = line.clone();
    for (k, v) in settings {
        let _ = write!(line, " {k}={v}");
        if *k != "out" {
            let _ = write!(hashed, " {k}={v}");
        }
    }
    let hash = hex::encode(Sha256::digest(hashed.as_bytes()));
    eprintln!("# {line}");
    eprintln!("# config-hash sha256:{hash}");
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes))[..16].to_string())
}

fn load_spec(path: &Path) -> Result<CodeSpec, CliError> {
    CodeSpec::load(path).map_err(|e| match e {
        ConstructionError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn bits(v: &[u8]) -> String {
    v.iter().map(|&b| char::from(b'0' + b)).collect()
}

fn require_out(out: &Option<PathBuf>) -> Result<&Path, CliError> {
    out.as_deref().ok_or_else(|| CliError::Usage("missing output path (--out or out=FILE)".into()))
}

fn cmd_construct(a: &ConstructArgs) -> Result<(), CliError> {
    let out = require_out(&a.out)?;
    let n = 1usize << a.m;
    let need_k = || a.k.ok_or_else(|| CliError::Usage("--k is required".into()));
    let design_sigma = |k: usize| eb_n0_to_sigma(a.design_snr, k.max(1) as f64 / n as f64);
    let spec = match a.kind {
        CodeKind::Polar => {
            let k = need_k()?;
            announce(
                "construct polar",
                &[
                    ("m", a.m.to_string()),
                    ("k", k.to_string()),
                    ("design_snr", a.design_snr.to_string()),
                    ("frames", a.frames.to_string()),
                    ("seed", a.seed.to_string()),
                    ("out", out.display().to_string()),
                ],
            );
            if k > n {
                return Err(ConstructionError::DimensionOutOfRange { n, k }.into());
            }
            let rel = estimate_reliability(a.m, AwgnChannel::new(design_sigma(k)), a.frames, a.seed);
            construct_polar(a.m, k, &rel)?
        }
        CodeKind::Ebch => {
            let d = a.d.ok_or_else(|| CliError::Usage("--d is required".into()))?;
            announce(
                "construct ebch",
                &[("m", a.m.to_string()), ("d", d.to_string()), ("out", out.display().to_string())],
            );
            construct_ebch_subcode(a.m, d)?
        }
        CodeKind::Randomized => {
            let k = need_k()?;
            announce(
                "construct randomized",
                &[
                    ("m", a.m.to_string()),
                    ("k", k.to_string()),
                    ("extra", a.extra.to_string()),
                    ("design_snr", a.design_snr.to_string()),
                    ("frames", a.frames.to_string()),
                    ("seed", a.seed.to_string()),
                    ("out", out.display().to_string()),
                ],
            );
            if k + a.extra > n {
                return Err(ConstructionError::DimensionOutOfRange { n, k: k + a.extra }.into());
            }
            let rel = estimate_reliability(a.m, AwgnChannel::new(design_sigma(k)), a.frames, a.seed);
            let base = construct_polar(a.m, k + a.extra, &rel)?;
            construct_randomized_subcode(&base, &rel, a.extra, a.seed)?
        }
    };
    spec.save(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    println!("n={} k={} dynamic_rows={}", spec.n(), spec.k(), spec.num_dynamic());
    Ok(())
}

fn cmd_bias(a: &BiasArgs) -> Result<(), CliError> {
    let sigma = a.channel.sigma()?;
    let out = if a.method == BiasMethodArg::Compare {
        None
    } else {
        Some(require_out(&a.out)?)
    };
    let method = match a.method {
        BiasMethodArg::De => "de",
        BiasMethodArg::Mc => "mc",
        BiasMethodArg::Compare => "compare",
    };
    let mut settings = vec![("method", method.to_string()), ("m", a.m.to_string()), ("sigma", sigma.to_string())];
    if a.method != BiasMethodArg::Mc {
        settings.push(("a", a.a.to_string()));
        settings.push(("h", a.h.to_string()));
    }
    if a.method != BiasMethodArg::De {
        settings.push(("frames", a.frames.to_string()));
        settings.push(("seed", a.seed.to_string()));
    }
    if let Some(o) = out {
        settings.push(("out", o.display().to_string()));
    }
    announce("bias", &settings);
    if a.m > 20 {
        return Err(CliError::Usage(format!("m={} is too large", a.m)));
    }
    let ch = AwgnChannel::new(sigma);
    let params = DeParams {
        a: a.a,
        h: a.h,
        ..DeParams::default()
    };
    match a.method {
        BiasMethodArg::De | BiasMethodArg::Mc => {
            let table = if a.method == BiasMethodArg::De {
                bias_de(a.m, ch, params)?
            } else {
                bias_mc(a.m, ch, a.frames, a.seed)?
            };
            let out = out.expect("checked above");
            table.save(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            println!("m={} sigma={} psi(n)={}", a.m, sigma, table.psi(1 << a.m));
        }
        BiasMethodArg::Compare => {
            let de = bias_de(a.m, ch, params)?;
            let mc = bias_mc(a.m, ch, a.frames, a.seed)?;
            let se = mc.std_err().unwrap_or(&[]);
            println!("phase,de,mc,mc_stderr,diff");
            let mut worst = 0.0f64;
            for phase in 0..=1usize << a.m {
                let d = de.psi(phase) - mc.psi(phase);
                worst = worst.max(d.abs());
                println!(
                    "{phase},{},{},{},{}",
                    de.psi(phase),
                    mc.psi(phase),
                    se.get(phase).copied().unwrap_or(0.0),
                    d
                );
            }
            eprintln!("max |de - mc| = {worst}");
        }
    }
    Ok(())
}

fn cmd_encode(a: &EncodeArgs) -> Result<(), CliError> {
    announce(
        "encode",
        &[
            ("spec", format!("{}@{}", a.spec.display(), file_digest(&a.spec)?)),
            ("info", a.info.clone().unwrap_or_else(|| "random".into())),
            ("seed", a.seed.to_string()),
        ],
    );
    let spec = load_spec(&a.spec)?;
    let info: Vec<u8> = match &a.info {
        Some(s) => s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(CliError::Usage(format!("info must be a 0/1 string, found `{c}`"))),
            })
            .collect::<Result<_, _>>()?,
        None => random_bits(&mut frame_rng(a.seed, 0, 0), spec.k()),
    };
    if info.len() != spec.k() {
        return Err(CliError::Usage(format!("info has {} bits, code dimension is {}", info.len(), spec.k())));
    }
    let enc = encode(&spec, &info);
    println!("info     {}", bits(&info));
    println!("input    {}", bits(&enc.input));
    println!("codeword {}", bits(&enc.codeword));
    Ok(())
}

type Settings = Vec<(&'static str, String)>;

fn decoder_settings(f: &DecoderFlags, n: usize) -> Result<(DecoderKind, Settings), CliError> {
    let cfg = CampaignConfig {
        decoder: f
            .decoder
            .ok_or_else(|| CliError::Usage("--decoder is required (sc, scl or seq)".into()))?
            .name()
            .into(),
        list: f.list,
        max_visits: f.max_visits,
        capacity: f.capacity,
        ..CampaignConfig::default()
    };
    let kind = cfg.decoder_kind(n)?;
    let mut s = vec![("decoder", kind.name().to_string())];
    match kind {
        DecoderKind::Sc => {}
        DecoderKind::Scl { list } => s.push(("list", list.to_string())),
        DecoderKind::Seq { max_visits, capacity } => {
            s.push(("max_visits", max_visits.to_string()));
            s.push(("capacity", capacity.to_string()));
            s.push(("bias", f.bias.clone().unwrap_or_else(|| "none".into())));
        }
    }
    Ok((kind, s))
}

fn cmd_decode(a: &DecodeArgs) -> Result<(), CliError> {
    let spec = load_spec(&a.spec)?;
    let (kind, mut settings) = decoder_settings(&a.decoder, spec.n())?;
    settings.insert(0, ("spec", format!("{}@{}", a.spec.display(), file_digest(&a.spec)?)));
    let sigma = a.sigma.or(a.snr_db.map(|db| eb_n0_to_sigma(db, spec.rate())));
    if let Some(s) = sigma {
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Usage(format!("sigma must be positive, got {s}")));
        }
        settings.push(("sigma", s.to_string()));
    }
    match &a.llrs {
        Some(l) => settings.push(("llrs", format!("{} values", l.len()))),
        None => {
            settings.push(("seed", a.seed.to_string()));
            settings.push(("frame", a.frame.to_string()));
        }
    }
    announce("decode", &settings);

    let bias = match (&kind, a.decoder.bias.as_deref()) {
        (DecoderKind::Seq { .. }, None) => return Err(HarnessError::MissingBias.into()),
        (DecoderKind::Seq { .. }, Some(b)) => {
            let need_sigma = || sigma.ok_or_else(|| CliError::Usage(format!("bias `{b}` needs --sigma or --snr-db")));
            Some(Arc::new(match b {
                "zero" => BiasTable::zero(spec.m()),
                "de" => bias_de(spec.m(), AwgnChannel::new(need_sigma()?), DeParams::default())?,
                "mc" => bias_mc(
                    spec.m(),
                    AwgnChannel::new(need_sigma()?),
                    CampaignConfig::DEFAULT_MC_FRAMES,
                    a.seed,
                )?,
                file => match sigma {
                    Some(s) => BiasTable::load_for(file, spec.m(), s)?,
                    None => BiasTable::load(file)?,
                },
            }))
        }
        _ => None,
    };
    let mut decoder = AnyDecoder::new(&spec, &kind, bias)?;

    let (sent, llrs) = match &a.llrs {
        Some(l) => {
            if l.len() != spec.n() {
                return Err(CliError::Usage(format!("{} LLRs given, code length is {}", l.len(), spec.n())));
            }
            if l.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Numerical("LLRs must be finite".into()));
            }
            (None, l.clone())
        }
        None => {
            let ch = AwgnChannel::new(sigma.ok_or_else(|| CliError::Usage("give --llrs, --sigma or --snr-db".into()))?);
            let mut rng = frame_rng(a.seed, 0, a.frame);
            let info = random_bits(&mut rng, spec.k());
            let cw = encode(&spec, &info).codeword;
            let llrs = ch.llr(&ch.transmit(&cw, &mut rng));
            (Some(cw), llrs)
        }
    };
    let r = decoder.decode(&spec, &llrs);
    if let Some(cw) = &sent {
        println!("sent     {}", bits(cw));
    }
    println!("codeword {}", bits(&r.codeword));
    println!("info     {}", bits(&r.info));
    println!(
        "status={} score={} pops={} ops={} peak_queue={}{}",
        match r.status {
            DecodeStatus::Decoded => "decoded",
            DecodeStatus::Abandoned => "abandoned",
        },
        r.score,
        r.stats.iterations,
        r.stats.ops.total(),
        r.stats.peak_queue,
        sent.map(|cw| format!(" correct={}", cw == r.codeword)).unwrap_or_default()
    );
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(path) => CampaignConfig::load(path).map_err(|e| match e {
            HarnessError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
            HarnessError::Config(msg) => CliError::Io(format!("{}: {msg}", path.display())),
            other => other.into(),
        })?,
        None => CampaignConfig::default(),
    };
    let f = &a.decoder;
    if let Some(s) = &a.spec {
        cfg.spec = s.clone();
    }
    if let Some(d) = f.decoder {
        cfg.decoder = d.name().into();
    }
    cfg.list = f.list.or(cfg.list);
    cfg.max_visits = f.max_visits.or(cfg.max_visits);
    cfg.capacity = f.capacity.or(cfg.capacity);
    cfg.bias = f.bias.clone().or(cfg.bias);
    if let Some(s) = &a.snr_db {
        cfg.snr_db = s.clone();
    }
    cfg.min_errors = a.min_errors.or(cfg.min_errors);
    cfg.max_frames = a.max_frames.or(cfg.max_frames);
    cfg.seed = a.seed.or(cfg.seed);
    cfg.workers = a.workers.or(cfg.workers);
    cfg.out = a.out.clone().or(cfg.out);
    if cfg.spec.as_os_str().is_empty() {
        return Err(CliError::Usage("missing --spec (or spec in --config)".into()));
    }
    if cfg.decoder.is_empty() {
        return Err(CliError::Usage("missing --decoder (sc, scl or seq)".into()));
    }
    if cfg.snr_db.is_empty() {
        return Err(CliError::Usage("missing --snr-db".into()));
    }

    let spec = load_spec(&cfg.spec)?;
    let kind = cfg.decoder_kind(spec.n())?;
    let mut settings = vec![("spec", format!("{}@{}", cfg.spec.display(), file_digest(&cfg.spec)?))];
    settings.push(("decoder", kind.name().to_string()));
    match kind {
        DecoderKind::Sc => {}
        DecoderKind::Scl { list } => settings.push(("list", list.to_string())),
        DecoderKind::Seq { max_visits, capacity } => {
            settings.push(("max_visits", max_visits.to_string()));
            settings.push(("capacity", capacity.to_string()));
            settings.push(("bias", cfg.bias.clone().unwrap_or_else(|| "none".into())));
        }
    }
    let snrs: Vec<String> = cfg.snr_db.iter().map(f64::to_string).collect();
    settings.push(("snr_db", snrs.join(",")));
    settings.push(("min_errors", cfg.min_errors.unwrap_or(100).to_string()));
    settings.push(("max_frames", cfg.max_frames.unwrap_or(1_000_000).to_string()));
    settings.push(("seed", cfg.seed.unwrap_or(1).to_string()));
    let workers = cfg.workers.unwrap_or_else(default_workers);
    cfg.workers = Some(workers);
    settings.push(("workers", workers.to_string()));
    settings.push(("out", cfg.out.as_ref().map_or("stdout".into(), |o| o.display().to_string())));
    announce("simulate", &settings);

    let campaign = cfg.to_campaign()?;
    let report = polarseq::harness::run_campaign(&campaign)?;
    let csv = emit_csv(&report);
    match &cfg.out {
        Some(path) => std::fs::write(path, &csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    for p in &report.points {
        eprintln!(
            "# {} dB: {} frames, {} errors, FER {:.3e}",
            p.snr_db,
            p.frames,
            p.frame_errors,
            p.fer()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(rewrite_args(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Construct(a) => cmd_construct(a),
        Command::Bias(a) => cmd_bias(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::rewrite_args;

    #[test]
    fn key_value_arguments_become_flags() {
        let args = ["polarseq", "construct", "ebch", "m=4", "design_snr=-1", "--out", "x=y.txt"].map(String::from);
        assert_eq!(
            rewrite_args(args),
            ["polarseq", "construct", "ebch", "--m", "4", "--design-snr", "-1", "--out", "x=y.txt"]
        );
    }
}

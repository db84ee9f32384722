//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use common::*;
use polarseq::bias::{bias_de, bias_mc, BiasTable, DeParams};
use polarseq::channel::AwgnChannel;
use polarseq::construction::construct_ebch_subcode;
use polarseq::datapath::{PathArrays, Workspace};
use polarseq::decoders::{DecodeStatus, SclDecoder, SeqConfig, SeqDecoder};
use polarseq::encoder::encode;
use polarseq::gf2::ebch_check_matrix;
use polarseq::harness::{default_workers, emit_csv, run_campaign, BiasSource, Campaign, DecoderKind, SnrPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Decoder output against the exhaustive max-log optimum. Different
/// codewords are accepted only on an exact metric tie.
fn matches_ml(book: &[Vec<u8>], llrs: &[f64], codeword: &[u8], score: f64) -> bool {
    let ml = ml_decode(book, llrs);
    let own = metric(codeword, llrs);
    (score - own).abs() < 1e-9 && (codeword == ml.codeword.as_slice() || (ml.tied && (own - ml.metric).abs() < 1e-9))
}

fn criterion_1() -> Outcome {
    let codes = [("polar(8,4)", polar_8_4()), ("eBCH(8,4)", construct_ebch_subcode(3, 4).unwrap())];
    let mut checked = 0;
    for (name, spec) in codes {
        let book = codebook(&spec);
        let cfg = SeqConfig::new(16, 128, Arc::new(BiasTable::zero(3))).unwrap();
        let mut dec = SeqDecoder::new(&spec, cfg).unwrap();
        for f in 0..10_000u64 {
            let snr = (f % 5) as f64;
            let (_, _, llrs) = noisy_frame(&spec, snr, 101, f);
            let r = dec.decode(&spec, &llrs);
            ensure(r.status == DecodeStatus::Decoded, || format!("{name} frame {f}: abandoned"))?;
            ensure(matches_ml(&book, &llrs, &r.codeword, r.score), || {
                format!("{name} frame {f} at {snr} dB differs from ML")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked}/{checked} frames match exhaustive ML"))
}

fn criterion_2() -> Outcome {
    let mut checked = 0;
    for (name, spec) in [("(8,4)", polar_8_4()), ("(16,8)", polar_16_8())] {
        let book = codebook(&spec);
        let mut dec = SclDecoder::new(&spec, 1 << spec.k()).unwrap();
        for f in 0..10_000u64 {
            let snr = (f % 5) as f64;
            let (_, _, llrs) = noisy_frame(&spec, snr, 202, f);
            let r = dec.decode(&spec, &llrs);
            ensure(matches_ml(&book, &llrs, &r.codeword, r.score), || {
                format!("{name} frame {f} at {snr} dB differs from codebook argmax")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked}/{checked} frames match codebook argmax"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut ws = Workspace::new(3, 1, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let llrs: Vec<f64> = (0..8).map(|_| rng.random_range(-6.0..6.0)).collect();
        let u: Vec<u8> = (0..8).map(|_| rng.random_range(0..2)).collect();
        let l = ws.start(&llrs).unwrap();
        for phase in 0..8 {
            let s = ws.calc_s(l, phase).unwrap();
            worst = worst.max((s - brute_force_s(&llrs, &u[..phase])).abs());
            ws.decide(l, phase, u[phase]).unwrap();
        }
    }
    ensure(worst <= 1e-9, || format!("max abs error {worst:e}"))?;
    Ok(format!("max abs error {worst:e} over 8000 phases"))
}

fn criterion_4() -> Outcome {
    // tight budgets force evictions and step kills; violations panic inside the decoder
    let spec = random_subcode(7, 64, 8, 5);
    let bias = Arc::new(bias_de(7, AwgnChannel::from_eb_n0(1.5, 0.5), DeParams::default()).unwrap());
    let mut frames = 0;
    let mut evicting = 0;
    for (l, d) in [(1, 2), (2, 8), (4, 16), (8, 64), (32, 512), (128, 16384)] {
        let cfg = SeqConfig::new(l, d, bias.clone()).unwrap();
        let mut dec = SeqDecoder::new(&spec, cfg).unwrap();
        for f in 0..400u64 {
            let (_, _, llrs) = noisy_frame(&spec, 1.5, 404, f);
            let r = dec.decode(&spec, &llrs);
            let n = spec.n() as u64;
            ensure(r.stats.iterations <= l as u64 * n, || format!("L={l}: {} pops", r.stats.iterations))?;
            ensure(r.stats.peak_queue <= d, || format!("D={d}: queue reached {}", r.stats.peak_queue))?;
            ensure(r.stats.pops_per_phase.iter().all(|&t| t as usize <= l), || format!("L={l}: t_phi above L"))?;
            evicting += u64::from(r.stats.killed > 0);
            frames += 1;
        }
    }
    Ok(format!("{frames} frames within L*n pops and D queue entries ({evicting} with kills)"))
}

fn criterion_5() -> Outcome {
    let spec = Arc::new(random_subcode(7, 64, 8, 5));
    let mut c = Campaign::new(spec.clone(), DecoderKind::Seq { max_visits: 128, capacity: 128 * 128 }, vec![4.5]);
    c.bias = Some(BiasSource::DensityEvolution(DeParams::default()));
    c.min_errors = u64::MAX;
    c.max_frames = 10_000;
    c.seed = 505;
    c.workers = default_workers();
    let p = run_campaign(&c).map_err(|e| e.to_string())?.points.remove(0);
    let n = spec.n() as f64;
    let (pops, ops) = (p.avg_iterations(), p.avg_ops());
    let detail = format!(
        "{} frames, avg pops {pops:.2} (limit {:.1}), avg ops {ops:.1} (limit {:.1})",
        p.frames,
        1.05 * n,
        1.5 * n * n.log2()
    );
    ensure(pops <= 1.05 * n && ops <= 1.5 * n * n.log2(), || detail.clone())?;
    Ok(detail)
}

fn criterion_6() -> Outcome {
    let spec = Arc::new(random_subcode(7, 64, 8, 5));
    let mut lines = Vec::new();
    for list in [8usize, 32] {
        for snr in [1.5, 2.5] {
            let run = |decoder: DecoderKind| -> Result<SnrPoint, String> {
                let mut c = Campaign::new(spec.clone(), decoder, vec![snr]);
                c.bias = Some(BiasSource::DensityEvolution(DeParams::default()));
                c.min_errors = 100;
                c.seed = 606;
                c.workers = default_workers();
                Ok(run_campaign(&c).map_err(|e| e.to_string())?.points.remove(0))
            };
            let seq = run(DecoderKind::Seq {
                max_visits: list,
                capacity: list * spec.n(),
            })?;
            let scl = run(DecoderKind::Scl { list })?;
            let bound = 3.0 * (seq.fer_sigma().powi(2) + scl.fer_sigma().powi(2)).sqrt();
            let gap = seq.fer() - scl.fer();
            let line = format!(
                "L={list} {snr} dB: seq {:.3e} ({} err) vs scl {:.3e} ({} err), |gap| {:.2e} <= {bound:.2e}",
                seq.fer(),
                seq.frame_errors,
                scl.fer(),
                scl.frame_errors,
                gap.abs()
            );
            ensure(gap.abs() <= bound && seq.frame_errors >= 100 && scl.frame_errors >= 100, || line.clone())?;
            lines.push(line);
        }
    }
    Ok(lines.join("; "))
}

fn criterion_7() -> Outcome {
    let ch = AwgnChannel::from_eb_n0(1.0, 0.5);
    let de = bias_de(7, ch, DeParams::default()).map_err(|e| e.to_string())?;
    let mc = bias_mc(7, ch, 100_000, 707).map_err(|e| e.to_string())?;
    let se = mc.std_err().expect("mc has standard errors");
    for (name, t) in [("de", &de), ("mc", &mc)] {
        ensure(t.psi(0) == 0.0, || format!("{name}: psi(0) = {}", t.psi(0)))?;
        ensure(t.values().windows(2).all(|w| w[1] <= w[0]), || format!("{name}: not nonincreasing"))?;
    }
    let mut worst = (0.0f64, 0usize);
    for (phase, &se_phase) in se.iter().enumerate() {
        let d = (de.psi(phase) - mc.psi(phase)).abs();
        let tol = 0.05f64.max(3.0 * se_phase);
        ensure(d <= tol, || format!("phase {phase}: |de - mc| = {d:.4} > {tol:.4}"))?;
        if d > worst.0 {
            worst = (d, phase);
        }
    }
    Ok(format!(
        "max |de - mc| = {:.4} at phase {} (psi(128): de {:.3}, mc {:.3} +- {:.3})",
        worst.0,
        worst.1,
        de.psi(128),
        mc.psi(128),
        se[128]
    ))
}

fn criterion_8() -> Outcome {
    let spec = construct_ebch_subcode(4, 4).map_err(|e| e.to_string())?;
    let h = ebch_check_matrix(4, 4).map_err(|e| e.to_string())?;
    let k = spec.k();
    let mut min_weight = usize::MAX;
    for w in 0..1u32 << k {
        let info: Vec<u8> = (0..k).map(|i| ((w >> i) & 1) as u8).collect();
        let c = encode(&spec, &info).codeword;
        ensure(h.mul_vec(&c).iter().all(|&b| b == 0), || format!("info word {w:#x} violates H c = 0"))?;
        if w != 0 {
            min_weight = min_weight.min(c.iter().filter(|&&b| b == 1).count());
        }
    }
    ensure(min_weight >= 4, || format!("minimum distance {min_weight}"))?;
    Ok(format!("(16,{k}) code: all {} codewords satisfy H c = 0, d_min = {min_weight}", 1u32 << k))
}

fn criterion_9() -> Outcome {
    let spec = random_subcode(6, 32, 6, 9);
    let bias = Arc::new(bias_de(6, AwgnChannel::from_eb_n0(1.0, 0.5), DeParams::default()).unwrap());
    let cfg = SeqConfig::new(4, 32, bias).unwrap();
    let mut seq_lazy = SeqDecoder::new(&spec, cfg.clone()).unwrap();
    let mut seq_deep = SeqDecoder::with_arrays(DeepCopyArrays::for_spec(&spec, 32), cfg).unwrap();
    let mut scl_lazy = SclDecoder::new(&spec, 8).unwrap();
    let mut scl_deep = SclDecoder::with_arrays(DeepCopyArrays::for_spec(&spec, 8), 8);
    for f in 0..100u64 {
        let (_, _, llrs) = noisy_frame(&spec, 1.0, 909, f);
        ensure(seq_lazy.decode(&spec, &llrs) == seq_deep.decode(&spec, &llrs), || {
            format!("seq frame {f} differs")
        })?;
        ensure(scl_lazy.decode(&spec, &llrs) == scl_deep.decode(&spec, &llrs), || {
            format!("scl frame {f} differs")
        })?;
    }
    Ok("seq and scl: 100/100 frames identical to deep-copy storage (codeword, score, stats)".into())
}

fn criterion_10() -> Outcome {
    let spec = Arc::new(random_subcode(6, 32, 4, 10));
    let decoders = [
        (DecoderKind::Sc, None),
        (DecoderKind::Scl { list: 4 }, None),
        (
            DecoderKind::Seq {
                max_visits: 8,
                capacity: 512,
            },
            Some(BiasSource::DensityEvolution(DeParams::default())),
        ),
    ];
    let mut runs = 0;
    for (decoder, bias) in decoders {
        let csv = |workers: usize| -> Result<String, String> {
            let mut c = Campaign::new(spec.clone(), decoder.clone(), vec![1.0, 2.0, 3.0]);
            c.bias = bias.clone();
            c.min_errors = 40;
            c.max_frames = 20_000;
            c.seed = 1010;
            c.workers = workers;
            Ok(emit_csv(&run_campaign(&c).map_err(|e| e.to_string())?))
        };
        let reference = csv(1)?;
        for workers in [2, 3, 8] {
            ensure(csv(workers)? == reference, || {
                format!("{} CSV differs between 1 and {workers} workers", decoder.name())
            })?;
            runs += 1;
        }
    }
    Ok(format!("sc/scl/seq CSVs byte-identical across 1, 2, 3 and 8 workers ({runs} reruns)"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("ML equivalence of seq with zero bias", criterion_1),
        ("SCL with full list equals codebook argmax", criterion_2),
        ("calc_S equals brute-force definition", criterion_3),
        ("pop and queue bounds", criterion_4),
        ("high-SNR complexity convergence", criterion_5),
        ("seq FER matches SCL FER", criterion_6),
        ("bias by DE agrees with Monte Carlo", criterion_7),
        ("eBCH membership and distance", criterion_8),
        ("lazy copy equals deep copy", criterion_9),
        ("determinism across worker counts", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

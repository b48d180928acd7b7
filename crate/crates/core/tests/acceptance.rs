//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every line is printed regardless of outcome; the
//! process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use eegmap::augment::{one_hot, SoftLabeledBatch};
use eegmap::coords::{tsne_with_trace, TransformMethod, TsneParams};
use eegmap::harness::{
    format_manifest, run_ablation, run_fold, split_subjects, write_fold_outputs, AblationAxis, AblationInputs,
    Dataset, PipelineConfig, TrainConfig, EXCLUDED_SUBJECTS,
};
use eegmap::ingest::{default_montage, parse_edf};
use eegmap::model::{
    forward, loss_and_grad, make_extractor, positional_encoding, Mode, ModelConfig, StPoolModel,
};
use eegmap::synthetic::{synthetic_epochs, SyntheticConfig};
use eegmap::topomap::build_assignment;
use eegmap::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- 1

fn gradient_oracle() -> Outcome {
    let cfg = ModelConfig {
        stage: 2,
        c1: 8,
        n_frames: 8,
        h: 16,
        w: 16,
        num_blocks: 2,
        num_classes: 4,
        // A large LayerScale start so every branch carries real gradient.
        layerscale_init: 0.5,
        drop_rate: 0.0,
        seed: 3,
        ..ModelConfig::default()
    };
    let mut model = StPoolModel::new(cfg.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let batch = SoftLabeledBatch {
        frames: (0..2).map(|_| (0..cfg.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        labels: vec![vec![0.7, 0.0, 0.3, 0.0], one_hot(1, 4)],
    };
    let analytic = loss_and_grad(&model, &batch, Mode::Eval, Execution::Sequential).map_err(|e| e.to_string())?;

    // Oracle: mean cross-entropy recomputed from forward probabilities.
    let loss = |m: &StPoolModel| -> f64 {
        batch
            .frames
            .iter()
            .zip(&batch.labels)
            .map(|(x, y)| {
                let p = forward(m, x, Mode::Eval).unwrap();
                -y.iter().zip(&p).filter(|(t, _)| **t > 0.0).map(|(t, q)| t * q.ln()).sum::<f64>()
            })
            .sum::<f64>()
            / batch.frames.len() as f64
    };
    let eps = 1e-5;
    let grads: Vec<f64> = analytic.grads.tensors().iter().flat_map(|t| t.data.clone()).collect();
    let n_tensors = model.params.tensors().len();
    let mut flat = 0;
    let mut worst = (0.0f64, 0usize);
    for ti in 0..n_tensors {
        let len = model.params.tensors()[ti].data.len();
        for k in 0..len {
            let orig = model.params.tensors()[ti].data[k];
            model.params.tensors_mut()[ti].data[k] = orig + eps;
            let up = loss(&model);
            model.params.tensors_mut()[ti].data[k] = orig - eps;
            let down = loss(&model);
            model.params.tensors_mut()[ti].data[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            let a = grads[flat];
            // Relative error with a floor on the scale: central differences
            // carry ~1e-11 absolute noise here, meaningless for |g| below ~1e-7.
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-7);
            if rel > worst.0 {
                worst = (rel, flat);
            }
            flat += 1;
        }
    }
    check(worst.0 <= 1e-4, format!("max relative error {:.3e} at parameter {}", worst.0, worst.1))?;
    Ok(format!("{flat} parameters, max relative error {:.2e}", worst.0))
}

// ---------------------------------------------------------------- 2

fn extractor_lengths() -> Outcome {
    let mut notes = Vec::new();
    for (stage, c1) in [(1usize, 8usize), (2, 8), (3, 16), (4, 80)] {
        let cfg = ModelConfig { stage, c1, n_frames: 2, h: 16, w: 16, num_blocks: 1, ..ModelConfig::default() };
        let ex = make_extractor(&cfg).map_err(|e| e.to_string())?;
        let expected = (1usize << (stage - 1)) * c1;
        check(ex.output_len() == expected, format!("({stage},{c1}): output_len {}", ex.output_len()))?;
        let model = StPoolModel::new(cfg.clone()).map_err(|e| e.to_string())?;
        let feats = eegmap::model::forward_features(&model, &vec![0.25; cfg.input_len()]).map_err(|e| e.to_string())?;
        check(feats.len() == 2 * expected, format!("({stage},{c1}): feature matrix {}", feats.len()))?;
        notes.push(format!("({stage},{c1})->{expected}"));
    }
    Ok(notes.join(" "))
}

// ---------------------------------------------------------------- 3

fn tsne_invariants() -> Outcome {
    let start = Instant::now();
    let montage = default_montage();
    let params = TsneParams { seed: 7, ..TsneParams::default() };
    let (_, trace) = tsne_with_trace(&montage, &params).map_err(|e| e.to_string())?;
    let n = montage.len();
    let target = params.perplexity.log2();
    let mut worst_h = 0.0f64;
    for i in 0..n {
        let row = &trace.conditional[i * n..(i + 1) * n];
        let h: f64 = -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>();
        worst_h = worst_h.max((h - target).abs());
    }
    check(worst_h <= 1e-5, format!("entropy off by {worst_h:.2e}"))?;
    let total: f64 = trace.joint.iter().sum();
    check((total - 1.0).abs() <= 1e-9, format!("sum P = {total}"))?;
    for i in 0..n {
        for j in 0..n {
            check(trace.joint[i * n + j] == trace.joint[j * n + i], format!("P not symmetric at ({i},{j})"))?;
        }
    }
    let tail = &trace.kl[trace.kl.len() - 100..];
    let worst_rise = tail.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    check(worst_rise <= 1e-6, format!("KL rose by {worst_rise:.2e} in the final 100 iterations"))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "entropy err {worst_h:.1e}, |sum P - 1| {:.1e}, max KL step {worst_rise:.1e}, {:.2?}",
        (total - 1.0).abs(),
        elapsed
    ))
}

// ---------------------------------------------------------------- 4

fn rasterization_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ties = 0usize;
    for layout in 0..1000 {
        let h = rng.random_range(2..=32usize);
        let w = rng.random_range(2..=32usize);
        let n = rng.random_range(1..=64usize.min(h * w));
        let mut used = BTreeSet::new();
        let mut pixels = Vec::with_capacity(n);
        while pixels.len() < n {
            let p = (rng.random_range(0..h), rng.random_range(0..w));
            if used.insert(p) {
                pixels.push(p);
            }
        }
        let a = build_assignment(&pixels, h, w);
        for r in 0..h {
            for c in 0..w {
                // Exhaustive scan; strict `<` keeps the lowest index on ties.
                let d = |e: usize| {
                    let (er, ec) = pixels[e];
                    (er as i64 - r as i64).pow(2) + (ec as i64 - c as i64).pow(2)
                };
                let mut best = 0;
                for e in 1..n {
                    if d(e) < d(best) {
                        best = e;
                    }
                }
                if (0..n).filter(|&e| d(e) == d(best)).count() > 1 {
                    ties += 1;
                }
                check(a.owner_at(r, c) == best, format!("layout {layout}: pixel ({r},{c}) owner {} != {best}", a.owner_at(r, c)))?;
            }
        }
    }
    check(ties > 0, "no tie cases exercised")?;
    Ok(format!("1000 layouts identical, {ties} tied pixels"))
}

// ---------------------------------------------------------------- 5

/// sin and cos by Taylor series after reduction modulo 2π with a split
/// constant, independent of the platform libm.
#[allow(clippy::approx_constant)]
fn sin_cos_series(x: f64) -> (f64, f64) {
    const TWO_PI_HI: f64 = 6.283_185_307_179_586;
    const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;
    let k = (x / TWO_PI_HI).round();
    let r = (x - k * TWO_PI_HI) - k * TWO_PI_LO;
    let (mut s, mut c) = (0.0, 0.0);
    let mut term = 1.0; // r^m / m!
    for m in 0..60 {
        match m % 4 {
            0 => c += term,
            1 => s += term,
            2 => c -= term,
            _ => s -= term,
        }
        term *= r / (m + 1) as f64;
    }
    (s, c)
}

fn positional_encoding_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for l in (2..=64).step_by(2) {
        let pe = positional_encoding(64, l).map_err(|e| e.to_string())?;
        for n in 0..64 {
            for i in 0..l / 2 {
                // 10000^(-2i/L) = exp(-(2i/L)·ln 10000)
                let angle = n as f64 * (-(2.0 * i as f64 / l as f64) * 10000f64.ln()).exp();
                let (s, c) = sin_cos_series(angle);
                worst = worst.max((pe[n * l + 2 * i] - s).abs()).max((pe[n * l + 2 * i + 1] - c).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e}"))?;
    Ok(format!("N,L <= 64, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- 6

fn field(out: &mut Vec<u8>, text: &str, width: usize) {
    assert!(text.len() <= width);
    out.extend_from_slice(text.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - text.len()));
}

fn edf_round_trip() -> Outcome {
    const NS: usize = 64;
    const RATE: usize = 160;
    const RECORDS: usize = 3;
    let phys = |s: usize| (-(100.0 + 7.0 * s as f64), 250.5 + s as f64);
    let dig = |s: usize| (-32768 + s as i32 * 11, 32767 - s as i32 * 5);
    let value = |s: usize, t: usize| -> i16 {
        let (lo, hi) = dig(s);
        (lo + ((t * 977 + s * 131) % (hi - lo + 1) as usize) as i32) as i16
    };

    let mut header = Vec::new();
    field(&mut header, "0", 8);
    field(&mut header, "X F 01-JAN-1970 Fixture", 80);
    field(&mut header, "Startdate 05-MAR-2021 X X rig", 80);
    field(&mut header, "05.03.21", 8);
    field(&mut header, "13.07.59", 8);
    field(&mut header, &(256 * (NS + 1)).to_string(), 8);
    field(&mut header, "", 44);
    field(&mut header, &RECORDS.to_string(), 8);
    field(&mut header, "1", 8);
    field(&mut header, &NS.to_string(), 4);
    let labels: Vec<String> = default_montage().labels.iter().map(|l| format!("{l}.")).collect();
    for l in &labels {
        field(&mut header, l, 16);
    }
    for _ in 0..NS {
        field(&mut header, "AgAgCl electrode", 80);
    }
    for _ in 0..NS {
        field(&mut header, "uV", 8);
    }
    for s in 0..NS {
        field(&mut header, &format!("{}", phys(s).0), 8);
    }
    for s in 0..NS {
        field(&mut header, &format!("{}", phys(s).1), 8);
    }
    for s in 0..NS {
        field(&mut header, &dig(s).0.to_string(), 8);
    }
    for s in 0..NS {
        field(&mut header, &dig(s).1.to_string(), 8);
    }
    for _ in 0..NS {
        field(&mut header, "HP:0.1Hz LP:75Hz", 80);
    }
    for _ in 0..NS {
        field(&mut header, &RATE.to_string(), 8);
    }
    for _ in 0..NS {
        field(&mut header, "", 32);
    }
    let mut bytes = header.clone();
    for r in 0..RECORDS {
        for s in 0..NS {
            for t in r * RATE..(r + 1) * RATE {
                bytes.extend_from_slice(&value(s, t).to_le_bytes());
            }
        }
    }

    let f = parse_edf(&bytes).map_err(|e| e.to_string())?;
    check(f.recording.sample_rate_hz == RATE as f64, "sample rate")?;
    check(f.recording.n_channels() == NS && f.recording.n_samples() == RECORDS * RATE, "shape")?;
    let mut worst = 0.0f64;
    for s in 0..NS {
        let ((pmin, pmax), (dmin, dmax)) = (phys(s), dig(s));
        for t in 0..RECORDS * RATE {
            let d = value(s, t) as f64;
            let expected = (d - dmin as f64) * (pmax - pmin) / (dmax - dmin) as f64 + pmin;
            worst = worst.max((f.recording.samples[s][t] - expected).abs());
        }
    }
    check(worst <= 1e-9, format!("calibration error {worst:.2e}"))?;
    check(f.header.to_bytes() == header, "re-serialized header differs")?;
    Ok(format!("64 x {} samples, calibration error {worst:.1e}, header byte-identical", RECORDS * RATE))
}

// ---------------------------------------------------------------- 7

fn split_hygiene() -> Outcome {
    let subjects: Vec<u32> = (1..=109).collect();
    let included: BTreeSet<u32> = subjects.iter().copied().filter(|s| !EXCLUDED_SUBJECTS.contains(s)).collect();
    check(included.len() == 103, "expected 103 included subjects")?;
    for seed in 0..100u64 {
        let plans = split_subjects(&subjects, seed).map_err(|e| e.to_string())?;
        let mut sizes: Vec<usize> = plans.iter().map(|p| p.test_subjects.len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        check(sizes == [21, 21, 21, 20, 20], format!("seed {seed}: block sizes {sizes:?}"))?;
        let mut tests = BTreeSet::new();
        for p in &plans {
            let (tr, va, te): (BTreeSet<u32>, BTreeSet<u32>, BTreeSet<u32>) = (
                p.train_subjects.iter().copied().collect(),
                p.val_subjects.iter().copied().collect(),
                p.test_subjects.iter().copied().collect(),
            );
            check(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te), format!("seed {seed}: overlap in fold {}", p.fold_id))?;
            let all: BTreeSet<u32> = tr.union(&va).chain(&te).copied().collect();
            check(all == included, format!("seed {seed}: fold {} does not cover the included set", p.fold_id))?;
            check(all.len() == tr.len() + va.len() + te.len(), "duplicate subjects")?;
            check(EXCLUDED_SUBJECTS.iter().all(|x| !all.contains(x)), "excluded subject present")?;
            tests.extend(te);
        }
        check(tests == included, format!("seed {seed}: test blocks do not partition the subjects"))?;
    }
    Ok("100 seeds: no overlaps, blocks {21,21,21,20,20}, excluded ids absent".into())
}

// ---------------------------------------------------------------- 8-10

struct SmokeSetup {
    inputs: AblationInputs,
    data: Dataset,
}

fn smoke_setup() -> Result<SmokeSetup, String> {
    let (montage, epochs) = synthetic_epochs(&SyntheticConfig { seed: 5, ..SyntheticConfig::default() }).map_err(|e| e.to_string())?;
    let pipeline = PipelineConfig {
        transform: TransformMethod::Tsne,
        tsne: TsneParams { perplexity: 10.0, seed: 5, ..TsneParams::default() },
        grid_h: 16,
        grid_w: 16,
        n_frames: 20,
        ..PipelineConfig::default()
    };
    let model = ModelConfig {
        stage: 2,
        c1: 8,
        n_frames: 20,
        h: 16,
        w: 16,
        num_blocks: 2,
        num_classes: 2,
        seed: 5,
        ..ModelConfig::default()
    };
    let train = TrainConfig { epochs: 50, seed: 5, execution: Execution::Sequential, ..TrainConfig::default() };
    let assignment = eegmap::harness::prepare_assignment(&montage, &pipeline).map_err(|e| e.to_string())?;
    let data = Dataset::from_epochs(epochs.clone(), assignment, 20, pipeline.normalization, 2, Execution::Sequential)
        .map_err(|e| e.to_string())?;
    Ok(SmokeSetup {
        inputs: AblationInputs { epochs, montage, num_classes: 2, pipeline, model, train, split_seed: 5, fold: 0 },
        data,
    })
}

fn smoke_run(setup: &SmokeSetup, dir: &Path) -> Result<(f64, f64, usize), String> {
    let plans = split_subjects(&setup.data.subjects(), setup.inputs.split_seed).map_err(|e| e.to_string())?;
    let plan = &plans[setup.inputs.fold];
    let report = run_fold(plan, &setup.data, &setup.inputs.model, &setup.inputs.train).map_err(|e| e.to_string())?;
    let manifest = vec![
        ("seed".to_string(), setup.inputs.train.seed.to_string()),
        ("epochs".to_string(), setup.inputs.train.epochs.to_string()),
    ];
    write_fold_outputs(dir, &report, &manifest).map_err(|e| e.to_string())?;
    let best_train = report.result.history.iter().map(|r| r.train_acc).fold(0.0, f64::max);
    let first_hit = report.result.history.iter().position(|r| r.train_acc >= 0.95).map_or(0, |i| i + 1);
    Ok((best_train, report.test.accuracy, first_hit))
}

fn learning_smoke(setup: &SmokeSetup, dir: &Path) -> Outcome {
    let start = Instant::now();
    let (train_acc, test_acc, first_hit) = smoke_run(setup, dir)?;
    let elapsed = start.elapsed();
    check(first_hit > 0 && first_hit <= 200, format!("training accuracy peaked at {train_acc:.3}"))?;
    check(test_acc >= 0.90, format!("held-out accuracy {test_acc:.3}"))?;
    check(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
    Ok(format!(
        "train acc >= 0.95 at epoch {first_hit}, held-out acc {test_acc:.3}, {} epochs in {elapsed:.1?}",
        setup.inputs.train.epochs
    ))
}

fn mixer_ablation(setup: &SmokeSetup) -> Outcome {
    let rows = run_ablation(AblationAxis::Mixer, &AblationAxis::Mixer.default_values(), &setup.inputs).map_err(|e| e.to_string())?;
    let acc = |v: &str| rows.iter().find(|r| r.value == v).map(|r| r.test_acc).ok_or(format!("missing {v} row"));
    let (stpool, none) = (acc("stpool")?, acc("none")?);
    check(rows.iter().all(|r| r.seed == setup.inputs.train.seed), "seed not recorded")?;
    check(stpool >= none - 0.02, format!("stpool {stpool:.3} vs none {none:.3}"))?;
    Ok(format!("held-out accuracy stpool {stpool:.3}, none {none:.3}"))
}

fn determinism(setup: &SmokeSetup, first: &Path, second: &Path) -> Outcome {
    smoke_run(setup, second)?;
    for name in ["metrics.csv", "confusion.csv", "best.ckpt", "manifest.txt"] {
        let a = fs::read(first.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = fs::read(second.join(name)).map_err(|e| format!("{name}: {e}"))?;
        check(a == b, format!("{name} differs between runs"))?;
    }
    let _ = format_manifest;
    Ok("metrics.csv, confusion.csv, best.ckpt, manifest.txt byte-identical".into())
}

// ----------------------------------------------------------------

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(why) => {
            println!("criterion {id:>2} FAIL  {name}: {why} [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let (first, second) = (tmp.path().join("run1"), tmp.path().join("run2"));
    let setup = smoke_setup();
    let setup_err = || -> Outcome { Err(format!("setup failed: {}", setup.as_ref().err().unwrap())) };

    let results = [
        run(1, "gradient oracle", gradient_oracle),
        run(2, "extractor output length", extractor_lengths),
        run(3, "t-SNE invariants", tsne_invariants),
        run(4, "rasterization oracle", rasterization_oracle),
        run(5, "positional encoding", positional_encoding_oracle),
        run(6, "EDF round trip", edf_round_trip),
        run(7, "split hygiene", split_hygiene),
        run(8, "end-to-end learning", || match &setup {
            Ok(s) => learning_smoke(s, &first),
            Err(_) => setup_err(),
        }),
        run(9, "mixer ablation", || match &setup {
            Ok(s) => mixer_ablation(s),
            Err(_) => setup_err(),
        }),
        run(10, "determinism", || match &setup {
            Ok(s) => determinism(s, &first, &second),
            Err(_) => setup_err(),
        }),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

//! `eegmap` command-line front end.
//!
//! Exit codes: 0 success, 2 bad input or configuration, 3 numeric failure,
//! 4 I/O failure.

mod config;
mod data;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use eegmap::coords::{transform, TransformMethod, TsneParams};
use eegmap::harness::{
    ablation_csv, confusion_csv, evaluate, format_manifest, prepare_assignment, run_ablation, run_fold, split_subjects,
    write_fold_outputs, AblationAxis, AblationInputs,
};
use eegmap::ingest::{parse_edf, parse_physionet_name, Epoch};
use eegmap::model::load_checkpoint;
use eegmap::synthetic::{write_synthetic_dataset, SyntheticEdfConfig};
use eegmap::topomap::{build_sequence, export_image, write_sequence_file};
use eegmap::{ErrorKind, Execution};
use log::info;

use config::{parse_subject_list, RunConfig};

/// Bad input that did not come from the library (missing files, bad flags).
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser)]
#[command(name = "eegmap", version, about = "EEG motor-imagery topographic map pipeline")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key (repeatable), e.g. `--set epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print header fields, channel labels and events of an EDF file.
    Inspect { edf: PathBuf },
    /// Project a montage to 2D coordinates and write them as CSV.
    Coords {
        /// Electrode CSV (label,x,y,z); defaults to the built-in 64-channel montage.
        #[arg(long)]
        montage: Option<PathBuf>,
        #[arg(long, default_value = "tsne")]
        method: TransformMethod,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        n_iter: Option<usize>,
        #[arg(long)]
        exaggeration: Option<f64>,
        #[arg(long)]
        exaggeration_iters: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        momentum_initial: Option<f64>,
        #[arg(long)]
        momentum_final: Option<f64>,
        #[arg(long)]
        momentum_switch: Option<usize>,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Render one epoch of a recording as PGM frames.
    Render {
        edf: PathBuf,
        /// Epoch index within the recording.
        #[arg(long, default_value_t = 0)]
        epoch: usize,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render every configured recording into per-subject sequence files.
    Cache {
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train one cross-validation fold and write metrics and checkpoint.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a checkpoint on the test subjects of the configured fold.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate on every loaded subject instead of the fold's test block.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train the configured fold once per value of one ablation axis.
    Ablate {
        #[arg(long)]
        axis: AblationAxis,
        /// Comma-separated values; defaults to the axis' standard set.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// CSV output; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a synthetic PhysioNet-style dataset of EDF+ files.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value = "1-6")]
        subjects: String,
        #[arg(long, value_delimiter = ',', default_value = "4,8,12")]
        runs: Vec<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<eegmap::Error>() {
            return match err.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Numeric => 3,
                ErrorKind::Io => 4,
            };
        }
        if cause.is::<InputError>() {
            return 2;
        }
        if cause.is::<std::io::Error>() {
            return 4;
        }
    }
    // Configuration and parse failures raised directly in the CLI.
    2
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Inspect { edf } => inspect(&edf),
        Command::Coords {
            montage,
            method,
            seed,
            perplexity,
            n_iter,
            exaggeration,
            exaggeration_iters,
            learning_rate,
            momentum_initial,
            momentum_final,
            momentum_switch,
            out,
        } => {
            let d = TsneParams::default();
            let params = TsneParams {
                perplexity: perplexity.unwrap_or(d.perplexity),
                n_iter: n_iter.unwrap_or(d.n_iter),
                early_exaggeration_factor: exaggeration.unwrap_or(d.early_exaggeration_factor),
                early_exaggeration_iters: exaggeration_iters.unwrap_or(d.early_exaggeration_iters),
                learning_rate: learning_rate.unwrap_or(d.learning_rate),
                momentum_initial: momentum_initial.unwrap_or(d.momentum_initial),
                momentum_final: momentum_final.unwrap_or(d.momentum_final),
                momentum_switch_iter: momentum_switch.unwrap_or(d.momentum_switch_iter),
                seed: seed.unwrap_or(d.seed),
            };
            let m = data::montage(montage.as_deref())?;
            let map = transform(&m, method, &params).map_err(eegmap::Error::from)?;
            emit(out.as_deref(), &map.to_csv())
        }
        Command::Render { edf, epoch, out, cfg } => render(&edf, epoch, &out, &resolve(&cfg, &[])?),
        Command::Cache { out, cfg } => cache(&out, &resolve(&cfg, &[])?),
        Command::Train { epochs, seed, out, cfg } => {
            let mut overrides = Vec::new();
            overrides.extend(epochs.map(|e| format!("epochs={e}")));
            overrides.extend(seed.map(|s| format!("seed={s}")));
            overrides.extend(out.map(|o| format!("out_dir={}", o.display())));
            train(resolve(&cfg, &overrides)?)
        }
        Command::Eval { checkpoint, all, cfg } => eval(&checkpoint, all, resolve(&cfg, &[])?),
        Command::Ablate { axis, values, out, cfg } => {
            let values = if values.is_empty() { axis.default_values() } else { values };
            ablate(axis, &values, out.as_deref(), &resolve(&cfg, &[])?)
        }
        Command::Synth { out, subjects, runs, seed } => {
            let subjects = parse_subject_list(&subjects)?.ok_or_else(|| InputError("empty subject list".into()))?;
            let cfg = SyntheticEdfConfig { seed, ..SyntheticEdfConfig::default() };
            let files = write_synthetic_dataset(&out, &subjects, &runs, &cfg).map_err(eegmap::Error::from)?;
            println!("wrote {} files under {}", files.len(), out.display());
            Ok(())
        }
    }
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn resolve(args: &ConfigArgs, flags: &[String]) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        if !path.is_file() {
            bail!(InputError(format!("config file {} does not exist", path.display())));
        }
        cfg.load_file(path)?;
    }
    for pair in args.set.iter().chain(flags) {
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_manifest(cfg: &RunConfig) {
    print!("{}", format_manifest(&cfg.manifest()));
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(eegmap::Error::from)?;
            }
            fs::write(p, text).map_err(eegmap::Error::from).with_context(|| format!("writing {}", p.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let f = parse_edf(&data::read_input(path)?).map_err(eegmap::Error::from).with_context(|| path.display().to_string())?;
    let h = &f.header;
    println!("file: {}", path.display());
    println!("version: {}", h.version);
    println!("patient_id: {}", h.patient_id);
    println!("recording_id: {}", h.recording_id);
    println!("start: {}", h.start);
    println!("header_bytes: {}", h.header_bytes);
    println!("n_records: {}", h.n_records);
    println!("record_duration_s: {}", h.record_duration);
    println!("duration_s: {}", f.recording.duration_s());
    println!("sample_rate: {}", f.recording.sample_rate_hz);
    println!("n_signals: {}", h.n_signals());
    println!("channels: {}", f.recording.channel_labels.join(" "));
    println!("events: {}", f.events.len());
    for e in &f.events {
        println!("  {:>9.3} {:>7.3} {}", e.onset_s, e.duration_s, e.label);
    }
    Ok(())
}

fn render(edf: &Path, index: usize, out: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    print_manifest(cfg);
    let name = edf.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let run = parse_physionet_name(&name).map_err(eegmap::Error::from)?;
    let montage = data::montage(cfg.path("montage").as_deref())?;
    let epochs = data::epochs_of(edf, run, cfg, &montage)?;
    let epoch: &Epoch = epochs
        .get(index)
        .ok_or_else(|| InputError(format!("epoch {index} out of range: {} has {} epochs", edf.display(), epochs.len())))?;
    let pipeline = cfg.pipeline()?;
    let assignment = prepare_assignment(&montage, &pipeline).map_err(eegmap::Error::from)?;
    let seq = build_sequence(epoch, &assignment, pipeline.n_frames, pipeline.normalization).map_err(eegmap::Error::from)?;
    fs::create_dir_all(out).map_err(eegmap::Error::from)?;
    for (t, frame) in seq.frames.iter().enumerate() {
        export_image(frame, &out.join(format!("frame_{t:03}.pgm"))).map_err(eegmap::Error::from)?;
    }
    println!("rendered {} frames (label {}) into {}", seq.n_frames(), seq.label, out.display());
    Ok(())
}

fn cache(out: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    print_manifest(cfg);
    let montage = data::montage(cfg.path("montage").as_deref())?;
    let pipeline = cfg.pipeline()?;
    let exec: Execution = cfg.get("execution")?;
    let assignment = prepare_assignment(&montage, &pipeline).map_err(eegmap::Error::from)?;
    let root = cfg.path("data_dir").ok_or_else(|| InputError("data_dir is not set".into()))?;
    let mut by_subject: BTreeMap<u32, Vec<_>> = BTreeMap::new();
    for (id, path) in data::recordings(&root, cfg)? {
        by_subject.entry(id.subject).or_default().push((id, path));
    }
    fs::create_dir_all(out).map_err(eegmap::Error::from)?;
    let subjects: Vec<_> = by_subject.into_iter().collect();
    // One file per subject; each worker writes only its own file.
    let counts = exec.try_map(&subjects, |(subject, files)| -> anyhow::Result<usize> {
        let mut seqs = Vec::new();
        for (id, path) in files {
            for e in data::epochs_of(path, *id, cfg, &montage)? {
                seqs.push(build_sequence(&e, &assignment, pipeline.n_frames, pipeline.normalization).map_err(eegmap::Error::from)?);
            }
        }
        write_sequence_file(&out.join(format!("S{subject:03}.topo")), &seqs).map_err(eegmap::Error::from)?;
        Ok(seqs.len())
    })?;
    fs::write(out.join("manifest.txt"), format_manifest(&cfg.manifest())).map_err(eegmap::Error::from)?;
    println!("cached {} sequences for {} subjects into {}", counts.iter().sum::<usize>(), subjects.len(), out.display());
    Ok(())
}

fn train(mut cfg: RunConfig) -> anyhow::Result<()> {
    let data = data::load_dataset(&mut cfg)?;
    print_manifest(&cfg);
    let out = cfg.path("out_dir").context("out_dir is not set")?;
    let plans = split_subjects(&data.subjects(), cfg.get("split_seed")?).map_err(eegmap::Error::from)?;
    let fold: usize = cfg.get("fold")?;
    let plan = plans.get(fold).ok_or_else(|| InputError(format!("fold {fold} out of range 0..{}", plans.len())))?;
    info!("fold {fold}: {} train, {} val, {} test subjects", plan.train_subjects.len(), plan.val_subjects.len(), plan.test_subjects.len());
    let report = run_fold(plan, &data, &cfg.model()?, &cfg.train()?).map_err(eegmap::Error::from)?;
    write_fold_outputs(&out, &report, &cfg.manifest()).map_err(eegmap::Error::from)?;
    let r = &report.result;
    println!(
        "best_epoch = {}\nbest_val_acc = {}\ntest_acc = {}\noutputs = {}",
        r.best_epoch.map_or("none".into(), |e| e.to_string()),
        r.best_val_acc.map_or("none".into(), |a| a.to_string()),
        report.test.accuracy,
        out.display()
    );
    Ok(())
}

fn eval(checkpoint: &Path, all: bool, mut cfg: RunConfig) -> anyhow::Result<()> {
    if !checkpoint.is_file() {
        bail!(InputError(format!("checkpoint {} does not exist", checkpoint.display())));
    }
    let model = load_checkpoint(checkpoint).map_err(eegmap::Error::from).with_context(|| checkpoint.display().to_string())?;
    let data = data::load_dataset(&mut cfg)?;
    print_manifest(&cfg);
    let samples = if all {
        data.samples.clone()
    } else {
        let plans = split_subjects(&data.subjects(), cfg.get("split_seed")?).map_err(eegmap::Error::from)?;
        let fold: usize = cfg.get("fold")?;
        let plan = plans.get(fold).ok_or_else(|| InputError(format!("fold {fold} out of range 0..{}", plans.len())))?;
        data.select(&plan.test_subjects).map_err(eegmap::Error::from)?
    };
    let exec: Execution = cfg.get("execution")?;
    let m = evaluate(&model, &samples, exec).map_err(eegmap::Error::from)?;
    println!("n_samples = {}\naccuracy = {}", m.n_samples(), m.accuracy);
    print!("{}", confusion_csv(&m));
    Ok(())
}

fn ablate(axis: AblationAxis, values: &[String], out: Option<&Path>, cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.path("cache_dir").is_some() {
        bail!(InputError("ablation re-renders maps and needs data_dir, not cache_dir".into()));
    }
    print_manifest(cfg);
    let montage = data::montage(cfg.path("montage").as_deref())?;
    let inputs = AblationInputs {
        epochs: data::load_epochs(cfg, &montage)?,
        montage,
        num_classes: cfg.scheme()?.num_classes(),
        pipeline: cfg.pipeline()?,
        model: cfg.model()?,
        train: cfg.train()?,
        split_seed: cfg.get("split_seed")?,
        fold: cfg.get("fold")?,
    };
    let rows = run_ablation(axis, values, &inputs).map_err(eegmap::Error::from)?;
    emit(out, &ablation_csv(&rows))
}

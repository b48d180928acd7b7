//! Locating and loading recordings and cached sequences.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use eegmap::harness::Dataset;
use eegmap::ingest::{default_montage, extract_epochs, load_montage, parse_edf, parse_physionet_name, ElectrodeMontage, Epoch, RunId};
use eegmap::topomap::read_sequence_file;
use eegmap::Execution;
use log::{info, warn};
use walkdir::WalkDir;

use crate::config::RunConfig;
use crate::InputError;

/// Read an input file, classing failures as bad input rather than I/O.
pub fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())).into())
}

pub fn montage(path: Option<&Path>) -> anyhow::Result<ElectrodeMontage> {
    match path {
        None => Ok(default_montage()),
        Some(p) => {
            let text = String::from_utf8(read_input(p)?).with_context(|| format!("{} is not UTF-8", p.display()))?;
            Ok(load_montage(&text).map_err(eegmap::Error::from).with_context(|| format!("montage {}", p.display()))?)
        }
    }
}

/// Epochs of one recording, aligned to the montage channel order.
pub fn epochs_of(path: &Path, run: RunId, cfg: &RunConfig, montage: &ElectrodeMontage) -> anyhow::Result<Vec<Epoch>> {
    let scheme = cfg.scheme()?;
    let window: f64 = cfg.get("window_s")?;
    let file = parse_edf(&read_input(path)?).map_err(eegmap::Error::from).with_context(|| path.display().to_string())?;
    let rec = file.recording.aligned_to(montage).map_err(eegmap::Error::from).with_context(|| path.display().to_string())?;
    // The final cue of a run can end past the recording; those windows are dropped.
    let events = rec.events_within(&file.events, window);
    if events.len() < file.events.len() {
        warn!("{}: dropped {} event(s) overrunning the recording", path.display(), file.events.len() - events.len());
    }
    extract_epochs(&rec, &events, run, scheme, window).map_err(eegmap::Error::from).with_context(|| path.display().to_string())
}

/// `SxxxRyy.edf` files under `root` for the configured runs and subjects, in
/// (subject, run) order.
pub fn recordings(root: &Path, cfg: &RunConfig) -> anyhow::Result<Vec<(RunId, PathBuf)>> {
    if !root.is_dir() {
        return Err(InputError(format!("data directory {} does not exist", root.display())).into());
    }
    let runs = cfg.scheme()?.runs();
    let subjects = cfg.subjects()?;
    let mut found = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", root.display()))?;
        let name = entry.file_name().to_string_lossy();
        if !entry.file_type().is_file() || !name.to_ascii_lowercase().ends_with(".edf") {
            continue;
        }
        let Ok(id) = parse_physionet_name(&name) else {
            warn!("skipping {}: not an SxxxRyy.edf name", entry.path().display());
            continue;
        };
        if runs.contains(&id.run) && subjects.as_ref().is_none_or(|s| s.binary_search(&id.subject).is_ok()) {
            found.push((id, entry.into_path()));
        }
    }
    found.sort();
    if found.is_empty() {
        bail!(InputError(format!("no matching recordings under {}", root.display())));
    }
    Ok(found)
}

pub fn load_epochs(cfg: &RunConfig, montage: &ElectrodeMontage) -> anyhow::Result<Vec<Epoch>> {
    let root = cfg.path("data_dir").ok_or_else(|| InputError("data_dir is not set".into()))?;
    let files = recordings(&root, cfg)?;
    let exec: Execution = cfg.get("execution")?;
    let per_file = exec.try_map(&files, |(id, path)| epochs_of(path, *id, cfg, montage))?;
    let epochs: Vec<Epoch> = per_file.into_iter().flatten().collect();
    info!("loaded {} epochs from {} recordings", epochs.len(), files.len());
    Ok(epochs)
}

/// Cached `.topo` files in `dir`, in file-name order.
pub fn cache_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(InputError(format!("cache directory {} does not exist", dir.display())).into());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "topo"))
        .collect();
    files.sort();
    Ok(files)
}

/// Dataset from `cache_dir` when set, otherwise rendered from `data_dir`.
///
/// Cached maps carry no raw signal, so signal noise is switched off (and the
/// manifest records `noise_scale = 0`).
pub fn load_dataset(cfg: &mut RunConfig) -> anyhow::Result<Dataset> {
    let num_classes = cfg.scheme()?.num_classes();
    if let Some(dir) = cfg.path("cache_dir") {
        let subjects = cfg.subjects()?;
        let mut seqs = Vec::new();
        for f in cache_files(&dir)? {
            let s = read_sequence_file(&f).map_err(eegmap::Error::from).with_context(|| f.display().to_string())?;
            seqs.extend(s.into_iter().filter(|s| subjects.as_ref().is_none_or(|l| l.binary_search(&s.subject_id).is_ok())));
        }
        if cfg.get::<f64>("noise_scale")? > 0.0 {
            warn!("cached maps have no raw signals; signal noise disabled");
            cfg.set("noise_scale", "0", Path::new(""))?;
        }
        let data = Dataset::from_sequences(seqs, num_classes).map_err(eegmap::Error::from)?;
        return Ok(data);
    }
    let montage = montage(cfg.path("montage").as_deref())?;
    let epochs = load_epochs(cfg, &montage)?;
    let pipeline = cfg.pipeline()?;
    let assignment = eegmap::harness::prepare_assignment(&montage, &pipeline).map_err(eegmap::Error::from)?;
    let data = Dataset::from_epochs(
        epochs,
        assignment,
        pipeline.n_frames,
        pipeline.normalization,
        num_classes,
        cfg.get("execution")?,
    )
    .map_err(eegmap::Error::from)?;
    Ok(data)
}

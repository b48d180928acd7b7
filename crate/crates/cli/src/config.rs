//! `key = value` run configuration.
//!
//! Every key has a default taken from the library types. A config file may
//! override any of them, `--set key=value` flags override the file, and the
//! resulting effective values form the run manifest.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use eegmap::coords::TsneParams;
use eegmap::harness::{PipelineConfig, TrainConfig};
use eegmap::ingest::ClassScheme;
use eegmap::model::ModelConfig;

/// Keys holding filesystem paths. Relative values from a config file resolve
/// against the file's directory, flag values against the working directory.
const PATH_KEYS: &[&str] = &["data_dir", "cache_dir", "montage", "out_dir", "dump_dir"];

#[derive(Debug, Clone)]
pub struct RunConfig {
    entries: Vec<(&'static str, String)>,
}

fn s(v: impl Display) -> String {
    v.to_string()
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        let t: &TsneParams = &p.tsne;
        let m = ModelConfig::default();
        let tr = TrainConfig::default();
        let entries = vec![
            ("data_dir", String::new()),
            ("cache_dir", String::new()),
            ("montage", String::new()),
            ("classes", s(ClassScheme::LR)),
            ("subjects", String::new()),
            ("window_s", s(6)),
            ("transform", s(p.transform)),
            ("perplexity", s(t.perplexity)),
            ("tsne_iter", s(t.n_iter)),
            ("tsne_exaggeration", s(t.early_exaggeration_factor)),
            ("tsne_exaggeration_iters", s(t.early_exaggeration_iters)),
            ("tsne_learning_rate", s(t.learning_rate)),
            ("tsne_momentum_initial", s(t.momentum_initial)),
            ("tsne_momentum_final", s(t.momentum_final)),
            ("tsne_momentum_switch", s(t.momentum_switch_iter)),
            ("tsne_seed", s(t.seed)),
            ("grid_h", s(p.grid_h)),
            ("grid_w", s(p.grid_w)),
            ("n_frames", s(p.n_frames)),
            ("normalization", s(p.normalization)),
            ("stage", s(m.stage)),
            ("c1", s(m.c1)),
            ("num_blocks", s(m.num_blocks)),
            ("pool_kernel", s(m.pool_kernel)),
            ("mlp_ratio", s(m.mlp_ratio)),
            ("layerscale_init", s(m.layerscale_init)),
            ("drop_rate", s(m.drop_rate)),
            ("shared_extractor", s(m.shared_extractor)),
            ("mixer", s(m.mixer)),
            ("model_seed", s(m.seed)),
            ("epochs", s(tr.epochs)),
            ("batch_size", s(tr.batch_size)),
            ("lr", s(tr.lr)),
            ("noise_scale", s(tr.noise_scale)),
            ("mix", s(tr.mix)),
            ("mixup_alpha", s(tr.mix_config.mixup_alpha)),
            ("cutmix_alpha", s(tr.mix_config.cutmix_alpha)),
            ("cutmix_prob", s(tr.mix_config.cutmix_prob)),
            ("seed", s(tr.seed)),
            ("split_seed", s(0)),
            ("fold", s(0)),
            ("execution", s(tr.execution)),
            ("dump_dir", String::new()),
            ("out_dir", "runs".into()),
        ];
        RunConfig { entries }
    }
}

impl RunConfig {
    /// Set one key; relative paths are resolved against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> anyhow::Result<()> {
        let Some(slot) = self.entries.iter_mut().find(|(k, _)| *k == key) else {
            bail!("unknown config key `{key}`");
        };
        let value = value.trim();
        slot.1 = if PATH_KEYS.contains(&key) && !value.is_empty() {
            let p = base.join(value);
            std::path::absolute(&p).unwrap_or(p).display().to_string()
        } else {
            value.to_string()
        };
        Ok(())
    }

    /// Apply a `key=value` override from the command line.
    pub fn set_pair(&mut self, pair: &str) -> anyhow::Result<()> {
        let (k, v) = pair.split_once('=').with_context(|| format!("expected key=value, got `{pair}`"))?;
        self.set(k.trim(), v, Path::new(""))
    }

    pub fn load_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected `key = value`", path.display(), i + 1))?;
            self.set(k.trim(), v, base).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.entries.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str()).expect("known key")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<T>
    where
        T::Err: Display,
    {
        let v = self.raw(key);
        v.parse().map_err(|e| anyhow::anyhow!("config key `{key}` = {v:?}: {e}"))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        Some(self.raw(key)).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    pub fn manifest(&self) -> Vec<(String, String)> {
        self.entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    pub fn scheme(&self) -> anyhow::Result<ClassScheme> {
        self.get("classes")
    }

    /// Subject filter, e.g. "1-10,12". `None` keeps every subject.
    pub fn subjects(&self) -> anyhow::Result<Option<Vec<u32>>> {
        parse_subject_list(self.raw("subjects")).context("config key `subjects`")
    }

    pub fn pipeline(&self) -> anyhow::Result<PipelineConfig> {
        Ok(PipelineConfig {
            transform: self.get("transform")?,
            tsne: TsneParams {
                perplexity: self.get("perplexity")?,
                n_iter: self.get("tsne_iter")?,
                early_exaggeration_factor: self.get("tsne_exaggeration")?,
                early_exaggeration_iters: self.get("tsne_exaggeration_iters")?,
                learning_rate: self.get("tsne_learning_rate")?,
                momentum_initial: self.get("tsne_momentum_initial")?,
                momentum_final: self.get("tsne_momentum_final")?,
                momentum_switch_iter: self.get("tsne_momentum_switch")?,
                seed: self.get("tsne_seed")?,
            },
            grid_h: self.get("grid_h")?,
            grid_w: self.get("grid_w")?,
            n_frames: self.get("n_frames")?,
            normalization: self.get("normalization")?,
        })
    }

    pub fn model(&self) -> anyhow::Result<ModelConfig> {
        Ok(ModelConfig {
            stage: self.get("stage")?,
            c1: self.get("c1")?,
            n_frames: self.get("n_frames")?,
            h: self.get("grid_h")?,
            w: self.get("grid_w")?,
            num_blocks: self.get("num_blocks")?,
            pool_kernel: self.get("pool_kernel")?,
            mlp_ratio: self.get("mlp_ratio")?,
            num_classes: self.scheme()?.num_classes(),
            layerscale_init: self.get("layerscale_init")?,
            drop_rate: self.get("drop_rate")?,
            shared_extractor: self.get("shared_extractor")?,
            mixer: self.get("mixer")?,
            seed: self.get("model_seed")?,
        })
    }

    pub fn train(&self) -> anyhow::Result<TrainConfig> {
        let mut t = TrainConfig {
            epochs: self.get("epochs")?,
            batch_size: self.get("batch_size")?,
            lr: self.get("lr")?,
            noise_scale: self.get("noise_scale")?,
            mix: self.get("mix")?,
            seed: self.get("seed")?,
            execution: self.get("execution")?,
            dump_dir: self.path("dump_dir"),
            ..TrainConfig::default()
        };
        t.mix_config.mixup_alpha = self.get("mixup_alpha")?;
        t.mix_config.cutmix_alpha = self.get("cutmix_alpha")?;
        t.mix_config.cutmix_prob = self.get("cutmix_prob")?;
        Ok(t)
    }

    /// Parse every typed key once so that bad values fail before any work.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.pipeline()?;
        self.model()?;
        self.train()?;
        self.subjects()?;
        self.get::<f64>("window_s")?;
        self.get::<u64>("split_seed")?;
        self.get::<usize>("fold")?;
        Ok(())
    }
}

pub fn parse_subject_list(text: &str) -> anyhow::Result<Option<Vec<u32>>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(None);
    }
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty range `{part}`");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse()?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(Some(out))
}

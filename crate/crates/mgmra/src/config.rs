//! Run configuration: `key = value` files, `#` comments, flag overrides.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mgmra_core::data::SynthConfig;
use mgmra_core::eval::EvalMode;
use mgmra_core::trainer::TrainConfig;

use crate::{Error, Result};

/// Name of the resolved configuration written next to every output.
pub const RESOLVED_FILE: &str = "resolved.cfg";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub mode: EvalMode,
    pub eval_seeds: usize,
    pub ablate_seeds: usize,
    pub gradcheck_instances: usize,
    pub dump_rankings: bool,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            mode: EvalMode::Main,
            eval_seeds: 10,
            ablate_seeds: 5,
            gradcheck_instances: 20,
            dump_rankings: false,
            dataset: None,
            checkpoint: None,
            out: None,
        }
    }
}

/// Every accepted key, in the order [`RunConfig::to_text`] writes them.
pub const KEYS: &[&str] = &[
    "seed",
    "num_train_ids",
    "num_test_ids",
    "samples_per_id",
    "input_dim",
    "num_stripes",
    "modality_gap",
    "noise",
    "hidden_dim",
    "feature_dim",
    "lr",
    "momentum",
    "epochs",
    "batches_per_epoch",
    "p",
    "k",
    "lambda1",
    "lambda2",
    "lambda3",
    "margin_tri",
    "margin_sem",
    "beta",
    "proto_p",
    "proto_i",
    "proto_s",
    "mgmra",
    "mode",
    "eval_seeds",
    "ablate_seeds",
    "gradcheck_instances",
    "dump_rankings",
    "dataset",
    "checkpoint",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("`{key}`: cannot parse `{value}`: {e}"))
}

fn parse_flag(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("`{key}` must be on or off, got `{value}`")),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Sets one key. `origin` labels errors (file and line, or a flag).
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<()> {
        self.set_inner(key, value.trim()).map_err(|detail| match detail {
            None => Error::UnknownKey {
                origin: origin.to_string(),
                key: key.to_string(),
            },
            Some(detail) => Error::BadValue {
                origin: origin.to_string(),
                detail,
            },
        })
    }

    fn set_inner(&mut self, key: &str, v: &str) -> std::result::Result<(), Option<String>> {
        let (s, t) = (&mut self.synth, &mut self.train);
        match key {
            "seed" => self.seed = parse(key, v)?,
            "num_train_ids" => s.num_train_ids = parse(key, v)?,
            "num_test_ids" => s.num_test_ids = parse(key, v)?,
            "samples_per_id" => s.samples_per_id_per_modality = parse(key, v)?,
            "input_dim" => {
                s.input_dim = parse(key, v)?;
                t.encoder.input_dim = s.input_dim;
            }
            "num_stripes" => {
                s.num_stripes = parse(key, v)?;
                t.encoder.num_stripes = s.num_stripes;
            }
            "modality_gap" => s.modality_gap = parse(key, v)?,
            "noise" => s.noise = parse(key, v)?,
            "hidden_dim" => t.encoder.hidden_dim = parse(key, v)?,
            "feature_dim" => t.encoder.feature_dim = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "momentum" => t.momentum = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "batches_per_epoch" => t.batches_per_epoch = parse(key, v)?,
            "p" => t.p = parse(key, v)?,
            "k" => t.k = parse(key, v)?,
            "lambda1" => t.weights.lambda1 = parse(key, v)?,
            "lambda2" => t.weights.lambda2 = parse(key, v)?,
            "lambda3" => t.weights.lambda3 = parse(key, v)?,
            "margin_tri" => t.weights.margin_tri = parse(key, v)?,
            "margin_sem" => t.weights.margin_sem = parse(key, v)?,
            "beta" => t.weights.beta = parse(key, v)?,
            "proto_p" => t.protos.parts = parse(key, v)?,
            "proto_i" => t.protos.instances = parse(key, v)?,
            "proto_s" => t.protos.semantics = parse(key, v)?,
            "mgmra" => t.mgmra_enabled = parse_flag(key, v)?,
            "mode" => {
                self.mode = match v {
                    "main" => EvalMode::Main,
                    "proto" => EvalMode::Proto,
                    _ => return Err(Some(format!("`mode` must be main or proto, got `{v}`"))),
                }
            }
            "eval_seeds" => self.eval_seeds = parse(key, v)?,
            "ablate_seeds" => self.ablate_seeds = parse(key, v)?,
            "gradcheck_instances" => self.gradcheck_instances = parse(key, v)?,
            "dump_rankings" => self.dump_rankings = parse_flag(key, v)?,
            "dataset" => self.dataset = path(v),
            "checkpoint" => self.checkpoint = path(v),
            "out" => self.out = path(v),
            _ => return Err(None),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("{source}:{}", n + 1);
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::BadValue {
                    origin,
                    detail: format!("expected `key = value`, got `{line}`"),
                });
            };
            self.set(key.trim(), value, &origin)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// The value of `key` as [`RunConfig::set`] accepts it.
    pub fn get(&self, key: &str) -> Option<String> {
        let (s, t) = (&self.synth, &self.train);
        let flag = |b: bool| if b { "on" } else { "off" }.to_string();
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        Some(match key {
            "seed" => self.seed.to_string(),
            "num_train_ids" => s.num_train_ids.to_string(),
            "num_test_ids" => s.num_test_ids.to_string(),
            "samples_per_id" => s.samples_per_id_per_modality.to_string(),
            "input_dim" => s.input_dim.to_string(),
            "num_stripes" => s.num_stripes.to_string(),
            "modality_gap" => s.modality_gap.to_string(),
            "noise" => s.noise.to_string(),
            "hidden_dim" => t.encoder.hidden_dim.to_string(),
            "feature_dim" => t.encoder.feature_dim.to_string(),
            "lr" => t.lr.to_string(),
            "momentum" => t.momentum.to_string(),
            "epochs" => t.epochs.to_string(),
            "batches_per_epoch" => t.batches_per_epoch.to_string(),
            "p" => t.p.to_string(),
            "k" => t.k.to_string(),
            "lambda1" => t.weights.lambda1.to_string(),
            "lambda2" => t.weights.lambda2.to_string(),
            "lambda3" => t.weights.lambda3.to_string(),
            "margin_tri" => t.weights.margin_tri.to_string(),
            "margin_sem" => t.weights.margin_sem.to_string(),
            "beta" => t.weights.beta.to_string(),
            "proto_p" => t.protos.parts.to_string(),
            "proto_i" => t.protos.instances.to_string(),
            "proto_s" => t.protos.semantics.to_string(),
            "mgmra" => flag(t.mgmra_enabled),
            "mode" => match self.mode {
                EvalMode::Main => "main",
                EvalMode::Proto => "proto",
            }
            .to_string(),
            "eval_seeds" => self.eval_seeds.to_string(),
            "ablate_seeds" => self.ablate_seeds.to_string(),
            "gradcheck_instances" => self.gradcheck_instances.to_string(),
            "dump_rankings" => flag(self.dump_rankings),
            "dataset" => p(&self.dataset),
            "checkpoint" => p(&self.checkpoint),
            "out" => p(&self.out),
            _ => return None,
        })
    }

    /// Every key with its value, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved mgmra run configuration\n");
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    /// Synthetic-data parameters with the run seed applied.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    /// Training parameters with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RESOLVED_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

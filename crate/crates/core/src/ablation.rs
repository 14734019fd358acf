//! Paired baseline vs memory-augmented runs.

use crate::data::{generate, SynthConfig};
use crate::eval::{evaluate, EvalMode};
use crate::trainer::{train, TrainConfig};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub seed: u64,
    pub rank1_base: f64,
    pub rank1_mgmra: f64,
    pub map_base: f64,
    pub map_mgmra: f64,
}

impl AblationRow {
    pub fn rank1_gain(&self) -> f64 {
        self.rank1_mgmra - self.rank1_base
    }
}

/// Generates the data with `seed`, trains both variants from the same
/// initialization and batch order, and evaluates the main branch.
pub fn ablate_seed(synth: &SynthConfig, train_cfg: &TrainConfig, seed: u64, eval_seeds: usize) -> Result<AblationRow> {
    let split = generate(&SynthConfig { seed, ..synth.clone() })?;
    let run = |mgmra_enabled: bool| -> Result<(f64, f64)> {
        let cfg = TrainConfig {
            seed,
            mgmra_enabled,
            ..train_cfg.clone()
        };
        let out = train(&cfg, &split.train)?;
        let rep = evaluate(&out.checkpoint.params, &split.query, &split.gallery, EvalMode::Main, eval_seeds, seed)?;
        Ok((rep.rank1(), rep.map))
    };
    let (rank1_base, map_base) = run(false)?;
    let (rank1_mgmra, map_mgmra) = run(true)?;
    Ok(AblationRow {
        seed,
        rank1_base,
        rank1_mgmra,
        map_base,
        map_mgmra,
    })
}

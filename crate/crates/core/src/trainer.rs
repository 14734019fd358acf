//! SGD-with-momentum training of encoder, classifiers and prototype memory.
//!
//! One training step encodes a PK batch, computes the identity and
//! hetero-center losses on the stripe features and, when the memory branch is
//! enabled, reads all stripe features through the prototype hierarchy. The
//! branch output `h_sem + f` feeds only the semantic triplet term; the
//! instance consistency and addressing entropy terms use the intermediate
//! readouts. Without the memory branch no memory tensor exists at all.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{pk_sample_indexed, Dataset};
use crate::encoder::{encode_graph, EncoderConfig, EncoderParams};
use crate::losses::{
    hetero_center_triplet, identity_ce, instance_consistency, memory_sparsity, semantic_triplet, total_loss, LossReport,
    LossTerms, LossWeights, MemoryTerms,
};
use crate::memory::{mg_mra_forward, residual_compose, Gate, MemoryConfig, MemoryVars, PrototypeMemory};
use crate::numerics::{Graph, Matrix, Rng, Var};
use crate::{Error, Result};

// Independent generator streams derived from the run seed.
const STREAM_ENCODER: u64 = 0;
const STREAM_MEMORY: u64 = 1;
const STREAM_SAMPLER: u64 = 2;
const STREAM_SPLIT: u64 = 3;

/// Prototypes per class at the part, instance and semantic level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtoCounts {
    pub parts: usize,
    pub instances: usize,
    pub semantics: usize,
}

impl Default for ProtoCounts {
    fn default() -> Self {
        Self {
            parts: 6,
            instances: 5,
            semantics: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    /// Identities per batch.
    pub p: usize,
    /// Samples per identity and modality.
    pub k: usize,
    pub weights: LossWeights,
    pub protos: ProtoCounts,
    pub encoder: EncoderConfig,
    pub seed: u64,
    pub mgmra_enabled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            epochs: 30,
            batches_per_epoch: 8,
            p: 8,
            k: 4,
            weights: LossWeights::default(),
            protos: ProtoCounts::default(),
            encoder: EncoderConfig::default(),
            seed: 0,
            mgmra_enabled: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.p < 2 || self.k < 1 {
            return Err(Error::Config(format!(
                "PK sampling needs P >= 2 and K >= 1, got P={} K={}",
                self.p, self.k
            )));
        }
        if self.batches_per_epoch == 0 {
            return Err(Error::Config("batches_per_epoch must be at least 1".into()));
        }
        self.weights.validate()?;
        self.encoder.validate()
    }

    pub fn memory_config(&self, num_classes: usize) -> Result<MemoryConfig> {
        MemoryConfig::new(
            self.protos.parts,
            self.protos.instances,
            self.protos.semantics,
            num_classes,
            self.encoder.feature_dim,
        )
    }
}

/// Every learnable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    /// Absent when the memory branch is disabled or stripped.
    pub memory: Option<PrototypeMemory>,
    pub num_classes: usize,
}

impl ModelParams {
    pub fn init(cfg: &TrainConfig, num_classes: usize) -> Result<Self> {
        cfg.validate()?;
        let encoder = EncoderParams::init(cfg.encoder, num_classes, &mut Rng::with_stream(cfg.seed, STREAM_ENCODER))?;
        let memory = if cfg.mgmra_enabled {
            let mc = cfg.memory_config(num_classes)?;
            Some(PrototypeMemory::init(mc, &mut Rng::with_stream(cfg.seed, STREAM_MEMORY)))
        } else {
            None
        };
        Ok(Self {
            encoder,
            memory,
            num_classes,
        })
    }

    /// Named tensors in canonical order.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let e = &self.encoder;
        let mut out: Vec<(String, &Matrix)> = Vec::new();
        for (m, stage) in e.modality.iter().enumerate() {
            out.push((format!("encoder/modality{m}/weight"), &stage.weight));
            out.push((format!("encoder/modality{m}/bias"), &stage.bias));
        }
        out.push(("encoder/shared_hidden/weight".into(), &e.shared_hidden.weight));
        out.push(("encoder/shared_hidden/bias".into(), &e.shared_hidden.bias));
        out.push(("encoder/shared_out/weight".into(), &e.shared_out.weight));
        out.push(("encoder/shared_out/bias".into(), &e.shared_out.bias));
        for (s, c) in e.classifiers.iter().enumerate() {
            out.push((format!("classifier/{s}"), c));
        }
        if let Some(mem) = &self.memory {
            out.push(("memory/part_rows".into(), &mem.part_rows));
            out.push(("memory/gate_ins/weight".into(), &mem.gate_ins.weight));
            out.push(("memory/gate_ins/bias".into(), &mem.gate_ins.bias));
            out.push(("memory/gate_sem/weight".into(), &mem.gate_sem.weight));
            out.push(("memory/gate_sem/bias".into(), &mem.gate_sem.bias));
        }
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::named_tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let e = &mut self.encoder;
        let mut out: Vec<&mut Matrix> = Vec::new();
        for stage in e.modality.iter_mut() {
            out.push(&mut stage.weight);
            out.push(&mut stage.bias);
        }
        out.push(&mut e.shared_hidden.weight);
        out.push(&mut e.shared_hidden.bias);
        out.push(&mut e.shared_out.weight);
        out.push(&mut e.shared_out.bias);
        out.extend(e.classifiers.iter_mut());
        if let Some(mem) = &mut self.memory {
            out.push(&mut mem.part_rows);
            out.push(&mut mem.gate_ins.weight);
            out.push(&mut mem.gate_ins.bias);
            out.push(&mut mem.gate_sem.weight);
            out.push(&mut mem.gate_sem.bias);
        }
        out
    }
}

/// Everything needed to resume or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub params: ModelParams,
}

impl Checkpoint {
    /// Flattens to named tensors; configuration values become `1×1` tensors
    /// under `config/`.
    pub fn to_tensors(&self) -> Vec<(String, Matrix)> {
        let c = &self.config;
        let mut out: Vec<(String, Matrix)> = Vec::new();
        let mut meta = |name: &str, v: f64| out.push((format!("config/{name}"), Matrix::scalar(v)));
        meta("epoch", self.epoch as f64);
        meta("num_classes", self.params.num_classes as f64);
        meta("lr", c.lr);
        meta("momentum", c.momentum);
        meta("epochs", c.epochs as f64);
        meta("batches_per_epoch", c.batches_per_epoch as f64);
        meta("p", c.p as f64);
        meta("k", c.k as f64);
        meta("lambda1", c.weights.lambda1);
        meta("lambda2", c.weights.lambda2);
        meta("lambda3", c.weights.lambda3);
        meta("margin_tri", c.weights.margin_tri);
        meta("margin_sem", c.weights.margin_sem);
        meta("beta", c.weights.beta);
        meta("proto_parts", c.protos.parts as f64);
        meta("proto_instances", c.protos.instances as f64);
        meta("proto_semantics", c.protos.semantics as f64);
        meta("input_dim", c.encoder.input_dim as f64);
        meta("hidden_dim", c.encoder.hidden_dim as f64);
        meta("feature_dim", c.encoder.feature_dim as f64);
        meta("num_stripes", c.encoder.num_stripes as f64);
        meta("seed_hi", (c.seed >> 32) as f64);
        meta("seed_lo", (c.seed & 0xffff_ffff) as f64);
        meta("mgmra", if c.mgmra_enabled { 1.0 } else { 0.0 });
        out.extend(self.params.named_tensors().into_iter().map(|(n, m)| (n, m.clone())));
        out
    }

    /// Inverse of [`Checkpoint::to_tensors`]. Memory tensors may be absent,
    /// in which case the model has no memory.
    pub fn from_tensors(tensors: Vec<(String, Matrix)>) -> Result<Self> {
        let mut map: BTreeMap<String, Matrix> = BTreeMap::new();
        for (name, m) in tensors {
            if map.insert(name.clone(), m).is_some() {
                return Err(Error::Contract(format!("checkpoint: duplicate tensor {name}")));
            }
        }
        let scalar = |map: &BTreeMap<String, Matrix>, name: &str| -> Result<f64> {
            map.get(&format!("config/{name}"))
                .and_then(Matrix::as_scalar)
                .ok_or_else(|| Error::Contract(format!("checkpoint: missing config/{name}")))
        };
        let count = |map: &BTreeMap<String, Matrix>, name: &str| -> Result<usize> {
            let v = scalar(map, name)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Contract(format!("checkpoint: config/{name} = {v} is not a count")));
            }
            Ok(v as usize)
        };
        let encoder_cfg = EncoderConfig {
            input_dim: count(&map, "input_dim")?,
            hidden_dim: count(&map, "hidden_dim")?,
            feature_dim: count(&map, "feature_dim")?,
            num_stripes: count(&map, "num_stripes")?,
        };
        let config = TrainConfig {
            lr: scalar(&map, "lr")?,
            momentum: scalar(&map, "momentum")?,
            epochs: count(&map, "epochs")?,
            batches_per_epoch: count(&map, "batches_per_epoch")?,
            p: count(&map, "p")?,
            k: count(&map, "k")?,
            weights: LossWeights {
                lambda1: scalar(&map, "lambda1")?,
                lambda2: scalar(&map, "lambda2")?,
                lambda3: scalar(&map, "lambda3")?,
                margin_tri: scalar(&map, "margin_tri")?,
                margin_sem: scalar(&map, "margin_sem")?,
                beta: scalar(&map, "beta")?,
            },
            protos: ProtoCounts {
                parts: count(&map, "proto_parts")?,
                instances: count(&map, "proto_instances")?,
                semantics: count(&map, "proto_semantics")?,
            },
            encoder: encoder_cfg,
            seed: ((count(&map, "seed_hi")? as u64) << 32) | count(&map, "seed_lo")? as u64,
            mgmra_enabled: scalar(&map, "mgmra")? != 0.0,
        };
        let epoch = count(&map, "epoch")?;
        let num_classes = count(&map, "num_classes")?;

        let has_memory = map.contains_key("memory/part_rows");
        let mut take = |name: &str, shape: (usize, usize)| -> Result<Matrix> {
            let m = map
                .remove(name)
                .ok_or_else(|| Error::Contract(format!("checkpoint: missing tensor {name}")))?;
            if m.shape() != shape {
                return Err(Error::Dimension {
                    op: "checkpoint tensor",
                    left: shape,
                    right: m.shape(),
                });
            }
            Ok(m)
        };
        let (d, h, c) = (encoder_cfg.input_dim, encoder_cfg.hidden_dim, encoder_cfg.feature_dim);
        let mut encoder = EncoderParams::zeros(encoder_cfg, num_classes);
        for m in 0..2 {
            encoder.modality[m].weight = take(&format!("encoder/modality{m}/weight"), (d, h))?;
            encoder.modality[m].bias = take(&format!("encoder/modality{m}/bias"), (1, h))?;
        }
        encoder.shared_hidden.weight = take("encoder/shared_hidden/weight", (h, h))?;
        encoder.shared_hidden.bias = take("encoder/shared_hidden/bias", (1, h))?;
        encoder.shared_out.weight = take("encoder/shared_out/weight", (h, c))?;
        encoder.shared_out.bias = take("encoder/shared_out/bias", (1, c))?;
        for s in 0..encoder_cfg.num_stripes {
            encoder.classifiers[s] = take(&format!("classifier/{s}"), (c, num_classes))?;
        }

        let memory = if has_memory {
            let mc = config.memory_config(num_classes)?;
            let (n_part, _, _) = mc.level_rows();
            let part_rows = take("memory/part_rows", (n_part, c))?;
            let gate_ins = Gate {
                weight: take("memory/gate_ins/weight", (1, c))?,
                bias: take("memory/gate_ins/bias", (1, 1))?,
            };
            let gate_sem = Gate {
                weight: take("memory/gate_sem/weight", (1, c))?,
                bias: take("memory/gate_sem/bias", (1, 1))?,
            };
            Some(PrototypeMemory::from_parts(mc, part_rows, gate_ins, gate_sem)?)
        } else {
            None
        };
        Ok(Self {
            config,
            epoch,
            params: ModelParams {
                encoder,
                memory,
                num_classes,
            },
        })
    }
}

/// `v ← momentum·v − lr·g`, `θ ← θ + v`.
pub fn sgd_step(param: &mut Matrix, grad: &Matrix, velocity: &mut Matrix, lr: f64, momentum: f64) -> Result<()> {
    param.same_shape(grad, "sgd_step")?;
    param.same_shape(velocity, "sgd_step")?;
    for ((p, &g), v) in param.data_mut().iter_mut().zip(grad.data()).zip(velocity.data_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    Ok(())
}

/// Result of one forward/backward pass.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub report: LossReport,
    /// Gradients in [`ModelParams::named_tensors`] order.
    pub grads: Vec<Matrix>,
}

/// Maps dataset identities to dense class indices `0..N_c`.
#[derive(Debug, Clone)]
pub struct ClassMap {
    index: BTreeMap<u32, usize>,
}

impl ClassMap {
    pub fn new(dataset: &Dataset) -> Self {
        Self {
            index: dataset.identities().into_iter().enumerate().map(|(i, id)| (id, i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn class(&self, identity: u32) -> Result<usize> {
        self.index
            .get(&identity)
            .copied()
            .ok_or_else(|| Error::Contract(format!("identity {identity} is not a training class")))
    }
}

/// Builds the full objective on a fresh graph and differentiates it.
pub fn loss_and_grads(
    params: &ModelParams,
    weights: &LossWeights,
    dataset: &Dataset,
    batch: &[usize],
    classes: &ClassMap,
    split_rng: &mut Rng,
) -> Result<StepOutcome> {
    let records = dataset.records();
    let labels: Vec<usize> = batch.iter().map(|&i| classes.class(records[i].identity)).collect::<Result<_>>()?;
    let modalities: Vec<u8> = batch.iter().map(|&i| records[i].modality).collect();

    let mut g = Graph::new();
    let enc = params.encoder.bind(&mut g);
    let mem_vars = params.memory.as_ref().map(|m| m.bind(&mut g));
    let mut leaves = Vec::new();
    for stage in &enc.modality {
        leaves.push(stage.weight);
        leaves.push(stage.bias);
    }
    leaves.extend([enc.shared_hidden.weight, enc.shared_hidden.bias, enc.shared_out.weight, enc.shared_out.bias]);
    leaves.extend(enc.classifiers.iter().copied());
    if let Some(m) = &mem_vars {
        leaves.extend([m.part_rows, m.gate_ins_weight, m.gate_ins_bias, m.gate_sem_weight, m.gate_sem_bias]);
    }

    let x = g.leaf(dataset.stack_stripes(batch));
    let features = encode_graph(&mut g, &enc, &params.encoder.config, x, &modalities)?;
    let memory = match (&params.memory, &mem_vars) {
        (Some(mem), Some(vars)) => Some((vars, mem.config())),
        _ => None,
    };
    let (total, report) = objective(
        &mut g,
        &features,
        &enc.classifiers,
        memory,
        &labels,
        &modalities,
        weights,
        split_rng,
    )?;
    if !report.total.is_finite() {
        return Err(Error::NumericHealth {
            component: "total".to_string(),
            value: report.total,
        });
    }
    let grads = g.backward(total)?;
    let named = params.named_tensors();
    let grads = leaves.iter().zip(&named).map(|(&v, (_, m))| grads.get_or_zeros(v, m)).collect();
    Ok(StepOutcome { report, grads })
}

/// The training objective on per-stripe features (`B×C` each).
///
/// Identity CE and the hetero-center triplet act on the stripe features; with
/// a memory, all stripes are read through it together and the memory terms
/// are added.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    g: &mut Graph,
    features: &[Var],
    classifiers: &[Var],
    memory: Option<(&MemoryVars, &MemoryConfig)>,
    labels: &[usize],
    modalities: &[u8],
    weights: &LossWeights,
    split_rng: &mut Rng,
) -> Result<(Var, LossReport)> {
    if features.len() != classifiers.len() {
        return Err(Error::Contract(format!(
            "{} stripes but {} classifiers",
            features.len(),
            classifiers.len()
        )));
    }
    let logits: Vec<Var> = features
        .iter()
        .zip(classifiers)
        .map(|(&f, &w)| g.matmul(f, w))
        .collect::<Result<_>>()?;
    let id = identity_ce(g, &logits, labels)?;
    let hc_terms: Vec<Var> = features
        .iter()
        .map(|&f| hetero_center_triplet(g, f, labels, modalities, weights.margin_tri))
        .collect::<Result<_>>()?;
    let hc_tri = stripe_mean(g, &hc_terms)?;

    let memory = match memory {
        Some((vars, config)) => {
            let b = labels.len();
            let queries = g.concat_rows(features)?;
            let readout = mg_mra_forward(g, queries, vars, config)?;
            let composed = residual_compose(g, queries, &readout)?;
            let mut h_ins = Vec::with_capacity(features.len());
            let mut sem_terms = Vec::with_capacity(features.len());
            for s in 0..features.len() {
                h_ins.push(g.slice_rows(readout.h_ins, s * b, (s + 1) * b)?);
                let h = g.slice_rows(composed, s * b, (s + 1) * b)?;
                sem_terms.push(semantic_triplet(g, h, labels, weights.margin_sem)?);
            }
            let sem = stripe_mean(g, &sem_terms)?;
            let ins = instance_consistency(g, &h_ins, split_rng)?;
            let mem_sparsity = memory_sparsity(g, &[readout.w_part, readout.w_ins, readout.w_sem])?;
            Some(MemoryTerms { mem_sparsity, ins, sem })
        }
        None => None,
    };
    total_loss(g, &LossTerms { id, hc_tri, memory }, weights)
}

fn stripe_mean(g: &mut Graph, terms: &[Var]) -> Result<Var> {
    let stacked = g.concat_rows(terms)?;
    g.mean_all(stacked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Mean loss report of every epoch.
    pub epoch_reports: Vec<LossReport>,
}

/// Runs `cfg.epochs` epochs of PK-sampled SGD. Deterministic in `cfg.seed`.
pub fn train(cfg: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    train_with(cfg, dataset, |_, _| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(cfg: &TrainConfig, dataset: &Dataset, mut on_epoch: impl FnMut(usize, &LossReport)) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.num_stripes() != cfg.encoder.num_stripes || dataset.input_dim() != cfg.encoder.input_dim {
        return Err(Error::Dimension {
            op: "train dataset",
            left: (cfg.encoder.num_stripes, cfg.encoder.input_dim),
            right: (dataset.num_stripes(), dataset.input_dim()),
        });
    }
    let classes = ClassMap::new(dataset);
    let mut params = ModelParams::init(cfg, classes.len())?;
    let index = dataset.index();
    let mut sampler = Rng::with_stream(cfg.seed, STREAM_SAMPLER);
    let mut splitter = Rng::with_stream(cfg.seed, STREAM_SPLIT);
    let mut velocity: Vec<Matrix> = params
        .named_tensors()
        .iter()
        .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
        .collect();

    let mut epoch_reports = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut reports = Vec::with_capacity(cfg.batches_per_epoch);
        for b in 0..cfg.batches_per_epoch {
            let batch = pk_sample_indexed(&index, cfg.p, cfg.k, &mut sampler)?;
            let step = loss_and_grads(&params, &cfg.weights, dataset, &batch, &classes, &mut splitter).map_err(|e| match e {
                Error::NumericHealth { component, value } => Error::NumericHealth {
                    component: format!("epoch {epoch} batch {b}: {component}"),
                    value,
                },
                // collapsed or overflowing rows during training
                Error::Degenerate { op, row } => Error::NumericHealth {
                    component: format!("epoch {epoch} batch {b}: degenerate row {row} in {op}"),
                    value: 0.0,
                },
                other => other,
            })?;
            for ((p, g), v) in params.tensors_mut().into_iter().zip(&step.grads).zip(velocity.iter_mut()) {
                sgd_step(p, g, v, cfg.lr, cfg.momentum)?;
            }
            if let Some((name, m)) = params.named_tensors().into_iter().find(|(_, m)| !m.is_finite()) {
                let value = m.data().iter().copied().find(|v| !v.is_finite()).unwrap_or(f64::NAN);
                return Err(Error::NumericHealth {
                    component: format!("epoch {epoch} batch {b}: parameter {name}"),
                    value,
                });
            }
            reports.push(step.report);
        }
        let mean = LossReport::mean(&reports);
        on_epoch(epoch, &mean);
        epoch_reports.push(mean);
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: cfg.clone(),
            epoch: cfg.epochs,
            params,
        },
        epoch_reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, SynthConfig};

    #[test]
    fn sgd_first_and_second_step() {
        let mut p = Matrix::scalar(0.0);
        let mut v = Matrix::scalar(0.0);
        let g = Matrix::scalar(1.0);
        sgd_step(&mut p, &g, &mut v, 0.1, 0.9).unwrap();
        assert!((p.get(0, 0) + 0.1).abs() < 1e-15);
        sgd_step(&mut p, &g, &mut v, 0.1, 0.9).unwrap();
        assert!((v.get(0, 0) + 0.19).abs() < 1e-15);
        assert!((p.get(0, 0) + 0.29).abs() < 1e-15);
    }

    #[test]
    fn sgd_without_momentum_is_plain_descent() {
        let mut rng = Rng::new(1);
        let mut p = Matrix::random_uniform(3, 2, -1.0, 1.0, &mut rng);
        let start = p.clone();
        let g = Matrix::random_uniform(3, 2, -1.0, 1.0, &mut rng);
        let mut v = Matrix::random_uniform(3, 2, -1.0, 1.0, &mut rng);
        sgd_step(&mut p, &g, &mut v, 0.05, 0.0).unwrap();
        for ((a, b), gg) in p.data().iter().zip(start.data()).zip(g.data()) {
            assert_eq!(*a, b - 0.05 * gg);
        }
    }

    #[test]
    fn sgd_zero_lr_from_rest_changes_nothing() {
        let mut p = Matrix::from_rows(&[[1.0, -2.0]]);
        let mut v = Matrix::zeros(1, 2);
        sgd_step(&mut p, &Matrix::from_rows(&[[3.0, 4.0]]), &mut v, 0.0, 0.9).unwrap();
        assert_eq!(p, Matrix::from_rows(&[[1.0, -2.0]]));
    }

    #[test]
    fn sgd_shape_mismatch() {
        let mut p = Matrix::zeros(2, 2);
        let mut v = Matrix::zeros(2, 2);
        assert!(matches!(
            sgd_step(&mut p, &Matrix::zeros(2, 1), &mut v, 0.1, 0.9),
            Err(Error::Dimension { .. })
        ));
    }

    fn tiny() -> (TrainConfig, Dataset) {
        let synth = SynthConfig {
            num_train_ids: 6,
            num_test_ids: 2,
            samples_per_id_per_modality: 3,
            input_dim: 5,
            num_stripes: 2,
            seed: 3,
            ..SynthConfig::default()
        };
        let cfg = TrainConfig {
            epochs: 2,
            batches_per_epoch: 2,
            p: 3,
            k: 2,
            protos: ProtoCounts {
                parts: 2,
                instances: 2,
                semantics: 1,
            },
            encoder: EncoderConfig {
                input_dim: 5,
                hidden_dim: 6,
                feature_dim: 4,
                num_stripes: 2,
            },
            seed: 11,
            ..TrainConfig::default()
        };
        (cfg, generate(&synth).unwrap().train)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (cfg, ds) = tiny();
        let cfg = TrainConfig { epochs: 0, ..cfg };
        let out = train(&cfg, &ds).unwrap();
        assert_eq!(out.checkpoint.params, ModelParams::init(&cfg, 6).unwrap());
        assert!(out.epoch_reports.is_empty());
    }

    #[test]
    fn same_seed_same_run() {
        let (cfg, ds) = tiny();
        assert_eq!(train(&cfg, &ds).unwrap(), train(&cfg, &ds).unwrap());
    }

    #[test]
    fn checkpoint_tensor_roundtrip() {
        let (cfg, ds) = tiny();
        let cfg = TrainConfig { seed: u64::MAX - 5, ..cfg };
        let ck = train(&cfg, &ds).unwrap().checkpoint;
        let back = Checkpoint::from_tensors(ck.to_tensors()).unwrap();
        assert_eq!(back, ck);
        let stripped: Vec<(String, Matrix)> = ck.to_tensors().into_iter().filter(|(n, _)| !n.starts_with("memory/")).collect();
        let bare = Checkpoint::from_tensors(stripped).unwrap();
        assert!(bare.params.memory.is_none());
        assert_eq!(bare.params.encoder, ck.params.encoder);
    }

    #[test]
    fn baseline_has_no_memory_and_ignores_memory_config() {
        let (cfg, ds) = tiny();
        let base = TrainConfig { mgmra_enabled: false, ..cfg.clone() };
        let other = TrainConfig {
            protos: ProtoCounts {
                parts: 3,
                instances: 1,
                semantics: 2,
            },
            ..base.clone()
        };
        let a = train(&base, &ds).unwrap();
        let b = train(&other, &ds).unwrap();
        assert!(a.checkpoint.params.memory.is_none());
        assert_eq!(a.epoch_reports, b.epoch_reports);
        assert!(a.epoch_reports.iter().all(|r| r.mem_sparsity == 0.0 && r.ins == 0.0 && r.sem == 0.0));
        // the encoder starts from the same point with or without memory
        let with_mem = ModelParams::init(&cfg, 6).unwrap();
        let without = ModelParams::init(&base, 6).unwrap();
        assert_eq!(with_mem.encoder, without.encoder);
    }

    #[test]
    fn memory_gets_gradient_only_when_enabled() {
        let (cfg, ds) = tiny();
        let params = ModelParams::init(&cfg, 6).unwrap();
        let classes = ClassMap::new(&ds);
        let batch = crate::data::pk_sample(&ds, 3, 2, &mut Rng::new(0)).unwrap();
        let step = loss_and_grads(&params, &cfg.weights, &ds, &batch, &classes, &mut Rng::new(1)).unwrap();
        let names = params.named_tensors();
        let part = names.iter().position(|(n, _)| n == "memory/part_rows").unwrap();
        assert!(step.grads[part].max_abs() > 0.0);

        // λ1 = λ2 = λ3 = 0 leaves the branch attached but zero-weighted
        let silent = LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            ..cfg.weights
        };
        let step = loss_and_grads(&params, &silent, &ds, &batch, &classes, &mut Rng::new(1)).unwrap();
        assert_eq!(step.grads[part].max_abs(), 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let (cfg, ds) = tiny();
        assert!(train(&TrainConfig { lr: 0.0, ..cfg.clone() }, &ds).is_err());
        assert!(train(&TrainConfig { momentum: 1.0, ..cfg.clone() }, &ds).is_err());
        let wrong_dims = TrainConfig {
            encoder: EncoderConfig { input_dim: 7, ..cfg.encoder },
            ..cfg
        };
        assert!(matches!(train(&wrong_dims, &ds), Err(Error::Dimension { .. })));
    }

    #[test]
    fn divergence_is_reported() {
        let (cfg, ds) = tiny();
        let wild = TrainConfig {
            lr: 1e200,
            momentum: 0.0,
            ..cfg
        };
        match train(&wild, &ds) {
            Err(Error::NumericHealth { component, .. }) => assert!(component.starts_with("epoch "), "{component}"),
            other => panic!("expected a numeric failure, got {other:?}"),
        }
    }
}

//! Hierarchical prototype memory.
//!
//! The bank stores only part-level prototypes. Instance and semantic
//! prototypes are derived on every forward pass by gated block averaging, so
//! gradients from every level flow back into the part rows and the two gates.
//!
//! Part rows are laid out lexicographically by
//! `(class, semantic slot, modality, instance slot, part slot)`:
//!
//! * instance level: consecutive blocks of `parts_per` part rows, one row per
//!   `(class, semantic slot, modality, instance slot)`, so each modality keeps
//!   its own instance prototypes;
//! * semantic level: consecutive blocks of `2 · instances_per` instance rows,
//!   one row per `(class, semantic slot)`, merging the two modalities.
//!
//! Reading a level is a softmax over cosine similarities followed by a
//! weighted sum of the level's rows.

use alloc::format;

use crate::numerics::{Graph, Matrix, Rng, Var};
use crate::{Error, Result};

pub const NUM_MODALITIES: usize = 2;

/// Row norms below this are redrawn at initialization.
const MIN_INIT_NORM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryConfig {
    pub parts_per: usize,
    pub instances_per: usize,
    pub semantics_per: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl MemoryConfig {
    pub fn new(
        parts_per: usize,
        instances_per: usize,
        semantics_per: usize,
        num_classes: usize,
        feature_dim: usize,
    ) -> Result<Self> {
        let cfg = Self {
            parts_per,
            instances_per,
            semantics_per,
            num_classes,
            feature_dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Six part, five instance and one semantic prototype per class.
    pub fn with_default_counts(num_classes: usize, feature_dim: usize) -> Result<Self> {
        Self::new(6, 5, 1, num_classes, feature_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("parts_per", self.parts_per),
            ("instances_per", self.instances_per),
            ("semantics_per", self.semantics_per),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("memory {name} must be at least 1")));
            }
        }
        if self.feature_dim < 2 {
            return Err(Error::Config(format!(
                "memory feature_dim must be at least 2, got {}",
                self.feature_dim
            )));
        }
        Ok(())
    }

    /// Row counts of the part, instance and semantic levels.
    pub fn level_rows(&self) -> (usize, usize, usize) {
        let sem = self.num_classes * self.semantics_per;
        let ins = sem * NUM_MODALITIES * self.instances_per;
        (ins * self.parts_per, ins, sem)
    }

    /// Part rows averaged into one instance row.
    pub fn instance_group(&self) -> usize {
        self.parts_per
    }

    /// Instance rows averaged into one semantic row.
    pub fn semantic_group(&self) -> usize {
        NUM_MODALITIES * self.instances_per
    }

    /// Position of a part prototype in the bank.
    pub fn part_row_index(
        &self,
        class: usize,
        semantic: usize,
        modality: usize,
        instance: usize,
        part: usize,
    ) -> usize {
        (((class * self.semantics_per + semantic) * NUM_MODALITIES + modality) * self.instances_per
            + instance)
            * self.parts_per
            + part
    }
}

/// `α = sigmoid(⟨weight, row⟩ + bias)`, evaluated per prototype row.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    /// `1 × C`
    pub weight: Matrix,
    /// `1 × 1`
    pub bias: Matrix,
}

impl Gate {
    pub fn init(feature_dim: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / libm::sqrt(feature_dim as f64);
        Self {
            weight: Matrix::random_uniform(1, feature_dim, -bound, bound, rng),
            bias: Matrix::zeros(1, 1),
        }
    }

    pub fn constant(feature_dim: usize, weight: f64, bias: f64) -> Self {
        Self {
            weight: Matrix::filled(1, feature_dim, weight),
            bias: Matrix::scalar(bias),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMemory {
    config: MemoryConfig,
    pub part_rows: Matrix,
    pub gate_ins: Gate,
    pub gate_sem: Gate,
}

impl PrototypeMemory {
    /// Part rows uniform in `[−1/√C, 1/√C]`, gates with zero bias.
    pub fn init(config: MemoryConfig, rng: &mut Rng) -> Self {
        let c = config.feature_dim;
        let (n_part, _, _) = config.level_rows();
        let bound = 1.0 / libm::sqrt(c as f64);
        let mut part_rows = Matrix::zeros(n_part, c);
        for r in 0..n_part {
            loop {
                for v in part_rows.row_mut(r) {
                    *v = rng.uniform(-bound, bound);
                }
                let n = libm::sqrt(part_rows.row(r).iter().map(|v| v * v).sum::<f64>());
                if n >= MIN_INIT_NORM {
                    break;
                }
            }
        }
        let gate_ins = Gate::init(c, rng);
        let gate_sem = Gate::init(c, rng);
        Self {
            config,
            part_rows,
            gate_ins,
            gate_sem,
        }
    }

    /// Assembles a bank from explicit parts, checking shapes.
    pub fn from_parts(config: MemoryConfig, part_rows: Matrix, gate_ins: Gate, gate_sem: Gate) -> Result<Self> {
        config.validate()?;
        let (n_part, _, _) = config.level_rows();
        let c = config.feature_dim;
        let expect = |m: &Matrix, shape: (usize, usize), what: &'static str| {
            if m.shape() == shape {
                Ok(())
            } else {
                Err(Error::Dimension {
                    op: what,
                    left: shape,
                    right: m.shape(),
                })
            }
        };
        expect(&part_rows, (n_part, c), "memory part rows")?;
        for gate in [&gate_ins, &gate_sem] {
            expect(&gate.weight, (1, c), "memory gate weight")?;
            expect(&gate.bias, (1, 1), "memory gate bias")?;
        }
        Ok(Self {
            config,
            part_rows,
            gate_ins,
            gate_sem,
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    /// Places the learnable tensors on `g`.
    pub fn bind(&self, g: &mut Graph) -> MemoryVars {
        MemoryVars {
            part_rows: g.leaf(self.part_rows.clone()),
            gate_ins_weight: g.leaf(self.gate_ins.weight.clone()),
            gate_ins_bias: g.leaf(self.gate_ins.bias.clone()),
            gate_sem_weight: g.leaf(self.gate_sem.weight.clone()),
            gate_sem_bias: g.leaf(self.gate_sem.bias.clone()),
        }
    }

    /// Part, instance and semantic prototype rows.
    pub fn levels(&self) -> Result<(Matrix, Matrix, Matrix)> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g);
        let ins = summarize_level(&mut g, vars.part_rows, self.config.instance_group(), vars.gate_ins_weight, vars.gate_ins_bias)?;
        let sem = summarize_level(&mut g, ins, self.config.semantic_group(), vars.gate_sem_weight, vars.gate_sem_bias)?;
        Ok((self.part_rows.clone(), g.value(ins).clone(), g.value(sem).clone()))
    }

    /// Multi-granularity read of a batch of queries, without gradients.
    pub fn read(&self, queries: &Matrix) -> Result<MemoryReadout> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g);
        let q = g.leaf(queries.clone());
        let out = mg_mra_forward(&mut g, q, &vars, &self.config)?;
        Ok(out.values(&g))
    }
}

/// Graph handles of a bound [`PrototypeMemory`].
#[derive(Debug, Clone, Copy)]
pub struct MemoryVars {
    pub part_rows: Var,
    pub gate_ins_weight: Var,
    pub gate_ins_bias: Var,
    pub gate_sem_weight: Var,
    pub gate_sem_bias: Var,
}

/// Graph handles of a multi-granularity read.
#[derive(Debug, Clone, Copy)]
pub struct ReadoutVars {
    pub h_part: Var,
    pub h_ins: Var,
    pub h_sem: Var,
    pub w_part: Var,
    pub w_ins: Var,
    pub w_sem: Var,
    pub ins_rows: Var,
    pub sem_rows: Var,
}

impl ReadoutVars {
    pub fn values(&self, g: &Graph) -> MemoryReadout {
        MemoryReadout {
            h_part: g.value(self.h_part).clone(),
            h_ins: g.value(self.h_ins).clone(),
            h_sem: g.value(self.h_sem).clone(),
            w_part: g.value(self.w_part).clone(),
            w_ins: g.value(self.w_ins).clone(),
            w_sem: g.value(self.w_sem).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryReadout {
    pub h_part: Matrix,
    pub h_ins: Matrix,
    pub h_sem: Matrix,
    pub w_part: Matrix,
    pub w_ins: Matrix,
    pub w_sem: Matrix,
}

/// Single-granularity read: `w = softmax_j cos(q, m_j)`, `h = w · M`.
///
/// Returns `(h, w)`.
pub fn sg_mra_read(g: &mut Graph, queries: Var, level_rows: Var) -> Result<(Var, Var)> {
    let sim = g.cosine_rows(queries, level_rows)?;
    let w = g.softmax_rows(sim)?;
    let h = g.matmul(w, level_rows)?;
    Ok((h, w))
}

/// Gated block average: output row `i` is the mean of `α_j · m_j` over the
/// `i`-th block of `group` consecutive lower rows.
pub fn summarize_level(g: &mut Graph, lower: Var, group: usize, gate_weight: Var, gate_bias: Var) -> Result<Var> {
    let rows = g.value(lower).rows();
    if group == 0 || rows % group != 0 {
        return Err(Error::Config(format!(
            "summarize_level: {rows} lower rows are not divisible into groups of {group}"
        )));
    }
    let logits = g.matmul_nt(lower, gate_weight)?;
    let logits = g.add_scalar_var(logits, gate_bias)?;
    let alpha = g.sigmoid(logits);
    let weighted = g.scale_rows(lower, alpha)?;
    g.block_mean_rows(weighted, group)
}

/// Part → instance → semantic chain over the derived hierarchy.
pub fn mg_mra_forward(g: &mut Graph, queries: Var, mem: &MemoryVars, config: &MemoryConfig) -> Result<ReadoutVars> {
    let ins_rows = summarize_level(g, mem.part_rows, config.instance_group(), mem.gate_ins_weight, mem.gate_ins_bias)?;
    let sem_rows = summarize_level(g, ins_rows, config.semantic_group(), mem.gate_sem_weight, mem.gate_sem_bias)?;
    let (h_part, w_part) = sg_mra_read(g, queries, mem.part_rows)?;
    let (h_ins, w_ins) = sg_mra_read(g, h_part, ins_rows)?;
    let (h_sem, w_sem) = sg_mra_read(g, h_ins, sem_rows)?;
    Ok(ReadoutVars {
        h_part,
        h_ins,
        h_sem,
        w_part,
        w_ins,
        w_sem,
        ins_rows,
        sem_rows,
    })
}

/// Auxiliary-branch output `h_sem + f`.
pub fn residual_compose(g: &mut Graph, stripe_features: Var, readout: &ReadoutVars) -> Result<Var> {
    g.add(readout.h_sem, stripe_features)
}

//! Finite-difference audit of every differentiable operation and loss.

use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::{encode_graph, AffineVars, EncoderConfig, EncoderParams, EncoderVars};
use crate::losses::{
    hetero_center_triplet, identity_ce, instance_consistency, memory_sparsity, semantic_triplet, LossWeights,
};
use crate::memory::{mg_mra_forward, residual_compose, MemoryConfig, MemoryVars, PrototypeMemory};
use crate::numerics::{grad_check, Graph, Matrix, Rng, Var};
use crate::trainer::objective;
use crate::Result;

/// Central-difference step used by the suite.
pub const STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub instances: usize,
    /// Worst relative error over all instances.
    pub max_rel_error: f64,
}

type Build = fn(&mut Graph, &[Var], &[Matrix], u64) -> Result<Var>;

struct Case {
    name: &'static str,
    /// Checked inputs and fixed constants for one instance.
    draw: fn(&mut Rng) -> (Vec<Matrix>, Vec<Matrix>),
    build: Build,
}

/// `Σ out ⊙ r`, a generic scalar reduction with a fixed random projection.
fn project(g: &mut Graph, out: Var, r: &Matrix) -> Result<Var> {
    let rv = g.leaf(r.clone());
    let prod = g.mul(out, rv)?;
    Ok(g.sum_all(prod))
}

fn normal(rng: &mut Rng, r: usize, c: usize) -> Matrix {
    Matrix::random_normal(r, c, 1.0, rng)
}

fn positive(rng: &mut Rng, r: usize, c: usize) -> Matrix {
    Matrix::random_uniform(r, c, 0.5, 2.0, rng)
}

// Labels for the small loss batches: 3 identities × 2 modalities × 2 samples.
const LABELS: [usize; 12] = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
const MODS: [u8; 12] = [0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1];

fn small_memory() -> MemoryConfig {
    MemoryConfig {
        parts_per: 2,
        instances_per: 2,
        semantics_per: 1,
        num_classes: 3,
        feature_dim: 3,
    }
}

fn memory_inputs(rng: &mut Rng) -> Vec<Matrix> {
    let mem = PrototypeMemory::init(small_memory(), rng);
    vec![
        mem.part_rows,
        Matrix::random_uniform(1, 3, -1.0, 1.0, rng),
        Matrix::random_uniform(1, 1, -0.5, 0.5, rng),
        Matrix::random_uniform(1, 3, -1.0, 1.0, rng),
        Matrix::random_uniform(1, 1, -0.5, 0.5, rng),
    ]
}

fn memory_vars(v: &[Var]) -> MemoryVars {
    MemoryVars {
        part_rows: v[0],
        gate_ins_weight: v[1],
        gate_ins_bias: v[2],
        gate_sem_weight: v[3],
        gate_sem_bias: v[4],
    }
}

macro_rules! unary {
    ($name:literal, $draw:expr, |$g:ident, $x:ident| $body:expr) => {
        Case {
            name: $name,
            draw: |rng| {
                let x = $draw(rng);
                let r = normal(rng, 64, 64);
                (vec![x], vec![r])
            },
            build: |$g, v, c, _| {
                let $x = v[0];
                let out: Var = $body?;
                let (rows, cols) = $g.value(out).shape();
                let r = Matrix::from_vec(rows, cols, c[0].data()[..rows * cols].to_vec())?;
                project($g, out, &r)
            },
        }
    };
}

macro_rules! binary {
    ($name:literal, $draw:expr, |$g:ident, $a:ident, $b:ident| $body:expr) => {
        Case {
            name: $name,
            draw: |rng| {
                let (a, b) = $draw(rng);
                let r = normal(rng, 64, 64);
                (vec![a, b], vec![r])
            },
            build: |$g, v, c, _| {
                let ($a, $b) = (v[0], v[1]);
                let out: Var = $body?;
                let (rows, cols) = $g.value(out).shape();
                let r = Matrix::from_vec(rows, cols, c[0].data()[..rows * cols].to_vec())?;
                project($g, out, &r)
            },
        }
    };
}

fn ok(v: Var) -> Result<Var> {
    Ok(v)
}

fn cases() -> Vec<Case> {
    vec![
        binary!("add", |r: &mut Rng| (normal(r, 3, 4), normal(r, 3, 4)), |g, a, b| g.add(a, b)),
        binary!("sub", |r: &mut Rng| (normal(r, 3, 4), normal(r, 3, 4)), |g, a, b| g.sub(a, b)),
        binary!("mul", |r: &mut Rng| (normal(r, 3, 4), normal(r, 3, 4)), |g, a, b| g.mul(a, b)),
        unary!("scale", |r: &mut Rng| normal(r, 3, 4), |g, x| ok(g.scale(x, -1.7))),
        unary!("add_const", |r: &mut Rng| normal(r, 3, 4), |g, x| ok(g.add_const(x, 0.4))),
        binary!("matmul", |r: &mut Rng| (normal(r, 3, 4), normal(r, 4, 2)), |g, a, b| g.matmul(a, b)),
        binary!("matmul_nt", |r: &mut Rng| (normal(r, 3, 4), normal(r, 5, 4)), |g, a, b| g.matmul_nt(a, b)),
        unary!("transpose", |r: &mut Rng| normal(r, 3, 4), |g, x| ok(g.transpose(x))),
        unary!("relu", |r: &mut Rng| normal(r, 3, 4), |g, x| ok(g.relu(x))),
        unary!("sigmoid", |r: &mut Rng| normal(r, 3, 4), |g, x| ok(g.sigmoid(x))),
        unary!("ln", |r: &mut Rng| positive(r, 3, 4), |g, x| g.ln(x)),
        unary!("softmax_rows", |r: &mut Rng| normal(r, 3, 5), |g, x| g.softmax_rows(x)),
        unary!("log_softmax_rows", |r: &mut Rng| normal(r, 3, 5), |g, x| g.log_softmax_rows(x)),
        unary!("l2_normalize_rows", |r: &mut Rng| normal(r, 3, 4), |g, x| g.l2_normalize_rows(x)),
        binary!("cosine_rows", |r: &mut Rng| (normal(r, 3, 4), normal(r, 5, 4)), |g, a, b| g.cosine_rows(a, b)),
        unary!("mean_rows", |r: &mut Rng| normal(r, 4, 3), |g, x| g.mean_rows(x)),
        unary!("block_mean_rows", |r: &mut Rng| normal(r, 6, 3), |g, x| g.block_mean_rows(x, 3)),
        unary!("sum_all", |r: &mut Rng| normal(r, 3, 4), |g, x| ok(g.sum_all(x))),
        unary!("mean_all", |r: &mut Rng| normal(r, 3, 4), |g, x| g.mean_all(x)),
        binary!("concat_rows", |r: &mut Rng| (normal(r, 2, 3), normal(r, 3, 3)), |g, a, b| g.concat_rows(&[a, b, a])),
        unary!("select_rows", |r: &mut Rng| normal(r, 4, 3), |g, x| g.select_rows(x, &[3, 0, 3, 1])),
        unary!("slice_rows", |r: &mut Rng| normal(r, 5, 3), |g, x| g.slice_rows(x, 1, 4)),
        binary!("add_row_broadcast", |r: &mut Rng| (normal(r, 4, 3), normal(r, 1, 3)), |g, a, b| g
            .add_row_broadcast(a, b)),
        binary!("add_scalar_var", |r: &mut Rng| (normal(r, 4, 3), normal(r, 1, 1)), |g, a, b| g.add_scalar_var(a, b)),
        binary!("scale_rows", |r: &mut Rng| (normal(r, 4, 3), normal(r, 4, 1)), |g, a, b| g.scale_rows(a, b)),
        unary!("gather", |r: &mut Rng| normal(r, 3, 4), |g, x| g.gather(x, &[(0, 1), (2, 3), (0, 1), (1, 0)])),
        binary!("pairwise_distances", |r: &mut Rng| (normal(r, 3, 4), normal(r, 5, 4)), |g, a, b| g
            .pairwise_distances(a, b)),
        Case {
            name: "identity_ce",
            draw: |rng| (vec![normal(rng, 12, 3), normal(rng, 12, 3)], vec![]),
            build: |g, v, _, _| identity_ce(g, v, &LABELS),
        },
        Case {
            name: "hetero_center_triplet",
            draw: |rng| (vec![normal(rng, 12, 3)], vec![]),
            build: |g, v, _, _| hetero_center_triplet(g, v[0], &LABELS, &MODS, 0.3),
        },
        Case {
            name: "instance_consistency",
            draw: |rng| ((0..5).map(|_| normal(rng, 3, 3)).collect(), vec![]),
            build: |g, v, _, seed| instance_consistency(g, v, &mut Rng::new(seed)),
        },
        Case {
            name: "semantic_triplet",
            draw: |rng| (vec![normal(rng, 12, 3)], vec![]),
            build: |g, v, _, _| semantic_triplet(g, v[0], &LABELS, 0.3),
        },
        Case {
            name: "memory_sparsity",
            draw: |rng| (vec![normal(rng, 4, 5), normal(rng, 4, 2)], vec![]),
            build: |g, v, _, _| {
                let a = g.softmax_rows(v[0])?;
                let b = g.softmax_rows(v[1])?;
                memory_sparsity(g, &[a, b])
            },
        },
        Case {
            name: "mg_mra_forward",
            draw: |rng| {
                let mut inputs = vec![normal(rng, 4, 3)];
                inputs.extend(memory_inputs(rng));
                let r = (0..7).map(|_| normal(rng, 4, 24)).collect();
                (inputs, r)
            },
            build: |g, v, c, _| {
                let cfg = small_memory();
                let out = mg_mra_forward(g, v[0], &memory_vars(&v[1..]), &cfg)?;
                let composed = residual_compose(g, v[0], &out)?;
                let mut total = Vec::new();
                for (k, node) in [out.h_part, out.h_ins, out.h_sem, out.w_part, out.w_ins, out.w_sem, composed]
                    .into_iter()
                    .enumerate()
                {
                    let (rows, cols) = g.value(node).shape();
                    let r = Matrix::from_vec(rows, cols, c[k].data()[..rows * cols].to_vec())?;
                    total.push(project(g, node, &r)?);
                }
                let stacked = g.concat_rows(&total)?;
                Ok(g.sum_all(stacked))
            },
        },
        Case {
            name: "total_loss",
            draw: |rng| {
                // two stripes of 12×3 features, two classifiers, then the memory
                let mut inputs = vec![normal(rng, 12, 3), normal(rng, 12, 3), normal(rng, 3, 3), normal(rng, 3, 3)];
                inputs.extend(memory_inputs(rng));
                (inputs, vec![])
            },
            build: |g, v, _, seed| {
                let cfg = small_memory();
                let mem = memory_vars(&v[4..]);
                let weights = LossWeights::default();
                let (total, _) = objective(g, &v[..2], &v[2..4], Some((&mem, &cfg)), &LABELS, &MODS, &weights, &mut Rng::new(seed))?;
                Ok(total)
            },
        },
        Case {
            name: "encoder_pipeline",
            draw: |rng| {
                let enc = EncoderParams::init(tiny_encoder(), 3, rng).expect("valid encoder");
                let mut inputs = Vec::new();
                for stage in enc.modality {
                    inputs.push(stage.weight);
                    inputs.push(stage.bias);
                }
                inputs.extend([enc.shared_hidden.weight, enc.shared_hidden.bias, enc.shared_out.weight, enc.shared_out.bias]);
                inputs.extend(enc.classifiers);
                inputs.extend(memory_inputs(rng));
                // stripe-major stacked input: 2 stripes × 12 samples × 2 dims
                (inputs, vec![normal(rng, 24, 2)])
            },
            build: |g, v, c, seed| {
                let cfg = tiny_encoder();
                let affine = |i: usize| AffineVars { weight: v[i], bias: v[i + 1] };
                let vars = EncoderVars {
                    modality: [affine(0), affine(2)],
                    shared_hidden: affine(4),
                    shared_out: affine(6),
                    classifiers: v[8..10].to_vec(),
                };
                let x = g.leaf(c[0].clone());
                let features = encode_graph(g, &vars, &cfg, x, &MODS)?;
                let mem = memory_vars(&v[10..]);
                let weights = LossWeights::default();
                let (total, _) = objective(g, &features, &vars.classifiers, Some((&mem, &small_memory())), &LABELS, &MODS, &weights, &mut Rng::new(seed))?;
                Ok(total)
            },
        },
    ]
}

fn tiny_encoder() -> EncoderConfig {
    EncoderConfig {
        input_dim: 2,
        hidden_dim: 3,
        feature_dim: 3,
        num_stripes: 2,
    }
}

/// Names of the audited operations and losses, in suite order.
pub fn suite_names() -> Vec<&'static str> {
    cases().iter().map(|c| c.name).collect()
}

/// Checks every case on `instances` independently seeded random inputs.
pub fn run_gradient_suite(seed: u64, instances: usize) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for (k, case) in cases().into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..instances {
            let stream = (k as u64) << 32 | i as u64;
            let (inputs, consts) = (case.draw)(&mut Rng::with_stream(seed, stream));
            let build = case.build;
            let report = grad_check(|g, v| build(g, v, &consts, stream), &inputs, STEP)?;
            worst = worst.max(report.max_rel_error);
        }
        out.push(SuiteEntry {
            name: case.name,
            instances,
            max_rel_error: worst,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_a_few_instances() {
        for entry in run_gradient_suite(7, 3).unwrap() {
            assert!(entry.max_rel_error < 1e-4, "{entry:?}");
        }
    }

    #[test]
    fn names_are_unique() {
        let mut names = suite_names();
        let n = names.len();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), n);
    }
}

//! Two-stream stripe encoder.
//!
//! Each stripe vector goes through a modality-specific affine stage, a
//! rectifier, and a shared `H → H → C` perceptron. Per-stripe linear
//! classifiers sit on top of the stripe features for the identity loss.

use alloc::format;
use alloc::vec::Vec;

use crate::numerics::{Graph, Matrix, Rng, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub num_stripes: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_dim: 32,
            hidden_dim: 64,
            feature_dim: 32,
            num_stripes: 6,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.feature_dim < 2 {
            return Err(Error::Config(format!(
                "encoder dims must be positive with feature_dim >= 2, got {}/{}/{}",
                self.input_dim, self.hidden_dim, self.feature_dim
            )));
        }
        if self.num_stripes < 2 {
            return Err(Error::Config(format!(
                "encoder needs at least 2 stripes, got {}",
                self.num_stripes
            )));
        }
        Ok(())
    }
}

/// `y = x·W + b` with `W: in×out`, `b: 1×out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Affine {
    /// Uniform in `[−1/√fan_in, 1/√fan_in]` for weight and bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        Self {
            weight: Matrix::random_uniform(fan_in, fan_out, -bound, bound, rng),
            bias: Matrix::random_uniform(1, fan_out, -bound, bound, rng),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    fn bind(&self, g: &mut Graph) -> AffineVars {
        AffineVars {
            weight: g.leaf(self.weight.clone()),
            bias: g.leaf(self.bias.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    /// Independent input stages for modality 0 and modality 1.
    pub modality: [Affine; 2],
    pub shared_hidden: Affine,
    pub shared_out: Affine,
    /// One `C × N_c` classifier per stripe.
    pub classifiers: Vec<Matrix>,
}

impl EncoderParams {
    pub fn init(config: EncoderConfig, num_classes: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (d, h, c) = (config.input_dim, config.hidden_dim, config.feature_dim);
        let modality = [Affine::init(d, h, rng), Affine::init(d, h, rng)];
        let shared_hidden = Affine::init(h, h, rng);
        let shared_out = Affine::init(h, c, rng);
        let bound = 1.0 / libm::sqrt(c as f64);
        let classifiers = (0..config.num_stripes)
            .map(|_| Matrix::random_uniform(c, num_classes, -bound, bound, rng))
            .collect();
        Ok(Self {
            config,
            modality,
            shared_hidden,
            shared_out,
            classifiers,
        })
    }

    pub fn zeros(config: EncoderConfig, num_classes: usize) -> Self {
        let (d, h, c) = (config.input_dim, config.hidden_dim, config.feature_dim);
        Self {
            config,
            modality: [Affine::zeros(d, h), Affine::zeros(d, h)],
            shared_hidden: Affine::zeros(h, h),
            shared_out: Affine::zeros(h, c),
            classifiers: (0..config.num_stripes).map(|_| Matrix::zeros(c, num_classes)).collect(),
        }
    }

    pub fn bind(&self, g: &mut Graph) -> EncoderVars {
        EncoderVars {
            modality: [self.modality[0].bind(g), self.modality[1].bind(g)],
            shared_hidden: self.shared_hidden.bind(g),
            shared_out: self.shared_out.bind(g),
            classifiers: self.classifiers.iter().map(|m| g.leaf(m.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AffineVars {
    pub weight: Var,
    pub bias: Var,
}

fn affine(g: &mut Graph, x: Var, layer: &AffineVars) -> Result<Var> {
    let xw = g.matmul(x, layer.weight)?;
    g.add_row_broadcast(xw, layer.bias)
}

#[derive(Debug, Clone)]
pub struct EncoderVars {
    pub modality: [AffineVars; 2],
    pub shared_hidden: AffineVars,
    pub shared_out: AffineVars,
    pub classifiers: Vec<Var>,
}

/// Encodes stripe-major stacked inputs (`(S·B) × D`, see
/// `Dataset::stack_stripes`) and returns one `B × C` feature node per stripe.
pub fn encode_graph(g: &mut Graph, vars: &EncoderVars, config: &EncoderConfig, stacked: Var, modalities: &[u8]) -> Result<Vec<Var>> {
    let b = modalities.len();
    let s_count = config.num_stripes;
    let (rows, cols) = g.value(stacked).shape();
    if rows != s_count * b || cols != config.input_dim {
        return Err(Error::Dimension {
            op: "encode",
            left: (s_count * b, config.input_dim),
            right: (rows, cols),
        });
    }
    if let Some(i) = modalities.iter().position(|&m| m > 1) {
        return Err(Error::Contract(format!(
            "encode: unknown modality {} at sample {i}",
            modalities[i]
        )));
    }
    if b == 0 {
        return Err(Error::Contract("encode: empty batch".into()));
    }

    // Route rows through their modality's stage, then restore row order.
    let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for s in 0..s_count {
        for (j, &m) in modalities.iter().enumerate() {
            groups[m as usize].push(s * b + j);
        }
    }
    let mut staged = Vec::with_capacity(2);
    let mut order = Vec::with_capacity(rows);
    for (m, idx) in groups.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let x = g.select_rows(stacked, idx)?;
        staged.push(affine(g, x, &vars.modality[m])?);
        order.extend_from_slice(idx);
    }
    let mut inverse = alloc::vec![0usize; rows];
    for (pos, &row) in order.iter().enumerate() {
        inverse[row] = pos;
    }
    let z = if staged.len() == 1 {
        staged[0]
    } else {
        g.concat_rows(&staged)?
    };
    let z = g.select_rows(z, &inverse)?;
    let z = g.relu(z);
    let hidden = affine(g, z, &vars.shared_hidden)?;
    let hidden = g.relu(hidden);
    let features = affine(g, hidden, &vars.shared_out)?;

    (0..s_count).map(|s| g.slice_rows(features, s * b, (s + 1) * b)).collect()
}

/// Per-stripe features of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeBatch {
    /// One `B × C` matrix per stripe.
    pub features: Vec<Matrix>,
    pub identities: Vec<u32>,
    pub modalities: Vec<u8>,
}

impl StripeBatch {
    pub fn len(&self) -> usize {
        self.modalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modalities.is_empty()
    }
}

/// Forward pass without gradient bookkeeping beyond a throwaway graph.
pub fn encode(params: &EncoderParams, stacked: &Matrix, identities: &[u32], modalities: &[u8]) -> Result<StripeBatch> {
    if identities.len() != modalities.len() {
        return Err(Error::Contract(format!(
            "encode: {} identities for {} modality tags",
            identities.len(),
            modalities.len()
        )));
    }
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let x = g.leaf(stacked.clone());
    let stripes = encode_graph(&mut g, &vars, &params.config, x, modalities)?;
    let features = stripes.iter().map(|&v| g.value(v).clone()).collect();
    Ok(StripeBatch {
        features,
        identities: identities.to_vec(),
        modalities: modalities.to_vec(),
    })
}

/// Concatenation of the L2-normalized stripe features: `B × (S·C)`.
pub fn pooled_descriptor(batch: &StripeBatch) -> Result<Matrix> {
    let normalized = batch
        .features
        .iter()
        .map(|f| f.l2_normalize_rows())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::Degenerate { row, .. } => Error::Degenerate {
                op: "pooled_descriptor",
                row,
            },
            other => other,
        })?;
    let refs: Vec<&Matrix> = normalized.iter().collect();
    Matrix::concat_cols(&refs)
}

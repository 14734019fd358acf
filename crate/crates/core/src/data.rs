//! Synthetic cross-modality identity data and PK batch sampling.
//!
//! Every identity owns one signature vector per stripe. Modality-0 samples
//! are noisy copies of the signatures; modality-1 samples first pass through a
//! fixed random affine map `μ ↦ μ + σ_m (Aμ + b)` shared by all identities.
//! Training and test identities are disjoint id ranges.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_train_ids: usize,
    pub num_test_ids: usize,
    pub samples_per_id_per_modality: usize,
    pub input_dim: usize,
    pub num_stripes: usize,
    /// Scale of the modality-1 distortion.
    pub modality_gap: f64,
    /// Standard deviation of per-sample Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_train_ids: 64,
            num_test_ids: 32,
            samples_per_id_per_modality: 10,
            input_dim: 32,
            num_stripes: 6,
            modality_gap: 1.0,
            noise: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_train_ids", self.num_train_ids),
            ("num_test_ids", self.num_test_ids),
            ("samples_per_id_per_modality", self.samples_per_id_per_modality),
            ("input_dim", self.input_dim),
            ("num_stripes", self.num_stripes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.num_train_ids + self.num_test_ids > u32::MAX as usize {
            return Err(Error::Config("identity count exceeds u32 range".into()));
        }
        for (name, v) in [("modality_gap", self.modality_gap), ("noise", self.noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// One image: per-stripe input vectors, stripe-major (`stripes[s·D + d]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub identity: u32,
    pub modality: u8,
    pub stripes: Vec<f32>,
}

impl SampleRecord {
    pub fn stripe(&self, s: usize, input_dim: usize) -> &[f32] {
        &self.stripes[s * input_dim..(s + 1) * input_dim]
    }
}

/// Records sharing one stripe count and input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    num_stripes: usize,
    input_dim: usize,
    records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn new(num_stripes: usize, input_dim: usize) -> Self {
        Self {
            num_stripes,
            input_dim,
            records: Vec::new(),
        }
    }

    pub fn from_records(num_stripes: usize, input_dim: usize, records: Vec<SampleRecord>) -> Result<Self> {
        let mut ds = Self::new(num_stripes, input_dim);
        for r in records {
            ds.push(r)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, record: SampleRecord) -> Result<()> {
        if record.stripes.len() != self.record_width() {
            return Err(Error::Contract(format!(
                "record of identity {} carries {} values, expected {}x{}",
                record.identity,
                record.stripes.len(),
                self.num_stripes,
                self.input_dim
            )));
        }
        if record.modality > 1 {
            return Err(Error::Contract(format!(
                "record of identity {} has modality {}",
                record.identity, record.modality
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn num_stripes(&self) -> usize {
        self.num_stripes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Reals per record.
    pub fn record_width(&self) -> usize {
        self.num_stripes * self.input_dim
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct identities, ascending.
    pub fn identities(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.identity).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Record indices per identity and modality.
    pub fn index(&self) -> BTreeMap<u32, [Vec<usize>; 2]> {
        let mut map: BTreeMap<u32, [Vec<usize>; 2]> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            map.entry(r.identity).or_default()[r.modality as usize].push(i);
        }
        map
    }

    /// Stacks the selected records into an `(S·B)×D` matrix, stripe-major:
    /// row `s·B + b` is stripe `s` of the `b`-th selected record.
    pub fn stack_stripes(&self, selection: &[usize]) -> Matrix {
        let b = selection.len();
        let d = self.input_dim;
        let mut m = Matrix::zeros(self.num_stripes * b, d);
        for s in 0..self.num_stripes {
            for (j, &idx) in selection.iter().enumerate() {
                let src = self.records[idx].stripe(s, d);
                for (o, &v) in m.row_mut(s * b + j).iter_mut().zip(src) {
                    *o = v as f64;
                }
            }
        }
        m
    }

    pub fn subset(&self, selection: &[usize]) -> Dataset {
        Dataset {
            num_stripes: self.num_stripes,
            input_dim: self.input_dim,
            records: selection.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// Train identities plus the two halves of the test protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub train: Dataset,
    /// Test identities, modality 1.
    pub query: Dataset,
    /// Test identities, modality 0.
    pub gallery: Dataset,
}

/// Deterministic synthetic dataset; a pure function of `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthSplit> {
    cfg.validate()?;
    let d = cfg.input_dim;
    let s_count = cfg.num_stripes;
    let mut rng = Rng::new(cfg.seed);

    let map = Matrix::random_normal(d, d, 1.0 / libm::sqrt(d as f64), &mut rng);
    let shift: Vec<f64> = (0..d).map(|_| rng.normal()).collect();

    let mut train = Dataset::new(s_count, d);
    let mut query = Dataset::new(s_count, d);
    let mut gallery = Dataset::new(s_count, d);
    let total_ids = cfg.num_train_ids + cfg.num_test_ids;
    let mut signature = vec_zeroed(s_count * d);
    let mut distorted = vec_zeroed(s_count * d);
    for id in 0..total_ids {
        for v in signature.iter_mut() {
            *v = rng.normal();
        }
        for s in 0..s_count {
            let mu = &signature[s * d..(s + 1) * d];
            for r in 0..d {
                let a_mu: f64 = map.row(r).iter().zip(mu).map(|(a, m)| a * m).sum();
                distorted[s * d + r] = mu[r] + cfg.modality_gap * (a_mu + shift[r]);
            }
        }
        let is_train = id < cfg.num_train_ids;
        for modality in 0..2u8 {
            let base = if modality == 0 { &signature } else { &distorted };
            for _ in 0..cfg.samples_per_id_per_modality {
                let stripes: Vec<f32> = base.iter().map(|&m| (m + cfg.noise * rng.normal()) as f32).collect();
                let record = SampleRecord {
                    identity: id as u32,
                    modality,
                    stripes,
                };
                match (is_train, modality) {
                    (true, _) => train.push(record)?,
                    (false, 1) => query.push(record)?,
                    (false, _) => gallery.push(record)?,
                }
            }
        }
    }
    Ok(SynthSplit { train, query, gallery })
}

fn vec_zeroed(n: usize) -> Vec<f64> {
    alloc::vec![0.0; n]
}

/// Draws `P` distinct identities and `K` samples of each modality per
/// identity, returning record indices ordered identity-major with the `K`
/// modality-0 samples before the `K` modality-1 samples.
///
/// An identity with fewer than `K` samples in a modality is sampled with
/// replacement there.
pub fn pk_sample(dataset: &Dataset, p: usize, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    pk_sample_indexed(&dataset.index(), p, k, rng)
}

/// [`pk_sample`] over a precomputed [`Dataset::index`].
pub fn pk_sample_indexed(index: &BTreeMap<u32, [Vec<usize>; 2]>, p: usize, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if p == 0 || k == 0 {
        return Err(Error::Contract("pk_sample: P and K must be at least 1".into()));
    }
    let ids: Vec<(&u32, &[Vec<usize>; 2])> = index.iter().collect();
    if ids.len() < p {
        return Err(Error::Contract(format!(
            "pk_sample: {} identities available, {p} requested",
            ids.len()
        )));
    }
    let mut out = Vec::with_capacity(2 * p * k);
    for pick in rng.sample_distinct(ids.len(), p) {
        let (id, per_mod) = ids[pick];
        for (m, pool) in per_mod.iter().enumerate() {
            if pool.is_empty() {
                return Err(Error::Contract(format!(
                    "pk_sample: identity {id} has no modality-{m} samples"
                )));
            }
            if pool.len() >= k {
                out.extend(rng.sample_distinct(pool.len(), k).into_iter().map(|j| pool[j]));
            } else {
                out.extend((0..k).map(|_| pool[rng.below(pool.len())]));
            }
        }
    }
    Ok(out)
}

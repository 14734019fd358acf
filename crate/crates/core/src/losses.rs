//! Training objectives: identity cross-entropy, hetero-center triplet, and the
//! three memory regulation terms (addressing entropy, instance consistency,
//! semantic triplet), combined by [`total_loss`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::numerics::{Graph, Rng, Var};
use crate::{Error, Result};

/// Added inside the logarithm of the addressing entropy.
pub const ENTROPY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Addressing entropy weight.
    pub lambda1: f64,
    /// Instance consistency weight.
    pub lambda2: f64,
    /// Semantic triplet weight.
    pub lambda3: f64,
    pub margin_tri: f64,
    pub margin_sem: f64,
    /// Accepted for configuration compatibility; no term uses it.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.1,
            lambda3: 1.0,
            margin_tri: 0.3,
            margin_sem: 0.3,
            beta: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a nonnegative real, got {v}")));
            }
        }
        Ok(())
    }
}

/// Scalar values of every term and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub id: f64,
    pub hc_tri: f64,
    pub mem_sparsity: f64,
    pub ins: f64,
    pub sem: f64,
    pub total: f64,
}

impl LossReport {
    /// `total = id + hc_tri + λ1·mem + λ2·ins + λ3·sem`, rejecting non-finite parts.
    pub fn assemble(id: f64, hc_tri: f64, mem_sparsity: f64, ins: f64, sem: f64, weights: &LossWeights) -> Result<Self> {
        for (name, v) in [("id", id), ("hc_tri", hc_tri), ("mem_sparsity", mem_sparsity), ("ins", ins), ("sem", sem)] {
            if !v.is_finite() {
                return Err(Error::NumericHealth {
                    component: name.to_string(),
                    value: v,
                });
            }
        }
        let total = id + hc_tri + weights.lambda1 * mem_sparsity + weights.lambda2 * ins + weights.lambda3 * sem;
        Ok(Self {
            id,
            hc_tri,
            mem_sparsity,
            ins,
            sem,
            total,
        })
    }

    /// Elementwise mean of several reports.
    pub fn mean(reports: &[LossReport]) -> LossReport {
        let n = reports.len().max(1) as f64;
        let mut acc = LossReport::default();
        for r in reports {
            acc.id += r.id;
            acc.hc_tri += r.hc_tri;
            acc.mem_sparsity += r.mem_sparsity;
            acc.ins += r.ins;
            acc.sem += r.sem;
            acc.total += r.total;
        }
        LossReport {
            id: acc.id / n,
            hc_tri: acc.hc_tri / n,
            mem_sparsity: acc.mem_sparsity / n,
            ins: acc.ins / n,
            sem: acc.sem / n,
            total: acc.total / n,
        }
    }
}

/// Mean over stripes and samples of `−log softmax(logits)[label]`.
pub fn identity_ce(g: &mut Graph, logits: &[Var], labels: &[usize]) -> Result<Var> {
    if logits.is_empty() {
        return Err(Error::Contract("identity_ce: no logit matrices".into()));
    }
    let mut terms = Vec::with_capacity(logits.len());
    for &l in logits {
        let (rows, classes) = g.value(l).shape();
        if rows != labels.len() {
            return Err(Error::Contract(format!(
                "identity_ce: {rows} logit rows for {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Contract(format!(
                "identity_ce: label {bad} outside [0, {classes})"
            )));
        }
        let logp = g.log_softmax_rows(l)?;
        let at: Vec<(usize, usize)> = labels.iter().enumerate().map(|(i, &y)| (i, y)).collect();
        let picked = g.gather(logp, &at)?;
        terms.push(g.mean_all(picked)?);
    }
    let stacked = g.concat_rows(&terms)?;
    let mean = g.mean_all(stacked)?;
    Ok(g.scale(mean, -1.0))
}

/// Groups sample indices by identity (ascending) and modality.
fn centers_index(labels: &[usize], modalities: &[u8]) -> Result<BTreeMap<usize, [Vec<usize>; 2]>> {
    if labels.len() != modalities.len() {
        return Err(Error::Contract(format!(
            "{} labels but {} modality tags",
            labels.len(),
            modalities.len()
        )));
    }
    let mut groups: BTreeMap<usize, [Vec<usize>; 2]> = BTreeMap::new();
    for (i, (&y, &m)) in labels.iter().zip(modalities).enumerate() {
        if m > 1 {
            return Err(Error::Contract(format!("unknown modality {m} at sample {i}")));
        }
        groups.entry(y).or_default()[m as usize].push(i);
    }
    Ok(groups)
}

/// Triplet hinge over per-identity, per-modality feature centers.
///
/// For every identity `i` and modality `m` the positive distance is to the
/// same identity's center in the other modality, the negative distance the
/// smallest distance to any center of another identity. Hinges are averaged.
pub fn hetero_center_triplet(g: &mut Graph, features: Var, labels: &[usize], modalities: &[u8], margin: f64) -> Result<Var> {
    let rows = g.value(features).rows();
    if rows != labels.len() {
        return Err(Error::Contract(format!(
            "hetero_center_triplet: {rows} features for {} labels",
            labels.len()
        )));
    }
    let groups = centers_index(labels, modalities)?;
    if groups.len() < 2 {
        return Err(Error::Contract(
            "hetero_center_triplet: need at least two identities in the batch".into(),
        ));
    }
    let mut centers = Vec::with_capacity(2 * groups.len());
    for (id, per_mod) in &groups {
        for (m, idx) in per_mod.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::Contract(format!(
                    "hetero_center_triplet: identity {id} has no samples of modality {m}"
                )));
            }
            let sel = g.select_rows(features, idx)?;
            centers.push(g.mean_rows(sel)?);
        }
    }
    // Row 2k + m is the center of the k-th identity in modality m.
    let centers = g.concat_rows(&centers)?;
    let dist = g.pairwise_distances(centers, centers)?;
    let n = 2 * groups.len();
    let d = g.value(dist);
    let mut pos = Vec::with_capacity(n);
    let mut neg = Vec::with_capacity(n);
    for a in 0..n {
        let own = a / 2;
        pos.push((a, a ^ 1));
        let nearest = (0..n)
            .filter(|&b| b / 2 != own)
            .min_by(|&x, &y| d.get(a, x).total_cmp(&d.get(a, y)))
            .expect("two identities present");
        neg.push((a, nearest));
    }
    hinge_mean(g, dist, &pos, &neg, margin)
}

/// `mean [d(pos) − d(neg) + margin]₊` over paired entries of a distance matrix.
fn hinge_mean(g: &mut Graph, dist: Var, pos: &[(usize, usize)], neg: &[(usize, usize)], margin: f64) -> Result<Var> {
    let dp = g.gather(dist, pos)?;
    let dn = g.gather(dist, neg)?;
    let diff = g.sub(dp, dn)?;
    let shifted = g.add_const(diff, margin);
    let hinge = g.relu(shifted);
    g.mean_all(hinge)
}

/// Shuffles the stripes, splits them into two halves (dropping the last one
/// when the count is odd) and returns the mean squared difference between
/// paired stripes.
pub fn instance_consistency(g: &mut Graph, h_ins: &[Var], rng: &mut Rng) -> Result<Var> {
    let pairs = instance_pairs(h_ins.len(), rng)?;
    let mut terms = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let diff = g.sub(h_ins[a], h_ins[b])?;
        let sq = g.mul(diff, diff)?;
        terms.push(g.mean_all(sq)?);
    }
    let stacked = g.concat_rows(&terms)?;
    g.mean_all(stacked)
}

/// The stripe pairing [`instance_consistency`] uses for a given generator state.
pub fn instance_pairs(stripes: usize, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    if stripes < 2 {
        return Err(Error::Contract(format!(
            "instance_consistency: need at least 2 stripes, got {stripes}"
        )));
    }
    let mut order: Vec<usize> = (0..stripes).collect();
    rng.shuffle(&mut order);
    let half = stripes / 2;
    Ok((0..half).map(|k| (order[k], order[half + k])).collect())
}

/// Batch-all triplet loss with Euclidean distance, averaged over every valid
/// `(anchor, positive, negative)`.
pub fn semantic_triplet(g: &mut Graph, h_sem: Var, labels: &[usize], margin: f64) -> Result<Var> {
    let rows = g.value(h_sem).rows();
    if rows != labels.len() {
        return Err(Error::Contract(format!(
            "semantic_triplet: {rows} rows for {} labels",
            labels.len()
        )));
    }
    let (pos, neg) = triplet_indices(labels);
    if pos.is_empty() {
        return Err(Error::Contract(
            "semantic_triplet: batch holds no valid (anchor, positive, negative) triplet".into(),
        ));
    }
    let dist = g.pairwise_distances(h_sem, h_sem)?;
    hinge_mean(g, dist, &pos, &neg, margin)
}

fn triplet_indices(labels: &[usize]) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for a in 0..labels.len() {
        for p in 0..labels.len() {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            for n in 0..labels.len() {
                if labels[n] != labels[a] {
                    pos.push((a, p));
                    neg.push((a, n));
                }
            }
        }
    }
    (pos, neg)
}

/// Mean row entropy `−Σ w log(w + ε)` of each addressing matrix, averaged over
/// the matrices.
pub fn memory_sparsity(g: &mut Graph, weights: &[Var]) -> Result<Var> {
    if weights.is_empty() {
        return Err(Error::Contract("memory_sparsity: no addressing matrices".into()));
    }
    let mut terms = Vec::with_capacity(weights.len());
    for &w in weights {
        let rows = g.value(w).rows();
        if rows == 0 {
            return Err(Error::Contract("memory_sparsity: empty addressing matrix".into()));
        }
        let shifted = g.add_const(w, ENTROPY_EPS);
        let logw = g.ln(shifted)?;
        let prod = g.mul(w, logw)?;
        let total = g.sum_all(prod);
        terms.push(g.scale(total, -1.0 / rows as f64));
    }
    let stacked = g.concat_rows(&terms)?;
    g.mean_all(stacked)
}

/// Graph nodes of the memory regulation terms.
#[derive(Debug, Clone, Copy)]
pub struct MemoryTerms {
    pub mem_sparsity: Var,
    pub ins: Var,
    pub sem: Var,
}

/// Graph nodes of every term; `memory` is `None` for the plain baseline.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub id: Var,
    pub hc_tri: Var,
    pub memory: Option<MemoryTerms>,
}

/// Weighted total of all terms as a graph node plus its scalar report.
pub fn total_loss(g: &mut Graph, terms: &LossTerms, weights: &LossWeights) -> Result<(Var, LossReport)> {
    let value = |g: &Graph, v: Var, name: &str| -> Result<f64> {
        g.scalar(v).ok_or_else(|| Error::Contract(format!("loss term {name} is not scalar")))
    };
    let id = value(g, terms.id, "id")?;
    let hc = value(g, terms.hc_tri, "hc_tri")?;
    let mut total = g.add(terms.id, terms.hc_tri)?;
    let report = match terms.memory {
        None => LossReport::assemble(id, hc, 0.0, 0.0, 0.0, weights)?,
        Some(m) => {
            let report = LossReport::assemble(
                id,
                hc,
                value(g, m.mem_sparsity, "mem_sparsity")?,
                value(g, m.ins, "ins")?,
                value(g, m.sem, "sem")?,
                weights,
            )?;
            for (v, lambda) in [(m.mem_sparsity, weights.lambda1), (m.ins, weights.lambda2), (m.sem, weights.lambda3)] {
                let scaled = g.scale(v, lambda);
                total = g.add(total, scaled)?;
            }
            report
        }
    };
    Ok((total, LossReport { total: g.value(total).get(0, 0), ..report }))
}

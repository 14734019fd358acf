//! Single-shot cross-modality retrieval: ranking, CMC, mAP and the
//! prototype-index descriptor.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::encoder::{encode, pooled_descriptor, EncoderParams, StripeBatch};
use crate::memory::PrototypeMemory;
use crate::numerics::{cosine_rows, Matrix, Rng};
use crate::trainer::ModelParams;
use crate::{Error, Result};

/// Gallery order per query: descending cosine similarity, ties by ascending index.
pub fn rank_gallery(query: &Matrix, gallery: &Matrix) -> Result<Vec<Vec<usize>>> {
    if gallery.rows() == 0 {
        return Err(Error::Contract("rank_gallery: empty gallery".into()));
    }
    if query.cols() != gallery.cols() {
        return Err(Error::Dimension {
            op: "rank_gallery",
            left: query.shape(),
            right: gallery.shape(),
        });
    }
    let sim = cosine_rows(query, gallery)?;
    Ok((0..query.rows())
        .map(|q| {
            let row = sim.row(q);
            let mut order: Vec<usize> = (0..gallery.rows()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            order
        })
        .collect())
}

fn check_rankings(rankings: &[Vec<usize>], query_ids: &[u32], gallery_ids: &[u32]) -> Result<()> {
    if rankings.len() != query_ids.len() {
        return Err(Error::Contract(format!(
            "{} rankings for {} query identities",
            rankings.len(),
            query_ids.len()
        )));
    }
    for r in rankings {
        if r.len() != gallery_ids.len() || r.iter().any(|&i| i >= gallery_ids.len()) {
            return Err(Error::Contract("ranking does not index the gallery".into()));
        }
    }
    Ok(())
}

/// Cumulative match curve over queries whose identity is in the gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmc {
    /// `curve[r]` is the hit rate within the top `r + 1`.
    pub curve: Vec<f64>,
    /// Queries skipped because the gallery lacks their identity.
    pub excluded: usize,
}

pub fn compute_cmc(rankings: &[Vec<usize>], query_ids: &[u32], gallery_ids: &[u32], max_rank: usize) -> Result<Cmc> {
    check_rankings(rankings, query_ids, gallery_ids)?;
    if max_rank > gallery_ids.len() {
        return Err(Error::Contract(format!(
            "max_rank {max_rank} exceeds gallery size {}",
            gallery_ids.len()
        )));
    }
    let mut hits_at = alloc::vec![0usize; max_rank];
    let mut counted = 0usize;
    for (ranking, &qid) in rankings.iter().zip(query_ids) {
        let Some(first) = ranking.iter().position(|&g| gallery_ids[g] == qid) else {
            continue;
        };
        counted += 1;
        if first < max_rank {
            hits_at[first] += 1;
        }
    }
    let excluded = query_ids.len() - counted;
    if counted == 0 {
        return Err(Error::Contract("no query identity occurs in the gallery".into()));
    }
    let mut cumulative = 0usize;
    let curve = hits_at
        .iter()
        .map(|&h| {
            cumulative += h;
            cumulative as f64 / counted as f64
        })
        .collect();
    Ok(Cmc { curve, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapScore {
    pub map: f64,
    pub excluded: usize,
}

pub fn compute_map(rankings: &[Vec<usize>], query_ids: &[u32], gallery_ids: &[u32]) -> Result<MapScore> {
    check_rankings(rankings, query_ids, gallery_ids)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (ranking, &qid) in rankings.iter().zip(query_ids) {
        let mut relevant = 0usize;
        let mut precision_sum = 0.0;
        for (k, &g) in ranking.iter().enumerate() {
            if gallery_ids[g] == qid {
                relevant += 1;
                precision_sum += relevant as f64 / (k + 1) as f64;
            }
        }
        if relevant > 0 {
            counted += 1;
            total += precision_sum / relevant as f64;
        }
    }
    if counted == 0 {
        return Err(Error::Contract("no query identity occurs in the gallery".into()));
    }
    Ok(MapScore {
        map: total / counted as f64,
        excluded: query_ids.len() - counted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub rankings: Vec<Vec<usize>>,
    pub cmc: Vec<f64>,
    pub map: f64,
    pub excluded: usize,
}

impl RankingResult {
    pub fn rank1(&self) -> f64 {
        self.cmc[0]
    }
}

/// Ranks, then scores with CMC over the whole gallery and mAP.
pub fn score(query: &Matrix, gallery: &Matrix, query_ids: &[u32], gallery_ids: &[u32]) -> Result<RankingResult> {
    let rankings = rank_gallery(query, gallery)?;
    let cmc = compute_cmc(&rankings, query_ids, gallery_ids, gallery_ids.len())?;
    let map = compute_map(&rankings, query_ids, gallery_ids)?;
    Ok(RankingResult {
        rankings,
        cmc: cmc.curve,
        map: map.map,
        excluded: cmc.excluded,
    })
}

fn encode_set(encoder: &EncoderParams, set: &Dataset) -> Result<StripeBatch> {
    let cfg = &encoder.config;
    if set.num_stripes() != cfg.num_stripes || set.input_dim() != cfg.input_dim {
        return Err(Error::Dimension {
            op: "evaluate dataset",
            left: (cfg.num_stripes, cfg.input_dim),
            right: (set.num_stripes(), set.input_dim()),
        });
    }
    let all: Vec<usize> = (0..set.len()).collect();
    let ids: Vec<u32> = set.records().iter().map(|r| r.identity).collect();
    let mods: Vec<u8> = set.records().iter().map(|r| r.modality).collect();
    encode(encoder, &set.stack_stripes(&all), &ids, &mods)
}

/// Main-branch retrieval descriptors. Only the encoder is consulted.
pub fn main_descriptors(encoder: &EncoderParams, set: &Dataset) -> Result<Matrix> {
    pooled_descriptor(&encode_set(encoder, set)?)
}

/// Prototype-index descriptors: per stripe `w_part ⧺ w_ins ⧺ w_sem`,
/// concatenated over stripes.
pub fn proto_descriptors(encoder: &EncoderParams, memory: &PrototypeMemory, set: &Dataset) -> Result<Matrix> {
    let batch = encode_set(encoder, set)?;
    let refs: Vec<&Matrix> = batch.features.iter().collect();
    let readout = memory.read(&Matrix::concat_rows(&refs)?)?;
    let n = batch.len();
    let (a, b, c) = memory.config().level_rows();
    let width = a + b + c;
    let mut out = Matrix::zeros(n, width * batch.features.len());
    for s in 0..batch.features.len() {
        for i in 0..n {
            let src = s * n + i;
            let row = &mut out.row_mut(i)[s * width..(s + 1) * width];
            row[..a].copy_from_slice(readout.w_part.row(src));
            row[a..a + b].copy_from_slice(readout.w_ins.row(src));
            row[a + b..].copy_from_slice(readout.w_sem.row(src));
        }
    }
    Ok(out)
}

fn ids_of(set: &Dataset) -> Vec<u32> {
    set.records().iter().map(|r| r.identity).collect()
}

/// Ranks the full gallery by prototype-index descriptors.
pub fn proto_index_retrieve(params: &ModelParams, query: &Dataset, gallery: &Dataset) -> Result<RankingResult> {
    let memory = params
        .memory
        .as_ref()
        .ok_or_else(|| Error::Contract("prototype retrieval needs a model with memory".into()))?;
    let q = proto_descriptors(&params.encoder, memory, query)?;
    let g = proto_descriptors(&params.encoder, memory, gallery)?;
    score(&q, &g, &ids_of(query), &ids_of(gallery))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Pooled main-branch features; the memory is never read.
    Main,
    /// Addressing-weight descriptors through the memory.
    Proto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    /// One result per evaluation seed.
    pub per_seed: Vec<RankingResult>,
    /// CMC averaged over evaluation seeds.
    pub cmc: Vec<f64>,
    pub map: f64,
}

impl EvalReport {
    pub fn rank1(&self) -> f64 {
        self.cmc[0]
    }
}

/// Gallery indices for one single-shot trial: one random sample per identity,
/// identities ascending.
pub fn single_shot_gallery(gallery: &Dataset, rng: &mut Rng) -> Vec<usize> {
    let mut by_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in gallery.records().iter().enumerate() {
        by_id.entry(r.identity).or_default().push(i);
    }
    by_id.values().map(|v| v[rng.below(v.len())]).collect()
}

/// Single-shot evaluation averaged over `eval_seeds` gallery draws.
pub fn evaluate(
    params: &ModelParams,
    query: &Dataset,
    gallery: &Dataset,
    mode: EvalMode,
    eval_seeds: usize,
    seed: u64,
) -> Result<EvalReport> {
    if eval_seeds == 0 {
        return Err(Error::Config("at least one evaluation seed is required".into()));
    }
    if gallery.is_empty() {
        return Err(Error::Contract("evaluate: empty gallery".into()));
    }
    let (q, g) = match mode {
        EvalMode::Main => (
            main_descriptors(&params.encoder, query)?,
            main_descriptors(&params.encoder, gallery)?,
        ),
        EvalMode::Proto => {
            let memory = params
                .memory
                .as_ref()
                .ok_or_else(|| Error::Contract("prototype retrieval needs a model with memory".into()))?;
            (
                proto_descriptors(&params.encoder, memory, query)?,
                proto_descriptors(&params.encoder, memory, gallery)?,
            )
        }
    };
    let query_ids = ids_of(query);
    let gallery_ids = ids_of(gallery);
    let mut per_seed = Vec::with_capacity(eval_seeds);
    for trial in 0..eval_seeds {
        let pick = single_shot_gallery(gallery, &mut Rng::with_stream(seed, trial as u64));
        let ids: Vec<u32> = pick.iter().map(|&i| gallery_ids[i]).collect();
        per_seed.push(score(&q, &g.select_rows(&pick)?, &query_ids, &ids)?);
    }
    let width = per_seed[0].cmc.len();
    let n = eval_seeds as f64;
    let cmc = (0..width).map(|r| per_seed.iter().map(|p| p.cmc[r]).sum::<f64>() / n).collect();
    let map = per_seed.iter().map(|p| p.map).sum::<f64>() / n;
    Ok(EvalReport {
        mode,
        per_seed,
        cmc,
        map,
    })
}

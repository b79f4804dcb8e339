//! Iterative cross-modal set similarity with recurrent attention memories
//! and the bidirectional hinge loss over a batch.
//!
//! Each memory step attends from every query vector over the context set
//! with temperature-scaled cosine logits, reconstructs the query as the
//! attention-weighted context, and refreshes the memory as the normalised
//! sum of query and reconstruction. Both directions (proposals attending to
//! concepts, concepts attending to proposals) always use the *original*
//! opposite set as context.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{cosine, normalize, softmax};
use crate::tensor_io::Embedding;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    /// Number of memory steps `K`.
    pub steps: usize,
    /// Hinge margin.
    pub margin: f64,
    /// Softmax temperature applied to cosine logits.
    pub temperature: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            steps: 3,
            margin: 0.2,
            temperature: 10.0,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::param("steps must be at least 1"));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::param(format!(
                "margin {} must be finite and >= 0",
                self.margin
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::param(format!(
                "temperature {} must be > 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Output of one memory step.
#[derive(Debug, Clone, PartialEq)]
pub struct RamStep {
    /// Attention-weighted reconstruction of each query from the context.
    pub reconstructions: Vec<Vec<f64>>,
    /// Unit-normalised `query + reconstruction`.
    pub memory: Vec<Vec<f64>>,
}

/// One recurrent attention memory step of `queries` over `context`.
pub fn ram_step(queries: &[Vec<f64>], context: &[Vec<f64>], temperature: f64) -> Result<RamStep> {
    if queries.is_empty() || context.is_empty() {
        return Err(Error::EmptyModality("ram_step set"));
    }
    let dim = context[0].len();
    let mut reconstructions = Vec::with_capacity(queries.len());
    let mut memory = Vec::with_capacity(queries.len());
    for x in queries {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        let logits: Vec<f64> = context.iter().map(|y| temperature * cosine(x, y)).collect();
        let attn = softmax(&logits);
        let mut recon = vec![0.0; dim];
        for (a, y) in attn.iter().zip(context) {
            for (r, v) in recon.iter_mut().zip(y) {
                *r += a * v;
            }
        }
        let sum: Vec<f64> = x.iter().zip(&recon).map(|(a, b)| a + b).collect();
        memory.push(normalize(&sum));
        reconstructions.push(recon);
    }
    Ok(RamStep {
        reconstructions,
        memory,
    })
}

/// Per-step trace of [`set_similarity`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchState {
    pub memory_e: Vec<Vec<Vec<f64>>>,
    pub memory_t: Vec<Vec<Vec<f64>>>,
    pub reconstructions_e: Vec<Vec<Vec<f64>>>,
    pub reconstructions_t: Vec<Vec<Vec<f64>>>,
    /// `S^k` for each step.
    pub step_scores: Vec<f64>,
}

impl MatchState {
    pub fn total(&self) -> f64 {
        let mut s = 0.0;
        for v in &self.step_scores {
            s += v;
        }
        s
    }
}

fn mean_cos(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += cosine(x, y);
    }
    acc / a.len() as f64
}

fn to_vecs(set: &[Embedding]) -> Vec<Vec<f64>> {
    set.iter().map(Embedding::to_f64).collect()
}

/// Runs `K` steps in both directions and keeps the full trace.
pub fn match_sets(
    proposals: &[Embedding],
    concepts: &[Embedding],
    params: &MatchParams,
) -> Result<MatchState> {
    params.validate()?;
    if proposals.is_empty() || concepts.is_empty() {
        return Err(Error::EmptyModality(
            "set_similarity needs non-empty proposal and concept sets",
        ));
    }
    let e0 = to_vecs(proposals);
    let t0 = to_vecs(concepts);
    let mut state = MatchState {
        memory_e: Vec::new(),
        memory_t: Vec::new(),
        reconstructions_e: Vec::new(),
        reconstructions_t: Vec::new(),
        step_scores: Vec::new(),
    };
    let mut mem_e = e0.clone();
    let mut mem_t = t0.clone();
    for _ in 0..params.steps {
        let step_e = ram_step(&mem_e, &t0, params.temperature)?;
        let step_t = ram_step(&mem_t, &e0, params.temperature)?;
        let s = mean_cos(&e0, &step_e.reconstructions) + mean_cos(&step_t.reconstructions, &t0);
        state.step_scores.push(s);
        mem_e = step_e.memory;
        mem_t = step_t.memory;
        state.memory_e.push(mem_e.clone());
        state.memory_t.push(mem_t.clone());
        state.reconstructions_e.push(step_e.reconstructions);
        state.reconstructions_t.push(step_t.reconstructions);
    }
    Ok(state)
}

/// Set similarity `S = Σ_k S^k`, in `[-2K, 2K]`.
pub fn set_similarity(
    proposals: &[Embedding],
    concepts: &[Embedding],
    params: &MatchParams,
) -> Result<f64> {
    Ok(match_sets(proposals, concepts, params)?.total())
}

/// One (proposal set, concept set) pair of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SetPair {
    pub proposals: Vec<Embedding>,
    pub concepts: Vec<Embedding>,
}

/// `S[i][j] = S(E_i, T_j)` over the batch.
pub fn similarity_matrix(batch: &[SetPair], params: &MatchParams) -> Result<Vec<Vec<f64>>> {
    let b = batch.len();
    let flat: Vec<f64> = (0..b * b)
        .into_par_iter()
        .map(|ij| set_similarity(&batch[ij / b].proposals, &batch[ij % b].concepts, params))
        .collect::<Result<_>>()?;
    Ok(flat.chunks(b.max(1)).map(<[f64]>::to_vec).collect())
}

/// Hinge loss over a precomputed similarity matrix, hardest negative per
/// direction. Zero for a batch of one.
pub fn hinge_loss(s: &[Vec<f64>], margin: f64) -> f64 {
    let b = s.len();
    if b < 2 {
        return 0.0;
    }
    let mut loss = 0.0;
    for (i, row) in s.iter().enumerate() {
        let pos = row[i];
        let mut hardest_t = f64::NEG_INFINITY;
        let mut hardest_e = f64::NEG_INFINITY;
        for j in (0..b).filter(|&j| j != i) {
            hardest_t = hardest_t.max(row[j]);
            hardest_e = hardest_e.max(s[j][i]);
        }
        loss += (margin - pos + hardest_t).max(0.0);
        loss += (margin - pos + hardest_e).max(0.0);
    }
    loss
}

/// Bidirectional hinge loss of a batch of mined sets.
pub fn ram_loss(batch: &[SetPair], params: &MatchParams) -> Result<f64> {
    params.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyModality("ram_loss batch"));
    }
    for pair in batch {
        if pair.proposals.is_empty() || pair.concepts.is_empty() {
            return Err(Error::EmptyModality("ram_loss batch contains an empty set"));
        }
    }
    if batch.len() == 1 {
        return Ok(0.0);
    }
    Ok(hinge_loss(
        &similarity_matrix(batch, params)?,
        params.margin,
    ))
}

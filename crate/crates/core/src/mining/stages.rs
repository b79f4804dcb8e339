use crate::error::{Error, Result};
use crate::math::{cosine, entropy, normalize, numeric_cmp, softmax};
use crate::tensor_io::Embedding;

use super::MinedProposal;

/// Objectness-weighted cosine between a concept and a proposal.
pub fn sc_score(concept: &Embedding, proposal: &Embedding, objectness: f64) -> Result<f64> {
    if concept.dim() != proposal.dim() {
        return Err(Error::DimensionMismatch {
            expected: concept.dim(),
            found: proposal.dim(),
        });
    }
    if !(0.0..=1.0).contains(&objectness) {
        return Err(Error::param(format!(
            "objectness {objectness} outside [0, 1]"
        )));
    }
    Ok(cosine(&concept.to_f64(), &proposal.to_f64()) * objectness)
}

/// Scores of `n` concepts (rows) against `m` proposals (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ScMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ScMatrix {
    pub fn compute(concepts: &[Vec<f64>], proposals: &[Vec<f64>], objectness: &[f64]) -> Self {
        debug_assert_eq!(proposals.len(), objectness.len());
        let mut values = Vec::with_capacity(concepts.len() * proposals.len());
        for t in concepts {
            for (e, o) in proposals.iter().zip(objectness) {
                values.push(cosine(t, e) * o);
            }
        }
        Self {
            rows: concepts.len(),
            cols: proposals.len(),
            values,
        }
    }

    pub fn concepts(&self) -> usize {
        self.rows
    }

    pub fn proposals(&self) -> usize {
        self.cols
    }

    pub fn get(&self, concept: usize, proposal: usize) -> f64 {
        self.values[concept * self.cols + proposal]
    }

    pub fn column(&self, proposal: usize) -> Vec<f64> {
        (0..self.rows).map(|n| self.get(n, proposal)).collect()
    }
}

/// Entropy (nats) of the softmax over one proposal's scores, in `[0, ln n]`.
pub fn similarity_entropy(column: &[f64]) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::EmptyModality("similarity column"));
    }
    Ok(entropy(&softmax(column)))
}

/// Indices of proposals whose similarity entropy does not exceed that of
/// the whole-image pseudo-proposal (`image_sc` is its score column).
pub fn entropy_filter(sc: &ScMatrix, image_sc: &[f64]) -> Result<Vec<usize>> {
    if sc.concepts() == 0 {
        log::warn!("entropy filter called with no concepts; nothing survives");
        return Ok(Vec::new());
    }
    let threshold = similarity_entropy(image_sc)?;
    let mut keep = Vec::new();
    for m in 0..sc.proposals() {
        if similarity_entropy(&sc.column(m))? <= threshold {
            keep.push(m);
        }
    }
    Ok(keep)
}

/// Proposals matched to one concept, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptMatches {
    /// Row of the concept in the score matrix.
    pub concept: usize,
    /// Proposal columns, ranked by score descending then index.
    pub proposals: Vec<usize>,
}

/// For every concept, the `k` surviving proposals with the largest score.
pub fn topk_match(sc: &ScMatrix, surviving: &[usize], k: usize) -> Vec<ConceptMatches> {
    (0..sc.concepts())
        .map(|n| {
            let mut ranked = surviving.to_vec();
            ranked.sort_by(|&a, &b| numeric_cmp(sc.get(n, b), sc.get(n, a)).then(a.cmp(&b)));
            ranked.truncate(k);
            ConceptMatches {
                concept: n,
                proposals: ranked,
            }
        })
        .collect()
}

/// Drops concepts whose best matched score is below their score against the
/// whole image. Concepts without any match are dropped as well.
pub fn image_filter(
    sc: &ScMatrix,
    matches: Vec<ConceptMatches>,
    image_sc: &[f64],
) -> Vec<ConceptMatches> {
    matches
        .into_iter()
        .filter(|m| {
            let best = m
                .proposals
                .iter()
                .map(|&j| sc.get(m.concept, j))
                .fold(f64::NEG_INFINITY, f64::max);
            !m.proposals.is_empty() && best >= image_sc[m.concept]
        })
        .collect()
}

fn merge_pair(a: &MinedProposal, b: &MinedProposal) -> Result<MinedProposal> {
    let ea = a.embedding.to_f64();
    let eb = b.embedding.to_f64();
    let total = a.objectness + b.objectness;
    let (wa, wb) = if total > 0.0 {
        (a.objectness / total, b.objectness / total)
    } else {
        (0.5, 0.5)
    };
    let mean: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| wa * x + wb * y).collect();
    let mut sources: Vec<usize> = a.sources.iter().chain(&b.sources).copied().collect();
    sources.sort_unstable();
    Ok(MinedProposal {
        sources,
        bbox: a.bbox.enclose(&b.bbox),
        objectness: a.objectness.max(b.objectness),
        embedding: Embedding::from_f64(&normalize(&mean))?,
        score: f64::NAN,
        merged: true,
    })
}

/// Repeatedly merges the pair with the highest IoU at or above `theta_iou`
/// (ties by lowest index pair) until none remains. The merged proposal takes
/// the first slot of the pair. Returns the survivors and the merge count.
///
/// Merged entries carry `score = NaN`; the caller rescores them.
pub fn merge_fragments(
    mut items: Vec<MinedProposal>,
    theta_iou: f64,
) -> Result<(Vec<MinedProposal>, usize)> {
    let mut merges = 0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                let v = items[i].bbox.iou(&items[j].bbox);
                if v >= theta_iou && best.is_none_or(|(bv, _, _)| v > bv) {
                    best = Some((v, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else {
            return Ok((items, merges));
        };
        let merged = merge_pair(&items[i], &items[j])?;
        items[i] = merged;
        items.remove(j);
        merges += 1;
    }
}

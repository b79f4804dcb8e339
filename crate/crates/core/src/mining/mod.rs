//! Online proposal mining.
//!
//! Per image the pipeline runs concept augmentation (optional), builds the
//! objectness-weighted cosine score matrix, removes proposals whose
//! similarity entropy exceeds that of the whole-image pseudo-proposal,
//! matches each concept to its top-k proposals, drops concepts that match
//! the whole image better than any proposal, and merges overlapping
//! fragments within each concept.

mod io;
mod stages;

pub use io::{read_mined, write_mined, MinedRecord, MINED_CONCEPTS, MINED_JSONL, MINED_PROPOSALS};
pub use stages::{
    entropy_filter, image_filter, merge_fragments, sc_score, similarity_entropy, topk_match,
    ConceptMatches, ScMatrix,
};

use rayon::prelude::*;

use crate::augment::{augment_concepts, AttentionWeights};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::math::{cosine, numeric_cmp};
use crate::tensor_io::{Dataset, Embedding, Image, Vocabulary};

/// Knobs of the mining pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningParams {
    /// Fragments of one concept with IoU at or above this are merged.
    pub theta_iou: f64,
    /// Proposals matched per concept.
    pub top_k: usize,
    /// Run the attention block over the concepts before scoring.
    pub use_augmentation: bool,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            theta_iou: 0.6,
            top_k: 3,
            use_augmentation: false,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_iou > 0.0 && self.theta_iou <= 1.0) {
            return Err(Error::param(format!(
                "theta_iou {} outside (0, 1]",
                self.theta_iou
            )));
        }
        if self.top_k == 0 {
            return Err(Error::param("top_k must be at least 1"));
        }
        Ok(())
    }
}

/// A proposal paired with one concept, possibly the merge of several
/// original proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct MinedProposal {
    /// Indices (within the image) of the original proposals, ascending.
    pub sources: Vec<usize>,
    pub bbox: BBox,
    pub objectness: f64,
    pub embedding: Embedding,
    /// Score against the paired concept.
    pub score: f64,
    pub merged: bool,
}

impl MinedProposal {
    /// Representative index used for ordering: the smallest source index.
    pub fn index(&self) -> usize {
        self.sources[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedConcept {
    pub concept_id: u32,
    /// The (possibly augmented) concept embedding used for matching.
    pub embedding: Embedding,
    pub proposals: Vec<MinedProposal>,
}

/// Per-image mining result: concepts ordered by id, each with its block of
/// proposals ordered by score descending then index.
#[derive(Debug, Clone, PartialEq)]
pub struct MinedSet {
    pub image_id: String,
    pub concepts: Vec<MinedConcept>,
}

impl MinedSet {
    pub fn empty(image_id: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            concepts: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// `J_q` for each retained concept, in concept order.
    pub fn counts(&self) -> Vec<usize> {
        self.concepts.iter().map(|c| c.proposals.len()).collect()
    }

    pub fn proposal_count(&self) -> usize {
        self.concepts.iter().map(|c| c.proposals.len()).sum()
    }

    /// Flattened proposal embeddings, concept block by concept block.
    pub fn proposal_embeddings(&self) -> Vec<Embedding> {
        self.concepts
            .iter()
            .flat_map(|c| c.proposals.iter().map(|p| p.embedding.clone()))
            .collect()
    }

    pub fn concept_embeddings(&self) -> Vec<Embedding> {
        self.concepts.iter().map(|c| c.embedding.clone()).collect()
    }
}

/// Runs the full mining pipeline on one image.
pub fn mine_image(
    image: &Image,
    vocabulary: &Vocabulary,
    weights: Option<&AttentionWeights>,
    params: &MiningParams,
) -> Result<MinedSet> {
    params.validate()?;
    let mut ids = image.caption_concepts.clone();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() || image.proposals.is_empty() {
        return Ok(MinedSet::empty(&image.id));
    }

    let raw: Vec<Embedding> = ids
        .iter()
        .map(|&id| vocabulary.lookup(id).map(|c| c.embedding.clone()))
        .collect::<Result<_>>()?;
    let concepts = if params.use_augmentation {
        let w = weights.ok_or_else(|| {
            Error::param("augmentation enabled but no attention weights supplied")
        })?;
        augment_concepts(&raw, &image.tokens, w)?
    } else {
        raw
    };
    let dim = concepts[0].dim();
    for p in &image.proposals {
        if p.embedding.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.embedding.dim(),
            });
        }
    }
    if image.global_token().dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: image.global_token().dim(),
        });
    }

    let concept_vecs: Vec<Vec<f64>> = concepts.iter().map(Embedding::to_f64).collect();
    let proposal_vecs: Vec<Vec<f64>> = image
        .proposals
        .iter()
        .map(|p| p.embedding.to_f64())
        .collect();
    let objectness: Vec<f64> = image.proposals.iter().map(|p| p.objectness).collect();
    let sc = ScMatrix::compute(&concept_vecs, &proposal_vecs, &objectness);

    // The whole image acts as a proposal with objectness 1.
    let global = image.global_token().to_f64();
    let image_sc: Vec<f64> = concept_vecs.iter().map(|t| cosine(t, &global)).collect();

    let surviving = entropy_filter(&sc, &image_sc)?;
    let matches = topk_match(&sc, &surviving, params.top_k);
    let retained = image_filter(&sc, matches, &image_sc);

    let mut out = Vec::with_capacity(retained.len());
    for m in retained {
        let t = &concept_vecs[m.concept];
        let items: Vec<MinedProposal> = m
            .proposals
            .iter()
            .map(|&j| {
                let p = &image.proposals[j];
                MinedProposal {
                    sources: vec![j],
                    bbox: p.bbox,
                    objectness: p.objectness,
                    embedding: p.embedding.clone(),
                    score: sc.get(m.concept, j),
                    merged: false,
                }
            })
            .collect();
        let (mut merged, _) = merge_fragments(items, params.theta_iou)?;
        for p in merged.iter_mut().filter(|p| p.merged) {
            p.score = cosine(t, &p.embedding.to_f64()) * p.objectness;
        }
        merged.sort_by(|a, b| numeric_cmp(b.score, a.score).then(a.index().cmp(&b.index())));
        out.push(MinedConcept {
            concept_id: ids[m.concept],
            embedding: concepts[m.concept].clone(),
            proposals: merged,
        });
    }
    Ok(MinedSet {
        image_id: image.id.clone(),
        concepts: out,
    })
}

/// Mines every image of a dataset on `workers` threads. Results are in
/// dataset (image id) order regardless of the worker count.
pub fn mine_dataset(
    dataset: &Dataset,
    weights: Option<&AttentionWeights>,
    params: &MiningParams,
    workers: usize,
) -> Result<Vec<MinedSet>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    pool.install(|| {
        dataset
            .images
            .par_iter()
            .map(|img| mine_image(img, &dataset.vocabulary, weights, params))
            .collect()
    })
}

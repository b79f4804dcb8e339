//! Offline class-wise adjustment: per-concept density-peak clustering of
//! proposal embeddings, the de-bias vector derived from it, and adjusted
//! scoring.

mod bias;
mod cluster;

pub use bias::{adjust_matrix, adjust_scores, argmax, compute_bias, BiasEntry, BiasVector};
pub use cluster::{density_peak_cluster, ClusterParams, ClusterResult, Clustering};

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::cosine;
use crate::mining::MinedSet;
use crate::tensor_io::{Dataset, Embedding};

/// Which proposal embeddings are clustered for each concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Population {
    /// Proposals paired with the concept by mining.
    #[default]
    Mined,
    /// Every dataset proposal, attributed to its highest-cosine concept.
    Predicted,
}

impl std::str::FromStr for Population {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mined" => Ok(Population::Mined),
            "predicted" => Ok(Population::Predicted),
            other => Err(Error::param(format!(
                "unknown population `{other}` (mined|predicted)"
            ))),
        }
    }
}

impl std::fmt::Display for Population {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Population::Mined => "mined",
            Population::Predicted => "predicted",
        })
    }
}

/// Groups mined proposal embeddings by concept, in image then block order.
pub fn mined_population(sets: &[MinedSet]) -> BTreeMap<u32, Vec<Embedding>> {
    let mut pop: BTreeMap<u32, Vec<Embedding>> = BTreeMap::new();
    for set in sets {
        for c in &set.concepts {
            pop.entry(c.concept_id)
                .or_default()
                .extend(c.proposals.iter().map(|p| p.embedding.clone()));
        }
    }
    pop
}

/// Attributes every dataset proposal to the vocabulary concept with the
/// largest cosine (ties to the lower id).
pub fn predicted_population(dataset: &Dataset) -> BTreeMap<u32, Vec<Embedding>> {
    let concepts: Vec<(u32, Vec<f64>)> = dataset
        .vocabulary
        .iter()
        .map(|c| (c.id, c.embedding.to_f64()))
        .collect();
    let mut pop: BTreeMap<u32, Vec<Embedding>> = BTreeMap::new();
    if concepts.is_empty() {
        return pop;
    }
    for img in &dataset.images {
        for p in &img.proposals {
            let e = p.embedding.to_f64();
            let mut best = (f64::NEG_INFINITY, concepts[0].0);
            for (id, t) in &concepts {
                let c = cosine(t, &e);
                if c > best.0 {
                    best = (c, *id);
                }
            }
            pop.entry(best.1).or_default().push(p.embedding.clone());
        }
    }
    pop
}

/// Clusters every concept's population on `workers` threads; output is in
/// concept id order.
pub fn cluster_population(
    population: &BTreeMap<u32, Vec<Embedding>>,
    params: &ClusterParams,
    workers: usize,
) -> Result<Vec<ClusterResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    let items: Vec<(&u32, &Vec<Embedding>)> =
        population.iter().filter(|(_, v)| !v.is_empty()).collect();
    pool.install(|| {
        items
            .par_iter()
            .map(|(id, points)| {
                Ok(ClusterResult {
                    concept_id: **id,
                    clustering: density_peak_cluster(points, params)?,
                })
            })
            .collect()
    })
}

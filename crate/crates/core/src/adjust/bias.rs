use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::Tensor;

use super::ClusterResult;

/// De-bias statistics of one concept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasEntry {
    pub concept_id: u32,
    pub beta: f64,
    pub k: usize,
    pub n_tilde: usize,
}

/// Per-concept de-bias terms plus the global strength `gamma`.
///
/// Serialised as `{"gamma": .., "beta": [{"concept_id", "beta", "k",
/// "n_tilde"}, ..]}` sorted by concept id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasVector {
    pub gamma: f64,
    #[serde(rename = "beta")]
    entries: Vec<BiasEntry>,
}

impl BiasVector {
    pub fn new(gamma: f64, entries: impl IntoIterator<Item = BiasEntry>) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::param(format!(
                "gamma {gamma} must be finite and >= 0"
            )));
        }
        let mut map = BTreeMap::new();
        for e in entries {
            if !(e.beta >= 0.0 && e.beta.is_finite()) {
                return Err(Error::param(format!(
                    "beta {} of concept {} must be finite and >= 0",
                    e.beta, e.concept_id
                )));
            }
            if map.insert(e.concept_id, e).is_some() {
                return Err(Error::DuplicateConcept(e.concept_id));
            }
        }
        Ok(Self {
            gamma,
            entries: map.into_values().collect(),
        })
    }

    /// `β_q`; zero for concepts without an entry.
    pub fn beta(&self, concept_id: u32) -> f64 {
        self.entry(concept_id).map_or(0.0, |e| e.beta)
    }

    pub fn entry(&self, concept_id: u32) -> Option<&BiasEntry> {
        self.entries
            .binary_search_by_key(&concept_id, |e| e.concept_id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn entries(&self) -> &[BiasEntry] {
        &self.entries
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BiasVector =
            serde_json::from_str(text).map_err(|e| Error::parse("bias vector", e))?;
        BiasVector::new(raw.gamma, raw.entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `β_q = √K_q · (Ñ_q / K_q)` for every clustered concept; every other id in
/// `vocabulary` gets a zero entry.
pub fn compute_bias(
    results: &[ClusterResult],
    vocabulary: impl IntoIterator<Item = u32>,
    gamma: f64,
) -> Result<BiasVector> {
    let mut entries: BTreeMap<u32, BiasEntry> = vocabulary
        .into_iter()
        .map(|id| {
            (
                id,
                BiasEntry {
                    concept_id: id,
                    beta: 0.0,
                    k: 0,
                    n_tilde: 0,
                },
            )
        })
        .collect();
    for r in results {
        let k = r.clustering.k();
        let n_tilde = r.clustering.n_tilde();
        let beta = if k == 0 {
            0.0
        } else {
            let density = n_tilde as f64 / k as f64;
            (k as f64).sqrt() * density
        };
        entries.insert(
            r.concept_id,
            BiasEntry {
                concept_id: r.concept_id,
                beta,
                k,
                n_tilde,
            },
        );
    }
    BiasVector::new(gamma, entries.into_values())
}

/// `raw_q - γ·β_q` with `γ` from the bias vector unless overridden.
/// `concept_ids[q]` names the concept of `raw[q]`.
pub fn adjust_scores(
    raw: &[f64],
    concept_ids: &[u32],
    bias: &BiasVector,
    gamma_override: Option<f64>,
) -> Result<Vec<f64>> {
    if raw.len() != concept_ids.len() {
        return Err(Error::DimensionMismatch {
            expected: concept_ids.len(),
            found: raw.len(),
        });
    }
    let gamma = gamma_override.unwrap_or(bias.gamma);
    if !gamma.is_finite() {
        return Err(Error::param("gamma must be finite"));
    }
    raw.iter()
        .zip(concept_ids)
        .map(|(&r, &id)| {
            if !r.is_finite() {
                return Err(Error::param(format!(
                    "non-finite raw score for concept {id}"
                )));
            }
            Ok(r - gamma * bias.beta(id))
        })
        .collect()
}

/// Adjusts a `proposals x concepts` score tensor; column `q` is concept id `q`.
pub fn adjust_matrix(
    raw: &Tensor,
    bias: &BiasVector,
    gamma_override: Option<f64>,
) -> Result<Tensor> {
    if raw.shape().len() != 2 {
        return Err(Error::param(format!(
            "score tensor must be rank 2, got {:?}",
            raw.shape()
        )));
    }
    let cols = raw.cols();
    let ids: Vec<u32> = (0..cols as u32).collect();
    let mut data = Vec::with_capacity(raw.data().len());
    for r in 0..raw.rows() {
        let row: Vec<f64> = raw.row(r).iter().map(|&v| f64::from(v)).collect();
        data.extend(
            adjust_scores(&row, &ids, bias, gamma_override)?
                .into_iter()
                .map(|v| v as f32),
        );
    }
    Tensor::new(raw.shape().to_vec(), data)
}

/// Index of the largest score, ties to the lower index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

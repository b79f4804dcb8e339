use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::tensor_io::{load_tensor, read_jsonl, save_tensor, write_jsonl, Embedding, Tensor};

use super::{MinedConcept, MinedProposal, MinedSet};

pub const MINED_JSONL: &str = "mined.jsonl";
pub const MINED_PROPOSALS: &str = "mined_proposals.mdet";
pub const MINED_CONCEPTS: &str = "mined_concepts.mdet";

/// One mined (concept, proposal) pair. `embedding_row` indexes
/// `mined_proposals.mdet`, `concept_row` indexes `mined_concepts.mdet`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinedRecord {
    pub image_id: String,
    pub concept_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub objectness: f64,
    pub score: f64,
    pub embedding_row: usize,
    pub concept_row: usize,
    pub merged: bool,
    pub sources: Vec<usize>,
}

/// Writes mined sets (already in image order) into `dir`. Returns the number
/// of JSONL lines written.
pub fn write_mined(dir: &Path, sets: &[MinedSet], dim: usize) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::new();
    let mut proposal_rows = Vec::new();
    let mut concept_rows = Vec::new();
    for set in sets {
        for c in &set.concepts {
            let concept_row = concept_rows.len();
            concept_rows.push(c.embedding.clone());
            for p in &c.proposals {
                records.push(MinedRecord {
                    image_id: set.image_id.clone(),
                    concept_id: c.concept_id,
                    bbox: p.bbox,
                    objectness: p.objectness,
                    score: p.score,
                    embedding_row: proposal_rows.len(),
                    concept_row,
                    merged: p.merged,
                    sources: p.sources.clone(),
                });
                proposal_rows.push(p.embedding.clone());
            }
        }
    }
    write_jsonl(&dir.join(MINED_JSONL), &records)?;
    save_tensor(
        &Tensor::from_rows(&proposal_rows, dim)?,
        &dir.join(MINED_PROPOSALS),
    )?;
    save_tensor(
        &Tensor::from_rows(&concept_rows, dim)?,
        &dir.join(MINED_CONCEPTS),
    )?;
    Ok(records.len())
}

/// Reads back the non-empty mined sets written by [`write_mined`], ordered
/// by image id.
pub fn read_mined(dir: &Path) -> Result<Vec<MinedSet>> {
    let records: Vec<MinedRecord> = read_jsonl(&dir.join(MINED_JSONL))?;
    let proposals = load_tensor(&dir.join(MINED_PROPOSALS))?;
    let concepts = load_tensor(&dir.join(MINED_CONCEPTS))?;
    let row = |t: &Tensor, r: usize, what: &str| -> Result<Embedding> {
        if r >= t.rows() {
            return Err(Error::DanglingRow {
                what: what.into(),
                row: r,
                rows: t.rows(),
            });
        }
        t.embedding(r)
    };

    let mut by_image: BTreeMap<String, Vec<MinedConcept>> = BTreeMap::new();
    let mut last: Option<(String, usize)> = None;
    for rec in records {
        let proposal = MinedProposal {
            sources: rec.sources,
            bbox: rec.bbox,
            objectness: rec.objectness,
            embedding: row(&proposals, rec.embedding_row, MINED_PROPOSALS)?,
            score: rec.score,
            merged: rec.merged,
        };
        if proposal.sources.is_empty() {
            return Err(Error::param("mined record with no sources"));
        }
        let block = by_image.entry(rec.image_id.clone()).or_default();
        let key = (rec.image_id, rec.concept_row);
        if last.as_ref() != Some(&key) {
            block.push(MinedConcept {
                concept_id: rec.concept_id,
                embedding: row(&concepts, rec.concept_row, MINED_CONCEPTS)?,
                proposals: Vec::new(),
            });
            last = Some(key);
        }
        block
            .last_mut()
            .expect("pushed above")
            .proposals
            .push(proposal);
    }
    Ok(by_image
        .into_iter()
        .map(|(image_id, concepts)| MinedSet { image_id, concepts })
        .collect())
}

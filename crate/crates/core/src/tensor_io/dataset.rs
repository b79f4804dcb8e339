use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::manifest::{self, KeyValues};

use super::records::{
    read_jsonl, write_jsonl, ConceptOrigin, ConceptRecord, ImageRecord, ProposalRecord,
};
use super::tensor::{load_tensor, save_tensor, Embedding, Tensor};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub id: u32,
    pub text: String,
    pub origin: ConceptOrigin,
    pub embedding: Embedding,
}

/// Concept vocabulary ordered by `concept_id`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    concepts: Vec<Concept>,
    index: BTreeMap<u32, usize>,
}

impl Vocabulary {
    pub fn new(mut concepts: Vec<Concept>) -> Result<Self> {
        concepts.sort_by_key(|c| c.id);
        let mut index = BTreeMap::new();
        for (i, c) in concepts.iter().enumerate() {
            if index.insert(c.id, i).is_some() {
                return Err(Error::DuplicateConcept(c.id));
            }
        }
        Ok(Self { concepts, index })
    }

    pub fn get(&self, id: u32) -> Option<&Concept> {
        self.index.get(&id).map(|&i| &self.concepts[i])
    }

    pub fn lookup(&self, id: u32) -> Result<&Concept> {
        self.get(id).ok_or(Error::UnknownConcept(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.concepts.iter().map(|c| c.id)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    /// Row in the proposal embedding tensor.
    pub row: usize,
    pub bbox: BBox,
    pub objectness: f64,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub id: String,
    pub width: f64,
    pub height: f64,
    /// Whole-image tokens; the first is the global embedding.
    pub tokens: Vec<Embedding>,
    pub proposals: Vec<Proposal>,
    pub caption_concepts: Vec<u32>,
}

impl Image {
    /// The box covering the entire image.
    pub fn full_box(&self) -> BBox {
        BBox::new(0.0, 0.0, self.width, self.height).expect("validated at load")
    }

    pub fn global_token(&self) -> &Embedding {
        &self.tokens[0]
    }
}

/// A fully cross-validated dataset: images ordered by id, proposals in
/// line order within each image.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<Image>,
    pub vocabulary: Vocabulary,
    pub dim: usize,
}

impl Dataset {
    pub fn image(&self, id: &str) -> Option<&Image> {
        self.images
            .binary_search_by(|img| img.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.images[i])
    }
}

fn embedding_table(t: &Tensor, what: &str, dim: &mut Option<usize>) -> Result<()> {
    if t.shape().len() != 2 {
        return Err(Error::param(format!(
            "{what} must be a rank-2 tensor, got shape {:?}",
            t.shape()
        )));
    }
    let cols = t.cols();
    if cols == 0 {
        return Err(Error::param(format!("{what} has zero-width rows")));
    }
    match *dim {
        None => *dim = Some(cols),
        Some(d) if d != cols => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cols,
            })
        }
        Some(_) => {}
    }
    Ok(())
}

fn resolve(t: &Tensor, row: usize, what: &str) -> Result<Embedding> {
    if row >= t.rows() {
        return Err(Error::DanglingRow {
            what: what.to_string(),
            row,
            rows: t.rows(),
        });
    }
    t.embedding(row)
}

/// Loads and cross-validates a dataset from its manifest.
///
/// Manifest keys: `concepts`, `concept_embeddings`, `images`,
/// `image_embeddings`, `proposals`, `proposal_embeddings`; relative paths
/// resolve against the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let kv = KeyValues::load(manifest_path)?;
    let files = DatasetFiles {
        concept_embeddings: load_tensor(&kv.path("concept_embeddings")?)?,
        image_embeddings: load_tensor(&kv.path("image_embeddings")?)?,
        proposal_embeddings: load_tensor(&kv.path("proposal_embeddings")?)?,
        concepts: read_jsonl(&kv.path("concepts")?)?,
        images: read_jsonl(&kv.path("images")?)?,
        proposals: read_jsonl(&kv.path("proposals")?)?,
    };
    Dataset::from_files(&files)
}

impl Dataset {
    /// Cross-validates the raw pieces of a dataset and assembles it.
    pub fn from_files(files: &DatasetFiles) -> Result<Dataset> {
        let concept_tensor = &files.concept_embeddings;
        let image_tensor = &files.image_embeddings;
        let proposal_tensor = &files.proposal_embeddings;

        let mut dim = None;
        embedding_table(concept_tensor, "concept_embeddings", &mut dim)?;
        embedding_table(image_tensor, "image_embeddings", &mut dim)?;
        embedding_table(proposal_tensor, "proposal_embeddings", &mut dim)?;
        let dim = dim.expect("set above");

        let mut concepts = Vec::with_capacity(files.concepts.len());
        for rec in &files.concepts {
            concepts.push(Concept {
                id: rec.concept_id,
                embedding: resolve(concept_tensor, rec.embedding_row, "concepts")?,
                text: rec.text.clone(),
                origin: rec.origin,
            });
        }
        let vocabulary = Vocabulary::new(concepts)?;

        let mut images: BTreeMap<String, Image> = BTreeMap::new();
        for rec in &files.images {
            if rec.token_rows.is_empty() {
                return Err(Error::param(format!(
                    "image {:?} has no image tokens",
                    rec.image_id
                )));
            }
            if !(rec.width > 0.0
                && rec.height > 0.0
                && rec.width.is_finite()
                && rec.height.is_finite())
            {
                return Err(Error::param(format!(
                    "image {:?} has invalid extent",
                    rec.image_id
                )));
            }
            for &c in &rec.caption_concepts {
                vocabulary.lookup(c)?;
            }
            let tokens = rec
                .token_rows
                .iter()
                .map(|&r| resolve(image_tensor, r, "images"))
                .collect::<Result<Vec<_>>>()?;
            let image = Image {
                id: rec.image_id.clone(),
                width: rec.width,
                height: rec.height,
                tokens,
                proposals: Vec::new(),
                caption_concepts: rec.caption_concepts.clone(),
            };
            if images.insert(rec.image_id.clone(), image).is_some() {
                return Err(Error::param(format!(
                    "duplicate image_id {:?}",
                    rec.image_id
                )));
            }
        }

        for rec in &files.proposals {
            if !(0.0..=1.0).contains(&rec.objectness) {
                return Err(Error::param(format!(
                    "objectness {} outside [0, 1] in image {:?}",
                    rec.objectness, rec.image_id
                )));
            }
            let embedding = resolve(proposal_tensor, rec.embedding_row, "proposals")?;
            let image = images
                .get_mut(&rec.image_id)
                .ok_or_else(|| Error::UnknownImage(rec.image_id.clone()))?;
            image.proposals.push(Proposal {
                row: rec.embedding_row,
                bbox: rec.bbox,
                objectness: rec.objectness,
                embedding,
            });
        }

        Ok(Dataset {
            images: images.into_values().collect(),
            vocabulary,
            dim,
        })
    }
}

/// The raw on-disk pieces of a dataset, ready to be written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetFiles {
    pub concepts: Vec<ConceptRecord>,
    pub concept_embeddings: Tensor,
    pub images: Vec<ImageRecord>,
    pub image_embeddings: Tensor,
    pub proposals: Vec<ProposalRecord>,
    pub proposal_embeddings: Tensor,
}

/// Writes all dataset files plus `manifest.txt` into `dir`; returns the
/// manifest path.
pub fn write_dataset(dir: &Path, files: &DatasetFiles) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut seen = BTreeSet::new();
    for c in &files.concepts {
        if !seen.insert(c.concept_id) {
            return Err(Error::DuplicateConcept(c.concept_id));
        }
    }
    write_jsonl(&dir.join("concepts.jsonl"), &files.concepts)?;
    write_jsonl(&dir.join("images.jsonl"), &files.images)?;
    write_jsonl(&dir.join("proposals.jsonl"), &files.proposals)?;
    save_tensor(
        &files.concept_embeddings,
        &dir.join("concept_embeddings.mdet"),
    )?;
    save_tensor(&files.image_embeddings, &dir.join("image_embeddings.mdet"))?;
    save_tensor(
        &files.proposal_embeddings,
        &dir.join("proposal_embeddings.mdet"),
    )?;
    let text = manifest::render([
        ("concepts", "concepts.jsonl".to_string()),
        ("concept_embeddings", "concept_embeddings.mdet".to_string()),
        ("images", "images.jsonl".to_string()),
        ("image_embeddings", "image_embeddings.mdet".to_string()),
        ("proposals", "proposals.jsonl".to_string()),
        (
            "proposal_embeddings",
            "proposal_embeddings.mdet".to_string(),
        ),
    ]);
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

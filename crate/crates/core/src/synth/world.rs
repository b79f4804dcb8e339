use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::math::{cosine, normalize};
use crate::tensor_io::{
    read_jsonl, write_dataset, write_jsonl, ConceptOrigin, ConceptRecord, DatasetFiles, Embedding,
    ImageRecord, ProposalRecord, Tensor,
};

use super::rng::SplitRng;

pub const TRUTH_FILE: &str = "truth.jsonl";

const PURPOSE_CONCEPTS: u64 = 0;
const PURPOSE_IMAGES: u64 = 1;
/// Weight of the random background direction mixed into the global image token.
const BACKGROUND_WEIGHT: f64 = 1.5;
const MAX_CONCEPT_ATTEMPTS: usize = 10_000;

/// Parameters of a synthetic world. `Default` is the standard world used by
/// the acceptance suite.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub dim: usize,
    pub base_concepts: usize,
    pub novel_concepts: usize,
    pub images: usize,
    /// Objects per image, each of a distinct concept.
    pub objects_per_image: usize,
    /// Proposals emitted per unfragmented object (jittered copies).
    pub proposals_per_object: usize,
    pub distractors_per_image: usize,
    /// Probability that an object is seen only through three fragments.
    pub fragment_rate: f64,
    /// Per-component standard deviation of embedding noise.
    pub noise: f64,
    /// Sampling weight of a base concept relative to a novel one.
    pub base_novel_ratio: f64,
    /// Minimum pairwise angle between concept embeddings, in degrees.
    pub min_angle_deg: f64,
    pub image_width: f64,
    pub image_height: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dim: 64,
            base_concepts: 15,
            novel_concepts: 5,
            images: 200,
            objects_per_image: 3,
            proposals_per_object: 3,
            distractors_per_image: 5,
            fragment_rate: 0.3,
            noise: 0.1,
            base_novel_ratio: 3.0,
            min_angle_deg: 60.0,
            image_width: 640.0,
            image_height: 480.0,
        }
    }
}

impl WorldConfig {
    pub fn concepts(&self) -> usize {
        self.base_concepts + self.novel_concepts
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("images", self.images),
            ("objects_per_image", self.objects_per_image),
            ("proposals_per_object", self.proposals_per_object),
            ("concepts", self.concepts()),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::param(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.fragment_rate) {
            return Err(Error::param(format!(
                "fragment_rate {} outside [0, 1]",
                self.fragment_rate
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::param("noise must be finite and >= 0"));
        }
        if !(self.base_novel_ratio >= 1.0 && self.base_novel_ratio.is_finite()) {
            return Err(Error::param("base_novel_ratio must be >= 1"));
        }
        if !(0.0..180.0).contains(&self.min_angle_deg) {
            return Err(Error::param("min_angle_deg must lie in [0, 180)"));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::param("image extent must be positive"));
        }
        if self.objects_per_image > self.concepts() {
            return Err(Error::Infeasible(format!(
                "{} objects per image but only {} concepts",
                self.objects_per_image,
                self.concepts()
            )));
        }
        Ok(())
    }

    pub fn is_base(&self, concept_id: u32) -> bool {
        (concept_id as usize) < self.base_concepts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "kebab-case")]
pub enum ProposalOrigin {
    TrueObject { object: usize },
    FragmentOf { object: usize },
    Distractor,
}

impl ProposalOrigin {
    pub fn object(&self) -> Option<usize> {
        match *self {
            ProposalOrigin::TrueObject { object } | ProposalOrigin::FragmentOf { object } => {
                Some(object)
            }
            ProposalOrigin::Distractor => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub concept_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalTruth {
    /// Row in the proposal embedding tensor.
    pub row: usize,
    #[serde(flatten)]
    pub origin: ProposalOrigin,
}

/// Ground truth of one image; `proposals` follows the image's proposal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTruth {
    pub image_id: String,
    pub objects: Vec<TruthObject>,
    pub proposals: Vec<ProposalTruth>,
}

/// A generated world: the dataset files plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub config: WorldConfig,
    pub files: DatasetFiles,
    pub truth: Vec<ImageTruth>,
}

impl World {
    /// Writes the dataset, its manifest and `truth.jsonl`; returns the
    /// manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let manifest = write_dataset(dir, &self.files)?;
        write_truth(&dir.join(TRUTH_FILE), &self.truth)?;
        Ok(manifest)
    }

    /// Base concept ids.
    pub fn base_ids(&self) -> impl Iterator<Item = u32> + '_ {
        0..self.config.base_concepts as u32
    }
}

pub fn write_truth(path: &Path, truth: &[ImageTruth]) -> Result<()> {
    write_jsonl(path, truth)
}

pub fn read_truth(path: &Path) -> Result<Vec<ImageTruth>> {
    read_jsonl(path)
}

fn concept_embeddings(cfg: &WorldConfig) -> Result<Vec<Vec<f64>>> {
    let mut rng = SplitRng::new(cfg.seed, PURPOSE_CONCEPTS, 0);
    let max_cos = cfg.min_angle_deg.to_radians().cos();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cfg.concepts());
    for _ in 0..cfg.concepts() {
        let mut placed = false;
        for _ in 0..MAX_CONCEPT_ATTEMPTS {
            let v = rng.unit_vec(cfg.dim);
            if out.iter().all(|u| cosine(u, &v) <= max_cos) {
                out.push(v);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Infeasible(format!(
                "could not place {} concepts in {} dimensions with pairwise angle >= {} degrees",
                cfg.concepts(),
                cfg.dim,
                cfg.min_angle_deg
            )));
        }
    }
    Ok(out)
}

/// Weighted sampling of `k` distinct concepts.
fn sample_concepts(cfg: &WorldConfig, rng: &mut SplitRng) -> Vec<u32> {
    let mut pool: Vec<(u32, f64)> = (0..cfg.concepts() as u32)
        .map(|id| {
            (
                id,
                if cfg.is_base(id) {
                    cfg.base_novel_ratio
                } else {
                    1.0
                },
            )
        })
        .collect();
    let mut picked = Vec::with_capacity(cfg.objects_per_image);
    for _ in 0..cfg.objects_per_image {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut x = rng.uniform() * total;
        let mut idx = pool.len() - 1;
        for (i, (_, w)) in pool.iter().enumerate() {
            if x < *w {
                idx = i;
                break;
            }
            x -= w;
        }
        picked.push(pool.remove(idx).0);
    }
    picked
}

fn noisy(base: &[f64], sigma: f64, rng: &mut SplitRng) -> Vec<f64> {
    let g = rng.gaussian_vec(base.len(), sigma);
    normalize(&base.iter().zip(&g).map(|(a, b)| a + b).collect::<Vec<_>>())
}

fn to_embedding(v: &[f64]) -> Embedding {
    Embedding::from_f64(v).expect("generated vectors are finite and non-empty")
}

fn jitter(b: &BBox, rng: &mut SplitRng, cfg: &WorldConfig) -> BBox {
    let (w, h) = (b.width(), b.height());
    let mut j = |v: f64, s: f64| v + s * rng.range(-0.03, 0.03);
    let x1 = j(b.x1(), w).max(0.0);
    let y1 = j(b.y1(), h).max(0.0);
    let x2 = j(b.x2(), w).min(cfg.image_width);
    let y2 = j(b.y2(), h).min(cfg.image_height);
    BBox::new(x1, y1, x2, y2).unwrap_or(*b)
}

/// Three sub-boxes of `b`, trimmed from the right, left and bottom by
/// 10–20 % each; pairwise IoU stays at or above 0.6 and together they
/// enclose `b`.
fn fragments(b: &BBox, rng: &mut SplitRng) -> [BBox; 3] {
    let (w, h) = (b.width(), b.height());
    let r = rng.range(0.1, 0.2);
    let l = rng.range(0.1, 0.2);
    let d = rng.range(0.1, 0.2);
    [
        BBox::new(b.x1(), b.y1(), b.x2() - r * w, b.y2()).expect("sub-box"),
        BBox::new(b.x1() + l * w, b.y1(), b.x2(), b.y2()).expect("sub-box"),
        BBox::new(b.x1(), b.y1(), b.x2(), b.y2() - d * h).expect("sub-box"),
    ]
}

fn random_box(rng: &mut SplitRng, cfg: &WorldConfig) -> BBox {
    let w = cfg.image_width * rng.range(0.1, 0.4);
    let h = cfg.image_height * rng.range(0.1, 0.4);
    let x = rng.range(0.0, cfg.image_width - w);
    let y = rng.range(0.0, cfg.image_height - h);
    BBox::new(x, y, x + w, y + h).expect("positive size")
}

struct GeneratedImage {
    record: ImageRecord,
    tokens: Vec<Embedding>,
    proposals: Vec<(BBox, f64, Embedding, ProposalOrigin)>,
    objects: Vec<TruthObject>,
}

fn generate_image(cfg: &WorldConfig, index: usize, concepts: &[Vec<f64>]) -> GeneratedImage {
    let mut rng = SplitRng::new(cfg.seed, PURPOSE_IMAGES, index as u64);
    let image_id = format!("img{index:05}");
    let chosen = sample_concepts(cfg, &mut rng);

    let n = chosen.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let cell_w = cfg.image_width / cols as f64;
    let cell_h = cfg.image_height / rows as f64;

    let mut objects = Vec::with_capacity(n);
    let mut proposals = Vec::new();
    for (k, &cid) in chosen.iter().enumerate() {
        let (cx, cy) = ((k % cols) as f64 * cell_w, (k / cols) as f64 * cell_h);
        let w = cell_w * rng.range(0.5, 0.85);
        let h = cell_h * rng.range(0.5, 0.85);
        let x = cx + rng.range(0.0, cell_w - w);
        let y = cy + rng.range(0.0, cell_h - h);
        let bbox = BBox::new(x, y, x + w, y + h).expect("positive size");
        objects.push(TruthObject {
            concept_id: cid,
            bbox,
        });

        let concept = &concepts[cid as usize];
        if rng.uniform() < cfg.fragment_rate {
            let parent = to_embedding(&noisy(concept, cfg.noise, &mut rng));
            for frag in fragments(&bbox, &mut rng) {
                let o = rng.range(0.7, 0.95);
                proposals.push((
                    frag,
                    o,
                    parent.clone(),
                    ProposalOrigin::FragmentOf { object: k },
                ));
            }
        } else {
            for c in 0..cfg.proposals_per_object {
                let b = if c == 0 {
                    bbox
                } else {
                    jitter(&bbox, &mut rng, cfg)
                };
                let o = rng.range(0.85, 1.0);
                let e = to_embedding(&noisy(concept, cfg.noise, &mut rng));
                proposals.push((b, o, e, ProposalOrigin::TrueObject { object: k }));
            }
        }
    }
    for _ in 0..cfg.distractors_per_image {
        let b = random_box(&mut rng, cfg);
        let o = rng.range(0.3, 0.7);
        let e = to_embedding(&rng.unit_vec(cfg.dim));
        proposals.push((b, o, e, ProposalOrigin::Distractor));
    }
    rng.shuffle(&mut proposals);

    let mut global: Vec<f64> = rng
        .unit_vec(cfg.dim)
        .iter()
        .map(|v| BACKGROUND_WEIGHT * v)
        .collect();
    for &cid in &chosen {
        for (g, c) in global.iter_mut().zip(&concepts[cid as usize]) {
            *g += c;
        }
    }
    let mut tokens = vec![to_embedding(&normalize(&global))];
    for &cid in &chosen {
        tokens.push(to_embedding(&noisy(
            &concepts[cid as usize],
            cfg.noise,
            &mut rng,
        )));
    }

    let mut caption = chosen.clone();
    caption.sort_unstable();
    GeneratedImage {
        record: ImageRecord {
            image_id,
            width: cfg.image_width,
            height: cfg.image_height,
            token_rows: Vec::new(),
            caption_concepts: caption,
        },
        tokens,
        proposals,
        objects,
    }
}

/// Builds a world deterministically from `config`.
pub fn generate_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let concepts = concept_embeddings(config)?;
    let concept_records: Vec<ConceptRecord> = (0..config.concepts())
        .map(|i| ConceptRecord {
            concept_id: i as u32,
            text: format!("concept_{i}"),
            embedding_row: i,
            origin: if config.is_base(i as u32) {
                ConceptOrigin::Base
            } else {
                ConceptOrigin::Caption
            },
        })
        .collect();
    let concept_rows: Vec<Embedding> = concepts.iter().map(|c| to_embedding(c)).collect();

    let mut images = Vec::with_capacity(config.images);
    let mut image_rows = Vec::new();
    let mut proposals = Vec::new();
    let mut proposal_rows = Vec::new();
    let mut truth = Vec::with_capacity(config.images);
    for index in 0..config.images {
        let mut g = generate_image(config, index, &concepts);
        for t in g.tokens {
            g.record.token_rows.push(image_rows.len());
            image_rows.push(t);
        }
        let mut ptruth = Vec::with_capacity(g.proposals.len());
        for (bbox, objectness, emb, origin) in g.proposals {
            let row = proposal_rows.len();
            proposals.push(ProposalRecord {
                image_id: g.record.image_id.clone(),
                bbox,
                objectness,
                embedding_row: row,
            });
            proposal_rows.push(emb);
            ptruth.push(ProposalTruth { row, origin });
        }
        truth.push(ImageTruth {
            image_id: g.record.image_id.clone(),
            objects: g.objects,
            proposals: ptruth,
        });
        images.push(g.record);
    }

    let dim = config.dim;
    Ok(World {
        config: config.clone(),
        files: DatasetFiles {
            concepts: concept_records,
            concept_embeddings: Tensor::from_rows(&concept_rows, dim)?,
            images,
            image_embeddings: Tensor::from_rows(&image_rows, dim)?,
            proposals,
            proposal_embeddings: Tensor::from_rows(&proposal_rows, dim)?,
        },
        truth,
    })
}

/// Ground-truth object count per concept id `0..concepts`.
pub fn concept_frequency(truth: &[ImageTruth], concepts: usize) -> Vec<f64> {
    let mut freq = vec![0.0; concepts];
    for img in truth {
        for o in &img.objects {
            if let Some(f) = freq.get_mut(o.concept_id as usize) {
                *f += 1.0;
            }
        }
    }
    freq
}

/// A detector-like scorer whose over-confidence grows with how often a
/// concept was seen: `score_q(e) = scale·cos(e, t_q) + inflation·freq_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorerParams {
    pub scale: f64,
    pub inflation: f64,
}

impl Default for ScorerParams {
    fn default() -> Self {
        Self {
            scale: 10.0,
            inflation: 0.3,
        }
    }
}

/// `proposals x concepts` raw score tensor; concept embeddings are rows of
/// `concepts` in id order.
pub fn biased_scores(
    proposals: &Tensor,
    concepts: &Tensor,
    frequency: &[f64],
    params: &ScorerParams,
) -> Result<Tensor> {
    if frequency.len() != concepts.rows() {
        return Err(Error::DimensionMismatch {
            expected: concepts.rows(),
            found: frequency.len(),
        });
    }
    if proposals.cols() != concepts.cols() {
        return Err(Error::DimensionMismatch {
            expected: concepts.cols(),
            found: proposals.cols(),
        });
    }
    let concept_vecs: Vec<Vec<f64>> = (0..concepts.rows())
        .map(|q| crate::math::widen(concepts.row(q)))
        .collect();
    let mut data = Vec::with_capacity(proposals.rows() * concepts.rows());
    for r in 0..proposals.rows() {
        let e = crate::math::widen(proposals.row(r));
        for (t, f) in concept_vecs.iter().zip(frequency) {
            data.push((params.scale * cosine(t, &e) + params.inflation * f) as f32);
        }
    }
    Tensor::new(vec![proposals.rows(), concepts.rows()], data)
}

/// True concept of every proposal row (`None` for distractors).
pub fn score_labels(truth: &[ImageTruth], rows: usize) -> Result<Vec<Option<u32>>> {
    let mut labels = vec![None; rows];
    for img in truth {
        for p in &img.proposals {
            let slot = labels.get_mut(p.row).ok_or_else(|| Error::DanglingRow {
                what: TRUTH_FILE.into(),
                row: p.row,
                rows,
            })?;
            if let Some(o) = p.origin.object() {
                let obj = img.objects.get(o).ok_or_else(|| {
                    Error::param(format!("{}: proposal references object {o}", img.image_id))
                })?;
                *slot = Some(obj.concept_id);
            }
        }
    }
    Ok(labels)
}

//! Cross-modal concept augmentation.
//!
//! Each concept embedding attends over the image tokens of one image with a
//! single scaled dot-product head, followed by a two-layer feed-forward
//! network, both wrapped in residual connections:
//!
//! ```text
//! t'  = t  + softmax((Wq t)·(Wk V)ᵀ / √D) · (Wv V)
//! out = t' + W2 · relu(W1 t' + b1) + b2
//! ```
//!
//! There is no layer normalisation.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::manifest::{self, KeyValues};
use crate::math::{dot, matvec, softmax};
use crate::tensor_io::{load_tensor, save_tensor, Embedding, Tensor};

/// Parameters of the attention block. Matrices are row-major `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    dim: usize,
    hidden: usize,
    w_q: Vec<f32>,
    w_k: Vec<f32>,
    w_v: Vec<f32>,
    ffn_w1: Vec<f32>,
    ffn_b1: Vec<f32>,
    ffn_w2: Vec<f32>,
    ffn_b2: Vec<f32>,
}

const BUNDLE_KEYS: [&str; 7] = ["w_q", "w_k", "w_v", "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2"];

fn expect_len(name: &str, v: &[f32], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::param(format!(
            "{name} has {} elements, expected {len}",
            v.len()
        )));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::param(format!(
            "{name} has a non-finite element at {i}"
        )));
    }
    Ok(())
}

impl AttentionWeights {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        hidden: usize,
        w_q: Vec<f32>,
        w_k: Vec<f32>,
        w_v: Vec<f32>,
        ffn_w1: Vec<f32>,
        ffn_b1: Vec<f32>,
        ffn_w2: Vec<f32>,
        ffn_b2: Vec<f32>,
    ) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::param("attention dimensions must be positive"));
        }
        expect_len("w_q", &w_q, dim * dim)?;
        expect_len("w_k", &w_k, dim * dim)?;
        expect_len("w_v", &w_v, dim * dim)?;
        expect_len("ffn_w1", &ffn_w1, hidden * dim)?;
        expect_len("ffn_b1", &ffn_b1, hidden)?;
        expect_len("ffn_w2", &ffn_w2, dim * hidden)?;
        expect_len("ffn_b2", &ffn_b2, dim)?;
        Ok(Self {
            dim,
            hidden,
            w_q,
            w_k,
            w_v,
            ffn_w1,
            ffn_b1,
            ffn_w2,
            ffn_b2,
        })
    }

    /// All-zero weights: the block reduces to the identity.
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            dim,
            hidden,
            w_q: vec![0.0; dim * dim],
            w_k: vec![0.0; dim * dim],
            w_v: vec![0.0; dim * dim],
            ffn_w1: vec![0.0; hidden * dim],
            ffn_b1: vec![0.0; hidden],
            ffn_w2: vec![0.0; dim * hidden],
            ffn_b2: vec![0.0; dim],
        }
    }

    /// Uniform initialisation in `[-1/√D, 1/√D]` from a seeded ChaCha8
    /// stream. Hidden size defaults to `4·D` when `hidden` is `None`.
    pub fn seeded(dim: usize, hidden: Option<usize>, seed: u64) -> Self {
        let hidden = hidden.unwrap_or(4 * dim);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f32> {
            (0..n)
                .map(|_| {
                    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                    ((2.0 * u - 1.0) * bound) as f32
                })
                .collect()
        };
        let w_q = draw(dim * dim);
        let w_k = draw(dim * dim);
        let w_v = draw(dim * dim);
        let ffn_w1 = draw(hidden * dim);
        let ffn_b1 = draw(hidden);
        let ffn_w2 = draw(dim * hidden);
        let ffn_b2 = draw(dim);
        Self {
            dim,
            hidden,
            w_q,
            w_k,
            w_v,
            ffn_w1,
            ffn_b1,
            ffn_w2,
            ffn_b2,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Zeroes the value projection and the whole feed-forward network.
    pub fn with_zero_output_path(mut self) -> Self {
        self.w_v.iter_mut().for_each(|v| *v = 0.0);
        for m in [
            &mut self.ffn_w1,
            &mut self.ffn_b1,
            &mut self.ffn_w2,
            &mut self.ffn_b2,
        ] {
            m.iter_mut().for_each(|v| *v = 0.0);
        }
        self
    }

    /// Loads a bundle manifest naming one `MDET` file per parameter.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let kv = KeyValues::load(manifest_path)?;
        for key in kv.keys() {
            if !BUNDLE_KEYS.contains(&key) {
                return Err(Error::param(format!("unknown weight bundle key `{key}`")));
            }
        }
        let mut tensors = Vec::with_capacity(BUNDLE_KEYS.len());
        for key in BUNDLE_KEYS {
            tensors.push(load_tensor(&kv.path(key)?)?);
        }
        let w_q = &tensors[0];
        if w_q.shape().len() != 2 || w_q.shape()[0] != w_q.shape()[1] {
            return Err(Error::param(format!(
                "w_q must be square, got {:?}",
                w_q.shape()
            )));
        }
        let dim = w_q.shape()[0];
        let w1 = &tensors[3];
        if w1.shape().len() != 2 || w1.shape()[1] != dim {
            return Err(Error::param(format!(
                "ffn_w1 must be H x {dim}, got {:?}",
                w1.shape()
            )));
        }
        let hidden = w1.shape()[0];
        let mut it = tensors.into_iter().map(Tensor::into_data);
        let mut next = || it.next().expect("seven tensors");
        Self::new(
            dim,
            hidden,
            next(),
            next(),
            next(),
            next(),
            next(),
            next(),
            next(),
        )
    }

    /// Writes one `MDET` file per parameter plus `weights.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (d, h) = (self.dim, self.hidden);
        let parts: [(&str, Vec<usize>, &Vec<f32>); 7] = [
            ("w_q", vec![d, d], &self.w_q),
            ("w_k", vec![d, d], &self.w_k),
            ("w_v", vec![d, d], &self.w_v),
            ("ffn_w1", vec![h, d], &self.ffn_w1),
            ("ffn_b1", vec![h], &self.ffn_b1),
            ("ffn_w2", vec![d, h], &self.ffn_w2),
            ("ffn_b2", vec![d], &self.ffn_b2),
        ];
        let mut lines = Vec::new();
        for (name, shape, data) in parts {
            let file = format!("{name}.mdet");
            save_tensor(&Tensor::new(shape, data.clone())?, &dir.join(&file))?;
            lines.push((name, file));
        }
        let path = dir.join("weights.txt");
        std::fs::write(&path, manifest::render(lines)).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Augments every concept embedding with information from the image tokens.
/// The output has one embedding per input concept, in input order.
pub fn augment_concepts(
    concepts: &[Embedding],
    tokens: &[Embedding],
    weights: &AttentionWeights,
) -> Result<Vec<Embedding>> {
    if tokens.is_empty() {
        return Err(Error::EmptyModality("image tokens"));
    }
    let d = weights.dim;
    for e in concepts.iter().chain(tokens) {
        if e.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: e.dim(),
            });
        }
    }
    let scale = 1.0 / (d as f64).sqrt();
    let token_vecs: Vec<Vec<f64>> = tokens.iter().map(Embedding::to_f64).collect();
    let keys: Vec<Vec<f64>> = token_vecs
        .iter()
        .map(|v| matvec(&weights.w_k, d, d, v))
        .collect();
    let values: Vec<Vec<f64>> = token_vecs
        .iter()
        .map(|v| matvec(&weights.w_v, d, d, v))
        .collect();

    concepts
        .iter()
        .map(|t| {
            let t = t.to_f64();
            let q = matvec(&weights.w_q, d, d, &t);
            let logits: Vec<f64> = keys.iter().map(|k| dot(&q, k) * scale).collect();
            let attn = softmax(&logits);
            debug_assert!((attn.iter().sum::<f64>() - 1.0).abs() < 1e-9);

            let mut mid = t.clone();
            for (a, v) in attn.iter().zip(&values) {
                for (m, x) in mid.iter_mut().zip(v) {
                    *m += a * x;
                }
            }

            let mut hidden = matvec(&weights.ffn_w1, weights.hidden, d, &mid);
            for (h, b) in hidden.iter_mut().zip(&weights.ffn_b1) {
                *h = (*h + f64::from(*b)).max(0.0);
            }
            let ffn = matvec(&weights.ffn_w2, d, weights.hidden, &hidden);
            let out: Vec<f64> = mid
                .iter()
                .zip(&ffn)
                .zip(&weights.ffn_b2)
                .map(|((m, f), b)| m + (f + f64::from(*b)))
                .collect();
            Embedding::from_f64(&out)
        })
        .collect()
}

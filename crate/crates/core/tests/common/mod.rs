//! Reference implementations and random input generators shared by the
//! integration tests. The references are written straight from the
//! definitions with plain loops and no code shared with the library beyond
//! its data types.

#![allow(dead_code, clippy::needless_range_loop)]

use medet::geometry::BBox;
use medet::mining::{MinedConcept, MinedProposal, MinedSet};
use medet::synth::SplitRng;
use medet::tensor_io::{Concept, ConceptOrigin, Embedding, Image, Proposal, Vocabulary};

pub fn rng(seed: u64) -> SplitRng {
    SplitRng::new(seed, 99, 0)
}

pub fn f64s(e: &Embedding) -> Vec<f64> {
    e.values().iter().map(|&x| x as f64).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn ref_cos(a: &[f64], b: &[f64]) -> f64 {
    let aa = dot(a, a);
    let bb = dot(b, b);
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        let c = dot(a, b) / (aa * bb).sqrt();
        c.clamp(-1.0, 1.0)
    }
}

pub fn ref_entropy(logits: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &l in logits {
        if l > max {
            max = l;
        }
    }
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let mut z = 0.0;
    for v in &e {
        z += v;
    }
    let mut h = 0.0;
    for v in &e {
        let p = v / z;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

pub fn ref_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    if a == b {
        return 1.0;
    }
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    (inter / union).clamp(0.0, 1.0)
}

struct Cand {
    sources: Vec<usize>,
    bbox: [f64; 4],
    objectness: f64,
    embedding: Vec<f32>,
    merged: bool,
}

/// Brute-force proposal mining for one image.
pub fn ref_mine(image: &Image, vocabulary: &Vocabulary, theta: f64, k: usize) -> MinedSet {
    let mut ids = image.caption_concepts.clone();
    ids.sort();
    ids.dedup();
    let empty = MinedSet {
        image_id: image.id.clone(),
        concepts: vec![],
    };
    if ids.is_empty() || image.proposals.is_empty() {
        return empty;
    }
    let t: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| f64s(&vocabulary.get(id).unwrap().embedding))
        .collect();
    let e: Vec<Vec<f64>> = image.proposals.iter().map(|p| f64s(&p.embedding)).collect();
    let o: Vec<f64> = image.proposals.iter().map(|p| p.objectness).collect();
    let g = f64s(&image.tokens[0]);
    let n = t.len();
    let m = e.len();

    let sc = |q: usize, j: usize| ref_cos(&t[q], &e[j]) * o[j];
    let img: Vec<f64> = t.iter().map(|tq| ref_cos(tq, &g)).collect();
    let h_img = ref_entropy(&img);
    let survivors: Vec<usize> = (0..m)
        .filter(|&j| {
            let col: Vec<f64> = (0..n).map(|q| sc(q, j)).collect();
            ref_entropy(&col) <= h_img
        })
        .collect();

    let mut concepts = Vec::new();
    for q in 0..n {
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < k {
            let mut best: Option<usize> = None;
            for &j in &survivors {
                if chosen.contains(&j) {
                    continue;
                }
                if best.is_none_or(|b| sc(q, j) > sc(q, b)) {
                    best = Some(j);
                }
            }
            match best {
                Some(j) => chosen.push(j),
                None => break,
            }
        }
        if chosen.is_empty() {
            continue;
        }
        let top = chosen
            .iter()
            .map(|&j| sc(q, j))
            .fold(f64::NEG_INFINITY, f64::max);
        if top < img[q] {
            continue;
        }

        let mut items: Vec<Cand> = chosen
            .iter()
            .map(|&j| Cand {
                sources: vec![j],
                bbox: image.proposals[j].bbox.to_array(),
                objectness: o[j],
                embedding: image.proposals[j].embedding.values().to_vec(),
                merged: false,
            })
            .collect();
        loop {
            let mut pick: Option<(usize, usize, f64)> = None;
            for a in 0..items.len() {
                for b in a + 1..items.len() {
                    let v = ref_iou(&items[a].bbox, &items[b].bbox);
                    if v >= theta && pick.is_none_or(|(_, _, pv)| v > pv) {
                        pick = Some((a, b, v));
                    }
                }
            }
            let Some((a, b, _)) = pick else { break };
            let (x, y) = (&items[a], &items[b]);
            let tot = x.objectness + y.objectness;
            let (wa, wb) = if tot > 0.0 {
                (x.objectness / tot, y.objectness / tot)
            } else {
                (0.5, 0.5)
            };
            let mut mean = vec![0.0f64; x.embedding.len()];
            for d in 0..mean.len() {
                mean[d] = wa * x.embedding[d] as f64 + wb * y.embedding[d] as f64;
            }
            let len = dot(&mean, &mean).sqrt();
            if len != 0.0 {
                for v in &mut mean {
                    *v /= len;
                }
            }
            let mut sources = x.sources.clone();
            sources.extend(&y.sources);
            sources.sort();
            let c = Cand {
                sources,
                bbox: [
                    x.bbox[0].min(y.bbox[0]),
                    x.bbox[1].min(y.bbox[1]),
                    x.bbox[2].max(y.bbox[2]),
                    x.bbox[3].max(y.bbox[3]),
                ],
                objectness: x.objectness.max(y.objectness),
                embedding: mean.iter().map(|&v| v as f32).collect(),
                merged: true,
            };
            items[a] = c;
            items.remove(b);
        }

        let mut props: Vec<MinedProposal> = items
            .into_iter()
            .map(|c| {
                let emb: Vec<f64> = c.embedding.iter().map(|&v| v as f64).collect();
                let score = if c.merged {
                    ref_cos(&t[q], &emb) * c.objectness
                } else {
                    sc(q, c.sources[0])
                };
                MinedProposal {
                    sources: c.sources,
                    bbox: BBox::try_from(c.bbox).unwrap(),
                    objectness: c.objectness,
                    embedding: Embedding::new(c.embedding).unwrap(),
                    score,
                    merged: c.merged,
                }
            })
            .collect();
        props.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then(a.sources[0].cmp(&b.sources[0]))
        });
        concepts.push(MinedConcept {
            concept_id: ids[q],
            embedding: vocabulary.get(ids[q]).unwrap().embedding.clone(),
            proposals: props,
        });
    }
    MinedSet {
        image_id: image.id.clone(),
        concepts,
    }
}

/// Density-peak clustering straight from the definitions.
#[derive(Debug, Clone)]
pub struct RefClustering {
    pub cutoff: f64,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub centers: Vec<usize>,
    pub assignment: Vec<usize>,
    pub halo: Vec<bool>,
}

pub fn ref_cluster(points: &[Vec<f64>], fraction: f64, sigma: f64) -> RefClustering {
    let n = points.len();
    if n == 1 {
        return RefClustering {
            cutoff: 0.0,
            rho: vec![0.0],
            delta: vec![0.0],
            centers: vec![0],
            assignment: vec![0],
            halo: vec![false],
        };
    }
    let d = |i: usize, j: usize| {
        if i == j {
            0.0
        } else {
            (1.0 - ref_cos(&points[i], &points[j])).max(0.0)
        }
    };
    let mut all = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            all.push(d(i, j));
        }
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let per_point = (fraction * n as f64).max(1.0);
    let p = ((per_point * n as f64 / 2.0).ceil() as usize)
        .max(1)
        .min(all.len());
    let dc = all[p - 1];

    let mut rho = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let x = d(i, j);
                rho[i] += if dc > 0.0 {
                    (-(x / dc) * (x / dc)).exp()
                } else if x == 0.0 {
                    1.0
                } else {
                    0.0
                };
            }
        }
    }
    let denser = |j: usize, i: usize| rho[j] > rho[i] || (rho[j] == rho[i] && j < i);

    let mut delta = vec![0.0; n];
    let mut parent = vec![usize::MAX; n];
    let mut top = 0;
    for i in 0..n {
        let mut best = f64::INFINITY;
        for j in 0..n {
            if denser(j, i) && d(i, j) < best {
                best = d(i, j);
                parent[i] = j;
            }
        }
        if parent[i] == usize::MAX {
            top = i;
            delta[i] = (0..n).map(|j| d(i, j)).fold(0.0, f64::max);
        } else {
            delta[i] = best;
        }
    }

    let g: Vec<f64> = (0..n).map(|i| rho[i] * delta[i]).collect();
    let mean = g.iter().sum::<f64>() / n as f64;
    let std = (g.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
    let mut centers: Vec<usize> = (0..n)
        .filter(|&i| i == top || g[i] > mean + sigma * std)
        .collect();
    centers.sort_by(|&a, &b| {
        if denser(a, b) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });

    let mut assignment = vec![0; n];
    for i in 0..n {
        let mut x = i;
        while !centers.contains(&x) {
            x = parent[x];
        }
        assignment[i] = centers.iter().position(|&c| c == x).unwrap();
    }

    let mut border = vec![0.0f64; centers.len()];
    if centers.len() > 1 {
        for i in 0..n {
            for j in 0..n {
                if assignment[i] != assignment[j] && d(i, j) <= dc {
                    let avg = (rho[i] + rho[j]) / 2.0;
                    border[assignment[i]] = border[assignment[i]].max(avg);
                }
            }
        }
    }
    let halo = (0..n).map(|i| rho[i] < border[assignment[i]]).collect();
    RefClustering {
        cutoff: dc,
        rho,
        delta,
        centers,
        assignment,
        halo,
    }
}

/// A mixture of 1..=6 blobs on the sphere, `n` points in `dim` dimensions.
pub fn blob_points(r: &mut SplitRng, n: usize, dim: usize) -> Vec<Embedding> {
    let blobs = 1 + r.below(6);
    let centres: Vec<Vec<f64>> = (0..blobs).map(|_| r.unit_vec(dim)).collect();
    let spreads: Vec<f64> = (0..blobs).map(|_| r.range(0.01, 0.4)).collect();
    (0..n)
        .map(|_| {
            let b = r.below(blobs);
            let v: Vec<f64> = centres[b]
                .iter()
                .zip(r.gaussian_vec(dim, spreads[b]))
                .map(|(c, z)| c + z)
                .collect();
            Embedding::from_f64(&v).unwrap()
        })
        .collect()
}

fn small_vec(r: &mut SplitRng, dim: usize) -> Vec<f32> {
    // Coarse values make score ties and exact zero vectors likely.
    (0..dim)
        .map(|_| [-1.0, 0.0, 0.0, 1.0, 0.5][r.below(5)])
        .collect()
}

/// A small adversarial image: grid-aligned boxes (frequent exact IoU
/// ties), coarse embeddings (score ties, zero vectors) and a caption with
/// duplicate ids. Concepts `0..concepts` are all in the vocabulary.
pub fn adversarial_image(
    r: &mut SplitRng,
    id: &str,
    concepts: usize,
    dim: usize,
) -> (Image, Vocabulary) {
    let vocab = Vocabulary::new(
        (0..concepts as u32)
            .map(|c| Concept {
                id: c,
                text: format!("c{c}"),
                origin: ConceptOrigin::Base,
                embedding: Embedding::new(if r.below(4) == 0 {
                    r.unit_vec(dim).iter().map(|&v| v as f32).collect()
                } else {
                    small_vec(r, dim)
                })
                .unwrap(),
            })
            .collect(),
    )
    .unwrap();
    let m = r.below(33);
    let proposals = (0..m)
        .map(|row| {
            let x1 = r.below(6) as f64;
            let y1 = r.below(6) as f64;
            let bbox = BBox::new(
                x1,
                y1,
                x1 + 1.0 + r.below(4) as f64,
                y1 + 1.0 + r.below(4) as f64,
            )
            .unwrap();
            let objectness = match r.below(4) {
                0 => 1.0,
                1 => 0.5,
                2 => 0.0,
                _ => r.uniform(),
            };
            let embedding = if r.below(3) == 0 {
                Embedding::from_f64(&r.unit_vec(dim)).unwrap()
            } else {
                Embedding::new(small_vec(r, dim)).unwrap()
            };
            Proposal {
                row,
                bbox,
                objectness,
                embedding,
            }
        })
        .collect();
    let caption: Vec<u32> = (0..r.below(concepts + 3))
        .map(|_| r.below(concepts) as u32)
        .collect();
    let tokens = (0..1 + r.below(3))
        .map(|_| Embedding::new(small_vec(r, dim)).unwrap())
        .collect();
    let image = Image {
        id: id.to_string(),
        width: 10.0,
        height: 10.0,
        tokens,
        proposals,
        caption_concepts: caption,
    };
    (image, vocab)
}

/// Bit-level comparison of mined sets (Debug prints floats round-trip exact
/// and distinguishes `-0.0`).
pub fn same_bits(a: &MinedSet, b: &MinedSet) -> bool {
    format!("{a:?}") == format!("{b:?}")
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::adjust::argmax;
use crate::error::{Error, Result};
use crate::math::softmax;
use crate::mining::MinedSet;
use crate::tensor_io::Tensor;

use super::world::ImageTruth;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConceptCounts {
    pub mined: usize,
    pub correct: usize,
    pub true_objects: usize,
    pub covered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningReport {
    pub mined: usize,
    pub correct: usize,
    pub true_objects: usize,
    pub covered: usize,
    /// `correct / mined`; 0 when nothing was mined (see `empty`).
    pub precision: f64,
    /// `covered / true_objects`.
    pub recall: f64,
    /// Set when no pairs were mined and precision is undefined.
    pub empty: bool,
    pub per_concept: BTreeMap<u32, ConceptCounts>,
}

/// Scores mined pairs against ground truth. A pair is correct when its image
/// holds an object of the same concept with IoU at least `iou_threshold`.
pub fn eval_mining(
    mined: &[MinedSet],
    truth: &[ImageTruth],
    iou_threshold: f64,
) -> Result<MiningReport> {
    let by_id: BTreeMap<&str, &ImageTruth> =
        truth.iter().map(|t| (t.image_id.as_str(), t)).collect();
    let mut per_concept: BTreeMap<u32, ConceptCounts> = BTreeMap::new();
    let mut covered_objects: BTreeSet<(&str, usize)> = BTreeSet::new();
    for t in truth {
        for o in &t.objects {
            per_concept.entry(o.concept_id).or_default().true_objects += 1;
        }
    }

    let (mut mined_n, mut correct) = (0, 0);
    for set in mined {
        let t = by_id
            .get(set.image_id.as_str())
            .ok_or_else(|| Error::UnknownImage(set.image_id.clone()))?;
        for c in &set.concepts {
            for p in &c.proposals {
                mined_n += 1;
                per_concept.entry(c.concept_id).or_default().mined += 1;
                let mut hit = false;
                for (k, o) in t.objects.iter().enumerate() {
                    if o.concept_id == c.concept_id && o.bbox.iou(&p.bbox) >= iou_threshold {
                        hit = true;
                        covered_objects.insert((t.image_id.as_str(), k));
                    }
                }
                if hit {
                    correct += 1;
                    per_concept.entry(c.concept_id).or_default().correct += 1;
                }
            }
        }
    }
    for &(img, k) in &covered_objects {
        let cid = by_id[img].objects[k].concept_id;
        per_concept.entry(cid).or_default().covered += 1;
    }
    let true_objects: usize = truth.iter().map(|t| t.objects.len()).sum();
    let covered = covered_objects.len();
    Ok(MiningReport {
        mined: mined_n,
        correct,
        true_objects,
        covered,
        precision: if mined_n == 0 {
            0.0
        } else {
            correct as f64 / mined_n as f64
        },
        recall: if true_objects == 0 {
            0.0
        } else {
            covered as f64 / true_objects as f64
        },
        empty: mined_n == 0,
        per_concept,
    })
}

pub fn write_mining_csv(dir: &Path, report: &MiningReport) -> Result<()> {
    let mut summary = String::from("mined,correct,true_objects,covered,precision,recall,empty\n");
    let _ = writeln!(
        summary,
        "{},{},{},{},{},{},{}",
        report.mined,
        report.correct,
        report.true_objects,
        report.covered,
        report.precision,
        report.recall,
        report.empty
    );
    let mut concepts = String::from("concept_id,mined,correct,true_objects,covered\n");
    for (id, c) in &report.per_concept {
        let _ = writeln!(
            concepts,
            "{id},{},{},{},{}",
            c.mined, c.correct, c.true_objects, c.covered
        );
    }
    for (name, text) in [("mining.csv", summary), ("mining_concepts.csv", concepts)] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupStats {
    pub count: usize,
    /// Fraction of rows whose top-1 concept is the true one.
    pub accuracy: f64,
    /// Mean softmax probability of the top-1 concept.
    pub mean_confidence: f64,
    pub histogram: [usize; HISTOGRAM_BINS],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreSummary {
    pub base: GroupStats,
    pub novel: GroupStats,
    /// `base.mean_confidence - novel.mean_confidence`.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasReport {
    pub raw: ScoreSummary,
    pub adjusted: ScoreSummary,
}

fn summarise(scores: &Tensor, labels: &[Option<u32>], base: &BTreeSet<u32>) -> ScoreSummary {
    let mut acc = [(0usize, 0usize, 0.0f64, [0usize; HISTOGRAM_BINS]); 2];
    for (r, label) in labels.iter().enumerate() {
        let Some(label) = *label else { continue };
        let row: Vec<f64> = scores.row(r).iter().map(|&v| f64::from(v)).collect();
        let probs = softmax(&row);
        let top = argmax(&row).expect("non-empty row");
        let conf = probs[top];
        let g = &mut acc[usize::from(!base.contains(&label))];
        g.0 += 1;
        g.1 += usize::from(top as u32 == label);
        g.2 += conf;
        let bin = ((conf * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        g.3[bin] += 1;
    }
    let stats =
        |(count, hits, conf, histogram): (usize, usize, f64, [usize; HISTOGRAM_BINS])| GroupStats {
            count,
            accuracy: if count == 0 {
                0.0
            } else {
                hits as f64 / count as f64
            },
            mean_confidence: if count == 0 { 0.0 } else { conf / count as f64 },
            histogram,
        };
    let base_stats = stats(acc[0]);
    let novel_stats = stats(acc[1]);
    ScoreSummary {
        base: base_stats,
        novel: novel_stats,
        gap: base_stats.mean_confidence - novel_stats.mean_confidence,
    }
}

/// Per-group accuracy and top-1 confidence for raw and adjusted scores.
///
/// Rows are proposals, columns concept ids `0..Q`. Rows with a `None` label
/// are ignored. `base` lists the base concept ids; every other column is
/// novel, and both groups must be non-empty.
pub fn eval_bias(
    raw: &Tensor,
    adjusted: &Tensor,
    labels: &[Option<u32>],
    base: &BTreeSet<u32>,
) -> Result<BiasReport> {
    if raw.shape() != adjusted.shape() {
        return Err(Error::param(format!(
            "raw {:?} and adjusted {:?} score shapes differ",
            raw.shape(),
            adjusted.shape()
        )));
    }
    if raw.shape().len() != 2 || raw.rows() != labels.len() {
        return Err(Error::param(format!(
            "score tensor {:?} does not match {} labels",
            raw.shape(),
            labels.len()
        )));
    }
    let q = raw.cols() as u32;
    if q == 0 {
        return Err(Error::param("score tensor has no concept columns"));
    }
    if !(0..q).any(|c| !base.contains(&c)) {
        return Err(Error::param("split covers no novel concept"));
    }
    if !(0..q).any(|c| base.contains(&c)) {
        return Err(Error::param("split covers no base concept"));
    }
    if let Some(bad) = labels.iter().flatten().find(|&&l| l >= q) {
        return Err(Error::UnknownConcept(*bad));
    }
    Ok(BiasReport {
        raw: summarise(raw, labels, base),
        adjusted: summarise(adjusted, labels, base),
    })
}

pub fn write_bias_csv(path: &Path, report: &BiasReport) -> Result<()> {
    let mut out = String::from("metric,group,raw,adjusted\n");
    let (r, a) = (&report.raw, &report.adjusted);
    for (group, rs, as_) in [("base", &r.base, &a.base), ("novel", &r.novel, &a.novel)] {
        let _ = writeln!(out, "count,{group},{},{}", rs.count, as_.count);
        let _ = writeln!(out, "accuracy,{group},{},{}", rs.accuracy, as_.accuracy);
        let _ = writeln!(
            out,
            "mean_confidence,{group},{},{}",
            rs.mean_confidence, as_.mean_confidence
        );
    }
    let _ = writeln!(out, "confidence_gap,all,{},{}", r.gap, a.gap);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_histogram_csv(path: &Path, report: &BiasReport) -> Result<()> {
    let mut out = String::from("group,bin_lo,bin_hi,raw,adjusted\n");
    let width = 1.0 / HISTOGRAM_BINS as f64;
    for (group, rs, as_) in [
        ("base", &report.raw.base, &report.adjusted.base),
        ("novel", &report.raw.novel, &report.adjusted.novel),
    ] {
        for b in 0..HISTOGRAM_BINS {
            let _ = writeln!(
                out,
                "{group},{},{},{},{}",
                b as f64 * width,
                (b + 1) as f64 * width,
                rs.histogram[b],
                as_.histogram[b]
            );
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

//! Density-peak clustering (fast search and find of density peaks) under
//! cosine distance, with a Gaussian density kernel and halo detection.

use crate::error::{Error, Result};
use crate::math::{cosine, mean_std};
use crate::tensor_io::Embedding;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    /// Target average neighbour count as a fraction of `N` when picking the
    /// cutoff distance (at least one neighbour).
    pub neighbor_fraction: f64,
    /// A point is a centre when `ρ·δ > mean + center_sigma·std`.
    pub center_sigma: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            neighbor_fraction: 0.02,
            center_sigma: 3.0,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.neighbor_fraction > 0.0 && self.neighbor_fraction < 1.0) {
            return Err(Error::param(format!(
                "neighbor_fraction {} outside (0, 1)",
                self.neighbor_fraction
            )));
        }
        if !(self.center_sigma >= 0.0 && self.center_sigma.is_finite()) {
            return Err(Error::param(format!(
                "center_sigma {} must be >= 0",
                self.center_sigma
            )));
        }
        Ok(())
    }
}

/// Full decision-graph output for one point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cutoff distance `d_c`.
    pub cutoff: f64,
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    /// Nearest point of higher density; `None` only for the density maximum.
    pub nearest_denser: Vec<Option<usize>>,
    /// Centre point indices; cluster `c` is the one seeded by `centers[c]`.
    pub centers: Vec<usize>,
    pub assignment: Vec<usize>,
    pub halo: Vec<bool>,
}

impl Clustering {
    /// Cluster count `K`.
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Input count `N`.
    pub fn n(&self) -> usize {
        self.rho.len()
    }

    /// Points kept after halo removal, `Ñ`.
    pub fn n_tilde(&self) -> usize {
        self.halo.iter().filter(|h| !**h).count()
    }
}

/// Clustering of one concept's proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub concept_id: u32,
    pub clustering: Clustering,
}

struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

fn cutoff_distance(dist: &Distances, neighbor_fraction: f64) -> f64 {
    let n = dist.n;
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(dist.get(i, j));
        }
    }
    let target_neighbors = (neighbor_fraction * n as f64).max(1.0);
    let pos = ((target_neighbors * n as f64 / 2.0).ceil() as usize).clamp(1, pairs.len());
    let (_, kth, _) = pairs.select_nth_unstable_by(pos - 1, f64::total_cmp);
    *kth
}

/// Clusters `points` by density peaks under cosine distance `1 - cos`.
///
/// Densities are ties-broken by index (lower index counts as denser), so
/// the density order, nearest-denser links and assignments are total and
/// deterministic. The global density maximum is always a centre.
pub fn density_peak_cluster(points: &[Embedding], params: &ClusterParams) -> Result<Clustering> {
    params.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyModality(
            "density_peak_cluster needs at least one point",
        ));
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    if n == 1 {
        return Ok(Clustering {
            cutoff: 0.0,
            rho: vec![0.0],
            delta: vec![0.0],
            nearest_denser: vec![None],
            centers: vec![0],
            assignment: vec![0],
            halo: vec![false],
        });
    }

    let vecs: Vec<Vec<f64>> = points.iter().map(Embedding::to_f64).collect();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = (1.0 - cosine(&vecs[i], &vecs[j])).max(0.0);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let dist = Distances { n, d };
    let cutoff = cutoff_distance(&dist, params.neighbor_fraction);
    let kernel = |x: f64| {
        if cutoff > 0.0 {
            (-(x / cutoff) * (x / cutoff)).exp()
        } else if x == 0.0 {
            1.0
        } else {
            0.0
        }
    };

    let mut rho = vec![0.0; n];
    for (i, r) in rho.iter_mut().enumerate() {
        for j in (0..n).filter(|&j| j != i) {
            *r += kernel(dist.get(i, j));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rho[b].total_cmp(&rho[a]).then(a.cmp(&b)));

    let mut delta = vec![0.0; n];
    let mut nearest_denser = vec![None; n];
    let top = order[0];
    delta[top] = (0..n).map(|j| dist.get(top, j)).fold(0.0, f64::max);
    for (rank, &i) in order.iter().enumerate().skip(1) {
        let mut best = (f64::INFINITY, usize::MAX);
        for &j in &order[..rank] {
            let dij = dist.get(i, j);
            if dij < best.0 || (dij == best.0 && j < best.1) {
                best = (dij, j);
            }
        }
        delta[i] = best.0;
        nearest_denser[i] = Some(best.1);
    }

    let gamma: Vec<f64> = rho.iter().zip(&delta).map(|(r, d)| r * d).collect();
    let (mean, std) = mean_std(&gamma);
    let threshold = mean + params.center_sigma * std;
    let centers: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| i == top || gamma[i] > threshold)
        .collect();

    let mut cluster_of = vec![usize::MAX; n];
    for (c, &i) in centers.iter().enumerate() {
        cluster_of[i] = c;
    }
    let mut assignment = vec![0; n];
    for &i in &order {
        if cluster_of[i] == usize::MAX {
            let parent =
                nearest_denser[i].expect("only the density maximum lacks a denser neighbour");
            cluster_of[i] = cluster_of[parent];
        }
        assignment[i] = cluster_of[i];
    }

    let mut border = vec![0.0f64; centers.len()];
    if centers.len() > 1 {
        for i in 0..n {
            for j in i + 1..n {
                if assignment[i] != assignment[j] && dist.get(i, j) <= cutoff {
                    let avg = (rho[i] + rho[j]) / 2.0;
                    border[assignment[i]] = border[assignment[i]].max(avg);
                    border[assignment[j]] = border[assignment[j]].max(avg);
                }
            }
        }
    }
    let halo: Vec<bool> = (0..n).map(|i| rho[i] < border[assignment[i]]).collect();

    Ok(Clustering {
        cutoff,
        rho,
        delta,
        nearest_denser,
        centers,
        assignment,
        halo,
    })
}

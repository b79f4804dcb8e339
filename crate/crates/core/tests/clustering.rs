mod common;

use std::collections::BTreeMap;

use common::{blob_points, f64s, ref_cluster, rng};
use medet::adjust::{
    adjust_scores, cluster_population, compute_bias, density_peak_cluster, BiasVector,
    ClusterParams, ClusterResult, Clustering,
};
use medet::Embedding;
use proptest::prelude::*;

fn check_against_reference(points: &[Embedding], params: &ClusterParams) {
    let got = density_peak_cluster(points, params).unwrap();
    let vecs: Vec<Vec<f64>> = points.iter().map(f64s).collect();
    let want = ref_cluster(&vecs, params.neighbor_fraction, params.center_sigma);
    assert!((got.cutoff - want.cutoff).abs() <= 1e-6);
    for i in 0..points.len() {
        assert!((got.rho[i] - want.rho[i]).abs() <= 1e-6, "rho[{i}]");
        assert!((got.delta[i] - want.delta[i]).abs() <= 1e-6, "delta[{i}]");
    }
    assert_eq!(got.centers, want.centers);
    assert_eq!(got.assignment, want.assignment);
    assert_eq!(got.halo, want.halo);
}

#[test]
fn matches_the_reference_on_random_blobs() {
    for seed in 0..60u64 {
        let mut r = rng(50_000 + seed);
        let n = 1 + r.below(256);
        let dim = 2 + r.below(10);
        let points = blob_points(&mut r, n, dim);
        let params = ClusterParams {
            neighbor_fraction: r.range(0.005, 0.2),
            center_sigma: r.range(0.0, 4.0),
        };
        check_against_reference(&points, &params);
    }
}

#[test]
fn matches_the_reference_with_duplicate_points() {
    // Many exact duplicates give zero cutoffs and density ties.
    for seed in 0..40u64 {
        let mut r = rng(60_000 + seed);
        let pool: Vec<Embedding> = (0..1 + r.below(5))
            .map(|_| Embedding::from_f64(&r.unit_vec(3)).unwrap())
            .collect();
        let points: Vec<Embedding> = (0..2 + r.below(60))
            .map(|_| pool[r.below(pool.len())].clone())
            .collect();
        check_against_reference(&points, &ClusterParams::default());
    }
}

fn blob(r: &mut medet::synth::SplitRng, centre: &[f64], n: usize) -> Vec<Embedding> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = centre
                .iter()
                .zip(r.gaussian_vec(centre.len(), 0.02))
                .map(|(c, z)| c + z)
                .collect();
            Embedding::from_f64(&v).unwrap()
        })
        .collect()
}

#[test]
fn two_separated_blobs_give_two_clusters() {
    let mut r = rng(7);
    let mut points = blob(&mut r, &[1.0, 0.0, 0.0, 0.0], 20);
    points.extend(blob(&mut r, &[0.0, 0.0, 1.0, 0.0], 20));
    let params = ClusterParams {
        neighbor_fraction: 0.1,
        center_sigma: 1.0,
    };
    let c = density_peak_cluster(&points, &params).unwrap();
    assert_eq!(c.k(), 2);
    let first = c.assignment[0];
    assert!(c.assignment[..20].iter().all(|&a| a == first));
    assert!(c.assignment[20..].iter().all(|&a| a != first));
    assert_eq!(c.n(), 40);
}

fn result(id: u32, k: usize, n_tilde: usize) -> ClusterResult {
    // Points 0..k are centres, the rest belong to cluster 0; none are halo.
    let n = n_tilde.max(k);
    ClusterResult {
        concept_id: id,
        clustering: Clustering {
            cutoff: 0.1,
            rho: vec![1.0; n],
            delta: vec![0.5; n],
            nearest_denser: (0..n).map(|i| i.checked_sub(1)).collect(),
            centers: (0..k).collect(),
            assignment: (0..n).map(|i| if i < k { i } else { 0 }).collect(),
            halo: vec![false; n],
        },
    }
}

#[test]
fn bias_examples() {
    let bias = compute_bias(&[result(3, 4, 40), result(1, 1, 1)], [1, 2, 3], 0.4).unwrap();
    assert_eq!(bias.beta(3), 20.0);
    assert_eq!(bias.beta(1), 1.0);
    assert_eq!(bias.beta(2), 0.0);
    assert_eq!(bias.beta(99), 0.0);
    let entry = bias.entry(3).unwrap();
    assert_eq!((entry.k, entry.n_tilde), (4, 40));
}

#[test]
fn bias_json_round_trips() {
    let bias = compute_bias(&[result(3, 4, 40), result(0, 2, 9)], 0..5, 0.4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bias.json");
    bias.save(&path).unwrap();
    assert_eq!(BiasVector::load(&path).unwrap(), bias);
    assert!(BiasVector::from_json("{\"gamma\": 0.4}").is_err());
}

#[test]
fn population_clustering_is_keyed_and_ordered() {
    let mut r = rng(3);
    let mut pop = BTreeMap::new();
    pop.insert(9u32, blob(&mut r, &[0.0, 1.0], 12));
    pop.insert(2u32, blob(&mut r, &[1.0, 0.0], 5));
    let one = cluster_population(&pop, &ClusterParams::default(), 1).unwrap();
    let four = cluster_population(&pop, &ClusterParams::default(), 4).unwrap();
    assert_eq!(one.iter().map(|c| c.concept_id).collect::<Vec<_>>(), [2, 9]);
    assert_eq!(one, four);
}

proptest! {
    #[test]
    fn beta_monotonicity(k in 1usize..20, n in 1usize..500, extra in 1usize..50) {
        let beta = |k: usize, n: usize| compute_bias(&[result(0, k, n.max(k))], [0], 0.4).unwrap().beta(0);
        let n = n.max(k);
        prop_assert!(beta(k, n) >= 0.0);
        prop_assert!(beta(k, n + extra) >= beta(k, n));
        let bigger_k = (k + extra).min(n);
        prop_assert!(beta(bigger_k, n) <= beta(k, n) + 1e-12);
    }

    #[test]
    fn constant_beta_offset_keeps_argmax(raw in prop::collection::vec(-20.0f64..20.0, 1..12), c in 0.0f64..30.0) {
        let ids: Vec<u32> = (0..raw.len() as u32).collect();
        let base = compute_bias(&[], ids.clone(), 0.4).unwrap();
        let shifted = BiasVector::new(0.4, base.entries().iter().map(|e| {
            let mut e = *e;
            e.beta += c;
            e
        })).unwrap();
        let a = adjust_scores(&raw, &ids, &base, None).unwrap();
        let b = adjust_scores(&raw, &ids, &shifted, None).unwrap();
        prop_assert_eq!(medet::adjust::argmax(&a), medet::adjust::argmax(&b));
    }
}

//! How the de-bias strength trades base against novel accuracy.

use std::collections::BTreeSet;

use medet::adjust::{
    adjust_matrix, cluster_population, compute_bias, mined_population, ClusterParams,
};
use medet::mining::{mine_dataset, MiningParams};
use medet::synth::{
    biased_scores, concept_frequency, eval_bias, generate_world, score_labels, ScorerParams,
    WorldConfig,
};
use medet::tensor_io::Dataset;

fn main() -> medet::Result<()> {
    let config = WorldConfig::default();
    let world = generate_world(&config)?;
    let dataset = Dataset::from_files(&world.files)?;
    let sets = mine_dataset(&dataset, None, &MiningParams::default(), 4)?;
    let clusters = cluster_population(&mined_population(&sets), &ClusterParams::default(), 4)?;
    let bias = compute_bias(&clusters, dataset.vocabulary.ids(), 0.4)?;

    let freq = concept_frequency(&world.truth, config.concepts());
    let raw = biased_scores(
        &world.files.proposal_embeddings,
        &world.files.concept_embeddings,
        &freq,
        &ScorerParams::default(),
    )?;
    let labels = score_labels(&world.truth, raw.rows())?;
    let base: BTreeSet<u32> = world.base_ids().collect();

    println!("gamma  base_acc  novel_acc  gap");
    for gamma in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let adjusted = adjust_matrix(&raw, &bias, Some(gamma))?;
        let r = eval_bias(&raw, &adjusted, &labels, &base)?.adjusted;
        println!(
            "{gamma:5.1}  {:8.3}  {:9.3}  {:+.3}",
            r.base.accuracy, r.novel.accuracy, r.gap
        );
    }
    Ok(())
}

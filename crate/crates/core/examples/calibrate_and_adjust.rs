//! Cluster mined proposals per concept, derive the bias vector and apply it
//! to a frequency-biased scorer.

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
    let base: BTreeSet<u32> = world.base_ids().collect();
    for e in bias.entries() {
        let kind = if base.contains(&e.concept_id) {
            "base"
        } else {
            "novel"
        };
        println!(
            "concept {:>2} ({kind:>5}): K = {}, N~ = {:>3}, beta = {:.2}",
            e.concept_id, e.k, e.n_tilde, e.beta
        );
    }

    let freq = concept_frequency(&world.truth, config.concepts());
    let raw = biased_scores(
        &world.files.proposal_embeddings,
        &world.files.concept_embeddings,
        &freq,
        &ScorerParams::default(),
    )?;
    let adjusted = adjust_matrix(&raw, &bias, None)?;
    let labels = score_labels(&world.truth, raw.rows())?;
    let report = eval_bias(&raw, &adjusted, &labels, &base)?;
    println!("               raw   adjusted");
    println!(
        "base acc     {:.3}   {:.3}",
        report.raw.base.accuracy, report.adjusted.base.accuracy
    );
    println!(
        "novel acc    {:.3}   {:.3}",
        report.raw.novel.accuracy, report.adjusted.novel.accuracy
    );
    println!(
        "base conf    {:.3}   {:.3}",
        report.raw.base.mean_confidence, report.adjusted.base.mean_confidence
    );
    println!(
        "novel conf   {:.3}   {:.3}",
        report.raw.novel.mean_confidence, report.adjusted.novel.mean_confidence
    );
    println!(
        "gap          {:.3}  {:.3}",
        report.raw.gap, report.adjusted.gap
    );
    Ok(())
}

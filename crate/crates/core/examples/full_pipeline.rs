//! Every stage through files on disk, the way the `medet` binary runs them.
//!
//! ```text
//! cargo run --example full_pipeline -- /tmp/medet-run
//! ```

use std::path::PathBuf;

use medet::adjust::{
    adjust_matrix, cluster_population, compute_bias, mined_population, ClusterParams,
};
use medet::mining::{mine_dataset, read_mined, write_mined, MiningParams};
use medet::synth::{biased_scores, concept_frequency, generate_world, ScorerParams, WorldConfig};
use medet::tensor_io::{load_dataset, load_tensor, save_tensor};

fn main() -> medet::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("medet-pipeline"));

    let config = WorldConfig {
        images: 50,
        ..WorldConfig::default()
    };
    let world = generate_world(&config)?;
    let manifest = world.write(&root.join("world"))?;
    let freq = concept_frequency(&world.truth, config.concepts());
    let scores = biased_scores(
        &world.files.proposal_embeddings,
        &world.files.concept_embeddings,
        &freq,
        &ScorerParams::default(),
    )?;
    save_tensor(&scores, &root.join("world/scores.mdet"))?;

    let dataset = load_dataset(&manifest)?;
    let sets = mine_dataset(&dataset, None, &MiningParams::default(), 2)?;
    let lines = write_mined(&root.join("mine"), &sets, dataset.dim)?;
    println!("mined {lines} pairs into {}", root.join("mine").display());

    let mined = read_mined(&root.join("mine"))?;
    let clusters = cluster_population(&mined_population(&mined), &ClusterParams::default(), 2)?;
    let bias = compute_bias(&clusters, dataset.vocabulary.ids(), 0.4)?;
    bias.save(&root.join("bias.json"))?;

    let raw = load_tensor(&root.join("world/scores.mdet"))?;
    let adjusted = adjust_matrix(&raw, &bias, None)?;
    save_tensor(&adjusted, &root.join("adjusted.mdet"))?;
    println!(
        "adjusted {} x {} scores written under {}",
        adjusted.rows(),
        adjusted.cols(),
        root.display()
    );
    Ok(())
}

//! Set-to-set similarity and the batch hinge loss over mined sets.

use medet::imram::{hinge_loss, similarity_matrix, MatchParams, SetPair};
use medet::mining::{mine_dataset, MiningParams};
use medet::synth::{generate_world, WorldConfig};
use medet::tensor_io::Dataset;

fn main() -> medet::Result<()> {
    let world = generate_world(&WorldConfig {
        images: 6,
        ..WorldConfig::default()
    })?;
    let dataset = Dataset::from_files(&world.files)?;
    let batch: Vec<SetPair> = mine_dataset(&dataset, None, &MiningParams::default(), 1)?
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| SetPair {
            proposals: s.proposal_embeddings(),
            concepts: s.concept_embeddings(),
        })
        .collect();

    let params = MatchParams::default();
    let s = similarity_matrix(&batch, &params)?;
    println!("S(E_i, T_j), K = {}:", params.steps);
    for row in &s {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:6.3}")).collect();
        println!("  {}", cells.join(" "));
    }
    for margin in [0.2, 1.0, 4.0] {
        println!(
            "hinge loss at margin {margin}: {:.4}",
            hinge_loss(&s, margin)
        );
    }
    Ok(())
}

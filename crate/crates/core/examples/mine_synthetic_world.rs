//! Mine proposal-concept pairs from a synthetic world and score them
//! against its ground truth.

use medet::mining::{mine_dataset, MiningParams};
use medet::synth::{eval_mining, generate_world, WorldConfig};
use medet::tensor_io::Dataset;

fn main() -> medet::Result<()> {
    let world = generate_world(&WorldConfig::default())?;
    let dataset = Dataset::from_files(&world.files)?;
    let params = MiningParams::default();
    let sets = mine_dataset(&dataset, None, &params, 4)?;

    let first = &sets[0];
    println!(
        "{}: {} concepts mined",
        first.image_id,
        first.concepts.len()
    );
    for c in &first.concepts {
        for p in &c.proposals {
            println!(
                "  concept {:>2} <- proposals {:?} score {:.3}{}",
                c.concept_id,
                p.sources,
                p.score,
                if p.merged { " (merged)" } else { "" }
            );
        }
    }

    let report = eval_mining(&sets, &world.truth, 0.5)?;
    println!(
        "{} images, {} pairs: precision {:.4}, recall {:.4}",
        sets.len(),
        report.mined,
        report.precision,
        report.recall
    );
    Ok(())
}

//! Cross-attention of caption concepts over image tokens.

use medet::augment::{augment_concepts, AttentionWeights};
use medet::synth::SplitRng;
use medet::Embedding;

fn main() -> medet::Result<()> {
    let dim = 8;
    let mut rng = SplitRng::new(1, 0, 0);
    let concepts: Vec<Embedding> = (0..3)
        .map(|_| Embedding::from_f64(&rng.unit_vec(dim)))
        .collect::<medet::Result<_>>()?;
    let tokens: Vec<Embedding> = (0..5)
        .map(|_| Embedding::from_f64(&rng.unit_vec(dim)))
        .collect::<medet::Result<_>>()?;

    let weights = AttentionWeights::seeded(dim, None, 7);
    let augmented = augment_concepts(&concepts, &tokens, &weights)?;
    for (before, after) in concepts.iter().zip(&augmented) {
        let shift: f64 = before
            .values()
            .iter()
            .zip(after.values())
            .map(|(a, b)| f64::from(a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        println!("|t' - t| = {shift:.4}");
    }

    let identity = augment_concepts(&concepts, &tokens, &weights.clone().with_zero_output_path())?;
    assert_eq!(identity, concepts);
    println!("zeroed value and feed-forward weights leave concepts unchanged");

    let dir = std::env::temp_dir().join("medet-weights-example");
    let manifest = weights.save(&dir)?;
    assert_eq!(AttentionWeights::load(&manifest)?, weights);
    println!("weight bundle written to {}", manifest.display());
    Ok(())
}

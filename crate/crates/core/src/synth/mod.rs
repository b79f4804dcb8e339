//! Synthetic worlds with exact ground truth, a frequency-biased scorer, and
//! the evaluators for mining quality and prediction bias.

mod eval;
mod rng;
mod world;

pub use eval::{
    eval_bias, eval_mining, write_bias_csv, write_histogram_csv, write_mining_csv, BiasReport,
    ConceptCounts, GroupStats, MiningReport, ScoreSummary, HISTOGRAM_BINS,
};
pub use rng::SplitRng;
pub use world::{
    biased_scores, concept_frequency, generate_world, read_truth, score_labels, write_truth,
    ImageTruth, ProposalOrigin, ProposalTruth, ScorerParams, TruthObject, World, WorldConfig,
    TRUTH_FILE,
};

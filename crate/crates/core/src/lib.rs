//! Proposal mining and class-wise score adjustment for open-vocabulary
//! detection, operating on precomputed proposal and concept embeddings.
//!
//! The crate is organised as a set of small numerical pipelines:
//!
//! - [`tensor_io`]: the `MDET` binary tensor container, JSONL metadata
//!   records and dataset assembly from a manifest.
//! - [`geometry`]: axis-aligned box arithmetic.
//! - [`augment`]: the cross-modal attention block that injects image tokens
//!   into concept embeddings.
//! - [`mining`]: online proposal mining (scoring, similarity-entropy noise
//!   removal, top-k matching, image-anchored filtering, fragment mergence).
//! - [`imram`]: iterative recurrent-attention set similarity and the
//!   bidirectional hinge loss over a batch of mined sets.
//! - [`adjust`]: density-peak clustering, de-bias vectors and adjusted scoring.
//! - [`synth`]: a seeded synthetic world with exact ground truth plus the
//!   mining and bias evaluators.
//! - [`cli`]: the `medet` command-line front end.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory.

pub mod adjust;
pub mod augment;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod imram;
pub mod manifest;
pub mod math;
pub mod mining;
pub mod synth;
pub mod tensor_io;

pub use error::{Error, Result};
pub use geometry::BBox;
pub use tensor_io::{Embedding, Tensor};

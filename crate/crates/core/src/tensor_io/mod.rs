//! Data model: the `MDET` binary tensor container, JSONL metadata records
//! and dataset assembly.

mod dataset;
mod records;
mod tensor;

pub use dataset::{
    load_dataset, write_dataset, Concept, Dataset, DatasetFiles, Image, Proposal, Vocabulary,
    MANIFEST_FILE,
};
pub use records::{
    read_jsonl, write_jsonl, ConceptOrigin, ConceptRecord, ImageRecord, ProposalRecord,
};
pub use tensor::{
    load_tensor, read_tensor, save_tensor, write_tensor, DType, Embedding, Tensor, MAGIC, VERSION,
};

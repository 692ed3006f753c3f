//! Knowledge-graph completion by treating triples as token sequences.
//!
//! A triple `(head, relation, tail)` is rendered as the text of its parts,
//! packed into a single token sequence, and scored by a small bidirectional
//! transformer encoder trained from scratch. Two task heads are provided:
//! a two-way plausibility head over `[CLS] head [SEP] relation [SEP] tail [SEP]`
//! sequences, and a relation-prediction head over `[CLS] head [SEP] tail [SEP]`
//! pairs. A filtered ranking harness and two translational-embedding baselines
//! (TransE, DistMult) share the same evaluation path.
//!
//! Module map:
//!
//! - [`store`] — dataset loading, truth-set membership, negative sampling,
//!   training-proportion subsampling
//! - [`textseq`] — subword vocabulary, tokenization, and sequence packing
//! - [`encoder`] — the transformer encoder with exact analytic gradients
//! - [`tasks`] — task heads, losses, and the Adam fine-tuning loop
//! - [`eval`] — filtered link/relation ranking and classification accuracy
//! - [`baselines`] — TransE and DistMult scorers with minimal training
//! - [`synth`] — deterministic generator for a benchmark-scale test dataset

pub mod baselines;
pub mod encoder;
pub mod eval;
pub mod par;
pub mod rng;
pub mod store;
pub mod synth;
pub mod tasks;
pub mod tensor;
pub mod textseq;

pub use store::{EntityId, KnowledgeGraph, LabeledTriple, RelationId, Split, Triple};
pub use tensor::{Matrix, Real};

//! Two-step neuro-evolution: evolve convolutional autoencoders for
//! compression, re-encode the data with a chosen encoder, then evolve
//! classifiers on the encoded data.

pub mod data;
pub mod error;
pub mod genome;
pub mod mcdm;
pub mod mutation;
pub mod nn;
pub mod pipeline;
pub mod popstore;
pub mod seed;
pub mod selection;
pub mod tensor;

pub use data::{Dataset, SplitTag, Splits};
pub use error::{Error, Result};
pub use genome::{Genome, GenomeKind, IndividualId, LayerGene};
pub use mcdm::{Alternative, TopsisWeights};
pub use mutation::MutationKind;
pub use nn::Network;
pub use pipeline::{RunConfig, Stage};
pub use popstore::{Sidecar, Store};
pub use selection::{FitnessRecord, Pair};
pub use tensor::{Shape3, Tensor4};

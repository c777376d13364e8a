//! Modular simple recurrent networks that learn to identify the root and
//! inflections of words in artificial languages, presented one phone at a
//! time.
//!
//! - [`phonology`]: phone inventories and feature encoding
//! - [`morphology`]: root generation, inflection rules, datasets
//! - [`netcore`]: sigmoid network substrate with context units and
//!   momentum backpropagation
//! - [`architectures`]: monolithic, hard-modular and gated-modular networks
//! - [`harness`]: training regimens, evaluation, replication suites
//! - [`config`]: experiment configuration and provenance hashing

pub mod architectures;
pub mod config;
pub mod error;
pub mod harness;
pub mod morphology;
pub mod netcore;
pub mod phonology;
pub mod rng;

pub use architectures::{ArchitectureSpec, Model, Task};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use morphology::{DatasetSplit, RuleKind, RuleSpec, WordSample};
pub use netcore::Hyperparams;
pub use phonology::{Inventory, PhoneId, Segment};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

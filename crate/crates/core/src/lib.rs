//! Holding-pose grasp stability toolkit.
//!
//! The pipeline runs end to end on synthetic data: generate labeled
//! multi-modal grasp cycles over a 16-pose sample space ([`simulate`],
//! [`posespace`]), convert them to standardized feature sequences
//! ([`features`]), train a bidirectional recurrent classifier with optional
//! deferred resampling ([`model`], [`train`]), and evaluate generalization
//! to unseen poses and unseen objects ([`eval`]). Real recordings can be
//! brought in through the ingestion adapter in [`schema`].

pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod npy;
pub mod posespace;
pub mod rng;
pub mod schema;
pub mod simulate;
pub mod train;

pub use error::{Error, Result};
pub use schema::{
    binary_label, filter_usable, validate_cycle, BinaryLabel, CycleMeta, CycleSource,
    CycleStreams, Dataset, DiskSource, GraspCycle, MemorySource, Phase, PhaseLabel, PhaseMap,
    Provenance, TimeSeries,
};

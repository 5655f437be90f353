//! First-passage percolation with two-valued edge weights on the rotated
//! square lattice, together with the oriented percolation of its cheap edges.

pub mod estimators;
pub mod fpp;
pub mod lattice;
pub mod oriented;
pub mod stats;
pub mod traces;

pub use estimators::{EstimateWithCI, ProbeConfig};
pub use fpp::{first_passage_time, PassageResult, PathRecord};
pub use lattice::{LatticePoint, NoiseField, WeightParams, Window};
pub use stats::ReplicatePlan;

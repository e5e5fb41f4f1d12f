//! Neural compression of sparse VDB-style volumes.
//!
//! An explicit `[Hash,5,4,3]` sparse tree ([`grid`]) is encoded into a compact
//! container ([`container`]) in which the two lowest tree levels are replaced
//! by per-subdomain coordinate networks ([`neural`], [`partition`]): a ternary
//! classifier for level-1 slots, an optional tile-value regressor, a binary
//! classifier for voxel activity and a voxel-value regressor. Misclassified
//! slots and voxels are stored explicitly as patches so topology can be
//! reconstructed exactly.
//!
//! Decoding ([`decoder`]) either materializes a full explicit grid or builds a
//! hybrid grid with explicit topology and neural leaf values for random access.

pub mod bytes;
pub mod cli;
pub mod config;
pub mod container;
pub mod decoder;
pub mod encoder;
mod eval;
pub mod grid;
pub mod metrics;
pub mod neural;
pub mod partition;
pub mod procgen;

//! Desk-scale testbed for preference-based reward learning.
//!
//! The pipeline runs end-to-end on three analog manipulation environments
//! (a two-link reacher, an assistive feeding task, and an itch-scratching
//! task): ranked trajectories are generated by scripted controllers, turned
//! into pairwise preference datasets, used to fit Bradley-Terry reward
//! models, and the learned rewards are then optimized with a cross-entropy
//! policy search. The `diagnostics` module evaluates the resulting policies
//! under both the learned and the ground-truth reward and runs the
//! sensitivity sweeps (feature count, model capacity, data collection) that
//! surface causal confusion and reward hacking.
//!
//! Everything is deterministic given a seed: rollouts, dataset sampling,
//! training, and policy search all derive their randomness from explicit
//! seed streams, and parallel execution never changes results.

pub mod datagen;
pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod exec;
pub mod numerics;
pub mod policyopt;
pub mod prefs;
pub mod reward;
pub mod rng;
pub mod util;

pub use error::{Error, Result};

//! Iterative skill grounding for embodied instruction following.
//!
//! A hierarchical database of semantic skills is queried with a kNN retriever,
//! an LM planner picks the next skill from the retrieved vocabulary, and a
//! two-stage critic decides whether the skill can run in the current world.
//! Skills that cannot run are pushed back down the hierarchy as finer-grained
//! instructions until something executable is found.
//!
//! Module map:
//!
//! - [`skilldb`]: skill database and observation dataset, file formats, validation
//! - [`retriever`]: embedders, kNN retrieval, in-context examples and candidates
//! - [`lmclient`]: LM backend contract, scripted backend, record/replay cache, HTTP
//! - [`planner`]: skill generator and task retriever prompts and output parsing
//! - [`critic`]: perception, LM judgment, simulator oracle, cause classification
//! - [`engine`]: the grounding loop and its traces
//! - [`worldsim`]: deterministic household simulator and domain shifts
//! - [`bootstrap`]: bottom-up construction of the skill hierarchy
//! - [`evalharness`]: scenario suites and SR/CGC/Plan/Exec metrics
//! - [`fixtures`]: built-in worlds, tasks, curricula and golden assets

pub mod bootstrap;
pub mod critic;
pub mod engine;
pub mod evalharness;
pub mod fixtures;
pub mod lmclient;
pub mod planner;
pub mod retriever;
pub mod skilldb;
pub mod text;
pub mod worldsim;

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

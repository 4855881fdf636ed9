//! Imperfect-information tree search for Phantom Go and Dark Hex.
//!
//! Sampled determinizations of the hidden board share a single search tree;
//! leaf evaluations are averaged over the worlds that reach the leaf.

pub mod game;
pub mod encode;
pub mod eval;
pub mod nn;
pub mod sampler;
pub mod search;
pub mod train;
pub mod agent;
pub mod seeds;

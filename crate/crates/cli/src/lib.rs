//! Command-line driver and HTTP match server.

pub mod agents;
pub mod commands;
pub mod config;
pub mod server;

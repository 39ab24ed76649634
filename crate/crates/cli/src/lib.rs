//! Command-line tools and HTTP service for the `mharm` harmonizer.
//!
//! The binary is a thin wrapper: every subcommand lives in [`commands`] and
//! the service in [`server`], with request handling in [`wire`] kept free of
//! HTTP types so it can be called directly.

pub mod commands;
pub mod server;
pub mod wire;

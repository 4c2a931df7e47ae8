//! Command-line front end and session server.

pub mod commands;
pub mod server;

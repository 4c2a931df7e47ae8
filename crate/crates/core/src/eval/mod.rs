//! Offline evaluation of the recognizers and the fusion engine.

pub mod fusion;
pub mod gesture;

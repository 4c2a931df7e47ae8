//! Multimodal supervision of a small drone fleet: gesture and speech
//! recognition, command fusion, path planning, mixed-initiative control and
//! a deterministic mission simulator.

pub type Vec3 = nalgebra::Vector3<f64>;

pub mod geometry;
pub mod gesture;
pub mod model;
pub mod planning;
pub mod session;
pub mod sim;
pub mod blend;
pub mod eval;
pub mod fusion;
pub mod speech;

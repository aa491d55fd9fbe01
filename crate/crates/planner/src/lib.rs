//! Collaborative aerial 3D-printing planner.
//!
//! The pipeline decomposes a watertight mesh into UAV-printable chunks with a
//! beam search over planar cuts recorded in a BSP tree, schedules the chunks
//! onto a material-constrained fleet, slices each chunk into toolpaths and
//! body-frame trajectories, and validates everything in a kinematic
//! multi-agent simulation.

pub mod bsp;
pub mod config;
pub mod error;
pub mod mesh;
pub mod pipeline;
pub mod sampler;
pub mod scheduler;
pub mod search;
pub mod sim;
pub mod toolpath;

pub use error::{Error, Result};

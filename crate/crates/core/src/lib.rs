//! Simulation engine and benchmark harness for next-best-view (NBV) active
//! 3D reconstruction.
//!
//! A camera with a 5-DoF pose (position, pitch, yaw) scans a static mesh.
//! Each view is ray cast into a depth map, fused into a log-odds occupancy
//! grid, and scored by how much of the ground-truth surface is now observed.

pub mod env;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod mapping;
pub mod metrics;
pub mod policy;
pub mod procgen;
pub mod protocol;
pub mod render;

pub use exec::Execution;

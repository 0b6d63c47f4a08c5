//! Corridor-constrained trajectory generation for fast quadrotor flight.
//!
//! A 3D A* path over an occupancy grid is simplified into a reference
//! polyline, a safe flight corridor is grown around it, and a value-based
//! RL agent emits uniform cubic B-spline control points one knot at a time
//! while staying inside the corridor.
//!
//! Layout:
//! - [`worldmap`]: occupancy grid, map files and procedural scenarios
//! - [`bspline`]: uniform cubic B-spline evaluation and boundary conditions
//! - [`pathsearch`]: 3D A*, polyline simplification, segment collision
//! - [`corridor`]: sub-corridor construction, membership, observation window
//! - [`env`]: the planning MDP (observations, actions, rewards, rollouts)
//! - [`nn`]: dense networks with reverse-mode gradients and Adam
//! - [`sdcq`]: soft decomposed-critic Q-learning and the replay buffer
//! - [`trainer`]: multi-threaded exploitation-decoupled training loop
//! - [`bench`]: benchmark suites, reports and single-shot planning
//! - [`config`]: plain-text experiment configuration

pub mod bench;
pub mod bspline;
pub mod config;
pub mod corridor;
pub mod env;
pub mod error;
pub mod nn;
pub mod pathsearch;
pub mod sdcq;
pub mod table;
pub mod trainer;
pub mod worldmap;

pub use error::{Error, Result};

/// 3D point or vector in meters (or m/s, m/s², depending on context).
pub type Vec3 = nalgebra::Vector3<f64>;

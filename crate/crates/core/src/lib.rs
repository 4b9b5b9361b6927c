//! Potential theory of the rotationally symmetric α-stable process in ℝⁿ.
//!
//! * [`kernels`]: closed-form Green, Poisson and Martin kernels of balls.
//! * [`sampler`]: exact ball-exit draws and walk-on-spheres Monte Carlo.
//! * [`quad`]: singular quadrature, interior meshes and the mesh Green operator.

pub mod cli;
pub mod conditioned;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod martin;
pub mod quad;
pub mod representation;
pub mod sampler;
pub mod schrodinger;

pub use error::{Error, Result};
pub use geometry::{BallSpec, BoundaryMesh, Domain, Point, StableIndex};
pub use sampler::{McEstimate, RngStream};

//! Spectral, stochastic and mean-curvature estimates for immersed
//! submanifolds of manifolds with a pole.
//!
//! The ambient geometry enters only through a radial curvature profile `G`
//! (or directly through the warping function `σ` of the comparison model).
//! From it the crate computes the isoperimetric ratios of the model,
//! lower bounds for the bottom of the spectrum, discreteness and stochastic
//! completeness verdicts, mean exit time bounds and mean-curvature
//! obstructions, and checks them against Monte Carlo simulation of the
//! radial diffusion.

pub mod bounds;
pub mod interp;
pub mod isoperimetric;
pub mod jacobi;
pub mod montecarlo;
pub mod ode;
pub mod poly;
pub mod pipeline;
pub mod profile;
pub mod quad;
pub mod reference;
pub mod scenario;
pub mod serde_ext;

pub use profile::{make_profile, ProfileConfig, ProfileError, ProfileSpec, Radius};

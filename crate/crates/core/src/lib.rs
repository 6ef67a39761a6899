//! Per-instance Kaplan-Meier survival curve prediction with geographic
//! feature representations.
//!
//! - [`geo`]: polygon maps, point membership, adjacency, design matrices, one-hot codes
//! - [`spectral`]: Jacobi eigensolver, top-k embeddings, k-means, similarity affinities
//! - [`survival`]: product-limit estimation, curve re-representation, area between curves
//! - [`model`]: logistic multi-output network, training and output smoothing
//! - [`pipeline`]: cross-validated experiments, synthetic cohorts and CSV exports

pub mod geo;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod spectral;
pub mod survival;

pub use matrix::Matrix;

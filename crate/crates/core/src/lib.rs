//! Supervised sparse PCA with adaptive-neighbor graphs.
//!
//! The reducers ([`pca`], [`sdspca`], [`pcan`], [`sdspcaan`]) learn a d×k
//! projection W from mean-centered data; [`eval`] runs the 1-NN benchmark
//! protocol over them. [`synth`] holds synthetic data and brute-force
//! reference solvers.

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod pca;
pub mod pcan;
pub mod sdspca;
pub mod sdspcaan;
pub mod synth;

pub use data::{FitDiagnostics, ReductionModel};
pub use error::{Error, Result};
pub use eval::Method;
pub use graph::SimilarityGraph;

//! Multi-view subspace clustering with double graph regularization.
//!
//! The pipeline learns a latent representation `Y` shared by all views
//! (`X = W Y + E_L`), a low-rank self-representation `Z` of that latent space
//! (`Y = Y Z + E_S`), and regularizes both with graph Laplacians: one averaged
//! over the per-view k-NN graphs and one built on `Y` itself. The affinity
//! `|Z| + |Z^T|` is then fed to spectral clustering.
//!
//! Modules:
//! - [`dataset`]: multi-view data model, on-disk format, synthetic generator
//! - [`graphs`]: heat-kernel k-NN graphs and Laplacians
//! - [`kernels`]: Procrustes, Sylvester, `l2,1` shrinkage, singular value thresholding
//! - [`solver`]: the ALM/ADM optimizer
//! - [`spectral`]: affinity construction and normalized spectral clustering
//! - [`metrics`]: NMI, ACC, pairwise F/P/R, ARI and multi-run aggregation

pub mod dataset;
pub mod error;
pub mod graphs;
pub mod kernels;
pub mod matrix_io;
pub mod metrics;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

/// Dense column-major real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

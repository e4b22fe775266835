//! Collaborative-driven feature selection for cold-start content-based
//! recommendation.
//!
//! Item features are selected by solving a QUBO whose coefficients reward
//! features shared by items that are similar both in a collaborative model and
//! in a content-based model, and penalize features that only create
//! content-based similarity. The crate covers the whole experiment: sparse
//! kernels, data splits, similarity models, QUBO construction, classical
//! solvers, ranking metrics and the end-to-end pipeline.

pub mod cqfs;
pub mod dataio;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod recmodels;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::{Norm, SparseMatrix, ZERO_EPSILON};

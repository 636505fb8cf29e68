//! Empirical-Bayes posteriors and merging diagnostics.
//!
//! The crate bundles a deterministic numerical substrate (special functions,
//! quadrature, 1-D optimization, reproducible RNG streams), distance metrics
//! between posterior representations, a generic marginal-likelihood driver,
//! and the concrete model families the diagnostics run on: the conjugate
//! Gaussian location model, regression under the modified Zellner g-prior,
//! spike-and-slab style variable selection with an inclusion-probability
//! hyperparameter, Dirichlet-process Gaussian mixtures, and a discrete
//! density family on [0, 1] whose maximum-likelihood estimator misbehaves.

pub mod bahadur;
pub mod curve;
pub mod dpmix;
pub mod error;
pub mod gaussian;
pub mod gprior;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod modelselect;
pub mod optimize;
pub mod posterior;
pub mod quad;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use model::{EbResult, HyperParam};
pub use posterior::PosteriorRep;
pub use rng::RngStream;

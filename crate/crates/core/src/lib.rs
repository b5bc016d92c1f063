//! Differentially private, explainable graph clustering.
//!
//! The pipeline solves an SDP relaxation of the balanced cut, perturbs it
//! with the Gaussian mechanism to obtain a spectral embedding, compresses
//! the embedded vertices into a private weighted critical set, seeds
//! k-median from a noisy 2-HST over that set, and finally scores each
//! query vertex by the cost gap of pinning it as a center.

pub mod error;
pub mod explain;
pub mod graph;
pub mod hst;
pub mod kmedian;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod sbm;
pub mod coreset;
pub mod embedding;
pub mod sdp;

pub use error::{Error, Result, Stage};

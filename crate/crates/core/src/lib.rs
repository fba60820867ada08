//! Stein variational gradient descent on continuous factor graphs.
//!
//! The crate provides a global SVGD engine and a message-passing variant
//! whose per-node kernels act only on each node's Markov blanket, together
//! with an HMC baseline, benchmark models and the diagnostics used to study
//! particle degeneracy. It is `no_std` and needs only `alloc`.
#![no_std]

extern crate alloc;

pub mod adagrad;
pub mod error;
pub mod factor_graph;
pub mod hmc;
pub mod image;
pub mod kernels;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod mpsvgd;
pub mod potentials;
pub mod svgd;

pub use adagrad::{AdagradConfig, AdagradState};
pub use error::{Error, Result};
pub use factor_graph::{Factor, FactorGraph, NodeId, Potential};
pub use image::GrayImage;
pub use kernels::{BandwidthPolicy, KernelFamily, KernelSpec, Locality};
pub use matrix::{Matrix, ParticleSet};
pub use metrics::DiagnosticsRecord;

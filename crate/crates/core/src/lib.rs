//! Structured invertible residual network VAEs.
//!
//! The prior and the inference network of the VAE are graphical residual
//! flows: residual flows whose weight matrices are masked so that every latent
//! coordinate only reads from itself and its parents in a Bayesian network.
//! This crate carries all of the numerics and is `no_std` (it needs `alloc`).
//! File formats, the experiment driver and the command line live in the
//! `siren` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod diff;
pub mod experiment;
pub mod flow;
pub mod graph;
pub mod linalg;
pub mod masking;
pub mod math;
pub mod model;
pub mod rng;
pub mod train;

pub use diff::{Gradients, Tape, Tensor, Var};
pub use graph::{BayesNet, InverseGraph, LinearGaussianCpd, NodeKind, Structure};
pub use masking::MaskSet;

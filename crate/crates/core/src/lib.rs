//! Deterministic simulator of hybrid federated knowledge distillation for
//! lithography hotspot detection.
//!
//! The crate bundles:
//!
//! - [`nn`]: a from-scratch f64 CNN engine with exact backprop, SGD/Adam and
//!   finite-difference gradient checking;
//! - [`data`]: synthetic 12x12 layout-pattern generation, a binary dataset
//!   format, stratified public/private splitting and IID/Dirichlet client
//!   partitioning;
//! - [`fed`]: the hybrid round engine (local training, public-set logits,
//!   server averaging of logits and shared-layer parameters, consensus
//!   updates);
//! - [`baselines`]: FedAvg, FedMD, FedProx and local-only reference loops;
//! - [`diagnostics`]: classification metrics plus executable descent and
//!   convergence-rate checks with smoothness/variance constant estimators.
//!
//! Every random decision flows through seeded [`rng`] streams; identical
//! configurations replay bit-identically, and the `parallel` feature (rayon)
//! never changes results, only wall time.

pub mod baselines;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod fed;
pub mod models;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;

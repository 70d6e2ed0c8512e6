//! Minimal dense/convolutional network engine: exact backpropagation, SGD
//! and Adam, and finite-difference gradient verification.

pub mod backward;
pub mod forward;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod params;
pub mod spec;

pub use backward::{backward, BackwardResult};
pub use forward::{forward, forward_trace, ForwardTrace};
pub use gradcheck::{gradcheck, GradCheckReport, LayerCheck};
pub use loss::{loss_ce, loss_distill, softmax_rows, total_loss};
pub use optim::{adam_step, optimizer_step, sgd_step, OptimizerKind, OptimizerState};
pub use params::{init_params, validate_params, GradientSet, LayerParams, ParameterSet};
pub use spec::{infer_shapes, ActShape, LayerKind, LayerSpec, ModelSpec, Padding};

//! Tensor-train completion.
//!
//! Missing entries of an N-way array are recovered by fitting a low-rank
//! tensor-train model to the observed entries, either with full weighted
//! gradients ([`wopt`]) or with per-entry stochastic updates ([`sgd`]).
//! Images can be lifted to higher-order block tensors first ([`vdt`]).

pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod optim;
pub mod pipeline;
pub mod sgd;
pub mod tensor;
pub mod tt;
pub mod vdt;
pub mod wopt;

pub use config::{ConvergenceLog, LogRecord, SolveOutput, SolverConfig, WoptMethod};
pub use error::{Error, Result};
pub use eval::CompletionResult;
pub use optim::{AdamParams, AdamState};
pub use sgd::{run_sgd, run_sgd_observed, ObservedSet};
pub use tensor::DenseTensor;
pub use tt::{RankSpec, TTCores};
pub use vdt::VdtPlan;
pub use wopt::{run_wopt, WeightTensor};

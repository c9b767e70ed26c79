//! Solver configuration and the convergence log both solvers emit.

use std::time::Duration;

use crate::error::{Error, Result};
use crate::optim::AdamParams;
use crate::tt::{RankSpec, TTCores};

/// Update rule used by the full-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WoptMethod {
    #[default]
    Adam,
    /// Gradient descent with step halving.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub ranks: RankSpec,
    pub adam: AdamParams,
    /// Stop once successive objective values differ by at most this much.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian core initialization.
    pub init_scale: f64,
    /// Logging cadence in iterations (stochastic solver only).
    pub log_every: usize,
    pub wopt_method: WoptMethod,
    /// Apply the `tol` rule to epoch-averaged per-entry loss in the
    /// stochastic solver. Off by default: that solver runs to `max_iters`.
    pub sgd_epoch_stopping: bool,
}

impl SolverConfig {
    /// Full-gradient defaults: `tol = 1e-4`, 500 iterations.
    pub fn wopt(ranks: RankSpec) -> Self {
        Self {
            ranks,
            adam: AdamParams::default(),
            tol: 1e-4,
            max_iters: 500,
            seed: 0,
            init_scale: 0.1,
            log_every: 1,
            wopt_method: WoptMethod::Adam,
            sgd_epoch_stopping: false,
        }
    }

    /// Stochastic defaults: 1e5 iterations, log every 1e3.
    pub fn sgd(ranks: RankSpec) -> Self {
        Self {
            max_iters: 100_000,
            log_every: 1000,
            ..Self::wopt(ranks)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(a.lr.is_finite() && a.lr > 0.0) {
            return bad("learning rate must be positive and finite");
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(a.eps.is_finite() && a.eps > 0.0) {
            return bad("eps must be positive and finite");
        }
        // tol = inf is allowed and stops after one iteration.
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad("init_scale must be finite and non-negative");
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub iter: usize,
    /// Half the squared residual over observed entries.
    pub objective: f64,
    /// Residual norm over observed entries relative to the observed data norm.
    pub rse_observed: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceLog {
    pub records: Vec<LogRecord>,
}

impl ConvergenceLog {
    pub fn push(&mut self, record: LogRecord) {
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&LogRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub model: TTCores,
    pub log: ConvergenceLog,
    pub iterations: usize,
}

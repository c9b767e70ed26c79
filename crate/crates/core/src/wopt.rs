//! Weighted full-gradient completion: fit TT cores to the observed entries
//! by minimizing `f = 1/2 || W * (Y - X) ||_F^2` over all cores at once.
//!
//! The gradient of core `n` is `(X_w(n) - Y_w(n)) (G>n_(1) kron G<n_(n))^T`.
//! It is evaluated without forming the Kronecker factor: the masked residual
//! is contracted with the left subchain on one side and the right subchain
//! on the other, reusing one left-to-right and one right-to-left sweep for
//! all modes.

use std::time::Instant;

use ndarray::linalg::general_mat_mul;

use crate::config::{ConvergenceLog, LogRecord, SolveOutput, SolverConfig, WoptMethod};
use crate::error::{Error, Result};
use crate::optim::{AdamState, Backtracking, StepRule};
use crate::tensor::{fortran_view, fortran_view_mut, DenseTensor};
use crate::tt::TTCores;

/// Observation indicator: 1 where the data entry is observed, 0 where missing.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor(DenseTensor);

impl WeightTensor {
    pub fn new(mask: DenseTensor) -> Result<Self> {
        if let Some(bad) = mask.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidMask(format!("entry {bad} is not 0 or 1")));
        }
        Ok(Self(mask))
    }

    pub fn ones(dims: &[usize]) -> Result<Self> {
        Ok(Self(DenseTensor::ones(dims)?))
    }

    pub fn dims(&self) -> &[usize] {
        self.0.dims()
    }

    pub fn as_tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.0
    }

    pub fn observed_count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v == 1.0).count()
    }

    pub fn is_observed(&self, offset: usize) -> bool {
        self.0.as_slice()[offset] == 1.0
    }

    pub(crate) fn check_matches(&self, y: &DenseTensor) -> Result<()> {
        if self.dims() != y.dims() {
            return Err(Error::ShapeMismatch {
                expected: y.dims().to_vec(),
                found: self.dims().to_vec(),
            });
        }
        Ok(())
    }
}

fn check_model(y: &DenseTensor, g: &TTCores) -> Result<()> {
    if g.dims() != y.dims() {
        return Err(Error::ShapeMismatch {
            expected: y.dims().to_vec(),
            found: g.dims().to_vec(),
        });
    }
    Ok(())
}

/// `W * Y` with missing entries forced to zero, even if `Y` holds NaN there.
fn zero_filled(y: &DenseTensor, w: &WeightTensor) -> Vec<f64> {
    y.as_slice()
        .iter()
        .zip(w.as_tensor().as_slice())
        .map(|(&v, &m)| if m == 1.0 { v } else { 0.0 })
        .collect()
}

fn masked_objective(x: &[f64], y_w: &[f64], w: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .zip(y_w)
        .zip(w)
        .map(|((&x, &y), &m)| {
            let r = m * (x - y);
            r * r
        })
        .sum::<f64>()
}

/// `1/2 || W * Y - W * X ||_F^2` with `X` the model tensor.
pub fn objective(y: &DenseTensor, w: &WeightTensor, g: &TTCores) -> Result<f64> {
    w.check_matches(y)?;
    check_model(y, g)?;
    let x = g.full_reconstruct();
    Ok(masked_objective(
        x.as_slice(),
        &zero_filled(y, w),
        w.as_tensor().as_slice(),
    ))
}

/// Objective value and its gradient, the latter laid out like the model.
#[derive(Debug, Clone)]
pub struct WoptGradient {
    pub objective: f64,
    pub grad: TTCores,
}

/// Objective and analytic gradient with respect to every core.
pub fn gradients(y: &DenseTensor, w: &WeightTensor, g: &TTCores) -> Result<WoptGradient> {
    w.check_matches(y)?;
    check_model(y, g)?;
    let (objective, flat) = objective_and_gradient(&zero_filled(y, w), w.as_tensor().as_slice(), g);
    let grad = TTCores::new(g.dims().to_vec(), g.ranks().to_vec(), flat)?;
    Ok(WoptGradient { objective, grad })
}

fn objective_and_gradient(y_w: &[f64], w: &[f64], g: &TTCores) -> (f64, Vec<f64>) {
    let n_modes = g.order();
    let mut left = g.left_chains();
    let right = g.right_chains();
    let x = left.pop().expect("full tensor");

    let residual: Vec<f64> = x
        .iter()
        .zip(y_w)
        .zip(w)
        .map(|((&x, &y), &m)| m * (x - y))
        .collect();
    let objective = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();

    let mut grad = vec![0.0; g.num_params()];
    let total = residual.len();
    let mut p = 1;
    for n in 0..n_modes {
        let (rl, d, rr) = g.core_shape(n);
        let q = total / (p * d);
        // M = L^T E : (rl x p) (p x d q)
        let mut m = vec![0.0; rl * d * q];
        general_mat_mul(
            1.0,
            &fortran_view(&left[n], p, rl).t(),
            &fortran_view(&residual, p, d * q),
            0.0,
            &mut fortran_view_mut(&mut m, rl, d * q),
        );
        // grad = M R^T : (rl d x q) (q x rr)
        let off = g.core_offset(n);
        general_mat_mul(
            1.0,
            &fortran_view(&m, rl * d, q),
            &fortran_view(&right[n + 1], rr, q).t(),
            0.0,
            &mut fortran_view_mut(&mut grad[off..off + rl * d * rr], rl * d, rr),
        );
        p *= d;
    }
    (objective, grad)
}

/// Iteration state of the full-gradient solver. Each [`WoptSolver::step`]
/// moves all cores from one gradient evaluation.
pub struct WoptSolver {
    y_w: Vec<f64>,
    w: Vec<f64>,
    observed_norm: f64,
    model: TTCores,
    rule: Box<dyn StepRule>,
    grad: Vec<f64>,
    iter: usize,
    f_initial: f64,
    f_prev: f64,
    f_current: f64,
    log: ConvergenceLog,
    started: Instant,
}

impl WoptSolver {
    /// Randomly initializes the model from `config` and evaluates iteration 0.
    pub fn new(y: &DenseTensor, w: &WeightTensor, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        w.check_matches(y)?;
        let ranks = config.ranks.resolve(y.order())?;
        let model = TTCores::random(y.dims(), &ranks, config.seed, config.init_scale)?;
        Self::with_model(y, w, model, config)
    }

    pub fn with_model(
        y: &DenseTensor,
        w: &WeightTensor,
        model: TTCores,
        config: &SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        w.check_matches(y)?;
        check_model(y, &model)?;
        let y_w = zero_filled(y, w);
        let observed_norm = y_w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rule: Box<dyn StepRule> = match config.wopt_method {
            WoptMethod::Adam => Box::new(AdamState::new(model.num_params(), config.adam)),
            WoptMethod::Backtracking => Box::new(Backtracking::default()),
        };
        let w = w.as_tensor().as_slice().to_vec();
        let started = Instant::now();
        let (f, grad) = objective_and_gradient(&y_w, &w, &model);
        if !f.is_finite() {
            return Err(Error::Diverged {
                iteration: 0,
                objective: f,
            });
        }
        let mut solver = Self {
            y_w,
            w,
            observed_norm,
            model,
            rule,
            grad,
            iter: 0,
            f_initial: f,
            f_prev: f,
            f_current: f,
            log: ConvergenceLog::default(),
            started,
        };
        solver.record();
        Ok(solver)
    }

    fn record(&mut self) {
        let rse_observed = if self.observed_norm > 0.0 {
            (2.0 * self.f_current).sqrt() / self.observed_norm
        } else {
            f64::NAN
        };
        self.log.push(LogRecord {
            iter: self.iter,
            objective: self.f_current,
            rse_observed,
            elapsed: self.started.elapsed(),
        });
    }

    /// One update of every core followed by re-evaluation at the new point.
    /// Returns the new objective value.
    pub fn step(&mut self) -> Result<f64> {
        let Self {
            y_w,
            w,
            model,
            rule,
            grad,
            f_current,
            ..
        } = self;
        let dims = model.dims().to_vec();
        let ranks = model.ranks().to_vec();
        let mut eval = |trial: &[f64]| {
            let g = TTCores::new(dims.clone(), ranks.clone(), trial.to_vec())
                .expect("trial parameters keep the model layout");
            masked_objective(g.full_reconstruct().as_slice(), y_w, w)
        };
        rule.step(model.params_mut(), grad, *f_current, &mut eval);

        let (f, g) = objective_and_gradient(&self.y_w, &self.w, &self.model);
        self.iter += 1;
        self.f_prev = self.f_current;
        self.f_current = f;
        self.grad = g;
        self.record();
        if !f.is_finite() || (self.f_initial > 0.0 && f > 1e6 * self.f_initial) {
            return Err(Error::Diverged {
                iteration: self.iter,
                objective: f,
            });
        }
        Ok(f)
    }

    pub fn model(&self) -> &TTCores {
        &self.model
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn objective(&self) -> f64 {
        self.f_current
    }

    /// `|f_t - f_(t-1)|` for the latest step.
    pub fn last_change(&self) -> f64 {
        (self.f_current - self.f_prev).abs()
    }

    pub fn log(&self) -> &ConvergenceLog {
        &self.log
    }

    pub fn into_output(self) -> SolveOutput {
        SolveOutput {
            iterations: self.iter,
            model: self.model,
            log: self.log,
        }
    }
}

/// Runs the full-gradient solver until `|f_t - f_(t-1)| <= tol` or
/// `max_iters` iterations.
pub fn run_wopt(y: &DenseTensor, w: &WeightTensor, config: &SolverConfig) -> Result<SolveOutput> {
    if config.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
    }
    let mut solver = WoptSolver::new(y, w, config)?;
    while solver.iter() < config.max_iters {
        solver.step()?;
        if solver.last_change() <= config.tol {
            break;
        }
    }
    Ok(solver.into_output())
}

//! End-to-end completion runs: optional normalization and tensorization,
//! solve, map back, compose with the observed data, write results.

use std::path::PathBuf;
use std::time::Instant;

use crate::config::{SolveOutput, SolverConfig};
use crate::error::{Error, Result};
use crate::eval::{compose, psnr, rse, CompletionResult};
use crate::io;
use crate::sgd::run_sgd;
use crate::tensor::DenseTensor;
use crate::vdt::VdtPlan;
use crate::wopt::{run_wopt, WeightTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Wopt,
    Sgd,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wopt" => Ok(Self::Wopt),
            "sgd" => Ok(Self::Sgd),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum VdtChoice {
    #[default]
    None,
    /// All-2 plan derived from the first two modes.
    Auto,
    Plan(VdtPlan),
}

impl VdtChoice {
    pub fn resolve(&self, dims: &[usize]) -> Result<Option<VdtPlan>> {
        if matches!(self, VdtChoice::None) {
            return Ok(None);
        }
        if dims.len() < 2 {
            return Err(Error::InvalidPlan(format!(
                "tensorization needs two image modes, got dims {dims:?}"
            )));
        }
        let plan = match self {
            VdtChoice::Auto => VdtPlan::auto(dims[0], dims[1], dims[2..].to_vec())?,
            VdtChoice::Plan(p) => p.clone(),
            VdtChoice::None => unreachable!(),
        };
        if plan.input_dims() != dims {
            return Err(Error::ShapeMismatch {
                expected: plan.input_dims(),
                found: dims.to_vec(),
            });
        }
        Ok(Some(plan))
    }
}

/// Options for one completion run.
#[derive(Debug, Clone)]
pub struct CompletionOptions {
    pub algorithm: Algorithm,
    pub solver: SolverConfig,
    pub vdt: VdtChoice,
    /// Map observed values onto `[0, 1]` before solving.
    pub normalize: bool,
    /// Value range used for PSNR.
    pub data_range: f64,
}

/// Completes `y` from its entries where `w` is 1.
///
/// The returned metrics compare the completion against `y` itself, which is
/// the usual protocol when `y` is the full ground truth and `w` a synthetic
/// mask.
pub fn complete(
    y: &DenseTensor,
    w: &WeightTensor,
    opts: &CompletionOptions,
) -> Result<(CompletionResult, SolveOutput)> {
    w.check_matches(y)?;
    let started = Instant::now();
    let plan = opts.vdt.resolve(y.dims())?;

    let observed: Vec<f64> = y
        .as_slice()
        .iter()
        .zip(w.as_tensor().as_slice())
        .filter(|(_, &m)| m == 1.0)
        .map(|(&v, _)| v)
        .collect();
    let (lo, hi) = observed
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let (shift, span) = if opts.normalize && hi > lo {
        (lo, hi - lo)
    } else {
        (0.0, 1.0)
    };
    let work = DenseTensor::new(
        y.dims().to_vec(),
        y.as_slice()
            .iter()
            .zip(w.as_tensor().as_slice())
            .map(|(&v, &m)| if m == 1.0 { (v - shift) / span } else { 0.0 })
            .collect(),
    )?;

    let (work, mask) = match &plan {
        Some(p) => (p.apply(&work)?, WeightTensor::new(p.apply(w.as_tensor())?)?),
        None => (work, w.clone()),
    };
    let output = match opts.algorithm {
        Algorithm::Wopt => run_wopt(&work, &mask, &opts.solver)?,
        Algorithm::Sgd => run_sgd(&work, &mask, &opts.solver)?,
    };
    let mut x = output.model.full_reconstruct();
    if let Some(p) = &plan {
        x = p.invert(&x)?;
    }
    let x = x.map(|v| v * span + shift);
    let completed = compose(y, w, &x)?;
    let result = CompletionResult {
        rse: rse(y, &completed).unwrap_or(f64::NAN),
        psnr: psnr(y, &completed, opts.data_range).ok(),
        completed,
        elapsed: started.elapsed(),
        iterations: output.iterations,
    };
    Ok((result, output))
}

/// A file-to-file completion run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub options: CompletionOptions,
    pub input: PathBuf,
    pub mask: PathBuf,
    pub output: PathBuf,
    pub log: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    /// Record wall time in the CSV log; off gives byte-identical logs.
    pub timing: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.options.solver.validate()?;
        if !self.options.solver.tol.is_finite() {
            return Err(Error::InvalidConfig("tol must be finite".into()));
        }
        for p in [&self.input, &self.mask, &self.output] {
            if p.as_os_str().is_empty() {
                return Err(Error::InvalidConfig("paths must be nonempty".into()));
            }
        }
        Ok(())
    }
}

/// Reads input and mask, completes, writes the completed tensor and
/// optionally the convergence log and model cores.
pub fn run_complete(config: &RunConfig) -> Result<CompletionResult> {
    config.validate()?;
    let y = io::read_tnsr(&config.input)?;
    let mask = io::read_tnsr(&config.mask)?;
    if mask.dims() != y.dims() {
        return Err(Error::ShapeMismatch {
            expected: y.dims().to_vec(),
            found: mask.dims().to_vec(),
        });
    }
    let w = WeightTensor::new(mask)?;
    let (result, output) = complete(&y, &w, &config.options)?;
    io::write_tnsr(&config.output, &result.completed)?;
    if let Some(log) = &config.log {
        io::write_log(log, &output.log, config.timing)?;
    }
    if let Some(dir) = &config.model_dir {
        io::save_model(dir, &output.model)?;
    }
    Ok(result)
}

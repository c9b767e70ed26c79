//! Batch-one stochastic completion. Each iteration samples one observed
//! entry uniformly with replacement and Adam-updates only the `N` core
//! slices that entry touches. Cost per iteration is independent of the
//! tensor size and no dense tensor is ever materialized.
//!
//! For entry `(i_1..i_N)` with residual `r = x - y`, the gradient of slice
//! `G(n)[:, i_n, :]` is `r * (G(1)_i1 .. G(n-1)_i(n-1))^T (G(n+1)_i(n+1) .. G(N)_iN)^T`,
//! an outer product of the left row and right column partial products.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ConvergenceLog, LogRecord, SolveOutput, SolverConfig};
use crate::error::{Error, Result};
use crate::optim::AdamState;
use crate::tensor::{check_dims, multi_index, DenseTensor};
use crate::tt::TTCores;
use crate::wopt::WeightTensor;

/// Observed entries as (multi-index, value) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSet {
    dims: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl ObservedSet {
    /// Collects the entries of `y` where `w` is 1, in layout order.
    pub fn from_dense(y: &DenseTensor, w: &WeightTensor) -> Result<Self> {
        w.check_matches(y)?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (l, &v) in y.as_slice().iter().enumerate() {
            if w.is_observed(l) {
                if !v.is_finite() {
                    return Err(Error::InvalidMask(format!(
                        "observed entry at offset {l} is not finite"
                    )));
                }
                indices.extend(multi_index(y.dims(), l));
                values.push(v);
            }
        }
        Ok(Self {
            dims: y.dims().to_vec(),
            indices,
            values,
        })
    }

    /// Builds a set directly from entries, without any dense storage.
    pub fn from_entries(dims: &[usize], entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        check_dims(dims)?;
        let mut seen = std::collections::HashSet::with_capacity(entries.len());
        let mut indices = Vec::with_capacity(entries.len() * dims.len());
        let mut values = Vec::with_capacity(entries.len());
        for (idx, v) in entries {
            if idx.len() != dims.len() || idx.iter().zip(dims).any(|(&i, &d)| i >= d) {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    dims: dims.to_vec(),
                });
            }
            if !v.is_finite() {
                return Err(Error::InvalidMask(format!("entry {idx:?} is not finite")));
            }
            if !seen.insert(idx.clone()) {
                return Err(Error::InvalidMask(format!("duplicate entry {idx:?}")));
            }
            indices.extend(idx);
            values.push(v);
        }
        Ok(Self {
            dims: dims.to_vec(),
            indices,
            values,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, k: usize) -> &[usize] {
        let n = self.dims.len();
        &self.indices[k * n..(k + 1) * n]
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// `(1/2 sum (x - y)^2, sqrt(sum (x - y)^2) / sqrt(sum y^2))` over the set.
    pub fn fit(&self, model: &TTCores) -> (f64, f64) {
        let mut ws = Workspace::new(model);
        let mut sq = 0.0;
        let mut norm = 0.0;
        for k in 0..self.len() {
            let y = self.value(k);
            let r = ws.residual(model, self.index(k), y);
            sq += r * r;
            norm += y * y;
        }
        let rel = if norm > 0.0 {
            (sq / norm).sqrt()
        } else {
            f64::NAN
        };
        (0.5 * sq, rel)
    }
}

/// Partial-product buffers for one entry: `left[n]` is the row product of
/// slices `0..n`, `right[n]` the column product of slices `n..N`.
struct Workspace {
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(model: &TTCores) -> Self {
        let ranks = model.ranks();
        Self {
            left: ranks.iter().map(|&r| vec![0.0; r]).collect(),
            right: ranks.iter().map(|&r| vec![0.0; r]).collect(),
        }
    }

    /// Fills both partial products for `index` and returns `x - y`.
    fn residual(&mut self, model: &TTCores, index: &[usize], y: f64) -> f64 {
        let n_modes = model.order();
        self.left[0][0] = 1.0;
        for (n, &i) in index.iter().enumerate() {
            let (rl, d, rr) = model.core_shape(n);
            let core = model.core(n);
            let (head, tail) = self.left.split_at_mut(n + 1);
            let row = &head[n];
            for (b, out) in tail[0].iter_mut().enumerate().take(rr) {
                let base = rl * (i + d * b);
                *out = row
                    .iter()
                    .zip(&core[base..base + rl])
                    .map(|(a, g)| a * g)
                    .sum();
            }
        }
        self.right[n_modes][0] = 1.0;
        for n in (0..n_modes).rev() {
            let i = index[n];
            let (rl, d, _) = model.core_shape(n);
            let core = model.core(n);
            let (head, tail) = self.right.split_at_mut(n + 1);
            let out = &mut head[n];
            out.fill(0.0);
            for (b, &c) in tail[0].iter().enumerate() {
                let base = rl * (i + d * b);
                for (o, g) in out.iter_mut().zip(&core[base..base + rl]) {
                    *o += g * c;
                }
            }
        }
        self.left[n_modes][0] - y
    }
}

/// Per-entry gradient: residual `x - y` and one `R(n-1) x R(n)` slice
/// gradient per mode (first index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct EntryGradient {
    pub residual: f64,
    pub slices: Vec<Vec<f64>>,
}

pub fn entry_gradient(g: &TTCores, index: &[usize], y: f64) -> Result<EntryGradient> {
    g.check_index(index)?;
    let mut ws = Workspace::new(g);
    let residual = ws.residual(g, index, y);
    let slices = (0..g.order())
        .map(|n| {
            let (rl, _, rr) = g.core_shape(n);
            let mut s = Vec::with_capacity(rl * rr);
            for b in 0..rr {
                for a in 0..rl {
                    s.push(residual * ws.left[n][a] * ws.right[n + 1][b]);
                }
            }
            s
        })
        .collect();
    Ok(EntryGradient { residual, slices })
}

/// Stochastic solver state. Adam moments are full-core shaped but only the
/// touched slice entries are read or written in a step.
pub struct SgdSolver<'a> {
    observed: &'a ObservedSet,
    model: TTCores,
    adam: AdamState,
    rng: ChaCha8Rng,
    ws: Workspace,
    iter: usize,
    epoch_loss: f64,
    epoch_fill: usize,
    prev_epoch_avg: Option<f64>,
    epoch_change: Option<f64>,
}

impl<'a> SgdSolver<'a> {
    pub fn new(observed: &'a ObservedSet, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        if observed.is_empty() {
            return Err(Error::EmptyObservedSet);
        }
        let ranks = config.ranks.resolve(observed.dims().len())?;
        let model = TTCores::random(observed.dims(), &ranks, config.seed, config.init_scale)?;
        Ok(Self {
            observed,
            adam: AdamState::new(model.num_params(), config.adam),
            ws: Workspace::new(&model),
            model,
            // Separate stream from the initialization.
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15),
            iter: 0,
            epoch_loss: 0.0,
            epoch_fill: 0,
            prev_epoch_avg: None,
            epoch_change: None,
        })
    }

    /// One sampled-entry update. Returns the sampled entry number.
    pub fn step(&mut self) -> Result<usize> {
        let k = self.rng.random_range(0..self.observed.len());
        let index = self.observed.index(k);
        let y = self.observed.value(k);
        let r = self.ws.residual(&self.model, index, y);
        let loss = 0.5 * r * r;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: self.iter + 1,
                objective: loss,
            });
        }

        self.adam.begin_step();
        for (n, &i) in index.iter().enumerate() {
            let (rl, d, rr) = self.model.core_shape(n);
            let off = self.model.core_offset(n);
            let params = self.model.params_mut();
            for b in 0..rr {
                let scale = r * self.ws.right[n + 1][b];
                let base = off + rl * (i + d * b);
                for a in 0..rl {
                    let pos = base + a;
                    self.adam
                        .update(pos, &mut params[pos], scale * self.ws.left[n][a]);
                }
            }
        }

        self.iter += 1;
        self.epoch_loss += loss;
        self.epoch_fill += 1;
        if self.epoch_fill == self.observed.len() {
            let avg = self.epoch_loss / self.epoch_fill as f64;
            if let Some(prev) = self.prev_epoch_avg {
                self.epoch_change = Some((avg - prev).abs());
            }
            self.prev_epoch_avg = Some(avg);
            self.epoch_loss = 0.0;
            self.epoch_fill = 0;
        }
        Ok(k)
    }

    pub fn model(&self) -> &TTCores {
        &self.model
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    /// Change of the average per-entry loss between the last two completed
    /// epochs (an epoch is `M` iterations).
    pub fn epoch_change(&self) -> Option<f64> {
        self.epoch_change
    }
}

/// Runs the stochastic solver on the observed entries of `y`.
pub fn run_sgd(y: &DenseTensor, w: &WeightTensor, config: &SolverConfig) -> Result<SolveOutput> {
    let observed = ObservedSet::from_dense(y, w)?;
    run_sgd_observed(&observed, config)
}

/// Runs the stochastic solver on an observed set.
pub fn run_sgd_observed(observed: &ObservedSet, config: &SolverConfig) -> Result<SolveOutput> {
    let started = Instant::now();
    let mut solver = SgdSolver::new(observed, config)?;
    let mut log = ConvergenceLog::default();
    let record = |solver: &SgdSolver, log: &mut ConvergenceLog| {
        let (objective, rse_observed) = observed.fit(solver.model());
        log.push(LogRecord {
            iter: solver.iter(),
            objective,
            rse_observed,
            elapsed: started.elapsed(),
        });
    };
    record(&solver, &mut log);
    while solver.iter() < config.max_iters {
        solver.step()?;
        if solver.iter() % config.log_every == 0 {
            record(&solver, &mut log);
        }
        if config.sgd_epoch_stopping && solver.epoch_change().is_some_and(|c| c <= config.tol) {
            break;
        }
    }
    if log.last().map(|r| r.iter) != Some(solver.iter()) {
        record(&solver, &mut log);
    }
    Ok(SolveOutput {
        iterations: solver.iter(),
        model: solver.model,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::gen_random_mask;
    use crate::tt::RankSpec;

    fn entry_loss(g: &TTCores, index: &[usize], y: f64) -> f64 {
        let r = g.eval_entry(index).unwrap() - y;
        0.5 * r * r
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let g = TTCores::random(&[3, 3, 3], &[1, 2, 2, 1], 1, 1.0).unwrap();
        let x = g.eval_entry(&[1, 2, 0]).unwrap();
        let out = entry_gradient(&g, &[1, 2, 0], x).unwrap();
        assert_eq!(out.residual, 0.0);
        assert!(out.slices.iter().flatten().all(|&v| v == 0.0));
        assert!(entry_gradient(&g, &[3, 0, 0], 0.0).is_err());
    }

    #[test]
    fn rank_one_gradient_is_scalar_product() {
        let g = TTCores::random(&[2, 3, 2, 2], &[1, 1, 1, 1, 1], 2, 1.0).unwrap();
        let idx = [1, 2, 0, 1];
        let y = 0.3;
        let vals: Vec<f64> = (0..4).map(|n| g.core(n)[idx[n]]).collect();
        let x: f64 = vals.iter().product();
        let out = entry_gradient(&g, &idx, y).unwrap();
        for n in 0..4 {
            let others: f64 = (0..4).filter(|&k| k != n).map(|k| vals[k]).product();
            assert!((out.slices[n][0] - (x - y) * others).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_order4() {
        let g = TTCores::random(&[3, 4, 2, 3], &[1, 2, 3, 2, 1], 3, 0.9).unwrap();
        let idx = [2, 1, 1, 0];
        let y = 0.37;
        let out = entry_gradient(&g, &idx, y).unwrap();
        let h = 1e-6;
        for n in 0..4 {
            let (rl, d, rr) = g.core_shape(n);
            for b in 0..rr {
                for a in 0..rl {
                    let pos = g.core_offset(n) + a + rl * (idx[n] + d * b);
                    let mut p = g.clone();
                    p.params_mut()[pos] += h;
                    let mut m = g.clone();
                    m.params_mut()[pos] -= h;
                    let fd = (entry_loss(&p, &idx, y) - entry_loss(&m, &idx, y)) / (2.0 * h);
                    let an = out.slices[n][a + rl * b];
                    let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-3);
                    assert!(rel < 1e-6, "mode {n} ({a},{b}): {an} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn one_step_touches_only_addressed_slices() {
        let dims = [4, 3, 5];
        let truth = TTCores::random(&dims, &[1, 2, 2, 1], 5, 1.0).unwrap();
        let y = truth.full_reconstruct();
        let w = gen_random_mask(&dims, 0.3, 6).unwrap();
        let obs = ObservedSet::from_dense(&y, &w).unwrap();
        let config = SolverConfig::sgd(RankSpec::Uniform(3));
        let mut solver = SgdSolver::new(&obs, &config).unwrap();
        for _ in 0..5 {
            let before = solver.model().clone();
            let m_before = solver.adam().first_moment().to_vec();
            let v_before = solver.adam().second_moment().to_vec();
            let k = solver.step().unwrap();
            let idx = obs.index(k).to_vec();
            let after = solver.model();
            for n in 0..3 {
                let (rl, d, _) = after.core_shape(n);
                let off = after.core_offset(n);
                for (j, (&b, &a)) in before.core(n).iter().zip(after.core(n)).enumerate() {
                    let touched = (j / rl) % d == idx[n];
                    if !touched {
                        assert_eq!(b.to_bits(), a.to_bits());
                        assert_eq!(
                            m_before[off + j].to_bits(),
                            solver.adam().first_moment()[off + j].to_bits()
                        );
                        assert_eq!(
                            v_before[off + j].to_bits(),
                            solver.adam().second_moment()[off + j].to_bits()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let dims = [3, 3];
        let y = DenseTensor::ones(&dims).unwrap();
        let w = WeightTensor::ones(&dims).unwrap();
        let mut config = SolverConfig::sgd(RankSpec::Uniform(2));
        config.max_iters = 0;
        config.seed = 4;
        let out = run_sgd(&y, &w, &config).unwrap();
        let init = TTCores::random(&dims, &[1, 2, 1], 4, config.init_scale).unwrap();
        assert_eq!(out.model, init);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn empty_observed_set_rejected() {
        let dims = [3, 3];
        let y = DenseTensor::ones(&dims).unwrap();
        let w = WeightTensor::new(DenseTensor::zeros(&dims).unwrap()).unwrap();
        let config = SolverConfig::sgd(RankSpec::Uniform(2));
        assert!(matches!(
            run_sgd(&y, &w, &config),
            Err(Error::EmptyObservedSet)
        ));
    }

    #[test]
    fn observed_set_invariants() {
        let dims = [5, 4];
        let y = DenseTensor::from_fn(&dims, |ix| (ix[0] * 10 + ix[1]) as f64).unwrap();
        let w = gen_random_mask(&dims, 0.45, 1).unwrap();
        let obs = ObservedSet::from_dense(&y, &w).unwrap();
        assert_eq!(obs.len(), w.observed_count());
        for k in 0..obs.len() {
            let ix = obs.index(k);
            assert_eq!(obs.value(k), y.get(ix).unwrap());
        }
        assert!(
            ObservedSet::from_entries(&[2, 2], vec![(vec![0, 1], 1.0), (vec![0, 1], 2.0)]).is_err()
        );
        assert!(ObservedSet::from_entries(&[2, 2], vec![(vec![2, 1], 1.0)]).is_err());
        assert!(ObservedSet::from_entries(&[2, 2], vec![(vec![1, 1], f64::NAN)]).is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let dims = [5, 5, 5];
        let truth = TTCores::random(&dims, &[1, 2, 2, 1], 9, 1.0).unwrap();
        let y = truth.full_reconstruct();
        let w = gen_random_mask(&dims, 0.5, 10).unwrap();
        let mut config = SolverConfig::sgd(RankSpec::Uniform(2));
        config.max_iters = 3000;
        config.log_every = 500;
        let a = run_sgd(&y, &w, &config).unwrap();
        let b = run_sgd(&y, &w, &config).unwrap();
        assert_eq!(a.model, b.model);
        let objs = |o: &SolveOutput| {
            o.log
                .records
                .iter()
                .map(|r| r.objective.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(objs(&a), objs(&b));
        assert_eq!(a.log.len(), 7);
    }

    #[test]
    fn huge_index_space_without_dense_storage() {
        // 10^10 entries; only the cores and the observed set are allocated.
        let dims = [100; 5];
        let truth = TTCores::random(&dims, &[1, 2, 2, 2, 2, 1], 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut entries = std::collections::HashMap::new();
        while entries.len() < 500 {
            let idx: Vec<usize> = (0..5).map(|_| rng.random_range(0..100)).collect();
            let v = truth.eval_entry(&idx).unwrap();
            entries.insert(idx, v);
        }
        let obs = ObservedSet::from_entries(&dims, entries.into_iter().collect()).unwrap();
        let mut config = SolverConfig::sgd(RankSpec::Uniform(2));
        config.max_iters = 2000;
        let out = run_sgd_observed(&obs, &config).unwrap();
        assert_eq!(out.model.num_params(), truth.num_params());
        assert_eq!(out.iterations, 2000);
    }

    #[test]
    fn epoch_stopping_can_end_early() {
        let dims = [3, 3];
        let y = DenseTensor::filled(&dims, 0.5).unwrap();
        let w = WeightTensor::ones(&dims).unwrap();
        let mut config = SolverConfig::sgd(RankSpec::Uniform(1));
        config.sgd_epoch_stopping = true;
        config.tol = 1.0;
        let out = run_sgd(&y, &w, &config).unwrap();
        assert_eq!(out.iterations, 18);
    }
}

//! Tensor-train model: a chain of order-three cores
//! `G(n)` of shape `R(n-1) x I(n) x R(n)` with `R(0) = R(N) = 1`.
//!
//! All cores live in one flat parameter buffer so optimizers can treat the
//! model as a single vector. Core `n` is stored first-index-fastest, i.e.
//! entry `(a, i, b)` sits at `a + R(n-1) * (i + I(n) * b)` within its block.

use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{check_dims, fortran_view, fortran_view_mut, kronecker, DenseTensor};

/// TT-rank specification: either one value shared by every inner bond or
/// the full chain `R(0)..R(N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankSpec {
    Uniform(usize),
    Chain(Vec<usize>),
}

impl RankSpec {
    /// Expands to the full chain for a tensor of the given order.
    pub fn resolve(&self, order: usize) -> Result<Vec<usize>> {
        let chain = match self {
            RankSpec::Uniform(r) => {
                let mut c = vec![*r; order + 1];
                c[0] = 1;
                c[order] = 1;
                c
            }
            RankSpec::Chain(c) => c.clone(),
        };
        validate_ranks(&chain, order)?;
        Ok(chain)
    }
}

impl std::str::FromStr for RankSpec {
    type Err = Error;

    /// `"12"` is a uniform rank, `"1,3,3,1"` a full chain.
    fn from_str(s: &str) -> Result<Self> {
        let parsed: std::result::Result<Vec<usize>, _> =
            s.split(',').map(|t| t.trim().parse::<usize>()).collect();
        match parsed {
            Ok(v) if v.len() == 1 => Ok(RankSpec::Uniform(v[0])),
            Ok(v) => Ok(RankSpec::Chain(v)),
            Err(e) => Err(Error::InvalidRanks(format!("{s:?}: {e}"))),
        }
    }
}

fn validate_ranks(ranks: &[usize], order: usize) -> Result<()> {
    if ranks.len() != order + 1 {
        return Err(Error::InvalidRanks(format!(
            "order-{order} model needs {} ranks, got {}",
            order + 1,
            ranks.len()
        )));
    }
    if ranks[0] != 1 || ranks[order] != 1 {
        return Err(Error::InvalidRanks(format!(
            "boundary ranks must be 1, got {ranks:?}"
        )));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidRanks(format!(
            "ranks must be >= 1, got {ranks:?}"
        )));
    }
    Ok(())
}

/// Product `a (m x k) * b (k x n)` of first-index-fastest buffers.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    general_mat_mul(
        1.0,
        &fortran_view(a, m, k),
        &fortran_view(b, k, n),
        0.0,
        &mut fortran_view_mut(&mut out, m, n),
    );
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTCores {
    dims: Vec<usize>,
    ranks: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl TTCores {
    /// Wraps a flat parameter buffer laid out core after core.
    pub fn new(dims: Vec<usize>, ranks: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        validate_ranks(&ranks, dims.len())?;
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for (n, &d) in dims.iter().enumerate() {
            offsets.push(offsets[n] + ranks[n] * d * ranks[n + 1]);
        }
        let total = offsets[dims.len()];
        if params.len() != total {
            return Err(Error::InvalidRanks(format!(
                "dims {dims:?} with ranks {ranks:?} need {total} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            dims,
            ranks,
            offsets,
            params,
        })
    }

    pub fn zeros(dims: &[usize], ranks: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        validate_ranks(ranks, dims.len())?;
        let total = (0..dims.len())
            .map(|n| ranks[n] * dims[n] * ranks[n + 1])
            .sum();
        Self::new(dims.to_vec(), ranks.to_vec(), vec![0.0; total])
    }

    /// Builds a model from order-three core tensors, checking that adjacent
    /// ranks agree and the boundary ranks are 1.
    pub fn from_cores(cores: &[DenseTensor]) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidDims("model needs at least one core".into()));
        }
        let mut dims = Vec::with_capacity(cores.len());
        let mut ranks = Vec::with_capacity(cores.len() + 1);
        let mut params = Vec::new();
        for (n, core) in cores.iter().enumerate() {
            let &[rl, d, rr] = core.dims() else {
                return Err(Error::InvalidDims(format!(
                    "core {} has order {}, expected 3",
                    n + 1,
                    core.order()
                )));
            };
            if n == 0 {
                ranks.push(rl);
            } else if ranks[n] != rl {
                return Err(Error::InvalidRanks(format!(
                    "core {} trailing rank {} does not match core {} leading rank {rl}",
                    n,
                    ranks[n],
                    n + 1
                )));
            }
            ranks.push(rr);
            dims.push(d);
            params.extend_from_slice(core.as_slice());
        }
        Self::new(dims, ranks, params)
    }

    /// i.i.d. `N(0, 1) * init_scale` entries, deterministic in `seed`.
    pub fn random(dims: &[usize], ranks: &[usize], seed: u64, init_scale: f64) -> Result<Self> {
        let mut model = Self::zeros(dims, ranks)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut model.params {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = z * init_scale;
        }
        Ok(model)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Total parameter count, `sum_n R(n-1) I(n) R(n)`.
    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// `(R(n-1), I(n), R(n))` for 0-based core `n`.
    pub fn core_shape(&self, n: usize) -> (usize, usize, usize) {
        (self.ranks[n], self.dims[n], self.ranks[n + 1])
    }

    pub fn core_offset(&self, n: usize) -> usize {
        self.offsets[n]
    }

    pub fn core(&self, n: usize) -> &[f64] {
        &self.params[self.offsets[n]..self.offsets[n + 1]]
    }

    pub fn core_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.params[self.offsets[n]..self.offsets[n + 1]]
    }

    pub fn core_tensor(&self, n: usize) -> DenseTensor {
        let (rl, d, rr) = self.core_shape(n);
        DenseTensor::new(vec![rl, d, rr], self.core(n).to_vec()).expect("core shape is valid")
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode: n,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Left partial contractions. Entry `k` contracts cores `0..k` into a
    /// `(I(1)..I(k)) x R(k)` buffer; entry 0 is the scalar 1 and entry `N`
    /// is the full tensor.
    pub(crate) fn left_chains(&self) -> Vec<Vec<f64>> {
        let mut chains = Vec::with_capacity(self.order() + 1);
        chains.push(vec![1.0]);
        let mut rows = 1;
        for n in 0..self.order() {
            let (rl, d, rr) = self.core_shape(n);
            let next = matmul(&chains[n], self.core(n), rows, rl, d * rr);
            rows *= d;
            chains.push(next);
        }
        chains
    }

    /// Right partial contractions. Entry `k` contracts cores `k..N` into an
    /// `R(k) x (I(k+1)..I(N))` buffer; entry `N` is the scalar 1.
    pub(crate) fn right_chains(&self) -> Vec<Vec<f64>> {
        let n_modes = self.order();
        let mut chains = vec![Vec::new(); n_modes + 1];
        chains[n_modes] = vec![1.0];
        let mut cols = 1;
        for n in (0..n_modes).rev() {
            let (rl, d, rr) = self.core_shape(n);
            chains[n] = matmul(self.core(n), &chains[n + 1], rl * d, rr, cols);
            cols *= d;
        }
        chains
    }

    /// Contracts all cores into the full tensor.
    pub fn full_reconstruct(&self) -> DenseTensor {
        let mut chains = self.left_chains();
        let data = chains.pop().expect("at least one chain");
        DenseTensor::new(self.dims.clone(), data).expect("contraction has tensor size")
    }

    /// One entry as the product of the selected core slices.
    pub fn eval_entry(&self, index: &[usize]) -> Result<f64> {
        self.check_index(index)?;
        let mut row = vec![1.0];
        for (n, &i) in index.iter().enumerate() {
            row = self.row_times_slice(n, i, &row);
        }
        Ok(row[0])
    }

    pub(crate) fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.order() || index.iter().zip(&self.dims).any(|(&i, &d)| i >= d) {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                dims: self.dims.clone(),
            });
        }
        Ok(())
    }

    /// `row (1 x R(n-1)) * G(n)[:, i, :]`.
    pub(crate) fn row_times_slice(&self, n: usize, i: usize, row: &[f64]) -> Vec<f64> {
        let (rl, d, rr) = self.core_shape(n);
        let core = self.core(n);
        (0..rr)
            .map(|b| {
                let base = rl * (i + d * b);
                row.iter()
                    .zip(&core[base..base + rl])
                    .map(|(x, g)| x * g)
                    .sum()
            })
            .collect()
    }

    /// Merge of the cores before mode `n` (0-based), shaped
    /// `I(1) x .. x I(n-1) x R(n-1)`; the scalar 1 for the first mode.
    pub fn subchain_left(&self, n: usize) -> Result<DenseTensor> {
        self.check_mode(n)?;
        if n == 0 {
            return DenseTensor::new(vec![1], vec![1.0]);
        }
        let mut dims = self.dims[..n].to_vec();
        dims.push(self.ranks[n]);
        let mut chain = vec![1.0];
        let mut rows = 1;
        for k in 0..n {
            let (rl, d, rr) = self.core_shape(k);
            chain = matmul(&chain, self.core(k), rows, rl, d * rr);
            rows *= d;
        }
        DenseTensor::new(dims, chain)
    }

    /// Merge of the cores after mode `n` (0-based), shaped
    /// `R(n) x I(n+1) x .. x I(N)`; the scalar 1 for the last mode.
    pub fn subchain_right(&self, n: usize) -> Result<DenseTensor> {
        self.check_mode(n)?;
        if n + 1 == self.order() {
            return DenseTensor::new(vec![1], vec![1.0]);
        }
        let mut dims = vec![self.ranks[n + 1]];
        dims.extend_from_slice(&self.dims[n + 1..]);
        let mut chain = vec![1.0];
        let mut cols = 1;
        for k in (n + 1..self.order()).rev() {
            let (rl, d, rr) = self.core_shape(k);
            chain = matmul(self.core(k), &chain, rl * d, rr, cols);
            cols *= d;
        }
        DenseTensor::new(dims, chain)
    }

    /// Mode-`n` unfolding of the model tensor computed through the explicit
    /// Kronecker form `G(n)_(2) * (G>n_(1) kron G<n_(n))`.
    pub fn unfolding_via_subchains(&self, n: usize) -> Result<Array2<f64>> {
        let left = self.subchain_left(n)?;
        let right = self.subchain_right(n)?;
        let core = self.core_tensor(n).unfold(1)?;
        let left_mat = left.unfold(left.order() - 1)?;
        let right_mat = right.unfold(0)?;
        Ok(core.dot(&kronecker(&right_mat, &left_mat)))
    }
}

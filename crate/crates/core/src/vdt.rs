//! Visual data tensorization: turn the two image modes `U x V` into `l`
//! block modes of size `u_k v_k`.
//!
//! The image modes are reshaped to `u_1 .. u_l v_1 .. v_l`, permuted to
//! `u_1 v_1 u_2 v_2 .. u_l v_l`, then adjacent pairs are fused (u_k fastest).
//! Trailing modes (channels, frames) pass through unchanged. With
//! first-index-fastest layout, `u_1` and `v_1` are the finest row and column
//! digits, so output mode 1 indexes a `u_1 x v_1` pixel block and later
//! modes index progressively coarser block grids.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VdtPlan {
    u_factors: Vec<usize>,
    v_factors: Vec<usize>,
    trailing: Vec<usize>,
}

impl VdtPlan {
    pub fn new(u_factors: Vec<usize>, v_factors: Vec<usize>, trailing: Vec<usize>) -> Result<Self> {
        if u_factors.is_empty() || u_factors.len() != v_factors.len() {
            return Err(Error::InvalidPlan(format!(
                "need equally many (>= 1) row and column factors, got {} and {}",
                u_factors.len(),
                v_factors.len()
            )));
        }
        if u_factors
            .iter()
            .chain(&v_factors)
            .chain(&trailing)
            .any(|&f| f == 0)
        {
            return Err(Error::InvalidPlan(
                "factors and trailing dims must be >= 1".into(),
            ));
        }
        Ok(Self {
            u_factors,
            v_factors,
            trailing,
        })
    }

    /// All-2 factorization for power-of-two image modes. When `U != V` the
    /// shorter factor list is padded with 1s.
    pub fn auto(rows: usize, cols: usize, trailing: Vec<usize>) -> Result<Self> {
        let log2 = |x: usize| -> Result<usize> {
            if x == 0 || !x.is_power_of_two() {
                return Err(Error::InvalidPlan(format!(
                    "automatic plan needs power-of-two image modes, got {rows}x{cols}"
                )));
            }
            Ok(x.trailing_zeros() as usize)
        };
        let (lu, lv) = (log2(rows)?, log2(cols)?);
        let l = lu.max(lv).max(1);
        let factors = |k: usize| {
            let mut f = vec![2; k];
            f.resize(l, 1);
            f
        };
        Self::new(factors(lu), factors(lv), trailing)
    }

    /// Plan for a tensor whose leading modes are `image` and whose remaining
    /// modes are `trailing`. Explicit factors must multiply to the image modes.
    pub fn for_dims(
        image: (usize, usize),
        trailing: &[usize],
        factors: Option<(Vec<usize>, Vec<usize>)>,
    ) -> Result<Self> {
        let Some((u, v)) = factors else {
            return Self::auto(image.0, image.1, trailing.to_vec());
        };
        let plan = Self::new(u, v, trailing.to_vec())?;
        if plan.rows() != image.0 || plan.cols() != image.1 {
            return Err(Error::InvalidPlan(format!(
                "factors give {}x{}, image is {}x{}",
                plan.rows(),
                plan.cols(),
                image.0,
                image.1
            )));
        }
        Ok(plan)
    }

    pub fn levels(&self) -> usize {
        self.u_factors.len()
    }

    pub fn u_factors(&self) -> &[usize] {
        &self.u_factors
    }

    pub fn v_factors(&self) -> &[usize] {
        &self.v_factors
    }

    pub fn trailing(&self) -> &[usize] {
        &self.trailing
    }

    pub fn rows(&self) -> usize {
        self.u_factors.iter().product()
    }

    pub fn cols(&self) -> usize {
        self.v_factors.iter().product()
    }

    /// `[U, V, trailing..]`.
    pub fn input_dims(&self) -> Vec<usize> {
        let mut d = vec![self.rows(), self.cols()];
        d.extend_from_slice(&self.trailing);
        d
    }

    /// `[u_1..u_l, v_1..v_l, trailing..]`.
    pub fn expanded_dims(&self) -> Vec<usize> {
        let mut d = self.u_factors.clone();
        d.extend_from_slice(&self.v_factors);
        d.extend_from_slice(&self.trailing);
        d
    }

    /// 0-based interleaving permutation `[0, l, 1, l+1, .., l-1, 2l-1, 2l, ..]`.
    pub fn permutation(&self) -> Vec<usize> {
        let l = self.levels();
        let mut p = Vec::with_capacity(2 * l + self.trailing.len());
        for k in 0..l {
            p.push(k);
            p.push(l + k);
        }
        p.extend(2 * l..2 * l + self.trailing.len());
        p
    }

    fn interleaved_dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(2 * self.levels() + self.trailing.len());
        for (&u, &v) in self.u_factors.iter().zip(&self.v_factors) {
            d.push(u);
            d.push(v);
        }
        d.extend_from_slice(&self.trailing);
        d
    }

    /// `[u_1 v_1, .., u_l v_l, trailing..]`.
    pub fn output_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self
            .u_factors
            .iter()
            .zip(&self.v_factors)
            .map(|(u, v)| u * v)
            .collect();
        d.extend_from_slice(&self.trailing);
        d
    }

    fn expect_dims(t: &DenseTensor, dims: &[usize]) -> Result<()> {
        if t.dims() != dims {
            return Err(Error::ShapeMismatch {
                expected: dims.to_vec(),
                found: t.dims().to_vec(),
            });
        }
        Ok(())
    }

    /// Reshape, permute, reshape.
    pub fn apply(&self, t: &DenseTensor) -> Result<DenseTensor> {
        Self::expect_dims(t, &self.input_dims())?;
        t.reshape(&self.expanded_dims())?
            .permute_axes(&self.permutation())?
            .reshape(&self.output_dims())
    }

    /// Exact inverse of [`VdtPlan::apply`].
    pub fn invert(&self, t: &DenseTensor) -> Result<DenseTensor> {
        Self::expect_dims(t, &self.output_dims())?;
        let perm = self.permutation();
        let mut inverse = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        t.reshape(&self.interleaved_dims())?
            .permute_axes(&inverse)?
            .reshape(&self.input_dims())
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for VdtPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "u={} v={} trailing={}",
            join(&self.u_factors),
            join(&self.v_factors),
            join(&self.trailing)
        )
    }
}

impl FromStr for VdtPlan {
    type Err = Error;

    /// Parses `u=2,2,2 v=2,2,2 trailing=3`; `trailing` may be empty or absent.
    fn from_str(s: &str) -> Result<Self> {
        let list = |v: &str| -> Result<Vec<usize>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::InvalidPlan(format!("{t:?}: {e}")))
                })
                .collect()
        };
        let (mut u, mut v, mut trailing) = (None, None, Vec::new());
        for field in s.split_whitespace() {
            match field.split_once('=') {
                Some(("u", val)) => u = Some(list(val)?),
                Some(("v", val)) => v = Some(list(val)?),
                Some(("trailing", val)) => trailing = list(val)?,
                _ => return Err(Error::InvalidPlan(format!("unknown field {field:?}"))),
            }
        }
        match (u, v) {
            (Some(u), Some(v)) => Self::new(u, v, trailing),
            _ => Err(Error::InvalidPlan(format!("{s:?} lacks u= or v="))),
        }
    }
}

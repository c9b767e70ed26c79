//! Dense N-way arrays stored in first-index-fastest order, plus the
//! multilinear primitives (unfolding, Kronecker, Hadamard, inner product)
//! the solvers are written in terms of.

use ndarray::{Array2, ShapeBuilder};

use crate::error::{Error, Result};

/// Dense real tensor. Element `(i_1, .., i_N)` (0-based) lives at
/// `i_1 + I_1 * (i_2 + I_2 * (i_3 + ..))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

pub(crate) fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidDims("tensor order must be at least 1".into()));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidDims(format!(
            "extent of mode {} is zero",
            pos + 1
        )));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidDims(format!("element count of {dims:?} overflows")))
}

/// Linear offset of a 0-based multi-index in first-index-fastest layout.
pub fn linear_index(dims: &[usize], index: &[usize]) -> Result<usize> {
    if index.len() != dims.len() || index.iter().zip(dims).any(|(&i, &d)| i >= d) {
        return Err(Error::IndexOutOfRange {
            index: index.to_vec(),
            dims: dims.to_vec(),
        });
    }
    let mut offset = 0;
    for (&i, &d) in index.iter().zip(dims).rev() {
        offset = offset * d + i;
    }
    Ok(offset)
}

/// Inverse of [`linear_index`].
pub fn multi_index(dims: &[usize], mut offset: usize) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let i = offset % d;
            offset /= d;
            i
        })
        .collect()
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if data.len() != len {
            return Err(Error::InvalidDims(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn ones(dims: &[usize]) -> Result<Self> {
        Self::filled(dims, 1.0)
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index, in
    /// layout order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_dims(dims)?;
        let mut index = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&index));
            for (i, &d) in index.iter_mut().zip(dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[linear_index(&self.dims, index)?])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub(crate) fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch {
                expected: self.dims.clone(),
                found: other.dims.clone(),
            });
        }
        Ok(())
    }

    /// Elementwise combination of two equally shaped tensors.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_dims(other)?;
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Hadamard (elementwise) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.ensure_same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-`mode` matricization (0-based mode). Rows index the chosen mode;
    /// columns enumerate the remaining modes with the lowest one fastest.
    pub fn unfold(&self, mode: usize) -> Result<Array2<f64>> {
        self.check_mode(mode)?;
        let left: usize = self.dims[..mode].iter().product();
        let extent = self.dims[mode];
        let cols = self.len() / extent;
        let mut out = Array2::zeros((extent, cols));
        for (l, &x) in self.data.iter().enumerate() {
            let p = l % left;
            let i = (l / left) % extent;
            let q = l / (left * extent);
            out[[i, p + left * q]] = x;
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(matrix: &Array2<f64>, mode: usize, dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let left: usize = dims[..mode].iter().product();
        let extent = dims[mode];
        let expected = [extent, len / extent];
        if matrix.dim() != (expected[0], expected[1]) {
            return Err(Error::ShapeMismatch {
                expected: expected.to_vec(),
                found: matrix.shape().to_vec(),
            });
        }
        let data = (0..len)
            .map(|l| {
                let p = l % left;
                let i = (l / left) % extent;
                let q = l / (left * extent);
                matrix[[i, p + left * q]]
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Reinterprets the layout-order value sequence under new dims.
    pub fn reshape(&self, new_dims: &[usize]) -> Result<Self> {
        let len = check_dims(new_dims)?;
        if len != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.dims.clone(),
                found: new_dims.to_vec(),
            });
        }
        Ok(Self {
            dims: new_dims.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Axis permutation with 0-based `perm`: output mode `k` is input mode
    /// `perm[k]`, so element `(i_1..i_N)` moves to `(i_perm[0], .., i_perm[N-1])`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        let mut in_strides = vec![1usize; n];
        for k in 1..n {
            in_strides[k] = in_strides[k - 1] * self.dims[k - 1];
        }
        let out_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();

        let mut data = Vec::with_capacity(self.len());
        let mut index = vec![0usize; n];
        let mut offset = 0usize;
        for _ in 0..self.len() {
            data.push(self.data[offset]);
            for k in 0..n {
                index[k] += 1;
                offset += strides[k];
                if index[k] < out_dims[k] {
                    break;
                }
                offset -= strides[k] * out_dims[k];
                index[k] = 0;
            }
        }
        Ok(Self {
            dims: out_dims,
            data,
        })
    }
}

/// Kronecker product: block `(i, k)` of the result is `a[i, k] * b`.
pub fn kronecker(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, k), &x) in a.indexed_iter() {
        for ((j, l), &y) in b.indexed_iter() {
            out[[i * br + j, k * bc + l]] = x * y;
        }
    }
    out
}

/// Borrows a first-index-fastest buffer as a `rows x cols` matrix.
pub(crate) fn fortran_view(data: &[f64], rows: usize, cols: usize) -> ndarray::ArrayView2<'_, f64> {
    ndarray::ArrayView2::from_shape((rows, cols).f(), data).expect("buffer matches matrix shape")
}

pub(crate) fn fortran_view_mut(
    data: &mut [f64],
    rows: usize,
    cols: usize,
) -> ndarray::ArrayViewMut2<'_, f64> {
    ndarray::ArrayViewMut2::from_shape((rows, cols).f(), data).expect("buffer matches matrix shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn iota(dims: &[usize]) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::new(dims.to_vec(), (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn order_two_unfold_is_the_matrix() {
        let t = iota(&[2, 3]);
        let m = t.unfold(0).unwrap();
        assert_eq!(m, array![[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]]);
    }

    #[test]
    fn mode_two_unfold_row() {
        // Brute-force index map: row i2, column i1 + 2*i3 (0-based).
        let t = iota(&[2, 3, 2]);
        let m = t.unfold(1).unwrap();
        let mut brute = Array2::zeros((3, 4));
        for i1 in 0..2 {
            for i2 in 0..3 {
                for i3 in 0..2 {
                    brute[[i2, i1 + 2 * i3]] = t.get(&[i1, i2, i3]).unwrap();
                }
            }
        }
        assert_eq!(m, brute);
        assert_eq!(m.row(1).to_vec(), vec![3.0, 4.0, 9.0, 10.0]);
    }

    #[test]
    fn unfold_rejects_bad_mode() {
        assert!(matches!(
            iota(&[2, 2]).unfold(2),
            Err(Error::ModeOutOfRange { mode: 2, order: 2 })
        ));
    }

    #[test]
    fn kronecker_examples() {
        let b = array![[0.0, 1.0], [1.0, 0.0]];
        assert_eq!(kronecker(&array![[2.0]], &b), 2.0 * &b);
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(
            kronecker(&a, &b),
            array![
                [0.0, 1.0, 0.0, 2.0],
                [1.0, 0.0, 2.0, 0.0],
                [0.0, 3.0, 0.0, 4.0],
                [3.0, 0.0, 4.0, 0.0]
            ]
        );
        let c = Array2::<f64>::zeros((2, 5));
        let d = Array2::<f64>::zeros((3, 7));
        assert_eq!(kronecker(&c, &d).dim(), (6, 35));
    }

    #[test]
    fn hadamard_and_inner() {
        let a = DenseTensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let b = DenseTensor::new(vec![3], vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.hadamard(&b).unwrap().as_slice(), &[4.0, 10.0, 18.0]);
        assert_eq!(a.hadamard(&DenseTensor::ones(&[3]).unwrap()).unwrap(), a);
        assert_eq!(
            a.hadamard(&DenseTensor::zeros(&[3]).unwrap()).unwrap(),
            DenseTensor::zeros(&[3]).unwrap()
        );
        let c = DenseTensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let d = DenseTensor::new(vec![2], vec![3.0, 4.0]).unwrap();
        assert_eq!(c.inner(&d).unwrap(), 11.0);
        assert_eq!(c.inner(&DenseTensor::zeros(&[2]).unwrap()).unwrap(), 0.0);
        assert!(matches!(a.inner(&c), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(a.hadamard(&c), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn norm_of_ones() {
        let t = DenseTensor::ones(&[2, 2, 2]).unwrap();
        assert!((t.frobenius_norm() - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reshape_and_permute() {
        let t = iota(&[2, 6]);
        let r = t.reshape(&[3, 4]).unwrap();
        assert_eq!(r.reshape(&[2, 6]).unwrap(), t);
        assert!(t.reshape(&[5, 2]).is_err());

        assert_eq!(t.permute_axes(&[0, 1]).unwrap(), t);
        let m = iota(&[2, 3]);
        let tr = m.permute_axes(&[1, 0]).unwrap();
        assert_eq!(tr.dims(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(tr.get(&[j, i]).unwrap(), m.get(&[i, j]).unwrap());
            }
        }
        assert!(matches!(
            m.permute_axes(&[0, 0]),
            Err(Error::InvalidPermutation(_))
        ));
        assert!(m.permute_axes(&[0]).is_err());
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(DenseTensor::zeros(&[]).is_err());
        assert!(DenseTensor::zeros(&[3, 0]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn linearization_law() {
        let dims = [3, 2, 4];
        let t = iota(&dims);
        let mut expected = Vec::new();
        for k in 0..4 {
            for j in 0..2 {
                for i in 0..3 {
                    expected.push(t.get(&[i, j, k]).unwrap());
                }
            }
        }
        assert_eq!(t.as_slice(), expected.as_slice());
        let from_fn =
            DenseTensor::from_fn(&dims, |ix| (linear_index(&dims, ix).unwrap() + 1) as f64)
                .unwrap();
        assert_eq!(from_fn, t);
        for l in 0..t.len() {
            assert_eq!(linear_index(&dims, &multi_index(&dims, l)).unwrap(), l);
        }
    }

    fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        a.dot(b)
    }

    fn arb_tensor(max_order: usize) -> impl Strategy<Value = DenseTensor> {
        prop::collection::vec(1usize..=3, 1..=max_order).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            prop::collection::vec(-1.0f64..1.0, n)
                .prop_map(move |data| DenseTensor::new(dims.clone(), data).unwrap())
        })
    }

    fn arb_matrix(r: usize, c: usize) -> impl Strategy<Value = Array2<f64>> {
        prop::collection::vec(-1.0f64..1.0, r * c)
            .prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
    }

    proptest! {
        #[test]
        fn unfold_fold_round_trip(t in arb_tensor(9)) {
            for n in 0..t.order() {
                let m = t.unfold(n).unwrap();
                prop_assert_eq!(DenseTensor::fold(&m, n, t.dims()).unwrap(), t.clone());
            }
        }

        #[test]
        fn kronecker_mixed_product(
            a in arb_matrix(2, 3), b in arb_matrix(3, 2),
            c in arb_matrix(3, 2), d in arb_matrix(2, 4),
        ) {
            let lhs = matmul(&kronecker(&a, &b), &kronecker(&c, &d));
            let rhs = kronecker(&matmul(&a, &c), &matmul(&b, &d));
            for (x, y) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn permute_then_inverse(t in arb_tensor(6), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut perm: Vec<usize> = (0..t.order()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut inverse = vec![0; perm.len()];
            for (k, &p) in perm.iter().enumerate() {
                inverse[p] = k;
            }
            let p = t.permute_axes(&perm).unwrap();
            prop_assert_eq!(p.permute_axes(&inverse).unwrap(), t);
        }
    }
}

//! Synthetic data, masks, completion composition and error metrics.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{check_dims, DenseTensor};
use crate::wopt::WeightTensor;

/// `sin(x / 4) * cos(x^2)` sampled at `T = prod(dims)` evenly spaced points
/// on `[0, 1]`, placed in layout order.
pub fn gen_sin_tensor(dims: &[usize]) -> Result<DenseTensor> {
    let total = check_dims(dims)?;
    let denom = (total.max(2) - 1) as f64;
    let data = (0..total)
        .map(|t| {
            let x = t as f64 / denom;
            (x / 4.0).sin() * (x * x).cos()
        })
        .collect();
    DenseTensor::new(dims.to_vec(), data)
}

/// Mask with exactly `round((1 - missing_rate) * prod(dims))` observed
/// entries, chosen uniformly without replacement.
pub fn gen_random_mask(dims: &[usize], missing_rate: f64, seed: u64) -> Result<WeightTensor> {
    let total = check_dims(dims)?;
    if !(0.0..=1.0).contains(&missing_rate) {
        return Err(Error::InvalidConfig(format!(
            "missing rate {missing_rate} outside [0, 1]"
        )));
    }
    let observed = ((1.0 - missing_rate) * total as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; total];
    for l in rand::seq::index::sample(&mut rng, total, observed.min(total)) {
        data[l] = 1.0;
    }
    WeightTensor::new(DenseTensor::new(dims.to_vec(), data)?)
}

/// `Z = (1 - W) * X + W * Y`: observed entries from `y`, the rest from `x`.
pub fn compose(y: &DenseTensor, w: &WeightTensor, x: &DenseTensor) -> Result<DenseTensor> {
    w.check_matches(y)?;
    y.ensure_same_dims(x)?;
    let data = y
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .zip(w.as_tensor().as_slice())
        .map(|((&yv, &xv), &m)| if m == 1.0 { yv } else { xv })
        .collect();
    DenseTensor::new(y.dims().to_vec(), data)
}

/// `||Y - Z||_F / ||Y||_F`.
pub fn rse(y: &DenseTensor, z: &DenseTensor) -> Result<f64> {
    y.ensure_same_dims(z)?;
    let norm = y.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff: f64 = y
        .as_slice()
        .iter()
        .zip(z.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(diff.sqrt() / norm)
}

/// `||Z - Y||_F^2 / num(Z)`.
pub fn mse(y: &DenseTensor, z: &DenseTensor) -> Result<f64> {
    y.ensure_same_dims(z)?;
    let sum: f64 = y
        .as_slice()
        .iter()
        .zip(z.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / y.len() as f64)
}

/// `10 log10(255^2 / MSE)` with both tensors first mapped from
/// `[0, data_range]` to `[0, 255]`. Identical inputs give `+inf`.
pub fn psnr(y: &DenseTensor, z: &DenseTensor, data_range: f64) -> Result<f64> {
    if !(data_range.is_finite() && data_range > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "data range {data_range} must be positive"
        )));
    }
    let scale = 255.0 / data_range;
    let err = mse(y, z)? * scale * scale;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / err).log10())
}

/// Affine map onto `[0, 1]`; returns the tensor with the original min and max.
pub fn normalize(t: &DenseTensor) -> Result<(DenseTensor, f64, f64)> {
    let (min, max) = t
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::ZeroRange);
    }
    let span = max - min;
    Ok((t.map(|v| (v - min) / span), min, max))
}

pub fn denormalize(t: &DenseTensor, min: f64, max: f64) -> DenseTensor {
    let span = max - min;
    t.map(|v| v * span + min)
}

/// A finished completion with its quality figures.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub completed: DenseTensor,
    pub rse: f64,
    pub psnr: Option<f64>,
    pub elapsed: Duration,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sin_tensor_endpoints() {
        let t = gen_sin_tensor(&[26, 26, 26]).unwrap();
        assert_eq!(t.len(), 17576);
        assert_eq!(t.as_slice()[0], 0.0);
        let last = *t.as_slice().last().unwrap();
        assert!((last - 0.25f64.sin() * 1f64.cos()).abs() < 1e-15);
        assert!((last - 0.13367).abs() < 1e-5);
        assert_eq!(gen_sin_tensor(&[1]).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn mask_counts() {
        assert_eq!(
            gen_random_mask(&[4, 5], 0.0, 1).unwrap().observed_count(),
            20
        );
        assert_eq!(
            gen_random_mask(&[4, 5], 1.0, 1).unwrap().observed_count(),
            0
        );
        assert_eq!(
            gen_random_mask(&[10, 10], 0.3, 7).unwrap().observed_count(),
            70
        );
        assert_eq!(
            gen_random_mask(&[10, 10], 0.3, 7).unwrap(),
            gen_random_mask(&[10, 10], 0.3, 7).unwrap()
        );
        assert_ne!(
            gen_random_mask(&[10, 10], 0.3, 7).unwrap(),
            gen_random_mask(&[10, 10], 0.3, 8).unwrap()
        );
        assert!(gen_random_mask(&[3], 1.5, 0).is_err());
    }

    #[test]
    fn compose_cases() {
        let y = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = DenseTensor::new(vec![2, 2], vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let ones = WeightTensor::ones(&[2, 2]).unwrap();
        let zeros = WeightTensor::new(DenseTensor::zeros(&[2, 2]).unwrap()).unwrap();
        assert_eq!(compose(&y, &ones, &x).unwrap(), y);
        assert_eq!(compose(&y, &zeros, &x).unwrap(), x);
        // [[1,0],[0,1]] in layout order (0,0),(1,0),(0,1),(1,1).
        let diag =
            WeightTensor::new(DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap())
                .unwrap();
        assert_eq!(
            compose(&y, &diag, &x).unwrap().as_slice(),
            &[1.0, 20.0, 30.0, 4.0]
        );
        assert!(compose(&y, &WeightTensor::ones(&[4]).unwrap(), &x).is_err());
    }

    #[test]
    fn metric_cases() {
        let y = DenseTensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(rse(&y, &y).unwrap(), 0.0);
        assert_eq!(psnr(&y, &y, 1.0).unwrap(), f64::INFINITY);
        let twice = y.map(|v| 2.0 * v);
        assert!((rse(&y, &twice).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            rse(&DenseTensor::zeros(&[3]).unwrap(), &y),
            Err(Error::ZeroNorm)
        ));

        let a = DenseTensor::zeros(&[4, 4]).unwrap();
        let b = DenseTensor::filled(&[4, 4], 255.0).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 255.0 * 255.0);
        assert!(psnr(&a, &b, 255.0).unwrap().abs() < 1e-12);
        // The same error on [0, 1] data.
        let c = DenseTensor::filled(&[4, 4], 1.0).unwrap();
        assert!(psnr(&a, &c, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn normalize_cases() {
        let t = DenseTensor::new(vec![3], vec![10.0, 20.0, 30.0]).unwrap();
        let (n, lo, hi) = normalize(&t).unwrap();
        assert_eq!(n.as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!((lo, hi), (10.0, 30.0));
        let unit = DenseTensor::new(vec![3], vec![0.0, 0.25, 1.0]).unwrap();
        let (u, lo, hi) = normalize(&unit).unwrap();
        assert_eq!(u, unit);
        assert_eq!((lo, hi), (0.0, 1.0));
        assert!(matches!(
            normalize(&DenseTensor::filled(&[2], 3.0).unwrap()),
            Err(Error::ZeroRange)
        ));
    }

    proptest! {
        #[test]
        fn normalize_round_trip(v in prop::collection::vec(-1e3f64..1e3, 2..50)) {
            let t = DenseTensor::new(vec![v.len()], v).unwrap();
            if let Ok((n, lo, hi)) = normalize(&t) {
                let back = denormalize(&n, lo, hi);
                for (a, b) in back.as_slice().iter().zip(t.as_slice()) {
                    prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
                }
                prop_assert!(n.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }

        #[test]
        fn rse_is_scale_covariant(
            v in prop::collection::vec(0.1f64..10.0, 1..30),
            e in prop::collection::vec(-1.0f64..1.0, 30),
            c in 0.01f64..100.0,
        ) {
            let n = v.len();
            let y = DenseTensor::new(vec![n], v).unwrap();
            let err = DenseTensor::new(vec![n], e[..n].to_vec()).unwrap();
            let z = y.zip_with(&err, |a, b| a + b).unwrap();
            let base = rse(&y, &z).unwrap();
            let scaled = rse(&y.map(|x| c * x), &z.map(|x| c * x)).unwrap();
            prop_assert!((base - scaled).abs() < 1e-12 * (1.0 + base));
        }

        #[test]
        fn compose_keeps_observed_bits(seed in any::<u64>(), rate in 0.0f64..1.0) {
            let dims = [4, 3, 2];
            let y = crate::eval::gen_sin_tensor(&dims).unwrap();
            let x = y.map(|v| v * 3.0 + 1.0);
            let w = gen_random_mask(&dims, rate, seed).unwrap();
            let z = compose(&y, &w, &x).unwrap();
            for l in 0..y.len() {
                if w.is_observed(l) {
                    prop_assert_eq!(z.as_slice()[l].to_bits(), y.as_slice()[l].to_bits());
                }
            }
        }
    }
}

//! TNSR v1: `"TNSRBIN1"`, order as u32 LE, extents as u64 LE, then the
//! values as f64 LE in first-index-fastest order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const TNSR_MAGIC: &[u8; 8] = b"TNSRBIN1";

pub fn encode_tnsr(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * (t.order() + t.len()));
    out.extend_from_slice(TNSR_MAGIC);
    out.extend_from_slice(&(t.order() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Format(format!("TNSR truncated in {what}")));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

pub fn decode_tnsr(mut bytes: &[u8]) -> Result<DenseTensor> {
    if take(&mut bytes, 8, "magic")? != TNSR_MAGIC {
        return Err(Error::Format("missing TNSRBIN1 magic".into()));
    }
    let order = u32::from_le_bytes(take(&mut bytes, 4, "order")?.try_into().unwrap()) as usize;
    let dims = (0..order)
        .map(|_| {
            let d = u64::from_le_bytes(take(&mut bytes, 8, "dims")?.try_into().unwrap());
            usize::try_from(d).map_err(|_| Error::Format(format!("extent {d} too large")))
        })
        .collect::<Result<Vec<_>>>()?;
    let len = crate::tensor::check_dims(&dims).map_err(|e| Error::Format(e.to_string()))?;
    if bytes.len() != len.saturating_mul(8) {
        return Err(Error::Format(format!(
            "dims {dims:?} need {len} values, payload has {} bytes",
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::new(dims, data)
}

pub fn read_tnsr(path: &Path) -> Result<DenseTensor> {
    decode_tnsr(&std::fs::read(path)?)
}

pub fn write_tnsr(path: &Path, t: &DenseTensor) -> Result<()> {
    super::write_atomic(path, &encode_tnsr(t))
}

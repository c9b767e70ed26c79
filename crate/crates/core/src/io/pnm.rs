//! Binary Netpbm images: P5 (gray) and P6 (RGB) with 8-bit samples.
//! Images map to `H x W` or `H x W x 3` tensors with values in `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: usize,
}

fn parse_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::Format("expected P5 or P6 magic".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad PNM header field".into()))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after PNM header".into()));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "unsupported PNM geometry {width}x{height} maxval {maxval}"
        )));
    }
    Ok((
        Header {
            channels,
            width,
            height,
            maxval,
        },
        &bytes[pos + 1..],
    ))
}

pub fn decode_pnm(bytes: &[u8]) -> Result<DenseTensor> {
    let (h, raster) = parse_header(bytes)?;
    let n = h.width * h.height * h.channels;
    if raster.len() < n {
        return Err(Error::Format(format!(
            "raster has {} bytes, expected {n}",
            raster.len()
        )));
    }
    let dims = if h.channels == 1 {
        vec![h.height, h.width]
    } else {
        vec![h.height, h.width, h.channels]
    };
    let scale = h.maxval as f64;
    DenseTensor::from_fn(&dims, |ix| {
        let k = ix.get(2).copied().unwrap_or(0);
        raster[(ix[0] * h.width + ix[1]) * h.channels + k] as f64 / scale
    })
}

/// Writes an `H x W` (P5) or `H x W x 3` (P6) tensor, clamping to `[0, 1]`
/// and rounding to 8 bits.
pub fn encode_pnm(t: &DenseTensor) -> Result<Vec<u8>> {
    let (height, width, channels) = match t.dims() {
        &[h, w] => (h, w, 1),
        &[h, w, 3] => (h, w, 3),
        other => {
            return Err(Error::InvalidDims(format!(
                "images are HxW or HxWx3, got {other:?}"
            )))
        }
    };
    let magic = if channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.reserve(height * width * channels);
    let data = t.as_slice();
    for r in 0..height {
        for c in 0..width {
            for k in 0..channels {
                let v = data[r + height * (c + width * k)];
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

pub fn read_pnm(path: &Path) -> Result<DenseTensor> {
    decode_pnm(&std::fs::read(path)?)
}

pub fn write_pnm(path: &Path, t: &DenseTensor) -> Result<()> {
    super::write_atomic(path, &encode_pnm(t)?)
}

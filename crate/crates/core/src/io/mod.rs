//! File formats: TNSR binary tensors, binary PPM/PGM images, CSV
//! convergence logs and TT model directories. Every writer replaces its
//! target atomically (temporary file in the same directory, then rename).

mod pnm;
mod tnsr;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

pub use pnm::{decode_pnm, encode_pnm, read_pnm, write_pnm};
pub use tnsr::{decode_tnsr, encode_tnsr, read_tnsr, write_tnsr, TNSR_MAGIC};

use crate::config::ConvergenceLog;
use crate::error::{Error, Result};
use crate::tt::TTCores;

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub const LOG_HEADER: &str = "iter,objective,rse_observed,elapsed_ms";

/// CSV rendering of a convergence log. With `timing` off the elapsed column
/// is written as 0 so that identical runs produce identical bytes.
pub fn format_log(log: &ConvergenceLog, timing: bool) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in &log.records {
        let ms = if timing {
            r.elapsed.as_secs_f64() * 1e3
        } else {
            0.0
        };
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:.3}",
            r.iter, r.objective, r.rse_observed, ms
        );
    }
    out
}

pub fn write_log(path: &Path, log: &ConvergenceLog, timing: bool) -> Result<()> {
    write_atomic(path, format_log(log, timing).as_bytes())
}

const MANIFEST: &str = "manifest.txt";

/// Saves each core as `core_<n>.tnsr` in `dir` plus a manifest listing the
/// core files one per line.
pub fn save_model(dir: &Path, model: &TTCores) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for n in 0..model.order() {
        let name = format!("core_{}.tnsr", n + 1);
        write_tnsr(&dir.join(&name), &model.core_tensor(n))?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    write_atomic(&dir.join(MANIFEST), manifest.as_bytes())
}

pub fn load_model(dir: &Path) -> Result<TTCores> {
    let manifest = std::fs::read_to_string(dir.join(MANIFEST))?;
    let cores = manifest
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|name| read_tnsr(&dir.join(name.trim())))
        .collect::<Result<Vec<_>>>()?;
    TTCores::from_cores(&cores)
}

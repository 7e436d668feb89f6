use std::path::Path;

use serde::Serialize;
use threefield_core::Spectrum;

use crate::error::{LabError, LabResult};

pub fn write_file(path: &Path, contents: &str) -> LabResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> LabResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_file(path, &text)
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
/// `-0` prints as `0` so that sign noise on zero does not leak into files.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// `re,im` header, one row per finite eigenvalue in spectral order.
pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("re,im\n");
    for z in &s.finite_eigs {
        out.push_str(&num(z.re));
        out.push(',');
        out.push_str(&num(z.im));
        out.push('\n');
    }
    out
}

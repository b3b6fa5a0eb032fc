//! JSON and CSV artifacts.
//!
//! JSON floats use the shortest representation that parses back to the same
//! bits; CSV floats carry 17 significant digits.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalRow, StepFunction};
use crate::error::{Error, Result};
use crate::linalg::{FactorSpace, Matrix};
use crate::schauder::{BasisConstantRow, SignSweepReport};
use crate::tensor::TensorSweepRow;

pub const BASIS_HEADER: &str = "n,p,alpha,side,method,value,converged";
pub const BOUNDS_HEADER: &str = "n,p,alpha,side,method,bound,gap";
pub const SIGN_HEADER: &str = "p,alpha,m,trials,seed,max_ratio";
pub const PATTERN_HEADER: &str = "pattern,max_ratio";
pub const TENSOR_HEADER: &str = "n,i,j,alpha,alpha2,p,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixJson {
    m: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VectorJson {
    m: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StepJson {
    level: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

pub fn matrix_to_json(x: &Matrix<f64>) -> Result<String> {
    let level = FactorSpace::from_dim(x.dim())?;
    let d = x.dim();
    let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..d).map(|r| (0..d).map(|c| f(&x.get(r, c))).collect()).collect()
    };
    Ok(serde_json::to_string(&MatrixJson {
        m: level.m(),
        re: rows(|z| z.re),
        im: rows(|z| z.im),
    })?)
}

pub fn matrix_from_json(s: &str) -> Result<Matrix<f64>> {
    let j: MatrixJson = serde_json::from_str(s)?;
    let level = FactorSpace::new(j.m)?;
    let d = level.dim();
    let shape_ok = |a: &Vec<Vec<f64>>| a.len() == d && a.iter().all(|r| r.len() == d);
    if !shape_ok(&j.re) || !shape_ok(&j.im) {
        return Err(Error::InvalidArgument(format!("matrix JSON must hold two {d}x{d} arrays for m = {}", j.m)));
    }
    Ok(Matrix::from_fn(d, |r, c| Complex64::new(j.re[r][c], j.im[r][c])))
}

pub fn coefficients_to_json(c: &[Complex64], level: FactorSpace) -> Result<String> {
    if c.len() != level.walsh_len() {
        return Err(Error::BadLength {
            expected: level.walsh_len(),
            found: c.len(),
        });
    }
    Ok(serde_json::to_string(&VectorJson {
        m: level.m(),
        re: c.iter().map(|z| z.re).collect(),
        im: c.iter().map(|z| z.im).collect(),
    })?)
}

pub fn coefficients_from_json(s: &str) -> Result<(FactorSpace, Vec<Complex64>)> {
    let j: VectorJson = serde_json::from_str(s)?;
    let level = FactorSpace::new(j.m)?;
    for len in [j.re.len(), j.im.len()] {
        if len != level.walsh_len() {
            return Err(Error::BadLength {
                expected: level.walsh_len(),
                found: len,
            });
        }
    }
    Ok((level, j.re.iter().zip(&j.im).map(|(&a, &b)| Complex64::new(a, b)).collect()))
}

pub fn step_to_json(f: &StepFunction<f64>) -> Result<String> {
    Ok(serde_json::to_string(&StepJson {
        level: f.level(),
        re: f.values().iter().map(|z| z.re).collect(),
        im: f.values().iter().map(|z| z.im).collect(),
    })?)
}

pub fn step_from_json(s: &str) -> Result<StepFunction<f64>> {
    let j: StepJson = serde_json::from_str(s)?;
    if j.re.len() != j.im.len() {
        return Err(Error::BadLength {
            expected: j.re.len(),
            found: j.im.len(),
        });
    }
    StepFunction::new(j.level, j.re.iter().zip(&j.im).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// 17 significant digits; `inf`, `-inf` and `nan` spelled out.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn csv(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn basis_csv(rows: &[BasisConstantRow<f64>]) -> String {
    csv(
        BASIS_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.n,
                format_float(r.p),
                format_float(r.alpha),
                r.side.as_str(),
                r.norm.method.as_str(),
                format_float(r.norm.value),
                r.norm.converged
            )
        }),
    )
}

pub fn bounds_csv(rows: &[BasisConstantRow<f64>]) -> String {
    csv(
        BOUNDS_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.n,
                format_float(r.p),
                format_float(r.alpha),
                r.side.as_str(),
                r.bound.method.as_str(),
                format_float(r.bound.value),
                format_float(r.gap)
            )
        }),
    )
}

pub fn classical_csv(rows: &[ClassicalRow<f64>]) -> String {
    csv(
        BASIS_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},left,{},{},{}",
                r.n,
                format_float(r.p),
                format_float(r.alpha),
                r.report.method.as_str(),
                format_float(r.report.value),
                r.report.converged
            )
        }),
    )
}

pub fn sign_csv(report: &SignSweepReport<f64>) -> String {
    csv(
        SIGN_HEADER,
        std::iter::once(format!(
            "{},{},{},{},{},{}",
            format_float(report.p),
            format_float(report.alpha),
            report.m,
            report.trials,
            report.seed,
            format_float(report.max_ratio)
        )),
    )
}

pub fn pattern_csv(maxima: &[f64]) -> String {
    csv(
        PATTERN_HEADER,
        maxima.iter().enumerate().map(|(k, v)| format!("{k},{}", format_float(*v))),
    )
}

pub fn tensor_csv(rows: &[TensorSweepRow<f64>]) -> String {
    csv(
        TENSOR_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.n,
                r.i,
                r.j,
                format_float(r.alpha),
                format_float(r.alpha2),
                format_float(r.p),
                format_float(r.report.value)
            )
        }),
    )
}

/// `<path>.<suffix>` next to an output file.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

/// Everything needed to reproduce an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Arguments after the program name.
    pub command_line: Vec<String>,
    pub seed: Option<u64>,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub version: String,
    pub timestamp: u64,
    pub outputs: Vec<String>,
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, seed: Option<u64>) -> Self {
        Self {
            command_line,
            seed,
            parameters: serde_json::Map::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
            workers: rayon::current_num_threads(),
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

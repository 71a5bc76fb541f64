//! Fixed-format report serialization and CSV tables.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::config::{matrix_to_spec, MatrixSpec, ModelConfig};
use crate::density::min_eigenvalue;
use crate::dynamics::{SteadyStateReport, Trajectory};
use crate::error::Result;
use crate::kernels::Kernel;
use crate::superop::Superoperator;

/// Float text with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON whose floats are written by [`fmt_float`].
struct FixedFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for FixedFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes with fixed-format floats; non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedFormatter {
            inner: PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// `sha256(config JSON || crate version)`.
pub fn provenance_hash(config: &ModelConfig) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_string(config).expect("config serializes").as_bytes());
    h.update(b"\0");
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    hex::encode(h.finalize())
}

/// `row,col,re,im` over every entry, flat super-indices.
pub fn kernel_csv(k: &Superoperator) -> String {
    let m = k.matrix();
    let mut out = String::from("row,col,re,im\n");
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            out.push_str(&format!("{r},{c},{},{}\n", fmt_float(z.re), fmt_float(z.im)));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelEnvelope {
    pub variant: String,
    pub dim: usize,
    pub provenance: crate::kernels::Provenance,
    pub config_hash: String,
    pub code_version: &'static str,
    pub trace_residual: f64,
    pub hermiticity_residual: f64,
    /// Rows are outgoing pairs `(p, p')`, columns incoming `(q, q')`.
    pub matrix: MatrixSpec,
}

impl KernelEnvelope {
    pub fn new(k: &Kernel, config_hash: String) -> Self {
        Self {
            variant: k.variant.to_string(),
            dim: k.superop.dim(),
            provenance: k.provenance.clone(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION"),
            trace_residual: k.superop.trace_condition_residual(),
            hermiticity_residual: k.superop.hermiticity_residual(),
            matrix: matrix_to_spec(k.superop.matrix()),
        }
    }
}

/// `t, re_p_p', im_p_p', ..., trace, min_eig`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let d = traj.dim();
    let mut out = String::from("t");
    for p in 0..d {
        for p2 in 0..d {
            out.push_str(&format!(",re_{p}_{p2},im_{p}_{p2}"));
        }
    }
    out.push_str(",trace,min_eig\n");
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        out.push_str(&fmt_float(*t));
        for p in 0..d {
            for p2 in 0..d {
                let z = rho[(p, p2)];
                out.push(',');
                out.push_str(&fmt_float(z.re));
                out.push(',');
                out.push_str(&fmt_float(z.im));
            }
        }
        out.push(',');
        out.push_str(&fmt_float(rho.trace().re));
        out.push(',');
        out.push_str(&fmt_float(min_eigenvalue(rho)));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateEntry {
    pub normalized: bool,
    pub residual: f64,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateDocument {
    pub config_hash: String,
    pub variant: String,
    pub multiplicity: usize,
    pub threshold: f64,
    pub smallest_singular_values: Vec<f64>,
    pub states: Vec<SteadyStateEntry>,
}

impl SteadyStateDocument {
    pub fn new(report: &SteadyStateReport, variant: String, config_hash: String) -> Self {
        Self {
            config_hash,
            variant,
            multiplicity: report.multiplicity,
            threshold: report.threshold,
            smallest_singular_values: report.smallest_singular_values.clone(),
            states: report
                .states
                .iter()
                .map(|s| SteadyStateEntry {
                    normalized: s.normalized,
                    residual: s.residual,
                    matrix: matrix_to_spec(&s.matrix),
                })
                .collect(),
        }
    }
}

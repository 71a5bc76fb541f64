use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mastereq::config::ModelConfig;
use mastereq::dynamics::{evolve_markov, Liouvillian};
use mastereq::kernels::build_kernel as build;
use mastereq::{CMat, Error};

type Matrix = Vec<Vec<Complex64>>;

fn err(e: Error) -> PyErr {
    match e {
        Error::NonFinite { .. }
        | Error::StepUnderflow { .. }
        | Error::NullSpace(_)
        | Error::NonConvergence(_)
        | Error::TruncationLeakage { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_rows(m: &CMat) -> Matrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_rows(rows: &Matrix) -> PyResult<CMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

#[pyclass(name = "EnergySpectrum", from_py_object)]
#[derive(Clone)]
struct PySpectrum {
    inner: mastereq::EnergySpectrum,
}

#[pymethods]
impl PySpectrum {
    #[new]
    #[pyo3(signature = (levels, eps_deg=None))]
    fn new(levels: Vec<f64>, eps_deg: Option<f64>) -> PyResult<Self> {
        let inner = match eps_deg {
            Some(eps) => mastereq::EnergySpectrum::with_tolerance(levels, eps),
            None => mastereq::EnergySpectrum::new(levels),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn levels(&self) -> Vec<f64> {
        self.inner.levels().to_vec()
    }

    #[getter]
    fn eps_deg(&self) -> f64 {
        self.inner.eps_deg()
    }

    fn is_degenerate(&self) -> bool {
        self.inner.is_degenerate()
    }

    /// `E_p - E_q` from the Bohr bin.
    fn bohr(&self, p: usize, q: usize) -> PyResult<f64> {
        let d = self.inner.dim();
        if p >= d || q >= d {
            return Err(PyValueError::new_err("level index out of range"));
        }
        Ok(self.inner.bohr(p, q))
    }

    fn __repr__(&self) -> String {
        format!("EnergySpectrum({:?})", self.inner.levels())
    }
}

#[pyclass(name = "CouplingChannelSet", from_py_object)]
#[derive(Clone)]
struct PyCouplings {
    inner: mastereq::CouplingChannelSet,
}

#[pymethods]
impl PyCouplings {
    /// `channels` is a list of `(label, matrix)`; `adjoint[a]` is the index
    /// of the channel holding `S^a†` (all hermitian when omitted).
    #[new]
    #[pyo3(signature = (channels, adjoint=None))]
    fn new(channels: Vec<(String, Matrix)>, adjoint: Option<Vec<usize>>) -> PyResult<Self> {
        let dim = channels.first().map_or(0, |c| c.1.len());
        let mats = channels
            .into_iter()
            .map(|(l, m)| Ok((l, from_rows(&m)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let adjoint = adjoint.unwrap_or_else(|| (0..mats.len()).collect());
        let inner = mastereq::CouplingChannelSet::new(mats, adjoint, dim).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn qubit_rotating() -> Self {
        Self {
            inner: mastereq::CouplingChannelSet::qubit_rotating(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn matrix(&self, a: usize) -> PyResult<Matrix> {
        if a >= self.inner.len() {
            return Err(PyValueError::new_err("channel index out of range"));
        }
        Ok(to_rows(self.inner.matrix(a)))
    }
}

#[pyclass(name = "BathSpectrum", from_py_object)]
#[derive(Clone)]
struct PyBath {
    inner: mastereq::BathSpectrum,
}

#[pymethods]
impl PyBath {
    #[staticmethod]
    fn flat(channels: usize, rate: f64) -> PyResult<Self> {
        Ok(Self {
            inner: mastereq::BathSpectrum::flat(channels, rate).map_err(err)?,
        })
    }

    /// `beta` may be `float("inf")`.
    #[staticmethod]
    fn thermal_ohmic(channels: usize, eta: f64, cutoff: f64, beta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: mastereq::BathSpectrum::thermal_ohmic(channels, eta, cutoff, beta).map_err(err)?,
        })
    }

    #[staticmethod]
    fn lorentzian(channels: usize, rate: f64, width: f64) -> PyResult<Self> {
        Ok(Self {
            inner: mastereq::BathSpectrum::lorentzian(channels, rate, width).map_err(err)?,
        })
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn gamma(&self, omega: f64) -> Matrix {
        to_rows(&self.inner.gamma(omega))
    }

    fn id(&self) -> String {
        self.inner.id()
    }
}

#[pyclass(name = "Kernel")]
struct PyKernel {
    inner: mastereq::Kernel,
}

#[pymethods]
impl PyKernel {
    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.superop.dim()
    }

    /// Rows are outgoing pairs `p*d + p'`, columns incoming `q*d + q'`.
    fn matrix(&self) -> Matrix {
        to_rows(self.inner.superop.matrix())
    }

    fn get(&self, p: usize, p2: usize, q: usize, q2: usize) -> PyResult<Complex64> {
        let d = self.inner.superop.dim();
        if [p, p2, q, q2].iter().any(|&i| i >= d) {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.superop.get(p, p2, q, q2))
    }

    fn trace_residual(&self) -> f64 {
        self.inner.trace_condition_residual()
    }

    fn max_abs_difference(&self, other: &PyKernel) -> PyResult<f64> {
        Ok(self.inner.superop.difference(&other.inner.superop).map_err(err)?.max_abs)
    }

    fn to_json(&self) -> PyResult<String> {
        mastereq::io::to_json(&mastereq::io::KernelEnvelope::new(&self.inner, String::new())).map_err(err)
    }
}

/// Variant names: `born`, `born:<w>`, `redfield_qq`, `redfield_pp`,
/// `energy_conserving`, `lindblad`.
#[pyfunction]
fn build_kernel(variant: &str, spectrum: &PySpectrum, couplings: &PyCouplings, bath: &PyBath) -> PyResult<PyKernel> {
    let v = variant.parse().map_err(err)?;
    let inner = build(v, &spectrum.inner, &couplings.inner, &bath.inner).map_err(err)?;
    Ok(PyKernel { inner })
}

/// Markov evolution; returns one density matrix per time.
#[pyfunction]
fn evolve(spectrum: &PySpectrum, kernel: &PyKernel, rho0: Matrix, t_grid: Vec<f64>) -> PyResult<Vec<Matrix>> {
    let l = Liouvillian::from_kernel(&spectrum.inner, &kernel.inner).map_err(err)?;
    let rho = mastereq::DensityMatrix::new(from_rows(&rho0)?).map_err(err)?;
    let traj = evolve_markov(&l, &rho, &t_grid).map_err(err)?;
    Ok(traj.states.iter().map(to_rows).collect())
}

/// `(multiplicity, states)`; the first state has unit trace.
#[pyfunction]
fn steady_state(spectrum: &PySpectrum, kernel: &PyKernel) -> PyResult<(usize, Vec<Matrix>)> {
    let l = Liouvillian::from_kernel(&spectrum.inner, &kernel.inner).map_err(err)?;
    let r = mastereq::dynamics::steady_state(&l).map_err(err)?;
    Ok((r.multiplicity, r.states.iter().map(|s| to_rows(&s.matrix)).collect()))
}

/// Pairwise comparison of the Markov kernels as a JSON document.
#[pyfunction]
fn equivalence_report(spectrum: &PySpectrum, couplings: &PyCouplings, bath: &PyBath) -> PyResult<String> {
    let r = mastereq::diagnostics::equivalence_report(&spectrum.inner, &couplings.inner, &bath.inner).map_err(err)?;
    mastereq::io::to_json(&r).map_err(err)
}

/// Exact-vs-Lindblad Born-scaling study with default parameters, as JSON.
#[pyfunction]
fn born_scaling() -> PyResult<String> {
    let r = mastereq::oracle::born_scaling(&Default::default()).map_err(err)?;
    mastereq::io::to_json(&r).map_err(err)
}

/// `(spectrum, couplings, bath)` from a JSON model file.
#[pyfunction]
fn load_config(path: &str) -> PyResult<(PySpectrum, PyCouplings, PyBath)> {
    let cfg = ModelConfig::from_path(std::path::Path::new(path)).map_err(err)?;
    Ok((
        PySpectrum {
            inner: cfg.spectrum().map_err(err)?,
        },
        PyCouplings {
            inner: cfg.couplings().map_err(err)?,
        },
        PyBath {
            inner: cfg.bath().map_err(err)?,
        },
    ))
}

#[pymodule]
fn pymastereq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyCouplings>()?;
    m.add_class::<PyBath>()?;
    m.add_class::<PyKernel>()?;
    m.add_function(wrap_pyfunction!(build_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence_report, m)?)?;
    m.add_function(wrap_pyfunction!(born_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

//! JSON model configuration shared by the CLI and the bindings.
//!
//! Matrices are nested arrays of `[re, im]` pairs. Inverse temperatures are
//! numbers or the string `"inf"`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bath::{BathSpectrum, TabulatedSpectrum};
use crate::coupling::CouplingChannelSet;
use crate::density::DensityMatrix;
use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::kernels::KernelVariant;
use crate::oracle::{BathMode, BathOperatorForm, BornScalingSetup};
use crate::spectrum::EnergySpectrum;
use crate::{CMat, C64};

pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_spec(m: &CMat) -> MatrixSpec {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_spec(spec: &MatrixSpec, field: &str) -> Result<CMat> {
    let n = spec.len();
    if n == 0 {
        return Err(Error::config(field, "matrix is empty"));
    }
    for (i, row) in spec.iter().enumerate() {
        if row.len() != n {
            return Err(Error::config(
                field,
                format!("row {i} has {} entries, expected {n}", row.len()),
            ));
        }
        if row.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::config(field, format!("row {i} has a non-finite entry")));
        }
    }
    Ok(CMat::from_fn(n, n, |i, j| C64::new(spec[i][j][0], spec[i][j][1])))
}

mod beta_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(b: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if b.is_infinite() && *b > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*b)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid inverse temperature `{t}`"))),
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(b: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
            match b {
                Some(b) => super::serialize(b, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(deserialize_with = "super::deserialize")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub levels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub label: String,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub channels: Vec<ChannelConfig>,
    /// Index of each channel's adjoint partner; omitted means all hermitian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjoint: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BathKindConfig {
    Flat {
        rate: f64,
    },
    ThermalOhmic {
        eta: f64,
        cutoff: f64,
        #[serde(with = "beta_serde")]
        beta: f64,
    },
    Lorentzian {
        rate: f64,
        width: f64,
    },
    Tabulated {
        path: PathBuf,
        #[serde(default, with = "beta_serde::option", skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathConfig {
    #[serde(flatten)]
    pub kind: BathKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_matrix: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGridConfig {
    Explicit(Vec<f64>),
    Uniform { start: f64, stop: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    Level(usize),
    Pure(Vec<[f64; 2]>),
    Matrix(MatrixSpec),
    MaximallyMixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum PropagatorConfig {
    Auto,
    Exponential,
    RungeKutta { rtol: f64, atol: f64 },
}

/// Correlation grid for the time-nonlocal equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlocalConfig {
    pub tau_step: f64,
    pub half_len: usize,
    pub tau_mem: f64,
}

/// Exact finite-bath run against the configured system and kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteBathConfig {
    /// Bath operator per coupling channel.
    pub forms: Vec<BathOperatorForm>,
    /// Explicit modes; otherwise an Ohmic discretization from the fields below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<BathMode>>,
    #[serde(default)]
    pub n_modes: usize,
    #[serde(default)]
    pub omega_max: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub cutoff: f64,
    pub n_max: usize,
    #[serde(with = "beta_serde")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleConfig {
    BornScaling(BornScalingSetup),
    FiniteBath(FiniteBathConfig),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<TimeGridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagator: Option<PropagatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlocal: Option<NonlocalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub spectrum: SpectrumConfig,
    pub couplings: CouplingConfig,
    pub bath: BathConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    /// Directory that relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ModelConfig {
    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        if let BathKindConfig::Tabulated { .. } = cfg.bath.kind {
            // surface table errors at load time
            cfg.bath()?;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that does not need the filesystem.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spectrum()?;
        let couplings = self.couplings()?;
        if !matches!(self.bath.kind, BathKindConfig::Tabulated { .. }) {
            self.bath()?;
        }
        let e = &self.experiment;
        if e.variant.is_some() {
            self.variant()?;
        }
        if e.t_grid.is_some() {
            self.t_grid()?;
        }
        if e.initial_state.is_some() {
            self.initial_state(spec.dim())?;
        }
        if let Some(p) = &e.probes {
            if p.is_empty() || p.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                return Err(Error::config("experiment.probes", "probe times must be positive"));
            }
        }
        if e.samples == Some(0) {
            return Err(Error::config("experiment.samples", "must be positive"));
        }
        if let Some(PropagatorConfig::RungeKutta { rtol, atol }) = &e.propagator {
            if !(*rtol > 0.0) || !(*atol > 0.0) {
                return Err(Error::config("experiment.propagator", "tolerances must be positive"));
            }
        }
        if let Some(n) = &e.nonlocal {
            if !(n.tau_step > 0.0) || n.half_len == 0 || !(n.tau_mem >= 0.0) {
                return Err(Error::config(
                    "experiment.nonlocal",
                    "need tau_step > 0, half_len > 0, tau_mem >= 0",
                ));
            }
            if n.tau_mem > n.tau_step * n.half_len as f64 * (1.0 + 1e-12) {
                return Err(Error::config("experiment.nonlocal.tau_mem", "exceeds the grid span"));
            }
        }
        match &e.oracle {
            Some(OracleConfig::FiniteBath(fb)) => {
                if fb.forms.len() != couplings.len() {
                    return Err(Error::config(
                        "experiment.oracle.forms",
                        format!("{} forms for {} channels", fb.forms.len(), couplings.len()),
                    ));
                }
                if fb.modes.is_none() && (fb.n_modes == 0 || !(fb.omega_max > 0.0) || !(fb.cutoff > 0.0) || !(fb.eta >= 0.0)) {
                    return Err(Error::config(
                        "experiment.oracle",
                        "give `modes` or positive n_modes, omega_max, cutoff and eta >= 0",
                    ));
                }
                if !(fb.beta > 0.0) {
                    return Err(Error::config("experiment.oracle.beta", "must be > 0"));
                }
            }
            Some(OracleConfig::BornScaling(s)) => {
                if s.etas.len() < 2 || s.etas.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::config("experiment.oracle.etas", "need at least two positive values"));
                }
                if s.samples < 2 || s.n_modes == 0 || !(s.scaled_time > 0.0) {
                    return Err(Error::config("experiment.oracle", "samples >= 2, n_modes > 0, scaled_time > 0"));
                }
            }
            None => {}
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Result<EnergySpectrum> {
        let s = &self.spectrum;
        let r = match s.eps_deg {
            Some(eps) => EnergySpectrum::with_tolerance(s.levels.clone(), eps),
            None => EnergySpectrum::new(s.levels.clone()),
        };
        r.map_err(|e| Error::config("spectrum", e.to_string()))
    }

    pub fn couplings(&self) -> Result<CouplingChannelSet> {
        let d = self.spectrum.levels.len();
        let c = &self.couplings;
        let mut chans = Vec::with_capacity(c.channels.len());
        for (i, ch) in c.channels.iter().enumerate() {
            let field = format!("couplings.channels[{i}].matrix");
            let m = matrix_from_spec(&ch.matrix, &field)?;
            if m.nrows() != d {
                return Err(Error::config(field, format!("dimension {} != {d} levels", m.nrows())));
            }
            chans.push((ch.label.clone(), m));
        }
        let adjoint = match &c.adjoint {
            Some(a) => a.clone(),
            None => (0..chans.len()).collect(),
        };
        if adjoint.len() != chans.len() {
            return Err(Error::config(
                "couplings.adjoint",
                format!("{} entries for {} channels", adjoint.len(), chans.len()),
            ));
        }
        CouplingChannelSet::new(chans, adjoint, d).map_err(|e| Error::config("couplings", e.to_string()))
    }

    pub fn bath(&self) -> Result<BathSpectrum> {
        let n = self.couplings.channels.len();
        let b = match &self.bath.kind {
            BathKindConfig::Flat { rate } => BathSpectrum::flat(n, *rate),
            BathKindConfig::ThermalOhmic { eta, cutoff, beta } => {
                BathSpectrum::thermal_ohmic(n, *eta, *cutoff, *beta)
            }
            BathKindConfig::Lorentzian { rate, width } => BathSpectrum::lorentzian(n, *rate, *width),
            BathKindConfig::Tabulated { path, beta } => {
                let full = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let table = TabulatedSpectrum::from_csv_path(&full, *beta).map_err(|e| match e {
                    Error::Table { row, message } => Error::config(
                        "bath.path",
                        format!("{}: row {row}: {message}", full.display()),
                    ),
                    other => Error::config("bath.path", format!("{}: {other}", full.display())),
                })?;
                if table.channels() != n {
                    return Err(Error::config(
                        "bath.path",
                        format!("table has {} channels, couplings have {n}", table.channels()),
                    ));
                }
                Ok(BathSpectrum::tabulated(table))
            }
        }
        .map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("bath", other.to_string()),
        })?;
        match &self.bath.channel_matrix {
            Some(m) => {
                let m = matrix_from_spec(m, "bath.channel_matrix")?;
                b.with_channel_matrix(m)
                    .map_err(|e| Error::config("bath.channel_matrix", e.to_string()))
            }
            None => Ok(b),
        }
    }

    pub fn variant(&self) -> Result<KernelVariant> {
        match &self.experiment.variant {
            Some(v) => v
                .parse()
                .map_err(|e: Error| Error::config("experiment.variant", e.to_string())),
            None => Ok(KernelVariant::Lindblad),
        }
    }

    pub fn t_grid(&self) -> Result<Vec<f64>> {
        let field = "experiment.t_grid";
        let grid = match &self.experiment.t_grid {
            None => return Err(Error::config(field, "missing")),
            Some(TimeGridConfig::Explicit(v)) => v.clone(),
            Some(TimeGridConfig::Uniform { start, stop, points }) => {
                if *points < 2 || !(stop > start) {
                    return Err(Error::config(field, "uniform grid needs points >= 2 and stop > start"));
                }
                (0..*points)
                    .map(|i| start + (stop - start) * i as f64 / (*points - 1) as f64)
                    .collect()
            }
        };
        crate::dynamics::validate_grid(&grid).map_err(|e| Error::config(field, e.to_string()))?;
        Ok(grid)
    }

    pub fn initial_state(&self, d: usize) -> Result<DensityMatrix> {
        let field = "experiment.initial_state";
        let r = match &self.experiment.initial_state {
            None => return Err(Error::config(field, "missing")),
            Some(InitialStateConfig::Level(n)) => DensityMatrix::level(d, *n),
            Some(InitialStateConfig::Pure(v)) => {
                if v.len() != d {
                    return Err(Error::config(field, format!("{} amplitudes for dimension {d}", v.len())));
                }
                let psi = crate::CVec::from_iterator(d, v.iter().map(|z| C64::new(z[0], z[1])));
                let n = psi.norm();
                if !(n > 0.0) || !n.is_finite() {
                    return Err(Error::config(field, "state vector has zero norm"));
                }
                DensityMatrix::pure(&(psi / C64::new(n, 0.0)))
            }
            Some(InitialStateConfig::Matrix(m)) => {
                let m = matrix_from_spec(m, field)?;
                if m.nrows() != d {
                    return Err(Error::config(field, format!("dimension {} != {d}", m.nrows())));
                }
                DensityMatrix::new(m)
            }
            Some(InitialStateConfig::MaximallyMixed) => Ok(DensityMatrix::maximally_mixed(d)),
        };
        r.map_err(|e| Error::config(field, e.to_string()))
    }

    pub fn propagator(&self) -> Propagator {
        match &self.experiment.propagator {
            None | Some(PropagatorConfig::Auto) => Propagator::Auto,
            Some(PropagatorConfig::Exponential) => Propagator::Exponential,
            Some(PropagatorConfig::RungeKutta { rtol, atol }) => Propagator::RungeKutta {
                rtol: *rtol,
                atol: *atol,
            },
        }
    }

    pub fn seed(&self) -> u64 {
        self.experiment.seed.unwrap_or(0)
    }
}

/// Qubit `[-ω0/2, ω0/2]` with `σ⁺`/`σ⁻` channels.
pub fn qubit_config(omega0: f64, bath: BathKindConfig) -> ModelConfig {
    let up = CMat::from_fn(2, 2, |i, j| C64::new(if (i, j) == (1, 0) { 1.0 } else { 0.0 }, 0.0));
    ModelConfig {
        spectrum: SpectrumConfig {
            levels: vec![-0.5 * omega0, 0.5 * omega0],
            eps_deg: None,
        },
        couplings: CouplingConfig {
            channels: vec![
                ChannelConfig {
                    label: "sigma_plus".into(),
                    matrix: matrix_to_spec(&up),
                },
                ChannelConfig {
                    label: "sigma_minus".into(),
                    matrix: matrix_to_spec(&up.adjoint()),
                },
            ],
            adjoint: Some(vec![1, 0]),
        },
        bath: BathConfig {
            kind: bath,
            channel_matrix: None,
        },
        experiment: ExperimentConfig::default(),
        base_dir: None,
    }
}

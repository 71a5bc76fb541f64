//! Bath correlation spectra.
//!
//! A [`BathSpectrum`] evaluates the rate matrix `γ̃^{αβ}(ω) = ⟨B^{α†} B^β⟩(ω)`
//! for real `ω`, with the Fourier convention `f̃(ω) = ∫dτ e^{iωτ} f(τ)`.
//! The kernels need `D̃^{αβ}(ω) = ⟨B^α B^β⟩(ω)`; since `B^{α†} = B^{ᾱ}` for a
//! hermitian coupling, `D̃^{αβ} = γ̃^{ᾱβ}` and [`BathSpectrum::correlation`]
//! performs that re-indexing given the coupling's adjoint map.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rustfft::FftPlanner;

use crate::density::hermitize;
use crate::error::{Error, Result};
use crate::{CMat, C64};

/// User-supplied spectrum sampled on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedSpectrum {
    omegas: Vec<f64>,
    values: Vec<CMat>,
    beta: Option<f64>,
}

impl TabulatedSpectrum {
    pub fn new(omegas: Vec<f64>, values: Vec<CMat>, beta: Option<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidBath("tabulated spectrum has no rows".into()));
        }
        if omegas.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: omegas.len(),
                found: values.len(),
                context: "tabulated spectrum rows".into(),
            });
        }
        let c = values[0].nrows();
        for (i, v) in values.iter().enumerate() {
            if v.nrows() != c || v.ncols() != c {
                return Err(Error::Table {
                    row: i,
                    message: "inconsistent channel count".into(),
                });
            }
        }
        for i in 1..omegas.len() {
            if !(omegas[i] > omegas[i - 1]) {
                return Err(Error::Table {
                    row: i,
                    message: format!("omega {} is not strictly increasing", omegas[i]),
                });
            }
        }
        if let Some(b) = beta {
            if !(b >= 0.0) {
                return Err(Error::InvalidBath(format!("declared beta {b} is negative")));
            }
        }
        Ok(Self {
            omegas,
            values,
            beta,
        })
    }

    /// Reads the CSV layout `omega, re_0_0, im_0_0, re_0_1, im_0_1, ...`
    /// (channel pairs row-major). Row numbers in errors are file line numbers.
    pub fn from_csv_reader<R: Read>(reader: R, beta: Option<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Table {
                row: 1,
                message: e.to_string(),
            })?
            .clone();
        let ncols = header.len();
        if ncols < 3 || (ncols - 1) % 2 != 0 {
            return Err(Error::Table {
                row: 1,
                message: format!("expected omega plus re/im column pairs, found {ncols} columns"),
            });
        }
        let pairs = (ncols - 1) / 2;
        let c = (pairs as f64).sqrt().round() as usize;
        if c * c != pairs {
            return Err(Error::Table {
                row: 1,
                message: format!("{pairs} channel pairs is not a square number"),
            });
        }
        if &header[0] != "omega" {
            return Err(Error::Table {
                row: 1,
                message: format!("first column must be `omega`, found `{}`", &header[0]),
            });
        }
        for a in 0..c {
            for b in 0..c {
                let k = 1 + 2 * (a * c + b);
                let want_re = format!("re_{a}_{b}");
                let want_im = format!("im_{a}_{b}");
                if header[k] != want_re || header[k + 1] != want_im {
                    return Err(Error::Table {
                        row: 1,
                        message: format!(
                            "columns {k}/{} must be `{want_re}`/`{want_im}`",
                            k + 1
                        ),
                    });
                }
            }
        }
        let mut omegas = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Table {
                row: line,
                message: e.to_string(),
            })?;
            if rec.len() != ncols {
                return Err(Error::Table {
                    row: line,
                    message: format!("expected {ncols} fields, found {}", rec.len()),
                });
            }
            let mut nums = Vec::with_capacity(ncols);
            for (k, field) in rec.iter().enumerate() {
                let x: f64 = field.parse().map_err(|_| Error::Table {
                    row: line,
                    message: format!("column {k}: `{field}` is not a number"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Table {
                        row: line,
                        message: format!("column {k} is not finite"),
                    });
                }
                nums.push(x);
            }
            omegas.push(nums[0]);
            values.push(CMat::from_fn(c, c, |a, b| {
                let k = 1 + 2 * (a * c + b);
                C64::new(nums[k], nums[k + 1])
            }));
        }
        Self::new(omegas, values, beta).map_err(|e| match e {
            Error::Table { row, message } => Error::Table {
                row: row + 2,
                message,
            },
            other => other,
        })
    }

    pub fn from_csv_path(path: &Path, beta: Option<f64>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(f, beta)
    }

    pub fn to_csv(&self) -> String {
        let c = self.channels();
        let mut out = String::from("omega");
        for a in 0..c {
            for b in 0..c {
                out.push_str(&format!(",re_{a}_{b},im_{a}_{b}"));
            }
        }
        out.push('\n');
        for (w, m) in self.omegas.iter().zip(&self.values) {
            out.push_str(&format!("{w:.16e}"));
            for a in 0..c {
                for b in 0..c {
                    out.push_str(&format!(",{:.16e},{:.16e}", m[(a, b)].re, m[(a, b)].im));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn channels(&self) -> usize {
        self.values[0].nrows()
    }

    /// Linear interpolation; zero outside the tabulated support.
    pub fn eval(&self, omega: f64) -> CMat {
        let c = self.channels();
        let n = self.omegas.len();
        if n == 1 {
            return if omega == self.omegas[0] {
                self.values[0].clone()
            } else {
                CMat::zeros(c, c)
            };
        }
        if omega < self.omegas[0] || omega > self.omegas[n - 1] {
            return CMat::zeros(c, c);
        }
        let i = self.omegas.partition_point(|&w| w <= omega).clamp(1, n - 1);
        let (w0, w1) = (self.omegas[i - 1], self.omegas[i]);
        let t = (omega - w0) / (w1 - w0);
        &self.values[i - 1] * C64::new(1.0 - t, 0.0) + &self.values[i] * C64::new(t, 0.0)
    }

    fn max_abs_omega(&self) -> f64 {
        self.omegas.iter().fold(0.0f64, |m, w| m.max(w.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumKind {
    /// `γ̃(ω) = Γ`; infinite-temperature white noise.
    Flat { rate: f64 },
    /// `γ̃(ω) = 2η|ω| e^{-|ω|/ω_c} (n_B(|ω|) + [ω > 0])`.
    ThermalOhmic { eta: f64, cutoff: f64, beta: f64 },
    /// `γ̃(ω) = Γλ² / (ω² + λ²)`, i.e. `γ(τ) = (Γλ/2) e^{-λ|τ|}`.
    Lorentzian { rate: f64, width: f64 },
    Tabulated(TabulatedSpectrum),
}

/// Matrix-valued rate function `γ̃^{αβ}(ω)`.
///
/// Parametric kinds are a scalar profile times a constant hermitian PSD
/// channel matrix (identity by default).
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpectrum {
    channels: usize,
    kind: SpectrumKind,
    channel_matrix: CMat,
}

fn check_param(name: &str, value: f64, strictly_positive: bool) -> Result<()> {
    let ok = if strictly_positive {
        value > 0.0
    } else {
        value >= 0.0
    };
    if !ok || value.is_nan() {
        let rel = if strictly_positive { "> 0" } else { ">= 0" };
        return Err(Error::InvalidBath(format!("{name} must be {rel}, got {value}")));
    }
    Ok(())
}

impl BathSpectrum {
    pub fn flat(channels: usize, rate: f64) -> Result<Self> {
        check_param("rate", rate, false)?;
        if !rate.is_finite() {
            return Err(Error::InvalidBath("rate must be finite".into()));
        }
        Ok(Self::parametric(channels, SpectrumKind::Flat { rate }))
    }

    /// `beta = f64::INFINITY` selects the zero-temperature bath.
    pub fn thermal_ohmic(channels: usize, eta: f64, cutoff: f64, beta: f64) -> Result<Self> {
        check_param("eta", eta, false)?;
        check_param("cutoff", cutoff, true)?;
        check_param("beta", beta, true)?;
        if !eta.is_finite() || !cutoff.is_finite() {
            return Err(Error::InvalidBath("eta and cutoff must be finite".into()));
        }
        Ok(Self::parametric(
            channels,
            SpectrumKind::ThermalOhmic { eta, cutoff, beta },
        ))
    }

    pub fn lorentzian(channels: usize, rate: f64, width: f64) -> Result<Self> {
        check_param("rate", rate, false)?;
        check_param("width", width, true)?;
        if !rate.is_finite() || !width.is_finite() {
            return Err(Error::InvalidBath("rate and width must be finite".into()));
        }
        Ok(Self::parametric(
            channels,
            SpectrumKind::Lorentzian { rate, width },
        ))
    }

    pub fn tabulated(table: TabulatedSpectrum) -> Self {
        let c = table.channels();
        Self {
            channels: c,
            kind: SpectrumKind::Tabulated(table),
            channel_matrix: CMat::identity(c, c),
        }
    }

    fn parametric(channels: usize, kind: SpectrumKind) -> Self {
        Self {
            channels,
            kind,
            channel_matrix: CMat::identity(channels, channels),
        }
    }

    /// Replaces the channel matrix of a parametric spectrum. The matrix must
    /// be hermitian and positive semidefinite.
    pub fn with_channel_matrix(mut self, m: CMat) -> Result<Self> {
        if matches!(self.kind, SpectrumKind::Tabulated(_)) {
            return Err(Error::InvalidBath(
                "tabulated spectra carry their own channel structure".into(),
            ));
        }
        if m.nrows() != self.channels || m.ncols() != self.channels {
            return Err(Error::DimensionMismatch {
                expected: self.channels,
                found: m.nrows(),
                context: "channel matrix".into(),
            });
        }
        if (&m - m.adjoint()).camax() > 1e-12 * (1.0 + m.camax()) {
            return Err(Error::InvalidBath("channel matrix is not hermitian".into()));
        }
        let h = hermitize(&m);
        let min = SymmetricEigen::new(h.clone()).eigenvalues.min();
        if min < -1e-12 * (1.0 + h.camax()) {
            return Err(Error::InvalidBath(format!(
                "channel matrix is not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        self.channel_matrix = h;
        Ok(self)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn kind(&self) -> &SpectrumKind {
        &self.kind
    }

    pub fn channel_matrix(&self) -> &CMat {
        &self.channel_matrix
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SpectrumKind::Flat { .. } => "flat",
            SpectrumKind::ThermalOhmic { .. } => "thermal_ohmic",
            SpectrumKind::Lorentzian { .. } => "lorentzian",
            SpectrumKind::Tabulated(_) => "tabulated",
        }
    }

    /// Stable textual identifier used in provenance records.
    pub fn id(&self) -> String {
        let params = match &self.kind {
            SpectrumKind::Flat { rate } => format!("rate={rate:.16e}"),
            SpectrumKind::ThermalOhmic { eta, cutoff, beta } => {
                format!("eta={eta:.16e},cutoff={cutoff:.16e},beta={beta:.16e}")
            }
            SpectrumKind::Lorentzian { rate, width } => {
                format!("rate={rate:.16e},width={width:.16e}")
            }
            SpectrumKind::Tabulated(t) => format!("rows={},beta={:?}", t.omegas.len(), t.beta),
        };
        format!("{}({params};channels={})", self.kind_name(), self.channels)
    }

    /// Inverse temperature when the spectrum is thermal; flat spectra use the
    /// `β = 0` convention.
    pub fn inverse_temperature(&self) -> Option<f64> {
        match &self.kind {
            SpectrumKind::Flat { .. } => Some(0.0),
            SpectrumKind::ThermalOhmic { beta, .. } => Some(*beta),
            SpectrumKind::Lorentzian { .. } => None,
            SpectrumKind::Tabulated(t) => t.beta,
        }
    }

    /// Frequency scale the time grid has to resolve.
    pub fn bandwidth(&self) -> f64 {
        match &self.kind {
            SpectrumKind::Flat { .. } => 0.0,
            SpectrumKind::ThermalOhmic { cutoff, .. } => *cutoff,
            SpectrumKind::Lorentzian { width, .. } => *width,
            SpectrumKind::Tabulated(t) => t.max_abs_omega(),
        }
    }

    fn profile(&self, omega: f64) -> f64 {
        match &self.kind {
            SpectrumKind::Flat { rate } => *rate,
            SpectrumKind::ThermalOhmic { eta, cutoff, beta } => {
                ohmic_profile(*eta, *cutoff, *beta, omega)
            }
            SpectrumKind::Lorentzian { rate, width } => {
                rate * width * width / (omega * omega + width * width)
            }
            SpectrumKind::Tabulated(_) => unreachable!(),
        }
    }

    /// `γ̃^{αβ}(ω)`.
    pub fn gamma(&self, omega: f64) -> CMat {
        match &self.kind {
            SpectrumKind::Tabulated(t) => t.eval(omega),
            _ => &self.channel_matrix * C64::new(self.profile(omega), 0.0),
        }
    }

    /// `D̃^{αβ}(ω) = γ̃^{ᾱβ}(ω)` for the given adjoint map.
    pub fn correlation(&self, omega: f64, adjoint: &[usize]) -> CMat {
        let g = self.gamma(omega);
        reindex_adjoint(&g, adjoint)
    }

    pub fn check_channels(&self, n: usize) -> Result<()> {
        if n != self.channels {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.channels,
                context: "bath channels vs coupling channels".into(),
            });
        }
        Ok(())
    }

    /// `max_ω max_{αβ} |γ̃^{αβ}(ω) - conj(γ̃^{βα}(ω))|`.
    pub fn hermiticity_residual(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&w| {
                let g = self.gamma(w);
                (&g - g.adjoint()).camax()
            })
            .fold(0.0, f64::max)
    }
}

/// Row `α` of the result is row `ᾱ` of `g`.
pub(crate) fn reindex_adjoint(g: &CMat, adjoint: &[usize]) -> CMat {
    CMat::from_fn(g.nrows(), g.ncols(), |a, b| g[(adjoint[a], b)])
}

fn ohmic_profile(eta: f64, cutoff: f64, beta: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        return if beta.is_finite() { 2.0 * eta / beta } else { 0.0 };
    }
    let w = omega.abs();
    let base = 2.0 * eta * w * (-w / cutoff).exp();
    if beta.is_infinite() {
        return if omega > 0.0 { base } else { 0.0 };
    }
    let x = beta * w;
    // n_B + 1 = 1 / (1 - e^{-x}),  n_B = e^{-x} / (1 - e^{-x})
    let denom = -(-x).exp_m1();
    if omega > 0.0 {
        base / denom
    } else {
        base * (-x).exp() / denom
    }
}

pub fn flat_spectrum(channels: usize, rate: f64) -> Result<BathSpectrum> {
    BathSpectrum::flat(channels, rate)
}

pub fn thermal_ohmic_spectrum(
    channels: usize,
    eta: f64,
    cutoff: f64,
    beta: f64,
) -> Result<BathSpectrum> {
    BathSpectrum::thermal_ohmic(channels, eta, cutoff, beta)
}

/// `max_ω ‖γ̃(-|ω|) - e^{-β|ω|} γ̃(|ω|)‖_max` over the grid.
pub fn kms_residual(spec: &BathSpectrum, grid: &[f64]) -> Result<f64> {
    let beta = spec.inverse_temperature().ok_or_else(|| {
        Error::NotThermal(format!("{} spectrum has no inverse temperature", spec.kind_name()))
    })?;
    let mut worst = 0.0f64;
    for &w in grid {
        let w = w.abs();
        let factor = if beta.is_infinite() {
            if w > 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            (-beta * w).exp()
        };
        let r = (spec.gamma(-w) - spec.gamma(w) * C64::new(factor, 0.0)).camax();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Smallest eigenvalue of `γ̃(ω)` over the grid and where it occurs.
pub fn positivity_check(spec: &BathSpectrum, grid: &[f64]) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    for &w in grid {
        let m = SymmetricEigen::new(hermitize(&spec.gamma(w))).eigenvalues.min();
        if m < best.0 {
            best = (m, w);
        }
    }
    best
}

/// Oversampling of the frequency quadrature relative to the time grid.
const OVERSAMPLE: usize = 4;

/// Time-domain correlation `γ^{αβ}(τ) = ⟨B^{α†}(τ) B^β(0)⟩` on a symmetric
/// uniform grid `τ_j = j h`, `|j| <= n`.
///
/// Values come from the inverse transform `(1/2π) ∫dω e^{-iωτ} γ̃(ω)` over the
/// Nyquist band `|ω| <= π/h`, evaluated with the trapezoid rule on a
/// frequency grid oversampled four times and summed with an FFT.
#[derive(Debug, Clone)]
pub struct TimeCorrelation {
    step: f64,
    half_len: usize,
    tau_mem: f64,
    values: Vec<CMat>,
    envelope: f64,
}

impl TimeCorrelation {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn half_len(&self) -> usize {
        self.half_len
    }

    pub fn channels(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn tau(&self, j: isize) -> f64 {
        j as f64 * self.step
    }

    pub fn tau_mem(&self) -> f64 {
        self.tau_mem
    }

    /// Number of grid steps inside the memory window.
    pub fn memory_steps(&self) -> usize {
        ((self.tau_mem / self.step) + 1e-9).floor() as usize
    }

    /// `γ(τ_j)`.
    pub fn at(&self, j: isize) -> &CMat {
        &self.values[(j + self.half_len as isize) as usize]
    }

    /// `D^{αβ}(τ_j) = ⟨B^α(τ_j) B^β(0)⟩`.
    pub fn correlation_at(&self, j: isize, adjoint: &[usize]) -> CMat {
        reindex_adjoint(self.at(j), adjoint)
    }

    /// Largest entry magnitude beyond the memory cutoff.
    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    /// Forward trapezoid transform `h Σ_j w_j γ(τ_j) e^{iωτ_j}`.
    pub fn spectrum_at(&self, omega: f64) -> CMat {
        let c = self.channels();
        let n = self.half_len as isize;
        let mut acc = CMat::zeros(c, c);
        for j in -n..=n {
            let w = if j.abs() == n { 0.5 } else { 1.0 };
            let phase = C64::from_polar(w * self.step, omega * self.tau(j));
            acc += self.at(j) * phase;
        }
        acc
    }
}

pub fn time_correlation(
    spec: &BathSpectrum,
    step: f64,
    half_len: usize,
    tau_mem: f64,
) -> Result<TimeCorrelation> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidGrid(format!("tau step must be positive, got {step}")));
    }
    if half_len == 0 {
        return Err(Error::InvalidGrid("tau grid needs at least one step".into()));
    }
    let span = half_len as f64 * step;
    if !(tau_mem >= 0.0) || tau_mem > span * (1.0 + 1e-12) {
        return Err(Error::InvalidGrid(format!(
            "memory cutoff {tau_mem} outside the grid span {span}"
        )));
    }
    let nyquist = PI / step;
    let bw = spec.bandwidth();
    if nyquist < 2.0 * bw {
        return Err(Error::Nyquist(format!(
            "Nyquist frequency {nyquist} does not resolve bath bandwidth {bw} (need >= {})",
            2.0 * bw
        )));
    }

    let c = spec.channels();
    let n_tau = 2 * half_len + 1;
    let m = OVERSAMPLE * n_tau;
    let d_omega = 2.0 * nyquist / m as f64;
    let samples: Vec<CMat> = (0..m)
        .map(|k| {
            if k == 0 {
                (spec.gamma(-nyquist) + spec.gamma(nyquist)) * C64::new(0.5, 0.0)
            } else {
                spec.gamma(-nyquist + k as f64 * d_omega)
            }
        })
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let fft: Arc<dyn rustfft::Fft<f64>> = fft;
    let mut values = vec![CMat::zeros(c, c); n_tau];
    let norm = d_omega / (2.0 * PI);
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for a in 0..c {
        for b in 0..c {
            for (k, s) in samples.iter().enumerate() {
                buf[k] = s[(a, b)];
            }
            fft.process(&mut buf);
            for j in -(half_len as isize)..=(half_len as isize) {
                let idx = j.rem_euclid(m as isize) as usize;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                values[(j + half_len as isize) as usize][(a, b)] = buf[idx] * (sign * norm);
            }
        }
    }

    let mut envelope = 0.0f64;
    for (i, v) in values.iter().enumerate() {
        let tau = (i as isize - half_len as isize) as f64 * step;
        if tau.abs() > tau_mem * (1.0 + 1e-12) {
            envelope = envelope.max(v.camax());
        }
    }
    Ok(TimeCorrelation {
        step,
        half_len,
        tau_mem,
        values,
        envelope,
    })
}

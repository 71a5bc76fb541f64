//! Propagation of the reduced density matrix, steady states and the
//! population/coherence block analysis.

use std::collections::HashMap;

use nalgebra::linalg::Schur;
use serde::Serialize;

use crate::bath::TimeCorrelation;
use crate::coupling::CouplingChannelSet;
use crate::density::{hermiticity_residual, hermitize, min_eigenvalue, DensityMatrix};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelVariant};
use crate::spectrum::EnergySpectrum;
use crate::superop::{unvectorize, vectorize, SuperIndex, Superoperator};
use crate::{CMat, CVec, C64};

/// Largest dimension propagated with the dense matrix exponential by default.
pub const EXPM_MAX_DIM: usize = 16;

/// `(L_H ρ)_{pp'} = -i E_{pp'} ρ_{pp'}`.
pub fn unitary_part(spec: &EnergySpectrum) -> Superoperator {
    let d = spec.dim();
    let mut l = Superoperator::zeros(d);
    for p in 0..d {
        for p2 in 0..d {
            let w = spec.bohr(p, p2);
            if w != 0.0 {
                l.add_to(p, p2, p, p2, C64::new(0.0, -w));
            }
        }
    }
    l
}

/// `L = L_H + K`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    variant: Option<KernelVariant>,
    kernel: Superoperator,
    full: Superoperator,
}

pub fn build_liouvillian(spec: &EnergySpectrum, kernel: &Superoperator) -> Result<Liouvillian> {
    if kernel.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: kernel.dim(),
            context: "kernel vs spectrum".into(),
        });
    }
    let full = unitary_part(spec).plus(kernel)?;
    Ok(Liouvillian {
        variant: None,
        kernel: kernel.clone(),
        full,
    })
}

pub(crate) fn complex_eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 100_000)
        .ok_or_else(|| Error::NonConvergence("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut ev: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

impl Liouvillian {
    pub fn from_kernel(spec: &EnergySpectrum, kernel: &Kernel) -> Result<Self> {
        let mut l = build_liouvillian(spec, &kernel.superop)?;
        l.variant = Some(kernel.variant);
        Ok(l)
    }

    pub fn dim(&self) -> usize {
        self.full.dim()
    }

    pub fn variant(&self) -> Option<KernelVariant> {
        self.variant
    }

    pub fn kernel(&self) -> &Superoperator {
        &self.kernel
    }

    pub fn superop(&self) -> &Superoperator {
        &self.full
    }

    pub fn matrix(&self) -> &CMat {
        self.full.matrix()
    }

    pub fn trace_condition_residual(&self) -> f64 {
        self.full.trace_condition_residual()
    }

    /// Eigenvalues sorted by decreasing real part.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        complex_eigenvalues(self.matrix())
    }

    /// Eigenvalues of the block acting on coherences `ρ_{pp'}`, `p != p'`.
    pub fn coherence_block_eigenvalues(&self) -> Result<Vec<C64>> {
        let d = self.dim();
        let idx: Vec<usize> = (0..d * d)
            .filter(|&i| !SuperIndex::from_flat(i, d).is_population())
            .collect();
        let m = self.matrix();
        let block = CMat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
        complex_eigenvalues(&block)
    }

    /// Largest real part over the spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Time series of states with per-point diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<CMat>,
    pub trace_drift: Vec<f64>,
    pub hermiticity: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
}

impl Trajectory {
    pub fn from_states(times: Vec<f64>, states: Vec<CMat>) -> Self {
        let trace_drift = states
            .iter()
            .map(|s| (s.trace() - C64::new(1.0, 0.0)).norm())
            .collect();
        let hermiticity = states.iter().map(hermiticity_residual).collect();
        let min_eigenvalue = states.iter().map(min_eigenvalue).collect();
        Self {
            times,
            states,
            trace_drift,
            hermiticity,
            min_eigenvalue,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map(|s| s.nrows()).unwrap_or(0)
    }

    pub fn final_state(&self) -> Option<&CMat> {
        self.states.last()
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.trace_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hermiticity_residual(&self) -> f64 {
        self.hermiticity.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_state_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_t ½‖ρ_a(t) - ρ_b(t)‖₁` on a shared grid.
    pub fn max_trace_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
                context: "trajectory lengths".into(),
            });
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| crate::density::trace_distance(a, b))
            .fold(0.0, f64::max))
    }
}

pub fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidGrid("time grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("time grid has non-finite entries".into()));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidGrid(format!(
                "time grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn check_finite(v: &CVec, time: f64) -> Result<()> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { time });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propagator {
    /// Matrix exponential up to [`EXPM_MAX_DIM`], Runge-Kutta beyond.
    Auto,
    /// `exp(L Δt)` by scaling and squaring, cached per distinct step.
    Exponential,
    /// Adaptive Dormand-Prince 5(4).
    RungeKutta { rtol: f64, atol: f64 },
}

impl Propagator {
    pub const DEFAULT_RK: Propagator = Propagator::RungeKutta {
        rtol: 1e-11,
        atol: 1e-13,
    };
}

/// `ρ(t) = exp(L (t - t_0)) ρ_0` on the grid; `ρ_0` is the state at `t_grid[0]`.
pub fn evolve_markov(l: &Liouvillian, rho0: &DensityMatrix, t_grid: &[f64]) -> Result<Trajectory> {
    evolve_markov_with(l, rho0, t_grid, Propagator::Auto)
}

pub fn evolve_markov_with(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    method: Propagator,
) -> Result<Trajectory> {
    validate_grid(t_grid)?;
    let d = l.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
            context: "initial state".into(),
        });
    }
    let method = match method {
        Propagator::Auto if d <= EXPM_MAX_DIM => Propagator::Exponential,
        Propagator::Auto => Propagator::DEFAULT_RK,
        m => m,
    };
    let mut v = vectorize(rho0.matrix());
    let mut states = vec![rho0.matrix().clone()];
    match method {
        Propagator::Exponential => {
            let mut cache: HashMap<u64, CMat> = HashMap::new();
            for w in t_grid.windows(2) {
                let dt = w[1] - w[0];
                let prop = cache
                    .entry(dt.to_bits())
                    .or_insert_with(|| (l.matrix() * C64::new(dt, 0.0)).exp());
                v = &*prop * &v;
                check_finite(&v, w[0])?;
                states.push(unvectorize(&v, d));
            }
        }
        Propagator::RungeKutta { rtol, atol } => {
            let mut rk = Dopri5::new(l.matrix(), rtol, atol);
            for w in t_grid.windows(2) {
                v = rk.advance(v, w[0], w[1])?;
                states.push(unvectorize(&v, d));
            }
        }
        Propagator::Auto => unreachable!(),
    }
    Ok(Trajectory::from_states(t_grid.to_vec(), states))
}

/// Dormand-Prince 5(4) for the linear system `dv/dt = L v`.
struct Dopri5<'a> {
    l: &'a CMat,
    rtol: f64,
    atol: f64,
    h: Option<f64>,
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl<'a> Dopri5<'a> {
    fn new(l: &'a CMat, rtol: f64, atol: f64) -> Self {
        Self {
            l,
            rtol,
            atol,
            h: None,
        }
    }

    fn advance(&mut self, mut y: CVec, t0: f64, t1: f64) -> Result<CVec> {
        let mut t = t0;
        let norm_l = self.l.iter().fold(0.0f64, |m, z| m.max(z.norm())) * self.l.nrows() as f64;
        let mut h = self
            .h
            .unwrap_or_else(|| if norm_l > 0.0 { 0.1 / norm_l } else { t1 - t0 });
        let mut k: Vec<CVec> = Vec::with_capacity(7);
        while t < t1 {
            let last = t + h >= t1;
            let step = if last { t1 - t } else { h };
            if step <= f64::EPSILON * t.abs().max(1.0) {
                if last {
                    break;
                }
                return Err(Error::StepUnderflow { time: t });
            }
            k.clear();
            for s in 0..7 {
                let mut arg = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = DP_A[s][j];
                    if a != 0.0 {
                        arg.axpy(C64::new(step * a, 0.0), kj, C64::new(1.0, 0.0));
                    }
                }
                k.push(self.l * arg);
            }
            let mut y5 = y.clone();
            let mut err = CVec::zeros(y.len());
            for s in 0..7 {
                y5.axpy(C64::new(step * DP_B5[s], 0.0), &k[s], C64::new(1.0, 0.0));
                err.axpy(
                    C64::new(step * (DP_B5[s] - DP_B4[s]), 0.0),
                    &k[s],
                    C64::new(1.0, 0.0),
                );
            }
            let mut acc = 0.0;
            for i in 0..y.len() {
                let sc = self.atol + self.rtol * y[i].norm().max(y5[i].norm());
                acc += (err[i].norm() / sc).powi(2);
            }
            let en = (acc / y.len() as f64).sqrt();
            if !en.is_finite() {
                return Err(Error::NonFinite { time: t });
            }
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            if en <= 1.0 {
                check_finite(&y5, t)?;
                t = if last { t1 } else { t + step };
                y = y5;
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * factor.min(1.0);
            }
        }
        self.h = Some(h);
        Ok(y)
    }
}

/// Time-domain second-order kernel at lag `τ_j`, energy basis:
///
/// ```text
/// K(τ)_{pp',qq'} = Σ_{αβ} [ -δ_{p'q'} Σ_l S^α_pl S^β_lq e^{iE_{q'l}τ} D^{αβ}(τ)
///                          -δ_{pq}   Σ_l S^α_q'l S^β_lp' e^{-iE_{ql}τ} D^{αβ}(-τ)
///                          + S^β_pq S^α_q'p' (e^{-iE_{qp'}τ} D^{αβ}(-τ) + e^{iE_{q'p}τ} D^{αβ}(τ)) ]
/// ```
pub fn memory_kernel_slice(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    tc: &TimeCorrelation,
    j: usize,
) -> Superoperator {
    let d = spec.dim();
    let s = couplings.matrices();
    let adj = couplings.adjoint_map();
    let tau = tc.tau(j as isize);
    let dp = tc.correlation_at(j as isize, adj);
    let dm = tc.correlation_at(-(j as isize), adj);
    let phase = |w: f64| C64::from_polar(1.0, w * tau);
    let contract = |i: usize, jj: usize, k: usize, l: usize, m: &CMat| {
        let mut acc = C64::new(0.0, 0.0);
        for (a, sa) in s.iter().enumerate() {
            for (b, sb) in s.iter().enumerate() {
                acc += sa[(i, jj)] * sb[(k, l)] * m[(a, b)];
            }
        }
        acc
    };
    let mut k = Superoperator::zeros(d);
    for p in 0..d {
        for q in 0..d {
            for q2 in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..d {
                    acc += contract(p, l, l, q, &dp) * phase(spec.bohr(q2, l));
                }
                k.add_to(p, q2, q, q2, -acc);
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..d {
                    acc += contract(q2, l, l, p, &dm) * phase(-spec.bohr(q, l));
                }
                // δ_{pq} term: out (q, p), in (q, q2) with p' = p
                k.add_to(q, p, q, q2, -acc);
            }
        }
    }
    for p in 0..d {
        for p2 in 0..d {
            for q in 0..d {
                for q2 in 0..d {
                    let v = contract(q2, p2, p, q, &dm) * phase(-spec.bohr(q, p2))
                        + contract(q2, p2, p, q, &dp) * phase(spec.bohr(q2, p));
                    k.add_to(p, p2, q, q2, v);
                }
            }
        }
    }
    k
}

/// Integrates `dρ/dt = -i[H_S, ρ] + ∫_0^{min(τ_mem, t - t_i)} dτ K(τ) ρ(t - τ)`
/// with the implicit trapezoid rule in time and trapezoid weights over the
/// memory. Output times must lie on multiples of the correlation step from
/// `t_grid[0] = t_i`.
///
/// At early times the memory integral is truncated at `t_i`. The `τ = 0`
/// node always carries weight ½, which is the right limit of the truncated
/// integral at `t = t_i`.
pub fn evolve_nonlocal(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    tc: &TimeCorrelation,
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<Trajectory> {
    validate_grid(t_grid)?;
    couplings.check_dim(spec)?;
    if tc.channels() != couplings.len() {
        return Err(Error::DimensionMismatch {
            expected: couplings.len(),
            found: tc.channels(),
            context: "correlation channels".into(),
        });
    }
    let d = spec.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
            context: "initial state".into(),
        });
    }
    let h = tc.step();
    let nyquist = std::f64::consts::PI / h;
    if nyquist < 2.0 * spec.max_bohr() {
        return Err(Error::Nyquist(format!(
            "step {h} does not resolve Bohr frequency {}",
            spec.max_bohr()
        )));
    }
    let t0 = t_grid[0];
    let mut marks = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let x = (t - t0) / h;
        let n = x.round();
        if (x - n).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "time {t} is not on the correlation step {h} from {t0}"
            )));
        }
        marks.push(n as usize);
    }
    let total = *marks.last().unwrap();
    let m = tc.memory_steps();

    let slices: Vec<CMat> = (0..=m)
        .map(|j| memory_kernel_slice(spec, couplings, tc, j).into_matrix())
        .collect();
    let lh = unitary_part(spec).into_matrix();
    let n2 = d * d;
    let half = C64::new(0.5 * h, 0.0);
    // j = 0 node enters every step with weight ½
    let local = &lh + &slices[0] * C64::new(0.5 * h, 0.0);
    let a = CMat::identity(n2, n2) - &local * half;
    let lu = a.lu();

    let memory = |hist: &[CVec], n: usize| -> CVec {
        // Σ_{j>=1} h w_j K_j ρ_{n-j} over the truncated window
        let jmax = m.min(n);
        let mut acc = CVec::zeros(n2);
        for j in 1..=jmax {
            let w = if j == jmax { 0.5 } else { 1.0 };
            acc += &slices[j] * &hist[n - j] * C64::new(h * w, 0.0);
        }
        acc
    };

    let mut hist: Vec<CVec> = Vec::with_capacity(total + 1);
    hist.push(vectorize(rho0.matrix()));
    for n in 0..total {
        let f_n = &local * &hist[n] + memory(&hist, n);
        // memory part of F(t_{n+1}) uses only past states
        hist.push(CVec::zeros(n2));
        let mem_next = memory(&hist, n + 1);
        let rhs = &hist[n] + (&f_n + mem_next) * half;
        let next = lu
            .solve(&rhs)
            .ok_or_else(|| Error::NonConvergence("singular implicit step".into()))?;
        check_finite(&next, t0 + n as f64 * h)?;
        hist[n + 1] = next;
    }
    let states = marks.iter().map(|&k| unvectorize(&hist[k], d)).collect();
    Ok(Trajectory::from_states(t_grid.to_vec(), states))
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyState {
    #[serde(skip)]
    pub matrix: CMat,
    /// Trace-one state; `false` marks a traceless null direction.
    pub normalized: bool,
    /// `‖L ρ‖_F`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateReport {
    pub multiplicity: usize,
    pub threshold: f64,
    /// Smallest singular values of `L`, ascending.
    pub smallest_singular_values: Vec<f64>,
    pub states: Vec<SteadyState>,
}

/// Null space of `L` from its SVD.
///
/// Singular values below `1e-10 σ_max` span the null space. A singular value
/// within a factor 100 above that threshold has no clean gap and is an error.
/// The basis is hermitized, orthonormalized, and rotated so that the whole
/// trace sits in the first state, which is normalized; the rest are traceless.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyStateReport> {
    let d = l.dim();
    let m = l.matrix();
    let svd = m.clone().svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::NullSpace("SVD did not produce right singular vectors".into()))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let thr = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let smallest: Vec<f64> = order.iter().take(d * d.min(4)).map(|&i| sv[i]).collect();
    if let Some(&i) = order.iter().find(|&&i| sv[i] > thr && sv[i] <= 100.0 * thr) {
        return Err(Error::NullSpace(format!(
            "no clean singular-value gap: {:e} near threshold {thr:e}",
            sv[i]
        )));
    }
    let null: Vec<usize> = order.iter().copied().filter(|&i| sv[i] <= thr).collect();
    if null.is_empty() {
        return Err(Error::NullSpace(format!(
            "empty null space (smallest singular value {:e})",
            sv[order[0]]
        )));
    }

    // hermitian real span of the null vectors
    let mut herm: Vec<CMat> = Vec::new();
    for &i in &null {
        let x = unvectorize(&v_t.row(i).adjoint().into_owned(), d);
        herm.push(hermitize(&x));
        herm.push(hermitize(&(&x * C64::new(0.0, 1.0))));
    }
    let dot = |a: &CMat, b: &CMat| -> f64 { a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum() };
    let mut basis: Vec<CMat> = Vec::new();
    for mut x in herm {
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &x);
                x -= b * C64::new(c, 0.0);
            }
        }
        let n = dot(&x, &x).sqrt();
        if n > 1e-6 {
            basis.push(x / C64::new(n, 0.0));
        }
        if basis.len() == null.len() {
            break;
        }
    }
    if basis.len() != null.len() {
        return Err(Error::NullSpace(format!(
            "null space of dimension {} is not closed under hermitian conjugation",
            null.len()
        )));
    }

    // rotate so that one vector carries the trace
    let traces: Vec<f64> = basis.iter().map(|b| b.trace().re).collect();
    let tnorm = traces.iter().map(|t| t * t).sum::<f64>().sqrt();
    let mut rotated: Vec<(CMat, bool)> = Vec::new();
    if tnorm > 1e-8 {
        let mut first = CMat::zeros(d, d);
        for (b, t) in basis.iter().zip(&traces) {
            first += b * C64::new(*t / tnorm, 0.0);
        }
        let tr = first.trace().re;
        rotated.push((first.clone() / C64::new(tr, 0.0), true));
        let unit = first.clone() / C64::new(dot(&first, &first).sqrt(), 0.0);
        let mut rest: Vec<CMat> = Vec::new();
        for b in &basis {
            let mut x = b - &unit * C64::new(dot(&unit, b), 0.0);
            for r in &rest {
                let c = dot(r, &x);
                x -= r * C64::new(c, 0.0);
            }
            let n = dot(&x, &x).sqrt();
            if n > 1e-6 && rest.len() + 1 < basis.len() {
                rest.push(x / C64::new(n, 0.0));
            }
        }
        rotated.extend(rest.into_iter().map(|x| (x, false)));
    } else {
        rotated.extend(basis.into_iter().map(|x| (x, false)));
    }

    let states = rotated
        .into_iter()
        .map(|(x, normalized)| {
            let residual = (m * vectorize(&x)).norm();
            SteadyState {
                matrix: x,
                normalized,
                residual,
            }
        })
        .collect::<Vec<_>>();
    Ok(SteadyStateReport {
        multiplicity: states.len(),
        threshold: thr,
        smallest_singular_values: smallest,
        states,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossEntry {
    pub out: SuperIndex,
    pub inp: SuperIndex,
    pub magnitude: f64,
}

/// Couplings between the population and coherence sectors of a kernel.
///
/// `pop_to_coh` lists `K_{pp',qq}` with `p != p'` (populations feeding
/// coherences); `coh_to_pop` lists `K_{pp,qq'}` with `q != q'`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub threshold: f64,
    pub pop_to_coh: Vec<CrossEntry>,
    pub coh_to_pop: Vec<CrossEntry>,
    pub classes: Vec<Vec<usize>>,
}

impl BlockReport {
    pub fn has_pop_to_coh(&self) -> bool {
        !self.pop_to_coh.is_empty()
    }

    pub fn has_coh_to_pop(&self) -> bool {
        !self.coh_to_pop.is_empty()
    }

    pub fn is_decoupled(&self) -> bool {
        self.pop_to_coh.is_empty() && self.coh_to_pop.is_empty()
    }

    /// Largest cross-block magnitude.
    pub fn max_cross(&self) -> f64 {
        self.pop_to_coh
            .iter()
            .chain(&self.coh_to_pop)
            .map(|e| e.magnitude)
            .fold(0.0, f64::max)
    }
}

pub const BLOCK_THRESHOLD: f64 = 1e-12;

pub fn block_structure_report(spec: &EnergySpectrum, k: &Superoperator) -> Result<BlockReport> {
    block_structure_report_with(spec, k, BLOCK_THRESHOLD)
}

pub fn block_structure_report_with(
    spec: &EnergySpectrum,
    k: &Superoperator,
    threshold: f64,
) -> Result<BlockReport> {
    let d = spec.dim();
    if k.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: k.dim(),
            context: "kernel vs spectrum".into(),
        });
    }
    let mut pop_to_coh = Vec::new();
    let mut coh_to_pop = Vec::new();
    for p in 0..d {
        for p2 in 0..d {
            for q in 0..d {
                for q2 in 0..d {
                    let out = SuperIndex::new(p, p2);
                    let inp = SuperIndex::new(q, q2);
                    if out.is_population() == inp.is_population() {
                        continue;
                    }
                    let magnitude = k.get(p, p2, q, q2).norm();
                    if magnitude <= threshold {
                        continue;
                    }
                    let e = CrossEntry {
                        out,
                        inp,
                        magnitude,
                    };
                    if inp.is_population() {
                        pop_to_coh.push(e);
                    } else {
                        coh_to_pop.push(e);
                    }
                }
            }
        }
    }
    Ok(BlockReport {
        threshold,
        pop_to_coh,
        coh_to_pop,
        classes: spec.classes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{time_correlation, BathSpectrum};
    use crate::kernels::{build_kernel, lindblad_kernel, redfield_kernel, RedfieldAnsatz};
    use crate::random::{random_couplings, random_spectrum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_lindblad(g: f64) -> (EnergySpectrum, Liouvillian) {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = CouplingChannelSet::qubit_rotating();
        let bath = BathSpectrum::flat(2, g).unwrap();
        let k = build_kernel(KernelVariant::Lindblad, &spec, &c, &bath).unwrap();
        let l = Liouvillian::from_kernel(&spec, &k).unwrap();
        (spec, l)
    }

    fn contains(ev: &[C64], z: C64, tol: f64) -> bool {
        ev.iter().any(|e| (e - z).norm() < tol)
    }

    #[test]
    fn unitary_spectrum() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let l = build_liouvillian(&spec, &Superoperator::zeros(2)).unwrap();
        let ev = l.eigenvalues().unwrap();
        for z in [C64::new(0.0, -1.0), C64::new(0.0, 1.0)] {
            assert!(contains(&ev, z, 1e-14));
        }
        assert_eq!(ev.iter().filter(|z| z.norm() < 1e-14).count(), 2);
        assert_eq!(l.trace_condition_residual(), 0.0);
        // L_H is anti-hermitian
        let m = l.matrix();
        assert_eq!((m + m.adjoint()).camax(), 0.0);
    }

    #[test]
    fn flat_qubit_lindblad_spectrum() {
        let g = 0.25;
        let (_, l) = qubit_lindblad(g);
        let ev = l.eigenvalues().unwrap();
        for z in [
            C64::new(0.0, 0.0),
            C64::new(-2.0 * g, 0.0),
            C64::new(-g, 1.0),
            C64::new(-g, -1.0),
        ] {
            assert!(contains(&ev, z, 1e-12), "{z} not in {ev:?}");
        }
        assert!(l.trace_condition_residual() < 1e-15);
    }

    #[test]
    fn relaxation_and_dephasing_curves() {
        let g = 0.2;
        let (_, l) = qubit_lindblad(g);
        let plus = DensityMatrix::level(2, 1).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let tr = evolve_markov(&l, &plus, &grid).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let want = 0.5 * (1.0 + (-2.0 * g * t).exp());
            assert!((s[(1, 1)].re - want).abs() < 1e-12);
        }
        let psi = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let tr = evolve_markov(&l, &rho, &grid).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[(1, 0)].norm() - 0.5 * (-g * t).exp()).abs() < 1e-12);
        }
        assert!(tr.max_trace_drift() < 1e-12);
        assert!(tr.max_hermiticity_residual() < 1e-12);
    }

    #[test]
    fn unitary_phases() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let l = build_liouvillian(&spec, &Superoperator::zeros(2)).unwrap();
        let psi = CVec::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let grid = [0.0, 0.3, 1.7, 4.0];
        let tr = evolve_markov(&l, &rho, &grid).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let want = rho.matrix()[(1, 0)] * C64::from_polar(1.0, -t);
            assert!((s[(1, 0)] - want).norm() < 1e-13);
            assert!((s[(1, 1)] - rho.matrix()[(1, 1)]).norm() < 1e-13);
        }
    }

    #[test]
    fn exponential_and_runge_kutta_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in [2, 3, 5] {
            let spec = random_spectrum(&mut rng, d, false);
            let c = random_couplings(&mut rng, d);
            let bath = BathSpectrum::thermal_ohmic(c.len(), 0.3, 4.0, 1.0).unwrap();
            let k = lindblad_kernel(&spec, &c, &bath).unwrap();
            let l = build_liouvillian(&spec, &k).unwrap();
            let rho = DensityMatrix::level(d, d - 1).unwrap();
            let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
            let a = evolve_markov_with(&l, &rho, &grid, Propagator::Exponential).unwrap();
            let b = evolve_markov_with(&l, &rho, &grid, Propagator::DEFAULT_RK).unwrap();
            let worst = a
                .states
                .iter()
                .zip(&b.states)
                .map(|(x, y)| (x - y).camax())
                .fold(0.0, f64::max);
            assert!(worst < 1e-8, "d={d} {worst:e}");
        }
    }

    #[test]
    fn grid_errors() {
        let (_, l) = qubit_lindblad(0.1);
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(evolve_markov(&l, &rho, &[]).is_err());
        assert!(evolve_markov(&l, &rho, &[0.0, 1.0, 1.0]).is_err());
        assert!(evolve_markov(&l, &rho, &[0.0, f64::NAN]).is_err());
        let rho3 = DensityMatrix::maximally_mixed(3);
        assert!(evolve_markov(&l, &rho3, &[0.0]).is_err());
    }

    #[test]
    fn non_finite_generator_is_reported() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let mut k = Superoperator::zeros(2);
        k.add_to(0, 0, 0, 0, C64::new(f64::NAN, 0.0));
        let l = build_liouvillian(&spec, &k).unwrap();
        let rho = DensityMatrix::level(2, 0).unwrap();
        let err = evolve_markov_with(&l, &rho, &[0.0, 1.0], Propagator::DEFAULT_RK).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn steady_states() {
        let (_, l) = qubit_lindblad(0.3);
        let r = steady_state(&l).unwrap();
        assert_eq!(r.multiplicity, 1);
        let rho = &r.states[0].matrix;
        assert!((rho - CMat::identity(2, 2) * C64::new(0.5, 0.0)).camax() < 1e-12);
        assert!(r.states[0].residual < 1e-12);

        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let l = build_liouvillian(&spec, &Superoperator::zeros(2)).unwrap();
        let r = steady_state(&l).unwrap();
        assert_eq!(r.multiplicity, 2);
        assert!(r.states[0].normalized && !r.states[1].normalized);
        for s in &r.states {
            // diagonal, i.e. in the span of the two projectors
            assert!(s.matrix[(0, 1)].norm() < 1e-12 && s.matrix[(1, 0)].norm() < 1e-12);
            assert!(s.residual < 1e-12);
        }
        assert!(r.states[1].matrix.trace().norm() < 1e-12);
    }

    #[test]
    fn thermal_qubit_steady_state_ratio() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = CouplingChannelSet::qubit_rotating();
        for beta in [0.1, 1.0, 10.0] {
            let bath = BathSpectrum::thermal_ohmic(2, 0.1, 5.0, beta).unwrap();
            let k = lindblad_kernel(&spec, &c, &bath).unwrap();
            let l = build_liouvillian(&spec, &k).unwrap();
            let r = steady_state(&l).unwrap();
            assert_eq!(r.multiplicity, 1);
            let rho = &r.states[0].matrix;
            let ratio = rho[(1, 1)].re / rho[(0, 0)].re;
            assert!((ratio / (-beta).exp() - 1.0).abs() < 1e-10, "beta {beta}");
        }
    }

    #[test]
    fn steady_state_rejects_missing_gap() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        // decay rate 1e-9 against unit frequencies: singular value sits just
        // above the null threshold
        let mut k = Superoperator::zeros(2);
        let g = 5e-10;
        k.add_to(0, 0, 1, 1, C64::new(g, 0.0));
        k.add_to(1, 1, 1, 1, C64::new(-g, 0.0));
        let l = build_liouvillian(&spec, &k).unwrap();
        assert!(matches!(steady_state(&l), Err(Error::NullSpace(_))));
    }

    #[test]
    fn block_reports() {
        let spec = EnergySpectrum::new(vec![0.0, 0.3, 1.0]).unwrap();
        let r = block_structure_report(&spec, &Superoperator::zeros(3)).unwrap();
        assert!(r.is_decoupled());

        let spec = EnergySpectrum::new(vec![0.0, 1.0, 1.0]).unwrap();
        let x = CMat::from_fn(3, 3, |i, j| {
            if i != j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let c = CouplingChannelSet::hermitian(vec![("x".into(), x)], 3).unwrap();
        let bath = BathSpectrum::thermal_ohmic(1, 0.2, 5.0, 1.0).unwrap();
        let k = build_kernel(KernelVariant::EnergyConserving, &spec, &c, &bath).unwrap();
        let r = block_structure_report(&spec, &k.superop).unwrap();
        assert!(r.has_pop_to_coh() && r.has_coh_to_pop());
        assert_eq!(r.classes, vec![vec![0], vec![1, 2]]);
        // every cross entry involves a coherence inside the degenerate class
        for e in r.pop_to_coh.iter() {
            assert!(spec.same_class(e.out.p, e.out.p2));
        }
    }

    #[test]
    fn nonlocal_with_zero_coupling_is_unitary() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = CouplingChannelSet::zero(2, 1);
        let bath = BathSpectrum::lorentzian(1, 1.0, 2.0).unwrap();
        let tc = time_correlation(&bath, 0.01, 400, 3.0).unwrap();
        let psi = CVec::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let tr = evolve_nonlocal(&spec, &c, &tc, &rho, &grid).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let want = rho.matrix()[(1, 0)] * C64::from_polar(1.0, -t);
            // Crank-Nicolson phase error ~ t h² ω³ / 12
            assert!((s[(1, 0)] - want).norm() < 1e-4);
        }
    }

    #[test]
    fn nonlocal_flat_bath_matches_markov() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = CouplingChannelSet::qubit_rotating();
        let g = 0.1;
        let bath = BathSpectrum::flat(2, g).unwrap();
        let h = 0.005;
        let tc = time_correlation(&bath, h, 20, 0.05).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
        let psi = CVec::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let nl = evolve_nonlocal(&spec, &c, &tc, &rho, &grid).unwrap();
        let k = redfield_kernel(&spec, &c, &bath, RedfieldAnsatz::QQ).unwrap();
        let l = build_liouvillian(&spec, &k).unwrap();
        let mk = evolve_markov(&l, &rho, &grid).unwrap();
        let dist = nl.max_trace_distance(&mk).unwrap();
        assert!(dist < 1e-4, "{dist:e}");
    }

    #[test]
    fn nonlocal_grid_checks() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = CouplingChannelSet::qubit_rotating();
        let bath = BathSpectrum::flat(2, 0.1).unwrap();
        let tc = time_correlation(&bath, 0.1, 10, 0.5).unwrap();
        let rho = DensityMatrix::level(2, 1).unwrap();
        assert!(matches!(
            evolve_nonlocal(&spec, &c, &tc, &rho, &[0.0, 0.15]),
            Err(Error::InvalidGrid(_))
        ));
        let wide = EnergySpectrum::new(vec![-20.0, 20.0]).unwrap();
        assert!(matches!(
            evolve_nonlocal(&wide, &c, &tc, &rho, &[0.0, 0.1]),
            Err(Error::Nyquist(_))
        ));
    }
}

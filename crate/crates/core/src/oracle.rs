//! Reference solutions: exact system + finite oscillator bath dynamics,
//! closed-form qubit rate equations, and a direct double-commutator
//! evaluation of the second-order Markov kernel.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bath::{time_correlation, BathSpectrum, TimeCorrelation};
use crate::coupling::CouplingChannelSet;
use crate::density::{hermitian_eigenvalues, DensityMatrix};
use crate::dynamics::{build_liouvillian, evolve_markov, validate_grid, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::{lindblad_kernel, redfield_kernel, RedfieldAnsatz};
use crate::spectrum::EnergySpectrum;
use crate::superop::Superoperator;
use crate::{CMat, CVec, C64};

/// Gauss-Legendre nodes and weights on `[a, b]` (Golub-Welsch).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    pairs
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .unzip()
}

/// How the bath operator of a channel acts on the modes: `B^α = Σ_k g_k b_k`
/// with `b_k` one of `a_k`, `a_k†` or `a_k + a_k†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathOperatorForm {
    Annihilate,
    Create,
    Position,
}

impl BathOperatorForm {
    fn adjoint(self) -> Self {
        match self {
            BathOperatorForm::Annihilate => BathOperatorForm::Create,
            BathOperatorForm::Create => BathOperatorForm::Annihilate,
            BathOperatorForm::Position => BathOperatorForm::Position,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathMode {
    pub frequency: f64,
    pub coupling: f64,
}

/// Modes on Gauss-Legendre nodes of `[0, ω_max]` with
/// `g_k² = w_k · 2η ω_k e^{-ω_k/ω_c} / 2π`, so that `2π Σ_k g_k² δ(ω - ω_k)`
/// approximates the zero-temperature Ohmic rate `2ηω e^{-ω/ω_c}`.
pub fn discretize_ohmic(n_modes: usize, omega_max: f64, eta: f64, cutoff: f64) -> Vec<BathMode> {
    let (nodes, weights) = gauss_legendre(n_modes, 0.0, omega_max);
    nodes
        .into_iter()
        .zip(weights)
        .map(|(w, q)| BathMode {
            frequency: w,
            coupling: (q * 2.0 * eta * w * (-w / cutoff).exp() / (2.0 * std::f64::consts::PI))
                .sqrt(),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FiniteBathModel {
    pub spectrum: EnergySpectrum,
    pub couplings: CouplingChannelSet,
    pub forms: Vec<BathOperatorForm>,
    pub modes: Vec<BathMode>,
    pub n_max: usize,
    pub max_total_excitations: Option<usize>,
    pub beta: f64,
    /// Cap on the dimension of the reachable subspace.
    pub dim_cap: usize,
    /// Invalidating threshold for truncation leakage.
    pub leakage_limit: f64,
    /// Description of the mode discretization.
    pub quadrature: String,
}

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DEFAULT_LEAKAGE_LIMIT: f64 = 1e-6;

impl FiniteBathModel {
    pub fn new(
        spectrum: EnergySpectrum,
        couplings: CouplingChannelSet,
        forms: Vec<BathOperatorForm>,
        modes: Vec<BathMode>,
        n_max: usize,
        beta: f64,
    ) -> Result<Self> {
        couplings.check_dim(&spectrum)?;
        if forms.len() != couplings.len() {
            return Err(Error::DimensionMismatch {
                expected: couplings.len(),
                found: forms.len(),
                context: "bath operator forms".into(),
            });
        }
        for (a, f) in forms.iter().enumerate() {
            if forms[couplings.adjoint_of(a)] != f.adjoint() {
                return Err(Error::InvalidCoupling(format!(
                    "bath operator of channel {a} is not the adjoint of its partner's"
                )));
            }
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidBath(format!("beta must be > 0, got {beta}")));
        }
        if n_max > u8::MAX as usize {
            return Err(Error::InvalidBath("n_max too large".into()));
        }
        for m in &modes {
            if !(m.frequency >= 0.0) || !m.coupling.is_finite() {
                return Err(Error::InvalidBath(format!("invalid mode {m:?}")));
            }
        }
        Ok(Self {
            spectrum,
            couplings,
            forms,
            modes,
            n_max,
            max_total_excitations: None,
            beta,
            dim_cap: DEFAULT_DIM_CAP,
            leakage_limit: DEFAULT_LEAKAGE_LIMIT,
            quadrature: "explicit".into(),
        })
    }

    /// Qubit with `S¹ = σ⁺`, `S² = σ⁻` coupled through `a` and `a†`, so that
    /// `H_SB = Σ_k g_k (σ⁺ a_k + σ⁻ a_k†)`.
    pub fn qubit_rotating(omega0: f64, modes: Vec<BathMode>, n_max: usize, beta: f64) -> Result<Self> {
        Self::new(
            EnergySpectrum::new(vec![-0.5 * omega0, 0.5 * omega0])?,
            CouplingChannelSet::qubit_rotating(),
            vec![BathOperatorForm::Annihilate, BathOperatorForm::Create],
            modes,
            n_max,
            beta,
        )
    }

    /// `0.5 · 2π / Δω` with `Δω` the mean spacing of the mode frequencies.
    pub fn recurrence_limit(&self) -> f64 {
        let n = self.modes.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let (lo, hi) = self
            .modes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), m| {
                (l.min(m.frequency), h.max(m.frequency))
            });
        let spacing = (hi - lo) / (n - 1) as f64;
        if spacing <= 0.0 {
            return f64::INFINITY;
        }
        0.5 * 2.0 * std::f64::consts::PI / spacing
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactRun {
    pub trajectory: Trajectory,
    pub reachable_dim: usize,
    /// Population on states that the Hamiltonian couples out of the
    /// truncated space, maximized over time.
    pub leakage: f64,
    /// Population with some mode at `n_max`, maximized over time.
    pub top_fock_occupation: f64,
    /// Largest deviation of a global pure-state norm from one.
    pub unitarity_error: f64,
    pub recurrence_limit: f64,
    /// Thermal weight left out by the Fock enumeration.
    pub omitted_thermal_weight: f64,
}

type Config = Vec<u8>;

/// Fock configurations of the thermal bath state with probability above
/// `cut`, by depth-first enumeration.
fn thermal_configs(model: &FiniteBathModel, cut: f64, cap: usize) -> Result<(Vec<(Config, f64)>, f64)> {
    let n = model.modes.len();
    let per_mode: Vec<Vec<f64>> = model
        .modes
        .iter()
        .map(|m| {
            if model.beta.is_infinite() {
                let mut p = vec![0.0; model.n_max + 1];
                p[0] = 1.0;
                return p;
            }
            let w: Vec<f64> = (0..=model.n_max)
                .map(|k| (-model.beta * m.frequency * k as f64).exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut stack: Vec<(Config, f64)> = vec![(Vec::new(), 1.0)];
    while let Some((cfg, p)) = stack.pop() {
        if cfg.len() == n {
            out.push((cfg, p));
            if out.len() > cap {
                return Err(Error::DimensionCap { dim: out.len(), cap });
            }
            continue;
        }
        let k = cfg.len();
        for (occ, &q) in per_mode[k].iter().enumerate() {
            let pq = p * q;
            if pq >= cut {
                let mut next = cfg.clone();
                next.push(occ as u8);
                stack.push((next, pq));
            }
        }
    }
    let kept: f64 = out.iter().map(|(_, p)| p).sum();
    Ok((out, (1.0 - kept).max(0.0)))
}

/// Reduced dynamics of system plus finite bath from `ρ_S(0) ⊗ ρ_B`.
///
/// The global Hamiltonian is diagonalized on the subspace reachable from the
/// initial product states within the Fock truncation. Requests beyond the
/// recurrence window, reachable dimensions above the cap, and runs whose
/// truncation leakage exceeds the limit are rejected.
pub fn exact_reduced_evolution(
    model: &FiniteBathModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<ExactRun> {
    validate_grid(t_grid)?;
    let d = model.spectrum.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
            context: "initial system state".into(),
        });
    }
    let span = t_grid[t_grid.len() - 1] - t_grid[0];
    let limit = model.recurrence_limit();
    if span >= limit {
        return Err(Error::Recurrence {
            requested: span,
            limit,
        });
    }

    // pure components of ρ_S(0)
    let eig = SymmetricEigen::new(crate::density::hermitize(rho0.matrix()));
    let components: Vec<(f64, CVec)> = (0..d)
        .filter(|&i| eig.eigenvalues[i] > 1e-14)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    let (configs, omitted) = thermal_configs(model, 1e-12, model.dim_cap)?;

    // breadth-first search over (level, configuration)
    let n_modes = model.modes.len();
    let s = model.couplings.matrices();
    let mut index: HashMap<(usize, Config), usize> = HashMap::new();
    let mut states: Vec<(usize, Config)> = Vec::new();
    let mut queue = VecDeque::new();
    let push = |st: (usize, Config),
                    index: &mut HashMap<(usize, Config), usize>,
                    states: &mut Vec<(usize, Config)>,
                    queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(&i) = index.get(&st) {
            return Ok(i);
        }
        let i = states.len();
        if i >= model.dim_cap {
            return Err(Error::DimensionCap {
                dim: i + 1,
                cap: model.dim_cap,
            });
        }
        index.insert(st.clone(), i);
        states.push(st);
        queue.push_back(i);
        Ok(i)
    };
    for (_, psi) in &components {
        for (cfg, _) in &configs {
            for lvl in 0..d {
                if psi[lvl].norm() > 0.0 {
                    push((lvl, cfg.clone()), &mut index, &mut states, &mut queue)?;
                }
            }
        }
    }

    let total_cap = model.max_total_excitations;
    // (target, amplitude) pairs for H acting on a basis state, plus whether
    // any target fell outside the truncation
    let neighbours = |st: &(usize, Config)| -> (Vec<((usize, Config), C64)>, bool) {
        let (lvl, cfg) = st;
        let mut out = Vec::new();
        let mut cut = false;
        let total: usize = cfg.iter().map(|&x| x as usize).sum();
        for (a, sa) in s.iter().enumerate() {
            for l2 in 0..d {
                let amp_s = sa[(l2, *lvl)];
                if amp_s == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..n_modes {
                    let g = model.modes[k].coupling;
                    if g == 0.0 {
                        continue;
                    }
                    let nk = cfg[k] as usize;
                    let mut moves: Vec<(isize, f64)> = Vec::new();
                    match model.forms[a] {
                        BathOperatorForm::Annihilate => moves.push((-1, (nk as f64).sqrt())),
                        BathOperatorForm::Create => moves.push((1, ((nk + 1) as f64).sqrt())),
                        BathOperatorForm::Position => {
                            moves.push((-1, (nk as f64).sqrt()));
                            moves.push((1, ((nk + 1) as f64).sqrt()));
                        }
                    }
                    for (dn, f) in moves {
                        if f == 0.0 {
                            continue;
                        }
                        let new_n = nk as isize + dn;
                        let new_total = total as isize + dn;
                        if new_n > model.n_max as isize
                            || total_cap.is_some_and(|c| new_total > c as isize)
                        {
                            cut = true;
                            continue;
                        }
                        let mut c2 = cfg.clone();
                        c2[k] = new_n as u8;
                        out.push(((l2, c2), amp_s * g * f));
                    }
                }
            }
        }
        (out, cut)
    };

    let mut boundary: Vec<bool> = Vec::new();
    let mut entries: Vec<(usize, usize, C64)> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let st = states[i].clone();
        let (nb, cut) = neighbours(&st);
        if boundary.len() <= i {
            boundary.resize(i + 1, false);
        }
        boundary[i] = cut;
        for (target, amp) in nb {
            let j = push(target, &mut index, &mut states, &mut queue)?;
            entries.push((j, i, amp));
        }
    }
    let dim = states.len();
    boundary.resize(dim, false);

    let levels = model.spectrum.levels();
    let mut h = CMat::zeros(dim, dim);
    for (i, (lvl, cfg)) in states.iter().enumerate() {
        let bath_e: f64 = cfg
            .iter()
            .zip(&model.modes)
            .map(|(&n, m)| n as f64 * m.frequency)
            .sum();
        h[(i, i)] += C64::new(levels[*lvl] + bath_e, 0.0);
    }
    for (j, i, amp) in entries {
        h[(j, i)] += amp;
    }
    let herm_err = (&h - h.adjoint()).camax();
    if herm_err > 1e-12 * h.camax().max(1.0) {
        return Err(Error::InvalidCoupling(format!(
            "global Hamiltonian is not hermitian ({herm_err:e})"
        )));
    }
    let h = crate::density::hermitize(&h);
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let lam = eig.eigenvalues;

    // group basis states by configuration for the partial trace
    let mut cfg_id: HashMap<&Config, usize> = HashMap::new();
    let mut by_cfg: Vec<Vec<(usize, usize)>> = Vec::new();
    for (i, (lvl, cfg)) in states.iter().enumerate() {
        let id = *cfg_id.entry(cfg).or_insert_with(|| {
            by_cfg.push(Vec::new());
            by_cfg.len() - 1
        });
        by_cfg[id].push((*lvl, i));
    }
    let top: Vec<bool> = states
        .iter()
        .map(|(_, cfg)| cfg.iter().any(|&n| n as usize == model.n_max && model.n_max > 0))
        .collect();

    // initial global pure states and their weights
    let mut inits: Vec<(f64, CVec)> = Vec::new();
    for (lp, psi) in &components {
        for (cfg, pc) in &configs {
            let mut v0 = CVec::zeros(dim);
            for lvl in 0..d {
                if psi[lvl].norm() > 0.0 {
                    v0[index[&(lvl, cfg.clone())]] = psi[lvl];
                }
            }
            inits.push((lp * pc, v0));
        }
    }
    let coeffs: Vec<CVec> = inits.iter().map(|(_, v0)| v.adjoint() * v0).collect();

    let t0 = t_grid[0];
    let mut out_states = Vec::with_capacity(t_grid.len());
    let (mut leak, mut topocc, mut unit_err) = (0.0f64, 0.0f64, 0.0f64);
    for &t in t_grid {
        let phases = CVec::from_fn(dim, |i, _| C64::from_polar(1.0, -lam[i] * (t - t0)));
        let mut rho = CMat::zeros(d, d);
        let (mut lk, mut tp) = (0.0, 0.0);
        for ((w, _), c) in inits.iter().zip(&coeffs) {
            let psi_t = &v * c.component_mul(&phases);
            unit_err = unit_err.max((psi_t.norm() - 1.0).abs());
            for members in &by_cfg {
                for &(l1, i1) in members {
                    for &(l2, i2) in members {
                        rho[(l1, l2)] += psi_t[i1] * psi_t[i2].conj() * *w;
                    }
                }
            }
            for i in 0..dim {
                let p = psi_t[i].norm_sqr() * w;
                if boundary[i] {
                    lk += p;
                }
                if top[i] {
                    tp += p;
                }
            }
        }
        leak = leak.max(lk);
        topocc = topocc.max(tp);
        out_states.push(rho);
    }
    if leak > model.leakage_limit {
        return Err(Error::TruncationLeakage {
            leakage: leak,
            limit: model.leakage_limit,
        });
    }
    if omitted > model.leakage_limit {
        return Err(Error::TruncationLeakage {
            leakage: omitted,
            limit: model.leakage_limit,
        });
    }
    Ok(ExactRun {
        trajectory: Trajectory::from_states(t_grid.to_vec(), out_states),
        reachable_dim: dim,
        leakage: leak,
        top_fock_occupation: topocc,
        unitarity_error: unit_err,
        recurrence_limit: limit,
        omitted_thermal_weight: omitted,
    })
}

/// Closed-form two-level rate equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QubitAnalytic {
    pub omega0: f64,
    pub gamma_up: f64,
    pub gamma_down: f64,
    /// `γ_up + γ_down`.
    pub relaxation_rate: f64,
    /// `(γ_up + γ_down) / 2` without pure dephasing.
    pub dephasing_rate: f64,
    pub t1: f64,
    pub t2: f64,
    /// `γ_up / (γ_up + γ_down)`; `None` when both rates vanish.
    pub p_plus: Option<f64>,
    /// `|γ_up/γ_down - e^{-βω0}|` when `γ_down > 0`.
    pub detailed_balance_residual: Option<f64>,
}

pub fn qubit_analytic(beta: f64, gamma_up: f64, gamma_down: f64, omega0: f64) -> Result<QubitAnalytic> {
    if !(gamma_up >= 0.0) || !(gamma_down >= 0.0) {
        return Err(Error::InvalidBath("rates must be nonnegative".into()));
    }
    let r = gamma_up + gamma_down;
    let p_plus = (r > 0.0).then(|| gamma_up / r);
    let db = (gamma_down > 0.0).then(|| {
        let target = if beta.is_infinite() {
            0.0
        } else {
            (-beta * omega0).exp()
        };
        (gamma_up / gamma_down - target).abs()
    });
    Ok(QubitAnalytic {
        omega0,
        gamma_up,
        gamma_down,
        relaxation_rate: r,
        dephasing_rate: 0.5 * r,
        t1: 1.0 / r,
        t2: 2.0 / r,
        p_plus,
        detailed_balance_residual: db,
    })
}

impl QubitAnalytic {
    /// `p_+(t)` from `p_+(0)`.
    pub fn population(&self, p0: f64, t: f64) -> f64 {
        let ss = self.p_plus.unwrap_or(p0);
        ss + (p0 - ss) * (-self.relaxation_rate * t).exp()
    }

    /// `ρ_{+-}(t)` from `ρ_{+-}(0)`, free precession at `ω0` included.
    pub fn coherence(&self, c0: C64, t: f64) -> C64 {
        c0 * C64::from_polar((-self.dephasing_rate * t).exp(), -self.omega0 * t)
    }
}

fn add_left_right(k: &mut CMat, a: &CMat, b: &CMat, coef: C64) {
    // K_{pp',qq'} += coef A_pq B_q'p'
    let d = a.nrows();
    for p in 0..d {
        for q in 0..d {
            let apq = a[(p, q)] * coef;
            if apq == C64::new(0.0, 0.0) {
                continue;
            }
            for p2 in 0..d {
                for q2 in 0..d {
                    k[(p * d + p2, q * d + q2)] += apq * b[(q2, p2)];
                }
            }
        }
    }
}

/// `½ ∫dτ` over the whole grid of `-Tr_B[H_SB, [H_SB(-τ), X ρ_B]]`, the
/// double commutator evaluated directly with operator products.
pub fn eqm_born_kernel(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    tc: &TimeCorrelation,
) -> Result<Superoperator> {
    couplings.check_dim(spec)?;
    if tc.channels() != couplings.len() {
        return Err(Error::DimensionMismatch {
            expected: couplings.len(),
            found: tc.channels(),
            context: "correlation channels".into(),
        });
    }
    let d = spec.dim();
    let id = CMat::identity(d, d);
    let s = couplings.matrices();
    let adj = couplings.adjoint_map();
    let n = tc.half_len() as isize;
    let mut k = CMat::zeros(d * d, d * d);
    for j in -n..=n {
        let tau = tc.tau(j);
        let w = if j.abs() == n { 0.5 } else { 1.0 };
        let weight = 0.5 * tc.step() * w;
        let d_plus = tc.correlation_at(j, adj);
        let d_minus = tc.correlation_at(-j, adj);
        for (b, sb) in s.iter().enumerate() {
            // S^β(-τ) = e^{-iHτ} S^β e^{iHτ}
            let sb_t = CMat::from_fn(d, d, |l, q| sb[(l, q)] * C64::from_polar(1.0, -spec.bohr(l, q) * tau));
            for (a, sa) in s.iter().enumerate() {
                let c1 = d_plus[(a, b)] * weight;
                let c2 = d_minus[(b, a)] * weight;
                if c1 != C64::new(0.0, 0.0) {
                    add_left_right(&mut k, &(sa * &sb_t), &id, -c1);
                    add_left_right(&mut k, &sb_t, sa, c1);
                }
                if c2 != C64::new(0.0, 0.0) {
                    add_left_right(&mut k, &id, &(&sb_t * sa), -c2);
                    add_left_right(&mut k, sa, &sb_t, c2);
                }
            }
        }
    }
    Superoperator::from_matrix(d, k)
}

#[derive(Debug, Clone, Serialize)]
pub struct EqmConvergence {
    /// `(step, half_len, max |K_eqm - K_QQ|)` per level.
    pub levels: Vec<(f64, usize, f64)>,
    /// Error ratio of each level to the next.
    pub improvement: Vec<f64>,
}

/// EQM kernel against Redfield (QQ) at the given grid and after each 4x
/// refinement of the step (same span). Fails when refinement does not
/// reduce the error.
pub fn eqm_convergence(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
    step: f64,
    half_len: usize,
    refinements: usize,
) -> Result<EqmConvergence> {
    let reference = redfield_kernel(spec, couplings, bath, RedfieldAnsatz::QQ)?;
    let mut levels = Vec::new();
    let (mut h, mut n) = (step, half_len);
    for _ in 0..=refinements {
        let tc = time_correlation(bath, h, n, n as f64 * h)?;
        let k = eqm_born_kernel(spec, couplings, &tc)?;
        levels.push((h, n, k.difference(&reference)?.max_abs));
        h /= 4.0;
        n *= 4;
    }
    let improvement: Vec<f64> = levels
        .windows(2)
        .map(|w| w[0].2 / w[1].2.max(f64::MIN_POSITIVE))
        .collect();
    if let Some(pos) = improvement.iter().position(|&r| r <= 1.0 && levels[0].2 > 1e-14) {
        return Err(Error::NonConvergence(format!(
            "EQM error did not decrease from level {pos} to {}",
            pos + 1
        )));
    }
    Ok(EqmConvergence {
        levels,
        improvement,
    })
}

/// One coupling strength of the Born-scaling study.
#[derive(Debug, Clone, Serialize)]
pub struct BornScalingPoint {
    pub eta: f64,
    pub rate: f64,
    pub t_max: f64,
    pub error: f64,
    pub reachable_dim: usize,
    pub leakage: f64,
    pub top_fock_occupation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BornScaling {
    pub points: Vec<BornScalingPoint>,
    /// Error ratios of consecutive points.
    pub ratios: Vec<f64>,
}

/// Parameters of the qubit + discretized Ohmic bath comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BornScalingSetup {
    pub omega0: f64,
    pub n_modes: usize,
    pub omega_max: f64,
    pub cutoff: f64,
    pub n_max: usize,
    /// Fixed dimensionless time `Γt` at which the window ends.
    pub scaled_time: f64,
    pub samples: usize,
    pub etas: Vec<f64>,
}

impl Default for BornScalingSetup {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            n_modes: 60,
            omega_max: 5.0,
            cutoff: 5.0,
            n_max: 2,
            scaled_time: 0.25,
            samples: 401,
            etas: vec![0.08, 0.02, 0.005],
        }
    }
}

/// Exact vs Lindblad trajectories of an excited qubit in a zero-temperature
/// Ohmic bath, error = max trace distance over `[0, scaled_time / Γ]`.
/// Each η is a quarter of the previous one, i.e. the coupling halves.
pub fn born_scaling(setup: &BornScalingSetup) -> Result<BornScaling> {
    let mut points = Vec::new();
    for &eta in &setup.etas {
        let modes = discretize_ohmic(setup.n_modes, setup.omega_max, eta, setup.cutoff);
        let mut model = FiniteBathModel::qubit_rotating(setup.omega0, modes, setup.n_max, f64::INFINITY)?;
        model.quadrature = format!(
            "gauss-legendre n={} on [0, {}]",
            setup.n_modes, setup.omega_max
        );
        let bath = BathSpectrum::thermal_ohmic(2, eta, setup.cutoff, f64::INFINITY)?;
        let rate = bath.gamma(setup.omega0)[(0, 0)].re;
        let t_max = setup.scaled_time / rate;
        let grid: Vec<f64> = (0..setup.samples)
            .map(|i| t_max * i as f64 / (setup.samples - 1) as f64)
            .collect();
        let rho0 = DensityMatrix::level(2, 1)?;
        let exact = exact_reduced_evolution(&model, &rho0, &grid)?;
        let k = lindblad_kernel(&model.spectrum, &model.couplings, &bath)?;
        let l = build_liouvillian(&model.spectrum, &k)?;
        let markov = evolve_markov(&l, &rho0, &grid)?;
        let error = exact.trajectory.max_trace_distance(&markov)?;
        points.push(BornScalingPoint {
            eta,
            rate,
            t_max,
            error,
            reachable_dim: exact.reachable_dim,
            leakage: exact.leakage,
            top_fock_occupation: exact.top_fock_occupation,
        });
    }
    let ratios = points.windows(2).map(|w| w[0].error / w[1].error).collect();
    Ok(BornScaling { points, ratios })
}

/// Smallest eigenvalue of a reduced state; used in oracle reports.
pub fn reduced_min_eigenvalue(rho: &CMat) -> f64 {
    hermitian_eigenvalues(rho)[0]
}

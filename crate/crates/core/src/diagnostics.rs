//! Quantum-map checks and the kernel comparison report.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bath::BathSpectrum;
use crate::coupling::CouplingChannelSet;
use crate::density::{hermitize, min_eigenvalue, DensityMatrix};
use crate::dynamics::{block_structure_report, BlockReport, Liouvillian};
use crate::error::Result;
use crate::kernels::{build_kernel, KernelVariant, Provenance};
use crate::random::haar_state;
use crate::spectrum::EnergySpectrum;
use crate::superop::{unvectorize, vectorize, SuperIndex, Superoperator};
use crate::{CMat, C64};

/// Negative eigenvalues above this magnitude count as violations.
pub const POSITIVITY_TOL: f64 = 1e-8;

fn propagator(l: &Liouvillian, t: f64) -> CMat {
    (l.matrix() * C64::new(t, 0.0)).exp()
}

/// Choi matrix `C_{(q,p),(q',p')} = T_{pp',qq'}` of the map `T = exp(L t)`.
pub fn choi_matrix(l: &Liouvillian, t: f64) -> CMat {
    let d = l.dim();
    let tm = propagator(l, t);
    CMat::from_fn(d * d, d * d, |r, c| {
        let (q, p) = (r / d, r % d);
        let (q2, p2) = (c / d, c % d);
        tm[(p * d + p2, q * d + q2)]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChoiProbe {
    pub time: f64,
    pub min_eigenvalue: f64,
}

pub fn choi_spectrum(l: &Liouvillian, probes: &[f64]) -> Vec<ChoiProbe> {
    probes
        .iter()
        .map(|&t| ChoiProbe {
            time: t,
            min_eigenvalue: min_eigenvalue(&hermitize(&choi_matrix(l, t))),
        })
        .collect()
}

/// Smallest nonzero `|λ|` among the kernel eigenvalues, relative cut
/// `1e-10 max|λ|`.
pub fn smallest_nonzero_kernel_eigenvalue(l: &Liouvillian) -> Result<Option<f64>> {
    let ev = crate::dynamics::complex_eigenvalues(l.kernel().matrix())?;
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(None);
    }
    Ok(ev
        .iter()
        .map(|z| z.norm())
        .filter(|&a| a > 1e-10 * scale)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a)))))
}

/// `{0.1, 1, 10} / |λ_min|` with `λ_min` the smallest nonzero kernel
/// eigenvalue; `{0.1, 1, 10}` for a vanishing kernel.
pub fn default_probe_times(l: &Liouvillian) -> Result<Vec<f64>> {
    let scale = smallest_nonzero_kernel_eigenvalue(l)?.unwrap_or(1.0);
    Ok([0.1, 1.0, 10.0].iter().map(|f| f / scale).collect())
}

/// Eigenstate projectors followed by `samples` Haar-random pure states.
pub fn default_state_family(d: usize, samples: usize, seed: u64) -> Vec<CMat> {
    let mut out: Vec<CMat> = (0..d)
        .map(|n| DensityMatrix::level(d, n).expect("level in range").into_matrix())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let psi = haar_state(&mut rng, d);
        out.push(&psi * psi.adjoint());
    }
    out
}

/// A state and time at which `exp(L t) ρ` has its smallest eigenvalue.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub state_index: usize,
    #[serde(skip)]
    pub state: CMat,
    pub time: f64,
    pub min_eigenvalue: f64,
}

/// Re-evaluates the witness from its stored state and time.
pub fn replay_witness(l: &Liouvillian, w: &Witness) -> f64 {
    let v = &propagator(l, w.time) * vectorize(&w.state);
    min_eigenvalue(&unvectorize(&v, l.dim()))
}

pub fn positivity_scan(l: &Liouvillian, family: &[CMat], t_grid: &[f64]) -> Option<Witness> {
    let d = l.dim();
    let mut cache: HashMap<u64, CMat> = HashMap::new();
    let mut worst: Option<Witness> = None;
    for &t in t_grid {
        let prop = cache
            .entry(t.to_bits())
            .or_insert_with(|| propagator(l, t));
        for (i, rho) in family.iter().enumerate() {
            let v = &*prop * vectorize(rho);
            let m = min_eigenvalue(&unvectorize(&v, d));
            if worst.as_ref().is_none_or(|w| m < w.min_eigenvalue) {
                worst = Some(Witness {
                    state_index: i,
                    state: rho.clone(),
                    time: t,
                    min_eigenvalue: m,
                });
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CpConsistent,
    PositivityViolating,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapCheck {
    pub variant: Option<KernelVariant>,
    pub probes: Vec<ChoiProbe>,
    pub trajectory_min_eigenvalue: f64,
    pub witness: Option<Witness>,
    pub verdict: Verdict,
}

/// Choi probes at the default times plus a positivity scan of the default
/// state family over `t_grid`.
pub fn check_map(l: &Liouvillian, t_grid: &[f64], samples: usize, seed: u64) -> Result<MapCheck> {
    let probes = choi_spectrum(l, &default_probe_times(l)?);
    let family = default_state_family(l.dim(), samples, seed);
    let witness = positivity_scan(l, &family, t_grid);
    let traj_min = witness.as_ref().map_or(f64::INFINITY, |w| w.min_eigenvalue);
    let choi_ok = probes.iter().all(|p| p.min_eigenvalue >= -POSITIVITY_TOL);
    let verdict = if traj_min < -POSITIVITY_TOL {
        Verdict::PositivityViolating
    } else if choi_ok {
        Verdict::CpConsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(MapCheck {
        variant: l.variant(),
        probes,
        trajectory_min_eigenvalue: traj_min,
        witness: if verdict == Verdict::PositivityViolating {
            witness
        } else {
            None
        },
        verdict,
    })
}

/// Test kernel with the population gain terms `K_{pp,qq}` (`p != q`) negated
/// and the diagonal `K_{qq,qq}` reset so that the trace condition still
/// holds. Not a generator of a positive map once any gain is nonzero.
pub fn sign_flipped_gain_kernel(k: &Superoperator) -> Superoperator {
    let d = k.dim();
    let mut m = k.matrix().clone();
    for q in 0..d {
        let col = q * d + q;
        let mut gain = C64::new(0.0, 0.0);
        for p in 0..d {
            if p != q {
                let r = p * d + p;
                m[(r, col)] = -m[(r, col)];
                gain += m[(r, col)];
            }
        }
        m[(col, col)] = -gain;
    }
    Superoperator::from_matrix(d, m).expect("same shape")
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDifference {
    pub a: String,
    pub b: String,
    pub max_abs: f64,
    pub out: SuperIndex,
    pub inp: SuperIndex,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscrepancyEntry {
    pub out: SuperIndex,
    pub inp: SuperIndex,
    pub qq: C64,
    pub pp: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub provenance: Provenance,
    pub kernel_scale: f64,
    pub trace_residuals: Vec<(String, f64)>,
    pub pairwise: Vec<PairDifference>,
    pub energy_conserving_vs_lindblad: f64,
    pub equivalence_holds: bool,
    /// Entries where the two Redfield ansätze differ.
    pub qq_pp_discrepancy: Vec<DiscrepancyEntry>,
    /// Whether every discrepancy touches a coherence row or column.
    pub discrepancy_on_coherences: bool,
    pub energy_conserving_blocks: BlockReport,
}

pub const EQUIVALENCE_TOL: f64 = 1e-12;

pub fn equivalence_report(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
) -> Result<EquivalenceReport> {
    let variants = KernelVariant::MARKOV;
    let kernels = variants
        .iter()
        .map(|&v| build_kernel(v, spec, couplings, bath))
        .collect::<Result<Vec<_>>>()?;
    let scale = kernels
        .iter()
        .map(|k| k.superop.max_abs())
        .fold(0.0, f64::max);
    let mut pairwise = Vec::new();
    for i in 0..kernels.len() {
        for j in i + 1..kernels.len() {
            let diff = kernels[i].superop.difference(&kernels[j].superop)?;
            pairwise.push(PairDifference {
                a: variants[i].name().into(),
                b: variants[j].name().into(),
                max_abs: diff.max_abs,
                out: diff.out,
                inp: diff.inp,
            });
        }
    }
    let ec_li = kernels[2].superop.difference(&kernels[3].superop)?.max_abs;

    let d = spec.dim();
    let (qq, pp) = (&kernels[0].superop, &kernels[1].superop);
    let cut = EQUIVALENCE_TOL * scale.max(1.0);
    let mut entries = Vec::new();
    for r in 0..d * d {
        for c in 0..d * d {
            let (a, b) = (qq.matrix()[(r, c)], pp.matrix()[(r, c)]);
            if (a - b).norm() > cut {
                entries.push(DiscrepancyEntry {
                    out: SuperIndex::from_flat(r, d),
                    inp: SuperIndex::from_flat(c, d),
                    qq: a,
                    pp: b,
                });
            }
        }
    }
    let on_coh = entries
        .iter()
        .all(|e| !e.out.is_population() || !e.inp.is_population());
    Ok(EquivalenceReport {
        provenance: kernels[0].provenance.clone(),
        kernel_scale: scale,
        trace_residuals: kernels
            .iter()
            .map(|k| (k.variant.name().to_string(), k.trace_condition_residual()))
            .collect(),
        pairwise,
        energy_conserving_vs_lindblad: ec_li,
        equivalence_holds: ec_li < cut,
        qq_pp_discrepancy: entries,
        discrepancy_on_coherences: on_coh,
        energy_conserving_blocks: block_structure_report(spec, &kernels[2].superop)?,
    })
}

impl EquivalenceReport {
    pub fn pair(&self, a: KernelVariant, b: KernelVariant) -> Option<&PairDifference> {
        self.pairwise.iter().find(|p| {
            (p.a == a.name() && p.b == b.name()) || (p.a == b.name() && p.b == a.name())
        })
    }

    /// Plain-text table of the pairwise differences.
    pub fn table(&self) -> String {
        let mut s = format!("{:<20} {:<20} {:>12}  location\n", "kernel A", "kernel B", "max|A-B|");
        for p in &self.pairwise {
            s.push_str(&format!(
                "{:<20} {:<20} {:>12.3e}  ({}{},{}{})\n",
                p.a, p.b, p.max_abs, p.out.p, p.out.p2, p.inp.p, p.inp.p2
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_liouvillian;
    use crate::kernels::lindblad_kernel;
    use crate::random::{random_couplings, random_spectrum};

    fn qubit_flat(g: f64) -> (EnergySpectrum, Liouvillian) {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = CouplingChannelSet::qubit_rotating();
        let bath = BathSpectrum::flat(2, g).unwrap();
        let k = build_kernel(KernelVariant::Lindblad, &spec, &c, &bath).unwrap();
        let l = Liouvillian::from_kernel(&spec, &k).unwrap();
        (spec, l)
    }

    #[test]
    fn unitary_choi_is_rank_one() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let l = build_liouvillian(&spec, &Superoperator::zeros(2)).unwrap();
        let c = hermitize(&choi_matrix(&l, 0.7));
        let ev = crate::density::hermitian_eigenvalues(&c);
        assert!(ev[0].abs() < 1e-14 && ev[2].abs() < 1e-14);
        assert!((ev[3] - 2.0).abs() < 1e-14);
        assert_eq!(default_probe_times(&l).unwrap(), vec![0.1, 1.0, 10.0]);
    }

    #[test]
    fn lindblad_choi_is_positive() {
        let g = 0.4;
        let (_, l) = qubit_flat(g);
        let probes = default_probe_times(&l).unwrap();
        assert!((probes[1] - 1.0 / g).abs() < 1e-12);
        for p in choi_spectrum(&l, &probes) {
            assert!(p.min_eigenvalue >= -1e-10, "{p:?}");
        }
        let check = check_map(&l, &[0.1, 1.0, 5.0], 20, 1).unwrap();
        assert_eq!(check.verdict, Verdict::CpConsistent);
        assert!(check.trajectory_min_eigenvalue >= -1e-8);
    }

    #[test]
    fn sign_flipped_kernel_violates_positivity() {
        let (spec, l) = qubit_flat(0.4);
        let bad = sign_flipped_gain_kernel(l.kernel());
        assert!(bad.trace_condition_residual() < 1e-15);
        let lb = build_liouvillian(&spec, &bad).unwrap();
        let probes = choi_spectrum(&lb, &[0.01, 0.1]);
        assert!(probes.iter().all(|p| p.min_eigenvalue < 0.0));
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
        let check = check_map(&lb, &grid, 10, 3).unwrap();
        assert_eq!(check.verdict, Verdict::PositivityViolating);
        let w = check.witness.unwrap();
        assert!(w.min_eigenvalue < -1e-3);
        assert!((replay_witness(&lb, &w) - w.min_eigenvalue).abs() < 1e-12);
    }

    #[test]
    fn qubit_report_all_identical() {
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = CouplingChannelSet::qubit_rotating();
        let bath = BathSpectrum::thermal_ohmic(2, 0.1, 5.0, 1.0).unwrap();
        let r = equivalence_report(&spec, &c, &bath).unwrap();
        assert!(r.pairwise.iter().all(|p| p.max_abs < 1e-15));
        assert!(r.equivalence_holds && r.qq_pp_discrepancy.is_empty());
        assert!(r.table().lines().count() == 7);
    }

    #[test]
    fn random_nondegenerate_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let spec = random_spectrum(&mut rng, 4, false);
        let c = random_couplings(&mut rng, 4);
        let bath = BathSpectrum::thermal_ohmic(c.len(), 0.3, 5.0, 1.0).unwrap();
        let r = equivalence_report(&spec, &c, &bath).unwrap();
        assert!(r.energy_conserving_vs_lindblad < 1e-12);
        let qe = r
            .pair(KernelVariant::RedfieldQq, KernelVariant::EnergyConserving)
            .unwrap();
        assert!(qe.max_abs > 1e-6);
        assert!(!qe.out.is_population() || !qe.inp.is_population());
        assert!(r.discrepancy_on_coherences);
        assert!(r.energy_conserving_blocks.is_decoupled());
    }

    #[test]
    fn degenerate_report_keeps_population_coherence_coupling() {
        let spec = EnergySpectrum::new(vec![0.0, 1.0, 1.0]).unwrap();
        let x = CMat::from_fn(3, 3, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0));
        let c = CouplingChannelSet::hermitian(vec![("x".into(), x)], 3).unwrap();
        let bath = BathSpectrum::thermal_ohmic(1, 0.2, 5.0, 1.0).unwrap();
        let r = equivalence_report(&spec, &c, &bath).unwrap();
        assert!(r.equivalence_holds);
        assert!(!r.energy_conserving_blocks.is_decoupled());
        let k = lindblad_kernel(&spec, &c, &bath).unwrap();
        assert!(!block_structure_report(&spec, &k).unwrap().is_decoupled());
    }
}

//! Dissipative kernels `K_{pp',qq'}` in the energy eigenbasis.
//!
//! All variants share the four-term structure of the second-order kernel
//!
//! ```text
//! K(ω)_{pp',qq'} = Σ_{αβ} [ -½ δ_{p'q'} Σ_l S^α_pl S^β_lq D^{αβ}(ω + E_{q'l})
//!                          -½ δ_{pq}   Σ_l S^α_q'l S^β_lp' D^{αβ}(-ω + E_{ql})
//!                          +½ S^β_pq S^α_q'p' D^{αβ}(-ω + E_{qp'})
//!                          +½ S^β_pq S^α_q'p' D^{αβ}( ω + E_{q'p}) ]
//! ```
//!
//! with `D^{αβ} = γ^{ᾱβ}` taken from the bath. The Markov variants replace
//! `ω` by a Bohr frequency; the energy-conserving variant additionally keeps
//! only on-shell terms. The Lindblad kernel is assembled independently from
//! the jump operators `S^α(ω)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::BathSpectrum;
use crate::coupling::{decompose_jump_operators, CouplingChannelSet};
use crate::density::{hermitize, min_eigenvalue};
use crate::error::{Error, Result};
use crate::spectrum::EnergySpectrum;
use crate::superop::Superoperator;
use crate::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RedfieldAnsatz {
    /// `ω = E_{qq'}`, the incoming coherence.
    QQ,
    /// `ω = E_{pp'}`, the outgoing coherence.
    PP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "omega", rename_all = "snake_case")]
pub enum KernelVariant {
    BornFrequency(f64),
    RedfieldQq,
    RedfieldPp,
    EnergyConserving,
    Lindblad,
}

impl KernelVariant {
    pub const MARKOV: [KernelVariant; 4] = [
        KernelVariant::RedfieldQq,
        KernelVariant::RedfieldPp,
        KernelVariant::EnergyConserving,
        KernelVariant::Lindblad,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelVariant::BornFrequency(_) => "born",
            KernelVariant::RedfieldQq => "redfield_qq",
            KernelVariant::RedfieldPp => "redfield_pp",
            KernelVariant::EnergyConserving => "energy_conserving",
            KernelVariant::Lindblad => "lindblad",
        }
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelVariant::BornFrequency(w) => write!(f, "born:{w}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for KernelVariant {
    type Err = Error;

    /// Accepts `redfield_qq`, `redfield_pp`, `energy_conserving`, `lindblad`,
    /// `born` (ω = 0) and `born:<omega>`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match t.as_str() {
            "redfield_qq" | "qq" => KernelVariant::RedfieldQq,
            "redfield_pp" | "pp" => KernelVariant::RedfieldPp,
            "energy_conserving" | "ec" => KernelVariant::EnergyConserving,
            "lindblad" => KernelVariant::Lindblad,
            "born" => KernelVariant::BornFrequency(0.0),
            _ => {
                if let Some(w) = t.strip_prefix("born:") {
                    let w: f64 = w
                        .parse()
                        .map_err(|_| Error::config("variant", format!("bad frequency in `{s}`")))?;
                    if !w.is_finite() {
                        return Err(Error::config("variant", "frequency must be finite"));
                    }
                    KernelVariant::BornFrequency(w)
                } else {
                    return Err(Error::config("variant", format!("unknown kernel variant `{s}`")));
                }
            }
        })
    }
}

/// Hashes identifying the inputs a kernel was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub spectrum_hash: String,
    pub coupling_hash: String,
    pub bath_id: String,
}

impl Provenance {
    pub fn new(spec: &EnergySpectrum, couplings: &CouplingChannelSet, bath: &BathSpectrum) -> Self {
        let mut h = Sha256::new();
        for e in spec.levels() {
            h.update(e.to_bits().to_le_bytes());
        }
        h.update(spec.eps_deg().to_bits().to_le_bytes());
        let spectrum_hash = hex::encode(h.finalize());

        let mut h = Sha256::new();
        h.update((couplings.dim() as u64).to_le_bytes());
        for (a, m) in couplings.matrices().iter().enumerate() {
            h.update((couplings.adjoint_of(a) as u64).to_le_bytes());
            for z in m.iter() {
                h.update(z.re.to_bits().to_le_bytes());
                h.update(z.im.to_bits().to_le_bytes());
            }
        }
        let coupling_hash = hex::encode(h.finalize());
        Self {
            spectrum_hash,
            coupling_hash,
            bath_id: bath.id(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub variant: KernelVariant,
    pub provenance: Provenance,
    pub superop: Superoperator,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.superop.dim()
    }

    pub fn trace_condition_residual(&self) -> f64 {
        self.superop.trace_condition_residual()
    }
}

fn check_inputs(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
) -> Result<()> {
    couplings.check_dim(spec)?;
    bath.check_channels(couplings.len())
}

fn checked_correlation(bath: &BathSpectrum, omega: f64, adjoint: &[usize]) -> Result<CMat> {
    let m = bath.correlation(omega, adjoint);
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidBath(format!(
            "non-finite correlation at omega = {omega}"
        )));
    }
    Ok(m)
}

/// `D(shift + f_b)` for every Bohr bin `b`.
fn correlation_table(
    spec: &EnergySpectrum,
    bath: &BathSpectrum,
    adjoint: &[usize],
    shift: f64,
) -> Result<Vec<CMat>> {
    spec.bohr_bins()
        .iter()
        .map(|b| checked_correlation(bath, shift + b.frequency, adjoint))
        .collect()
}

/// `Σ_{αβ} S^α_{ij} S^β_{kl} D^{αβ}`.
#[inline]
fn contract(s: &[CMat], i: usize, j: usize, k: usize, l: usize, d: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (a, sa) in s.iter().enumerate() {
        let x = sa[(i, j)];
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        for (b, sb) in s.iter().enumerate() {
            acc += x * sb[(k, l)] * d[(a, b)];
        }
    }
    acc
}

/// Term-wise correlation selectors. `None` drops a term.
struct Terms<T1, T2, T34>
where
    T1: Fn(usize, usize, usize, usize) -> Option<usize>,
    T2: Fn(usize, usize, usize, usize) -> Option<usize>,
    T34: Fn(usize, usize, usize, usize) -> [(f64, Option<usize>); 2],
{
    /// `(p, q, q', l)` on the `δ_{p'q'}` term.
    t1: T1,
    /// `(q, q', p', l)` on the `δ_{pq}` term.
    t2: T2,
    /// `(p, p', q, q')` for the two gain terms, with weights.
    t34: T34,
}

fn assemble<T1, T2, T34>(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    tables: &[&[CMat]],
    terms: Terms<T1, T2, T34>,
    table_of: [usize; 4],
) -> Superoperator
where
    T1: Fn(usize, usize, usize, usize) -> Option<usize>,
    T2: Fn(usize, usize, usize, usize) -> Option<usize>,
    T34: Fn(usize, usize, usize, usize) -> [(f64, Option<usize>); 2],
{
    let d = spec.dim();
    let s = couplings.matrices();
    let half = C64::new(0.5, 0.0);
    let mut k = Superoperator::zeros(d);

    // -½ δ_{p'q'} Σ_l S^α_pl S^β_lq D
    for p in 0..d {
        for q in 0..d {
            for q2 in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..d {
                    if let Some(b) = (terms.t1)(p, q, q2, l) {
                        acc += contract(s, p, l, l, q, &tables[table_of[0]][b]);
                    }
                }
                if acc != C64::new(0.0, 0.0) {
                    k.add_to(p, q2, q, q2, -half * acc);
                }
            }
        }
    }
    // -½ δ_{pq} Σ_l S^α_q'l S^β_lp' D
    for q in 0..d {
        for q2 in 0..d {
            for p2 in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..d {
                    if let Some(b) = (terms.t2)(q, q2, p2, l) {
                        acc += contract(s, q2, l, l, p2, &tables[table_of[1]][b]);
                    }
                }
                if acc != C64::new(0.0, 0.0) {
                    k.add_to(q, p2, q, q2, -half * acc);
                }
            }
        }
    }
    // gain: S^β_pq S^α_q'p' D^{αβ}
    for p in 0..d {
        for p2 in 0..d {
            for q in 0..d {
                for q2 in 0..d {
                    let [(w3, b3), (w4, b4)] = (terms.t34)(p, p2, q, q2);
                    let mut acc = C64::new(0.0, 0.0);
                    if let Some(b) = b3 {
                        acc += contract(s, q2, p2, p, q, &tables[table_of[2]][b]) * w3;
                    }
                    if let Some(b) = b4 {
                        acc += contract(s, q2, p2, p, q, &tables[table_of[3]][b]) * w4;
                    }
                    if acc != C64::new(0.0, 0.0) {
                        k.add_to(p, p2, q, q2, acc);
                    }
                }
            }
        }
    }
    k
}

/// Second-order kernel at a fixed frequency `ω`, all four terms with their
/// shifted arguments.
pub fn born_kernel_frequency(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
    omega: f64,
) -> Result<Superoperator> {
    check_inputs(spec, couplings, bath)?;
    if !omega.is_finite() {
        return Err(Error::InvalidBath(format!("kernel frequency {omega} is not finite")));
    }
    let adj = couplings.adjoint_map();
    let plus = correlation_table(spec, bath, adj, omega)?;
    let minus = correlation_table(spec, bath, adj, -omega)?;
    let terms = Terms {
        t1: |_p, _q, q2, l| Some(spec.bin_index(q2, l)),
        t2: |q, _q2, _p2, l| Some(spec.bin_index(q, l)),
        t34: |p, p2, q, q2| {
            [
                (0.5, Some(spec.bin_index(q, p2))),
                (0.5, Some(spec.bin_index(q2, p))),
            ]
        },
    };
    // tables: 0 = D(ω + f), 1 = D(-ω + f)
    Ok(assemble(spec, couplings, &[&plus, &minus], terms, [0, 1, 1, 0]))
}

/// Markov limit of the Born kernel with `ω` fixed by the incoming (`QQ`) or
/// outgoing (`PP`) coherence of each matrix element.
pub fn redfield_kernel(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
    ansatz: RedfieldAnsatz,
) -> Result<Superoperator> {
    check_inputs(spec, couplings, bath)?;
    let table = correlation_table(spec, bath, couplings.adjoint_map(), 0.0)?;
    let k = match ansatz {
        // ω = E_qq': arguments E_ql, E_q'l, E_q'p', E_qp
        RedfieldAnsatz::QQ => assemble(
            spec,
            couplings,
            &[&table],
            Terms {
                t1: |_p, q, _q2, l| Some(spec.bin_index(q, l)),
                t2: |_q, q2, _p2, l| Some(spec.bin_index(q2, l)),
                t34: |p, p2, q, q2| {
                    [
                        (0.5, Some(spec.bin_index(q2, p2))),
                        (0.5, Some(spec.bin_index(q, p))),
                    ]
                },
            },
            [0; 4],
        ),
        // ω = E_pp': arguments E_pl, E_p'l, E_qp, E_q'p'
        RedfieldAnsatz::PP => assemble(
            spec,
            couplings,
            &[&table],
            Terms {
                t1: |p, _q, _q2, l| Some(spec.bin_index(p, l)),
                t2: |_q, _q2, p2, l| Some(spec.bin_index(p2, l)),
                t34: |p, p2, q, q2| {
                    [
                        (0.5, Some(spec.bin_index(q, p))),
                        (0.5, Some(spec.bin_index(q2, p2))),
                    ]
                },
            },
            [0; 4],
        ),
    };
    Ok(k)
}

/// Redfield kernel restricted to on-shell terms: `E_p = E_q` on the first
/// term, `E_p' = E_q'` on the second, and `E_pq = E_p'q'` on the merged gain
/// term, which then carries unit weight.
pub fn energy_conserving_kernel(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
) -> Result<Superoperator> {
    check_inputs(spec, couplings, bath)?;
    let table = correlation_table(spec, bath, couplings.adjoint_map(), 0.0)?;
    let terms = Terms {
        t1: |p, q, _q2, l| spec.same_class(p, q).then(|| spec.bin_index(q, l)),
        t2: |_q, q2, p2, l| spec.same_class(p2, q2).then(|| spec.bin_index(q2, l)),
        t34: |p, p2, q, q2| {
            let on_shell = spec.bin_index(p, q) == spec.bin_index(p2, q2);
            if on_shell {
                // on shell E_qp and E_q'p' share a bin, so either argument
                // gives the same bit pattern
                debug_assert_eq!(spec.bohr(q, p), spec.bohr(q2, p2));
                [(1.0, Some(spec.bin_index(q2, p2))), (0.0, None)]
            } else {
                [(0.0, None), (0.0, None)]
            }
        },
    };
    Ok(assemble(spec, couplings, &[&table], terms, [0; 4]))
}

/// `Σ_ω Σ_{αβ} γ^{αβ}(ω) [S^β(ω) ρ S^α(ω)† - ½ {S^α(ω)† S^β(ω), ρ}]` in
/// superoperator form.
pub fn lindblad_kernel(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
) -> Result<Superoperator> {
    check_inputs(spec, couplings, bath)?;
    let jumps = decompose_jump_operators(spec, couplings)?;
    let d = spec.dim();
    let mut k = Superoperator::zeros(d);
    for b in 0..jumps.bins() {
        let active = jumps.active_channels(b);
        if active.is_empty() {
            continue;
        }
        let gamma = bath.gamma(jumps.frequency(b));
        if gamma.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidBath(format!(
                "non-finite rate at omega = {}",
                jumps.frequency(b)
            )));
        }
        for &a in &active {
            let sa = &jumps.get(b, a).matrix;
            let sa_dag = sa.adjoint();
            for &bb in &active {
                let g = gamma[(a, bb)];
                if g == C64::new(0.0, 0.0) {
                    continue;
                }
                let sb = &jumps.get(b, bb).matrix;
                let anti = &sa_dag * sb;
                let half = g * 0.5;
                for p in 0..d {
                    for p2 in 0..d {
                        for q in 0..d {
                            for q2 in 0..d {
                                let mut v = g * sb[(p, q)] * sa[(p2, q2)].conj();
                                if p2 == q2 {
                                    v -= half * anti[(p, q)];
                                }
                                if p == q {
                                    v -= half * anti[(q2, p2)];
                                }
                                if v != C64::new(0.0, 0.0) {
                                    k.add_to(p, p2, q, q2, v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(k)
}

pub fn build_kernel(
    variant: KernelVariant,
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
) -> Result<Kernel> {
    let superop = match variant {
        KernelVariant::BornFrequency(w) => born_kernel_frequency(spec, couplings, bath, w)?,
        KernelVariant::RedfieldQq => redfield_kernel(spec, couplings, bath, RedfieldAnsatz::QQ)?,
        KernelVariant::RedfieldPp => redfield_kernel(spec, couplings, bath, RedfieldAnsatz::PP)?,
        KernelVariant::EnergyConserving => energy_conserving_kernel(spec, couplings, bath)?,
        KernelVariant::Lindblad => lindblad_kernel(spec, couplings, bath)?,
    };
    Ok(Kernel {
        variant,
        provenance: Provenance::new(spec, couplings, bath),
        superop,
    })
}

/// Rate matrix `γ^{αβ}(ω)` of one Bohr bin, restricted to the channels with
/// a nonzero jump operator there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KossakowskiMatrix {
    pub bin: usize,
    pub frequency: f64,
    pub channels: Vec<usize>,
    #[serde(skip)]
    pub matrix: CMat,
    pub min_eigenvalue: f64,
    pub psd: bool,
}

pub fn kossakowski_matrix(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
    bath: &BathSpectrum,
    bin: usize,
) -> Result<KossakowskiMatrix> {
    check_inputs(spec, couplings, bath)?;
    if bin >= spec.bohr_bins().len() {
        return Err(Error::EmptyBin(format!(
            "bin {bin} out of range ({} bins)",
            spec.bohr_bins().len()
        )));
    }
    let jumps = decompose_jump_operators(spec, couplings)?;
    let channels = jumps.active_channels(bin);
    if channels.is_empty() {
        return Err(Error::EmptyBin(format!(
            "no channel has a transition at omega = {}",
            jumps.frequency(bin)
        )));
    }
    let frequency = jumps.frequency(bin);
    let full = bath.gamma(frequency);
    let matrix = CMat::from_fn(channels.len(), channels.len(), |i, j| {
        full[(channels[i], channels[j])]
    });
    let min = min_eigenvalue(&hermitize(&matrix));
    let psd = min >= -1e-12 * matrix.camax().max(1.0);
    Ok(KossakowskiMatrix {
        bin,
        frequency,
        channels,
        matrix,
        min_eigenvalue: min,
        psd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::TabulatedSpectrum;
    use crate::random::{random_couplings, random_spectrum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit() -> (EnergySpectrum, CouplingChannelSet) {
        (
            EnergySpectrum::new(vec![-0.5, 0.5]).unwrap(),
            CouplingChannelSet::qubit_rotating(),
        )
    }

    fn three_level() -> (EnergySpectrum, CouplingChannelSet) {
        let spec = EnergySpectrum::new(vec![0.0, 0.3, 1.0]).unwrap();
        let x = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(0.0, 0.0)
            } else {
                C64::new(1.0, 0.0)
            }
        });
        (
            spec,
            CouplingChannelSet::hermitian(vec![("x".into(), x)], 3).unwrap(),
        )
    }

    #[test]
    fn zero_coupling_gives_zero_kernels() {
        let spec = EnergySpectrum::new(vec![0.0, 0.3, 1.0]).unwrap();
        let c = CouplingChannelSet::zero(3, 2);
        let bath = BathSpectrum::thermal_ohmic(2, 0.2, 5.0, 1.0).unwrap();
        for v in [
            KernelVariant::BornFrequency(0.4),
            KernelVariant::RedfieldQq,
            KernelVariant::RedfieldPp,
            KernelVariant::EnergyConserving,
            KernelVariant::Lindblad,
        ] {
            let k = build_kernel(v, &spec, &c, &bath).unwrap();
            assert_eq!(k.superop.max_abs(), 0.0, "{v}");
        }
        let (s, c) = qubit();
        let zero_bath = BathSpectrum::flat(2, 0.0).unwrap();
        assert_eq!(lindblad_kernel(&s, &c, &zero_bath).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn qubit_flat_lindblad_matches_rate_oracle() {
        let (spec, c) = qubit();
        let g = 0.3;
        let bath = BathSpectrum::flat(2, g).unwrap();
        let k = lindblad_kernel(&spec, &c, &bath).unwrap();
        let (m, p) = (0, 1);
        let tol = 1e-15;
        assert!((k.get(p, p, m, m).re - g).abs() < tol);
        assert!((k.get(m, m, p, p).re - g).abs() < tol);
        assert!((k.get(p, p, p, p).re + g).abs() < tol);
        assert!((k.get(m, m, m, m).re + g).abs() < tol);
        assert!((k.get(p, m, p, m).re + g).abs() < tol);
        assert!((k.get(m, p, m, p).re + g).abs() < tol);
        let entries = k.matrix().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(entries, 6);
    }

    #[test]
    fn born_trace_condition_and_flat_frequency_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let c = random_couplings(&mut rng, 2);
        let bath = BathSpectrum::flat(c.len(), 0.8).unwrap();
        let k = born_kernel_frequency(&spec, &c, &bath, 0.37).unwrap();
        assert!(k.trace_condition_residual() < 1e-12);
        let k0 = born_kernel_frequency(&spec, &c, &bath, 0.0).unwrap();
        for w in [-3.0, -0.5, 0.1, 1.0, 7.5] {
            let kw = born_kernel_frequency(&spec, &c, &bath, w).unwrap();
            assert!(kw.difference(&k0).unwrap().max_abs < 1e-12);
        }
    }

    #[test]
    fn qubit_variants_coincide() {
        let (spec, c) = qubit();
        let bath = BathSpectrum::thermal_ohmic(2, 0.1, 5.0, 2.0).unwrap();
        let qq = redfield_kernel(&spec, &c, &bath, RedfieldAnsatz::QQ).unwrap();
        let pp = redfield_kernel(&spec, &c, &bath, RedfieldAnsatz::PP).unwrap();
        let ec = energy_conserving_kernel(&spec, &c, &bath).unwrap();
        let li = lindblad_kernel(&spec, &c, &bath).unwrap();
        assert_eq!(qq.difference(&pp).unwrap().max_abs, 0.0);
        assert!(qq.difference(&ec).unwrap().max_abs < 1e-15);
        assert!(ec.difference(&li).unwrap().max_abs < 1e-15);
    }

    #[test]
    fn three_level_ansatz_discrepancy_sits_on_coherences() {
        let (spec, c) = three_level();
        let bath = BathSpectrum::thermal_ohmic(1, 0.2, 5.0, 1.0).unwrap();
        let qq = redfield_kernel(&spec, &c, &bath, RedfieldAnsatz::QQ).unwrap();
        let pp = redfield_kernel(&spec, &c, &bath, RedfieldAnsatz::PP).unwrap();
        let diff = qq.difference(&pp).unwrap();
        assert!(diff.max_abs > 1e-3 * qq.max_abs());
        assert!(!diff.out.is_population() || !diff.inp.is_population());
        let d = 3;
        for r in 0..9 {
            for col in 0..9 {
                let (o, i) = (
                    crate::SuperIndex::from_flat(r, d),
                    crate::SuperIndex::from_flat(col, d),
                );
                if o.is_population() && i.is_population() {
                    assert_eq!(qq.matrix()[(r, col)], pp.matrix()[(r, col)]);
                }
            }
        }
    }

    #[test]
    fn nondegenerate_energy_conserving_has_kronecker_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = random_spectrum(&mut rng, 4, false);
        let c = random_couplings(&mut rng, 4);
        let bath = BathSpectrum::thermal_ohmic(c.len(), 0.3, 4.0, 1.5).unwrap();
        let ec = energy_conserving_kernel(&spec, &c, &bath).unwrap();
        let qq = redfield_kernel(&spec, &c, &bath, RedfieldAnsatz::QQ).unwrap();
        let d = 4;
        for p in 0..d {
            for p2 in 0..d {
                for q in 0..d {
                    for q2 in 0..d {
                        let v = ec.get(p, p2, q, q2);
                        // populations only feed populations, coherences only themselves
                        let allowed = (p == p2 && q == q2) || (p == q && p2 == q2);
                        if !allowed {
                            assert_eq!(v, C64::new(0.0, 0.0), "({p}{p2},{q}{q2})");
                        }
                    }
                }
            }
        }
        // population block agrees with Redfield
        for p in 0..d {
            for q in 0..d {
                assert!((ec.get(p, p, q, q) - qq.get(p, p, q, q)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hermiticity_preservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 2..=5 {
            let spec = random_spectrum(&mut rng, d, d % 2 == 0);
            let c = random_couplings(&mut rng, d);
            let bath = BathSpectrum::thermal_ohmic(c.len(), 0.2, 3.0, 0.7).unwrap();
            for v in KernelVariant::MARKOV
                .into_iter()
                .chain([KernelVariant::BornFrequency(0.0)])
            {
                let k = build_kernel(v, &spec, &c, &bath).unwrap();
                assert!(k.superop.hermiticity_residual() < 1e-13, "{v} d={d}");
            }
        }
    }

    #[test]
    fn kossakowski_bins() {
        let (spec, c) = qubit();
        let flat = BathSpectrum::flat(2, 0.5).unwrap();
        // bin 0 is ω = -1 where only σ⁺ (channel 0) acts
        let k = kossakowski_matrix(&spec, &c, &flat, 0).unwrap();
        assert_eq!(k.channels, vec![0]);
        assert_eq!(k.matrix[(0, 0)].re, 0.5);
        assert!(k.psd);
        let ohm = BathSpectrum::thermal_ohmic(2, 0.1, 5.0, 1.0).unwrap();
        let k = kossakowski_matrix(&spec, &c, &ohm, 2).unwrap();
        assert_eq!(k.channels, vec![1]);
        assert!(k.matrix[(0, 0)].re > 0.0 && k.psd);
        assert!(matches!(
            kossakowski_matrix(&spec, &c, &ohm, 1),
            Err(Error::EmptyBin(_))
        ));

        // hermitian two-channel coupling with an indefinite table
        let x = CMat::from_fn(2, 2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0));
        let y = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => C64::new(0.0, 0.0),
        });
        let cc = CouplingChannelSet::hermitian(vec![("x".into(), x), ("y".into(), y)], 2).unwrap();
        let bad = CMat::from_fn(2, 2, |i, j| C64::new(if i == j { 1.0 } else { 2.0 }, 0.0));
        let t = TabulatedSpectrum::new(vec![-2.0, 2.0], vec![bad.clone(), bad], None).unwrap();
        let k = kossakowski_matrix(&spec, &cc, &BathSpectrum::tabulated(t), 2).unwrap();
        assert!(!k.psd);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("lindblad".parse::<KernelVariant>().unwrap(), KernelVariant::Lindblad);
        assert_eq!(
            "born:0.5".parse::<KernelVariant>().unwrap(),
            KernelVariant::BornFrequency(0.5)
        );
        assert_eq!(
            "Redfield-QQ".parse::<KernelVariant>().unwrap(),
            KernelVariant::RedfieldQq
        );
        assert!("nope".parse::<KernelVariant>().is_err());
        for v in KernelVariant::MARKOV {
            assert_eq!(v.to_string().parse::<KernelVariant>().unwrap(), v);
        }
    }

    #[test]
    fn provenance_tracks_inputs() {
        let (spec, c) = qubit();
        let bath = BathSpectrum::flat(2, 1.0).unwrap();
        let a = Provenance::new(&spec, &c, &bath);
        let spec2 = EnergySpectrum::new(vec![-0.5, 0.6]).unwrap();
        let b = Provenance::new(&spec2, &c, &bath);
        assert_ne!(a.spectrum_hash, b.spectrum_hash);
        assert_eq!(a.coupling_hash, b.coupling_hash);
        assert_eq!(a.spectrum_hash.len(), 64);
    }
}

//! System coupling operators `S^α` and their Bohr-frequency decomposition.


use crate::error::{Error, Result};
use crate::spectrum::EnergySpectrum;
use crate::{CMat, C64};

/// Relative tolerance for accepting `S^ᾱ ≈ (S^α)†` on input.
const ADJOINT_TOL: f64 = 1e-10;

/// Coupling operators in the energy basis together with the involution
/// `α -> ᾱ` that pairs each channel with its hermitian conjugate, so that
/// `Σ_α S^α B^α` is hermitian.
///
/// On construction the pairing is enforced exactly: `S^ᾱ` is overwritten with
/// `(S^α)†` for `α < ᾱ` and self-paired channels are hermitized.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingChannelSet {
    labels: Vec<String>,
    matrices: Vec<CMat>,
    adjoint: Vec<usize>,
}

impl CouplingChannelSet {
    pub fn new(channels: Vec<(String, CMat)>, adjoint: Vec<usize>, dim: usize) -> Result<Self> {
        let n = channels.len();
        if adjoint.len() != n {
            return Err(Error::InvalidCoupling(format!(
                "adjoint map has {} entries for {n} channels",
                adjoint.len()
            )));
        }
        for (a, &b) in adjoint.iter().enumerate() {
            if b >= n || adjoint[b] != a {
                return Err(Error::InvalidCoupling(format!(
                    "adjoint map is not an involution at channel {a}"
                )));
            }
        }
        let (labels, mut matrices): (Vec<_>, Vec<_>) = channels.into_iter().unzip();
        for (a, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows().max(m.ncols()),
                    context: format!("coupling channel {a}"),
                });
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidCoupling(format!("channel {a} has non-finite entries")));
            }
        }
        for a in 0..n {
            let b = adjoint[a];
            let dev = (&matrices[b] - matrices[a].adjoint()).camax();
            let scale = 1.0 + matrices[a].camax();
            if dev > ADJOINT_TOL * scale {
                return Err(Error::InvalidCoupling(format!(
                    "channel {b} is not the adjoint of channel {a} (max deviation {dev:e})"
                )));
            }
        }
        for a in 0..n {
            let b = adjoint[a];
            if a == b {
                let h = (&matrices[a] + matrices[a].adjoint()) * C64::new(0.5, 0.0);
                matrices[a] = h;
            } else if a < b {
                matrices[b] = matrices[a].adjoint();
            }
        }
        Ok(Self {
            labels,
            matrices,
            adjoint,
        })
    }

    /// Self-paired hermitian channels.
    pub fn hermitian(channels: Vec<(String, CMat)>, dim: usize) -> Result<Self> {
        let adjoint = (0..channels.len()).collect();
        Self::new(channels, adjoint, dim)
    }

    /// Builds channel pairs `(A, A†)` from arbitrary operators `A`.
    pub fn from_pairs(ops: Vec<(String, CMat)>, dim: usize) -> Result<Self> {
        let mut channels = Vec::with_capacity(2 * ops.len());
        let mut adjoint = Vec::with_capacity(2 * ops.len());
        for (i, (label, m)) in ops.into_iter().enumerate() {
            let dag = m.adjoint();
            channels.push((label.clone(), m));
            channels.push((format!("{label}^dag"), dag));
            adjoint.push(2 * i + 1);
            adjoint.push(2 * i);
        }
        Self::new(channels, adjoint, dim)
    }

    /// Qubit coupling `σ⁺ B + σ⁻ B†` with level 0 the ground state:
    /// channel 0 is `σ⁺ = |1⟩⟨0|`, channel 1 is `σ⁻ = |0⟩⟨1|`.
    pub fn qubit_rotating() -> Self {
        let mut up = CMat::zeros(2, 2);
        up[(1, 0)] = C64::new(1.0, 0.0);
        let down = up.adjoint();
        Self::new(
            vec![("sigma_plus".into(), up), ("sigma_minus".into(), down)],
            vec![1, 0],
            2,
        )
        .expect("qubit coupling is consistent")
    }

    /// All channels zero, self-paired.
    pub fn zero(dim: usize, channels: usize) -> Self {
        let chans = (0..channels)
            .map(|a| (format!("zero{a}"), CMat::zeros(dim, dim)))
            .collect();
        Self::hermitian(chans, dim).expect("zero coupling is consistent")
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices.first().map(|m| m.nrows()).unwrap_or(0)
    }

    pub fn matrix(&self, alpha: usize) -> &CMat {
        &self.matrices[alpha]
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn adjoint_map(&self) -> &[usize] {
        &self.adjoint
    }

    pub fn adjoint_of(&self, alpha: usize) -> usize {
        self.adjoint[alpha]
    }

    pub fn check_dim(&self, spec: &EnergySpectrum) -> Result<()> {
        if !self.is_empty() && self.dim() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                found: self.dim(),
                context: "coupling operators vs spectrum".into(),
            });
        }
        Ok(())
    }
}

/// `S^α(ω)` for one channel and one Bohr bin.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub frequency: f64,
    pub bin: usize,
    pub channel: usize,
    pub matrix: CMat,
}

impl JumpOperator {
    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
}

/// Bohr-frequency resolved coupling operators, laid out bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperatorSet {
    channels: usize,
    frequencies: Vec<f64>,
    ops: Vec<JumpOperator>,
}

impl JumpOperatorSet {
    pub fn get(&self, bin: usize, channel: usize) -> &JumpOperator {
        &self.ops[bin * self.channels + channel]
    }

    pub fn bins(&self) -> usize {
        self.frequencies.len()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.frequencies[bin]
    }

    pub fn iter(&self) -> impl Iterator<Item = &JumpOperator> {
        self.ops.iter()
    }

    /// Nonzero entries only.
    pub fn nonzero(&self) -> impl Iterator<Item = &JumpOperator> {
        self.ops.iter().filter(|j| !j.is_zero())
    }

    /// Channels with a nonzero operator in `bin`.
    pub fn active_channels(&self, bin: usize) -> Vec<usize> {
        (0..self.channels)
            .filter(|&a| !self.get(bin, a).is_zero())
            .collect()
    }

    /// `max_α ‖Σ_ω S^α(ω) - S^α‖_max`.
    pub fn completeness_residual(&self, couplings: &CouplingChannelSet) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.channels {
            let mut sum = couplings.matrix(a).clone() * C64::new(-1.0, 0.0);
            for b in 0..self.bins() {
                sum += &self.get(b, a).matrix;
            }
            worst = worst.max(sum.camax());
        }
        worst
    }
}

/// Splits every `S^α` into `S^α(ω)`, keeping the entries `S^α_pq` whose
/// `E_qp` falls in the bin of `ω`.
pub fn decompose_jump_operators(
    spec: &EnergySpectrum,
    couplings: &CouplingChannelSet,
) -> Result<JumpOperatorSet> {
    couplings.check_dim(spec)?;
    let d = spec.dim();
    let bins = spec.bohr_bins();
    let nc = couplings.len();
    let mut ops = Vec::with_capacity(bins.len() * nc);
    for (b, bin) in bins.iter().enumerate() {
        for a in 0..nc {
            let s = couplings.matrix(a);
            let m = CMat::from_fn(d, d, |p, q| {
                if spec.bin_index(q, p) == b {
                    s[(p, q)]
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            ops.push(JumpOperator {
                frequency: bin.frequency,
                bin: b,
                channel: a,
                matrix: m,
            });
        }
    }
    Ok(JumpOperatorSet {
        channels: nc,
        frequencies: bins.iter().map(|b| b.frequency).collect(),
        ops,
    })
}

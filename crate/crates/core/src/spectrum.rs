//! Energy levels of the system Hamiltonian, degeneracy classes and Bohr bins.
//!
//! Every Bohr frequency used by the kernels comes from [`EnergySpectrum::bohr`],
//! which returns the representative frequency of the bin holding `E_p - E_q`.
//! Two differences that fall in the same bin are therefore bit-identical, and
//! the selection rules of the energy-conserving kernel reduce to integer
//! comparisons of bin indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative factor for the default degeneracy tolerance.
pub const DEFAULT_EPS_SCALE: f64 = 1e-9;

/// A group of pairs `(p, q)` whose Bohr frequency `E_p - E_q` agrees within
/// the degeneracy tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BohrBin {
    pub frequency: f64,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    levels: Vec<f64>,
    labels: Vec<String>,
    eps_deg: f64,
    class_of: Vec<usize>,
    class_energy: Vec<f64>,
    bins: Vec<BohrBin>,
    /// `bin_of[p * d + q]` is the bin holding `E_p - E_q`.
    bin_of: Vec<usize>,
}

/// Groups sorted values into clusters whose span is at most `eps`.
///
/// Fails when two neighbouring values are separated by a gap in `(eps, 2 eps]`
/// or when a chain of small gaps stretches a cluster beyond `eps`.
fn cluster_sorted(values: &[f64], eps: f64, what: &str) -> Result<Vec<(usize, usize)>> {
    let mut clusters = Vec::new();
    if values.is_empty() {
        return Ok(clusters);
    }
    let mut start = 0;
    for i in 1..values.len() {
        let gap = values[i] - values[i - 1];
        if gap <= eps {
            if values[i] - values[start] > eps {
                return Err(Error::AmbiguousDegeneracy(format!(
                    "{what}: chain of gaps spans {:e} > eps_deg {eps:e} near {}",
                    values[i] - values[start],
                    values[start]
                )));
            }
            continue;
        }
        if gap <= 2.0 * eps {
            return Err(Error::AmbiguousDegeneracy(format!(
                "{what}: gap {gap:e} between {} and {} lies in (eps_deg, 2 eps_deg]",
                values[i - 1],
                values[i]
            )));
        }
        clusters.push((start, i));
        start = i;
    }
    clusters.push((start, values.len()));
    Ok(clusters)
}

impl EnergySpectrum {
    /// Builds a spectrum with the default scale-aware tolerance
    /// `1e-9 * max |E_n|`.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let scale = levels.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        Self::with_tolerance(levels, DEFAULT_EPS_SCALE * scale)
    }

    pub fn with_tolerance(levels: Vec<f64>, eps_deg: f64) -> Result<Self> {
        let labels = (0..levels.len()).map(|n| n.to_string()).collect();
        Self::with_labels(levels, labels, eps_deg)
    }

    pub fn with_labels(levels: Vec<f64>, labels: Vec<String>, eps_deg: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidSpectrum("no levels".into()));
        }
        if labels.len() != levels.len() {
            return Err(Error::DimensionMismatch {
                expected: levels.len(),
                found: labels.len(),
                context: "level labels".into(),
            });
        }
        if let Some(n) = levels.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("level {n} is not finite")));
        }
        if !(eps_deg >= 0.0) || !eps_deg.is_finite() {
            return Err(Error::InvalidSpectrum(format!(
                "eps_deg must be a finite nonnegative number, got {eps_deg}"
            )));
        }
        if let Some(n) = levels.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpectrum(format!(
                "levels must be sorted non-decreasing (level {} < level {n})",
                n + 1
            )));
        }

        let d = levels.len();
        let classes = cluster_sorted(&levels, eps_deg, "levels")?;
        let mut class_of = vec![0; d];
        let mut class_energy = Vec::with_capacity(classes.len());
        for (c, &(a, b)) in classes.iter().enumerate() {
            for slot in &mut class_of[a..b] {
                *slot = c;
            }
            class_energy.push(levels[a..b].iter().sum::<f64>() / (b - a) as f64);
        }

        // Positive differences between classes, clustered into bins.
        let nc = class_energy.len();
        let mut diffs: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..nc {
            for j in 0..i {
                diffs.push((class_energy[i] - class_energy[j], i, j));
            }
        }
        diffs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let values: Vec<f64> = diffs.iter().map(|x| x.0).collect();
        let clusters = cluster_sorted(&values, eps_deg, "Bohr frequencies")?;
        if let Some(first) = values.first() {
            if *first <= 2.0 * eps_deg {
                return Err(Error::AmbiguousDegeneracy(format!(
                    "smallest class gap {first:e} is not resolved by eps_deg {eps_deg:e}"
                )));
            }
        }

        // class-pair -> signed bin number (0 is the zero bin, +k / -k mirrored)
        let mut class_bin = vec![0i64; nc * nc];
        let mut positive: Vec<f64> = Vec::with_capacity(clusters.len());
        for (k, &(a, b)) in clusters.iter().enumerate() {
            let freq = values[a..b].iter().sum::<f64>() / (b - a) as f64;
            positive.push(freq);
            for &(_, i, j) in &diffs[a..b] {
                class_bin[i * nc + j] = k as i64 + 1;
                class_bin[j * nc + i] = -(k as i64 + 1);
            }
        }

        let np = positive.len();
        let mut bins: Vec<BohrBin> = Vec::with_capacity(2 * np + 1);
        for k in (0..np).rev() {
            bins.push(BohrBin {
                frequency: -positive[k],
                pairs: Vec::new(),
            });
        }
        bins.push(BohrBin {
            frequency: 0.0,
            pairs: Vec::new(),
        });
        for &f in &positive {
            bins.push(BohrBin {
                frequency: f,
                pairs: Vec::new(),
            });
        }
        let mut bin_of = vec![0; d * d];
        for p in 0..d {
            for q in 0..d {
                let signed = class_bin[class_of[p] * nc + class_of[q]];
                let idx = (np as i64 + signed) as usize;
                bin_of[p * d + q] = idx;
                bins[idx].pairs.push((p, q));
            }
        }

        Ok(Self {
            levels,
            labels,
            eps_deg,
            class_of,
            class_energy,
            bins,
            bin_of,
        })
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn eps_deg(&self) -> f64 {
        self.eps_deg
    }

    /// Degeneracy class of each level.
    pub fn class_of(&self, n: usize) -> usize {
        self.class_of[n]
    }

    pub fn class_energies(&self) -> &[f64] {
        &self.class_energy
    }

    /// Member levels of every degeneracy class.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_energy.len()];
        for (n, &c) in self.class_of.iter().enumerate() {
            out[c].push(n);
        }
        out
    }

    pub fn is_degenerate(&self) -> bool {
        self.class_energy.len() < self.levels.len()
    }

    pub fn same_class(&self, p: usize, q: usize) -> bool {
        self.class_of[p] == self.class_of[q]
    }

    /// Bohr bins sorted by frequency; symmetric under `ω -> -ω`.
    pub fn bohr_bins(&self) -> &[BohrBin] {
        &self.bins
    }

    /// Index into [`Self::bohr_bins`] of the bin holding `E_p - E_q`.
    pub fn bin_index(&self, p: usize, q: usize) -> usize {
        self.bin_of[p * self.dim() + q]
    }

    /// Binned Bohr frequency `E_pq = E_p - E_q`.
    pub fn bohr(&self, p: usize, q: usize) -> f64 {
        self.bins[self.bin_index(p, q)].frequency
    }

    /// Index of the zero-frequency bin.
    pub fn zero_bin(&self) -> usize {
        (self.bins.len() - 1) / 2
    }

    /// Largest |E_pq|.
    pub fn max_bohr(&self) -> f64 {
        self.bins.last().map(|b| b.frequency).unwrap_or(0.0)
    }
}

/// Distinct Bohr frequencies with their member pairs.
pub fn bohr_frequencies(spec: &EnergySpectrum) -> &[BohrBin] {
    spec.bohr_bins()
}

//! Seeded random systems for property tests and the acceptance suite.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bath::BathSpectrum;
use crate::coupling::CouplingChannelSet;
use crate::spectrum::EnergySpectrum;
use crate::{CMat, CVec, C64};

fn normal_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. complex Gaussian entries of standard deviation `scale`.
pub fn random_operator<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> CMat {
    CMat::from_fn(d, d, |_, _| normal_c64(rng) * scale)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> CMat {
    let a = random_operator(rng, d, scale);
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Positive semidefinite `A A† / n` (full rank almost surely).
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let a = random_operator(rng, n, 1.0);
    let m = &a * a.adjoint() / C64::new(n as f64, 0.0);
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Haar-random unit vector.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVec {
    let v = CVec::from_fn(d, |_, _| normal_c64(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Sorted levels in `[0, 2)`; with `degenerate`, at least one level repeats
/// exactly.
pub fn random_levels<R: Rng + ?Sized>(rng: &mut R, d: usize, degenerate: bool) -> Vec<f64> {
    let distinct = if degenerate && d > 1 {
        rng.random_range(1..d)
    } else {
        d
    };
    let base: Vec<f64> = (0..distinct).map(|_| rng.random_range(0.0..2.0)).collect();
    let mut levels: Vec<f64> = base.clone();
    while levels.len() < d {
        levels.push(base[rng.random_range(0..distinct)]);
    }
    levels.sort_by(f64::total_cmp);
    levels
}

/// Spectrum with default tolerance; redraws until the clustering is
/// unambiguous and gaps exceed ten times the tolerance.
pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, d: usize, degenerate: bool) -> EnergySpectrum {
    loop {
        let levels = random_levels(rng, d, degenerate);
        let Ok(spec) = EnergySpectrum::new(levels) else {
            continue;
        };
        let eps = spec.eps_deg();
        let gaps_ok = spec
            .class_energies()
            .windows(2)
            .all(|w| w[1] - w[0] >= 10.0 * eps);
        let degenerate_ok = !degenerate || spec.is_degenerate() || d == 1;
        if gaps_ok && degenerate_ok {
            return spec;
        }
    }
}

/// Coupling with adjoint-paired random channels, hermitian channels, or both.
pub fn random_couplings<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CouplingChannelSet {
    let scale = 0.5;
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(1..=2);
            let ops = (0..n)
                .map(|i| (format!("A{i}"), random_operator(rng, d, scale)))
                .collect();
            CouplingChannelSet::from_pairs(ops, d).expect("random pairs are valid")
        }
        1 => {
            let n = rng.random_range(1..=3);
            let ops = (0..n)
                .map(|i| (format!("X{i}"), random_hermitian(rng, d, scale)))
                .collect();
            CouplingChannelSet::hermitian(ops, d).expect("random hermitian channels are valid")
        }
        _ => {
            let a = random_operator(rng, d, scale);
            let x = random_hermitian(rng, d, scale);
            let mut mats = vec![
                ("A".to_string(), a.clone()),
                ("A_dag".to_string(), a.adjoint()),
                ("X".to_string(), x),
            ];
            // shuffle the position of the hermitian channel to exercise the map
            let pos = rng.random_range(0..3);
            mats.swap(2, pos);
            let adjoint: Vec<usize> = {
                let names: Vec<&str> = mats.iter().map(|(n, _)| n.as_str()).collect();
                names
                    .iter()
                    .map(|n| {
                        let partner = match *n {
                            "A" => "A_dag",
                            "A_dag" => "A",
                            other => other,
                        };
                        names.iter().position(|m| *m == partner).unwrap()
                    })
                    .collect()
            };
            CouplingChannelSet::new(mats, adjoint, d).expect("mixed coupling is valid")
        }
    }
}

/// Thermal-Ohmic or flat bath, optionally with a random channel matrix.
pub fn random_bath<R: Rng + ?Sized>(rng: &mut R, channels: usize, thermal: bool) -> BathSpectrum {
    let bath = if thermal {
        let beta = rng.random_range(0.5..5.0);
        let eta = rng.random_range(0.05..0.5);
        let cutoff = rng.random_range(1.0..10.0);
        BathSpectrum::thermal_ohmic(channels, eta, cutoff, beta).expect("valid ohmic parameters")
    } else {
        BathSpectrum::flat(channels, rng.random_range(0.1..1.0)).expect("valid flat rate")
    };
    if rng.random_bool(0.5) {
        bath.with_channel_matrix(random_psd(rng, channels))
            .expect("random PSD channel matrix")
    } else {
        bath
    }
}

/// One member of the randomized test box.
#[derive(Debug, Clone)]
pub struct TestSystem {
    pub seed: u64,
    pub index: usize,
    pub spectrum: EnergySpectrum,
    pub couplings: CouplingChannelSet,
    pub bath: BathSpectrum,
}

impl TestSystem {
    pub fn describe(&self) -> String {
        format!(
            "seed {} #{}: d={} degenerate={} channels={} bath={}",
            self.seed,
            self.index,
            self.spectrum.dim(),
            self.spectrum.is_degenerate(),
            self.couplings.len(),
            self.bath.id()
        )
    }
}

/// `count` systems cycling through d = 2..=6, alternating nondegenerate and
/// degenerate spectra and thermal and flat baths. Deterministic in `seed`.
pub fn test_box(seed: u64, count: usize) -> Vec<TestSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let d = 2 + i % 5;
            let degenerate = (i / 5) % 2 == 1;
            let thermal = (i / 10) % 2 == 0;
            let spectrum = random_spectrum(&mut rng, d, degenerate);
            let couplings = random_couplings(&mut rng, d);
            let bath = random_bath(&mut rng, couplings.len(), thermal);
            TestSystem {
                seed,
                index: i,
                spectrum,
                couplings,
                bath,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_deterministic_and_covers_the_matrix() {
        let a = test_box(5, 20);
        let b = test_box(5, 20);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.spectrum.levels(), y.spectrum.levels());
            assert_eq!(x.couplings.matrices(), y.couplings.matrices());
        }
        assert!(a.iter().any(|s| s.spectrum.is_degenerate()));
        assert!(a.iter().any(|s| !s.spectrum.is_degenerate()));
        assert!(a.iter().any(|s| s.bath.kind_name() == "flat"));
        assert!(a.iter().any(|s| s.bath.kind_name() == "thermal_ohmic"));
        for s in &a {
            assert_eq!(s.bath.channels(), s.couplings.len());
            assert!((2..=6).contains(&s.spectrum.dim()));
        }
    }

    #[test]
    fn haar_state_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..6 {
            assert!((haar_state(&mut rng, d).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn psd_has_nonnegative_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_psd(&mut rng, 4);
        assert!(crate::density::min_eigenvalue(&m) >= 0.0);
    }
}

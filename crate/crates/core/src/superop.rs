//! Dense superoperators over index pairs.
//!
//! Rows are the outgoing pair `(p, p')`, columns the incoming pair `(q, q')`,
//! both flattened row-major: `idx = p * d + p'`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SuperIndex {
    pub p: usize,
    pub p2: usize,
}

impl SuperIndex {
    pub fn new(p: usize, p2: usize) -> Self {
        Self { p, p2 }
    }

    pub fn flat(self, d: usize) -> usize {
        self.p * d + self.p2
    }

    pub fn from_flat(idx: usize, d: usize) -> Self {
        Self {
            p: idx / d,
            p2: idx % d,
        }
    }

    pub fn is_population(self) -> bool {
        self.p == self.p2
    }
}

/// Row-major vectorization of a `d x d` matrix.
pub fn vectorize(rho: &CMat) -> CVec {
    let d = rho.nrows();
    CVec::from_fn(d * d, |i, _| rho[(i / d, i % d)])
}

pub fn unvectorize(v: &CVec, d: usize) -> CMat {
    CMat::from_fn(d, d, |p, p2| v[p * d + p2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    data: CMat,
}

/// Largest entrywise deviation between two superoperators and where it sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelDifference {
    pub max_abs: f64,
    pub out: SuperIndex,
    pub inp: SuperIndex,
}

impl Superoperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: CMat::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            data: CMat::identity(dim * dim, dim * dim),
        }
    }

    pub fn from_matrix(dim: usize, data: CMat) -> Result<Self> {
        let n = dim * dim;
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: data.nrows().max(data.ncols()),
                context: "superoperator matrix".into(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds `K_{pp',qq'} = f(p, p', q, q')`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> C64) -> Self {
        let n = dim * dim;
        let data = CMat::from_fn(n, n, |r, c| f(r / dim, r % dim, c / dim, c % dim));
        Self { dim, data }
    }

    /// Superoperator of `rho -> A rho B`: `K_{pp',qq'} = A_pq B_q'p'`.
    pub fn left_right(a: &CMat, b: &CMat) -> Self {
        let d = a.nrows();
        Self::from_fn(d, |p, p2, q, q2| a[(p, q)] * b[(q2, p2)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.data
    }

    pub fn into_matrix(self) -> CMat {
        self.data
    }

    pub fn get(&self, p: usize, p2: usize, q: usize, q2: usize) -> C64 {
        let d = self.dim;
        self.data[(p * d + p2, q * d + q2)]
    }

    pub fn add_to(&mut self, p: usize, p2: usize, q: usize, q2: usize, value: C64) {
        let d = self.dim;
        self.data[(p * d + p2, q * d + q2)] += value;
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        unvectorize(&(&self.data * vectorize(rho)), self.dim)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max_{q,q'} |Σ_p K_{pp,qq'}|`.
    pub fn trace_condition_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for c in 0..d * d {
            let mut s = C64::new(0.0, 0.0);
            for p in 0..d {
                s += self.data[(p * d + p, c)];
            }
            worst = worst.max(s.norm());
        }
        worst
    }

    /// `max |K_{p'p,q'q} - conj(K_{pp',qq'})|`; zero iff hermitian inputs map
    /// to hermitian outputs.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for p in 0..d {
            for p2 in 0..d {
                for q in 0..d {
                    for q2 in 0..d {
                        let a = self.get(p2, p, q2, q);
                        let b = self.get(p, p2, q, q2).conj();
                        worst = worst.max((a - b).norm());
                    }
                }
            }
        }
        worst
    }

    pub fn difference(&self, other: &Superoperator) -> Result<KernelDifference> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
                context: "kernel difference".into(),
            });
        }
        let d = self.dim;
        let mut best = KernelDifference {
            max_abs: 0.0,
            out: SuperIndex::new(0, 0),
            inp: SuperIndex::new(0, 0),
        };
        for r in 0..d * d {
            for c in 0..d * d {
                let v = (self.data[(r, c)] - other.data[(r, c)]).norm();
                if v > best.max_abs {
                    best = KernelDifference {
                        max_abs: v,
                        out: SuperIndex::from_flat(r, d),
                        inp: SuperIndex::from_flat(c, d),
                    };
                }
            }
        }
        Ok(best)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: &self.data * C64::new(s, 0.0),
        }
    }

    pub fn plus(&self, other: &Superoperator) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
                context: "superoperator sum".into(),
            });
        }
        Ok(Self {
            dim: self.dim,
            data: &self.data + &other.data,
        })
    }

    /// Real matrix of the absolute values; handy for printing.
    pub fn abs(&self) -> DMatrix<f64> {
        self.data.map(|z| z.norm())
    }
}

/// Entrywise max |A - B| with its location.
pub fn kernel_difference(a: &Superoperator, b: &Superoperator) -> Result<KernelDifference> {
    a.difference(b)
}

pub fn trace_condition_residual(k: &Superoperator) -> f64 {
    k.trace_condition_residual()
}

//! The loop-weighted path Hamiltonian in the single-excitation subspace.
//!
//! Nodes are numbered `1..=n` in every public signature and report. The
//! matrix is `A_path + Q * (e_d e_d^T + e_{n+1-d} e_{n+1-d}^T)` and is only
//! ever stored as its diagonal and off-diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Behaviour of a vector under the chain reflection `j -> n + 1 - j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `v(j) = v(n + 1 - j)`
    Symmetric,
    /// `v(j) = -v(n + 1 - j)`
    Alternating,
}

impl Parity {
    /// `+1` for symmetric, `-1` for alternating.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Symmetric => 1.0,
            Parity::Alternating => -1.0,
        }
    }
}

/// Chain length, loop weight and loop placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    pub q: f64,
    /// Loops sit on nodes `d` and `n + 1 - d`.
    pub d: usize,
}

impl ChainSpec {
    /// Loops on the second and second-to-last node.
    pub fn new(n: usize, q: f64) -> Result<Self> {
        Self::with_offset(n, q, 2)
    }

    pub fn with_offset(n: usize, q: f64, d: usize) -> Result<Self> {
        let spec = ChainSpec { n, q, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidSpec(format!("n = {} < 4", self.n)));
        }
        if self.d < 2 || self.d > self.n / 2 {
            return Err(Error::InvalidSpec(format!(
                "offset d = {} outside 2..={}",
                self.d,
                self.n / 2
            )));
        }
        if !self.q.is_finite() || self.q < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "loop weight Q = {} must be finite and >= 0",
                self.q
            )));
        }
        Ok(())
    }

    /// `k = n - 3`; the interior profile of a mode is indexed `0..=k`.
    pub fn k(&self) -> usize {
        self.n - 3
    }

    /// 1-based positions of the two loops (equal only when they meet at the center).
    pub fn loop_nodes(&self) -> (usize, usize) {
        (self.d, self.n + 1 - self.d)
    }
}

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalHamiltonian {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TridiagonalHamiltonian {
    /// Builds a general symmetric tridiagonal matrix; used for the parity
    /// blocks, which are not of chain form.
    pub fn from_parts(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidInput(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
                diag.len(),
                offdiag.len()
            )));
        }
        Ok(TridiagonalHamiltonian { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "vector length must match matrix dimension");
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.offdiag[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.offdiag[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// `||H v - lambda v||_2`.
    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        self.apply(v)
            .iter()
            .zip(v)
            .map(|(hv, x)| (hv - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute diagonal entry, floored at 1. Used to scale residual targets.
    pub fn scale(&self) -> f64 {
        self.diag.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// Dense copy, row-major. Only for small oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.offdiag[i];
                m[i + 1][i] = self.offdiag[i];
            }
        }
        m
    }

    /// True when the matrix commutes with the chain reflection.
    pub fn is_reflection_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| self.diag[i] == self.diag[n - 1 - i])
            && (0..n - 1).all(|i| self.offdiag[i] == self.offdiag[n - 2 - i])
    }
}

pub fn build_hamiltonian(spec: &ChainSpec) -> Result<TridiagonalHamiltonian> {
    spec.validate()?;
    let mut diag = vec![0.0; spec.n];
    let (a, b) = spec.loop_nodes();
    diag[a - 1] = spec.q;
    diag[b - 1] = spec.q;
    Ok(TridiagonalHamiltonian {
        diag,
        offdiag: vec![1.0; spec.n - 1],
    })
}

/// A Gershgorin interval `[center - radius, center + radius]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: f64,
    pub radius: f64,
}

impl Disc {
    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }
}

/// One disc per row.
pub fn gershgorin_discs(h: &TridiagonalHamiltonian) -> Vec<Disc> {
    let n = h.dim();
    (0..n)
        .map(|i| {
            let left = if i > 0 { h.offdiag[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { h.offdiag[i].abs() } else { 0.0 };
            Disc {
                center: h.diag[i],
                radius: left + right,
            }
        })
        .collect()
}

/// Entry `j` goes to position `n + 1 - j`.
pub fn reflect(v: &[f64]) -> Vec<f64> {
    v.iter().rev().copied().collect()
}

//! Symmetric tridiagonal eigensolver: Sturm-sequence bisection for the
//! eigenvalues, shifted inverse iteration for the eigenvectors.
//!
//! [`full_decomposition`] first splits a reflection-symmetric matrix into its
//! symmetric and alternating blocks. The two loop-localized eigenvalues of a
//! long chain are degenerate to far below double precision, so solving the
//! unsplit matrix cannot separate them; each block has a simple spectrum and
//! the parity of every eigenvector is exact by construction.

use serde::{Deserialize, Serialize};

use crate::chain::{gershgorin_discs, Disc, Parity, TridiagonalHamiltonian};
use crate::error::{Error, Result};

/// Default absolute bracket width for eigenvalues.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Eigenvectors must satisfy `||H v - lambda v|| <= RESIDUAL_FACTOR * max(1, |diag|_max)`.
pub const RESIDUAL_FACTOR: f64 = 1e-10;

/// Smallest eigenvalue gap tolerated inside one parity block.
pub const MIN_GAP: f64 = 1e-13;

const EXTRA_SWEEPS: usize = 2;

const MAX_INVERSE_ITERATIONS: usize = 8;

/// Full eigensystem with parity labels and the Gershgorin classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    /// Non-decreasing. Exact ties can only occur between opposite parities.
    pub eigenvalues: Vec<f64>,
    /// Unit vectors, `eigenvectors[j]` belongs to `eigenvalues[j]`; `v[0] > 0`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub parities: Vec<Parity>,
    /// Indices into `eigenvalues` that lie in a loop-row Gershgorin disc
    /// isolated from the rest of the spectrum.
    pub outlier_indices: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Indices that are not outliers.
    pub fn bulk_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| !self.outlier_indices.contains(i)).collect()
    }

    /// `psi_j(m)` for every `j`, with `m` 1-based.
    pub fn row(&self, node: usize) -> Vec<f64> {
        self.eigenvectors.iter().map(|v| v[node - 1]).collect()
    }
}

/// Number of eigenvalues below `x`.
///
/// Counts negative pivots of the `LDL^T` factorization of `H - x I`. A pivot
/// that lands exactly on zero is replaced by `-pivmin`, so an eigenvalue hit
/// exactly by `x` is counted.
pub fn sturm_count(h: &TridiagonalHamiltonian, x: f64) -> usize {
    let pivmin = pivmin(h);
    let mut count = 0;
    let mut q = h.diag[0] - x;
    for i in 0..h.dim() {
        if i > 0 {
            let e = h.offdiag[i - 1];
            q = (h.diag[i] - x) - e * e / q;
        }
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Number of eigenvalues `<= x`.
pub fn sturm_count_le(h: &TridiagonalHamiltonian, x: f64) -> usize {
    sturm_count(h, x.next_up())
}

fn pivmin(h: &TridiagonalHamiltonian) -> f64 {
    let emax = h.offdiag.iter().fold(1.0_f64, |acc, e| acc.max(e * e));
    f64::MIN_POSITIVE * emax
}

/// Interval guaranteed to contain the whole spectrum.
pub fn spectrum_bounds(h: &TridiagonalHamiltonian) -> (f64, f64) {
    let discs = gershgorin_discs(h);
    let lo = discs.iter().map(|d| d.lo()).fold(f64::INFINITY, f64::min);
    let hi = discs.iter().map(|d| d.hi()).fold(f64::NEG_INFINITY, f64::max);
    // widen slightly so that the bounds are strict
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    (lo - pad, hi + pad)
}

/// All eigenvalues in `(lo, hi]`, ascending, each located to within `tol`.
///
/// Multiple eigenvalues that cannot be separated in floating point are
/// reported once per multiplicity.
pub fn eigenvalues_bisection(h: &TridiagonalHamiltonian, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    assert!(lo < hi, "bisection needs lo < hi");
    assert!(tol > 0.0, "tolerance must be positive");
    let mut out = Vec::new();
    let c_lo = sturm_count_le(h, lo);
    let c_hi = sturm_count_le(h, hi);
    bisect(h, lo, hi, c_lo, c_hi, tol, &mut out);
    out
}

fn bisect(h: &TridiagonalHamiltonian, lo: f64, hi: f64, c_lo: usize, c_hi: usize, tol: f64, out: &mut Vec<f64>) {
    // explicit stack keeps the recursion depth bounded for large n
    let mut stack = vec![(lo, hi, c_lo, c_hi)];
    let mut found: Vec<f64> = Vec::new();
    while let Some((lo, hi, c_lo, c_hi)) = stack.pop() {
        if c_hi <= c_lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            found.extend(std::iter::repeat_n(mid, c_hi - c_lo));
            continue;
        }
        let c_mid = sturm_count_le(h, mid);
        stack.push((mid, hi, c_mid, c_hi));
        stack.push((lo, mid, c_lo, c_mid));
    }
    found.sort_by(f64::total_cmp);
    out.extend(found);
}

/// Every eigenvalue of `h`, ascending.
pub fn all_eigenvalues(h: &TridiagonalHamiltonian, tol: f64) -> Vec<f64> {
    let (lo, hi) = spectrum_bounds(h);
    eigenvalues_bisection(h, lo, hi, tol)
}

/// Unit eigenvector for an eigenvalue `lambda` that is already accurate.
///
/// The sign is fixed so that the first entry is positive.
pub fn eigenvector_inverse_iteration(h: &TridiagonalHamiltonian, lambda: f64) -> Result<Vec<f64>> {
    let n = h.dim();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let target = RESIDUAL_FACTOR * h.scale();
    let lu = ShiftedLu::factor(h, lambda);

    // fixed, structureless start vector
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i * 7919 % 97) as f64 / 97.0)).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_INVERSE_ITERATIONS {
        lu.solve_in_place(&mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        residual = h.residual(lambda, &v);
        if residual <= target {
            // two extra sweeps damp leftover components of close neighbours
            for _ in 0..EXTRA_SWEEPS {
                lu.solve_in_place(&mut v);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
            }
            if v[0] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok(v);
        }
    }
    Err(Error::NoConvergence { lambda, residual })
}

/// Partially pivoted LU of `H - shift I`, following the LAPACK `gttrf` layout.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(h: &TridiagonalHamiltonian, shift: f64) -> Self {
        let n = h.dim();
        let mut d: Vec<f64> = h.diag.iter().map(|x| x - shift).collect();
        let mut dl = h.offdiag.clone();
        let mut du = h.offdiag.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        // a shift on an eigenvalue makes the last pivot vanish; perturb it
        let tiny = f64::EPSILON * h.scale().max(2.0);
        for p in d.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        ShiftedLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// One parity sector of a reflection-symmetric matrix.
struct ParityBlock {
    parity: Parity,
    matrix: TridiagonalHamiltonian,
}

impl ParityBlock {
    /// Lifts a block eigenvector to a unit vector of the full chain.
    fn expand(&self, u: &[f64], n: usize) -> Vec<f64> {
        let half = n / 2;
        let s = self.parity.sign();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![0.0; n];
        for i in 0..half {
            v[i] = r * u[i];
            v[n - 1 - i] = s * r * u[i];
        }
        if n % 2 == 1 && self.parity == Parity::Symmetric {
            v[half] = u[half];
        }
        v
    }
}

fn parity_blocks(h: &TridiagonalHamiltonian) -> Result<[ParityBlock; 2]> {
    if !h.is_reflection_symmetric() {
        return Err(Error::InvalidInput(
            "matrix does not commute with the chain reflection".into(),
        ));
    }
    let n = h.dim();
    if n < 2 {
        return Err(Error::InvalidInput("parity split needs n >= 2".into()));
    }
    let half = n / 2;
    let head_diag = h.diag[..half].to_vec();
    let head_off = h.offdiag[..half - 1].to_vec();
    let blocks = if n.is_multiple_of(2) {
        let e = h.offdiag[half - 1];
        let mut sym = head_diag.clone();
        let mut alt = head_diag;
        sym[half - 1] += e;
        alt[half - 1] -= e;
        [
            ParityBlock {
                parity: Parity::Symmetric,
                matrix: TridiagonalHamiltonian::from_parts(sym, head_off.clone())?,
            },
            ParityBlock {
                parity: Parity::Alternating,
                matrix: TridiagonalHamiltonian::from_parts(alt, head_off)?,
            },
        ]
    } else {
        let mut sym_diag = head_diag.clone();
        sym_diag.push(h.diag[half]);
        let mut sym_off = head_off.clone();
        sym_off.push(std::f64::consts::SQRT_2 * h.offdiag[half - 1]);
        [
            ParityBlock {
                parity: Parity::Symmetric,
                matrix: TridiagonalHamiltonian::from_parts(sym_diag, sym_off)?,
            },
            ParityBlock {
                parity: Parity::Alternating,
                matrix: TridiagonalHamiltonian::from_parts(head_diag, head_off)?,
            },
        ]
    };
    Ok(blocks)
}

/// Solves both parity blocks and hands every full-length unit eigenvector to
/// `keep`. Results are ordered by eigenvalue, symmetric first on ties.
pub(crate) fn decompose_with<T>(
    h: &TridiagonalHamiltonian,
    tol: f64,
    mut keep: impl FnMut(&[f64]) -> T,
) -> Result<Vec<(f64, Parity, T)>> {
    let n = h.dim();
    let mut pairs = Vec::with_capacity(n);
    for block in parity_blocks(h)? {
        let values = all_eigenvalues(&block.matrix, tol);
        for w in values.windows(2) {
            let gap = w[1] - w[0];
            if gap <= MIN_GAP {
                return Err(Error::GapTooSmall { lambda: w[0], gap });
            }
        }
        for lambda in values {
            let u = eigenvector_inverse_iteration(&block.matrix, lambda)?;
            let v = block.expand(&u, n);
            pairs.push((lambda, block.parity, keep(&v)));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| (a.1 == Parity::Alternating).cmp(&(b.1 == Parity::Alternating)))
    });
    Ok(pairs)
}

/// Indices of eigenvalues inside a loop-row disc that does not touch any
/// other row's disc. Empty unless the loop discs are isolated (`Q > 4` for
/// unit couplings).
pub fn classify_outliers(h: &TridiagonalHamiltonian, eigenvalues: &[f64]) -> Vec<usize> {
    let discs = gershgorin_discs(h);
    let (loops, plain): (Vec<&Disc>, Vec<&Disc>) = discs.iter().partition(|d| d.center != 0.0);
    if loops.is_empty() {
        return Vec::new();
    }
    let isolated = loops
        .iter()
        .all(|l| plain.iter().all(|p| l.lo() > p.hi() || l.hi() < p.lo()));
    if !isolated {
        return Vec::new();
    }
    eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &x)| loops.iter().any(|l| l.contains(x)))
        .map(|(i, _)| i)
        .collect()
}

/// All `n` eigenpairs with parity labels and outlier classification.
pub fn full_decomposition(h: &TridiagonalHamiltonian, tol: f64) -> Result<SpectralDecomposition> {
    let pairs = decompose_with(h, tol, |v| v.to_vec())?;
    let mut eigenvalues = Vec::with_capacity(pairs.len());
    let mut eigenvectors = Vec::with_capacity(pairs.len());
    let mut parities = Vec::with_capacity(pairs.len());
    for (lambda, parity, v) in pairs {
        eigenvalues.push(lambda);
        eigenvectors.push(v);
        parities.push(parity);
    }
    let outlier_indices = classify_outliers(h, &eigenvalues);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        parities,
        outlier_indices,
    })
}

/// Sign of `<v, reflect(v)>`; `None` if the vector has no definite parity.
pub fn parity_of(v: &[f64], tol: f64) -> Option<Parity> {
    let n = v.len();
    let sym = (0..n).all(|i| (v[i] - v[n - 1 - i]).abs() <= tol);
    let alt = (0..n).all(|i| (v[i] + v[n - 1 - i]).abs() <= tol);
    match (sym, alt) {
        (true, false) => Some(Parity::Symmetric),
        (false, true) => Some(Parity::Alternating),
        _ => None,
    }
}

//! Time evolution `U(t) = exp(i t H)` restricted to what end-to-end transfer
//! needs: the amplitude `U(t)[1, n]`, its modulus over a time grid, peak
//! location and threshold windows. A dense scaling-and-squaring exponential
//! is kept as an independent oracle for small chains.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::TridiagonalHamiltonian;
use crate::error::{Error, Result};
use crate::spectral::{decompose_with, SpectralDecomposition};

/// Largest chain the dense oracle accepts.
pub const ORACLE_MAX_N: usize = 64;

/// Default number of curve samples.
pub const DEFAULT_SAMPLES: usize = 4096;

/// Default curve span as a multiple of the predicted readout time.
pub const DEFAULT_SPAN: f64 = 2.5;

// phasors are advanced by multiplication and re-synchronised this often
const RESYNC_EVERY: usize = 256;

/// Eigenvalues with the first and last eigenvector entries; all that
/// `U(t)[1, n]` depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSpectrum {
    pub eigenvalues: Vec<f64>,
    pub first: Vec<f64>,
    pub last: Vec<f64>,
}

impl EndpointSpectrum {
    pub fn from_decomposition(decomp: &SpectralDecomposition) -> Self {
        let n = decomp.eigenvectors.first().map_or(0, Vec::len);
        EndpointSpectrum {
            eigenvalues: decomp.eigenvalues.clone(),
            first: decomp.eigenvectors.iter().map(|v| v[0]).collect(),
            last: decomp.eigenvectors.iter().map(|v| v[n - 1]).collect(),
        }
    }

    /// Solves `h` keeping only the endpoint rows; `O(n)` memory.
    pub fn compute(h: &TridiagonalHamiltonian, tol: f64) -> Result<Self> {
        let pairs = decompose_with(h, tol, |v| (v[0], v[v.len() - 1]))?;
        let mut out = EndpointSpectrum {
            eigenvalues: Vec::with_capacity(pairs.len()),
            first: Vec::with_capacity(pairs.len()),
            last: Vec::with_capacity(pairs.len()),
        };
        for (lambda, _, (a, b)) in pairs {
            out.eigenvalues.push(lambda);
            out.first.push(a);
            out.last.push(b);
        }
        Ok(out)
    }

    /// `sum_j exp(i t lambda_j) psi_j(1) psi_j(n)`.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        if t == 0.0 && self.eigenvalues.len() > 1 {
            // U(0) = I; the spectral sum would leave rounding noise
            return Complex64::new(0.0, 0.0);
        }
        self.eigenvalues
            .iter()
            .zip(self.first.iter().zip(&self.last))
            .map(|(&lambda, (&a, &b))| Complex64::from_polar(a * b, t * lambda))
            .sum()
    }

    pub fn fidelity(&self, t: f64) -> f64 {
        self.amplitude(t).norm()
    }

    /// Fidelity at `t_lo + i * step` for `i in 0..count`.
    fn fidelity_grid(&self, t_lo: f64, step: f64, count: usize) -> Vec<f64> {
        let weights: Vec<f64> = self.first.iter().zip(&self.last).map(|(a, b)| a * b).collect();
        let rotors: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, step * l))
            .collect();
        let mut phasors = vec![Complex64::new(0.0, 0.0); weights.len()];
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            if i % RESYNC_EVERY == 0 {
                let t = t_lo + i as f64 * step;
                for (p, (&l, &w)) in phasors.iter_mut().zip(self.eigenvalues.iter().zip(&weights)) {
                    *p = Complex64::from_polar(w, t * l);
                }
            }
            let t = t_lo + i as f64 * step;
            if t == 0.0 && weights.len() > 1 {
                out.push(0.0);
            } else {
                out.push(phasors.iter().sum::<Complex64>().norm());
            }
            for (p, r) in phasors.iter_mut().zip(&rotors) {
                *p *= r;
            }
        }
        out
    }
}

impl From<&SpectralDecomposition> for EndpointSpectrum {
    fn from(decomp: &SpectralDecomposition) -> Self {
        EndpointSpectrum::from_decomposition(decomp)
    }
}

/// `U(t)[1, n]` from a full decomposition.
pub fn transfer_amplitude(decomp: &SpectralDecomposition, t: f64) -> Complex64 {
    let n = decomp.eigenvectors.first().map_or(0, Vec::len);
    if t == 0.0 && n > 1 {
        return Complex64::new(0.0, 0.0);
    }
    decomp
        .eigenvalues
        .iter()
        .zip(&decomp.eigenvectors)
        .map(|(&lambda, v)| Complex64::from_polar(v[0] * v[n - 1], t * lambda))
        .sum()
}

/// Row `node` (1-based) of `U(t)`.
pub fn propagator_row(decomp: &SpectralDecomposition, t: f64, node: usize) -> Vec<Complex64> {
    let n = decomp.eigenvectors.first().map_or(0, Vec::len);
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for (&lambda, v) in decomp.eigenvalues.iter().zip(&decomp.eigenvectors) {
        let phase = Complex64::from_polar(v[node - 1], t * lambda);
        for (r, &x) in row.iter_mut().zip(v) {
            *r += phase * x;
        }
    }
    row
}

/// Fidelity `|U(t)[1, n]|` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl FidelityCurve {
    /// Index and value of the largest sample (first one on ties).
    pub fn max(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
    }
}

/// `samples` evenly spaced points on `[t_lo, t_hi]`, both ends included.
pub fn fidelity_curve(spectrum: &EndpointSpectrum, t_lo: f64, t_hi: f64, samples: usize) -> Result<FidelityCurve> {
    if t_lo.is_nan() || t_hi.is_nan() || t_lo >= t_hi || samples < 2 {
        return Err(Error::InvalidInput(format!(
            "curve needs t_lo < t_hi and at least 2 samples (got [{t_lo}, {t_hi}], {samples})"
        )));
    }
    let step = (t_hi - t_lo) / (samples - 1) as f64;
    let mut times: Vec<f64> = (0..samples).map(|i| t_lo + i as f64 * step).collect();
    times[samples - 1] = t_hi;
    let mut values = spectrum.fidelity_grid(t_lo, step, samples);
    values[samples - 1] = spectrum.fidelity(t_hi);
    Ok(FidelityCurve { times, values })
}

/// Grid scan of `[t_guess - radius, t_guess + radius]` (clipped at 0) followed
/// by golden-section refinement around the best sample. Never returns less
/// than the fidelity at `t_guess`.
pub fn peak_search(spectrum: &EndpointSpectrum, t_guess: f64, radius: f64) -> Result<(f64, f64)> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidInput(format!("radius = {radius} must be positive")));
    }
    let lo = (t_guess - radius).max(0.0);
    let hi = t_guess + radius;
    // resolve the fastest beat among modes that touch both ends
    let bandwidth = spectrum
        .eigenvalues
        .iter()
        .zip(spectrum.first.iter().zip(&spectrum.last))
        .filter(|(_, (a, b))| (*a * *b).abs() > 1e-8)
        .fold(0.0_f64, |acc, (&l, _)| acc.max(l.abs()))
        .max(1.0);
    let wanted = ((hi - lo) * bandwidth * 2.0).ceil() as usize;
    let count = wanted.clamp(2049, 1 << 18);
    let step = (hi - lo) / (count - 1) as f64;
    let grid = spectrum.fidelity_grid(lo, step, count);
    let (best_i, _) = grid.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    );

    let a = lo + best_i.saturating_sub(1) as f64 * step;
    let b = (lo + (best_i + 1) as f64 * step).min(hi);
    let refined = golden_max(|t| spectrum.fidelity(t), a, b, 1e-9 * (1.0 + hi));

    let mut best = (t_guess, spectrum.fidelity(t_guess));
    for cand in [(lo + best_i as f64 * step, grid[best_i]), refined] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Where a curve stays at or above a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferWindow {
    pub threshold: f64,
    /// Disjoint, ascending.
    pub intervals: Vec<(f64, f64)>,
    pub peak_time: f64,
    pub peak_value: f64,
}

impl TransferWindow {
    /// Total length of all intervals.
    pub fn total_width(&self) -> f64 {
        self.intervals.iter().fold(0.0, |acc, (a, b)| acc + (b - a))
    }

    pub fn interval_containing(&self, t: f64) -> Option<(f64, f64)> {
        self.intervals.iter().copied().find(|&(a, b)| a <= t && t <= b)
    }

    /// Width of the interval around the peak, 0 if the peak is below threshold.
    pub fn peak_width(&self) -> f64 {
        self.interval_containing(self.peak_time).map_or(0.0, |(a, b)| b - a)
    }
}

/// Maximal intervals with fidelity `>= threshold`, with crossings placed by
/// linear interpolation between neighbouring samples.
pub fn window_at_threshold(curve: &FidelityCurve, threshold: f64) -> Result<TransferWindow> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside (0, 1]")));
    }
    let (peak_i, peak_value) = curve
        .max()
        .ok_or_else(|| Error::InvalidInput("empty fidelity curve".into()))?;
    let t = &curve.times;
    let v = &curve.values;
    let crossing = |i: usize| {
        // v[i] and v[i+1] straddle the threshold
        let frac = (threshold - v[i]) / (v[i + 1] - v[i]);
        t[i] + frac * (t[i + 1] - t[i])
    };

    let mut intervals = Vec::new();
    let mut start = if v[0] >= threshold { Some(t[0]) } else { None };
    for i in 0..v.len() - 1 {
        let (above_now, above_next) = (v[i] >= threshold, v[i + 1] >= threshold);
        match (above_now, above_next) {
            (false, true) => start = Some(crossing(i)),
            (true, false) => {
                if let Some(s) = start.take() {
                    intervals.push((s, crossing(i)));
                }
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, t[t.len() - 1]));
    }
    Ok(TransferWindow {
        threshold,
        intervals,
        peak_time: t[peak_i],
        peak_value,
    })
}

/// Dense `exp(i t H)` by scaling and squaring a truncated Taylor series.
pub fn expm_oracle(h: &TridiagonalHamiltonian, t: f64) -> Result<DMatrix<Complex64>> {
    let n = h.dim();
    if n > ORACLE_MAX_N {
        return Err(Error::SizeGuard { n, limit: ORACLE_MAX_N });
    }
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    let it = Complex64::new(0.0, t);
    for i in 0..n {
        a[(i, i)] = it * h.diag[i];
        if i + 1 < n {
            a[(i, i + 1)] = it * h.offdiag[i];
            a[(i + 1, i)] = it * h.offdiag[i];
        }
    }
    let norm = one_norm(&a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(squarings), 0.0);

    let identity = DMatrix::<Complex64>::identity(n, n);
    let mut sum = identity.clone();
    let mut term = identity;
    // ||scaled|| <= 1/2, so terms shrink at least geometrically
    for j in 1..=40 {
        term = &term * &scaled / Complex64::new(j as f64, 0.0);
        sum += &term;
        if one_norm(&term) < 1e-17 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

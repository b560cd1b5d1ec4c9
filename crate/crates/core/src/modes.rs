//! Closed-form bulk modes of the second-node loop chain.
//!
//! A bulk eigenvalue `lambda = 2 cos(theta)` with `theta` in `(0, pi)` belongs
//! to a symmetric mode exactly when `symmetric_secular(theta, k) = Q` and to an
//! alternating mode exactly when `alternating_secular(theta, k) = Q`, with
//! `k = n - 3`. Both secular functions share the loop-independent part
//! [`secular_base`]; their branch terms have poles at `theta = (2j+1) pi / k`
//! (symmetric) and `theta = 2 j pi / k` (alternating).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

pub use crate::chain::Parity;
use crate::chain::TridiagonalHamiltonian;
use crate::error::{Error, PoleKind, Result};

/// `|cos|` or `|sin|` below this counts as a pole.
pub const POLE_GUARD: f64 = 1e-15;

/// Smallest `|lambda|` for which a closed-form mode vector is built.
pub const LAMBDA_GUARD: f64 = 1e-12;

/// Bisection cap for [`solve`].
pub const MAX_BISECTIONS: usize = 200;

/// Default root tolerance on `theta`.
pub const DEFAULT_THETA_TOL: f64 = 1e-13;

/// Relative margin kept between a bracket end and a pole.
pub const POLE_MARGIN: f64 = 1e-9;

fn checked_cos(theta: f64) -> Result<f64> {
    let c = theta.cos();
    if c.abs() < POLE_GUARD {
        return Err(Error::PoleAt {
            theta,
            kind: PoleKind::Base,
        });
    }
    Ok(c)
}

/// `-1 / (2 cos theta) + cos theta`.
pub fn secular_base(theta: f64) -> Result<f64> {
    let c = checked_cos(theta)?;
    Ok(-0.5 / c + c)
}

/// Derivative of [`secular_base`]: `-sin / (2 cos^2) - sin`.
pub fn secular_base_derivative(theta: f64) -> Result<f64> {
    let c = checked_cos(theta)?;
    let s = theta.sin();
    Ok(-s / (2.0 * c * c) - s)
}

/// `F(theta) - tan(k theta / 2) sin(theta)`.
pub fn symmetric_secular(theta: f64, k: usize) -> Result<f64> {
    let base = secular_base(theta)?;
    let half = 0.5 * k as f64 * theta;
    let c = half.cos();
    if c.abs() < POLE_GUARD {
        return Err(Error::PoleAt {
            theta,
            kind: PoleKind::Tangent,
        });
    }
    Ok(base - half.sin() / c * theta.sin())
}

/// `F(theta) + cot(k theta / 2) sin(theta)`.
pub fn alternating_secular(theta: f64, k: usize) -> Result<f64> {
    let base = secular_base(theta)?;
    let half = 0.5 * k as f64 * theta;
    let s = half.sin();
    if s.abs() < POLE_GUARD {
        return Err(Error::PoleAt {
            theta,
            kind: PoleKind::Cotangent,
        });
    }
    Ok(base + half.cos() / s * theta.sin())
}

pub fn secular(parity: Parity, theta: f64, k: usize) -> Result<f64> {
    match parity {
        Parity::Symmetric => symmetric_secular(theta, k),
        Parity::Alternating => alternating_secular(theta, k),
    }
}

/// Branch poles sit at `theta = u pi / k` with `u` odd (symmetric) or even
/// (alternating).
fn branch_pole_is(parity: Parity, u: i64) -> bool {
    match parity {
        Parity::Symmetric => u.rem_euclid(2) == 1,
        Parity::Alternating => u.rem_euclid(2) == 0,
    }
}

/// True if `[lo, hi]` contains a pole of the secular function of `parity`.
pub fn has_pole_in(parity: Parity, k: usize, lo: f64, hi: f64) -> bool {
    // cos(theta) = 0 at pi/2 + j pi
    let j = ((lo - FRAC_PI_2) / PI).ceil();
    if FRAC_PI_2 + j * PI <= hi {
        return true;
    }
    if k == 0 {
        return false;
    }
    let scale = k as f64 / PI;
    let u_lo = (lo * scale).ceil() as i64;
    let u_hi = (hi * scale).floor() as i64;
    (u_lo..=u_hi.min(u_lo + 1)).any(|u| branch_pole_is(parity, u))
}

/// Pole-free open interval of the secular function of `parity` that starts
/// at `pi/2` and runs to the first branch pole above it (capped at `pi`).
pub fn first_interval_above_half_pi(parity: Parity, k: usize) -> (f64, f64) {
    let mut u = (k / 2 + 1) as i64;
    if !branch_pole_is(parity, u) {
        u += 1;
    }
    let upper = (u as f64 * PI / k as f64).min(PI);
    (FRAC_PI_2, upper)
}

/// Pole-free open interval of the secular function of `parity` containing `theta`.
pub fn pole_free_interval(parity: Parity, k: usize, theta: f64) -> (f64, f64) {
    let j = ((theta - FRAC_PI_2) / PI).floor();
    let mut lo = FRAC_PI_2 + j * PI;
    let mut hi = lo + PI;
    if k > 0 {
        let u = (theta * k as f64 / PI).floor() as i64;
        let below = if branch_pole_is(parity, u) { u } else { u - 1 };
        let step = PI / k as f64;
        lo = lo.max(below as f64 * step);
        hi = hi.min((below + 2) as f64 * step);
    }
    (lo, hi)
}

/// Shrinks an open pole-free interval by the relative pole margin.
pub fn inset(interval: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = interval;
    let pad = POLE_MARGIN * (hi - lo);
    (lo + pad, hi - pad)
}

/// Bisection for `secular(parity, theta, k) = q` on a sign-change bracket
/// free of poles.
///
/// Stops once the bracket is narrower than `tol` and the residual is within
/// `tol * max(1, |q|)`, or when the bracket cannot be split further.
pub fn solve(parity: Parity, q: f64, k: usize, bracket: (f64, f64), tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if lo.is_nan() || hi.is_nan() || lo >= hi || tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "bad bracket [{lo}, {hi}] or tolerance {tol}"
        )));
    }
    if has_pole_in(parity, k, lo, hi) {
        return Err(Error::PoleInBracket { parity, lo, hi });
    }
    let g = |theta: f64| secular(parity, theta, k).map(|v| v - q);
    let mut g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoSignChange { parity, q, lo, hi });
    }
    let mut best = if g_lo.abs() < g_hi.abs() {
        (lo, g_lo)
    } else {
        (hi, g_hi)
    };
    let target = tol * q.abs().max(1.0);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid)?;
        if g_mid.abs() < best.1.abs() {
            best = (mid, g_mid);
        }
        if g_mid == 0.0 || (hi - lo <= tol && g_mid.abs() <= target) {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.0)
}

/// Root of `symmetric_secular = q` in `bracket`.
pub fn solve_symmetric(q: f64, k: usize, bracket: (f64, f64), tol: f64) -> Result<f64> {
    solve(Parity::Symmetric, q, k, bracket, tol)
}

/// Root of `alternating_secular = q` in `bracket`.
pub fn solve_alternating(q: f64, k: usize, bracket: (f64, f64), tol: f64) -> Result<f64> {
    solve(Parity::Alternating, q, k, bracket, tol)
}

/// Unit eigenvector of a closed-form mode together with its endpoint weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    /// Length `k + 3`, unit norm, `reflect(values) = ±values` exactly.
    pub values: Vec<f64>,
    /// `psi(1)^2` of the normalized vector.
    pub endpoint_weight: f64,
}

/// Builds `(B, a_0, ..., a_k, ±B)` and normalizes it.
///
/// Symmetric: `B = cos(k theta/2) / lambda`, `a_j = cos((k - 2j) theta / 2)`.
/// Alternating: `B = sin(k theta/2) / lambda`, `a_j = sin((k - 2j) theta / 2)`,
/// last entry `-B`.
pub fn mode_vector(theta: f64, parity: Parity, k: usize) -> Result<ModeVector> {
    let lambda = 2.0 * theta.cos();
    if lambda.abs() < LAMBDA_GUARD {
        return Err(Error::DegenerateLambda { lambda });
    }
    let profile = |x: f64| match parity {
        Parity::Symmetric => x.cos(),
        Parity::Alternating => x.sin(),
    };
    let edge = profile(0.5 * k as f64 * theta);
    if edge.abs() < POLE_GUARD {
        let kind = match parity {
            Parity::Symmetric => PoleKind::Tangent,
            Parity::Alternating => PoleKind::Cotangent,
        };
        return Err(Error::PoleAt { theta, kind });
    }
    let b = edge / lambda;
    let sign = parity.sign();

    let n = k + 3;
    let mut values = vec![0.0; n];
    values[0] = b;
    values[n - 1] = sign * b;
    // a_j and a_{k-j} are mirror images; fill both from the first half
    for j in 0..=k / 2 {
        let a = profile(0.5 * (k as f64 - 2.0 * j as f64) * theta);
        values[j + 1] = a;
        values[k + 1 - j] = if j == k - j { a } else { sign * a };
    }
    if parity == Parity::Alternating && k.is_multiple_of(2) {
        values[k / 2 + 1] = 0.0;
    }

    let interior: f64 = values[1..=k + 1].iter().map(|a| a * a).sum();
    let norm_sq = 2.0 * b * b + interior;
    let norm = norm_sq.sqrt();
    values.iter_mut().for_each(|x| *x /= norm);
    Ok(ModeVector {
        values,
        endpoint_weight: b * b / norm_sq,
    })
}

/// A bulk eigenpair in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub theta: f64,
    pub parity: Parity,
    pub k: usize,
    pub lambda: f64,
    pub endpoint_weight: f64,
}

impl ModeSolution {
    pub fn new(theta: f64, parity: Parity, k: usize) -> Result<Self> {
        let v = mode_vector(theta, parity, k)?;
        Ok(ModeSolution {
            theta,
            parity,
            k,
            lambda: 2.0 * theta.cos(),
            endpoint_weight: v.endpoint_weight,
        })
    }

    pub fn vector(&self) -> Result<ModeVector> {
        mode_vector(self.theta, self.parity, self.k)
    }
}

/// Angle `theta` with `2 cos(theta)` equal to the Rayleigh quotient of `v`.
///
/// Near the band edges `arccos(lambda / 2)` loses most of its digits, so for
/// `|lambda| > 1` the distance to the nearer edge is summed directly:
/// `v^T (H + 2I) v = sum b_i (v_i + v_{i+1})^2 + sum (D_i + 2 - b_{i-1} - b_i) v_i^2`
/// and likewise for `2I - H` with differences. For the chain every term of
/// the lower-edge sum is nonnegative.
pub fn angle_of_eigenpair(h: &TridiagonalHamiltonian, lambda: f64, v: &[f64]) -> f64 {
    if lambda.abs() <= 1.0 {
        return (0.5 * lambda).clamp(-1.0, 1.0).acos();
    }
    let n = h.dim();
    let sign = if lambda < 0.0 { 1.0 } else { -1.0 };
    let mut gap = 0.0;
    for i in 0..n {
        let left = if i > 0 { h.offdiag[i - 1] } else { 0.0 };
        let right = if i + 1 < n { h.offdiag[i] } else { 0.0 };
        gap += (2.0 + sign * h.diag[i] - left - right) * v[i] * v[i];
        if i + 1 < n {
            let pair = v[i] + sign * v[i + 1];
            gap += right * pair * pair;
        }
    }
    let norm: f64 = v.iter().map(|x| x * x).sum();
    let half = (gap.max(0.0) / norm).sqrt() * 0.5;
    if lambda < 0.0 {
        // lambda + 2 = 4 cos^2(theta / 2)
        2.0 * half.min(1.0).acos()
    } else {
        // 2 - lambda = 4 sin^2(theta / 2)
        2.0 * half.min(1.0).asin()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;
    use crate::chain::{build_hamiltonian, reflect, ChainSpec};

    const EPS: f64 = 1e-12;

    #[test]
    fn angle_of_eigenpair_agrees_with_closed_form() {
        let k = 40;
        let mut checked = 0;
        for parity in [Parity::Symmetric, Parity::Alternating] {
            for theta in [0.05, 0.9, 1.9, 3.09] {
                let q = secular(parity, theta, k).unwrap();
                if q.is_nan() || q <= 0.0 {
                    continue;
                }
                let h = build_hamiltonian(&ChainSpec::new(k + 3, q).unwrap()).unwrap();
                let v = mode_vector(theta, parity, k).unwrap().values;
                let got = angle_of_eigenpair(&h, 2.0 * theta.cos(), &v);
                assert!((got - theta).abs() < 1e-9, "{parity:?} {theta} -> {got}");
                checked += 1;
            }
        }
        assert!(checked >= 4, "only {checked} admissible angles");
    }

    #[test]
    fn base_values() {
        assert!((secular_base(2.0 * PI / 3.0).unwrap() - 0.5).abs() < EPS);
        assert!(secular_base(3.0 * PI / 4.0).unwrap().abs() < EPS);
        let f = secular_base(FRAC_PI_2 + 0.00628319).unwrap();
        assert!((f - 79.5716).abs() < 1e-3, "{f}");
        assert!(matches!(
            secular_base(FRAC_PI_2),
            Err(Error::PoleAt {
                kind: PoleKind::Base,
                ..
            })
        ));
    }

    #[test]
    fn base_derivative() {
        let d = secular_base_derivative(3.0 * PI / 4.0).unwrap();
        assert!((d + 2f64.sqrt()).abs() < EPS);
        let h = 1e-6;
        let t = 2.0 * PI / 3.0;
        let fd = (secular_base(t + h).unwrap() - secular_base(t - h).unwrap()) / (2.0 * h);
        assert!((secular_base_derivative(t).unwrap() - fd).abs() <= 1e-6);
    }

    #[test]
    fn secular_special_points() {
        assert!(symmetric_secular(3.0 * PI / 4.0, 8).unwrap().abs() < 1e-12);
        assert!((symmetric_secular(2.0 * PI / 3.0, 6).unwrap() - 0.5).abs() < 1e-12);
        let a = alternating_secular(3.0 * PI / 4.0, 2).unwrap();
        assert!((a + FRAC_1_SQRT_2).abs() < 1e-12, "{a}");
        // k theta / 2 = 5 pi / 2 makes the cotangent vanish
        let k = 5;
        let theta = 3.0 * PI / 5.0; // k theta / 2 = 3 pi / 2
        let a = alternating_secular(theta, k).unwrap();
        assert!((a - secular_base(theta).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pole_errors() {
        // k = 4: tan(2 theta) has a pole at theta = 3 pi / 4
        assert!(matches!(
            symmetric_secular(3.0 * PI / 4.0, 4),
            Err(Error::PoleAt {
                kind: PoleKind::Tangent,
                ..
            })
        ));
        assert!(matches!(
            alternating_secular(PI / 2.0 + PI / 4.0, 8),
            Err(Error::PoleAt {
                kind: PoleKind::Cotangent,
                ..
            })
        ));
    }

    #[test]
    fn pole_bookkeeping() {
        let k = 10;
        // symmetric poles at odd multiples of pi/10: 0.5pi is one of them
        assert!(has_pole_in(Parity::Symmetric, k, 0.55 * PI, 0.75 * PI));
        assert!(!has_pole_in(Parity::Symmetric, k, 0.51 * PI, 0.69 * PI));
        assert!(!has_pole_in(Parity::Alternating, k, 0.61 * PI, 0.79 * PI));
        assert!(has_pole_in(Parity::Alternating, k, 0.79 * PI, 0.81 * PI));
        // the base pole counts for both
        assert!(has_pole_in(Parity::Alternating, 3, 0.49 * PI, 0.51 * PI));

        let (lo, hi) = first_interval_above_half_pi(Parity::Symmetric, 10);
        assert_eq!(lo, FRAC_PI_2);
        assert!((hi - 0.7 * PI).abs() < 1e-15);
        let (_, hi) = first_interval_above_half_pi(Parity::Alternating, 10);
        assert!((hi - 0.6 * PI).abs() < 1e-15);

        let (lo, hi) = pole_free_interval(Parity::Symmetric, 10, 0.8 * PI);
        assert!((lo - 0.7 * PI).abs() < 1e-15 && (hi - 0.9 * PI).abs() < 1e-15);
        let (lo, hi) = pole_free_interval(Parity::Alternating, 10, 0.55 * PI);
        assert!((lo - FRAC_PI_2).abs() < 1e-15 && (hi - 0.6 * PI).abs() < 1e-15);
    }

    #[test]
    fn root_recovery() {
        let k = 37;
        for parity in [Parity::Symmetric, Parity::Alternating] {
            let theta_star = 1.9;
            let q = secular(parity, theta_star, k).unwrap();
            let bracket = inset(pole_free_interval(parity, k, theta_star));
            let theta = solve(parity, q, k, bracket, DEFAULT_THETA_TOL).unwrap();
            assert!(
                (theta - theta_star).abs() < 1e-12,
                "{parity:?}: {theta} vs {theta_star}"
            );
        }
    }

    #[test]
    fn solve_errors() {
        let k = 7;
        let bracket = inset(pole_free_interval(Parity::Symmetric, k, 2.0));
        let hi_val = symmetric_secular(bracket.1, k).unwrap();
        let lo_val = symmetric_secular(bracket.0, k).unwrap();
        // pick a Q above both ends of a half-bracket with no crossing
        let mid = 0.5 * (bracket.0 + bracket.1);
        let q = symmetric_secular(mid, k).unwrap().max(lo_val.min(hi_val)) + 1e6;
        assert!(matches!(
            solve_symmetric(q, k, (mid, bracket.1), 1e-13),
            Err(Error::NoSignChange { .. })
        ));
        assert!(matches!(
            solve_symmetric(1.0, k, (0.55 * PI, 0.9 * PI), 1e-13),
            Err(Error::PoleInBracket { .. })
        ));
        assert!(matches!(
            solve_symmetric(1.0, k, (2.0, 1.0), 1e-13),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn mode_vectors_have_exact_parity() {
        for k in [6, 7, 30, 31] {
            let theta = 1.7;
            let s = mode_vector(theta, Parity::Symmetric, k).unwrap();
            assert_eq!(reflect(&s.values), s.values);
            let a = mode_vector(theta, Parity::Alternating, k).unwrap();
            let neg: Vec<f64> = a.values.iter().map(|x| -x).collect();
            assert_eq!(reflect(&a.values), neg);
            assert!((s.values.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
            assert!((s.endpoint_weight - s.values[0] * s.values[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn mode_vector_is_eigenvector() {
        let (n, q) = (10, 5.0);
        let k = n - 3;
        let h = build_hamiltonian(&ChainSpec::new(n, q).unwrap()).unwrap();
        for parity in [Parity::Symmetric, Parity::Alternating] {
            let bracket = inset(first_interval_above_half_pi(parity, k));
            let theta = solve(parity, q, k, bracket, DEFAULT_THETA_TOL).unwrap();
            let v = mode_vector(theta, parity, k).unwrap();
            let r = h.residual(2.0 * theta.cos(), &v.values);
            assert!(r <= 1e-10, "{parity:?} residual {r}");
        }
    }

    #[test]
    fn degenerate_lambda() {
        assert!(matches!(
            mode_vector(FRAC_PI_2, Parity::Symmetric, 4),
            Err(Error::DegenerateLambda { .. })
        ));
    }
}

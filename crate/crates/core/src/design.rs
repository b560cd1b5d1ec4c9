//! Choosing `Q` for a chain of given length, and certifying the result.
//!
//! Theorem mode fixes `c = pi sqrt(eps) / 20`, takes the smallest admissible
//! `m`, puts `theta0 = (8m + 1) pi / (2k)` so that `k theta0 / 2` sits a
//! quarter turn past a multiple of `2 pi`, and sets `Q = F(theta0)`. The
//! symmetric and alternating roots are then guaranteed inside the
//! quarter-phase brackets on either side of `theta0`.
//!
//! Relaxed mode takes `Q` as given and uses the roots nearest `pi/2`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, MWindow, Result};
use crate::modes::{first_interval_above_half_pi, inset, secular_base, solve, ModeSolution, Parity, DEFAULT_THETA_TOL};

/// `Q <= Q_SCALING * sqrt(k / eps)` for theorem-mode designs.
pub const Q_SCALING: f64 = 4.0;

/// `t0 <= TIME_SCALING * k / eps` for theorem-mode designs.
pub const TIME_SCALING: f64 = 461.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    Theorem,
    Relaxed,
}

/// Extra numbers reported with every design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignDiagnostics {
    /// Endpoint weight of the symmetric mode.
    pub w1: f64,
    /// Endpoint weight of the alternating mode.
    pub w2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Open window for `8m + 1` (theorem mode).
    pub m_window: Option<(f64, f64)>,
    /// `k` beyond which the window always admits an `m` at this `c`.
    pub min_k_guaranteed: Option<usize>,
    /// Guaranteed lower bound `(sqrt2 - 1) c^2 / (3k)` on `theta2 - theta1`.
    pub theta_gap_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferDesign {
    pub n: usize,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
    pub m: Option<i64>,
    pub theta0: Option<f64>,
    #[serde(rename = "Q")]
    pub q: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub t0: f64,
    pub fidelity_lower_bound: f64,
    pub mode: DesignMode,
    pub corollary_satisfied: bool,
    pub diagnostics: DesignDiagnostics,
}

impl TransferDesign {
    /// The symmetric (`theta1`) and alternating (`theta2`) closed-form modes.
    pub fn modes(&self) -> Result<(ModeSolution, ModeSolution)> {
        Ok((
            ModeSolution::new(self.theta1, Parity::Symmetric, self.k)?,
            ModeSolution::new(self.theta2, Parity::Alternating, self.k)?,
        ))
    }

    /// Quarter-phase brackets `((16m+1) pi/4k, (16m+3) pi/4k)` in theorem mode.
    pub fn outer_bracket(&self) -> Option<(f64, f64)> {
        let m = self.m?;
        let k = self.k as f64;
        Some((
            (16 * m + 1) as f64 * PI / (4.0 * k),
            (16 * m + 3) as f64 * PI / (4.0 * k),
        ))
    }
}

/// `c = pi sqrt(eps) / 20`.
pub fn theorem_c(epsilon: f64) -> f64 {
    PI * epsilon.sqrt() / 20.0
}

/// Open window `(lower, upper)` that `8m + 1` must fall in.
pub fn m_window(k: usize, c: f64) -> MWindow {
    let kf = k as f64;
    let root = kf.sqrt();
    let guaranteed = (9.0 * PI / (1.0 - 2.0 * c)).powi(2).floor() as usize + 1;
    MWindow {
        k,
        c,
        lower: kf + 2.0 * c / PI * root + 0.5,
        upper: kf + root / PI - 0.5,
        min_k_guaranteed: guaranteed,
    }
}

/// Smallest `m` with `8m + 1` strictly inside [`m_window`].
pub fn select_m(k: usize, c: f64) -> Result<i64> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::InvalidInput(format!("c = {c} outside (0, 1/2)")));
    }
    if k < 1 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let window = m_window(k, c);
    let m = ((window.lower - 1.0) / 8.0).floor() as i64 + 1;
    let candidate = (8 * m + 1) as f64;
    if candidate > window.lower && candidate < window.upper {
        Ok(m)
    } else {
        Err(Error::NoFeasibleM(window))
    }
}

/// `2 (w1 + w2) - 1`, reported as is even when negative.
pub fn fidelity_bound(w1: f64, w2: f64) -> f64 {
    2.0 * (w1 + w2) - 1.0
}

/// `2 |cos theta| <= sqrt(eps / (k+1)) |cos(k theta / 2)|`.
pub fn symmetric_concentration_holds(theta: f64, k: usize, epsilon: f64) -> bool {
    let rhs = (epsilon / (k as f64 + 1.0)).sqrt() * (0.5 * k as f64 * theta).cos().abs();
    2.0 * theta.cos().abs() <= rhs
}

/// `2 |cos theta| <= sqrt(eps / (k+1)) |sin(k theta / 2)|`.
pub fn alternating_concentration_holds(theta: f64, k: usize, epsilon: f64) -> bool {
    let rhs = (epsilon / (k as f64 + 1.0)).sqrt() * (0.5 * k as f64 * theta).sin().abs();
    2.0 * theta.cos().abs() <= rhs
}

/// Both concentration conditions; the secular equations are assumed solved.
pub fn verify_corollary(theta1: f64, theta2: f64, k: usize, epsilon: f64) -> bool {
    symmetric_concentration_holds(theta1, k, epsilon) && alternating_concentration_holds(theta2, k, epsilon)
}

/// Readout time `pi / |lambda1 - lambda2|` with `lambda = 2 cos theta`.
pub fn transfer_time(theta1: f64, theta2: f64) -> f64 {
    PI / (2.0 * (theta1.cos() - theta2.cos()).abs())
}

fn root_failure(parity: Parity, err: Error) -> Error {
    match err {
        Error::NoSignChange { .. } | Error::PoleInBracket { .. } | Error::PoleAt { .. } => {
            Error::RootFailure(format!("{parity:?} root: {err}"))
        }
        other => other,
    }
}

/// Theorem-mode design for an `n`-node chain and target infidelity `epsilon`.
pub fn design_theorem(n: usize, epsilon: f64) -> Result<TransferDesign> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("n = {n} < 4")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    let k = n - 3;
    let c = theorem_c(epsilon);
    let m = select_m(k, c)?;
    let window = m_window(k, c);

    let kf = k as f64;
    let theta0 = (16 * m + 2) as f64 * PI / (4.0 * kf);
    let lower = (16 * m + 1) as f64 * PI / (4.0 * kf);
    let upper = (16 * m + 3) as f64 * PI / (4.0 * kf);
    let q = secular_base(theta0)?;

    let theta1 = solve(Parity::Symmetric, q, k, (lower, theta0), DEFAULT_THETA_TOL)
        .map_err(|e| root_failure(Parity::Symmetric, e))?;
    let theta2 = solve(Parity::Alternating, q, k, (theta0, upper), DEFAULT_THETA_TOL)
        .map_err(|e| root_failure(Parity::Alternating, e))?;

    let sym = ModeSolution::new(theta1, Parity::Symmetric, k)?;
    let alt = ModeSolution::new(theta2, Parity::Alternating, k)?;

    Ok(TransferDesign {
        n,
        k,
        epsilon: Some(epsilon),
        c: Some(c),
        m: Some(m),
        theta0: Some(theta0),
        q,
        theta1,
        theta2,
        t0: transfer_time(theta1, theta2),
        fidelity_lower_bound: fidelity_bound(sym.endpoint_weight, alt.endpoint_weight),
        mode: DesignMode::Theorem,
        corollary_satisfied: verify_corollary(theta1, theta2, k, epsilon),
        diagnostics: DesignDiagnostics {
            w1: sym.endpoint_weight,
            w2: alt.endpoint_weight,
            lambda1: sym.lambda,
            lambda2: alt.lambda,
            m_window: Some((window.lower, window.upper)),
            min_k_guaranteed: Some(window.min_k_guaranteed),
            theta_gap_bound: Some((SQRT_2 - 1.0) * c * c / (3.0 * kf)),
        },
    })
}

/// Root of the secular equation of `parity` nearest `pi/2` from above,
/// restricted to `(pi/2, 3pi/4)`.
fn nearest_root(parity: Parity, q: f64, k: usize) -> Result<f64> {
    let (lo, hi) = inset(first_interval_above_half_pi(parity, k));
    let hi = hi.min(FRAC_PI_2 + FRAC_PI_4);
    solve(parity, q, k, (lo, hi), DEFAULT_THETA_TOL).map_err(|e| root_failure(parity, e))
}

/// Relaxed-mode design for a given loop weight `q > 2`.
pub fn design_for_q(n: usize, q: f64) -> Result<TransferDesign> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("n = {n} < 4")));
    }
    if !q.is_finite() || q <= 2.0 {
        return Err(Error::InvalidInput(format!(
            "relaxed design needs finite Q > 2, got {q}"
        )));
    }
    let k = n - 3;
    let theta1 = nearest_root(Parity::Symmetric, q, k)?;
    let theta2 = nearest_root(Parity::Alternating, q, k)?;
    let sym = ModeSolution::new(theta1, Parity::Symmetric, k)?;
    let alt = ModeSolution::new(theta2, Parity::Alternating, k)?;
    Ok(TransferDesign {
        n,
        k,
        epsilon: None,
        c: None,
        m: None,
        theta0: None,
        q,
        theta1,
        theta2,
        t0: transfer_time(theta1, theta2),
        fidelity_lower_bound: fidelity_bound(sym.endpoint_weight, alt.endpoint_weight),
        mode: DesignMode::Relaxed,
        corollary_satisfied: false,
        diagnostics: DesignDiagnostics {
            w1: sym.endpoint_weight,
            w2: alt.endpoint_weight,
            lambda1: sym.lambda,
            lambda2: alt.lambda,
            m_window: None,
            min_k_guaranteed: None,
            theta_gap_bound: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{alternating_secular, symmetric_secular};

    #[test]
    fn m_selection() {
        assert_eq!(select_m(1252, 0.0993).unwrap(), 157);
        let w = m_window(1252, 0.0993);
        assert!((w.lower - 1254.737).abs() < 1e-2 && (w.upper - 1262.763).abs() < 1e-2);

        match select_m(498, 0.0993) {
            Err(Error::NoFeasibleM(w)) => {
                assert!((w.lower - 499.90).abs() < 0.05 && (w.upper - 504.60).abs() < 0.05);
            }
            other => panic!("expected NoFeasibleM, got {other:?}"),
        }
        assert!(matches!(select_m(4, 0.4), Err(Error::NoFeasibleM(_))));
        assert!(matches!(select_m(100, 0.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn smallest_m_is_minimal() {
        for k in [1252usize, 2000, 2508, 5020, 9000] {
            let c = 0.0993;
            let Ok(m) = select_m(k, c) else { continue };
            let w = m_window(k, c);
            assert!(((8 * (m - 1) + 1) as f64) <= w.lower);
        }
    }

    #[test]
    fn window_guarantee_is_honest() {
        let c = 0.0993;
        let k0 = m_window(100, c).min_k_guaranteed;
        for k in k0..k0 + 400 {
            assert!(select_m(k, c).is_ok(), "k = {k}");
        }
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(fidelity_bound(0.5, 0.5), 1.0);
        let eps = 0.3;
        assert!((fidelity_bound(0.5 - eps / 4.0, 0.5 - eps / 4.0) - (1.0 - eps)).abs() < 1e-15);
        assert!((fidelity_bound(0.2, 0.2) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn corollary_conditions() {
        assert!(!verify_corollary(2.0 * PI / 3.0, 2.0 * PI / 3.0, 100, 0.01));

        // k theta / 2 = 2 pi m + pi / 4 pins both trig factors at 1/sqrt2
        let (k, eps) = (1000usize, 0.2);
        let theta = (8.0 * 125.0 + 1.0) * PI / (2.0 * k as f64);
        let rhs = (eps / (k as f64 + 1.0)).sqrt() * FRAC_PI_4.cos();
        assert!(2.0 * theta.cos().abs() <= rhs);
        assert!(verify_corollary(theta, theta, k, eps));
        // the same angle fails once eps is small enough
        assert!(!verify_corollary(theta, theta, k, 1e-4));
    }

    #[test]
    fn theorem_design_n1255() {
        let d = design_theorem(1255, 0.4).unwrap();
        assert_eq!(d.m, Some(157));
        assert_eq!(d.k, 1252);
        let theta0 = d.theta0.unwrap();
        assert!((theta0 - 2514.0 * PI / 5008.0).abs() < 1e-15);
        assert!((theta0 / PI - 0.50200).abs() < 1e-5);
        // Q = F(theta0) evaluated independently
        let c0 = theta0.cos();
        assert!((d.q - (c0 - 0.5 / c0)).abs() < 1e-12);
        assert!((d.q - 79.699).abs() < 1e-3);
        assert!(d.corollary_satisfied);
        assert!(d.fidelity_lower_bound >= 0.6);
        let (lo, hi) = d.outer_bracket().unwrap();
        assert!(lo < d.theta1 && d.theta1 < theta0 && theta0 < d.theta2 && d.theta2 < hi);
        assert!(d.theta2 - d.theta1 >= d.diagnostics.theta_gap_bound.unwrap());
        assert!((symmetric_secular(d.theta1, d.k).unwrap() - d.q).abs() <= 1e-9 * d.q);
        assert!((alternating_secular(d.theta2, d.k).unwrap() - d.q).abs() <= 1e-9 * d.q);
    }

    #[test]
    fn theorem_design_infeasible_n501() {
        assert!(matches!(design_theorem(501, 0.4), Err(Error::NoFeasibleM(_))));
        assert!(matches!(design_theorem(3, 0.4), Err(Error::InvalidInput(_))));
        assert!(matches!(design_theorem(1255, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn relaxed_design_roots_near_half_pi() {
        let d = design_for_q(501, 80.0).unwrap();
        assert!(d.theta1.cos().abs() < 0.05 && d.theta2.cos().abs() < 0.05);
        assert!(d.t0.is_finite() && d.t0 > 0.0);
        assert_eq!(d.mode, DesignMode::Relaxed);
        assert!(!d.corollary_satisfied);
        assert!(matches!(design_for_q(501, 2.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn json_field_names() {
        let d = design_for_q(10, 5.0).unwrap();
        let v = serde_json::to_value(d).unwrap();
        let obj = v.as_object().unwrap();
        for key in [
            "n",
            "k",
            "epsilon",
            "c",
            "m",
            "theta0",
            "Q",
            "theta1",
            "theta2",
            "t0",
            "fidelity_lower_bound",
            "mode",
            "corollary_satisfied",
            "diagnostics",
        ] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(obj["mode"], "relaxed");
        assert!(obj["m"].is_null());
    }
}

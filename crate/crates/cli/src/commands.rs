use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::anyhow;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use qst_core::design::{design_for_q, design_theorem, TransferDesign};
use qst_core::dynamics::{
    expm_oracle, fidelity_curve, peak_search, propagator_row, transfer_amplitude, window_at_threshold,
    EndpointSpectrum, FidelityCurve, TransferWindow, DEFAULT_SPAN,
};
use qst_core::modes::{angle_of_eigenpair, mode_vector, secular};
use qst_core::spectral::{full_decomposition, sturm_count, sturm_count_le, DEFAULT_TOL};
use qst_core::{build_hamiltonian, gershgorin_discs, ChainSpec, Error as CoreError};

use crate::format::{num, opt, table};
use crate::{CompareArgs, DesignArgs, Failure, Format, Mode, Report, SimulateArgs, SweepArgs, TMax, VerifyArgs};

const ORACLE_CHECK_MAX_N: usize = 12;
const ORACLE_TIMES: [f64; 6] = [0.5, 1.0, 3.0, 10.0, 37.0, 100.0];

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn json_line<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Compute(e.into()))?;
    s.push('\n');
    Ok(s)
}

fn run_design(n: usize, mode: Mode, epsilon: Option<f64>, q: Option<f64>) -> Result<TransferDesign, Failure> {
    match (mode, epsilon, q) {
        (Mode::Theorem, Some(eps), None) => Ok(design_theorem(n, eps)?),
        (Mode::Theorem, None, _) => Err(usage("theorem mode needs --epsilon")),
        (Mode::Theorem, Some(_), Some(_)) => Err(usage("theorem mode chooses Q itself; drop --q")),
        (Mode::Relaxed, _, Some(q)) => Ok(design_for_q(n, q)?),
        (Mode::Relaxed, _, None) => Err(usage("relaxed mode needs --q")),
    }
}

const DESIGN_HEADER: [&str; 13] = [
    "mode",
    "n",
    "k",
    "epsilon",
    "m",
    "q",
    "theta1",
    "theta2",
    "t0",
    "fidelity_lower_bound",
    "corollary_satisfied",
    "w1",
    "w2",
];

fn design_row(d: &TransferDesign) -> Vec<String> {
    vec![
        mode_name(d).into(),
        d.n.to_string(),
        d.k.to_string(),
        opt(d.epsilon),
        d.m.map(|m| m.to_string()).unwrap_or_default(),
        num(d.q),
        num(d.theta1),
        num(d.theta2),
        num(d.t0),
        num(d.fidelity_lower_bound),
        d.corollary_satisfied.to_string(),
        num(d.diagnostics.w1),
        num(d.diagnostics.w2),
    ]
}

fn mode_name(d: &TransferDesign) -> &'static str {
    match d.mode {
        qst_core::DesignMode::Theorem => "theorem",
        qst_core::DesignMode::Relaxed => "relaxed",
    }
}

pub fn design(a: &DesignArgs) -> Result<Report, Failure> {
    let d = run_design(a.n, a.mode, a.epsilon, a.q)?;
    eprintln!(
        "Q = {:.6}, t0 = {:.3}, fidelity >= {:.6}, corollary {}",
        d.q,
        d.t0,
        d.fidelity_lower_bound,
        if d.corollary_satisfied {
            "holds"
        } else {
            "not established"
        }
    );
    let data = match a.format {
        Format::Json => json_line(&d)?,
        Format::Csv => table(&DESIGN_HEADER, [design_row(&d)]),
    };
    Ok(Report::ok(data))
}

fn spectrum_for(n: usize, q: f64, d: usize) -> Result<EndpointSpectrum, Failure> {
    let h = build_hamiltonian(&ChainSpec::with_offset(n, q, d)?)?;
    Ok(EndpointSpectrum::compute(&h, DEFAULT_TOL)?)
}

/// `auto` end time: `DEFAULT_SPAN * t0` of the design at `(n, q)`.
fn resolve_t_max(t_max: TMax, reference: impl FnOnce() -> Result<TransferDesign, Failure>) -> Result<f64, Failure> {
    match t_max {
        TMax::Value(v) => Ok(v),
        TMax::Auto => Ok(DEFAULT_SPAN * reference()?.t0),
    }
}

fn auto_reference(n: usize, q: f64) -> Result<TransferDesign, Failure> {
    if q.is_nan() || q <= 2.0 {
        return Err(usage(format!(
            "--t-max auto needs a design, which needs Q > 2 (got {q}); pass a number"
        )));
    }
    Ok(design_for_q(n, q)?)
}

fn check_samples(samples: usize) -> Result<(), Failure> {
    if samples < 2 {
        return Err(usage(format!("--samples must be at least 2 (got {samples})")));
    }
    Ok(())
}

fn curve_json(curve: &FidelityCurve) -> serde_json::Value {
    json!({ "t": curve.times, "fidelity": curve.values })
}

pub fn simulate(a: &SimulateArgs) -> Result<Report, Failure> {
    check_samples(a.samples)?;
    let (q, theorem) = match (a.q, a.epsilon) {
        (Some(q), None) => (q, None),
        (None, Some(eps)) => {
            let d = design_theorem(a.n, eps)?;
            (d.q, Some(d))
        }
        (Some(_), Some(_)) => return Err(usage("give either --q or --epsilon, not both")),
        (None, None) => return Err(usage("simulate needs --q or --epsilon")),
    };
    let t_max = resolve_t_max(a.t_max, || match theorem {
        Some(d) => Ok(d),
        None => auto_reference(a.n, q),
    })?;
    let spectrum = spectrum_for(a.n, q, a.d)?;
    let curve = fidelity_curve(&spectrum, 0.0, t_max, a.samples)?;
    let (peak_i, peak) = curve.max().unwrap_or((0, f64::NAN));
    eprintln!("peak fidelity {peak:.6} at t = {:.3}", curve.times[peak_i]);
    let data = match a.format {
        Format::Csv => table(
            &["t", "fidelity"],
            curve
                .times
                .iter()
                .zip(&curve.values)
                .map(|(t, f)| vec![num(*t), num(*f)]),
        ),
        Format::Json => json_line(&json!({
            "n": a.n,
            "Q": q,
            "d": a.d,
            "t_max": t_max,
            "samples": a.samples,
            "peak_time": curve.times[peak_i],
            "peak_fidelity": peak,
            "curve": curve_json(&curve),
        }))?,
    };
    Ok(Report::ok(data))
}

enum Check {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(pass: bool, detail: String) -> Check {
    if pass {
        Check::Pass(detail)
    } else {
        Check::Fail(detail)
    }
}

pub fn verify(a: &VerifyArgs) -> Result<Report, Failure> {
    let spec = ChainSpec::with_offset(a.n, a.q, a.d)?;
    let h = build_hamiltonian(&spec)?;
    let n = a.n;
    let q = a.q;
    let mut checks: Vec<(&str, Check)> = Vec::new();

    let decomp = full_decomposition(&h, DEFAULT_TOL)?;
    let mut residual = 0.0_f64;
    let mut ortho = 0.0_f64;
    for (i, (lambda, v)) in decomp.eigenvalues.iter().zip(&decomp.eigenvectors).enumerate() {
        residual = residual.max(h.residual(*lambda, v));
        for w in &decomp.eigenvectors[i..] {
            let dot: f64 = v.iter().zip(w).map(|(x, y)| x * y).sum();
            let want = if std::ptr::eq(v, w) { 1.0 } else { 0.0 };
            ortho = ortho.max((dot - want).abs());
        }
    }
    checks.push((
        "eigenpairs",
        check(
            decomp.len() == n && residual <= 1e-10 * h.scale() && ortho <= 1e-9,
            format!(
                "{} pairs, max residual {residual:.2e}, orthonormality defect {ortho:.2e}",
                decomp.len()
            ),
        ),
    ));

    // Gershgorin picture: isolated loop discs hold exactly two eigenvalues
    let discs = gershgorin_discs(&h);
    let in_union = decomp
        .eigenvalues
        .iter()
        .all(|x| discs.iter().any(|disc| disc.contains(*x)));
    let isolated = q > 4.0;
    let outliers = decomp.outlier_indices.len();
    let counts = if isolated {
        let high = sturm_count_le(&h, q + 2.0) - sturm_count(&h, q - 2.0);
        let bulk = sturm_count(&h, 2.0) - sturm_count_le(&h, -2.0);
        check(
            in_union && high == 2 && bulk == n - 2 && outliers == 2,
            format!("{high} in [Q-2, Q+2], {bulk} in (-2, 2), {outliers} outliers"),
        )
    } else {
        check(
            in_union && outliers == 0,
            format!("loop discs overlap the path discs; {outliers} outliers"),
        )
    };
    checks.push(("gershgorin", counts));

    let duality = if spec.d != 2 {
        Check::Skip(format!("closed forms cover d = 2 only (d = {})", spec.d))
    } else {
        let k = spec.k();
        let (la, lb) = spec.loop_nodes();
        let scale = q.max(1.0);
        let mut worst_s = 0.0_f64;
        let mut worst_r = 0.0_f64;
        let mut checked = 0;
        let mut skipped = 0;
        let mut ok = true;
        for i in decomp.bulk_indices() {
            let lambda = decomp.eigenvalues[i];
            let v = &decomp.eigenvectors[i];
            if lambda.abs() >= 2.0 {
                skipped += 1;
                continue;
            }
            if lambda.abs() < 1e-9 {
                // zero mode of odd chains vanishes on the loops
                ok &= v[la - 1].abs() < 1e-10 && v[lb - 1].abs() < 1e-10;
                skipped += 1;
                continue;
            }
            let theta = angle_of_eigenpair(&h, lambda, v);
            let parity = decomp.parities[i];
            match (secular(parity, theta, k), mode_vector(theta, parity, k)) {
                (Ok(s), Ok(mv)) => {
                    worst_s = worst_s.max((s - q).abs());
                    worst_r = worst_r.max(h.residual(2.0 * theta.cos(), &mv.values));
                    checked += 1;
                }
                _ => ok = false,
            }
        }
        ok &= worst_s <= 1e-8 * scale && worst_r <= 1e-10 * scale;
        check(
            ok,
            format!(
                "{checked} modes, max |secular - Q| {worst_s:.2e}, max mode residual {worst_r:.2e}, {skipped} skipped"
            ),
        )
    };
    checks.push(("duality", duality));

    let oracle = if n > ORACLE_CHECK_MAX_N {
        Check::Skip(format!("n = {n} > {ORACLE_CHECK_MAX_N}"))
    } else {
        let mut worst_amp = 0.0_f64;
        let mut worst_unit = 0.0_f64;
        for &t in &ORACLE_TIMES {
            let u = expm_oracle(&h, t)?;
            worst_amp = worst_amp.max((u[(0, n - 1)] - transfer_amplitude(&decomp, t)).norm());
            let uu = &u * u.adjoint();
            let rows: Vec<_> = (1..=n).map(|m| propagator_row(&decomp, t, m)).collect();
            for i in 0..n {
                for j in 0..n {
                    let id = if i == j { 1.0 } else { 0.0 };
                    let dot: Complex64 = rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y.conj()).sum();
                    worst_unit = worst_unit.max((uu[(i, j)] - id).norm()).max((dot - id).norm());
                }
            }
        }
        check(
            worst_amp <= 1e-8 && worst_unit <= 1e-8,
            format!("amplitude diff {worst_amp:.2e}, unitarity defect {worst_unit:.2e}"),
        )
    };
    checks.push(("oracle", oracle));

    let mut ok = true;
    let mut data = String::new();
    for (name, c) in checks {
        let (tag, detail) = match c {
            Check::Pass(d) => ("PASS", d),
            Check::Fail(d) => {
                ok = false;
                ("FAIL", d)
            }
            Check::Skip(d) => ("SKIP", d),
        };
        data.push_str(&format!("{tag} {name}: {detail}\n"));
    }
    Ok(Report { data, ok })
}

const SWEEP_HEADER: [&str; 14] = [
    "mode",
    "n",
    "epsilon",
    "q",
    "feasible",
    "m",
    "theta1",
    "theta2",
    "t0",
    "fidelity_lower_bound",
    "corollary_satisfied",
    "peak_time",
    "peak_fidelity",
    "note",
];

#[derive(Serialize)]
struct SweepRow {
    mode: &'static str,
    n: usize,
    epsilon: Option<f64>,
    #[serde(rename = "Q")]
    q: Option<f64>,
    feasible: bool,
    design: Option<TransferDesign>,
    peak_time: Option<f64>,
    peak_fidelity: Option<f64>,
    note: String,
}

impl SweepRow {
    fn cells(&self) -> Vec<String> {
        let d = self.design.as_ref();
        vec![
            self.mode.into(),
            self.n.to_string(),
            opt(self.epsilon),
            opt(self.q),
            self.feasible.to_string(),
            d.and_then(|d| d.m).map(|m| m.to_string()).unwrap_or_default(),
            opt(d.map(|d| d.theta1)),
            opt(d.map(|d| d.theta2)),
            opt(d.map(|d| d.t0)),
            opt(d.map(|d| d.fidelity_lower_bound)),
            d.map(|d| d.corollary_satisfied.to_string()).unwrap_or_default(),
            opt(self.peak_time),
            opt(self.peak_fidelity),
            self.note.replace(',', ";"),
        ]
    }
}

fn sweep_point(mode: Mode, n: usize, param: f64) -> Result<SweepRow, Failure> {
    let (epsilon, q_in) = match mode {
        Mode::Theorem => (Some(param), None),
        Mode::Relaxed => (None, Some(param)),
    };
    let mode_label = match mode {
        Mode::Theorem => "theorem",
        Mode::Relaxed => "relaxed",
    };
    let result = match mode {
        Mode::Theorem => design_theorem(n, param),
        Mode::Relaxed => design_for_q(n, param),
    };
    let design = match result {
        Ok(d) => d,
        Err(e @ (CoreError::NoFeasibleM(_) | CoreError::RootFailure(_))) => {
            return Ok(SweepRow {
                mode: mode_label,
                n,
                epsilon,
                q: q_in,
                feasible: false,
                design: None,
                peak_time: None,
                peak_fidelity: None,
                note: e.to_string(),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let spectrum = spectrum_for(n, design.q, 2)?;
    let (peak_time, peak) = peak_search(&spectrum, design.t0, 0.05 * design.t0)?;
    Ok(SweepRow {
        mode: mode_label,
        n,
        epsilon,
        q: Some(design.q),
        feasible: true,
        design: Some(design),
        peak_time: Some(peak_time),
        peak_fidelity: Some(peak),
        note: String::new(),
    })
}

pub fn sweep(a: &SweepArgs) -> Result<Report, Failure> {
    let params = match a.mode {
        Mode::Theorem => {
            if !a.q.is_empty() {
                return Err(usage("theorem sweeps take --epsilon, not --q"));
            }
            &a.epsilon
        }
        Mode::Relaxed => {
            if !a.epsilon.is_empty() {
                return Err(usage("relaxed sweeps take --q, not --epsilon"));
            }
            &a.q
        }
    };
    if !a.n.is_empty() && params.is_empty() {
        return Err(usage(
            "sweep needs at least one --epsilon (theorem) or --q (relaxed) value",
        ));
    }
    let grid: Vec<(usize, f64)> = a.n.iter().flat_map(|&n| params.iter().map(move |&p| (n, p))).collect();

    // grid points run concurrently; rows keep grid order
    let slots: Vec<Mutex<Option<Result<SweepRow, Failure>>>> = grid.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(grid.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n, p)) = grid.get(i) else { break };
                let row = sweep_point(a.mode, n, p);
                *slots[i].lock().unwrap() = Some(row);
            });
        }
    });
    let mut rows = Vec::with_capacity(grid.len());
    for slot in slots {
        let row = slot
            .into_inner()
            .unwrap()
            .ok_or_else(|| Failure::Compute(anyhow!("sweep worker exited early")))??;
        if !row.feasible {
            eprintln!("n = {}: infeasible ({})", row.n, row.note);
        }
        rows.push(row);
    }

    let data = match a.format {
        Format::Csv => table(&SWEEP_HEADER, rows.iter().map(SweepRow::cells)),
        Format::Json => json_line(&json!({ "rows": rows }))?,
    };
    Ok(Report::ok(data))
}

struct Protocol {
    d: usize,
    curve: FidelityCurve,
    window: TransferWindow,
}

pub fn compare(a: &CompareArgs) -> Result<Report, Failure> {
    check_samples(a.samples)?;
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(usage(format!("--threshold must lie in (0, 1] (got {})", a.threshold)));
    }
    let t_max = resolve_t_max(a.t_max, || auto_reference(a.n, a.q))?;
    let mut protocols = Vec::new();
    for d in [2, a.d] {
        let spectrum = spectrum_for(a.n, a.q, d)?;
        let curve = fidelity_curve(&spectrum, 0.0, t_max, a.samples)?;
        let window = window_at_threshold(&curve, a.threshold)?;
        eprintln!(
            "d{d}: peak {:.6} at t = {:.3}; window around peak {:.3}, total above {} = {:.3}",
            window.peak_value,
            window.peak_time,
            window.peak_width(),
            a.threshold,
            window.total_width()
        );
        protocols.push(Protocol { d, curve, window });
    }
    let data = match a.format {
        Format::Csv => table(
            &["protocol", "t", "fidelity"],
            protocols.iter().flat_map(|p| {
                let label = format!("d{}", p.d);
                p.curve
                    .times
                    .iter()
                    .zip(&p.curve.values)
                    .map(move |(t, f)| vec![label.clone(), num(*t), num(*f)])
            }),
        ),
        Format::Json => {
            let items: Vec<_> = protocols
                .iter()
                .map(|p| {
                    json!({
                        "protocol": format!("d{}", p.d),
                        "d": p.d,
                        "peak_time": p.window.peak_time,
                        "peak_fidelity": p.window.peak_value,
                        "peak_window_width": p.window.peak_width(),
                        "total_window_width": p.window.total_width(),
                        "intervals": p.window.intervals,
                        "curve": curve_json(&p.curve),
                    })
                })
                .collect();
            json_line(&json!({
                "n": a.n,
                "Q": a.q,
                "threshold": a.threshold,
                "t_max": t_max,
                "samples": a.samples,
                "protocols": items,
            }))?
        }
    };
    Ok(Report::ok(data))
}

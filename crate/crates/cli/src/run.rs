use crate::config::{Command, ExperimentConfig};
use crate::parse::parse_grid;
use jacobi_core::carleman::{ac_spectral_density, carleman_poly_asym, omega_of};
use jacobi_core::coefficients::{check_essential_selfadjointness, classify, ell1_diagnostics, Regime};
use jacobi_core::model_file::model_to_toml;
use jacobi_core::solutions::{
    first_kind, fit_k_coeffs, fit_super, identity_thm_kappa, second_kind, verify_asymptotics, wronskian,
    wronskian_constancy, AsymptoticFit,
};
use jacobi_core::spectral::{jost_bundle, spectral_mass, spectral_report, SpectralOptions};
use jacobi_core::volterra::{difference_residual, recurrence_residual, SolveOptions};
use jacobi_core::{CoefficientModel, JacobiError, RegimeKind, Verdict};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONVERGENCE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_REFUSED: i32 = 4;

/// Classification window and tolerance used by every command.
const WINDOW: usize = 64;
const BETA_TOL: f64 = 1e-6;
const CARLEMAN_TRUNC: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "OK")]
    Ok,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "REFUSED")]
    Refused,
    #[serde(rename = "ERROR")]
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: Command,
    pub model: String,
    pub model_hash: String,
    pub status: Status,
    pub exit_code: i32,
    /// Headline facts, one per line.
    pub summary: Vec<String>,
    pub constants: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub result: Map<String, Value>,
    pub table: Option<Table>,
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_c(z: Complex64) -> String {
    let sign = if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) { '-' } else { '+' };
    format!("{}{sign}{}i", fmt_f64(z.re), fmt_f64(z.im.abs()))
}

fn cj(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn model_hash(m: &CoefficientModel) -> String {
    let digest = Sha256::digest(model_to_toml(m).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn exit_code_for(e: &JacobiError) -> (Status, i32) {
    use JacobiError::*;
    match e {
        Model(_) | NonPositive { .. } | OutOfTable(_) | InconsistentTail(_) | Invalid(_) => (Status::Error, EXIT_CONFIG),
        RegimeMismatch(_) | Unsupported(_) => (Status::Refused, EXIT_REFUSED),
        NoTailBound(_) | NotConverged { .. } | NearCritical { .. } | ZeroCrossing(_) | DegenerateWronskian { .. }
        | PoleAtZ(_) | Precision(_) | Overflow(_) => (Status::Error, EXIT_CONVERGENCE),
    }
}

pub fn verdict_text(v: Verdict) -> &'static str {
    match v {
        Verdict::EssentiallySelfAdjoint => "essentially self-adjoint",
        Verdict::DeficiencyOneOne => "deficiency (1,1)",
        Verdict::Unknown => "self-adjointness undetermined",
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a CoefficientModel,
    regime: Regime,
    summary: Vec<String>,
    constants: Vec<(String, String)>,
    checks: Vec<Check>,
    warnings: Vec<String>,
    result: Map<String, Value>,
    table: Option<Table>,
}

impl Ctx<'_> {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    fn constant(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.constants.push((name.into(), value.into()));
    }

    fn put(&mut self, key: &str, v: Value) {
        self.result.insert(key.to_string(), v);
    }

    fn opts(&self, n_store: usize, tol: f64) -> SolveOptions {
        let n_trunc = self.cfg.n_trunc.or(self.regime.carleman().then_some(CARLEMAN_TRUNC));
        SolveOptions::new(n_store, n_trunc, self.cfg.tol.unwrap_or(tol))
    }

    fn n(&self, default: usize) -> usize {
        self.cfg.n.unwrap_or(default)
    }
}

/// Runs one experiment. Never panics on solver errors; they become statuses.
pub fn run(cfg: &ExperimentConfig) -> Outcome {
    let model = &cfg.model;
    let mut out = Outcome {
        command: cfg.command,
        model: model.name.clone(),
        model_hash: model_hash(model),
        status: Status::Ok,
        exit_code: EXIT_OK,
        summary: Vec::new(),
        constants: Vec::new(),
        checks: Vec::new(),
        warnings: Vec::new(),
        error: None,
        result: Map::new(),
        table: None,
    };
    let regime = match classify(model, WINDOW, BETA_TOL) {
        Ok(r) => r,
        Err(e) => return fail(out, e),
    };
    let mut ctx = Ctx {
        cfg,
        model,
        regime,
        summary: Vec::new(),
        constants: Vec::new(),
        checks: Vec::new(),
        warnings: Vec::new(),
        result: Map::new(),
        table: None,
    };
    let res = if regime.kind == RegimeKind::Unsupported {
        ctx.summary.push(format!("regime: {:?}", regime.kind));
        Err(JacobiError::Unsupported(regime.beta_inf))
    } else {
        match cfg.command {
            Command::Classify => run_classify(&mut ctx),
            Command::Jost => run_jost(&mut ctx),
            Command::Poly => run_poly(&mut ctx),
            Command::Asym => run_asym(&mut ctx),
            Command::Eig => run_eig(&mut ctx),
            Command::Mass => run_mass(&mut ctx),
            Command::Identity => run_identity(&mut ctx),
            Command::CarlemanDensity => run_density(&mut ctx),
        }
    };
    out.summary = ctx.summary;
    out.constants = ctx.constants;
    out.checks = ctx.checks;
    out.warnings = ctx.warnings;
    out.result = ctx.result;
    out.table = ctx.table;
    match res {
        Err(e) => fail(out, e),
        Ok(()) => {
            if out.checks.iter().any(|c| !c.pass) {
                out.status = Status::Fail;
                out.exit_code = EXIT_CONVERGENCE;
            }
            out
        }
    }
}

fn fail(mut out: Outcome, e: JacobiError) -> Outcome {
    let (status, code) = exit_code_for(&e);
    out.status = status;
    out.exit_code = code;
    out.error = Some(match status {
        Status::Refused => format!("refused: {e}"),
        _ => e.to_string(),
    });
    out
}

fn regime_json(r: &Regime) -> Value {
    json!({
        "kind": format!("{:?}", r.kind),
        "beta_inf": r.beta_inf,
        "kappa_inf": r.kappa_inf,
        "theta_inf": r.theta_inf,
        "vartheta_inf": r.vartheta_inf,
    })
}

fn run_classify(c: &mut Ctx) -> Result<(), JacobiError> {
    let n = c.n(200);
    let sa = check_essential_selfadjointness(c.model, &c.regime, n)?;
    let ell1 = ell1_diagnostics(c.model, n)?;
    let wide = classify(c.model, 2 * WINDOW, BETA_TOL)?;
    c.summary.push(format!("regime: {:?}, {}", c.regime.kind, verdict_text(sa.verdict)));
    c.constant("beta_inf", fmt_f64(c.regime.beta_inf));
    c.constant("kappa_inf", fmt_f64(c.regime.kappa_inf));
    if let Some(t) = c.regime.theta_inf {
        c.constant("theta_inf", fmt_f64(t));
    }
    if let Some(t) = c.regime.vartheta_inf {
        c.constant("vartheta_inf", fmt_f64(t));
    }
    let violated: Vec<String> = sa.evidence.iter().filter(|e| e.starts_with("l1 hypothesis violated")).cloned().collect();
    if violated.is_empty() && ell1.flag {
        c.warnings.push(format!(
            "l1 hypothesis violated: sum |k_n - 1| summable = {}, sum |beta_n| summable = {}",
            ell1.k.summable, ell1.beta.summable
        ));
    }
    c.warnings.extend(violated);
    if sa.verdict == Verdict::DeficiencyOneOne {
        c.warnings.push("deficiency indices (1,1): spectral data depend on the self-adjoint extension".into());
    }
    c.check(
        "classification stable under a doubled window",
        wide.kind == c.regime.kind,
        format!("{:?} at window {} vs {:?} at {}", c.regime.kind, WINDOW, wide.kind, 2 * WINDOW),
    );
    c.put("regime", regime_json(&c.regime));
    c.put("verdict", json!(sa.verdict));
    c.put("evidence", json!(sa.evidence));
    c.put("ln_series_partial", json!(sa.ln_series_partial));
    c.put(
        "ell1",
        json!({
            "n": ell1.n,
            "k_summable": ell1.k.summable,
            "beta_summable": ell1.beta.summable,
            "flag": ell1.flag,
        }),
    );
    Ok(())
}

fn run_jost(c: &mut Ctx) -> Result<(), JacobiError> {
    let n = c.n(200);
    let opts = c.opts(n, 1e-9);
    let mut table = Table { header: vec!["z_re", "z_im", "n", "ln_abs_f", "arg_f", "u_re", "u_im"], rows: Vec::new() };
    let mut points = Vec::new();
    for z in c.cfg.points() {
        let b = jost_bundle(c.model, &c.regime, z, &opts)?;
        let rec = recurrence_residual(c.model, &b)?;
        let diff = difference_residual(&b);
        let omega = omega_of(&b);
        let zs = fmt_c(z);
        c.summary.push(format!("z = {zs}: Omega = {}, N_trunc = {}", fmt_c(omega), b.n_trunc));
        c.check(format!("recurrence residual at z = {zs}"), rec < 1e-10, format!("{rec:.3e} < 1e-10"));
        c.check(
            format!("difference-equation residual at z = {zs}"),
            diff < 10.0 * opts.tol,
            format!("{diff:.3e} < {:.1e}", 10.0 * opts.tol),
        );
        let f: Vec<Value> = (-1..=b.max_index()).map(|k| json!([b.f(k).ln_abs, b.f(k).arg()])).collect();
        for k in 0..=b.max_index() {
            let (fv, u) = (b.f(k), b.u[k as usize]);
            table.rows.push(
                [z.re, z.im, k as f64, fv.ln_abs, fv.arg(), u.re, u.im].iter().map(|&x| fmt_f64(x)).collect(),
            );
        }
        points.push(json!({
            "z": cj(z),
            "index_range": [-1, b.max_index()],
            "f_ln_abs_arg": f,
            "u": b.u.iter().map(|&u| cj(u)).collect::<Vec<_>>(),
            "omega": cj(omega),
            "n_trunc": b.n_trunc,
            "certificate": b.certificate,
            "cancellation_bits": b.cancellation_bits,
            "conjugated": b.conjugated,
            "recurrence_residual": rec,
            "difference_residual": diff,
        }));
    }
    c.put("regime", regime_json(&c.regime));
    c.put("points", Value::Array(points));
    c.table = Some(table);
    Ok(())
}

fn run_poly(c: &mut Ctx) -> Result<(), JacobiError> {
    let n = c.n(200) as i64;
    let mut table =
        Table { header: vec!["z_re", "z_im", "n", "ln_abs_p", "arg_p", "ln_abs_q", "arg_q"], rows: Vec::new() };
    let mut points = Vec::new();
    for z in c.cfg.points() {
        let p = first_kind(c.model, z, n + 1)?;
        let q = second_kind(c.model, z, n + 1)?;
        let w0 = wronskian(c.model, &p, &q, 0)?;
        let dev = wronskian_constancy(c.model, &p, &q, n)?;
        let zs = fmt_c(z);
        c.summary.push(format!("z = {zs}: ln|P_{n}| = {}", fmt_f64(p.get(n).ln_abs)));
        c.check(format!("{{P, P~}} = 1 at z = {zs}"), (w0 - 1.0).norm() < 1e-10, format!("|W - 1| = {:.3e}", (w0 - 1.0).norm()));
        c.check(format!("Wronskian constancy at z = {zs}"), dev < 1e-10, format!("{dev:.3e} < 1e-10"));
        for k in 0..=n {
            let (pv, qv) = (p.get(k), q.get(k));
            table.rows.push([z.re, z.im, k as f64, pv.ln_abs, pv.arg(), qv.ln_abs, qv.arg()].iter().map(|&x| fmt_f64(x)).collect());
        }
        points.push(json!({ "z": cj(z), "n": n, "wronskian": cj(w0), "constancy": dev }));
    }
    c.put("points", Value::Array(points));
    c.table = Some(table);
    Ok(())
}

fn fit_constants(c: &mut Ctx, zs: &str, fit: &AsymptoticFit) {
    for (name, v) in [("k_plus", fit.k_plus), ("k_minus", fit.k_minus), ("k_super", fit.k_super)] {
        if let Some(v) = v {
            c.constant(format!("{name}({zs})"), fmt_c(v));
        }
    }
    if let (Some(k), Some(e)) = (fit.kappa, fit.eta) {
        c.constant(format!("kappa({zs})"), fmt_f64(k));
        c.constant(format!("eta({zs})"), fmt_f64(e));
    }
}

fn run_asym(c: &mut Ctx) -> Result<(), JacobiError> {
    let n = c.n(400);
    let mut points = Vec::new();
    let mut table = Table { header: vec!["z_re", "z_im", "n", "residual"], rows: Vec::new() };
    for z in c.cfg.points() {
        let zs = fmt_c(z);
        if c.regime.kind == RegimeKind::CarlemanSub {
            let rep = carleman_poly_asym(c.model, &c.regime, z.re, n, &c.opts(n, 1e-2))?;
            if z.im != 0.0 {
                c.warnings.push(format!("sine asymptotics are taken at the real part of {zs}"));
            }
            c.constant(format!("|Omega({})|", fmt_f64(z.re)), fmt_f64(rep.omega.norm()));
            c.constant(format!("arg Omega({})", fmt_f64(z.re)), fmt_f64(rep.omega.arg()));
            let dyadic: Vec<String> = rep.dyadic.iter().map(|(k, r)| format!("{k}: {r:.3e}")).collect();
            c.check(format!("dyadic residual decreasing at {}", fmt_f64(z.re)), rep.decreasing, dyadic.join(", "));
            c.check(
                format!("resynthesis from f and its conjugate at {}", fmt_f64(z.re)),
                rep.resynthesis < 1e-8,
                format!("{:.3e} < 1e-8", rep.resynthesis),
            );
            for &(k, r) in &rep.residuals {
                table.rows.push([z.re, 0.0, k as f64, r].iter().map(|&x| fmt_f64(x)).collect());
            }
            points.push(json!({ "z": cj(Complex64::new(z.re, 0.0)), "report": rep }));
            continue;
        }
        let opts = c.opts(n + 16, if c.regime.carleman() { 1e-2 } else { 1e-9 });
        let b = jost_bundle(c.model, &c.regime, z, &opts)?;
        let p = first_kind(c.model, z, opts.n_store as i64 + 1)?;
        let fit = if c.regime.sub() {
            let bc = jost_bundle(c.model, &c.regime, z.conj(), &opts)?.conjugate();
            fit_k_coeffs(c.model, &c.regime, &p, &b, &bc)?
        } else {
            fit_super(c.model, &c.regime, &p, &b)?
        };
        let lo = (n / 2) as i64;
        let rep = verify_asymptotics(c.model, &c.regime, &p, &fit, &b, (lo, n as i64))?;
        let scale = match fit.k_super {
            Some(k) => k.norm(),
            None => fit.k_plus.unwrap().norm() + fit.k_minus.unwrap().norm(),
        };
        let tail = b.r_after[lo as usize] + b.certificate.r_beyond;
        let rel = rep.max_residual / scale;
        let bound = 20.0 * tail + 1e-9;
        fit_constants(c, &zs, &fit);
        c.summary.push(format!("z = {zs}: relative residual {rel:.3e} on [{lo}, {n}]"));
        c.check(
            format!("asymptotic residual at z = {zs}"),
            rel <= bound,
            format!("{rel:.3e} <= 20 * tail {tail:.3e} + 1e-9"),
        );
        for &(k, r) in &rep.residuals {
            table.rows.push([z.re, z.im, k as f64, r].iter().map(|&x| fmt_f64(x)).collect());
        }
        points.push(json!({ "z": cj(z), "fit": fit, "window": rep.window, "max_residual": rep.max_residual, "tail": tail }));
    }
    c.put("regime", regime_json(&c.regime));
    c.put("points", Value::Array(points));
    c.table = Some(table);
    Ok(())
}

fn run_eig(c: &mut Ctx) -> Result<(), JacobiError> {
    let g = c.cfg.grid.expect("eig grid validated");
    let so = SpectralOptions {
        interval: (g.lo, g.hi),
        grid_step: g.step,
        root_tol: 1e-14,
        n_series: c.n(200),
        oracle_start: 60,
        oracle_bits: c.cfg.bits,
        match_tol: 1e-6,
        solve: c.opts(8, 1e-12),
    };
    let rep = spectral_report(c.model, &so)?;
    c.summary.push(format!(
        "{} eigenvalue(s) in [{}, {}], {}",
        rep.eigenvalues.len(),
        fmt_f64(g.lo),
        fmt_f64(g.hi),
        verdict_text(rep.verdict)
    ));
    for (k, l) in rep.eigenvalues.iter().enumerate() {
        c.constant(format!("lambda_{k}"), fmt_f64(*l));
    }
    let matched = rep.eigenvalues.iter().zip(&rep.oracle.gaps).all(|(l, gap)| *gap <= 1e-6 * l.abs().max(1.0));
    let worst = rep.oracle.gaps.iter().copied().fold(0.0, f64::max);
    c.check("roots match the finite-section oracle", matched && rep.oracle.unmatched.is_empty(), format!(
        "worst gap {worst:.3e}, {} unmatched oracle eigenvalue(s), N = {}",
        rep.oracle.unmatched.len(),
        rep.oracle.n
    ));
    let mass_gap = rep.masses.iter().map(|m| m.rel_gap).fold(0.0, f64::max);
    c.check("series and Jost masses agree", mass_gap < 1e-4, format!("worst relative gap {mass_gap:.3e} < 1e-4"));
    c.check(
        "total mass in the window at most 1",
        rep.mass_total_series <= 1.0 + 1e-6,
        format!("{} <= 1 + 1e-6", fmt_f64(rep.mass_total_series)),
    );
    c.warnings.extend(rep.warnings.iter().cloned());
    let mut table = Table { header: vec!["k", "lambda", "mass_series", "mass_jost", "oracle_gap"], rows: Vec::new() };
    for (k, (l, m)) in rep.eigenvalues.iter().zip(&rep.masses).enumerate() {
        table.rows.push([k as f64, *l, m.series, m.jost, rep.oracle.gaps[k]].iter().map(|&x| fmt_f64(x)).collect());
    }
    c.put("interval", json!([g.lo, g.hi]));
    c.put("eigenvalues", json!(rep.eigenvalues));
    c.put(
        "masses",
        json!({
            "series": rep.masses.iter().map(|m| m.series).collect::<Vec<_>>(),
            "jost": rep.masses.iter().map(|m| m.jost).collect::<Vec<_>>(),
            "rel_gap": rep.masses.iter().map(|m| m.rel_gap).collect::<Vec<_>>(),
            "total_series": rep.mass_total_series,
        }),
    );
    c.put(
        "oracle",
        json!({ "N": rep.oracle.n, "eigs": rep.oracle.eigs, "gaps": rep.oracle.gaps, "unmatched": rep.oracle.unmatched }),
    );
    c.put("verdict", json!(rep.verdict));
    c.put("extension_dependent", json!(rep.extension_dependent));
    c.put("roots", json!(rep.scan.roots));
    c.table = Some(table);
    Ok(())
}

fn run_mass(c: &mut Ctx) -> Result<(), JacobiError> {
    let n = c.n(200);
    let opts = c.opts(8, 1e-12);
    let mut masses = Vec::new();
    let mut table = Table { header: vec!["lambda", "mass_series", "mass_jost", "mass_jost_five_point", "rel_gap"], rows: Vec::new() };
    for z in c.cfg.points() {
        let m = spectral_mass(c.model, &c.regime, z.re, n, None, &opts)?;
        let l = fmt_f64(z.re);
        c.constant(format!("mass({l}) series"), fmt_f64(m.series));
        c.constant(format!("mass({l}) jost"), fmt_f64(m.jost));
        c.check(format!("mass formulas agree at {l}"), m.rel_gap < 1e-4, format!("relative gap {:.3e} < 1e-4", m.rel_gap));
        table.rows.push([m.lambda, m.series, m.jost, m.jost_five_point, m.rel_gap].iter().map(|&x| fmt_f64(x)).collect());
        masses.push(m);
    }
    c.put("masses", json!(masses));
    c.table = Some(table);
    Ok(())
}

fn run_identity(c: &mut Ctx) -> Result<(), JacobiError> {
    let n = c.n(500);
    let opts = c.opts(n + 100, 1e-9);
    let mut points = Vec::new();
    for z in c.cfg.points() {
        let rep = identity_thm_kappa(c.model, &c.regime, z, n, &opts)?;
        let zs = fmt_c(z);
        c.summary.push(format!(
            "z = {zs}: kappa(zbar)^2 - kappa(z)^2 = {}, Im z kappa_inf (1 - beta_inf^2)^(-1/2) sum_(n <= {n}) |P_n|^2 = {}",
            fmt_f64(rep.lhs),
            fmt_f64(rep.rhs_truncated)
        ));
        c.constant(format!("kappa({zs})"), fmt_f64(rep.kappa_z));
        c.constant(format!("kappa({})", fmt_c(z.conj())), fmt_f64(rep.kappa_zbar));
        c.check(format!("identity relative gap at z = {zs}"), rep.rel_gap < 1e-2, format!("{:.3e} < 1e-2", rep.rel_gap));
        if z.im != 0.0 {
            let ordered = if z.im > 0.0 { rep.kappa_z < rep.kappa_zbar } else { rep.kappa_z > rep.kappa_zbar };
            c.check(
                format!("kappa ordering at z = {zs}"),
                ordered,
                format!("kappa(z) = {}, kappa(zbar) = {}", fmt_f64(rep.kappa_z), fmt_f64(rep.kappa_zbar)),
            );
        }
        points.push(json!(rep));
    }
    c.put("points", Value::Array(points));
    Ok(())
}

fn run_density(c: &mut Ctx) -> Result<(), JacobiError> {
    let grid = match c.cfg.grid {
        Some(g) => g,
        None => parse_grid("-3:3:0.1").expect("default grid"),
    };
    let opts = c.opts(2, 1e-2);
    let rep = ac_spectral_density(c.model, &c.regime, &grid.points(), &opts)?;
    c.summary.push(format!(
        "{} grid points on [{}, {}], integral {}",
        rep.points.len(),
        fmt_f64(grid.lo),
        fmt_f64(grid.hi),
        fmt_f64(rep.integral)
    ));
    c.check("density positive on the grid", rep.all_positive, format!("{} points", rep.points.len()));
    c.check("window mass at most 1", rep.integral <= 1.0 + 1e-2, format!("{} <= 1 + 1e-2", fmt_f64(rep.integral)));
    let mut table = Table { header: vec!["lambda", "omega_abs", "density"], rows: Vec::new() };
    for p in &rep.points {
        table.rows.push([p.lambda, p.omega_abs, p.density].iter().map(|&x| fmt_f64(x)).collect());
    }
    c.put("grid", json!(grid));
    c.put("density", json!(rep));
    c.table = Some(table);
    Ok(())
}

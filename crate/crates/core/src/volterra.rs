//! Truncated Volterra equation for `u_n` and the Jost solution `f_n = Q_n u_n`.

use crate::ansatz::{remainder_from, AnsatzRows, AnsatzTable, Step, StepSource};
use crate::coefficients::{CoefficientModel, Regime, RegimeKind};
use crate::error::{JacobiError, Result};
use crate::logscaled::LogComplex;
use num_complex::Complex64;
use serde::Serialize;

/// Sign in front of the kernel, `G_{n,m} = KERNEL_SIGN (kappa_{m-1} zeta_m)^{-1} sum ...`.
/// Pinned by requiring the solution to satisfy the difference equation for `u`.
pub const KERNEL_SIGN: f64 = -1.0;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Largest index whose values are kept; `u` and `f` are stored on `0..=n_store+1`.
    pub n_store: usize,
    /// Truncation horizon; `None` picks one from the closed-form tail bounds.
    pub n_trunc: Option<usize>,
    pub tol: f64,
    /// Re-solve at half the horizon and compare `u_0`.
    pub self_check: bool,
}

impl SolveOptions {
    pub fn new(n_store: usize, n_trunc: Option<usize>, tol: f64) -> Self {
        SolveOptions { n_store, n_trunc, tol, self_check: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// Twice the largest sampled `|G_{n,m}|`.
    pub g_max: f64,
    /// Bound (or fitted estimate) for `sum_{m > N_trunc} |r_m|`.
    pub r_beyond: f64,
    pub r_beyond_certified: bool,
    /// `(exp(g R_N) - 1) exp(g R_0)`.
    pub a_priori: f64,
    /// `|u_0(N) - u_0(N/2)|`.
    pub self_check: Option<f64>,
    /// The smaller of the two estimates above.
    pub estimate: f64,
    /// `u` is a Richardson combination of sweeps; `self_check` then compares
    /// two such combinations.
    pub extrapolated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JostBundle {
    pub z: Complex64,
    pub kind: RegimeKind,
    pub kernel_sign: f64,
    pub n_trunc: usize,
    pub n_store: usize,
    /// `u_n`, `n = 0..=n_store+1`.
    pub u: Vec<Complex64>,
    /// `u_n - u_{n-1}`, `n = 1..=n_store+1` (index 0 unused).
    pub du: Vec<Complex64>,
    /// `r_n`, `n = 1..=n_store+1` (index 0 unused).
    pub r: Vec<Complex64>,
    /// `sum_{n < m <= N_trunc} |r_m|`.
    pub r_after: Vec<f64>,
    #[serde(skip)]
    pub table: AnsatzTable,
    #[serde(skip)]
    f: Vec<LogComplex>,
    pub certificate: Certificate,
    /// Bits lost forming `f_{-1}` from `f_0` and `f_1`.
    pub cancellation_bits: f64,
    /// Whether the values were obtained by conjugating the solution at `conj(z)`.
    pub conjugated: bool,
}

impl JostBundle {
    /// `f_n` for `-1 <= n <= n_store + 1`.
    pub fn f(&self, n: i64) -> LogComplex {
        self.f[(n + 1) as usize]
    }

    pub fn f_values(&self) -> &[LogComplex] {
        &self.f
    }

    pub fn max_index(&self) -> i64 {
        self.n_store as i64 + 1
    }

    /// Conjugate every stored quantity; used for `f~(z) = conj(f(conj z))`.
    pub fn conjugate(&self) -> JostBundle {
        let mut b = self.clone();
        b.z = self.z.conj();
        for v in b.u.iter_mut().chain(b.du.iter_mut()).chain(b.r.iter_mut()) {
            *v = v.conj();
        }
        for v in &mut b.f {
            *v = v.conj();
        }
        for s in &mut b.table.steps {
            s.zeta = s.zeta.conj();
            s.arg_zeta = -s.arg_zeta;
            s.d = s.d.conj();
        }
        for q in &mut b.table.log_q {
            *q = q.conj();
        }
        for v in b.table.sigma.iter_mut().chain(b.table.log_s.iter_mut()) {
            *v = v.conj();
        }
        b.table.z = b.z;
        b.conjugated = !self.conjugated;
        b
    }
}

/// Backward sweep of the difference form of the truncated equation.
///
/// With `Y_{N+1} = 0`, `u_N = 1`:
/// `Y_p = zeta_{p-1} r_p u_p + sigma_p k_p Y_{p+1}`, `u_{p-1} = u_p + sign * Y_p`,
/// which is the truncated Volterra system with kernel sign `sign`.
pub(crate) struct Sweep {
    pub u: Vec<Complex64>,
    pub du: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub r_after: Vec<f64>,
}

pub(crate) fn sweep(src: &impl StepSource, n_trunc: usize, n_store: usize, sign: f64) -> Result<Sweep> {
    if n_trunc < n_store + 1 {
        return Err(JacobiError::Invalid(format!("N_trunc {n_trunc} must exceed n_store {n_store}")));
    }
    let len = n_store + 2;
    let mut out = Sweep { u: vec![C0; len], du: vec![C0; len], r: vec![C0; len], r_after: vec![0.0; len] };
    let mut u = C1;
    let mut y = C0;
    let mut rsum = 0.0f64;
    let mut cur = src.step(n_trunc)?;
    if n_trunc < len {
        out.u[n_trunc] = u;
        out.r_after[n_trunc] = 0.0;
    }
    for p in (1..=n_trunc).rev() {
        let prev = src.step(p - 1)?;
        let r = remainder_from(&prev, &cur);
        y = prev.zeta * r * u + cur.zeta * prev.zeta * cur.k * y;
        let u_prev = u + sign * y;
        rsum += r.norm();
        if p < len {
            out.du[p] = -sign * y;
            out.r[p] = r;
        }
        if p - 1 < len {
            out.u[p - 1] = u_prev;
            out.r_after[p - 1] = rsum;
        }
        u = u_prev;
        cur = prev;
    }
    if !u.is_finite() {
        return Err(JacobiError::NotConverged { certificate: f64::INFINITY, limit: 0.0 });
    }
    Ok(out)
}

fn collect_steps(src: &impl StepSource, from: usize, to: usize) -> Result<Vec<Step>> {
    (from..=to).map(|n| src.step(n)).collect()
}

/// Twice the largest `|G_{n,m}|` over sampled rows `n` and `m <= n + span`.
pub fn estimate_g_max(src: &impl StepSource, n_trunc: usize, span: usize) -> Result<f64> {
    let mut rows = vec![0usize];
    let mut n = 1usize;
    while n < n_trunc {
        rows.push(n);
        n *= 2;
    }
    rows.push(n_trunc.saturating_sub(span.min(n_trunc)));
    let mut g = 0.0f64;
    for &n in &rows {
        let hi = (n + span).min(n_trunc);
        if hi <= n {
            continue;
        }
        let steps = collect_steps(src, n, hi)?;
        // H_{n,n+1} = sigma_{n+1};  H_{n,m+1} = sigma_{m+1} (k_m H_{n,m} + 1)
        let mut h = steps[1].zeta * steps[0].zeta;
        g = g.max((h / steps[1].zeta).norm());
        for j in 1..steps.len() - 1 {
            let sigma = steps[j + 1].zeta * steps[j].zeta;
            h = sigma * (steps[j].k * h + 1.0);
            g = g.max((h / steps[j + 1].zeta).norm());
        }
    }
    Ok(2.0 * g)
}

/// `G_{n,m}` evaluated directly from the summed form with an explicit sign.
pub fn kernel_g_signed(table: &AnsatzTable, n: usize, m: usize, sign: f64) -> Complex64 {
    assert!(n < m && m < table.len());
    let lk_m = table.steps[m - 1].ln_kappa;
    // products sigma_p ... sigma_m, built from the right
    let mut prods = vec![C0; m - n];
    let mut acc = C1;
    for p in (n + 1..=m).rev() {
        acc *= table.steps[p].zeta * table.steps[p - 1].zeta;
        prods[p - n - 1] = acc;
    }
    let mut s = C0;
    for p in n + 1..=m {
        let w = (table.steps[p - 1].ln_kappa - lk_m).exp();
        s += w * prods[p - n - 1];
    }
    sign * s / table.steps[m].zeta
}

pub fn kernel_g(table: &AnsatzTable, n: usize, m: usize) -> Complex64 {
    kernel_g_signed(table, n, m, KERNEL_SIGN)
}

/// Dense solve of `u_n = 1 + sum_{m=n+1}^{N} G_{n,m} r_m u_m` by backward
/// substitution, `N = table.len() - 1`.
pub fn dense_reference(table: &AnsatzTable, sign: f64) -> Vec<Complex64> {
    let big_n = table.len() - 1;
    let mut u = vec![C1; big_n + 1];
    let r: Vec<Complex64> = (0..=big_n).map(|n| if n == 0 { C0 } else { table.remainder(n) }).collect();
    for n in (0..big_n).rev() {
        let mut s = C1;
        for m in n + 1..=big_n {
            s += kernel_g_signed(table, n, m, sign) * r[m] * u[m];
        }
        u[n] = s;
    }
    u
}

/// Diagnostic record of literal successive approximations on a dense kernel.
#[derive(Clone, Debug, Serialize)]
pub struct VolterraState {
    pub n_trunc: usize,
    pub g_max: f64,
    pub iterations: usize,
    /// `sup_n |u^(k) - u^(k-1)|` for each iterate.
    pub sup_norms: Vec<f64>,
    /// `(g R_0)^k / k!`.
    pub factorial_bound: Vec<f64>,
    pub u: Vec<Complex64>,
}

pub fn successive_approximations(table: &AnsatzTable, iterations: usize) -> VolterraState {
    let big_n = table.len() - 1;
    let mut g = vec![vec![C0; big_n + 1]; big_n + 1];
    let mut g_max = 0.0f64;
    for (n, row) in g.iter_mut().enumerate() {
        for (m, v) in row.iter_mut().enumerate().skip(n + 1) {
            *v = kernel_g(table, n, m);
            g_max = g_max.max(v.norm());
        }
    }
    let r: Vec<Complex64> = (0..=big_n).map(|n| if n == 0 { C0 } else { table.remainder(n) }).collect();
    let r0: f64 = r.iter().map(|v| v.norm()).sum();
    let mut u = vec![C1; big_n + 1];
    let mut term = vec![C1; big_n + 1];
    let mut sup_norms = Vec::new();
    let mut factorial_bound = Vec::new();
    let mut fb = 1.0;
    for k in 1..=iterations {
        let next: Vec<Complex64> = (0..=big_n)
            .map(|n| (n + 1..=big_n).map(|m| g[n][m] * r[m] * term[m]).sum())
            .collect();
        fb *= g_max * r0 / k as f64;
        let sup = next.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        for (un, t) in u.iter_mut().zip(&next) {
            *un += t;
        }
        term = next;
        sup_norms.push(sup);
        factorial_bound.push(fb);
    }
    VolterraState { n_trunc: big_n, g_max, iterations, sup_norms, factorial_bound, u }
}

/// Bound on `sum_{m > n} |r_m|` for the plain ansatz from the family tails.
pub fn r_beyond_bound(model: &CoefficientModel, regime: &Regime, z: Complex64, n: usize) -> Result<(f64, bool)> {
    let tb = model.tail_bounds(n)?;
    let root = regime.root().max(1e-300);
    // |1/zeta_{m-1} - 1/zeta_m| <= |beta_{m-1} - beta_m| / sqrt|1 - beta^2| up to the drift of beta
    let v = 1.25 * tb.beta / root + tb.k + 2.0 * z.norm() * tb.alpha;
    Ok((v, tb.certified))
}

pub(crate) fn auto_horizon(
    src: &impl StepSource,
    n_store: usize,
    tol: f64,
    cap: usize,
    r_beyond: &dyn Fn(usize) -> Result<(f64, bool)>,
) -> Result<usize> {
    let mut n = (2 * (n_store + 1)).max(4096).min(cap);
    let g = estimate_g_max(src, n, 2048)?;
    while n < cap {
        let (rb, _) = r_beyond(n)?;
        if g * rb <= tol {
            break;
        }
        n = (2 * n).min(cap);
    }
    Ok(n)
}

/// Largest horizon the automatic choice will use.
pub const HORIZON_CAP: usize = 1 << 26;

/// Horizons above this are replaced by extrapolation from three shorter sweeps.
pub const EXTRAPOLATION_THRESHOLD: usize = 1 << 20;

/// Shared driver: sweep, certificates, table and Jost values.
pub(crate) fn solve_source(
    src: &impl StepSource,
    model: &CoefficientModel,
    kind: RegimeKind,
    opts: &SolveOptions,
    r_beyond: &dyn Fn(usize) -> Result<(f64, bool)>,
) -> Result<JostBundle> {
    let limit_n = if model.has_tail() { HORIZON_CAP } else { model.table_len().saturating_sub(2) };
    let n_trunc = match opts.n_trunc {
        Some(n) => n,
        None => auto_horizon(src, opts.n_store, opts.tol, limit_n, r_beyond)?,
    };
    if n_trunc > limit_n && !model.has_tail() {
        return Err(JacobiError::OutOfTable(n_trunc));
    }
    if opts.n_trunc.is_none() && n_trunc > EXTRAPOLATION_THRESHOLD && EXTRAPOLATION_THRESHOLD / 4 > 2 * (opts.n_store + 1) {
        if let Some(b) = extrapolated(src, model, kind, opts, r_beyond)? {
            return Ok(b);
        }
    }
    let sw = sweep(src, n_trunc, opts.n_store, KERNEL_SIGN)?;
    let g_max = estimate_g_max(src, n_trunc, 2048)?;
    let (rb, rb_cert) = r_beyond(n_trunc)?;
    if g_max * rb >= 0.5 {
        return Err(JacobiError::NotConverged { certificate: g_max * rb, limit: 0.5 });
    }
    let a_priori = (g_max * rb).exp_m1() * (g_max * sw.r_after[0]).exp();
    let self_check = if opts.self_check && n_trunc / 2 >= 1 {
        let half = sweep(src, n_trunc / 2, 0, KERNEL_SIGN)?;
        Some((half.u[0] - sw.u[0]).norm())
    } else {
        None
    };
    let estimate = self_check.map_or(a_priori, |s| s.min(a_priori));
    if estimate > 1e3 * opts.tol {
        return Err(JacobiError::NotConverged { certificate: estimate, limit: 1e3 * opts.tol });
    }
    let certificate =
        Certificate { g_max, r_beyond: rb, r_beyond_certified: rb_cert, a_priori, self_check, estimate, extrapolated: false };
    let table = AnsatzTable::from_source(src, opts.n_store + 2)?;
    assemble(src, model, kind, table, sw, n_trunc, opts.n_store, certificate)
}

/// Richardson step over horizons `N, 2N, 4N`: with `rho` the ratio of successive
/// differences of `u_0`, `u = (u(4N) - rho u(2N)) / (1 - rho)`. A fixed linear
/// combination of sweep solutions still solves the difference equation.
/// Returns `None` when the differences do not contract geometrically.
fn extrapolated(
    src: &impl StepSource,
    model: &CoefficientModel,
    kind: RegimeKind,
    opts: &SolveOptions,
    r_beyond: &dyn Fn(usize) -> Result<(f64, bool)>,
) -> Result<Option<JostBundle>> {
    let n0 = EXTRAPOLATION_THRESHOLD / 4;
    let h = sweep(src, n0 / 2, 0, KERNEL_SIGN)?.u[0];
    let s1 = sweep(src, n0, opts.n_store, KERNEL_SIGN)?;
    let s2 = sweep(src, 2 * n0, opts.n_store, KERNEL_SIGN)?;
    let s4 = sweep(src, 4 * n0, opts.n_store, KERNEL_SIGN)?;
    let (d1, d2, d0) = (s2.u[0] - s1.u[0], s4.u[0] - s2.u[0], s1.u[0] - h);
    if d1.norm() == 0.0 || d0.norm() == 0.0 {
        return Ok(None);
    }
    let rho = d2 / d1;
    let rho_prev = d1 / d0;
    if !(rho.norm() < 0.75 && rho_prev.norm() < 0.75) || (rho - rho_prev).norm() > 0.1 {
        return Ok(None);
    }
    let combine = |a: &[Complex64], b: &[Complex64], w: Complex64| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| (x - w * y) / (1.0 - w)).collect()
    };
    let u0 = (s4.u[0] - rho * s2.u[0]) / (1.0 - rho);
    let u0_prev = (s2.u[0] - rho_prev * s1.u[0]) / (1.0 - rho_prev);
    let estimate = (u0 - u0_prev).norm();
    if estimate > 1e3 * opts.tol {
        return Ok(None);
    }
    let g_max = estimate_g_max(src, 4 * n0, 2048)?;
    let (rb, rb_cert) = r_beyond(4 * n0)?;
    let a_priori = (g_max * rb).exp_m1() * (g_max * s4.r_after[0]).exp();
    let sw = Sweep { u: combine(&s4.u, &s2.u, rho), du: combine(&s4.du, &s2.du, rho), r: s4.r, r_after: s4.r_after };
    let certificate = Certificate {
        g_max,
        r_beyond: rb,
        r_beyond_certified: rb_cert,
        a_priori,
        self_check: Some(estimate),
        estimate,
        extrapolated: true,
    };
    let table = AnsatzTable::from_source(src, opts.n_store + 2)?;
    assemble(src, model, kind, table, sw, 4 * n0, opts.n_store, certificate).map(Some)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    src: &impl StepSource,
    model: &CoefficientModel,
    kind: RegimeKind,
    table: AnsatzTable,
    sw: Sweep,
    n_trunc: usize,
    n_store: usize,
    certificate: Certificate,
) -> Result<JostBundle> {
    let z = src.z();
    let mut f = Vec::with_capacity(n_store + 3);
    f.push(LogComplex::ZERO);
    for n in 0..=n_store + 1 {
        f.push(table.log_q[n] * sw.u[n]);
    }
    // f_{-1} = 2 ((z - b_0) f_0 - a_0 f_1) with f_1 = Q_0 c (u_0 + du_1), c = zeta_0 sqrt(a_0/a_1)
    let la0 = model.ln_a(0)?;
    let la1 = model.ln_a(1)?;
    let c = table.steps[0].zeta * (la0 + 0.5 * (la0 - la1)).exp();
    let b0 = model.eval_b(0)?;
    let lead = z - b0 - c;
    let v = lead * sw.u[0] - c * sw.du[1];
    let scale = (z - b0).norm() * sw.u[0].norm() + c.norm() * sw.u[1].norm();
    let cancellation_bits = if v.norm() > 0.0 { (scale / v.norm()).log2().max(0.0) } else { f64::INFINITY };
    f[0] = table.log_q[0] * (2.0 * v);
    Ok(JostBundle {
        z,
        kind,
        kernel_sign: KERNEL_SIGN,
        n_trunc,
        n_store,
        u: sw.u,
        du: sw.du,
        r: sw.r,
        r_after: sw.r_after,
        table,
        f,
        certificate,
        cancellation_bits,
        conjugated: false,
    })
}

/// `u_n` for the plain ansatz (non-Carleman regimes).
pub fn solve_u(model: &CoefficientModel, regime: &Regime, z: Complex64, opts: &SolveOptions) -> Result<JostBundle> {
    match regime.kind {
        RegimeKind::SubCritical | RegimeKind::SuperCritical => {}
        RegimeKind::Unsupported => return Err(JacobiError::Unsupported(regime.beta_inf)),
        _ => return Err(JacobiError::RegimeMismatch("Carleman regime needs the z-dependent ansatz".into())),
    }
    if !(regime.kappa_inf.is_finite() && regime.kappa_inf > 0.0) {
        return Err(JacobiError::RegimeMismatch(format!("kappa_inf = {} is not a positive finite limit", regime.kappa_inf)));
    }
    if let Some((k_ok, b_ok)) = model.ell1_hypotheses() {
        if !(k_ok && b_ok) {
            return Err(JacobiError::RegimeMismatch("l1 hypothesis on k_n - 1 or beta_n violated: no Jost solution".into()));
        }
    }
    let src = AnsatzRows::new(model, regime, z);
    let rb = |n: usize| r_beyond_bound(model, regime, z, n).or_else(|_| fitted_r_beyond(&src, n));
    solve_source(&src, model, regime.kind, opts, &rb)
}

/// Power-law extrapolation of `sum_{m > n} |r_m|` from the last computed remainders.
pub(crate) fn fitted_r_beyond(src: &impl StepSource, n: usize) -> Result<(f64, bool)> {
    if n < 64 {
        return Ok((f64::INFINITY, false));
    }
    let (n1, n2) = (n / 2, n);
    let r_at = |m: usize| -> Result<f64> { Ok(remainder_from(&src.step(m - 1)?, &src.step(m)?).norm()) };
    let (r1, r2) = (r_at(n1)?, r_at(n2)?);
    if r2 == 0.0 {
        return Ok((0.0, false));
    }
    let s = (r2 / r1).ln() / 2f64.ln();
    if s >= -1.0 {
        return Ok((f64::INFINITY, false));
    }
    // sum_{m > n} r_n (m/n)^s ~ r_n n / (-s - 1)
    Ok((r2 * n as f64 / (-s - 1.0) * 1.5, false))
}

/// Jost solution; alias of [`solve_u`] since the bundle already carries `f`.
pub fn jost_f(model: &CoefficientModel, regime: &Regime, z: Complex64, opts: &SolveOptions) -> Result<JostBundle> {
    solve_u(model, regime, z, opts)
}

/// `f~_n(z) = conj(f_n(conj z))` from a bundle solved at `conj z`.
pub fn conjugate_jost(bundle_at_conj: &JostBundle) -> JostBundle {
    bundle_at_conj.conjugate()
}

/// Max over `1 <= n <= n_store` of `|a_{n-1} f_{n-1} + (b_n - z) f_n + a_n f_{n+1}|`
/// relative to `sqrt(a_{n-1} a_n) |Q_n|`.
pub fn recurrence_residual(model: &CoefficientModel, b: &JostBundle) -> Result<f64> {
    let mut worst = 0.0f64;
    for n in 1..=b.n_store {
        let (lp, l0) = (model.ln_a(n as i64 - 1)?, model.ln_a(n as i64)?);
        let scale = 0.5 * (lp + l0) + b.table.log_q[n].ln_abs;
        let t1 = b.f(n as i64 - 1).scale_ln(lp).rescaled(scale);
        let t3 = b.f(n as i64 + 1).scale_ln(l0).rescaled(scale);
        let bz = Complex64::new(model.b_scaled(n, scale - b.f(n as i64).ln_abs)?, 0.0)
            - b.z * (b.f(n as i64).ln_abs - scale).exp();
        let t2 = bz * b.f(n as i64).unit;
        worst = worst.max((t1 + t2 + t3).norm());
    }
    Ok(worst)
}

/// Max over interior `n` of the residual of
/// `k_n zeta_n (u_{n+1} - u_n) - zeta_{n-1}^{-1}(u_n - u_{n-1}) + r_n u_n = 0`
/// relative to the sum of the moduli of its terms.
pub fn difference_residual(b: &JostBundle) -> f64 {
    let mut worst = 0.0f64;
    for n in 1..=b.n_store {
        let (p, s) = (&b.table.steps[n - 1], &b.table.steps[n]);
        let t1 = s.k * s.zeta * b.du[n + 1];
        let t2 = -p.zeta.inv() * b.du[n];
        let t3 = b.r[n] * b.u[n];
        let scale = t1.norm() + t2.norm() + t3.norm();
        if scale > 0.0 {
            worst = worst.max((t1 + t2 + t3).norm() / scale);
        }
    }
    worst
}

/// Same residual for a sweep run with an arbitrary kernel sign.
pub fn difference_residual_with_sign(src: &impl StepSource, n_trunc: usize, sign: f64) -> Result<f64> {
    let n_store = n_trunc - 1;
    let sw = sweep(src, n_trunc, n_store, sign)?;
    let steps = collect_steps(src, 0, n_store + 1)?;
    let mut worst = 0.0f64;
    for n in 1..=n_store {
        let t1 = steps[n].k * steps[n].zeta * sw.du[n + 1];
        let t2 = -steps[n - 1].zeta.inv() * sw.du[n];
        let t3 = sw.r[n] * sw.u[n];
        let scale = t1.norm() + t2.norm() + t3.norm();
        if scale > 0.0 {
            worst = worst.max((t1 + t2 + t3).norm() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::ansatz_table;
    use crate::coefficients::{classify, Diagonal, OffDiagonal};

    #[test]
    fn kernel_first_entry_is_minus_zeta() {
        let m = CoefficientModel::geometric_beta(-1.1);
        let r = classify(&m, 32, 1e-6).unwrap();
        let t = ansatz_table(&m, &r, 20).unwrap();
        for n in 0..19 {
            assert!((kernel_g(&t, n, n + 1) + t.steps[n].zeta).norm() < 1e-15);
        }
        let m = CoefficientModel::n_squared();
        let r = classify(&m, 32, 1e-6).unwrap();
        let t = ansatz_table(&m, &r, 20).unwrap();
        assert!((kernel_g(&t, 3, 4) + t.steps[3].zeta).norm() < 1e-15);
    }

    #[test]
    fn homogeneous_tail_gives_unit_u() {
        let m = CoefficientModel::geometric_beta(2.0);
        let r = classify(&m, 32, 1e-6).unwrap();
        let b = solve_u(&m, &r, Complex64::new(0.0, 0.0), &SolveOptions::new(50, Some(200), 1e-10)).unwrap();
        for u in &b.u {
            assert!((u - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn sweep_matches_dense_kernel_solve() {
        let cases = [
            CoefficientModel::n_squared(),
            CoefficientModel::geometric_beta(-1.1),
            CoefficientModel::family(
                "pb",
                OffDiagonal::Power { gamma: 1.0, p: 3.0, shift: 1.0 },
                Diagonal::Power { delta: 0.5, q: 3.0 },
            )
            .unwrap(),
        ];
        let z = Complex64::new(0.7, 0.4);
        for m in &cases {
            let r = classify(m, 32, 1e-6).unwrap();
            let n = 120;
            let src = AnsatzRows::new(m, &r, z);
            let t = AnsatzTable::from_source(&src, n + 1).unwrap();
            let dense = dense_reference(&t, KERNEL_SIGN);
            let sw = sweep(&src, n, n - 1, KERNEL_SIGN).unwrap();
            for j in 0..n {
                assert!((dense[j] - sw.u[j]).norm() < 1e-12 * dense[j].norm(), "{} {j}", m.name);
            }
            let flipped = dense_reference(&t, -KERNEL_SIGN);
            let swf = sweep(&src, n, n - 1, -KERNEL_SIGN).unwrap();
            assert!((flipped[0] - swf.u[0]).norm() < 1e-12 * flipped[0].norm());
        }
    }

    #[test]
    fn flipped_sign_breaks_difference_equation() {
        let m = CoefficientModel::n_squared();
        let r = classify(&m, 32, 1e-6).unwrap();
        let src = AnsatzRows::new(&m, &r, Complex64::new(1.0, 1.0));
        let good = difference_residual_with_sign(&src, 400, KERNEL_SIGN).unwrap();
        assert!(good < 1e-12, "{good}");
        assert!(difference_residual_with_sign(&src, 400, -KERNEL_SIGN).unwrap() > 1e-3);
    }

    #[test]
    fn successive_approximations_converge_to_sweep() {
        let m = CoefficientModel::n_squared();
        let r = classify(&m, 32, 1e-6).unwrap();
        let src = AnsatzRows::new(&m, &r, Complex64::new(1.0, 0.5));
        let t = AnsatzTable::from_source(&src, 61).unwrap();
        let st = successive_approximations(&t, 30);
        let sw = sweep(&src, 60, 59, KERNEL_SIGN).unwrap();
        assert!((st.u[0] - sw.u[0]).norm() < 1e-12);
        assert!(st.sup_norms.iter().zip(&st.factorial_bound).all(|(s, b)| *s <= b * (1.0 + 1e-9)));
    }
}

//! Eigenvalues as zeros of the Jost function, resolvent entries, point masses,
//! and a finite-section Sturm-bisection oracle.

use crate::carleman::{carleman_jost, omega_of};
use crate::coefficients::{check_essential_selfadjointness, classify, CoefficientModel, Regime, RegimeKind, Verdict};
use crate::error::{JacobiError, Result};
use crate::logscaled::LogComplex;
use crate::solutions::{first_kind, growing_g, wronskian, SolutionSeq};
use crate::volterra::{solve_u, JostBundle, SolveOptions};
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::LN_2;

type Big = FBig<HalfEven, 2>;

/// Jost solution for any supported regime.
pub fn jost_bundle(model: &CoefficientModel, regime: &Regime, z: Complex64, opts: &SolveOptions) -> Result<JostBundle> {
    match regime.kind {
        RegimeKind::CarlemanSub | RegimeKind::CarlemanSuper => carleman_jost(model, regime, z, opts),
        _ => solve_u(model, regime, z, opts),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JostFunctionValue {
    pub z: Complex64,
    /// `-f_{-1}/2`.
    pub omega: Complex64,
    /// `a_0 f_1 - (z - b_0) f_0`.
    pub omega_wronskian: Complex64,
    pub gap: f64,
    /// Relative accuracy claimed for `omega`.
    pub certificate: f64,
    /// `ln` of the magnitude of the terms that cancel in `f_{-1}`.
    pub ln_envelope: f64,
}

impl JostFunctionValue {
    /// `omega` divided by its envelope.
    pub fn normalized(&self) -> Complex64 {
        self.omega * (-self.ln_envelope).exp()
    }
}

fn jost_value(model: &CoefficientModel, b: &JostBundle) -> Result<JostFunctionValue> {
    let z = b.z;
    let omega = omega_of(b);
    let la0 = model.ln_a(0)?;
    let b0 = model.eval_b(0)?;
    let t1 = b.f(1).scale_ln(la0);
    let t2 = b.f(0) * LogComplex::from_complex(z - b0);
    let omega_wronskian = t1.sub(t2).to_complex();
    let ln_envelope = t1.ln_abs.max(t2.ln_abs).max(b.f(-1).ln_abs - LN_2);
    let eps = f64::EPSILON * (b.cancellation_bits * LN_2).exp();
    let certificate = b.certificate.estimate + 8.0 * eps;
    let gap = (omega - omega_wronskian).norm() * (-ln_envelope).exp();
    Ok(JostFunctionValue { z, omega, omega_wronskian, gap, certificate, ln_envelope })
}

pub fn jost_function(model: &CoefficientModel, regime: &Regime, z: Complex64, opts: &SolveOptions) -> Result<JostFunctionValue> {
    let o = SolveOptions { n_store: opts.n_store.max(2), ..opts.clone() };
    jost_value(model, &jost_bundle(model, regime, z, &o)?)
}

/// `omega(z) = {P, g}` with `g` the growing solution normalized by `{f, g} = 1`.
pub fn companion_omega(model: &CoefficientModel, b: &JostBundle) -> Result<Complex64> {
    let n_max = b.max_index().min(64);
    let (g, _) = growing_g(model, b, n_max)?;
    let p = first_kind(model, b.z, n_max)?;
    wronskian(model, &p, &g, 0)
}

#[derive(Clone, Debug, Serialize)]
pub struct Root {
    pub lambda: f64,
    pub bracket: (f64, f64),
    /// `|Omega| / envelope` at the root.
    pub omega_normalized: f64,
    /// `|(b_0 - lambda) f_0 + a_0 f_1|` relative to its terms.
    pub boundary_residual: f64,
    /// `|{P, g}| / |{P, f}|` at the root.
    pub companion_ratio: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenScan {
    pub interval: (f64, f64),
    pub grid_step: f64,
    pub roots: Vec<Root>,
    pub verdict: Verdict,
    /// Set when the operator has deficiency indices (1,1): the numbers depend
    /// on a self-adjoint extension this machinery does not select.
    pub extension_dependent: bool,
    pub warnings: Vec<String>,
    /// Smallest normalized `|Omega|` on the scan grid away from the roots.
    pub min_gap_normalized: f64,
}

fn real_omega(model: &CoefficientModel, regime: &Regime, lambda: f64, opts: &SolveOptions) -> Result<JostFunctionValue> {
    jost_function(model, regime, Complex64::new(lambda, 0.0), opts)
}

/// Zeros of `Omega` on `[lo, hi]`: sign changes of the normalized real part on a
/// grid, refined by bisection mixed with secant steps.
pub fn find_eigenvalues(
    model: &CoefficientModel,
    regime: &Regime,
    verdict: Verdict,
    interval: (f64, f64),
    grid_step: f64,
    tol: f64,
    opts: &SolveOptions,
) -> Result<EigenScan> {
    let (lo, hi) = interval;
    if !(hi > lo) || !(grid_step > 0.0) {
        return Err(JacobiError::Invalid("scan needs lo < hi and a positive step".into()));
    }
    if !matches!(regime.kind, RegimeKind::SuperCritical | RegimeKind::CarlemanSuper) {
        return Err(JacobiError::RegimeMismatch("eigenvalue scan needs a supercritical regime".into()));
    }
    let mut warnings = Vec::new();
    let extension_dependent = verdict == Verdict::DeficiencyOneOne;
    if extension_dependent {
        warnings.push("deficiency indices (1,1): roots are extension-dependent and not eigenvalues of a fixed operator".into());
    } else if verdict == Verdict::Unknown {
        warnings.push("essential self-adjointness not established".into());
    }
    let n = ((hi - lo) / grid_step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * grid_step).min(hi)).collect();
    let vals: Result<Vec<JostFunctionValue>> = grid.par_iter().map(|&x| real_omega(model, regime, x, opts)).collect();
    let vals = vals?;
    let sgn: Vec<f64> = vals.iter().map(|v| v.omega.re).collect();
    let mut brackets = Vec::new();
    for i in 0..n {
        if sgn[i] == 0.0 {
            brackets.push((grid[i], grid[i]));
        } else if sgn[i] * sgn[i + 1] < 0.0 {
            brackets.push((grid[i], grid[i + 1]));
        }
    }
    let roots: Result<Vec<Root>> = brackets.par_iter().map(|&br| refine(model, regime, br, tol, opts)).collect();
    let roots = roots?;
    let mut min_gap = f64::INFINITY;
    for (x, v) in grid.iter().zip(&vals) {
        if roots.iter().all(|r| (r.lambda - x).abs() > grid_step) {
            min_gap = min_gap.min(v.normalized().norm());
        }
    }
    for v in &vals {
        let im = v.omega.im.abs() / v.omega.norm().max(f64::MIN_POSITIVE);
        if im > 1e-8 {
            warnings.push(format!("Omega({}) has relative imaginary part {im:e}", v.z.re));
            break;
        }
    }
    Ok(EigenScan { interval, grid_step, roots, verdict, extension_dependent, warnings, min_gap_normalized: min_gap })
}

fn refine(model: &CoefficientModel, regime: &Regime, bracket: (f64, f64), tol: f64, opts: &SolveOptions) -> Result<Root> {
    let eval = |x: f64| real_omega(model, regime, x, opts);
    let (mut a, mut b) = bracket;
    let mut fa = eval(a)?.omega.re;
    let mut fb = eval(b)?.omega.re;
    if fa == 0.0 {
        b = a;
    } else if fb == 0.0 {
        a = b;
    }
    let mut iterations = 0;
    let mut side = 0i32;
    let mut exact = None;
    while (b - a) > tol * a.abs().max(b.abs()).max(1.0) && iterations < 200 {
        iterations += 1;
        // Illinois regula falsi, with a bisection every eighth step
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) || iterations % 8 == 0 {
            x = 0.5 * (a + b);
        }
        let fx = eval(x)?.omega.re;
        if fx == 0.0 {
            exact = Some(x);
            break;
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let lambda = match exact {
        Some(x) => x,
        None if fa == 0.0 => a,
        None if fb == 0.0 => b,
        None => 0.5 * (a + b),
    };
    let o = SolveOptions { n_store: opts.n_store.max(64), ..opts.clone() };
    let fbun = jost_bundle(model, regime, Complex64::new(lambda, 0.0), &o)?;
    let jv = jost_value(model, &fbun)?;
    let t1 = fbun.f(0).scale_ln(0.0).to_complex() * (model.eval_b(0)? - lambda);
    let t2 = fbun.f(1).scale_ln(model.ln_a(0)?).to_complex();
    let boundary_residual = (t1 + t2).norm() / (t1.norm() + t2.norm());
    let companion = companion_omega(model, &fbun)?;
    let companion_ratio = companion.norm() / jv.omega.norm().max(f64::MIN_POSITIVE);
    Ok(Root {
        lambda,
        bracket,
        omega_normalized: jv.normalized().norm(),
        boundary_residual,
        companion_ratio,
        iterations,
    })
}

/// Entries of the symmetric tridiagonal `N x N` section as `(ln a_i, (sign b_i, ln |b_i|))`.
struct Section {
    ln_a: Vec<f64>,
    b: Vec<(f64, f64)>,
}

fn section(model: &CoefficientModel, n: usize) -> Result<Section> {
    let ln_a = (0..n.saturating_sub(1)).map(|i| model.ln_a(i as i64)).collect::<Result<Vec<_>>>()?;
    let b = (0..n).map(|i| model.b_parts(i)).collect::<Result<Vec<_>>>()?;
    Ok(Section { ln_a, b })
}

fn big_exp(sign: f64, ln_abs: f64, bits: usize) -> Big {
    if ln_abs == f64::NEG_INFINITY {
        return Big::ZERO;
    }
    let e = ln_abs / LN_2;
    let k = e.floor();
    let mant = sign * (e - k).exp2();
    let m = Big::try_from(mant).unwrap_or(Big::ZERO).with_precision(bits).value();
    m << (k as isize)
}

enum Counter {
    Double { a2: Vec<f64>, b: Vec<f64> },
    Multi { a2: Vec<Big>, b: Vec<Big>, bits: usize },
}

impl Counter {
    fn new(s: &Section, bits: usize) -> Counter {
        let max_ln = s.ln_a.iter().chain(s.b.iter().map(|v| &v.1)).fold(0.0f64, |m, &x| m.max(x));
        if bits <= 53 && max_ln < 300.0 {
            Counter::Double {
                a2: s.ln_a.iter().map(|&l| (2.0 * l).exp()).collect(),
                b: s.b.iter().map(|&(sg, l)| sg * l.exp()).collect(),
            }
        } else {
            let bits = bits.max(54);
            Counter::Multi {
                a2: s.ln_a.iter().map(|&l| big_exp(1.0, 2.0 * l, bits)).collect(),
                b: s.b.iter().map(|&(sg, l)| big_exp(sg, l, bits)).collect(),
                bits,
            }
        }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count(&self, x: f64) -> usize {
        match self {
            Counter::Double { a2, b } => {
                let mut c = 0;
                let mut q = 1.0f64;
                for i in 0..b.len() {
                    q = if i == 0 { b[0] - x } else { b[i] - x - a2[i - 1] / q };
                    if q == 0.0 {
                        q = -f64::EPSILON * (b[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
                    }
                    if q < 0.0 {
                        c += 1;
                    }
                }
                c
            }
            Counter::Multi { a2, b, bits } => {
                let xb = Big::try_from(x).unwrap_or(Big::ZERO).with_precision(*bits).value();
                let zero = Big::ZERO;
                let mut c = 0;
                let mut q = Big::ONE;
                for i in 0..b.len() {
                    q = if i == 0 { &b[0] - &xb } else { &b[i] - &xb - &a2[i - 1] / &q };
                    if q == zero {
                        let tiny = (Big::ONE.with_precision(*bits).value()) >> (*bits as isize + 64);
                        q = -tiny;
                    }
                    if q < zero {
                        c += 1;
                    }
                }
                c
            }
        }
    }
}

fn gershgorin_low(s: &Section) -> f64 {
    let n = s.b.len();
    let mut lo = f64::INFINITY;
    for i in 0..n {
        let off = if i > 0 { s.ln_a[i - 1].exp() } else { 0.0 } + if i + 1 < n { s.ln_a[i].exp() } else { 0.0 };
        lo = lo.min(s.b[i].0 * s.b[i].1.exp() - off);
    }
    if lo.is_finite() {
        lo - 1.0
    } else {
        -f64::MAX
    }
}

/// `k`-th (0-based) eigenvalue by bisection on the Sturm count.
fn kth(counter: &Counter, k: usize, start: f64) -> Result<f64> {
    let mut lo = start;
    let mut c_lo = counter.count(lo);
    if c_lo > k {
        return Err(JacobiError::Precision(format!("{c_lo} eigenvalues below the lower bound")));
    }
    let mut step = 1.0f64.max(lo.abs());
    let mut hi = lo + step;
    let mut c_hi = counter.count(hi);
    while c_hi <= k {
        lo = hi;
        c_lo = c_hi;
        step *= 2.0;
        hi = lo + step;
        if !hi.is_finite() {
            return Err(JacobiError::Overflow(k as i64));
        }
        c_hi = counter.count(hi);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = counter.count(mid);
        if c < c_lo || c > c_hi {
            return Err(JacobiError::Precision(format!("non-monotone Sturm count near {mid}: {c_lo} <= {c} <= {c_hi} fails")));
        }
        if c > k {
            hi = mid;
            c_hi = c;
        } else {
            lo = mid;
            c_lo = c;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bits the Sturm recurrence is given by default: `log2(a_N) + 64`.
pub fn default_bits(model: &CoefficientModel, n: usize) -> Result<usize> {
    Ok(((model.ln_a(n as i64)? / LN_2).max(0.0).ceil() as usize) + 64)
}

/// Lowest `how_many` eigenvalues of the `N x N` section. `bits <= 53` runs the
/// count in `f64` when the entries fit; `None` uses [`default_bits`].
pub fn finite_section_eigs(model: &CoefficientModel, n: usize, how_many: usize, bits: Option<usize>) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(JacobiError::Invalid("finite section needs N >= 1".into()));
    }
    let s = section(model, n)?;
    let bits = match bits {
        Some(b) => b,
        None => default_bits(model, n)?,
    };
    let counter = Counter::new(&s, bits);
    let start = gershgorin_low(&s);
    (0..how_many.min(n)).into_par_iter().map(|k| kth(&counter, k, start)).collect()
}

/// Eigenvalues of the `N x N` section inside `[lo, hi]`.
pub fn finite_section_eigs_in(model: &CoefficientModel, n: usize, lo: f64, hi: f64, bits: Option<usize>) -> Result<Vec<f64>> {
    let s = section(model, n)?;
    let bits = match bits {
        Some(b) => b,
        None => default_bits(model, n)?,
    };
    let counter = Counter::new(&s, bits);
    let (c_lo, c_hi) = (counter.count(lo), counter.count(hi));
    if c_hi < c_lo {
        return Err(JacobiError::Precision("Sturm count decreases across the window".into()));
    }
    (c_lo..c_hi).into_par_iter().map(|k| kth(&counter, k, lo)).collect()
}

/// Weights of `e_0` in the eigenbasis of the section: `1 / sum_{n < N} P_n(lambda)^2`.
pub fn finite_section_weights(model: &CoefficientModel, n: usize, eigs: &[f64]) -> Result<Vec<f64>> {
    eigs.par_iter()
        .map(|&x| {
            let p = first_kind(model, Complex64::new(x, 0.0), n as i64)?;
            let terms: Vec<f64> = (0..n as i64).map(|j| 2.0 * p.get(j).ln_abs).collect();
            Ok((-crate::coefficients::log_sum_exp(&terms)).exp())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct StableSection {
    pub n: usize,
    pub eigs: Vec<f64>,
    /// Largest relative change against the section 20 rows smaller.
    pub change: f64,
}

/// Grows `N` by 20 from `n_start` until the lowest `how_many` eigenvalues move
/// by less than `rel * max(1, |lambda|)`.
pub fn stable_finite_section(
    model: &CoefficientModel,
    how_many: usize,
    n_start: usize,
    rel: f64,
    bits: Option<usize>,
) -> Result<StableSection> {
    let mut n = n_start.max(how_many + 1);
    let mut prev = finite_section_eigs(model, n, how_many, bits)?;
    for _ in 0..50 {
        let next = finite_section_eigs(model, n + 20, how_many, bits)?;
        let change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
        if change < rel {
            return Ok(StableSection { n: n + 20, eigs: next, change });
        }
        n += 20;
        prev = next;
    }
    Err(JacobiError::NotConverged { certificate: f64::NAN, limit: rel })
}

/// `((J - z)^{-1} e_n, e_m) = P_min(z) f_max(z) / Omega(z)`.
pub fn resolvent_entry(
    model: &CoefficientModel,
    regime: &Regime,
    verdict: Verdict,
    z: Complex64,
    n: usize,
    m: usize,
    opts: &SolveOptions,
) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(JacobiError::Invalid("resolvent needs Im z != 0".into()));
    }
    if verdict != Verdict::EssentiallySelfAdjoint {
        return Err(JacobiError::RegimeMismatch("resolvent formula needs an essentially self-adjoint operator".into()));
    }
    let (lo, hi) = (n.min(m), n.max(m));
    let o = SolveOptions { n_store: opts.n_store.max(hi + 1), ..opts.clone() };
    let b = jost_bundle(model, regime, z, &o)?;
    let jv = jost_value(model, &b)?;
    if jv.normalized().norm() < opts.tol {
        return Err(JacobiError::PoleAtZ(jv.omega.norm()));
    }
    let p = first_kind(model, z, hi as i64 + 1)?;
    Ok((p.get(lo as i64) * b.f(hi as i64) / LogComplex::from_complex(jv.omega)).to_complex())
}

/// Column `(J - z)^{-1} e_m` on `0..=n_max`.
pub fn resolvent_column(
    model: &CoefficientModel,
    regime: &Regime,
    verdict: Verdict,
    z: Complex64,
    m: usize,
    n_max: usize,
    opts: &SolveOptions,
) -> Result<Vec<Complex64>> {
    if verdict != Verdict::EssentiallySelfAdjoint || z.im == 0.0 {
        return Err(JacobiError::RegimeMismatch("resolvent formula needs Im z != 0 and essential self-adjointness".into()));
    }
    let o = SolveOptions { n_store: opts.n_store.max(n_max.max(m) + 1), ..opts.clone() };
    let b = jost_bundle(model, regime, z, &o)?;
    let omega = LogComplex::from_complex(jost_value(model, &b)?.omega);
    let p = first_kind(model, z, n_max.max(m) as i64 + 1)?;
    Ok((0..=n_max)
        .map(|n| {
            let (lo, hi) = (n.min(m) as i64, n.max(m) as i64);
            (p.get(lo) * b.f(hi) / omega).to_complex()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassPair {
    pub lambda: f64,
    /// `1 / sum P_n^2`.
    pub series: f64,
    /// `2 f_0 / (d/dlambda) f_{-1}` with a central difference.
    pub jost: f64,
    /// Same with the five-point stencil.
    pub jost_five_point: f64,
    /// Index from which `(f_n / f_0)^2` replaces `P_n^2`.
    pub n_switch: usize,
    /// Estimate of the omitted terms beyond the series length.
    pub tail: f64,
    pub h: f64,
    pub rel_gap: f64,
}

/// Point mass at an eigenvalue by both formulas.
pub fn spectral_mass(
    model: &CoefficientModel,
    regime: &Regime,
    lambda: f64,
    n_series: usize,
    h: Option<f64>,
    opts: &SolveOptions,
) -> Result<MassPair> {
    let z = Complex64::new(lambda, 0.0);
    let o = SolveOptions { n_store: opts.n_store.max(n_series + 1), ..opts.clone() };
    let b = jost_bundle(model, regime, z, &o)?;
    let fixed = SolveOptions { n_trunc: Some(b.n_trunc), n_store: 2, ..opts.clone() };
    let p = first_kind(model, z, n_series as i64)?;
    let f0 = b.f(0);
    let mut n_switch = n_series;
    for n in 0..n_series as i64 {
        let ratio = (b.f(n) / f0).to_complex();
        if (p.value(n) - ratio).norm() > 1e-8 * ratio.norm() {
            n_switch = n as usize;
            break;
        }
    }
    let mut terms = Vec::with_capacity(n_series);
    for n in 0..n_series as i64 {
        let v = if (n as usize) < n_switch { p.get(n) } else { b.f(n) / f0 };
        terms.push(2.0 * v.ln_abs);
    }
    let last = terms[n_series - 1];
    let prev = terms[n_series - 2];
    let ratio = (last - prev).exp();
    let tail = if ratio < 1.0 { last.exp() * ratio / (1.0 - ratio) } else { f64::INFINITY };
    let series = (-crate::coefficients::log_sum_exp(&terms)).exp();
    let h = h.unwrap_or(f64::EPSILON.cbrt() * lambda.abs().max(1.0));
    let fm1 = |x: f64| -> Result<LogComplex> { Ok(jost_bundle(model, regime, Complex64::new(x, 0.0), &fixed)?.f(-1)) };
    let vals: Result<Vec<LogComplex>> =
        [-2.0, -1.0, 1.0, 2.0].par_iter().map(|&s| fm1(lambda + s * h)).collect();
    let v = vals?;
    let ln_ref = v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.ln_abs));
    let r: Vec<f64> = v.iter().map(|x| x.rescaled(ln_ref).re).collect();
    let d2 = (r[2] - r[1]) / (2.0 * h);
    let d4 = (-r[3] + 8.0 * r[2] - 8.0 * r[1] + r[0]) / (12.0 * h);
    let f0r = f0.rescaled(ln_ref).re;
    let jost = 2.0 * f0r / d2;
    let jost_five_point = 2.0 * f0r / d4;
    let rel_gap = (series - jost).abs() / series;
    Ok(MassPair { lambda, series, jost, jost_five_point, n_switch, tail, h, rel_gap })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleData {
    pub n: usize,
    pub eigs: Vec<f64>,
    /// For each root, distance to the nearest oracle eigenvalue.
    pub gaps: Vec<f64>,
    /// Oracle eigenvalues in the window with no root within the tolerance.
    pub unmatched: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub model: String,
    pub interval: (f64, f64),
    pub eigenvalues: Vec<f64>,
    pub masses: Vec<MassPair>,
    pub mass_total_series: f64,
    pub oracle: OracleData,
    pub verdict: Verdict,
    pub extension_dependent: bool,
    pub warnings: Vec<String>,
    pub scan: EigenScan,
}

#[derive(Clone, Debug)]
pub struct SpectralOptions {
    pub interval: (f64, f64),
    pub grid_step: f64,
    pub root_tol: f64,
    pub n_series: usize,
    pub oracle_start: usize,
    pub oracle_bits: Option<usize>,
    pub match_tol: f64,
    pub solve: SolveOptions,
}

/// Scan, masses and oracle comparison in one pass.
pub fn spectral_report(model: &CoefficientModel, so: &SpectralOptions) -> Result<SpectralReport> {
    let regime = classify(model, 64, 1e-6)?;
    let sa = check_essential_selfadjointness(model, &regime, 200)?;
    let scan = find_eigenvalues(model, &regime, sa.verdict, so.interval, so.grid_step, so.root_tol, &so.solve)?;
    let eigenvalues: Vec<f64> = scan.roots.iter().map(|r| r.lambda).collect();
    let masses: Result<Vec<MassPair>> =
        eigenvalues.iter().map(|&l| spectral_mass(model, &regime, l, so.n_series, None, &so.solve)).collect();
    let masses = masses?;
    let mass_total_series = masses.iter().map(|m| m.series).sum();
    let how_many = finite_section_count(model, so)?;
    let stable = stable_finite_section(model, how_many.max(1), so.oracle_start, 1e-8, so.oracle_bits)?;
    let (lo, hi) = so.interval;
    let inside: Vec<f64> = stable.eigs.iter().copied().filter(|&e| e >= lo && e <= hi).collect();
    let gaps = eigenvalues
        .iter()
        .map(|&l| inside.iter().map(|e| (e - l).abs()).fold(f64::INFINITY, f64::min))
        .collect();
    let unmatched = inside
        .iter()
        .copied()
        .filter(|e| eigenvalues.iter().all(|l| (e - l).abs() > so.match_tol * e.abs().max(1.0)))
        .collect();
    let mut warnings = scan.warnings.clone();
    if regime.beta_inf < -1.0 {
        if let (Some(&first), Some(&ground)) = (eigenvalues.first(), stable.eigs.first()) {
            if first < ground - so.match_tol * ground.abs().max(1.0) {
                warnings.push(format!("root {first} lies below the finite-section ground state {ground}"));
            }
        }
    }
    Ok(SpectralReport {
        model: model.name.clone(),
        interval: so.interval,
        eigenvalues,
        masses,
        mass_total_series,
        oracle: OracleData { n: stable.n, eigs: inside, gaps, unmatched },
        verdict: sa.verdict,
        extension_dependent: scan.extension_dependent,
        warnings,
        scan,
    })
}

fn finite_section_count(model: &CoefficientModel, so: &SpectralOptions) -> Result<usize> {
    let s = section(model, so.oracle_start)?;
    let bits = match so.oracle_bits {
        Some(b) => b,
        None => default_bits(model, so.oracle_start)?,
    };
    Ok(Counter::new(&s, bits).count(so.interval.1))
}

/// `f`, `P` and `Omega` together at one point, for reports.
pub fn jost_and_poly(model: &CoefficientModel, regime: &Regime, z: Complex64, n_max: usize, opts: &SolveOptions) -> Result<(JostBundle, SolutionSeq)> {
    let o = SolveOptions { n_store: opts.n_store.max(n_max + 1), ..opts.clone() };
    let b = jost_bundle(model, regime, z, &o)?;
    let p = first_kind(model, z, n_max as i64 + 1)?;
    Ok((b, p))
}

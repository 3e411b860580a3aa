//! Solutions of the three-term recurrence, Wronskians and asymptotic coefficients.

use crate::coefficients::{CoefficientModel, Regime, RegimeKind};
use crate::error::{JacobiError, Result};
use crate::logscaled::LogComplex;
use crate::volterra::{JostBundle, SolveOptions};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolutionKind {
    FirstKindP,
    SecondKindP,
    JostF,
    ConjJost,
    GrowingG,
    Custom,
}

/// A solution on `n = -1..=N`, stored log-scaled and unrescaled.
#[derive(Clone, Debug)]
pub struct SolutionSeq {
    pub kind: SolutionKind,
    pub z: Complex64,
    values: Vec<LogComplex>,
}

impl SolutionSeq {
    pub fn new(kind: SolutionKind, z: Complex64, values: Vec<LogComplex>) -> Self {
        SolutionSeq { kind, z, values }
    }

    pub fn get(&self, n: i64) -> LogComplex {
        self.values[(n + 1) as usize]
    }

    pub fn value(&self, n: i64) -> Complex64 {
        self.get(n).to_complex()
    }

    pub fn max_index(&self) -> i64 {
        self.values.len() as i64 - 2
    }

    pub fn values(&self) -> &[LogComplex] {
        &self.values
    }

    pub fn from_jost(b: &JostBundle) -> Self {
        let kind = if b.conjugated { SolutionKind::ConjJost } else { SolutionKind::JostF };
        SolutionSeq { kind, z: b.z, values: b.f_values().to_vec() }
    }

    pub fn truncated(&self, n: i64) -> Self {
        let mut s = self.clone();
        s.values.truncate((n + 2) as usize);
        s
    }

    /// `sqrt(a_n) F_n`.
    pub fn rescaled(&self, model: &CoefficientModel, n: i64) -> Result<Complex64> {
        Ok(self.get(n).scale_ln(0.5 * model.ln_a(n)?).to_complex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

fn coeff_logs(model: &CoefficientModel, z: Complex64, n: usize, ln_div: f64) -> Result<LogComplex> {
    // (z - b_n) / exp(ln_div)
    let zt = LogComplex::from_complex(z).scale_ln(-ln_div);
    let (s, lb) = model.b_parts(n)?;
    let bt = LogComplex::from_polar(lb - ln_div, if s < 0.0 { std::f64::consts::PI } else { 0.0 });
    Ok(if lb == f64::NEG_INFINITY { zt } else { zt.sub(bt) })
}

/// Forward step: `F_{n+1}` from `F_{n-1}, F_n`.
pub fn step_forward(model: &CoefficientModel, z: Complex64, n: usize, fm: LogComplex, f0: LogComplex) -> Result<LogComplex> {
    let la = model.ln_a(n as i64)?;
    let lp = model.ln_a(n as i64 - 1)?;
    let c1 = coeff_logs(model, z, n, la)?;
    Ok((f0 * c1).sub(fm.scale_ln(lp - la)))
}

/// Backward step: `F_{n-1}` from `F_n, F_{n+1}`.
pub fn step_backward(model: &CoefficientModel, z: Complex64, n: usize, f0: LogComplex, fp: LogComplex) -> Result<LogComplex> {
    let la = model.ln_a(n as i64)?;
    let lp = model.ln_a(n as i64 - 1)?;
    let c1 = coeff_logs(model, z, n, lp)?;
    Ok((f0 * c1).sub(fp.scale_ln(la - lp)))
}

/// Propagates seeds `(F_{n0-1}, F_{n0})` over `-1..=n_max` (both directions from the seed).
pub fn recurrence_solve(
    model: &CoefficientModel,
    z: Complex64,
    n0: i64,
    seed_prev: LogComplex,
    seed: LogComplex,
    n_max: i64,
    kind: SolutionKind,
) -> Result<SolutionSeq> {
    if seed_prev.is_zero() && seed.is_zero() {
        return Err(JacobiError::Invalid("seeds are both zero".into()));
    }
    if n0 < 0 || n0 > n_max {
        return Err(JacobiError::Invalid(format!("seed index {n0} outside 0..={n_max}")));
    }
    let mut v = vec![LogComplex::ZERO; (n_max + 2) as usize];
    v[n0 as usize] = seed_prev;
    v[(n0 + 1) as usize] = seed;
    for n in n0..n_max {
        let next = step_forward(model, z, n as usize, v[n as usize], v[(n + 1) as usize])?;
        if !next.ln_abs.is_finite() && !next.is_zero() {
            return Err(JacobiError::Overflow(n + 1));
        }
        v[(n + 2) as usize] = next;
    }
    for n in (0..n0).rev() {
        // F_{n-1} from F_n, F_{n+1}; index of F_m is m + 1
        let prev = step_backward(model, z, n as usize, v[(n + 1) as usize], v[(n + 2) as usize])?;
        v[n as usize] = prev;
    }
    Ok(SolutionSeq { kind, z, values: v })
}

pub fn propagate(
    model: &CoefficientModel,
    z: Complex64,
    n0: i64,
    seed_prev: LogComplex,
    seed: LogComplex,
    n_max: i64,
    direction: Direction,
) -> Result<SolutionSeq> {
    match direction {
        Direction::Forward => recurrence_solve(model, z, n0, seed_prev, seed, n_max, SolutionKind::Custom),
        Direction::Backward => {
            // seeds are (F_{n0}, F_{n0+1}); fill downwards to -1
            let mut v = vec![LogComplex::ZERO; (n0 + 3) as usize];
            v[(n0 + 1) as usize] = seed_prev;
            v[(n0 + 2) as usize] = seed;
            for n in (0..=n0).rev() {
                v[n as usize] = step_backward(model, z, n as usize, v[(n + 1) as usize], v[(n + 2) as usize])?;
            }
            let _ = n_max;
            Ok(SolutionSeq { kind: SolutionKind::Custom, z, values: v })
        }
    }
}

/// `P_n(z)`, `P_{-1} = 0`, `P_0 = 1`.
pub fn first_kind(model: &CoefficientModel, z: Complex64, n_max: i64) -> Result<SolutionSeq> {
    recurrence_solve(model, z, 0, LogComplex::ZERO, LogComplex::ONE, n_max, SolutionKind::FirstKindP)
}

/// `P~_n(z)`, `P~_0 = 0`, `P~_1 = 1/a_0`.
pub fn second_kind(model: &CoefficientModel, z: Complex64, n_max: i64) -> Result<SolutionSeq> {
    let s1 = LogComplex::ONE.scale_ln(-model.ln_a(0)?);
    recurrence_solve(model, z, 1, LogComplex::ZERO, s1, n_max, SolutionKind::SecondKindP)
}

/// `{F, G}` at index `n`, log-scaled.
pub fn wronskian_log(model: &CoefficientModel, f: &SolutionSeq, g: &SolutionSeq, n: i64) -> Result<LogComplex> {
    let t = (f.get(n) * g.get(n + 1)).sub(f.get(n + 1) * g.get(n));
    Ok(t.scale_ln(model.ln_a(n)?))
}

pub fn wronskian(model: &CoefficientModel, f: &SolutionSeq, g: &SolutionSeq, n: i64) -> Result<Complex64> {
    Ok(wronskian_log(model, f, g, n)?.to_complex())
}

/// `max_n |W_n - W_{-1}|` over `0..n_max`, relative to the larger of `|W_{-1}|` and
/// `a_n (|F_n G_{n+1}| + |F_{n+1} G_n|)`.
pub fn wronskian_constancy(model: &CoefficientModel, f: &SolutionSeq, g: &SolutionSeq, n_max: i64) -> Result<f64> {
    let w0 = wronskian_log(model, f, g, -1)?;
    let mut worst = 0.0f64;
    for n in 0..n_max {
        let w = wronskian_log(model, f, g, n)?;
        let la = model.ln_a(n)?;
        let terms = (f.get(n) * g.get(n + 1)).ln_abs.max((f.get(n + 1) * g.get(n)).ln_abs) + la;
        let scale = w0.ln_abs.max(terms);
        worst = worst.max(w.sub(w0).ln_abs.exp_scaled(scale));
    }
    Ok(worst)
}

trait ExpScaled {
    fn exp_scaled(self, scale: f64) -> f64;
}

impl ExpScaled for f64 {
    fn exp_scaled(self, scale: f64) -> f64 {
        (self - scale).exp()
    }
}

/// `g_n = f_n sum_{m=n0}^n (a_{m-1} f_{m-1} f_m)^{-1}` on `-1..=n_max`, extended
/// below `n0` by backward recurrence.
pub fn growing_g(model: &CoefficientModel, jost: &JostBundle, n_max: i64) -> Result<(SolutionSeq, i64)> {
    if n_max > jost.max_index() {
        return Err(JacobiError::Invalid(format!("g needs f up to {n_max}")));
    }
    let last_small = (0..=n_max).rev().find(|&m| jost.u[m as usize].norm() < 0.5);
    let mut n0 = last_small.map_or(0, |m| m + 1);
    for attempt in 0..2 {
        match build_g(model, jost, n0, n_max) {
            Ok(v) => return Ok((SolutionSeq { kind: SolutionKind::GrowingG, z: jost.z, values: v }, n0)),
            Err(JacobiError::ZeroCrossing(m)) if attempt == 0 => n0 = m as i64 + 1,
            Err(e) => return Err(e),
        }
    }
    Err(JacobiError::ZeroCrossing(n0 as usize))
}

fn build_g(model: &CoefficientModel, jost: &JostBundle, n0: i64, n_max: i64) -> Result<Vec<LogComplex>> {
    if n0 + 1 > n_max {
        return Err(JacobiError::Invalid("n0 too close to the end of the stored range".into()));
    }
    let mut v = vec![LogComplex::ZERO; (n_max + 2) as usize];
    let mut s = LogComplex::ZERO;
    for m in n0..=n_max {
        let (fp, f0) = (jost.f(m - 1), jost.f(m));
        if fp.is_zero() || f0.is_zero() {
            return Err(JacobiError::ZeroCrossing(m.max(0) as usize));
        }
        s = s.add((fp * f0).scale_ln(model.ln_a(m - 1)?).recip());
        v[(m + 1) as usize] = f0 * s;
    }
    for j in (-1..n0).rev() {
        // g_j from g_{j+1}, g_{j+2}
        v[(j + 1) as usize] = step_backward(model, jost.z, (j + 1) as usize, v[(j + 2) as usize], v[(j + 3) as usize])?;
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub n_star: i64,
    pub k_plus: Option<Complex64>,
    pub k_minus: Option<Complex64>,
    /// `|k_+|`.
    pub kappa: Option<f64>,
    /// `arg k_+`.
    pub eta: Option<f64>,
    /// Limit of `sqrt(a_n) e^{-vartheta-phase} (sgn beta_inf)^n F_n` (supercritical).
    pub k_super: Option<Complex64>,
    /// `{F, f}`.
    pub w_f: Complex64,
    /// Measured `{f, f~}` (subcritical).
    pub w_ff: Option<Complex64>,
}

fn fit_index(jost: &JostBundle, n_max: i64) -> i64 {
    let rb = jost.certificate.r_beyond;
    let hi = (n_max - 9).max(0);
    (0..=hi).find(|&n| jost.r_after[n as usize] + rb < 1e-3).unwrap_or(hi / 2)
}

fn averaged_wronskian(model: &CoefficientModel, f: &SolutionSeq, g: &SolutionSeq, n: i64) -> Result<Complex64> {
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..8 {
        s += wronskian(model, f, g, n + j)?;
    }
    Ok(s / 8.0)
}

/// Subcritical coefficients `k_+ = kappa_inf {F, f~} / (2i sqrt(1 - beta^2))`,
/// `k_- = -kappa_inf {F, f} / (2i sqrt(1 - beta^2))`.
pub fn fit_k_coeffs(
    model: &CoefficientModel,
    regime: &Regime,
    f_seq: &SolutionSeq,
    jost: &JostBundle,
    conj: &JostBundle,
) -> Result<AsymptoticFit> {
    if !regime.sub() {
        return Err(JacobiError::RegimeMismatch("k_+/k_- fit needs a subcritical regime".into()));
    }
    let fj = SolutionSeq::from_jost(jost);
    let fc = SolutionSeq::from_jost(conj);
    let n_max = f_seq.max_index().min(jost.max_index()).min(conj.max_index()) - 1;
    let n_star = fit_index(jost, n_max);
    let root = regime.root();
    let i2 = Complex64::new(0.0, 2.0 * root);
    let expected = Complex64::new(0.0, 2.0 * root / regime.kappa_inf);
    let w_ff = averaged_wronskian(model, &fj, &fc, n_star)?;
    if ((w_ff - expected).norm() / expected.norm()) > 0.1 {
        return Err(JacobiError::DegenerateWronskian {
            measured: format!("{w_ff}"),
            expected: format!("{expected}"),
        });
    }
    let w_fc = averaged_wronskian(model, f_seq, &fc, n_star)?;
    let w_f = averaged_wronskian(model, f_seq, &fj, n_star)?;
    let kp = regime.kappa_inf * w_fc / i2;
    let km = -regime.kappa_inf * w_f / i2;
    Ok(AsymptoticFit {
        n_star,
        k_plus: Some(kp),
        k_minus: Some(km),
        kappa: Some(kp.norm()),
        eta: Some(kp.arg()),
        k_super: None,
        w_f,
        w_ff: Some(w_ff),
    })
}

/// Supercritical leading coefficient from `{F, f}`.
pub fn fit_super(model: &CoefficientModel, regime: &Regime, f_seq: &SolutionSeq, jost: &JostBundle) -> Result<AsymptoticFit> {
    if regime.sub() {
        return Err(JacobiError::RegimeMismatch("supercritical fit on a subcritical regime".into()));
    }
    let fj = SolutionSeq::from_jost(jost);
    let n_max = f_seq.max_index().min(jost.max_index()) - 1;
    let n_star = fit_index(jost, n_max).min(8);
    let w_f = averaged_wronskian(model, f_seq, &fj, n_star)?;
    let s = regime.sign_inf();
    let kappa = if regime.carleman() { 1.0 } else { regime.kappa_inf };
    let k_super = -kappa * w_f * s / (2.0 * regime.root());
    Ok(AsymptoticFit {
        n_star,
        k_plus: None,
        k_minus: None,
        kappa: None,
        eta: None,
        k_super: Some(k_super),
        w_f,
        w_ff: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub window: (i64, i64),
    /// `(n, |rescaled F_n - model_n|)`.
    pub residuals: Vec<(i64, f64)>,
    pub max_residual: f64,
    /// `max residual_n / R_n` with `R_n = sum_{m > n} |r_m|` standing in for `eps_n`.
    pub fitted_c: f64,
}

/// Compares `sqrt(a_n) F_n` (with the supercritical phase removed, and on the
/// Carleman branch also `e^{sg z psi_n}`) against the fitted asymptotic model
/// on `window`.
pub fn verify_asymptotics(
    model: &CoefficientModel,
    regime: &Regime,
    f_seq: &SolutionSeq,
    fit: &AsymptoticFit,
    jost: &JostBundle,
    window: (i64, i64),
) -> Result<AsymptoticReport> {
    let (lo, hi) = window;
    let hi = hi.min(f_seq.max_index()).min(jost.max_index());
    let mut residuals = Vec::new();
    let mut fitted_c = 0.0f64;
    let s = regime.sign_inf();
    let psi = regime.carleman().then(|| crate::carleman::psi_values(&jost.table.steps));
    for n in lo..=hi {
        let ph = jost.table.phase[n as usize];
        let la = model.ln_a(n)?;
        let res = if regime.sub() {
            let (kp, km) = (fit.k_plus.unwrap(), fit.k_minus.unwrap());
            let m = kp * Complex64::from_polar(1.0, -ph) + km * Complex64::from_polar(1.0, ph);
            (f_seq.get(n).scale_ln(0.5 * la).to_complex() - m).norm()
        } else {
            let sign = if n % 2 == 0 { 1.0 } else { s };
            let mut v = f_seq.get(n).scale_ln(0.5 * la - ph).to_complex() * sign;
            if let Some(psi) = &psi {
                v *= (-s * jost.z * psi[n as usize]).exp();
            }
            (v - fit.k_super.unwrap()).norm()
        };
        residuals.push((n, res));
        let e = jost.r_after.get(n as usize).copied().unwrap_or(0.0) + jost.certificate.r_beyond;
        if e > 0.0 {
            fitted_c = fitted_c.max(res / e);
        }
    }
    let max_residual = residuals.iter().fold(0.0f64, |a, r| a.max(r.1));
    Ok(AsymptoticReport { window: (lo, hi), residuals, max_residual, fitted_c })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub z: Complex64,
    pub n: usize,
    pub kappa_z: f64,
    pub kappa_zbar: f64,
    /// `kappa(conj z)^2 - kappa(z)^2`.
    pub lhs: f64,
    /// `Im z kappa_inf (1 - beta^2)^{-1/2} sum_{n <= N} |P_n(z)|^2`.
    pub rhs_truncated: f64,
    /// Estimate of the omitted terms from `|P_n|^2 ~ (kappa(z)^2 + kappa(conj z)^2)/a_n`.
    pub tail_estimate: f64,
    /// `|lhs - rhs_truncated| / rhs_truncated`.
    pub rel_gap: f64,
    pub rel_gap_with_tail: f64,
}

pub fn identity_thm_kappa(
    model: &CoefficientModel,
    regime: &Regime,
    z: Complex64,
    n: usize,
    opts: &SolveOptions,
) -> Result<IdentityReport> {
    if regime.kind != RegimeKind::SubCritical {
        return Err(JacobiError::RegimeMismatch("identity needs the subcritical regime".into()));
    }
    let mut o = opts.clone();
    o.n_store = o.n_store.max(n + 16);
    let f_z = crate::volterra::solve_u(model, regime, z, &o)?;
    let f_zb = crate::volterra::solve_u(model, regime, z.conj(), &o)?;
    let p_z = first_kind(model, z, o.n_store as i64 + 1)?;
    let p_zb = first_kind(model, z.conj(), o.n_store as i64 + 1)?;
    let fit_z = fit_k_coeffs(model, regime, &p_z, &f_z, &f_zb.conjugate())?;
    let fit_zb = fit_k_coeffs(model, regime, &p_zb, &f_zb, &f_z.conjugate())?;
    let (kz, kzb) = (fit_z.kappa.unwrap(), fit_zb.kappa.unwrap());
    let lhs = kzb * kzb - kz * kz;
    let pref = z.im * regime.kappa_inf / regime.root();
    let mut sum = 0.0;
    for j in 0..=n as i64 {
        let v = p_z.get(j);
        sum += (2.0 * v.ln_abs).exp();
    }
    let rhs_truncated = pref * sum;
    let tb = model.tail_bounds(n + 1).map(|t| 2.0 * t.alpha).unwrap_or(0.0);
    let tail_estimate = pref * (kz * kz + kzb * kzb) * tb;
    let rel_gap = (lhs - rhs_truncated).abs() / rhs_truncated.abs();
    let rel_gap_with_tail = (lhs - rhs_truncated - tail_estimate).abs() / (rhs_truncated + tail_estimate).abs();
    Ok(IdentityReport { z, n, kappa_z: kz, kappa_zbar: kzb, lhs, rhs_truncated, tail_estimate, rel_gap, rel_gap_with_tail })
}

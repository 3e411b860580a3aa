//! Approximate solutions `Q_n`, step multipliers `zeta_n`, phases, the relative
//! remainder `r_n(z)` and the tail bound `eps_n(z)`.

use crate::coefficients::{CoefficientModel, Regime};
use crate::error::{JacobiError, Result};
use crate::logscaled::LogComplex;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

const CLAMP: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    Sub,
    Super,
}

impl Branch {
    pub fn of(regime: &Regime) -> Branch {
        if regime.sub() {
            Branch::Sub
        } else {
            Branch::Super
        }
    }
}

/// One index of the ansatz at a fixed spectral parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Step {
    pub zeta: Complex64,
    pub ln_abs_zeta: f64,
    pub arg_zeta: f64,
    /// `theta_n` (sub) or `vartheta_n` (super); zero off the branch.
    pub angle: f64,
    pub in_branch: bool,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub ln_a: f64,
    pub ln_kappa: f64,
    /// Part of `r_n` not carried by the two difference terms:
    /// `zeta + 1/zeta - 2 beta - 2 z alpha` for the plain ansatz.
    pub d: Complex64,
}

/// Producer of [`Step`]s for a fixed `z`. Lets the solver run far past any stored table.
pub trait StepSource: Sync {
    fn z(&self) -> Complex64;
    fn step(&self, n: usize) -> Result<Step>;

    /// `r_n` from the two neighbouring steps.
    fn remainder(prev: &Step, cur: &Step) -> Complex64
    where
        Self: Sized,
    {
        remainder_from(prev, cur)
    }
}

pub fn remainder_from(prev: &Step, cur: &Step) -> Complex64 {
    (prev.zeta.inv() - cur.zeta.inv()) + (cur.k - 1.0) * cur.zeta + cur.d
}

/// Branch angle of `beta`: `(in_branch, theta or vartheta)`.
pub fn branch_angle(beta: f64, branch: Branch) -> (bool, f64) {
    let b = beta.abs();
    match branch {
        Branch::Sub => {
            if b <= 1.0 + CLAMP {
                (true, beta.clamp(-1.0, 1.0).acos())
            } else {
                (false, 0.0)
            }
        }
        Branch::Super => {
            if b >= 1.0 - CLAMP {
                (true, b.max(1.0).acosh())
            } else {
                (false, 0.0)
            }
        }
    }
}

fn sign_or(beta: f64, fallback: f64) -> f64 {
    if beta > 0.0 {
        1.0
    } else if beta < 0.0 {
        -1.0
    } else {
        fallback
    }
}

/// Multiplier `zeta` for `beta` on the given branch. Off the branch the
/// angle is zero, giving `1` (sub) or `sgn beta` (super); `beta = 0` on the
/// super branch takes `sign_fallback`.
pub fn zeta(beta: f64, branch: Branch, sign_fallback: f64) -> Complex64 {
    zeta_parts(beta, branch, sign_fallback).0
}

pub(crate) fn zeta_parts(beta: f64, branch: Branch, sign_fallback: f64) -> (Complex64, f64, f64, bool, f64) {
    let (inb, ang) = branch_angle(beta, branch);
    match branch {
        Branch::Sub => {
            if inb {
                let c = beta.clamp(-1.0, 1.0);
                (Complex64::new(c, -(1.0 - c * c).sqrt()), 0.0, -ang, true, ang)
            } else {
                (Complex64::new(1.0, 0.0), 0.0, 0.0, false, 0.0)
            }
        }
        Branch::Super => {
            let s = sign_or(beta, sign_fallback);
            let arg = if s < 0.0 { PI } else { 0.0 };
            if inb {
                let b = beta.abs().max(1.0);
                let m = b - (b * b - 1.0).sqrt();
                // for large b the subtraction cancels; use the reciprocal form
                let m = if b > 1e4 { 1.0 / (b + (b * b - 1.0).sqrt()) } else { m };
                (Complex64::new(s * m, 0.0), -ang, arg, true, ang)
            } else {
                (Complex64::new(s, 0.0), 0.0, arg, false, 0.0)
            }
        }
    }
}

/// The plain (z-independent multiplier) ansatz evaluated at `z`.
pub struct AnsatzRows<'a> {
    pub model: &'a CoefficientModel,
    pub branch: Branch,
    pub sign_inf: f64,
    pub z: Complex64,
}

impl<'a> AnsatzRows<'a> {
    pub fn new(model: &'a CoefficientModel, regime: &Regime, z: Complex64) -> Self {
        AnsatzRows { model, branch: Branch::of(regime), sign_inf: regime.sign_inf(), z }
    }
}

impl StepSource for AnsatzRows<'_> {
    fn z(&self) -> Complex64 {
        self.z
    }

    fn step(&self, n: usize) -> Result<Step> {
        let m = self.model;
        let d = m.derived(n)?;
        let (zeta, ln_abs_zeta, arg_zeta, in_branch, angle) = zeta_parts(d.beta, self.branch, self.sign_inf);
        let defect = if in_branch {
            Complex64::new(0.0, 0.0)
        } else {
            zeta + zeta.inv() - 2.0 * d.beta
        };
        Ok(Step {
            zeta,
            ln_abs_zeta,
            arg_zeta,
            angle,
            in_branch,
            alpha: d.alpha,
            beta: d.beta,
            k: d.k,
            ln_a: m.ln_a(n as i64)?,
            ln_kappa: m.ln_kappa(n)?,
            d: defect - 2.0 * self.z * d.alpha,
        })
    }
}

/// Compensated running sum.
#[derive(Clone, Copy, Default, Debug)]
pub(crate) struct Kahan {
    s: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.s + y;
        self.c = (t - self.s) - y;
        self.s = t;
    }
    pub fn value(&self) -> f64 {
        self.s
    }
}

/// Stored ansatz for `n = 0..=len-1`.
#[derive(Clone, Debug, Serialize)]
pub struct AnsatzTable {
    pub z: Complex64,
    pub branch: Branch,
    pub steps: Vec<Step>,
    /// Cumulative phase `phi_n` (sub) or `vartheta`-phase (super) over in-branch `m < n`.
    pub phase: Vec<f64>,
    #[serde(skip)]
    pub log_q: Vec<LogComplex>,
    /// `sigma_n = zeta_n zeta_{n-1}` (index 0 holds `zeta_0^2`).
    pub sigma: Vec<Complex64>,
    /// `sum_{p=1}^{n-1} log sigma_p`.
    pub log_s: Vec<Complex64>,
}

impl AnsatzTable {
    pub fn from_source(src: &impl StepSource, len: usize) -> Result<Self> {
        let mut steps = Vec::with_capacity(len);
        for n in 0..len {
            steps.push(src.step(n)?);
        }
        let mut phase = Vec::with_capacity(len);
        let mut log_q = Vec::with_capacity(len);
        let mut ph = Kahan::default();
        let mut ln_prod = Kahan::default();
        let mut arg = 0.0f64;
        for (n, s) in steps.iter().enumerate() {
            phase.push(ph.value());
            log_q.push(LogComplex::from_polar(ln_prod.value() - 0.5 * s.ln_a, arg));
            ph.add(s.angle);
            ln_prod.add(s.ln_abs_zeta);
            arg = (arg + s.arg_zeta).rem_euclid(2.0 * PI);
            let _ = n;
        }
        let mut sigma = Vec::with_capacity(len);
        let mut log_s = Vec::with_capacity(len);
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..len {
            let prev = if n == 0 { steps[0].zeta } else { steps[n - 1].zeta };
            let sg = steps[n].zeta * prev;
            sigma.push(sg);
            log_s.push(acc);
            if n >= 1 {
                acc += sg.ln();
            }
        }
        Ok(AnsatzTable { z: src.z(), branch: steps_branch(src, &steps), steps, phase, log_q, sigma, log_s })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `r_n` at the table's `z`, `n >= 1`.
    pub fn remainder(&self, n: usize) -> Complex64 {
        remainder_from(&self.steps[n - 1], &self.steps[n])
    }
}

fn steps_branch(_src: &impl StepSource, steps: &[Step]) -> Branch {
    if steps.iter().any(|s| s.zeta.im != 0.0) || steps.iter().all(|s| s.zeta == Complex64::new(1.0, 0.0)) {
        Branch::Sub
    } else {
        Branch::Super
    }
}

/// z-independent table for `n = 0..=n_max`.
pub fn ansatz_table(model: &CoefficientModel, regime: &Regime, n_max: usize) -> Result<AnsatzTable> {
    let src = AnsatzRows::new(model, regime, Complex64::new(0.0, 0.0));
    let mut t = AnsatzTable::from_source(&src, n_max + 1)?;
    t.branch = Branch::of(regime);
    Ok(t)
}

pub fn phase(model: &CoefficientModel, regime: &Regime, n: usize) -> Result<f64> {
    let branch = Branch::of(regime);
    let mut s = Kahan::default();
    for m in 0..n {
        s.add(branch_angle(model.beta(m)?, branch).1);
    }
    Ok(s.value())
}

pub fn ansatz_q(model: &CoefficientModel, regime: &Regime, n: usize) -> Result<LogComplex> {
    Ok(ansatz_table(model, regime, n)?.log_q[n])
}

pub fn remainder_r(model: &CoefficientModel, regime: &Regime, z: Complex64, n: usize) -> Result<Complex64> {
    if n == 0 {
        return Err(JacobiError::Invalid("remainder needs n >= 1".into()));
    }
    let src = AnsatzRows::new(model, regime, z);
    Ok(remainder_from(&src.step(n - 1)?, &src.step(n)?))
}

/// `r_n` from the defining quotient of the recurrence applied to `Q`, with the
/// sum of the absolute values of its three terms.
pub fn remainder_quotient(
    model: &CoefficientModel,
    table: &AnsatzTable,
    z: Complex64,
    n: usize,
) -> Result<(Complex64, f64)> {
    let (lp, l0) = (model.ln_a(n as i64 - 1)?, model.ln_a(n as i64)?);
    let norm = 0.5 * (lp + l0);
    let q0 = table.log_q[n];
    let t1 = (table.log_q[n - 1] / q0).scale_ln(lp - norm).to_complex();
    let t3 = (table.log_q[n + 1] / q0).scale_ln(l0 - norm).to_complex();
    let t2 = Complex64::new(model.b_scaled(n, norm)?, 0.0) - z * (-norm).exp();
    Ok((t1 + t2 + t3, t1.norm() + t2.norm() + t3.norm()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsTail {
    pub value: f64,
    /// True when the part beyond the explicit cutoff is a rigorous bound.
    pub certified: bool,
}

/// `eps_n(z) = sum_{m > n} (|beta_{m-1} - beta_m| + |k_m - 1| + alpha_m |z|)` for
/// every `n = 0..=n_max`, summed explicitly to `n_cutoff` with a closed-form tail.
pub fn eps_profile(model: &CoefficientModel, z: Complex64, n_max: usize, n_cutoff: usize) -> Result<Vec<EpsTail>> {
    if n_max >= n_cutoff {
        return Err(JacobiError::Invalid("eps needs n < N_cutoff".into()));
    }
    let tb = model.tail_bounds(n_cutoff)?;
    let za = z.norm();
    let tail = tb.beta + tb.k + za * tb.alpha;
    let mut out = vec![EpsTail { value: 0.0, certified: tb.certified }; n_max + 1];
    let mut acc = Kahan::default();
    acc.add(tail);
    let mut b_next = model.beta(n_cutoff)?;
    for m in (1..=n_cutoff).rev() {
        let b = model.beta(m - 1)?;
        let t = (b - b_next).abs() + (model.k(m)? - 1.0).abs() + za * model.alpha(m)?;
        b_next = b;
        acc.add(t);
        if m - 1 <= n_max {
            out[m - 1].value = acc.value();
        }
    }
    Ok(out)
}

pub fn eps_tail(model: &CoefficientModel, z: Complex64, n: usize, n_cutoff: usize) -> Result<EpsTail> {
    Ok(eps_profile(model, z, n, n_cutoff)?[n])
}

/// Fitted `C = max |r_n| / (|beta_{n-1} - beta_n| + |k_n - 1| + 2 alpha_n |z|)` over `1..len`.
pub fn fit_remainder_constant(table: &AnsatzTable, z: Complex64) -> f64 {
    let mut c = 0.0f64;
    for n in 1..table.len() {
        let (p, s) = (&table.steps[n - 1], &table.steps[n]);
        let bound = (p.beta - s.beta).abs() + (s.k - 1.0).abs() + 2.0 * s.alpha * z.norm();
        let r = remainder_from(p, s).norm();
        if bound > 0.0 {
            c = c.max(r / bound);
        }
    }
    c
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderTable {
    pub r: Vec<Complex64>,
    pub eps: Vec<f64>,
    pub partial: Vec<f64>,
    pub eps_certified: bool,
}

pub fn remainder_table(
    model: &CoefficientModel,
    regime: &Regime,
    z: Complex64,
    n_max: usize,
    n_cutoff: usize,
) -> Result<RemainderTable> {
    let src = AnsatzRows::new(model, regime, z);
    let mut r = vec![Complex64::new(0.0, 0.0)];
    let mut prev = src.step(0)?;
    for n in 1..=n_max {
        let cur = src.step(n)?;
        r.push(remainder_from(&prev, &cur));
        prev = cur;
    }
    let mut s = 0.0;
    let partial = r.iter().map(|v| {
        s += v.norm();
        s
    });
    let partial: Vec<f64> = partial.collect();
    let e = eps_profile(model, z, n_max, n_cutoff)?;
    let eps_certified = e.first().map_or(false, |v| v.certified);
    Ok(RemainderTable { r, eps: e.into_iter().map(|v| v.value).collect(), partial, eps_certified })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{classify, Diagonal, OffDiagonal};

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(0.0, Branch::Sub, 1.0), Complex64::new(0.0, -1.0));
        let z = zeta(2.0, Branch::Super, 1.0);
        assert!((z.re - (2.0 - 3f64.sqrt())).abs() < 1e-15);
        assert!((zeta(-2.0, Branch::Super, 1.0).re + (2.0 - 3f64.sqrt())).abs() < 1e-15);
        assert_eq!(zeta(1.5, Branch::Sub, 1.0), Complex64::new(1.0, 0.0));
        assert_eq!(zeta(-0.5, Branch::Super, 1.0), Complex64::new(-1.0, 0.0));
        assert_eq!(zeta(0.0, Branch::Super, -1.0), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn phase_examples() {
        let m = CoefficientModel::n_squared();
        let r = classify(&m, 32, 1e-6).unwrap();
        for n in [0usize, 1, 7, 100] {
            assert!((phase(&m, &r, n).unwrap() - PI * n as f64 / 2.0).abs() < 1e-12);
        }
        let q = ansatz_q(&m, &r, 4).unwrap().to_complex();
        assert!((q - Complex64::new(0.25, 0.0)).norm() < 1e-14);
        let g = CoefficientModel::geometric_beta(2.0);
        let rg = classify(&g, 32, 1e-6).unwrap();
        assert!((phase(&g, &rg, 10).unwrap() - 10.0 * (2.0 + 3f64.sqrt()).ln()).abs() < 1e-12);
        let a = CoefficientModel::geometric_beta(-1.1);
        let ra = classify(&a, 32, 1e-6).unwrap();
        let t = ansatz_table(&a, &ra, 9).unwrap();
        for n in 0..10 {
            let q = t.log_q[n].to_complex();
            assert!(q.im.abs() < 1e-12 * q.norm());
            assert_eq!(q.re.signum(), if n % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!((t.log_q[0].ln_abs + 0.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_remainder_is_pure_z_term() {
        let (gamma, x) = (1.3, 2.5);
        let m = CoefficientModel::family("g", OffDiagonal::Geometric { gamma, x }, Diagonal::Zero).unwrap();
        let r = classify(&m, 32, 1e-6).unwrap();
        let z = Complex64::new(0.4, -1.2);
        for n in 1..40 {
            let got = remainder_r(&m, &r, z, n).unwrap();
            let want = -z / (gamma * x.powf(n as f64 - 0.5));
            assert!((got - want).norm() < 1e-14, "{n}");
            assert!(remainder_r(&m, &r, Complex64::new(0.0, 0.0), n).unwrap().norm() < 1e-15);
        }
    }
}

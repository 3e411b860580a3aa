//! Carleman case (`sum 1/a_n = inf`): the multiplier carries a `z`-dependent
//! factor, producing the extra phase `psi_n`.

use crate::ansatz::{zeta_parts, AnsatzTable, Branch, Kahan, Step, StepSource};
use crate::coefficients::{CoefficientModel, Regime};
use crate::error::{JacobiError, Result};
use crate::solutions::{first_kind, SolutionSeq};
use crate::volterra::{fitted_r_beyond, solve_source, JostBundle, SolveOptions};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Below this `|1 - beta^2|` the branch formulas are refused.
pub const NEAR_CRITICAL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn sin_minus_id(w: Complex64) -> Complex64 {
    if w.norm() < 0.1 {
        let w2 = w * w;
        -w * w2 / 6.0 * (1.0 - w2 / 20.0 * (1.0 - w2 / 42.0 * (1.0 - w2 / 72.0)))
    } else {
        w.sin() - w
    }
}

fn sinh_minus_id(w: Complex64) -> Complex64 {
    if w.norm() < 0.1 {
        let w2 = w * w;
        w * w2 / 6.0 * (1.0 + w2 / 20.0 * (1.0 + w2 / 42.0 * (1.0 + w2 / 72.0)))
    } else {
        w.sinh() - w
    }
}

/// `zeta_n(z)` with its exponential factor. On the super branch the exponent
/// carries `sgn beta`, so that `zeta + 1/zeta - 2 beta = 2 z alpha + O(alpha^2)`
/// for either sign.
pub fn carleman_zeta(beta: f64, alpha: f64, z: Complex64, branch: Branch) -> Result<Complex64> {
    let s = (1.0 - beta * beta).abs();
    if s < NEAR_CRITICAL {
        return Err(JacobiError::NearCritical { index: 0, beta });
    }
    let root = s.sqrt();
    Ok(match branch {
        Branch::Sub => {
            if beta.abs() >= 1.0 {
                return Err(JacobiError::RegimeMismatch(format!("beta = {beta} lies off the sub branch")));
            }
            Complex64::new(beta, -root) * (I * z * alpha / root).exp()
        }
        Branch::Super => {
            if beta.abs() <= 1.0 {
                return Err(JacobiError::RegimeMismatch(format!("beta = {beta} lies off the super branch")));
            }
            let sg = beta.signum();
            sg * (beta.abs() - root) * (-sg * z * alpha / root).exp()
        }
    })
}

/// Step producer for the `z`-dependent ansatz.
pub struct CarlemanRows<'a> {
    pub model: &'a CoefficientModel,
    pub branch: Branch,
    pub sign_inf: f64,
    pub z: Complex64,
}

impl<'a> CarlemanRows<'a> {
    pub fn new(model: &'a CoefficientModel, regime: &Regime, z: Complex64) -> Self {
        CarlemanRows { model, branch: Branch::of(regime), sign_inf: regime.sign_inf(), z }
    }
}

impl StepSource for CarlemanRows<'_> {
    fn z(&self) -> Complex64 {
        self.z
    }

    fn step(&self, n: usize) -> Result<Step> {
        let m = self.model;
        let dv = m.derived(n)?;
        let (zeta0, ln0, arg0, in_branch, angle) = zeta_parts(dv.beta, self.branch, self.sign_inf);
        let z = self.z;
        let base = Step {
            zeta: zeta0,
            ln_abs_zeta: ln0,
            arg_zeta: arg0,
            angle,
            in_branch,
            alpha: dv.alpha,
            beta: dv.beta,
            k: dv.k,
            ln_a: m.ln_a(n as i64)?,
            ln_kappa: m.ln_kappa(n)?,
            d: Complex64::new(0.0, 0.0),
        };
        if !in_branch {
            let defect = zeta0 + zeta0.inv() - 2.0 * dv.beta;
            return Ok(Step { d: defect - 2.0 * z * dv.alpha, ..base });
        }
        let s = (1.0 - dv.beta * dv.beta).abs();
        if s < NEAR_CRITICAL {
            return Err(JacobiError::NearCritical { index: n, beta: dv.beta });
        }
        let root = s.sqrt();
        let w = z * dv.alpha / root;
        Ok(match self.branch {
            Branch::Sub => {
                let e = (I * w).exp();
                let half = (w / 2.0).sin();
                let d = -4.0 * dv.beta * half * half + 2.0 * root * sin_minus_id(w);
                Step { zeta: zeta0 * e, ln_abs_zeta: ln0 - w.im, arg_zeta: arg0 + w.re, d, ..base }
            }
            Branch::Super => {
                let sg = if zeta0.re < 0.0 { -1.0 } else { 1.0 };
                let e = (-sg * w).exp();
                let half = (w / 2.0).sinh();
                let d = 4.0 * dv.beta * half * half + 2.0 * root * sinh_minus_id(w);
                Step { zeta: zeta0 * e, ln_abs_zeta: ln0 - sg * w.re, arg_zeta: arg0 - sg * w.im, d, ..base }
            }
        })
    }
}

/// Stored Carleman ansatz: the usual table plus `psi_n`.
#[derive(Clone, Debug, Serialize)]
pub struct CarlemanTable {
    pub table: AnsatzTable,
    /// `psi_n = sum_{m < n, in branch} alpha_m / sqrt|1 - beta_m^2|`.
    pub psi: Vec<f64>,
}

pub fn carleman_table(model: &CoefficientModel, regime: &Regime, z: Complex64, n_max: usize) -> Result<CarlemanTable> {
    let src = CarlemanRows::new(model, regime, z);
    let mut table = AnsatzTable::from_source(&src, n_max + 1)?;
    table.branch = Branch::of(regime);
    let psi = psi_values(&table.steps);
    Ok(CarlemanTable { table, psi })
}

pub(crate) fn psi_values(steps: &[Step]) -> Vec<f64> {
    let mut acc = Kahan::default();
    let mut out = Vec::with_capacity(steps.len());
    for s in steps {
        out.push(acc.value());
        if s.in_branch {
            acc.add(s.alpha / (1.0 - s.beta * s.beta).abs().sqrt());
        }
    }
    out
}

fn require_carleman(regime: &Regime) -> Result<()> {
    if regime.carleman() {
        Ok(())
    } else {
        Err(JacobiError::RegimeMismatch("the Carleman ansatz needs sum 1/a_n = inf".into()))
    }
}

/// Jost solution in the Carleman case. On the sub branch `Im z < 0` is
/// obtained by conjugating the solution at `conj z`.
pub fn carleman_jost(model: &CoefficientModel, regime: &Regime, z: Complex64, opts: &SolveOptions) -> Result<JostBundle> {
    require_carleman(regime)?;
    if regime.sub() && z.im < 0.0 {
        return Ok(carleman_jost(model, regime, z.conj(), opts)?.conjugate());
    }
    let src = CarlemanRows::new(model, regime, z);
    let rb = |n: usize| fitted_r_beyond(&src, n);
    solve_source(&src, model, regime.kind, opts, &rb)
}

/// `Omega = -f_{-1}/2`.
pub fn omega_of(b: &JostBundle) -> Complex64 {
    -0.5 * b.f(-1).to_complex()
}

#[derive(Clone, Debug, Serialize)]
pub struct PolyAsymReport {
    pub lambda: f64,
    pub omega: Complex64,
    /// `{f(lambda + i0), f(lambda - i0)}`, expected `2i sqrt(1 - beta_inf^2)`.
    pub w_ff: Complex64,
    /// `(n, |sqrt(a_n) P_n - model_n|)`.
    pub residuals: Vec<(i64, f64)>,
    /// `(N, sup of the residual over N/2 < n <= N)` for dyadic `N`.
    pub dyadic: Vec<(i64, f64)>,
    pub decreasing: bool,
    /// `max_n |P_n - (conj(Omega) f_n - Omega conj(f_n)) / {f, f~}|` relative to `|P_n| + |f_n| |Omega| / |W|`.
    pub resynthesis: f64,
}

/// Compares `sqrt(a_n) P_n(lambda)` with
/// `-|Omega(lambda + i0)| (1 - beta_inf^2)^{-1/2} sin(phi_n - lambda psi_n + arg Omega)`.
pub fn carleman_poly_asym(
    model: &CoefficientModel,
    regime: &Regime,
    lambda: f64,
    n_max: usize,
    opts: &SolveOptions,
) -> Result<PolyAsymReport> {
    require_carleman(regime)?;
    if !regime.sub() {
        return Err(JacobiError::RegimeMismatch("sine asymptotics need the sub branch".into()));
    }
    let mut o = opts.clone();
    o.n_store = o.n_store.max(n_max + 1);
    let z = Complex64::new(lambda, 0.0);
    let fb = carleman_jost(model, regime, z, &o)?;
    let fc = fb.conjugate();
    let omega = omega_of(&fb);
    let p = first_kind(model, z, n_max as i64 + 1)?;
    let (fs, fcs) = (SolutionSeq::from_jost(&fb), SolutionSeq::from_jost(&fc));
    let w_ff = crate::solutions::wronskian(model, &fs, &fcs, 0)?;
    let psi = psi_values(&fb.table.steps);
    let root = regime.root();
    let mut residuals = Vec::with_capacity(n_max + 1);
    let mut resynthesis = 0.0f64;
    for n in 0..=n_max as i64 {
        let la = model.ln_a(n)?;
        let pn = p.get(n).scale_ln(0.5 * la).to_complex().re;
        let arg = fb.table.phase[n as usize] - lambda * psi[n as usize] + omega.arg();
        let m = -omega.norm() / root * arg.sin();
        residuals.push((n, (pn - m).abs()));
        let f = fb.f(n).scale_ln(0.5 * la).to_complex();
        let synth = (omega.conj() * f - omega * f.conj()) / w_ff;
        let scale = pn.abs() + f.norm() * omega.norm() / w_ff.norm();
        resynthesis = resynthesis.max((synth - pn).norm() / scale);
    }
    let mut dyadic = Vec::new();
    let mut big_n = 16i64;
    while big_n <= n_max as i64 {
        let sup = residuals[(big_n / 2 + 1) as usize..=big_n as usize].iter().fold(0.0f64, |a, r| a.max(r.1));
        dyadic.push((big_n, sup));
        big_n *= 2;
    }
    let decreasing = dyadic.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(PolyAsymReport { lambda, omega, w_ff, residuals, dyadic, decreasing, resynthesis })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub z: Complex64,
    /// `(n, |P_n| sqrt(a_n) e^{-Im z psi_n})`.
    pub values: Vec<(i64, f64)>,
    /// `|Omega(z)| / (2 sqrt(1 - beta_inf^2))`.
    pub expected: f64,
}

/// Growth of `P_n(z)` off the real axis against the Jost function.
pub fn carleman_growth(model: &CoefficientModel, regime: &Regime, z: Complex64, n_max: usize, opts: &SolveOptions) -> Result<GrowthReport> {
    require_carleman(regime)?;
    if !regime.sub() || z.im <= 0.0 {
        return Err(JacobiError::Invalid("growth check needs the sub branch and Im z > 0".into()));
    }
    let fb = carleman_jost(model, regime, z, opts)?;
    let expected = omega_of(&fb).norm() / (2.0 * regime.root());
    let t = carleman_table(model, regime, z, n_max)?;
    let p = first_kind(model, z, n_max as i64)?;
    let mut values = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max as i64 {
        let v = p.get(n).scale_ln(0.5 * model.ln_a(n)? - z.im * t.psi[n as usize]);
        values.push((n, v.ln_abs.exp()));
    }
    Ok(GrowthReport { z, values, expected })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityPoint {
    pub lambda: f64,
    pub omega_abs: f64,
    pub density: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub points: Vec<DensityPoint>,
    /// Trapezoid integral over the grid window.
    pub integral: f64,
    pub all_positive: bool,
}

/// `rho'(lambda) = sqrt(1 - beta_inf^2) / (pi |Omega(lambda + i0)|^2)` on a grid.
pub fn ac_spectral_density(
    model: &CoefficientModel,
    regime: &Regime,
    grid: &[f64],
    opts: &SolveOptions,
) -> Result<DensityReport> {
    require_carleman(regime)?;
    if !regime.sub() {
        return Err(JacobiError::RegimeMismatch("absolutely continuous density needs the sub branch".into()));
    }
    let root = regime.root();
    let points: Result<Vec<DensityPoint>> = grid
        .par_iter()
        .map(|&lambda| {
            let fb = carleman_jost(model, regime, Complex64::new(lambda, 0.0), opts)?;
            let omega_abs = omega_of(&fb).norm();
            Ok(DensityPoint { lambda, omega_abs, density: root / (PI * omega_abs * omega_abs) })
        })
        .collect();
    let points = points?;
    let integral = points.windows(2).map(|w| 0.5 * (w[1].lambda - w[0].lambda) * (w[0].density + w[1].density)).sum();
    let all_positive = points.iter().all(|p| p.density > 0.0 && p.density.is_finite());
    Ok(DensityReport { points, integral, all_positive })
}

/// `sqrt(a_n) |f_n|` on `0..=n_store`, which should approach `e^{-Im z psi_n}`.
pub fn rescaled_modulus(model: &CoefficientModel, b: &JostBundle) -> Result<Vec<f64>> {
    (0..=b.n_store as i64).map(|n| Ok(b.f(n).scale_ln(0.5 * model.ln_a(n)?).ln_abs.exp())).collect()
}

pub fn psi(model: &CoefficientModel, regime: &Regime, n_max: usize) -> Result<Vec<f64>> {
    Ok(carleman_table(model, regime, Complex64::new(0.0, 0.0), n_max)?.psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::AnsatzRows;
    use crate::coefficients::classify;
    use crate::volterra::recurrence_residual;

    #[test]
    fn zeta_examples() {
        let z0 = carleman_zeta(0.3, 0.7, Complex64::new(0.0, 0.0), Branch::Sub).unwrap();
        assert!((z0 - crate::ansatz::zeta(0.3, Branch::Sub, 1.0)).norm() < 1e-15);
        let lam = 1.7;
        let a = 0.4;
        let z = carleman_zeta(0.0, a, Complex64::new(lam, 0.0), Branch::Sub).unwrap();
        assert!((z - Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, lam * a)).norm() < 1e-15);
        assert!((z.norm() - 1.0).abs() < 1e-15);
        let z2 = carleman_zeta(2.0, a, Complex64::new(lam, 0.0), Branch::Super).unwrap();
        let want = (2.0 - 3f64.sqrt()) * (-lam * a / 3f64.sqrt()).exp();
        assert!((z2.re - want).abs() < 1e-15 && z2.im == 0.0);
        assert!(matches!(carleman_zeta(1.0, a, Complex64::new(0.0, 0.0), Branch::Sub), Err(JacobiError::NearCritical { .. })));
    }

    #[test]
    fn modulus_and_zero_degeneracy() {
        let m = CoefficientModel::hermite();
        let r = classify(&m, 64, 1e-6).unwrap();
        assert!(r.carleman() && r.sub());
        let z = Complex64::new(0.3, 0.8);
        let src = CarlemanRows::new(&m, &r, z);
        for n in 0..50 {
            let s = src.step(n).unwrap();
            let want = (-z.im * s.alpha / (1.0 - s.beta * s.beta).sqrt()).exp();
            assert!((s.zeta.norm() - want).abs() < 1e-14);
        }
        let c0 = CarlemanRows::new(&m, &r, Complex64::new(0.0, 0.0));
        let a0 = AnsatzRows::new(&m, &r, Complex64::new(0.0, 0.0));
        for n in 0..50 {
            let (c, a) = (c0.step(n).unwrap(), a0.step(n).unwrap());
            assert_eq!(c.zeta, a.zeta);
            assert_eq!(c.angle, a.angle);
        }
        let p = psi(&m, &r, 4000).unwrap();
        assert!(p.windows(2).all(|w| w[1] >= w[0]));
        assert!(p[4000] / 4000.0 < p[1000] / 1000.0);
    }

    #[test]
    fn remainder_matches_quotient_form() {
        let m = CoefficientModel::hermite();
        let r = classify(&m, 64, 1e-6).unwrap();
        let z = Complex64::new(0.7, 0.4);
        let t = carleman_table(&m, &r, z, 60).unwrap();
        for n in 1..59 {
            let (q, scale) = crate::ansatz::remainder_quotient(&m, &t.table, z, n).unwrap();
            assert!((q - t.table.remainder(n)).norm() < 1e-13 * scale.max(1.0), "{n}");
        }
    }

    #[test]
    fn jost_residual_and_conjugation() {
        let m = CoefficientModel::hermite();
        let r = classify(&m, 64, 1e-6).unwrap();
        let opts = SolveOptions::new(200, Some(1 << 16), 1e-2);
        let z = Complex64::new(0.5, 0.3);
        let b = carleman_jost(&m, &r, z, &opts).unwrap();
        assert!(recurrence_residual(&m, &b).unwrap() < 1e-12);
        let bc = carleman_jost(&m, &r, z.conj(), &opts).unwrap();
        for n in 0..200 {
            let (x, y) = (b.f(n), bc.f(n));
            assert!((x.ln_abs - y.ln_abs).abs() < 1e-13 && (x.unit.conj() - y.unit).norm() < 1e-13);
        }
    }
}

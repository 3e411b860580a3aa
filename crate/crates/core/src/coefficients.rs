//! Coefficient families, derived sequences, regime detection and
//! self-adjointness diagnostics.

use crate::error::{JacobiError, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma as gamma_fn, gamma_ur};
use std::f64::consts::LN_2;

/// Growth law of the off-diagonal entries `a_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffDiagonal {
    /// `a_n = gamma * (n + shift)^p`; a non-positive base is replaced by 1.
    Power {
        gamma: f64,
        p: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `a_n = gamma * x^n`.
    Geometric { gamma: f64, x: f64 },
    /// `a_n = gamma * x^(n^q)`.
    Stretched { gamma: f64, x: f64, q: f64 },
    /// `a_n = m^p (1 + c/m)`, `m = max(n, 1)`, `c = c1` for odd `n` and `c2` for even `n`.
    Parity { p: f64, c1: f64, c2: f64 },
}

/// Diagonal entries `b_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diagonal {
    Zero,
    /// `b_n = delta * n^q` (with `0^q = 1` when `q = 0`).
    Power { delta: f64, q: f64 },
    /// `b_n = delta * x^n`.
    Geometric { delta: f64, x: f64 },
    /// `b_n = -2 beta sqrt(a_{n-1} a_n)`, so that `beta_n = beta` for every `n`.
    ConstBeta { beta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// A Jacobi matrix given by an explicit head table, a closed-form tail, or both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientModel {
    pub name: String,
    pub table: Option<Table>,
    pub a: Option<OffDiagonal>,
    pub b: Option<Diagonal>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Derived {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    SubCritical,
    SuperCritical,
    CarlemanSub,
    CarlemanSuper,
    Unsupported,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub beta_inf: f64,
    pub kappa_inf: f64,
    pub theta_inf: Option<f64>,
    pub vartheta_inf: Option<f64>,
}

impl Regime {
    pub fn sub(&self) -> bool {
        matches!(self.kind, RegimeKind::SubCritical | RegimeKind::CarlemanSub)
    }

    pub fn carleman(&self) -> bool {
        matches!(self.kind, RegimeKind::CarlemanSub | RegimeKind::CarlemanSuper)
    }

    pub fn sign_inf(&self) -> f64 {
        if self.beta_inf < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// `sqrt|1 - beta_inf^2|`.
    pub fn root(&self) -> f64 {
        (1.0 - self.beta_inf * self.beta_inf).abs().sqrt()
    }

    fn from_limits(beta_inf: f64, kappa_inf: f64, carleman: bool, tol: f64) -> Regime {
        let b = beta_inf.abs();
        let (kind, theta, vartheta) = if (b - 1.0).abs() < tol {
            (RegimeKind::Unsupported, None, None)
        } else if b < 1.0 {
            let k = if carleman { RegimeKind::CarlemanSub } else { RegimeKind::SubCritical };
            (k, Some(beta_inf.acos()), None)
        } else {
            let k = if carleman { RegimeKind::CarlemanSuper } else { RegimeKind::SuperCritical };
            (k, None, Some((b + (b * b - 1.0).sqrt()).ln()))
        };
        Regime { kind, beta_inf, kappa_inf, theta_inf: theta, vartheta_inf: vartheta }
    }
}

impl OffDiagonal {
    fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(JacobiError::Model(s.to_string()));
        match *self {
            OffDiagonal::Power { gamma, p, shift } => {
                if !(gamma > 0.0 && p.is_finite() && shift.is_finite()) {
                    return bad("power family needs gamma > 0 and finite p, shift");
                }
            }
            OffDiagonal::Geometric { gamma, x } => {
                if !(gamma > 0.0 && x > 0.0 && x.is_finite()) {
                    return bad("geometric family needs gamma > 0 and x > 0");
                }
            }
            OffDiagonal::Stretched { gamma, x, q } => {
                if !(gamma > 0.0 && x > 0.0 && q > 0.0 && x.is_finite() && q.is_finite()) {
                    return bad("stretched family needs gamma > 0, x > 0, q > 0");
                }
            }
            OffDiagonal::Parity { p, c1, c2 } => {
                if !(p.is_finite() && 1.0 + c1 > 0.0 && 1.0 + c2 > 0.0) {
                    return bad("parity family needs finite p and 1 + c > 0");
                }
            }
        }
        if !self.gamma().is_finite() {
            return bad("non-finite gamma");
        }
        Ok(())
    }

    fn gamma(&self) -> f64 {
        match *self {
            OffDiagonal::Power { gamma, .. }
            | OffDiagonal::Geometric { gamma, .. }
            | OffDiagonal::Stretched { gamma, .. } => gamma,
            OffDiagonal::Parity { .. } => 1.0,
        }
    }

    /// Closed-form `ln a_n`, also at `n = -1` (the natural extension, not the 1/2 convention).
    pub fn ln_a(&self, n: i64) -> f64 {
        let nf = n as f64;
        match *self {
            OffDiagonal::Power { gamma, p, shift } => {
                let t = nf + shift;
                let t = if t <= 0.0 { 1.0 } else { t };
                gamma.ln() + p * t.ln()
            }
            OffDiagonal::Geometric { gamma, x } => gamma.ln() + nf * x.ln(),
            OffDiagonal::Stretched { gamma, x, q } => {
                gamma.ln() + nf.signum() * nf.abs().powf(q) * x.ln()
            }
            OffDiagonal::Parity { p, c1, c2 } => {
                let m = nf.max(1.0);
                let c = if n.rem_euclid(2) == 1 { c1 } else { c2 };
                p * m.ln() + (c / m).ln_1p()
            }
        }
    }

    /// `ln k_n = ln a_n - (ln a_{n-1} + ln a_{n+1})/2` without cancellation, for `n >= 1`.
    pub fn ln_k(&self, n: i64) -> Option<f64> {
        if n < 1 {
            return None;
        }
        let nf = n as f64;
        match *self {
            OffDiagonal::Geometric { .. } => Some(0.0),
            OffDiagonal::Power { p, shift, .. } => {
                let t = nf + shift;
                (t - 1.0 > 0.0).then(|| 0.5 * p * (1.0 / (t * t - 1.0)).ln_1p())
            }
            OffDiagonal::Parity { p, c1, c2 } => {
                if n < 2 {
                    return None;
                }
                let (c, cn) = if n % 2 == 1 { (c1, c2) } else { (c2, c1) };
                let u = nf + cn;
                let num = (c - cn) * (2.0 * nf + c + cn) + 1.0;
                Some(0.5 * (p - 1.0) * (1.0 / (nf * nf - 1.0)).ln_1p() + 0.5 * (num / (u * u - 1.0)).ln_1p())
            }
            OffDiagonal::Stretched { x, q, .. } => {
                if n < 2 {
                    return None;
                }
                // ((1-h)^q + (1+h)^q)/2 - 1 = sum_j binom(q, 2j) h^{2j}
                let h = 1.0 / nf;
                let f = if h < 0.02 {
                    let mut term = 1.0;
                    let mut sum = 0.0;
                    let mut j = 0.0;
                    for _ in 0..6 {
                        term *= (q - j) * (q - j - 1.0) / ((j + 1.0) * (j + 2.0)) * h * h;
                        sum += term;
                        j += 2.0;
                    }
                    sum
                } else {
                    0.5 * ((1.0 - h).powf(q) + (1.0 + h).powf(q)) - 1.0
                };
                Some(-x.ln() * nf.powf(q) * f)
            }
        }
    }

    /// Whether `sum 1/a_n` diverges.
    pub fn carleman(&self) -> bool {
        match *self {
            OffDiagonal::Power { p, .. } | OffDiagonal::Parity { p, .. } => p <= 1.0,
            OffDiagonal::Geometric { x, .. } => x <= 1.0,
            OffDiagonal::Stretched { x, .. } => x <= 1.0,
        }
    }

    pub fn kappa_inf(&self) -> f64 {
        match *self {
            OffDiagonal::Power { .. } | OffDiagonal::Parity { .. } => 1.0,
            OffDiagonal::Geometric { x, .. } => x.sqrt(),
            OffDiagonal::Stretched { x, q, .. } => {
                if q < 1.0 {
                    1.0
                } else if q == 1.0 {
                    x.sqrt()
                } else if x > 1.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// Upper bound for `sum_{j >= n} 1/a_j`.
    fn inverse_tail(&self, n: usize) -> f64 {
        if self.carleman() {
            return f64::INFINITY;
        }
        let nf = n as f64;
        match *self {
            OffDiagonal::Power { gamma, p, shift } => {
                let t = nf + shift;
                if t < 1.0 {
                    return f64::INFINITY;
                }
                power_tail(t, p) / gamma
            }
            OffDiagonal::Parity { p, c1, c2 } => {
                let cmin = c1.min(c2).min(0.0);
                if nf < 1.0 || 1.0 + cmin / nf <= 0.0 {
                    return f64::INFINITY;
                }
                power_tail(nf, p) / (1.0 + cmin / nf)
            }
            OffDiagonal::Geometric { gamma, x } => (-nf * x.ln()).exp() / (gamma * (1.0 - 1.0 / x)),
            OffDiagonal::Stretched { gamma, x, q } => {
                let c = x.ln();
                let s = c * nf.powf(q);
                let integral = if s > 700.0 {
                    0.0
                } else {
                    gamma_ur(1.0 / q, s) * gamma_fn(1.0 / q) * c.powf(-1.0 / q) / q
                };
                ((-s).exp() + integral) / gamma
            }
        }
    }

    /// Upper bound for `sum_{m > n} |k_m - 1|`, or `None` when the sequence is not summable.
    fn k_tail(&self, n: usize) -> Option<f64> {
        let nf = n as f64;
        // sum_{t >= t0} 1/(t^2 - 1) = (1/(t0 - 1) + 1/t0)/2
        let tele = |t0: f64| 0.5 * (1.0 / (t0 - 1.0) + 1.0 / t0);
        let l = match *self {
            OffDiagonal::Geometric { .. } => return Some(0.0),
            OffDiagonal::Power { p, shift, .. } => {
                let t0 = nf + 1.0 + shift;
                if t0 < 3.0 {
                    return Some(f64::INFINITY);
                }
                0.5 * p.abs() * tele(t0)
            }
            OffDiagonal::Parity { p, c1, c2 } => {
                if c1 != c2 {
                    return None;
                }
                let t0 = nf + 1.0;
                if t0 + c1 < 3.0 {
                    return Some(f64::INFINITY);
                }
                0.5 * (p - 1.0).abs() * tele(t0) + 0.5 * tele(t0 + c1)
            }
            OffDiagonal::Stretched { x, q, .. } => {
                if q > 1.0 {
                    return None;
                }
                if q == 1.0 {
                    return Some(0.0);
                }
                if nf < 1.0 {
                    return Some(f64::INFINITY);
                }
                x.ln().abs() * q * (1.0 - q) / 2.0 * (nf.powf(q - 2.0) + nf.powf(q - 1.0) / (1.0 - q))
            }
        };
        Some(l * l.exp())
    }

    /// Upper bound for `sum_{m > n} alpha_m`.
    fn alpha_tail(&self, n: usize) -> f64 {
        match *self {
            OffDiagonal::Geometric { gamma, x } if x > 1.0 => {
                (-(n as f64 + 0.5) * x.ln()).exp() / (2.0 * gamma * (1.0 - 1.0 / x))
            }
            _ => 0.5 * self.inverse_tail(n),
        }
    }
}

fn power_tail(t: f64, p: f64) -> f64 {
    // sum_{j >= 0} (t + j)^{-p} <= t^{-p} + t^{1-p}/(p - 1)
    t.powf(-p) + t.powf(1.0 - p) / (p - 1.0)
}

impl Diagonal {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Diagonal::Zero => true,
            Diagonal::Power { delta, q } => delta.is_finite() && q.is_finite(),
            Diagonal::Geometric { delta, x } => delta.is_finite() && x > 0.0 && x.is_finite(),
            Diagonal::ConstBeta { beta } => beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(JacobiError::Model("diagonal family parameters must be finite (x > 0)".into()))
        }
    }

    fn negated(&self) -> Diagonal {
        match *self {
            Diagonal::Zero => Diagonal::Zero,
            Diagonal::Power { delta, q } => Diagonal::Power { delta: -delta, q },
            Diagonal::Geometric { delta, x } => Diagonal::Geometric { delta: -delta, x },
            Diagonal::ConstBeta { beta } => Diagonal::ConstBeta { beta: -beta },
        }
    }
}

/// Closed-form `beta_inf`: `Ok(Some(v))` finite, `Ok(None)` divergent.
fn beta_limit(a: &OffDiagonal, b: &Diagonal) -> Option<f64> {
    match *b {
        Diagonal::Zero => Some(0.0),
        Diagonal::ConstBeta { beta } => Some(beta),
        Diagonal::Power { delta, q } => {
            if delta == 0.0 {
                return Some(0.0);
            }
            match *a {
                OffDiagonal::Power { gamma, p, .. } => power_vs_power(delta, q, gamma, p),
                OffDiagonal::Parity { p, .. } => power_vs_power(delta, q, 1.0, p),
                OffDiagonal::Geometric { x, .. } => (x > 1.0).then_some(0.0),
                OffDiagonal::Stretched { x, .. } => (x > 1.0).then_some(0.0),
            }
        }
        Diagonal::Geometric { delta, x: y } => {
            if delta == 0.0 || y < 1.0 {
                return Some(0.0);
            }
            match *a {
                OffDiagonal::Geometric { gamma, x } => {
                    if y < x {
                        Some(0.0)
                    } else if y == x {
                        Some(-delta * x.sqrt() / (2.0 * gamma))
                    } else {
                        None
                    }
                }
                OffDiagonal::Power { p, .. } | OffDiagonal::Parity { p, .. } => {
                    if y == 1.0 {
                        if p > 0.0 {
                            Some(0.0)
                        } else {
                            None
                        }
                    } else {
                        None
                    }
                }
                OffDiagonal::Stretched { q, x, .. } => {
                    if y == 1.0 || (q > 1.0 && x > 1.0) {
                        Some(0.0)
                    } else {
                        None
                    }
                }
            }
        }
    }
}

fn power_vs_power(delta: f64, q: f64, gamma: f64, p: f64) -> Option<f64> {
    if q < p {
        Some(0.0)
    } else if q == p {
        Some(-delta / (2.0 * gamma))
    } else {
        None
    }
}

impl CoefficientModel {
    pub fn family(name: &str, a: OffDiagonal, b: Diagonal) -> Result<Self> {
        let m = CoefficientModel { name: name.to_string(), table: None, a: Some(a), b: Some(b) };
        m.validate()?;
        Ok(m)
    }

    pub fn tabulated(name: &str, table: Table, tail: Option<(OffDiagonal, Diagonal)>) -> Result<Self> {
        let (a, b) = match tail {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        let m = CoefficientModel { name: name.to_string(), table: Some(table), a, b };
        m.validate()?;
        Ok(m)
    }

    /// `a_n = n^2`, `b_n = 0`.
    pub fn n_squared() -> Self {
        Self::family("n-squared", OffDiagonal::Power { gamma: 1.0, p: 2.0, shift: 0.0 }, Diagonal::Zero).unwrap()
    }

    /// `a_n = 2^n`, `beta_n = -1.1`.
    pub fn geometric_beta(beta: f64) -> Self {
        Self::family(
            "geometric-const-beta",
            OffDiagonal::Geometric { gamma: 1.0, x: 2.0 },
            Diagonal::ConstBeta { beta },
        )
        .unwrap()
    }

    /// `a_n = sqrt((n + 1)/2)`, `b_n = 0`.
    pub fn hermite() -> Self {
        Self::family(
            "hermite",
            OffDiagonal::Power { gamma: std::f64::consts::FRAC_1_SQRT_2, p: 0.5, shift: 1.0 },
            Diagonal::Zero,
        )
        .unwrap()
    }

    /// The named models shipped with the toolkit.
    pub fn builtin() -> Vec<CoefficientModel> {
        let named = |name: &str, mut m: CoefficientModel| {
            m.name = name.to_string();
            m
        };
        let fam = |name: &str, a, b| Self::family(name, a, b).unwrap();
        vec![
            Self::n_squared(),
            named("geometric-beta-minus", Self::geometric_beta(-1.1)),
            named("geometric-beta-plus", Self::geometric_beta(1.1)),
            fam(
                "stretched-square",
                OffDiagonal::Stretched { gamma: 1.0, x: 2.0, q: 2.0 },
                Diagonal::ConstBeta { beta: 2.0 },
            ),
            Self::hermite(),
            fam("parity", OffDiagonal::Parity { p: 2.0, c1: 0.5, c2: -0.25 }, Diagonal::Zero),
            fam(
                "power-diagonal",
                OffDiagonal::Power { gamma: 2.0, p: 1.5, shift: 0.5 },
                Diagonal::Power { delta: -1.0, q: 1.5 },
            ),
            fam("geometric-zero", OffDiagonal::Geometric { gamma: 1.3, x: 2.5 }, Diagonal::Zero),
            fam(
                "carleman-super",
                OffDiagonal::Power { gamma: 1.0, p: 1.0, shift: 1.0 },
                Diagonal::Power { delta: 3.0, q: 1.0 },
            ),
        ]
    }

    pub fn builtin_named(name: &str) -> Option<CoefficientModel> {
        Self::builtin().into_iter().find(|m| m.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = &self.a {
            a.validate()?;
        }
        if let Some(b) = &self.b {
            b.validate()?;
        }
        if self.a.is_some() != self.b.is_some() {
            return Err(JacobiError::Model("tail needs both a and b families".into()));
        }
        match &self.table {
            None => {
                if self.a.is_none() {
                    return Err(JacobiError::Model("model needs a family or a table".into()));
                }
            }
            Some(t) => {
                if t.a.is_empty() || t.a.len() != t.b.len() {
                    return Err(JacobiError::Model("table arrays must be nonempty and of equal length".into()));
                }
                for (i, &v) in t.a.iter().enumerate() {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(JacobiError::NonPositive { index: i as i64, value: v });
                    }
                }
                if t.b.iter().any(|v| !v.is_finite()) {
                    return Err(JacobiError::Model("table b entries must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn table_len(&self) -> usize {
        self.table.as_ref().map_or(0, |t| t.a.len())
    }

    pub fn has_tail(&self) -> bool {
        self.a.is_some()
    }

    /// `ln a_n` with the convention `a_{-1} = 1/2`.
    pub fn ln_a(&self, n: i64) -> Result<f64> {
        if n == -1 {
            return Ok(-LN_2);
        }
        self.ln_a_ext(n)
    }

    /// `ln a_n`, where `n = -1` gives the natural extension of the family.
    pub fn ln_a_ext(&self, n: i64) -> Result<f64> {
        if n < -1 {
            return Err(JacobiError::Invalid(format!("index {n} < -1")));
        }
        if let Some(t) = &self.table {
            if n >= 0 && (n as usize) < t.a.len() {
                return Ok(t.a[n as usize].ln());
            }
            if n == -1 && self.a.is_none() {
                // log-linear extrapolation of the head
                let a0 = t.a[0].ln();
                let a1 = t.a.get(1).map_or(a0, |v| v.ln());
                return Ok(2.0 * a0 - a1);
            }
        }
        match &self.a {
            Some(f) => {
                let v = f.ln_a(n);
                if v.is_nan() {
                    return Err(JacobiError::NonPositive { index: n, value: v });
                }
                Ok(v)
            }
            None => Err(JacobiError::OutOfTable(n as usize)),
        }
    }

    pub fn eval_a(&self, n: i64) -> Result<f64> {
        if n >= 0 && (n as usize) >= self.table_len() {
            if let Some(OffDiagonal::Power { gamma, p, shift }) = self.a {
                let t = n as f64 + shift;
                return Ok(gamma * if t <= 0.0 { 1.0 } else { t.powf(p) });
            }
            if let Some(OffDiagonal::Geometric { gamma, x }) = self.a {
                return Ok(gamma * x.powf(n as f64));
            }
        }
        Ok(self.ln_a(n)?.exp())
    }

    /// Sign and log-magnitude of `b_n` (log-magnitude `-inf` for zero).
    pub fn b_parts(&self, n: usize) -> Result<(f64, f64)> {
        if let Some(t) = &self.table {
            if n < t.b.len() {
                let v = t.b[n];
                return Ok((v.signum(), v.abs().ln()));
            }
        }
        let b = self.b.as_ref().ok_or(JacobiError::OutOfTable(n))?;
        let nf = n as f64;
        Ok(match *b {
            Diagonal::Zero => (1.0, f64::NEG_INFINITY),
            Diagonal::Power { delta, q } => {
                let base = if n == 0 { if q == 0.0 { 1.0 } else { 0.0 } } else { nf.powf(q) };
                let v = delta * base;
                (v.signum(), v.abs().ln())
            }
            Diagonal::Geometric { delta, x } => (delta.signum(), delta.abs().ln() + nf * x.ln()),
            Diagonal::ConstBeta { beta } => {
                let la = self.ln_a_ext(n as i64 - 1)? + self.ln_a(n as i64)?;
                (-beta.signum(), (2.0 * beta.abs()).ln() + 0.5 * la)
            }
        })
    }

    pub fn eval_b(&self, n: usize) -> Result<f64> {
        let (s, l) = self.b_parts(n)?;
        Ok(if l == f64::NEG_INFINITY { 0.0 } else { s * l.exp() })
    }

    /// `b_n * exp(-ln_scale)` without forming `b_n`.
    pub fn b_scaled(&self, n: usize, ln_scale: f64) -> Result<f64> {
        let (s, l) = self.b_parts(n)?;
        Ok(if l == f64::NEG_INFINITY { 0.0 } else { s * (l - ln_scale).exp() })
    }

    pub fn alpha(&self, n: usize) -> Result<f64> {
        let l = self.ln_a_ext(n as i64 - 1)? + self.ln_a(n as i64)?;
        Ok((-LN_2 - 0.5 * l).exp())
    }

    pub fn beta(&self, n: usize) -> Result<f64> {
        if self.table_len() <= n {
            if let Some(Diagonal::ConstBeta { beta }) = self.b {
                return Ok(beta);
            }
        }
        let (s, lb) = self.b_parts(n)?;
        if lb == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let l = self.ln_a_ext(n as i64 - 1)? + self.ln_a(n as i64)?;
        Ok(-s * (lb - LN_2 - 0.5 * l).exp())
    }

    pub fn ln_kappa(&self, n: usize) -> Result<f64> {
        Ok(0.5 * (self.ln_a(n as i64 + 1)? - self.ln_a(n as i64)?))
    }

    pub fn k(&self, n: usize) -> Result<f64> {
        if n >= 1 && n >= self.table_len() + 1 {
            if let Some(l) = self.a.as_ref().and_then(|a| a.ln_k(n as i64)) {
                return Ok(l.exp());
            }
        }
        let n = n as i64;
        Ok((self.ln_a(n)? - 0.5 * (self.ln_a_ext(n - 1)? + self.ln_a(n + 1)?)).exp())
    }

    pub fn derived(&self, n: usize) -> Result<Derived> {
        Ok(Derived {
            alpha: self.alpha(n)?,
            beta: self.beta(n)?,
            kappa: self.ln_kappa(n)?.exp(),
            k: self.k(n)?,
        })
    }

    /// The model with `b_n -> -b_n`.
    pub fn reflected(&self) -> CoefficientModel {
        let mut m = self.clone();
        if let Some(t) = &mut m.table {
            for v in &mut t.b {
                *v = -*v;
            }
        }
        m.b = m.b.as_ref().map(|b| b.negated());
        m.name = format!("{}-reflected", self.name);
        m
    }

    /// Whether `sum 1/a_n` diverges, decided from the closed-form tail when one exists.
    pub fn carleman(&self, window: usize) -> Result<bool> {
        if let Some(a) = &self.a {
            return Ok(a.carleman());
        }
        let (lk, slope) = self.fit_table_growth(window)?;
        Ok(lk < 1e-9 && slope <= 1.0)
    }

    /// Fitted `(ln kappa_inf, power-law exponent)` over the last `window` table rows.
    fn fit_table_growth(&self, window: usize) -> Result<(f64, f64)> {
        let t = self.table.as_ref().ok_or_else(|| JacobiError::Model("no table".into()))?;
        let len = t.a.len();
        if len < 4 {
            return Err(JacobiError::InconsistentTail("table too short to fit".into()));
        }
        let lo = len.saturating_sub(window).max(1);
        let xs: Vec<f64> = (lo..len).map(|n| (n as f64).ln()).collect();
        let ys: Vec<f64> = (lo..len).map(|n| t.a[n].ln()).collect();
        let slope = linear_slope(&xs, &ys);
        let lk = 0.5 * (t.a[len - 1].ln() - t.a[len - 2].ln());
        // geometric growth shows up as a constant log-ratio; power growth as a decaying one
        let ratio_trend = 0.5 * (t.a[len - 1].ln() - t.a[len - 2].ln()) - 0.5 * (t.a[lo].ln() - t.a[lo - 1].ln());
        let lk = if ratio_trend.abs() < 1e-9 * lk.abs().max(1.0) { lk } else { 0.0 };
        Ok((lk, slope))
    }

    fn richardson_beta(&self, window: usize, tol: f64) -> Result<f64> {
        let len = self.table_len();
        let lo = len.saturating_sub(window).max(4);
        if lo >= len {
            return Err(JacobiError::InconsistentTail("table too short for extrapolation".into()));
        }
        let mut est = Vec::new();
        for n in lo..len {
            let m = n / 2;
            let (bn, bm) = (self.beta(n)?, self.beta(m)?);
            est.push((n as f64 * bn - m as f64 * bm) / (n - m) as f64);
        }
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let spread = est.iter().fold(0.0f64, |s, v| s.max((v - mean).abs()));
        if !mean.is_finite() || spread > tol.sqrt() * mean.abs().max(1.0) {
            return Err(JacobiError::InconsistentTail(format!(
                "beta_n extrapolants spread {spread:e} around {mean}"
            )));
        }
        Ok(mean)
    }

    pub fn beta_inf(&self, window: usize, tol: f64) -> Result<f64> {
        match (&self.a, &self.b) {
            (Some(a), Some(b)) => beta_limit(a, b)
                .ok_or_else(|| JacobiError::InconsistentTail("beta_n diverges for this family pair".into())),
            _ => self.richardson_beta(window, tol),
        }
    }

    pub fn kappa_inf(&self, window: usize) -> Result<f64> {
        match &self.a {
            Some(a) => Ok(a.kappa_inf()),
            None => Ok(self.fit_table_growth(window)?.0.exp()),
        }
    }

    /// Bounds on the tails beyond `n` of `sum alpha_m`, `sum |k_m - 1|` and
    /// `sum |beta_{m-1} - beta_m|`, plus whether all three are rigorous.
    pub fn tail_bounds(&self, n: usize) -> Result<TailBounds> {
        let (a, b) = match (&self.a, &self.b) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(JacobiError::NoTailBound("tabulated model without a tail family".into())),
        };
        if n < self.table_len() {
            return Err(JacobiError::NoTailBound("cutoff inside the tabulated head".into()));
        }
        let alpha = a.alpha_tail(n);
        let (k, k_ok) = match a.k_tail(n) {
            Some(v) => (v, true),
            None => (f64::INFINITY, false),
        };
        let (beta, certified) = match (b, a) {
            (Diagonal::Zero, _) | (Diagonal::ConstBeta { .. }, _) => (0.0, true),
            (_, OffDiagonal::Parity { c1, c2, .. }) if c1 != c2 => (f64::INFINITY, false),
            _ => match beta_limit(a, b) {
                // eventually monotone families: the tail of |beta'| telescopes to |beta_n - beta_inf|
                Some(lim) => ((self.beta(n)? - lim).abs(), false),
                None => (f64::INFINITY, false),
            },
        };
        Ok(TailBounds { alpha, k, beta, certified: certified && k_ok && alpha.is_finite() })
    }

    /// Family verdicts on summability of `|k_n - 1|` and `|beta_n'|`.
    pub fn ell1_hypotheses(&self) -> Option<(bool, bool)> {
        let (a, b) = (self.a.as_ref()?, self.b.as_ref()?);
        let k_ok = a.k_tail(1 << 20).is_some();
        let b_ok = match (b, a) {
            (Diagonal::Zero, _) | (Diagonal::ConstBeta { .. }, _) => true,
            (Diagonal::Power { delta, q }, OffDiagonal::Parity { p, c1, c2 }) => {
                *delta == 0.0 || c1 == c2 || q < p
            }
            (Diagonal::Geometric { delta, x }, OffDiagonal::Parity { c1, c2, .. }) => {
                *delta == 0.0 || c1 == c2 || *x < 1.0
            }
            _ => beta_limit(a, b).is_some(),
        };
        Some((k_ok, b_ok))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailBounds {
    pub alpha: f64,
    pub k: f64,
    pub beta: f64,
    pub certified: bool,
}

pub(crate) fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

pub fn eval_a(model: &CoefficientModel, n: i64) -> Result<f64> {
    model.eval_a(n)
}

pub fn eval_b(model: &CoefficientModel, n: usize) -> Result<f64> {
    model.eval_b(n)
}

pub fn derived(model: &CoefficientModel, n: usize) -> Result<Derived> {
    model.derived(n)
}

/// Regime from the tail behaviour of the model.
pub fn classify(model: &CoefficientModel, window: usize, tol: f64) -> Result<Regime> {
    if window < 16 {
        return Err(JacobiError::Invalid("classification window must be at least 16".into()));
    }
    let beta = model.beta_inf(window, tol)?;
    let kappa = model.kappa_inf(window)?;
    let carleman = model.carleman(window)?;
    Ok(Regime::from_limits(beta, kappa, carleman, tol))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ell1Trace {
    pub name: &'static str,
    /// Partial sums over `m = 2..=N`.
    pub partial: Vec<f64>,
    /// Fitted exponent `s` of `term_m ~ m^s` on `[N/4, N]`; `None` when the terms vanish.
    pub tail_exponent: Option<f64>,
    /// Family verdict when available, otherwise `tail_exponent < -1.1`.
    pub summable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ell1Report {
    pub n: usize,
    pub k: Ell1Trace,
    pub beta: Ell1Trace,
    pub alpha: Ell1Trace,
    pub inverse_a: Ell1Trace,
    /// Raised when a summability hypothesis of the non-Carleman theory fails.
    pub flag: bool,
}

fn trace(name: &'static str, terms: &[f64], start: usize, family: Option<bool>) -> Ell1Trace {
    let mut s = 0.0;
    let partial: Vec<f64> = terms
        .iter()
        .map(|t| {
            s += t;
            s
        })
        .collect();
    let n = start + terms.len() - 1;
    let lo = (n / 4).max(start);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for m in lo..=n {
        let t = terms[m - start];
        if t > 0.0 && t.is_finite() {
            xs.push((m as f64).ln());
            ys.push(t.ln());
        }
    }
    let tail_exponent = (xs.len() >= 4).then(|| linear_slope(&xs, &ys));
    let summable = family.unwrap_or(match tail_exponent {
        None => true,
        Some(e) => e < -1.1,
    });
    Ell1Trace { name, partial, tail_exponent, summable }
}

pub fn ell1_diagnostics(model: &CoefficientModel, n: usize) -> Result<Ell1Report> {
    if n < 2 {
        return Err(JacobiError::Invalid("N must be at least 2".into()));
    }
    let mut tk = Vec::with_capacity(n);
    let mut tb = Vec::with_capacity(n);
    let mut ta = Vec::with_capacity(n);
    let mut ti = Vec::with_capacity(n);
    let mut prev_beta = model.beta(1)?;
    for m in 2..=n {
        let b = model.beta(m)?;
        tk.push((model.k(m)? - 1.0).abs());
        tb.push((b - prev_beta).abs());
        prev_beta = b;
        ta.push(model.alpha(m)?);
        ti.push((-model.ln_a(m as i64)?).exp());
    }
    let hyp = model.ell1_hypotheses();
    let carl = model.a.as_ref().map(|a| !a.carleman());
    let k = trace("|k_n - 1|", &tk, 2, hyp.map(|h| h.0));
    let beta = trace("|beta_n - beta_(n-1)|", &tb, 2, hyp.map(|h| h.1));
    let alpha = trace("alpha_n", &ta, 2, carl);
    let inverse_a = trace("1/a_n", &ti, 2, carl);
    let flag = !(k.summable && beta.summable);
    Ok(Ell1Report { n, k, beta, alpha, inverse_a, flag })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    EssentiallySelfAdjoint,
    DeficiencyOneOne,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfAdjointness {
    pub verdict: Verdict,
    pub evidence: Vec<String>,
    /// `ln` of the partial sum of `a_n^{-1} rho^{2n}` up to `N` (supercritical only).
    pub ln_series_partial: Option<f64>,
}

pub fn check_essential_selfadjointness(
    model: &CoefficientModel,
    regime: &Regime,
    n: usize,
) -> Result<SelfAdjointness> {
    let mut evidence = Vec::new();
    let hyp = model.ell1_hypotheses();
    let verdict = match regime.kind {
        RegimeKind::Unsupported => {
            evidence.push(format!("|beta_inf| = 1 (beta_inf = {}) is excluded", regime.beta_inf));
            Verdict::Unknown
        }
        RegimeKind::CarlemanSub | RegimeKind::CarlemanSuper => {
            evidence.push("sum 1/a_n diverges (Carleman condition)".into());
            Verdict::EssentiallySelfAdjoint
        }
        RegimeKind::SubCritical => {
            if let (Some(OffDiagonal::Parity { p, c1, c2 }), Some((false, _))) = (&model.a, hyp) {
                evidence.push(format!("l1 hypothesis violated: |k_n - 1| ~ |c2 - c1|/n with c1 = {c1}, c2 = {c2}"));
                if (c2 - c1).abs() >= p - 1.0 {
                    evidence.push(format!("|c2 - c1| >= p - 1 = {}", p - 1.0));
                    Verdict::EssentiallySelfAdjoint
                } else {
                    Verdict::Unknown
                }
            } else if matches!(hyp, Some((true, true))) {
                evidence.push("all solutions are in l2: |f_n|, |f~_n| ~ a_n^{-1/2}".into());
                Verdict::DeficiencyOneOne
            } else if hyp.is_none() {
                evidence.push("tabulated model: summability assumed from the fitted tail".into());
                Verdict::DeficiencyOneOne
            } else {
                evidence.push("l1 hypothesis violated".into());
                Verdict::Unknown
            }
        }
        RegimeKind::SuperCritical => {
            let b = regime.beta_inf.abs();
            let rho = b + (b * b - 1.0).sqrt();
            let diverges = match &model.a {
                Some(OffDiagonal::Power { .. }) | Some(OffDiagonal::Parity { .. }) => {
                    evidence.push("polynomial a_n against rho^{2n}: series diverges".into());
                    Some(true)
                }
                Some(OffDiagonal::Geometric { x, .. }) => {
                    evidence.push(format!("geometric: sqrt(x) = {} vs rho = {rho}", x.sqrt()));
                    Some(rho * rho >= x * (1.0 - 1e-12))
                }
                Some(OffDiagonal::Stretched { x, q, .. }) => {
                    evidence.push(format!("stretched: q = {q}"));
                    Some(if *q < 1.0 {
                        true
                    } else if *q > 1.0 {
                        *x <= 1.0
                    } else {
                        rho * rho >= x * (1.0 - 1e-12)
                    })
                }
                None => None,
            };
            let mut terms = Vec::new();
            for m in 0..=n {
                terms.push(2.0 * m as f64 * rho.ln() - model.ln_a(m as i64)?);
            }
            let lse = log_sum_exp(&terms);
            let diverges = diverges.unwrap_or_else(|| {
                evidence.push("tabulated: decided from the trend of the last terms".into());
                let k = terms.len();
                terms[k - 1] >= terms[k / 2] - 1e-9
            });
            evidence.push(format!("ln partial sum of a_n^-1 rho^2n up to {n}: {lse:.6}"));
            if diverges {
                Verdict::EssentiallySelfAdjoint
            } else {
                Verdict::DeficiencyOneOne
            }
        }
    };
    let ln_series_partial = if regime.kind == RegimeKind::SuperCritical {
        evidence.iter().rev().find_map(|s| s.rsplit(": ").next()?.parse().ok())
    } else {
        None
    };
    Ok(SelfAdjointness { verdict, evidence, ln_series_partial })
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_values() {
        let m = CoefficientModel::n_squared();
        assert_eq!(m.eval_a(3).unwrap(), 9.0);
        assert_eq!(m.eval_a(-1).unwrap(), 0.5);
        assert!((m.alpha(5).unwrap() - 1.0 / 40.0).abs() < 1e-16);
        let g = CoefficientModel::family("g", OffDiagonal::Geometric { gamma: 1.0, x: 2.0 }, Diagonal::Zero).unwrap();
        assert!((g.eval_a(10).unwrap() - 1024.0).abs() < 1e-10);
        let pb = CoefficientModel::family(
            "pb",
            OffDiagonal::Power { gamma: 1.0, p: 2.0, shift: 0.0 },
            Diagonal::Power { delta: 3.0, q: 2.0 },
        )
        .unwrap();
        assert!((pb.eval_b(2).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_pair_has_constant_beta() {
        let (gamma, x, delta) = (1.5, 3.0, 0.7);
        let m = CoefficientModel::family(
            "gg",
            OffDiagonal::Geometric { gamma, x },
            Diagonal::Geometric { delta, x },
        )
        .unwrap();
        let want = -(delta / (2.0 * gamma)) * x.sqrt();
        for n in 1..200 {
            assert!((m.beta(n).unwrap() - want).abs() < 1e-13);
            assert!((m.k(n).unwrap() - 1.0).abs() < 1e-13);
        }
        assert!((m.beta_inf(16, 1e-6).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn classification_examples() {
        let r = classify(&CoefficientModel::n_squared(), 32, 1e-6).unwrap();
        assert_eq!(r.kind, RegimeKind::SubCritical);
        assert_eq!((r.beta_inf, r.kappa_inf), (0.0, 1.0));
        let r = classify(&CoefficientModel::geometric_beta(1.1), 32, 1e-6).unwrap();
        assert_eq!(r.kind, RegimeKind::SuperCritical);
        assert!((r.kappa_inf - 2f64.sqrt()).abs() < 1e-15);
        let r = classify(&CoefficientModel::hermite(), 32, 1e-6).unwrap();
        assert_eq!(r.kind, RegimeKind::CarlemanSub);
        let r = classify(&CoefficientModel::geometric_beta(1.0), 32, 1e-6).unwrap();
        assert_eq!(r.kind, RegimeKind::Unsupported);
    }

    #[test]
    fn tabulated_without_tail() {
        let a: Vec<f64> = (0..200).map(|n| 2f64.powi(n)).collect();
        let b: Vec<f64> = (0..200).map(|n| 2.2 * 2f64.powf(n as f64 - 0.5)).collect();
        let m = CoefficientModel::tabulated("t", Table { a, b }, None).unwrap();
        let r = classify(&m, 32, 1e-6).unwrap();
        assert_eq!(r.kind, RegimeKind::SuperCritical);
        assert!((r.beta_inf + 1.1).abs() < 1e-9);
        assert!((r.kappa_inf - 2f64.sqrt()).abs() < 1e-9);
        assert!(m.tail_bounds(300).is_err());
        assert!(m.eval_a(500).is_err());
    }

    #[test]
    fn parity_flag() {
        let m = CoefficientModel::family("par", OffDiagonal::Parity { p: 2.0, c1: 0.0, c2: 1.0 }, Diagonal::Zero).unwrap();
        let rep = ell1_diagnostics(&m, 4000).unwrap();
        assert!(rep.flag);
        let e = rep.k.tail_exponent.unwrap();
        assert!((e + 1.0).abs() < 0.05, "{e}");
        let r = classify(&m, 32, 1e-6).unwrap();
        let v = check_essential_selfadjointness(&m, &r, 100).unwrap();
        assert_eq!(v.verdict, Verdict::EssentiallySelfAdjoint);
        let m2 = CoefficientModel::family("par", OffDiagonal::Parity { p: 3.0, c1: 0.0, c2: 1.0 }, Diagonal::Zero).unwrap();
        let v = check_essential_selfadjointness(&m2, &r, 100).unwrap();
        assert_eq!(v.verdict, Verdict::Unknown);
    }

    #[test]
    fn tail_bounds_power() {
        let m = CoefficientModel::n_squared();
        let t = m.tail_bounds(100).unwrap();
        // sum_{m>100} 1/(2m(m-1)) = 1/200
        assert!(t.alpha >= 1.0 / 200.0 && t.alpha < 1.05 / 200.0, "{}", t.alpha);
        let k_sum: f64 = (101..200_000usize).map(|j| m.k(j).unwrap() - 1.0).sum();
        assert!(t.k >= k_sum && t.k < 1.1 * k_sum + 1e-5, "{} {}", t.k, k_sum);
        assert_eq!(t.beta, 0.0);
        assert!(t.certified);
    }
}

//! Complex numbers stored as `exp(ln_abs) * unit` with `|unit| = 1`.

use num_complex::Complex64;
use std::ops::{Div, Mul, Neg};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogComplex {
    pub ln_abs: f64,
    pub unit: Complex64,
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex { ln_abs: f64::NEG_INFINITY, unit: Complex64::new(1.0, 0.0) };
    pub const ONE: LogComplex = LogComplex { ln_abs: 0.0, unit: Complex64::new(1.0, 0.0) };

    pub fn new(ln_abs: f64, unit: Complex64) -> Self {
        let n = unit.norm();
        if n == 0.0 || !n.is_finite() {
            return Self::ZERO;
        }
        LogComplex { ln_abs, unit: unit / n }
    }

    pub fn from_polar(ln_abs: f64, arg: f64) -> Self {
        LogComplex { ln_abs, unit: Complex64::from_polar(1.0, arg) }
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    pub fn from_complex(z: Complex64) -> Self {
        let n = z.norm();
        if n == 0.0 {
            return Self::ZERO;
        }
        if n.is_finite() {
            return LogComplex { ln_abs: n.ln(), unit: z / n };
        }
        // rescale to avoid overflow in norm
        let s = z.re.abs().max(z.im.abs());
        let w = z / s;
        let m = w.norm();
        LogComplex { ln_abs: s.ln() + m.ln(), unit: w / m }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }

    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.unit * self.ln_abs.exp()
    }

    pub fn arg(&self) -> f64 {
        self.unit.arg()
    }

    pub fn conj(self) -> Self {
        LogComplex { ln_abs: self.ln_abs, unit: self.unit.conj() }
    }

    pub fn scale_ln(self, s: f64) -> Self {
        if self.is_zero() {
            return self;
        }
        LogComplex { ln_abs: self.ln_abs + s, unit: self.unit }
    }

    pub fn recip(self) -> Self {
        LogComplex { ln_abs: -self.ln_abs, unit: self.unit.conj() }
    }

    pub fn add(self, other: Self) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs { (self, other) } else { (other, self) };
        let s = big.unit + small.unit * (small.ln_abs - big.ln_abs).exp();
        let n = s.norm();
        if n == 0.0 {
            return Self::ZERO;
        }
        LogComplex { ln_abs: big.ln_abs + n.ln(), unit: s / n }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }

    /// Value relative to `exp(ln_ref)`.
    pub fn rescaled(self, ln_ref: f64) -> Complex64 {
        self.scale_ln(-ln_ref).to_complex()
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;
    fn mul(self, o: LogComplex) -> LogComplex {
        if self.is_zero() || o.is_zero() {
            return Self::ZERO;
        }
        let u = self.unit * o.unit;
        LogComplex { ln_abs: self.ln_abs + o.ln_abs, unit: u / u.norm() }
    }
}

impl Mul<Complex64> for LogComplex {
    type Output = LogComplex;
    fn mul(self, o: Complex64) -> LogComplex {
        self * LogComplex::from_complex(o)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;
    fn div(self, o: LogComplex) -> LogComplex {
        self * o.recip()
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;
    fn neg(self) -> LogComplex {
        LogComplex { ln_abs: self.ln_abs, unit: -self.unit }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_huge() {
        let z = Complex64::new(3.0, -4.0);
        let l = LogComplex::from_complex(z);
        assert!((l.ln_abs - 5f64.ln()).abs() < 1e-15);
        assert!((l.to_complex() - z).norm() < 1e-14);
        let big = LogComplex::from_complex(Complex64::new(1e308, 1e308));
        assert!(big.ln_abs.is_finite());
        let tiny = big.recip();
        assert!(((big * tiny).to_complex() - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn addition_cancels() {
        let a = LogComplex::from_real(2.0);
        assert!(a.sub(a).is_zero());
        let b = LogComplex::from_polar(1000.0, 0.3).add(LogComplex::from_polar(1000.0, 0.3));
        assert!((b.ln_abs - 1000.0 - 2f64.ln()).abs() < 1e-12);
        assert!((b.arg() - 0.3).abs() < 1e-15);
    }
}

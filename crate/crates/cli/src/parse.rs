use num_complex::Complex64;
use serde::Serialize;

/// Grids longer than this are rejected.
pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("cannot read `{s}` as {what}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} `{s}` is not finite"))
    }
}

/// Reads `3`, `-2.5i`, `i`, `1+1i`, `0.5-2e-3j` and the like.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty complex number".into());
    }
    let Some(body) = s.strip_suffix(['i', 'j']) else {
        return Ok(Complex64::new(number(&s, "a real number")?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (number(&body[..k], "a real part")?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => number(t, "an imaginary part")?,
    };
    Ok(Complex64::new(re, im))
}

/// Reads `lo:hi:step`.
pub fn parse_grid(text: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err(format!("grid `{text}` is not of the form lo:hi:step"));
    };
    let g = Grid { lo: number(lo, "grid start")?, hi: number(hi, "grid end")?, step: number(step, "grid step")? };
    if !(g.hi > g.lo) {
        return Err(format!("grid end {} must exceed start {}", g.hi, g.lo));
    }
    if !(g.step > 0.0) {
        return Err(format!("grid step {} must be positive", g.step));
    }
    if (g.hi - g.lo) / g.step >= MAX_GRID_POINTS as f64 {
        return Err(format!("grid has more than {MAX_GRID_POINTS} points"));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let c = |re, im| Complex64::new(re, im);
        for (s, v) in [
            ("1+1i", c(1.0, 1.0)),
            ("i", c(0.0, 1.0)),
            ("-i", c(0.0, -1.0)),
            ("2.5", c(2.5, 0.0)),
            ("-3j", c(0.0, -3.0)),
            ("1e-3-2e+1i", c(1e-3, -20.0)),
            (" 0.5 - i ", c(0.5, -1.0)),
            ("-1.5e2+i", c(-150.0, 1.0)),
        ] {
            assert_eq!(parse_complex(s).unwrap(), v, "{s}");
        }
        for bad in ["", "1+", "x", "1+2", "1i+2", "nan", "inf+1i", "++1i"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grids() {
        let g = parse_grid("-3:3:0.1").unwrap();
        assert_eq!(g.len(), 61);
        assert!((g.points()[60] - 3.0).abs() < 1e-12);
        assert_eq!(parse_grid("0:1:0.3").unwrap().len(), 4);
        for bad in ["0:1", "1:0:0.1", "0:1:0", "0:1:-1", "a:1:1", "0:1e9:1e-3"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}

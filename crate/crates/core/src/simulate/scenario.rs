//! Coefficient scenarios: group-specific coefficient functions written in a
//! small text grammar, `a*sin(pi*t) + b*cos(pi*t) + d*t + c`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// `sin * sin(pi t) + cos * cos(pi t) + slope * t + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoefExpr {
    pub sin: f64,
    pub cos: f64,
    pub slope: f64,
    pub constant: f64,
}

impl CoefExpr {
    pub const fn constant(c: f64) -> Self {
        CoefExpr {
            sin: 0.0,
            cos: 0.0,
            slope: 0.0,
            constant: c,
        }
    }

    pub const fn trig(sin: f64, cos: f64, constant: f64) -> Self {
        CoefExpr {
            sin,
            cos,
            slope: 0.0,
            constant,
        }
    }

    #[inline]
    pub fn eval(&self, tau: f64) -> f64 {
        let x = std::f64::consts::PI * tau;
        let mut v = self.constant;
        if self.sin != 0.0 {
            v += self.sin * x.sin();
        }
        if self.cos != 0.0 {
            v += self.cos * x.cos();
        }
        v + self.slope * tau
    }

    pub fn is_constant(&self) -> bool {
        self.sin == 0.0 && self.cos == 0.0 && self.slope == 0.0
    }
}

impl fmt::Display for CoefExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = [
            (self.sin, "*sin(pi*t)"),
            (self.cos, "*cos(pi*t)"),
            (self.slope, "*t"),
            (self.constant, ""),
        ];
        let mut first = true;
        for (coef, suffix) in terms {
            if coef == 0.0 {
                continue;
            }
            if first {
                write!(f, "{coef}{suffix}")?;
                first = false;
            } else if coef < 0.0 {
                write!(f, " - {}{suffix}", -coef)?;
            } else {
                write!(f, " + {coef}{suffix}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl FromStr for CoefExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::invalid("empty coefficient expression"));
        }
        // Split into signed terms at top-level '+'/'-' (not inside parentheses,
        // not part of an exponent).
        let bytes = compact.as_bytes();
        let mut terms = Vec::new();
        let mut start = 0;
        let mut depth = 0i32;
        for (i, &b) in bytes.iter().enumerate() {
            match b {
                b'(' => depth += 1,
                b')' => depth -= 1,
                b'+' | b'-' if depth == 0 && i > start => {
                    let prev = bytes[i - 1];
                    if prev == b'e' || prev == b'E' || prev == b'*' {
                        continue;
                    }
                    terms.push(&compact[start..i]);
                    start = i;
                }
                _ => {}
            }
        }
        terms.push(&compact[start..]);

        let mut out = CoefExpr::default();
        for term in terms {
            let (sign, body) = match term.as_bytes().first() {
                Some(b'+') => (1.0, &term[1..]),
                Some(b'-') => (-1.0, &term[1..]),
                _ => (1.0, term),
            };
            let (coef, basis) = match body.find('*') {
                Some(pos)
                    if body[..pos].parse::<f64>().is_ok()
                        && !body[..pos].eq_ignore_ascii_case("pi") =>
                {
                    (body[..pos].parse::<f64>().unwrap(), &body[pos + 1..])
                }
                _ => match body.parse::<f64>() {
                    Ok(v) => (v, ""),
                    Err(_) => (1.0, body),
                },
            };
            let coef = sign * coef;
            match basis {
                "" => out.constant += coef,
                "sin(pi*t)" => out.sin += coef,
                "cos(pi*t)" => out.cos += coef,
                "t" => out.slope += coef,
                other => {
                    return Err(Error::invalid(format!(
                        "unrecognized term `{other}` in `{s}`; expected sin(pi*t), cos(pi*t), t or a constant"
                    )))
                }
            }
        }
        if [out.sin, out.cos, out.slope, out.constant]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid(format!("non-finite coefficient in `{s}`")));
        }
        Ok(out)
    }
}

/// Group-specific coefficient functions `alpha_k(tau) = [network, momentum]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientScenario {
    groups: Vec<[CoefExpr; 2]>,
}

impl CoefficientScenario {
    pub fn new(groups: Vec<[CoefExpr; 2]>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("scenario needs at least one group"));
        }
        Ok(CoefficientScenario { groups })
    }

    /// Three groups with smoothly time-varying network and momentum effects.
    pub fn paper() -> Self {
        CoefficientScenario {
            groups: vec![
                [CoefExpr::trig(-0.95, 0.0, 0.0), CoefExpr::trig(0.0, -0.6, -0.3)],
                [CoefExpr::trig(-0.7, 0.0, 0.8), CoefExpr::trig(0.0, -0.5, 0.45)],
                [CoefExpr::trig(1.0, 0.0, -0.2), CoefExpr::trig(0.0, 0.9, 0.0)],
            ],
        }
    }

    /// As [`paper`](Self::paper) but with group 1 constant at `[-0.7, -0.6]`,
    /// used for size and power of the specification test.
    pub fn paper_test() -> Self {
        let mut s = Self::paper();
        s.groups[0] = [CoefExpr::constant(-0.7), CoefExpr::constant(-0.6)];
        s
    }

    /// Every group shares the same constant coefficients.
    pub fn constant(k: usize, network: f64, momentum: f64) -> Self {
        CoefficientScenario {
            groups: vec![[CoefExpr::constant(network), CoefExpr::constant(momentum)]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn exprs(&self) -> &[[CoefExpr; 2]] {
        &self.groups
    }

    #[inline]
    pub fn eval(&self, group: usize, tau: f64) -> [f64; 2] {
        let [a, b] = &self.groups[group];
        [a.eval(tau), b.eval(tau)]
    }

    /// Serializes as one `alpha<k>.<m> = <expr>` line per coefficient.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, [a, b]) in self.groups.iter().enumerate() {
            s.push_str(&format!("alpha{}.1 = {a}\n", k + 1));
            s.push_str(&format!("alpha{}.2 = {b}\n", k + 1));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries: Vec<[Option<CoefExpr>; 2]> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                file: "scenario".into(),
                row: lineno + 1,
                msg,
            };
            let (key, expr) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `alphaK.M = expr`".into()))?;
            let key = key.trim();
            let rest = key
                .strip_prefix("alpha")
                .ok_or_else(|| parse_err(format!("bad key `{key}`")))?;
            let (k, m) = rest
                .split_once('.')
                .and_then(|(k, m)| Some((k.parse::<usize>().ok()?, m.parse::<usize>().ok()?)))
                .filter(|&(k, m)| k >= 1 && (m == 1 || m == 2))
                .ok_or_else(|| parse_err(format!("bad key `{key}`")))?;
            let expr: CoefExpr = expr.trim().parse().map_err(|e: Error| parse_err(e.to_string()))?;
            if entries.len() < k {
                entries.resize(k, [None, None]);
            }
            entries[k - 1][m - 1] = Some(expr);
        }
        let groups = entries
            .into_iter()
            .enumerate()
            .map(|(k, [a, b])| match (a, b) {
                (Some(a), Some(b)) => Ok([a, b]),
                _ => Err(Error::invalid(format!("scenario group {} incomplete", k + 1))),
            })
            .collect::<Result<Vec<_>>>()?;
        CoefficientScenario::new(groups)
    }

    /// Parses `"<expr network> ; <expr momentum>"` per group.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let groups = pairs
            .iter()
            .map(|p| {
                let p = p.as_ref();
                let (a, b) = p
                    .split_once(';')
                    .ok_or_else(|| Error::invalid(format!("expected `expr ; expr`, got `{p}`")))?;
                Ok([a.trim().parse()?, b.trim().parse()?])
            })
            .collect::<Result<Vec<_>>>()?;
        CoefficientScenario::new(groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_values() {
        let s = CoefficientScenario::paper();
        let a = s.eval(0, 0.0);
        assert!(a[0].abs() < 1e-15 && (a[1] + 0.9).abs() < 1e-15);
        let b = s.eval(1, 0.5);
        assert!((b[0] - 0.1).abs() < 1e-12 && (b[1] - 0.45).abs() < 1e-12);
        let t = CoefficientScenario::paper_test();
        for tau in [0.0, 0.3, 1.0] {
            assert_eq!(t.eval(0, tau), [-0.7, -0.6]);
        }
    }

    #[test]
    fn parses_grammar() {
        let e: CoefExpr = "-0.6*cos(pi*t) - 0.3".parse().unwrap();
        assert_eq!(e, CoefExpr::trig(0.0, -0.6, -0.3));
        let e: CoefExpr = "sin(pi*t) + 2*t - 1e-1".parse().unwrap();
        assert_eq!(e.sin, 1.0);
        assert_eq!(e.slope, 2.0);
        assert!((e.constant + 0.1).abs() < 1e-15);
        assert!("3*exp(t)".parse::<CoefExpr>().is_err());
        assert!("".parse::<CoefExpr>().is_err());
    }

    #[test]
    fn text_round_trip_paper() {
        let s = CoefficientScenario::paper();
        assert_eq!(CoefficientScenario::from_text(&s.to_text()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0) {
            let e = CoefExpr { sin: a, cos: b, slope: d, constant: c };
            let back: CoefExpr = e.to_string().parse().unwrap();
            prop_assert_eq!(back, e);
        }
    }
}

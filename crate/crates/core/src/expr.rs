//! Closed-form coefficient expressions.
//!
//! Coefficient pieces are sums of constants, polynomials, and `sin`, `cos`,
//! `exp` of affine arguments. The class is closed under differentiation and
//! admits rigorous range enclosures through [`Interval`] arithmetic, which is
//! what the discretization error bounds are built on.

use serde_json::{json, Map, Value};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` used for range enclosures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn entire() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn scale(self, c: f64) -> Self {
        if c >= 0.0 {
            Self::new(c * self.lo, c * self.hi)
        } else {
            Self::new(c * self.hi, c * self.lo)
        }
    }

    pub fn exp(self) -> Self {
        Self::new(self.lo.exp(), self.hi.exp())
    }

    pub fn hull(self, o: Self) -> Self {
        Self::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }
}

// 0 * inf is taken as 0: the zero factor is exact in every use here.
impl std::ops::Add for Interval {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }
}

impl std::ops::Neg for Interval {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }
}

impl std::ops::Sub for Interval {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + -o
    }
}

impl std::ops::Mul for Interval {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let p = [
            mul_ext(self.lo, o.lo),
            mul_ext(self.lo, o.hi),
            mul_ext(self.hi, o.lo),
            mul_ext(self.hi, o.hi),
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo, hi)
    }
}

/// Division by an interval that does not contain zero; otherwise the result
/// is the whole line.
impl std::ops::Div for Interval {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        if o.contains(0.0) {
            return Self::entire();
        }
        self * Self::new(1.0 / o.hi, 1.0 / o.lo)
    }
}

fn mul_ext(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Range of `sin` over `[u0, u1]`.
fn sin_range(u0: f64, u1: f64) -> Interval {
    if !u0.is_finite() || !u1.is_finite() || u1 - u0 >= 2.0 * PI {
        return Interval::new(-1.0, 1.0);
    }
    let (s0, s1) = (u0.sin(), u1.sin());
    let mut lo = s0.min(s1);
    let mut hi = s0.max(s1);
    let k_max = ((u0 - FRAC_PI_2) / (2.0 * PI)).ceil();
    if FRAC_PI_2 + 2.0 * PI * k_max <= u1 {
        hi = 1.0;
    }
    let k_min = ((u0 + FRAC_PI_2) / (2.0 * PI)).ceil();
    if -FRAC_PI_2 + 2.0 * PI * k_min <= u1 {
        lo = -1.0;
    }
    Interval::new(lo, hi)
}

/// A coefficient expression in the variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// `Σ c_i x^i`
    Poly(Vec<f64>),
    /// `amp · sin(freq · x + phase)`
    Sin { amp: f64, freq: f64, phase: f64 },
    /// `amp · cos(freq · x + phase)`
    Cos { amp: f64, freq: f64, phase: f64 },
    /// `amp · exp(rate · x + shift)`
    Exp { amp: f64, rate: f64, shift: f64 },
    Sum(Vec<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Poly(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            Expr::Sin { amp, freq, phase } => amp * (freq * x + phase).sin(),
            Expr::Cos { amp, freq, phase } => amp * (freq * x + phase).cos(),
            Expr::Exp { amp, rate, shift } => amp * (rate * x + shift).exp(),
            Expr::Sum(terms) => terms.iter().map(|e| e.eval(x)).sum(),
        }
    }

    pub fn derivative(&self) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Poly(c) => {
                if c.len() <= 1 {
                    Expr::Const(0.0)
                } else {
                    Expr::Poly(c.iter().enumerate().skip(1).map(|(i, ci)| i as f64 * ci).collect())
                }
            }
            Expr::Sin { amp, freq, phase } => Expr::Cos { amp: amp * freq, freq: *freq, phase: *phase },
            Expr::Cos { amp, freq, phase } => Expr::Sin { amp: -amp * freq, freq: *freq, phase: *phase },
            Expr::Exp { amp, rate, shift } => Expr::Exp { amp: amp * rate, rate: *rate, shift: *shift },
            Expr::Sum(terms) => Expr::Sum(terms.iter().map(Expr::derivative).collect()),
        }
    }

    /// `Some(c)` when the expression is identically the constant `c`.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Poly(c) => {
                if c.iter().skip(1).all(|&ci| ci == 0.0) {
                    Some(c.first().copied().unwrap_or(0.0))
                } else {
                    None
                }
            }
            Expr::Sin { amp, freq, phase } => {
                if *amp == 0.0 {
                    Some(0.0)
                } else if *freq == 0.0 {
                    Some(amp * phase.sin())
                } else {
                    None
                }
            }
            Expr::Cos { amp, freq, phase } => {
                if *amp == 0.0 {
                    Some(0.0)
                } else if *freq == 0.0 {
                    Some(amp * phase.cos())
                } else {
                    None
                }
            }
            Expr::Exp { amp, rate, shift } => {
                if *amp == 0.0 {
                    Some(0.0)
                } else if *rate == 0.0 {
                    Some(amp * shift.exp())
                } else {
                    None
                }
            }
            Expr::Sum(terms) => terms.iter().map(Expr::as_constant).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// Enclosure of the values taken on `[lo, hi]` (bounds may be infinite).
    pub fn range(&self, lo: f64, hi: f64) -> Interval {
        if let Some(c) = self.as_constant() {
            return Interval::point(c);
        }
        match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Poly(c) => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Interval::entire();
                }
                let x = Interval::new(lo, hi);
                c.iter()
                    .rev()
                    .fold(Interval::point(0.0), |acc, &ci| acc * x + Interval::point(ci))
            }
            Expr::Sin { amp, freq, phase } => {
                let (u0, u1) = affine_image(*freq, *phase, lo, hi);
                sin_range(u0, u1).scale(*amp)
            }
            Expr::Cos { amp, freq, phase } => {
                let (u0, u1) = affine_image(*freq, *phase, lo, hi);
                sin_range(u0 + FRAC_PI_2, u1 + FRAC_PI_2).scale(*amp)
            }
            Expr::Exp { amp, rate, shift } => {
                let (u0, u1) = affine_image(*rate, *shift, lo, hi);
                Interval::new(u0, u1).exp().scale(*amp)
            }
            Expr::Sum(terms) => terms
                .iter()
                .fold(Interval::point(0.0), |acc, e| acc + e.range(lo, hi)),
        }
    }

    /// Parse from the JSON form used in coefficient documents.
    ///
    /// A bare number is a constant; otherwise an object with exactly one of
    /// the keys `const`, `poly`, `sin`, `cos`, `exp`, `sum`.
    pub fn from_json(v: &Value) -> Result<Self> {
        if let Some(c) = v.as_f64() {
            return Ok(Expr::Const(c));
        }
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Parse(format!("expected number or expression object, got {v}")))?;
        if obj.len() != 1 {
            return Err(Error::Parse(format!("expression object must have exactly one key, got {v}")));
        }
        let (key, body) = obj.iter().next().expect("one key");
        match key.as_str() {
            "const" => body
                .as_f64()
                .map(Expr::Const)
                .ok_or_else(|| Error::Parse(format!("const expects a number, got {body}"))),
            "poly" => {
                let coeffs = body
                    .as_array()
                    .ok_or_else(|| Error::Parse(format!("poly expects an array, got {body}")))?
                    .iter()
                    .map(|c| c.as_f64().ok_or_else(|| Error::Parse(format!("poly coefficient {c}"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Expr::Poly(coeffs))
            }
            "sin" | "cos" => {
                let amp = field(body, "amp", 1.0)?;
                let freq = field(body, "freq", 1.0)?;
                let phase = field(body, "phase", 0.0)?;
                Ok(if key == "sin" {
                    Expr::Sin { amp, freq, phase }
                } else {
                    Expr::Cos { amp, freq, phase }
                })
            }
            "exp" => Ok(Expr::Exp {
                amp: field(body, "amp", 1.0)?,
                rate: field(body, "rate", 1.0)?,
                shift: field(body, "shift", 0.0)?,
            }),
            "sum" => {
                let terms = body
                    .as_array()
                    .ok_or_else(|| Error::Parse(format!("sum expects an array, got {body}")))?
                    .iter()
                    .map(Expr::from_json)
                    .collect::<Result<Vec<_>>>()?;
                Ok(Expr::Sum(terms))
            }
            other => Err(Error::Parse(format!("unknown expression kind `{other}`"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Expr::Const(c) => json!(c),
            Expr::Poly(c) => json!({ "poly": c }),
            Expr::Sin { amp, freq, phase } => json!({ "sin": { "amp": amp, "freq": freq, "phase": phase } }),
            Expr::Cos { amp, freq, phase } => json!({ "cos": { "amp": amp, "freq": freq, "phase": phase } }),
            Expr::Exp { amp, rate, shift } => json!({ "exp": { "amp": amp, "rate": rate, "shift": shift } }),
            Expr::Sum(terms) => json!({ "sum": terms.iter().map(Expr::to_json).collect::<Vec<_>>() }),
        }
    }
}

fn affine_image(slope: f64, offset: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = mul_ext(slope, lo) + offset;
    let b = mul_ext(slope, hi) + offset;
    (a.min(b), a.max(b))
}

fn field(body: &Value, name: &str, default: f64) -> Result<f64> {
    let obj: &Map<String, Value> = body
        .as_object()
        .ok_or_else(|| Error::Parse(format!("expected an object of parameters, got {body}")))?;
    match obj.get(name) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| Error::Parse(format!("`{name}` must be a number, got {v}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_max_min(e: &Expr, lo: f64, hi: f64) -> (f64, f64) {
        let n = 10_000;
        (0..=n)
            .map(|i| e.eval(lo + (hi - lo) * i as f64 / n as f64))
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(mx, mn), v| (mx.max(v), mn.min(v)))
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e = Expr::Sum(vec![
            Expr::Const(2.0),
            Expr::Poly(vec![0.5, -1.0, 0.25]),
            Expr::Sin { amp: 1.5, freq: 2.0, phase: 0.3 },
            Expr::Cos { amp: -0.5, freq: 0.7, phase: 1.0 },
            Expr::Exp { amp: 0.1, rate: -0.4, shift: 0.2 },
        ]);
        let d = e.derivative();
        for &x in &[-2.0, -0.3, 0.0, 0.9, 3.1] {
            let h = 1e-5;
            let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
            assert!((fd - d.eval(x)).abs() < 1e-8, "x={x}: {fd} vs {}", d.eval(x));
        }
    }

    #[test]
    fn range_encloses_samples() {
        let cases = [
            Expr::Sum(vec![Expr::Const(2.0), Expr::Sin { amp: 1.0, freq: 1.0, phase: 0.0 }]),
            Expr::Sum(vec![Expr::Const(5.0), Expr::Sin { amp: 1.0, freq: 1.0, phase: PI }]),
            Expr::Poly(vec![1.0, -2.0, 0.5, 0.1]),
            Expr::Cos { amp: 2.0, freq: -3.0, phase: 0.2 },
            Expr::Exp { amp: -1.0, rate: 0.5, shift: 0.0 },
        ];
        for e in &cases {
            for &(lo, hi) in &[(-3.0, -1.0), (-0.1, 0.4), (0.0, 5.0), (2.0, 2.05)] {
                let r = e.range(lo, hi);
                let (mx, mn) = sample_max_min(e, lo, hi);
                assert!(r.lo <= mn + 1e-12 && mx <= r.hi + 1e-12, "{e:?} on [{lo},{hi}]: {r:?} vs [{mn},{mx}]");
            }
        }
    }

    #[test]
    fn sin_range_is_tight() {
        let r = Expr::Sin { amp: 1.0, freq: 1.0, phase: 0.0 }.range(0.0, PI);
        assert!((r.lo - 0.0).abs() < 1e-15 && r.hi == 1.0);
        let r = Expr::Sin { amp: 1.0, freq: 1.0, phase: 0.0 }.range(f64::NEG_INFINITY, 0.0);
        assert_eq!(r, Interval::new(-1.0, 1.0));
    }

    #[test]
    fn json_round_trip() {
        let v: Value = serde_json::from_str(r#"{"sum": [2, {"sin": {"freq": 1}}, {"poly": [0, 1]}]}"#).unwrap();
        let e = Expr::from_json(&v).unwrap();
        assert_eq!(Expr::from_json(&e.to_json()).unwrap(), e);
        assert!((e.eval(0.5) - (2.0 + 0.5f64.sin() + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_kinds() {
        let v: Value = serde_json::from_str(r#"{"tan": {}}"#).unwrap();
        assert!(Expr::from_json(&v).is_err());
        let v: Value = serde_json::from_str(r#"{"sin": {}, "cos": {}}"#).unwrap();
        assert!(Expr::from_json(&v).is_err());
    }

    #[test]
    fn constant_detection() {
        assert_eq!(Expr::Sum(vec![Expr::Const(1.0), Expr::Poly(vec![2.0])]).as_constant(), Some(3.0));
        assert_eq!(Expr::Sin { amp: 1.0, freq: 1.0, phase: 0.0 }.as_constant(), None);
    }
}

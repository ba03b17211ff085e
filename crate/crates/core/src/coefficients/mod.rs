//! Piecewise-smooth coefficients `(a, ρ, b)` of the operator
//! `L = (ρ/2) d/dx (a d/dx) + b d/dx`, together with drift removal, scale and
//! speed, step approximation and the map to natural scale.

mod discretize;
mod drift;
mod phi;
mod scale;

pub use discretize::{discretize, DiscretizeOptions, MeshRule, SamplePoint, StepCoefficients};
pub use drift::{remove_drift, DriftPotential};
pub use phi::{build_phi, PhiMap};
pub use scale::ScaleData;

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::{Expr, Interval};

/// Breakpoints closer than `MIN_GAP · max(1, |x|)` are rejected.
pub const MIN_GAP: f64 = 1e-9;

/// Boundary behaviour at an end of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Absorbing end.
    Dirichlet,
    /// Reflecting end.
    Neumann,
    /// Infinite end.
    Open,
    /// Artificial absorbing end introduced by localization.
    Barrier,
}

impl Boundary {
    pub fn is_absorbing(self) -> bool {
        matches!(self, Boundary::Dirichlet | Boundary::Barrier)
    }

    fn as_str(self) -> &'static str {
        match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Neumann => "neumann",
            Boundary::Open => "none",
            Boundary::Barrier => "barrier",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Boundary::Dirichlet),
            "neumann" => Ok(Boundary::Neumann),
            "none" => Ok(Boundary::Open),
            "barrier" => Ok(Boundary::Barrier),
            other => Err(Error::Parse(format!("unknown boundary condition `{other}`"))),
        }
    }
}

/// One coefficient function on a piece.
#[derive(Debug, Clone)]
pub enum Profile {
    Expr(Expr),
    /// `base(x) · exp(sign · Ψ(x))`, produced by drift removal.
    Weighted { base: Expr, sign: f64, psi: Arc<DriftPotential> },
}

impl From<Expr> for Profile {
    fn from(e: Expr) -> Self {
        Profile::Expr(e)
    }
}

impl From<f64> for Profile {
    fn from(c: f64) -> Self {
        Profile::Expr(Expr::Const(c))
    }
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Expr(e) => e.eval(x),
            Profile::Weighted { base, sign, psi } => base.eval(x) * (sign * psi.eval(x)).exp(),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Profile::Expr(e) => e.as_constant(),
            Profile::Weighted { .. } => None,
        }
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match self {
            Profile::Expr(e) => Some(e),
            Profile::Weighted { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// Enclosure of the values on `[lo, hi]`.
    pub fn range(&self, lo: f64, hi: f64) -> Interval {
        match self {
            Profile::Expr(e) => e.range(lo, hi),
            Profile::Weighted { base, sign, psi } => {
                base.range(lo, hi) * psi.range(lo, hi).scale(*sign).exp()
            }
        }
    }

    /// Enclosure of the derivative on `[lo, hi]`.
    pub fn derivative_range(&self, lo: f64, hi: f64) -> Interval {
        match self {
            Profile::Expr(e) => e.derivative().range(lo, hi),
            Profile::Weighted { base, sign, psi } => {
                let inner = base.derivative().range(lo, hi) + (base.range(lo, hi) * psi.slope_range(lo, hi)).scale(*sign);
                inner * psi.range(lo, hi).scale(*sign).exp()
            }
        }
    }

    /// Range enclosure tightened by splitting `[lo, hi]` into `2^depth` parts.
    pub fn refined_range(&self, lo: f64, hi: f64, depth: u32) -> Interval {
        if !(lo.is_finite() && hi.is_finite()) || depth == 0 {
            return self.range(lo, hi);
        }
        let n = 1usize << depth;
        let w = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let a = lo + i as f64 * w;
                let b = if i + 1 == n { hi } else { a + w };
                self.range(a, b)
            })
            .reduce(Interval::hull)
            .expect("at least one part")
    }

    pub fn to_json(&self) -> Value {
        match self {
            Profile::Expr(e) => e.to_json(),
            Profile::Weighted { base, sign, .. } => json!({ "weighted": { "base": base.to_json(), "sign": sign } }),
        }
    }
}

/// Coefficients on one piece `[start, next start)`.
#[derive(Debug, Clone)]
pub struct Piece {
    pub start: f64,
    pub a: Profile,
    pub rho: Profile,
    pub b: Profile,
}

impl Piece {
    pub fn new(start: f64, a: impl Into<Profile>, rho: impl Into<Profile>, b: impl Into<Profile>) -> Self {
        Self { start, a: a.into(), rho: rho.into(), b: b.into() }
    }

    pub fn is_constant(&self) -> bool {
        self.a.as_constant().is_some() && self.rho.as_constant().is_some() && self.b.as_constant().is_some()
    }
}

/// Piecewise-smooth coefficients on an interval of the line.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub left: f64,
    pub right: f64,
    pub bc_left: Boundary,
    pub bc_right: Boundary,
    pub pieces: Vec<Piece>,
    /// Declared lower bound for `a` and `ρ`.
    pub lambda: Option<f64>,
    /// Declared upper bound for `a`, `ρ` and `|b|`.
    pub upper: Option<f64>,
}

/// Category of a validation failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Domain,
    Ends,
    Breakpoints,
    Ellipticity,
    Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub piece: Option<usize>,
    pub message: String,
}

/// Outcome of [`Coefficients::validate`].
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Ellipticity constants in force (declared or enclosed).
    pub lambda: f64,
    pub upper: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, piece: Option<usize>, message: String) {
        self.violations.push(Violation { kind, piece, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid (lambda = {}, Lambda = {})", self.lambda, self.upper);
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match v.piece {
                Some(k) => write!(f, "{:?} (piece {k}): {}", v.kind, v.message)?,
                None => write!(f, "{:?}: {}", v.kind, v.message)?,
            }
        }
        Ok(())
    }
}

const RANGE_DEPTH: u32 = 8;

impl Coefficients {
    /// Assemble coefficients. The first piece must start at `left`.
    pub fn new(left: f64, right: f64, bc_left: Boundary, bc_right: Boundary, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidCoefficients("no pieces".into()));
        }
        if !(left < right) {
            return Err(Error::InvalidCoefficients(format!("empty domain [{left}, {right}]")));
        }
        if pieces[0].start != left {
            return Err(Error::InvalidCoefficients(format!(
                "first piece starts at {} but the domain starts at {left}",
                pieces[0].start
            )));
        }
        Ok(Self { left, right, bc_left, bc_right, pieces, lambda: None, upper: None })
    }

    /// Constant `(a, ρ)` on the whole line.
    pub fn constant(a: f64, rho: f64) -> Self {
        Self {
            left: f64::NEG_INFINITY,
            right: f64::INFINITY,
            bc_left: Boundary::Open,
            bc_right: Boundary::Open,
            pieces: vec![Piece::new(f64::NEG_INFINITY, a, rho, 0.0)],
            lambda: None,
            upper: None,
        }
    }

    /// Piecewise-constant driftless coefficients; `starts[0]` must equal `left`.
    pub fn piecewise_constant(
        left: f64,
        right: f64,
        bc: (Boundary, Boundary),
        starts: &[f64],
        a: &[f64],
        rho: &[f64],
    ) -> Result<Self> {
        if starts.len() != a.len() || starts.len() != rho.len() {
            return Err(Error::InvalidCoefficients("mismatched piece arrays".into()));
        }
        let pieces = starts.iter().zip(a).zip(rho).map(|((&s, &a), &r)| Piece::new(s, a, r, 0.0)).collect();
        Self::new(left, right, bc.0, bc.1, pieces)
    }

    pub fn with_bounds(mut self, lambda: f64, upper: f64) -> Self {
        self.lambda = Some(lambda);
        self.upper = Some(upper);
        self
    }

    pub fn is_bounded(&self) -> bool {
        self.left.is_finite() && self.right.is_finite()
    }

    pub fn has_drift(&self) -> bool {
        self.pieces.iter().any(|p| !p.b.is_zero())
    }

    pub fn piece_end(&self, k: usize) -> f64 {
        self.pieces.get(k + 1).map_or(self.right, |p| p.start)
    }

    /// Index of the piece containing `x` (pieces are closed on the left).
    pub fn piece_index(&self, x: f64) -> usize {
        self.pieces.partition_point(|p| p.start <= x).saturating_sub(1)
    }

    /// `(a, ρ, b)` at `x`; outside the domain the extension `(1, 1, 0)` is used.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        if x < self.left || x > self.right {
            return (1.0, 1.0, 0.0);
        }
        let p = &self.pieces[self.piece_index(x)];
        (p.a.eval(x), p.rho.eval(x), p.b.eval(x))
    }

    /// Smallest gap between consecutive breakpoints (including finite ends).
    pub fn min_gap(&self) -> f64 {
        (0..self.pieces.len()).map(|k| self.piece_end(k) - self.pieces[k].start).fold(f64::INFINITY, f64::min)
    }

    /// Check domain, boundary tags, breakpoint spacing and ellipticity.
    pub fn validate(&self) -> ValidationReport {
        use ViolationKind::*;
        let mut r = ValidationReport::default();
        if self.left.is_nan() || self.right.is_nan() || !(self.left < self.right) {
            r.push(Domain, None, format!("domain [{}, {}] is empty or undefined", self.left, self.right));
            return r;
        }
        for (end, x, bc) in [("left", self.left, self.bc_left), ("right", self.right, self.bc_right)] {
            match (x.is_finite(), bc) {
                (true, Boundary::Open) => {
                    r.push(Ends, None, format!("{end} end {x} is finite but has no boundary condition"))
                }
                (false, b) if b != Boundary::Open => {
                    r.push(Ends, None, format!("{end} end is infinite but carries a {b:?} condition"))
                }
                _ => {}
            }
        }
        if self.pieces.is_empty() || self.pieces[0].start != self.left {
            r.push(Breakpoints, None, "the first piece must start at the left end".into());
            return r;
        }
        for k in 0..self.pieces.len() {
            let (lo, hi) = (self.pieces[k].start, self.piece_end(k));
            let gap = MIN_GAP * 1f64.max(lo.abs()).max(if hi.is_finite() { hi.abs() } else { 0.0 });
            if lo.is_nan() || hi.is_nan() || !(hi - lo >= gap) || (k > 0 && !lo.is_finite()) {
                r.push(
                    Breakpoints,
                    Some(k),
                    format!("piece [{lo}, {hi}] is empty, unordered or narrower than the minimal gap"),
                );
            }
        }
        if r.violations.iter().any(|v| v.kind == Breakpoints) {
            return r;
        }

        let mut lam = f64::INFINITY;
        let mut up: f64 = 0.0;
        for (k, p) in self.pieces.iter().enumerate() {
            let (lo, hi) = (p.start, self.piece_end(k));
            let ra = p.a.refined_range(lo, hi, RANGE_DEPTH);
            let rr = p.rho.refined_range(lo, hi, RANGE_DEPTH);
            let rb = p.b.refined_range(lo, hi, RANGE_DEPTH);
            for (name, rg) in [("a", ra), ("rho", rr), ("b", rb)] {
                if rg.lo.is_nan() || rg.hi.is_nan() {
                    r.push(Bound, Some(k), format!("{name} is not finite on [{lo}, {hi}]"));
                }
            }
            lam = lam.min(ra.lo).min(rr.lo);
            up = up.max(ra.hi).max(rr.hi).max(rb.mag());
            if let Some(l) = self.lambda {
                for (name, rg) in [("a", ra), ("rho", rr)] {
                    if rg.lo < l {
                        r.push(Ellipticity, Some(k), format!("{name} may drop to {} < lambda = {l}", rg.lo));
                    }
                }
            }
            if let Some(u) = self.upper {
                for (name, m) in [("a", ra.hi), ("rho", rr.hi), ("|b|", rb.mag())] {
                    if m > u {
                        r.push(Bound, Some(k), format!("{name} may reach {m} > Lambda = {u}"));
                    }
                }
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                r.push(Ellipticity, None, format!("declared lambda = {l} is not positive"));
            }
            lam = l;
        } else if !(lam > 0.0) {
            r.push(Ellipticity, None, format!("a or rho is not bounded below by a positive constant (enclosure {lam})"));
        }
        if let Some(u) = self.upper {
            up = u;
        } else if !up.is_finite() {
            r.push(Bound, None, "a, rho or b is unbounded".into());
        }
        r.lambda = lam;
        r.upper = up;
        r
    }

    /// Error out unless the coefficients validate.
    pub fn validated(&self) -> Result<ValidationReport> {
        let r = self.validate();
        if r.is_valid() {
            Ok(r)
        } else {
            Err(Error::InvalidCoefficients(r.to_string()))
        }
    }

    /// Cut an infinite domain down to `[lo, hi]`; infinite ends become
    /// absorbing barriers, finite ends are kept.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let (left, bc_left) = if self.left.is_finite() { (self.left, self.bc_left) } else { (lo, Boundary::Barrier) };
        let (right, bc_right) =
            if self.right.is_finite() { (self.right, self.bc_right) } else { (hi, Boundary::Barrier) };
        if !(left < right) || !left.is_finite() || !right.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot restrict to [{lo}, {hi}]")));
        }
        let mut pieces = Vec::new();
        for (k, p) in self.pieces.iter().enumerate() {
            let end = self.piece_end(k);
            if end <= left || p.start >= right {
                continue;
            }
            let mut q = p.clone();
            q.start = q.start.max(left);
            pieces.push(q);
        }
        // Drop a sliver piece created by the cut.
        if pieces.len() > 1 && pieces[1].start - left < MIN_GAP * left.abs().max(1.0) {
            let first = pieces.remove(0);
            pieces[0].start = first.start;
        }
        if let Some(last) = pieces.last() {
            if pieces.len() > 1 && right - last.start < MIN_GAP * right.abs().max(1.0) {
                pieces.pop();
            }
        }
        Ok(Self { left, right, bc_left, bc_right, pieces, lambda: self.lambda, upper: self.upper })
    }

    /// Localize infinite ends to a window that a path started in `[x_lo, x_hi]`
    /// leaves before `horizon` with probability below `LOCALIZATION_TAIL`.
    pub fn localized(&self, x_lo: f64, x_hi: f64, horizon: f64) -> Result<Self> {
        if self.is_bounded() {
            return Ok(self.clone());
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument("localizing an infinite domain needs a finite horizon".into()));
        }
        let r = self.validated()?;
        let radius = localization_radius(r.upper, horizon);
        self.restrict(x_lo - radius, x_hi + radius)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)?;
        Self::from_json(&v)
    }

    /// Parse a coefficient document:
    /// `{"domain": [l, r], "bc": [.., ..], "pieces": [{"x", "a", "rho", "b"}], "lambda", "Lambda"}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("coefficient document must be an object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "domain" | "bc" | "pieces" | "lambda" | "Lambda" | "name" | "description") {
                return Err(Error::Parse(format!("unknown key `{key}`")));
            }
        }
        let domain = obj
            .get("domain")
            .and_then(Value::as_array)
            .filter(|d| d.len() == 2)
            .ok_or_else(|| Error::Parse("`domain` must be a two-element array".into()))?;
        let left = parse_extended(&domain[0])?;
        let right = parse_extended(&domain[1])?;

        let bc_default = |x: f64| if x.is_finite() { Boundary::Dirichlet } else { Boundary::Open };
        let (mut bc_left, mut bc_right) = (bc_default(left), bc_default(right));
        if let Some(bc) = obj.get("bc") {
            let arr = bc
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::Parse("`bc` must be a two-element array".into()))?;
            let tag = |v: &Value, x: f64| -> Result<Boundary> {
                match v {
                    Value::Null => Ok(bc_default(x)),
                    Value::String(s) => Boundary::parse(s),
                    other => Err(Error::Parse(format!("boundary condition must be a string, got {other}"))),
                }
            };
            bc_left = tag(&arr[0], left)?;
            bc_right = tag(&arr[1], right)?;
        }

        let raw = obj
            .get("pieces")
            .and_then(Value::as_array)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| Error::Parse("`pieces` must be a non-empty array".into()))?;
        let mut pieces = Vec::with_capacity(raw.len());
        for (k, p) in raw.iter().enumerate() {
            let po = p.as_object().ok_or_else(|| Error::Parse(format!("piece {k} must be an object")))?;
            for key in po.keys() {
                if !matches!(key.as_str(), "x" | "a" | "rho" | "b") {
                    return Err(Error::Parse(format!("piece {k}: unknown key `{key}`")));
                }
            }
            let start = match po.get("x") {
                Some(x) => parse_extended(x)?,
                None if k == 0 => left,
                None => return Err(Error::Parse(format!("piece {k} is missing its start `x`"))),
            };
            let a = Expr::from_json(po.get("a").ok_or_else(|| Error::Parse(format!("piece {k} is missing `a`")))?)?;
            let rho = po.get("rho").map(Expr::from_json).transpose()?.unwrap_or(Expr::Const(1.0));
            let b = po.get("b").map(Expr::from_json).transpose()?.unwrap_or(Expr::Const(0.0));
            pieces.push(Piece::new(start, a, rho, b));
        }
        let mut c = Self::new(left, right, bc_left, bc_right, pieces)?;
        c.lambda = obj.get("lambda").map(parse_number).transpose()?;
        c.upper = obj.get("Lambda").map(parse_number).transpose()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("domain".into(), json!([extended_json(self.left), extended_json(self.right)]));
        m.insert("bc".into(), json!([self.bc_left.as_str(), self.bc_right.as_str()]));
        let pieces: Vec<Value> = self
            .pieces
            .iter()
            .map(|p| {
                json!({ "x": extended_json(p.start), "a": p.a.to_json(), "rho": p.rho.to_json(), "b": p.b.to_json() })
            })
            .collect();
        m.insert("pieces".into(), Value::Array(pieces));
        if let Some(l) = self.lambda {
            m.insert("lambda".into(), json!(l));
        }
        if let Some(u) = self.upper {
            m.insert("Lambda".into(), json!(u));
        }
        Value::Object(m)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().to_string().as_bytes()))
    }
}

/// Target probability of reaching a localization barrier.
pub const LOCALIZATION_TAIL: f64 = 1e-9;

/// Half-width `R` with `exp(-R² / (2 Λ² T)) ≤ LOCALIZATION_TAIL`, plus the
/// largest displacement a drift bounded by `Λ` can produce in time `T`.
pub fn localization_radius(upper: f64, horizon: f64) -> f64 {
    upper * (2.0 * horizon * (1.0 / LOCALIZATION_TAIL).ln()).sqrt() + upper * horizon
}

fn parse_number(v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::Parse(format!("expected a number, got {v}")))
}

fn parse_extended(v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => match s.trim() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => other.parse().map_err(|_| Error::Parse(format!("not a number: `{other}`"))),
        },
        other => parse_number(other),
    }
}

fn extended_json(x: f64) -> Value {
    if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_valued() -> Coefficients {
        Coefficients::piecewise_constant(
            -1.0,
            1.0,
            (Boundary::Dirichlet, Boundary::Dirichlet),
            &[-1.0, 0.0],
            &[1.0, 4.0],
            &[1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn eval_is_right_continuous_and_extended() {
        let c = two_valued();
        assert_eq!(c.eval(-0.5).0, 1.0);
        assert_eq!(c.eval(0.0).0, 4.0);
        assert_eq!(c.eval(1.0).0, 4.0);
        assert_eq!(c.eval(2.0), (1.0, 1.0, 0.0));
    }

    #[test]
    fn validation_accepts_and_reports_bounds() {
        let r = two_valued().validate();
        assert!(r.is_valid(), "{r}");
        assert_eq!(r.lambda, 1.0);
        assert_eq!(r.upper, 4.0);
    }

    #[test]
    fn validation_rejects_close_breakpoints() {
        let c = Coefficients::piecewise_constant(
            -1.0,
            1.0,
            (Boundary::Dirichlet, Boundary::Dirichlet),
            &[-1.0, 0.0, 1e-16],
            &[1.0, 2.0, 3.0],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let r = c.validate();
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::Breakpoints && v.piece == Some(1)));
    }

    #[test]
    fn validation_rejects_degenerate_diffusion() {
        let c = Coefficients::piecewise_constant(
            -1.0,
            1.0,
            (Boundary::Dirichlet, Boundary::Dirichlet),
            &[-1.0, 0.0],
            &[1.0, 0.0],
            &[1.0, 1.0],
        )
        .unwrap();
        assert!(!c.validate().is_valid());
        let c = two_valued().with_bounds(2.0, 10.0);
        let r = c.validate();
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::Ellipticity && v.piece == Some(0)));
    }

    #[test]
    fn validation_checks_boundary_tags() {
        let mut c = two_valued();
        c.bc_left = Boundary::Open;
        assert!(c.validate().violations.iter().any(|v| v.kind == ViolationKind::Ends));
    }

    #[test]
    fn json_round_trip_and_digest() {
        let doc = r#"{"domain": ["-inf", "inf"], "pieces": [
            {"a": {"sum": [2, {"sin": {"amp": 1, "freq": 1, "phase": 0}}]}},
            {"x": 0, "a": {"sum": [5, {"sin": {"amp": 1, "freq": 1, "phase": 3.141592653589793}}]}}]}"#;
        let c = Coefficients::from_json_str(doc).unwrap();
        assert_eq!(c.bc_left, Boundary::Open);
        assert!((c.eval(-std::f64::consts::FRAC_PI_2).0 - 1.0).abs() < 1e-15);
        let again = Coefficients::from_json(&c.to_json()).unwrap();
        assert_eq!(c.digest(), again.digest());
        assert!(c.validate().is_valid());
    }

    #[test]
    fn json_rejects_unknown_keys() {
        assert!(Coefficients::from_json_str(r#"{"domain": [0, 1], "pieces": [{"a": 1, "c": 2}]}"#).is_err());
        assert!(Coefficients::from_json_str(r#"{"domain": [0, 1], "pieces": [], "bc": ["dirichlet", "neumann"]}"#).is_err());
    }

    #[test]
    fn localization_keeps_finite_ends() {
        let c = Coefficients::from_json_str(
            r#"{"domain": [0, "inf"], "bc": ["neumann", null], "pieces": [{"a": 1}, {"x": 2, "a": 3}]}"#,
        )
        .unwrap();
        let l = c.localized(0.5, 0.5, 1.0).unwrap();
        assert_eq!(l.left, 0.0);
        assert_eq!(l.bc_left, Boundary::Neumann);
        assert_eq!(l.bc_right, Boundary::Barrier);
        assert!(l.right > 0.5 + 3.0 * (2.0 * 20.0f64).sqrt());
        assert_eq!(l.pieces.len(), 2);
    }
}

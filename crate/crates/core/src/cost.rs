//! Running costs and their discounted resolvents.
//!
//! A cost `h` is convex, even and twice differentiable with
//! `0 < k ≤ h″ ≤ K` and `h″` nonincreasing on the positive axis. The
//! resolvent `p_N(x) = E∫ e^{−αt} h((x + √k B_t)/k) dt`, `k = N/(N−1)`, is the
//! cost of never acting; it solves `α p − (k/2) p″ = h(·/k)`.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::params::k_ratio;
use crate::quad;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    Quadratic,
    Tabulated,
    Custom,
}

#[derive(Clone)]
enum Shape {
    /// `coeff · x²`
    Quadratic {
        coeff: f64,
    },
    Tabulated(Arc<Spline>),
    Custom {
        h: ScalarFn,
        dh: ScalarFn,
        d2h: ScalarFn,
    },
}

/// A running cost with its first two derivatives and curvature bounds.
///
/// `scale` rescales the argument: the cost evaluated is `h(scale · x)`.
#[derive(Clone)]
pub struct CostSpec {
    shape: Shape,
    scale: f64,
    k_lower: f64,
    k_upper: f64,
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match &self.shape {
            Shape::Quadratic { coeff } => format!("Quadratic({coeff})"),
            Shape::Tabulated(s) => format!("Tabulated({} knots)", s.x.len()),
            Shape::Custom { .. } => "Custom".to_string(),
        };
        f.debug_struct("CostSpec")
            .field("shape", &shape)
            .field("scale", &self.scale)
            .field("k_lower", &self.k_lower)
            .field("k_upper", &self.k_upper)
            .finish()
    }
}

impl CostSpec {
    /// `h(x) = x²`.
    pub fn quadratic() -> Self {
        Self::quadratic_with(1.0).expect("unit coefficient is valid")
    }

    /// `h(x) = coeff · x²`.
    pub fn quadratic_with(coeff: f64) -> Result<Self> {
        if !(coeff.is_finite() && coeff > 0.0) {
            return Err(Error::input("quadratic coefficient must be positive"));
        }
        Ok(CostSpec {
            shape: Shape::Quadratic { coeff },
            scale: 1.0,
            k_lower: 2.0 * coeff,
            k_upper: 2.0 * coeff,
        })
    }

    /// A user-supplied cost with declared curvature bounds.
    pub fn custom(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        k_lower: f64,
        k_upper: f64,
    ) -> Result<Self> {
        if !(k_lower.is_finite() && k_upper.is_finite() && 0.0 < k_lower && k_lower <= k_upper) {
            return Err(Error::input("curvature bounds must satisfy 0 < k_lower <= K_upper"));
        }
        Ok(CostSpec {
            shape: Shape::Custom { h: Arc::new(h), dh: Arc::new(dh), d2h: Arc::new(d2h) },
            scale: 1.0,
            k_lower,
            k_upper,
        })
    }

    /// Cubic-spline interpolant of `(x, h)` samples.
    pub fn tabulated(x: &[f64], h: &[f64]) -> Result<Self> {
        let spline = Spline::fit(x, h)?;
        let (lo, hi) = spline.curvature_range();
        if !(lo > 0.0) {
            return Err(Error::Table(format!(
                "interpolant curvature drops to {lo:e}; the cost must be strictly convex"
            )));
        }
        Ok(CostSpec { shape: Shape::Tabulated(Arc::new(spline)), scale: 1.0, k_lower: lo, k_upper: hi })
    }

    /// Reads a two-column `x,h` CSV with a header row.
    pub fn from_csv_reader<R: Read>(rdr: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            h: f64,
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let headers = reader.headers().map_err(|e| Error::Table(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "h" {
            return Err(Error::Table(format!(
                "expected header `x,h`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut xs, mut hs) = (Vec::new(), Vec::new());
        for (line, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Table(format!("row {}: {e}", line + 2)))?;
            xs.push(row.x);
            hs.push(row.h);
        }
        Self::tabulated(&xs, &hs)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn kind(&self) -> CostKind {
        match self.shape {
            Shape::Quadratic { .. } => CostKind::Quadratic,
            Shape::Tabulated(_) => CostKind::Tabulated,
            Shape::Custom { .. } => CostKind::Custom,
        }
    }

    /// Coefficient `a` of `h(x) = a x²` for quadratic costs.
    pub fn quadratic_coeff(&self) -> Option<f64> {
        match self.shape {
            Shape::Quadratic { coeff } => Some(coeff * self.scale * self.scale),
            _ => None,
        }
    }

    /// The cost `x ↦ h(s·x)`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::input("argument scale must be positive"));
        }
        let mut out = self.clone();
        out.scale *= s;
        out.k_lower *= s * s;
        out.k_upper *= s * s;
        Ok(out)
    }

    pub fn k_lower(&self) -> f64 {
        self.k_lower
    }

    pub fn k_upper(&self) -> f64 {
        self.k_upper
    }

    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        let z = self.scale * x;
        match &self.shape {
            Shape::Quadratic { coeff } => coeff * z * z,
            Shape::Tabulated(s) => s.eval(z).0,
            Shape::Custom { h, .. } => h(z),
        }
    }

    #[inline]
    pub fn dh(&self, x: f64) -> f64 {
        let z = self.scale * x;
        self.scale
            * match &self.shape {
                Shape::Quadratic { coeff } => 2.0 * coeff * z,
                Shape::Tabulated(s) => s.eval(z).1,
                Shape::Custom { dh, .. } => dh(z),
            }
    }

    #[inline]
    pub fn d2h(&self, x: f64) -> f64 {
        let z = self.scale * x;
        self.scale
            * self.scale
            * match &self.shape {
                Shape::Quadratic { coeff } => 2.0 * coeff,
                Shape::Tabulated(s) => s.eval(z).2,
                Shape::Custom { d2h, .. } => d2h(z),
            }
    }
}

/// Cubic spline with parabolic run-out ends, extended beyond the table by
/// the end parabolas so that `h″` stays continuous.
#[derive(Debug, Clone)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::Table("column lengths differ".into()));
        }
        if n < 3 {
            return Err(Error::Table("need at least three samples".into()));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite sample".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("x must be strictly increasing".into()));
        }
        let span = x[n - 1] - x[0];
        if (x[0] + x[n - 1]).abs() > 1e-9 * span {
            return Err(Error::Table(format!("range [{}, {}] is not symmetric about 0", x[0], x[n - 1])));
        }

        // Unknowns m_1..m_{n-2}; m_0 = m_1 and m_{n-1} = m_{n-2}.
        let k = n - 2;
        let hs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sub = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut sup = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for r in 0..k {
            let i = r + 1;
            sub[r] = hs[i - 1];
            diag[r] = 2.0 * (hs[i - 1] + hs[i]);
            sup[r] = hs[i];
            rhs[r] = 6.0 * ((y[i + 1] - y[i]) / hs[i] - (y[i] - y[i - 1]) / hs[i - 1]);
        }
        diag[0] += sub[0];
        diag[k - 1] += sup[k - 1];

        // Thomas algorithm.
        for r in 1..k {
            let w = sub[r] / diag[r - 1];
            diag[r] -= w * sup[r - 1];
            rhs[r] -= w * rhs[r - 1];
        }
        let mut inner = vec![0.0; k];
        inner[k - 1] = rhs[k - 1] / diag[k - 1];
        for r in (0..k - 1).rev() {
            inner[r] = (rhs[r] - sup[r] * inner[r + 1]) / diag[r];
        }
        let mut m = Vec::with_capacity(n);
        m.push(inner[0]);
        m.extend_from_slice(&inner);
        m.push(inner[k - 1]);
        Ok(Spline { x: x.to_vec(), y: y.to_vec(), m })
    }

    fn curvature_range(&self) -> (f64, f64) {
        self.m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// `(s, s′, s″)` at `z`.
    fn eval(&self, z: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        if z <= self.x[0] {
            let (y0, d0, m0) = self.node(0, true);
            let t = z - self.x[0];
            return (y0 + d0 * t + 0.5 * m0 * t * t, d0 + m0 * t, m0);
        }
        if z >= self.x[n - 1] {
            let (y1, d1, m1) = self.node(n - 2, false);
            let t = z - self.x[n - 1];
            return (y1 + d1 * t + 0.5 * m1 * t * t, d1 + m1 * t, m1);
        }
        let i = self.x.partition_point(|&v| v <= z).saturating_sub(1).min(n - 2);
        self.inside(i, z)
    }

    fn inside(&self, i: usize, z: f64) -> (f64, f64, f64) {
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - z, z - x0);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let c0 = self.y[i] / h - m0 * h / 6.0;
        let c1 = self.y[i + 1] / h - m1 * h / 6.0;
        let s = m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h) + c0 * a + c1 * b;
        let ds = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - c0 + c1;
        let d2s = (m0 * a + m1 * b) / h;
        (s, ds, d2s)
    }

    /// Value, slope and curvature at the left (`left = true`) or right end of interval `i`.
    fn node(&self, i: usize, left: bool) -> (f64, f64, f64) {
        let z = if left { self.x[i] } else { self.x[i + 1] };
        self.inside(i, z)
    }
}

// ---------------------------------------------------------------------------
// Assumption checks

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A1Clause {
    /// `h(x) ≠ h(−x)`
    Symmetry,
    /// `h″(x) < k_lower` or `h″(x) ≤ 0`
    BelowLower,
    /// `h″(x) > K_upper`
    AboveUpper,
    /// `h″` increases somewhere on the positive axis
    NotNonincreasing,
    /// `h(0) < 0`
    NegativeAtOrigin,
}

impl fmt::Display for A1Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            A1Clause::Symmetry => "h not symmetric",
            A1Clause::BelowLower => "h″ below k_lower",
            A1Clause::AboveUpper => "h″ not bounded above by K",
            A1Clause::NotNonincreasing => "h″ not decreasing on ℝ⁺",
            A1Clause::NegativeAtOrigin => "h(0) negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub clause: A1Clause,
    pub x: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Smallest `h″` observed on the grid.
    pub k_lower: f64,
    /// Largest `h″` observed on the grid.
    pub k_upper: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, clause: A1Clause) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

/// Checks convexity, symmetry and curvature bounds at the grid points.
pub fn validate_a1(cost: &CostSpec, grid: &[f64]) -> Result<ValidationReport> {
    if grid.is_empty() {
        return Err(Error::input("validation grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("validation grid has non-finite points"));
    }
    let rel = |a: f64, b: f64| 1e-10 * (1.0 + a.abs().max(b.abs()));
    let mut out = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;

    for &x in grid {
        let (hp, hm) = (cost.h(x), cost.h(-x));
        if (hp - hm).abs() > rel(hp, hm) {
            out.push(Violation {
                clause: A1Clause::Symmetry,
                x,
                detail: format!("h({x}) = {hp}, h({}) = {hm}", -x),
            });
        }
        let c = cost.d2h(x);
        lo = lo.min(c);
        hi = hi.max(c);
        if c <= 0.0 || c < cost.k_lower - rel(c, cost.k_lower) {
            out.push(Violation {
                clause: A1Clause::BelowLower,
                x,
                detail: format!("h″ = {c} < k_lower = {}", cost.k_lower),
            });
        }
        if c > cost.k_upper + rel(c, cost.k_upper) {
            out.push(Violation {
                clause: A1Clause::AboveUpper,
                x,
                detail: format!("h″ = {c} > K_upper = {}", cost.k_upper),
            });
        }
    }

    let mut pos: Vec<f64> = grid.iter().copied().filter(|&x| x >= 0.0).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    for w in pos.windows(2) {
        let (c0, c1) = (cost.d2h(w[0]), cost.d2h(w[1]));
        if c1 > c0 + rel(c0, c1) {
            out.push(Violation {
                clause: A1Clause::NotNonincreasing,
                x: w[1],
                detail: format!("h″({}) = {c0} < h″({}) = {c1}", w[0], w[1]),
            });
        }
    }

    let h0 = cost.h(0.0);
    if h0 < 0.0 {
        out.push(Violation { clause: A1Clause::NegativeAtOrigin, x: 0.0, detail: format!("h(0) = {h0}") });
    }
    Ok(ValidationReport { k_lower: lo, k_upper: hi, violations: out })
}

// ---------------------------------------------------------------------------
// Resolvent

/// Default absolute tolerance of the general-cost quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
const MAX_SUBDIVISIONS: usize = 4000;

#[derive(Debug, Clone)]
pub struct Resolvent {
    pub n: usize,
    pub alpha: f64,
    pub cost: CostSpec,
    /// Absolute tolerance of each quadrature.
    pub tol: f64,
    /// Use quadrature even when a closed form exists.
    pub force_quadrature: bool,
}

impl Resolvent {
    pub fn new(n: usize, alpha: f64, cost: CostSpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("N must be at least 1"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::input("alpha must be positive"));
        }
        Ok(Resolvent { n, alpha, cost, tol: DEFAULT_QUAD_TOL, force_quadrature: false })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_quadrature(mut self) -> Self {
        self.force_quadrature = true;
        self
    }

    pub fn k_ratio(&self) -> f64 {
        k_ratio(self.n)
    }

    /// `√(2α/k)`, the decay rate of the homogeneous solutions.
    pub fn rate(&self) -> f64 {
        (2.0 * self.alpha / self.k_ratio()).sqrt()
    }

    /// The source term `h(z/k)` of the resolvent equation.
    #[inline]
    pub fn source(&self, z: f64) -> f64 {
        self.cost.h(z / self.k_ratio())
    }

    fn closed_form(&self) -> Option<f64> {
        if self.force_quadrature {
            None
        } else {
            self.cost.quadratic_coeff()
        }
    }

    /// Truncation point for the `e^{−s}` integrals.
    fn s_max(&self, x: f64) -> f64 {
        let k = self.k_ratio();
        let r = self.rate();
        let mut s: f64 = 60.0;
        while s < 700.0 {
            let z = (x.abs() + s / r) / k;
            let tail = (-s).exp() * (self.cost.h(0.0).abs() + self.cost.k_upper * (z * z + 1.0));
            if tail < 1e-3 * self.tol {
                break;
            }
            s += 10.0;
        }
        s
    }

    pub fn p(&self, x: f64) -> Result<f64> {
        let k = self.k_ratio();
        if let Some(a) = self.closed_form() {
            let al = self.alpha;
            return Ok(a / (k * k) * (x * x / al + k / (al * al)));
        }
        let r = self.rate();
        let integral = quad::integrate(
            |s| (self.source(x + s / r) + self.source(x - s / r)) * (-s).exp(),
            0.0,
            self.s_max(x),
            2.0 * self.alpha * self.tol,
            MAX_SUBDIVISIONS,
        )?;
        Ok(integral / (2.0 * self.alpha))
    }

    /// `(p′, p″)`, from the differentiated kernel.
    pub fn derivs(&self, x: f64) -> Result<(f64, f64)> {
        let k = self.k_ratio();
        if let Some(a) = self.closed_form() {
            let d2 = 2.0 * a / (self.alpha * k * k);
            return Ok((d2 * x, d2));
        }
        let r = self.rate();
        let s_max = self.s_max(x);
        let odd = quad::integrate(
            |s| (self.source(x + s / r) - self.source(x - s / r)) * (-s).exp(),
            0.0,
            s_max,
            k * r * self.tol,
            MAX_SUBDIVISIONS,
        )?;
        let d1 = odd / (k * r);
        let d2 = r * r * self.p(x)? - 2.0 / k * self.source(x);
        Ok((d1, d2))
    }
}

/// `p_N(x)`.
pub fn p_n(x: f64, r: &Resolvent) -> Result<f64> {
    r.p(x)
}

/// `(p_N′(x), p_N″(x))`.
pub fn p_n_derivs(x: f64, r: &Resolvent) -> Result<(f64, f64)> {
    r.derivs(x)
}

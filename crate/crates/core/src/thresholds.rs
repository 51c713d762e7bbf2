//! Free-boundary thresholds and the cosh coefficient of the interior value.

use crate::cost::{CostSpec, Resolvent};
use crate::error::{Error, Result};
use crate::roots;

/// `f_N(x) = tanh(r x)/r − (p_N′(x) − 1)/p_N″(x)` with `r = √(2α/k)`.
pub fn f_n(x: f64, n: usize, alpha: f64, cost: &CostSpec) -> Result<f64> {
    let res = Resolvent::new(n, alpha, cost.clone())?;
    f_with(&res, x)
}

fn f_with(res: &Resolvent, x: f64) -> Result<f64> {
    let r = res.rate();
    let (d1, d2) = res.derivs(x)?;
    Ok((r * x).tanh() / r - (d1 - 1.0) / d2)
}

fn solve_threshold(res: &Resolvent) -> Result<f64> {
    let k = res.k_ratio();
    let f = |x: f64| f_with(res, x);
    let br = roots::bracket_decreasing(&f, 1e-6, (res.alpha * k * k).max(1.0))?;
    let root = roots::solve_bracketed(&f, br, 1e-6, 1e-13)?;

    // The positive root is unique; a bracket that fails this guard means the
    // cost is outside the admissible class.
    let (left, right) = (f(0.5 * root)?, f(2.0 * root)?);
    if !(left > 0.0 && right < 0.0) {
        return Err(Error::Solver(format!(
            "root {root} fails the sign guard: f(root/2) = {left:e}, f(2 root) = {right:e}"
        )));
    }
    Ok(root)
}

/// Single-player (and mean-field) threshold `c`.
pub fn solve_c(alpha: f64, cost: &CostSpec) -> Result<f64> {
    solve_threshold(&Resolvent::new(1, alpha, cost.clone())?)
}

/// N-player threshold `c_N`.
pub fn solve_c_n(n: usize, alpha: f64, cost: &CostSpec) -> Result<f64> {
    if n < 2 {
        return Err(Error::input("solve_c_n needs N >= 2; use solve_c for one player"));
    }
    solve_threshold(&Resolvent::new(n, alpha, cost.clone())?)
}

/// `B = −p_N″(c_N) / (r² cosh(r c_N))`.
pub fn coeff_b(n: usize, alpha: f64, cost: &CostSpec, c_n: f64) -> Result<f64> {
    let res = Resolvent::new(n, alpha, cost.clone())?;
    let r = res.rate();
    let (_, d2) = res.derivs(c_n)?;
    Ok(-d2 / (r * r * (r * c_n).cosh()))
}

/// Threshold of player `i` in the two-player game with discount `alpha_i`.
pub fn solve_c2_asym(alpha_i: f64, cost: &CostSpec) -> Result<f64> {
    solve_c_n(2, alpha_i, cost)
}

/// `cosh(a)/cosh(b)` without overflow.
pub fn cosh_ratio(a: f64, b: f64) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    (a - b).exp() * (1.0 + (-2.0 * a).exp()) / (1.0 + (-2.0 * b).exp())
}

/// Solved constants for one `(N, α, cost)` triple.
#[derive(Debug, Clone)]
pub struct Thresholds {
    pub n: usize,
    pub alpha: f64,
    pub cost: CostSpec,
    /// Mean-field / single-player threshold.
    pub c: f64,
    /// N-player threshold; equals `c` when `N = 1`.
    pub c_n: f64,
    /// `−p_N″(c_N)/r²`. The cosh coefficient is `b_scaled / cosh(r c_N)`;
    /// kept unscaled so large `r c_N` cannot overflow.
    pub b_scaled: f64,
    /// `√(2α/k)`.
    pub rate: f64,
}

impl Thresholds {
    pub fn solve(n: usize, alpha: f64, cost: &CostSpec) -> Result<Self> {
        let c = solve_c(alpha, cost)?;
        let c_n = if n == 1 { c } else { solve_c_n(n, alpha, cost)? };
        let res = Resolvent::new(n, alpha, cost.clone())?;
        let rate = res.rate();
        let (_, d2) = res.derivs(c_n)?;
        Ok(Thresholds { n, alpha, cost: cost.clone(), c, c_n, b_scaled: -d2 / (rate * rate), rate })
    }

    pub fn resolvent(&self) -> Resolvent {
        Resolvent::new(self.n, self.alpha, self.cost.clone()).expect("validated at solve time")
    }

    /// The cosh coefficient `B` (may underflow to 0 for very large `r c_N`).
    pub fn b(&self) -> f64 {
        self.b_scaled / (self.rate * self.c_n).cosh()
    }

    /// Interior value `B cosh(r y) + p_N(y)` for `|y| ≤ c_N`.
    pub fn interior_value(&self, y: f64) -> Result<f64> {
        interior_value(&self.resolvent(), self.c_n, y)
    }

    /// `(w′(y), w″(y))` of the interior value.
    pub fn interior_derivs(&self, y: f64) -> Result<(f64, f64)> {
        interior_derivs(&self.resolvent(), self.c_n, y)
    }
}

/// `w(y) = −p″(c)/r² · cosh(r y)/cosh(r c) + p(y)`, the interior value
/// pasted at threshold `c`.
pub fn interior_value(res: &Resolvent, c: f64, y: f64) -> Result<f64> {
    let r = res.rate();
    let (_, d2c) = res.derivs(c)?;
    Ok(-d2c / (r * r) * cosh_ratio(r * y, r * c) + res.p(y)?)
}

/// `(w′(y), w″(y))` for [`interior_value`].
pub fn interior_derivs(res: &Resolvent, c: f64, y: f64) -> Result<(f64, f64)> {
    let r = res.rate();
    let (_, d2c) = res.derivs(c)?;
    let bs = -d2c / (r * r);
    let (d1, d2) = res.derivs(y)?;
    let ratio = cosh_ratio(r * y, r * c);
    Ok((bs * r * ratio * (r * y).tanh() + d1, bs * r * r * ratio + d2))
}

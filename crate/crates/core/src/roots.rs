//! Bracketing and refinement for scalar roots.

use crate::error::{Error, Result};

/// Widest right end the bracket search will try.
const RIGHT_CAP: f64 = (1u64 << 40) as f64;

/// Finds `[lo, hi]` with `f(lo) > 0 > f(hi)`, starting from `[lo, hi0]` and
/// doubling the right end.
pub(crate) fn bracket_decreasing<F>(f: &F, lo: f64, hi0: f64) -> Result<(f64, f64, f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let flo = f(lo)?;
    if !(flo > 0.0) {
        return Err(Error::Solver(format!("expected a positive value at the left end {lo:e}, got {flo:e}")));
    }
    let mut hi = hi0.max(lo * 2.0);
    loop {
        let fhi = f(hi)?;
        if fhi < 0.0 {
            return Ok((lo, hi, flo, fhi));
        }
        if fhi.is_nan() {
            return Err(Error::Solver(format!("NaN while bracketing at x = {hi:e}")));
        }
        if hi >= RIGHT_CAP {
            return Err(Error::Solver(format!("no sign change on ({lo:e}, {RIGHT_CAP:e}]")));
        }
        hi *= 2.0;
    }
}

/// Bisection down to width `width`, then Brent's method.
pub(crate) fn solve_bracketed<F>(
    f: &F,
    (mut a, mut b, mut fa, mut fb): (f64, f64, f64, f64),
    bisect_width: f64,
    xtol: f64,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    // The width is relative once the bracket sits far from the origin.
    while b - a > bisect_width.max(4.0 * f64::EPSILON * b.abs()) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    brent(f, a, b, fa, fb, xtol)
}

/// Brent's method on a sign-changing bracket.
pub(crate) fn brent<F>(f: &F, a0: f64, b0: f64, fa0: f64, fb0: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, fa0, fb0);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if (fa > 0.0) == (fb > 0.0) {
        return Err(Error::Solver("Brent called without a sign change".into()));
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::Solver("Brent iteration limit reached".into()))
}

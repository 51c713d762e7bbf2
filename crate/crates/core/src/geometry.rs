//! Region decomposition of ℝ^N and the common waiting polyhedron.
//!
//! Player `i` deviates from the others by `y_i = x_i − Σ_{j≠i} x_j/(N−1)`.
//! The common waiting region is `{ |y_i| < c_N for all i }`, a polyhedron
//! with `2N` faces. Faces are indexed from 0: face `i < N` is `y_i = −c_N`
//! (player `i` pushes up, direction `+e_i`); face `i + N` is `y_i = +c_N`
//! (player `i` pushes down, direction `−e_i`).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// `|y| − c` within this distance counts as on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub x: Vec<f64>,
}

impl StateVector {
    pub fn new(x: Vec<f64>) -> Self {
        StateVector { x }
    }

    pub fn zeros(n: usize) -> Self {
        StateVector { x: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.n() as f64
    }

    /// Deviation of player `i` from the mean of the others.
    pub fn y(&self, i: usize) -> f64 {
        let n = self.n();
        let s: f64 = self.x.iter().sum();
        deviation(self.x[i], s, n)
    }

    pub fn ys(&self) -> Vec<f64> {
        let n = self.n();
        let s: f64 = self.x.iter().sum();
        self.x.iter().map(|&xi| deviation(xi, s, n)).collect()
    }

    /// Index maximizing `|y_i|`, ties resolved toward the largest index.
    pub fn farthest(&self) -> (usize, f64) {
        farthest(&self.ys())
    }
}

#[inline]
pub(crate) fn deviation(xi: f64, sum: f64, n: usize) -> f64 {
    xi - (sum - xi) / (n as f64 - 1.0)
}

#[inline]
pub(crate) fn farthest(ys: &[f64]) -> (usize, f64) {
    let mut best = (0, ys[0]);
    for (i, &y) in ys.iter().enumerate().skip(1) {
        if y.abs() >= best.1.abs() {
            best = (i, y);
        }
    }
    best
}

/// Which side of the band a deviation sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// `y_i > 0`: the player sits above the others and pushes down.
    Plus,
    /// `y_i < 0`: the player sits below the others and pushes up.
    Minus,
}

impl Side {
    pub fn of(y: f64) -> Side {
        if y > 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    CommonWait,
    /// Player (0-based) that must act, and the side it acts on.
    Action {
        player: usize,
        side: Side,
    },
    /// On face `face` of the polyhedron; treated as waiting.
    Boundary {
        face: usize,
    },
}

pub fn face_index(player: usize, side: Side, n: usize) -> usize {
    match side {
        Side::Minus => player,
        Side::Plus => player + n,
    }
}

fn boundary_tol(c_n: f64) -> f64 {
    BOUNDARY_TOL * c_n.max(1.0)
}

/// Labels `x`; the farthest player acts, with ties going to the largest index.
pub fn classify(x: &StateVector, c_n: f64) -> Result<RegionLabel> {
    let n = x.n();
    if n < 2 {
        return Err(Error::input("classification needs N >= 2"));
    }
    if !(c_n > 0.0) {
        return Err(Error::input("threshold must be positive"));
    }
    let (i, y) = x.farthest();
    let tol = boundary_tol(c_n);
    Ok(if y.abs() < c_n - tol {
        RegionLabel::CommonWait
    } else if y.abs() <= c_n + tol {
        RegionLabel::Boundary { face: face_index(i, Side::of(y), n) }
    } else {
        RegionLabel::Action { player: i, side: Side::of(y) }
    })
}

/// The common waiting polyhedron `{ x : n_j·x > offset, j = 0..2N }`.
#[derive(Debug, Clone, Serialize)]
pub struct Polyhedron {
    pub n: usize,
    pub c_n: f64,
    /// Unit inward normals, one row per face.
    pub normals: Vec<Vec<f64>>,
    /// Shared face offset `−c_N √((N−1)/N)`.
    pub offset: f64,
    /// Reflection directions, signed coordinate vectors.
    pub directions: Vec<Vec<f64>>,
}

fn normal_row(n: usize, i: usize) -> Vec<f64> {
    let s = ((n as f64 - 1.0) / n as f64).sqrt();
    let off = -s / (n as f64 - 1.0);
    (0..n).map(|j| if j == i { s } else { off }).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn build_polyhedron(n: usize, c_n: f64) -> Result<Polyhedron> {
    if n < 2 {
        return Err(Error::input("polyhedron needs N >= 2"));
    }
    let mut normals = Vec::with_capacity(2 * n);
    let mut directions = Vec::with_capacity(2 * n);
    for i in 0..n {
        normals.push(normal_row(n, i));
        let mut d = vec![0.0; n];
        d[i] = 1.0;
        directions.push(d);
    }
    for i in 0..n {
        normals.push(normals[i].iter().map(|v| -v).collect());
        directions.push(directions[i].iter().map(|v| -v).collect());
    }
    let s = ((n as f64 - 1.0) / n as f64).sqrt();
    let p = Polyhedron { n, c_n, normals, offset: -c_n * s, directions };
    for j in 0..2 * n {
        let dn = dot(&p.directions[j], &p.normals[j]);
        debug_assert!((dn - s).abs() < 1e-12, "d_j·n_j = {dn}");
    }
    Ok(p)
}

impl Polyhedron {
    /// `n_j·x − offset`; nonnegative on the closed polyhedron.
    pub fn slack(&self, j: usize, x: &[f64]) -> f64 {
        dot(&self.normals[j], x) - self.offset
    }

    /// Strict membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..2 * self.n).all(|j| self.slack(j, x) > 0.0)
    }

    pub fn d_dot_n(&self, j: usize) -> f64 {
        dot(&self.directions[j], &self.normals[j])
    }
}

/// Determinant of the square matrix formed by the first `N` face normals.
pub fn det_nmat(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::input("N must be at least 2"));
    }
    let rows: Vec<f64> = (0..n).flat_map(|i| normal_row(n, i)).collect();
    Ok(DMatrix::from_row_slice(n, n, &rows).determinant())
}

/// Numerical rank of the full `2N × N` normal matrix.
pub fn rank_nmat(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::input("N must be at least 2"));
    }
    let rows: Vec<f64> = (0..2 * n)
        .flat_map(|j| {
            let r = normal_row(n, j % n);
            let sign = if j < n { 1.0 } else { -1.0 };
            r.into_iter().map(move |v| sign * v)
        })
        .collect();
    Ok(DMatrix::from_row_slice(2 * n, n, &rows).rank(1e-9))
}

fn check_range(n: usize) -> Result<()> {
    if (2..=8).contains(&n) {
        Ok(())
    } else {
        Err(Error::input(format!("N = {n} outside the enumeration range 2..=8")))
    }
}

/// Face sets built from distinct players, each with a chosen side.
fn signed_subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let players: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        for signs in 0u32..(1 << size) {
            out.push(
                players
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| if signs >> k & 1 == 1 { p + n } else { p })
                    .collect(),
            );
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SabFailure {
    pub set: Vec<usize>,
    pub member: usize,
    /// `'a'` or `'b'`.
    pub condition: char,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SabReport {
    pub n: usize,
    pub sets_checked: usize,
    pub failures: Vec<SabFailure>,
    /// Largest gap between the brute-force products and the closed formula
    /// on sets of size `N − 1`.
    pub closed_form_gap: f64,
}

impl SabReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.closed_form_gap < 1e-12
    }
}

/// Closed-form value of `n·d_{i_k}` for a face set of size `N−1` containing
/// `m` lower faces.
pub fn sab_closed_form(n: usize, m: usize, lower: bool) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let s = ((nf - 1.0) / nf).sqrt();
    if lower {
        s * (1.0 + (nf - 2.0 * mf) / (nf - 1.0))
    } else {
        s * (1.0 + (2.0 * mf - nf + 2.0) / (nf - 1.0))
    }
}

/// Checks the positive-combination conditions with unit coefficients on
/// every face set of at most `N − 1` distinct players. This covers every
/// maximal set (and some sets whose faces do not meet).
pub fn check_sab(n: usize) -> Result<SabReport> {
    check_range(n)?;
    let p = build_polyhedron(n, 1.0)?;
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut gap: f64 = 0.0;
    for size in 1..n {
        for set in signed_subsets(n, size) {
            checked += 1;
            let mut d_sum = vec![0.0; n];
            let mut n_sum = vec![0.0; n];
            for &j in &set {
                for c in 0..n {
                    d_sum[c] += p.directions[j][c];
                    n_sum[c] += p.normals[j][c];
                }
            }
            let m = set.iter().filter(|&&j| j < n).count();
            for &j in &set {
                let a = dot(&p.normals[j], &d_sum);
                let b = dot(&p.directions[j], &n_sum);
                if !(a > 0.0) {
                    failures.push(SabFailure { set: set.clone(), member: j, condition: 'a', value: a });
                }
                if !(b > 0.0) {
                    failures.push(SabFailure { set: set.clone(), member: j, condition: 'b', value: b });
                }
                if size == n - 1 {
                    let cf = sab_closed_form(n, m, j < n);
                    gap = gap.max((a - cf).abs()).max((b - cf).abs());
                }
            }
        }
    }
    Ok(SabReport { n, sets_checked: checked, failures, closed_form_gap: gap })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScFailure {
    pub set: Vec<usize>,
    pub row: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScReport {
    pub n: usize,
    pub face_weight: f64,
    pub cap_weight: f64,
    pub sets_checked: usize,
    /// Smallest `lhs − rhs` over all rows of all sets.
    pub min_margin: f64,
    pub failures: Vec<ScFailure>,
}

impl ScReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Diagonal dominance on the truncated region, with unit weights on the
/// `2N` faces and weight `√N` on the two capping faces `Σx = ±k`.
pub fn check_sc(n: usize) -> Result<ScReport> {
    check_sc_weighted(n, 1.0, (n as f64).sqrt())
}

/// Index sets checked: `N − 1` faces of distinct players plus one cap.
/// Cap faces `2N` and `2N + 1` have `d = n = ∓(1,…,1)/√N`.
pub fn check_sc_weighted(n: usize, face_weight: f64, cap_weight: f64) -> Result<ScReport> {
    check_range(n)?;
    let p = build_polyhedron(n, 1.0)?;
    let inv = 1.0 / (n as f64).sqrt();
    let caps = [vec![-inv; n], vec![inv; n]];
    let normal = |j: usize| if j < 2 * n { &p.normals[j] } else { &caps[j - 2 * n] };
    let direction = |j: usize| if j < 2 * n { &p.directions[j] } else { &caps[j - 2 * n] };
    let weight = |j: usize| if j < 2 * n { face_weight } else { cap_weight };

    let mut failures = Vec::new();
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    for faces in signed_subsets(n, n - 1) {
        for cap in [2 * n, 2 * n + 1] {
            let mut set = faces.clone();
            set.push(cap);
            checked += 1;
            for &i in &set {
                let lhs = weight(i) * dot(direction(i), normal(i));
                let rhs: f64 = set
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| weight(j) * dot(direction(j), normal(i)).abs())
                    .sum();
                min_margin = min_margin.min(lhs - rhs);
                if !(lhs > rhs) {
                    failures.push(ScFailure { set: set.clone(), row: i, lhs, rhs });
                }
            }
        }
    }
    Ok(ScReport { n, face_weight, cap_weight, sets_checked: checked, min_margin, failures })
}

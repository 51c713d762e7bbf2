//! Equilibrium values of the N-player game.

use serde::Serialize;

use crate::cost::{CostSpec, Resolvent};
use crate::error::{Error, Result};
use crate::geometry::{classify, RegionLabel, StateVector};
use crate::params::GameParams;
use crate::thresholds::{self, solve_c2_asym, Thresholds};

pub const MAX_JUMPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jump {
    /// 0-based player index.
    pub player: usize,
    /// Signed displacement of the player's coordinate.
    pub displacement: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpSequence {
    pub steps: Vec<Jump>,
    pub endpoint: StateVectorRepr,
    pub total_distance: f64,
}

/// Serializable copy of a state.
pub type StateVectorRepr = Vec<f64>;

impl JumpSequence {
    pub fn endpoint(&self) -> StateVector {
        StateVector::new(self.endpoint.clone())
    }

    /// Total distance moved by `player`.
    pub fn charged_to(&self, player: usize) -> f64 {
        self.steps.iter().filter(|s| s.player == player).map(|s| s.displacement.abs()).sum()
    }

    /// Upward and downward totals of `player`.
    pub fn split_for(&self, player: usize) -> (f64, f64) {
        self.steps.iter().filter(|s| s.player == player).fold((0.0, 0.0), |(up, down), s| {
            if s.displacement > 0.0 {
                (up + s.displacement, down)
            } else {
                (up, down - s.displacement)
            }
        })
    }
}

/// Moves the farthest player to the band edge until no one is outside.
pub fn algorithm1(x: &StateVector, c_n: f64) -> Result<JumpSequence> {
    let n = x.n();
    let mut cur = x.clone();
    let mut steps = Vec::new();
    let mut total = 0.0;
    loop {
        match classify(&cur, c_n)? {
            RegionLabel::CommonWait | RegionLabel::Boundary { .. } => break,
            RegionLabel::Action { player, side } => {
                if steps.len() >= MAX_JUMPS {
                    return Err(Error::NonTermination(MAX_JUMPS));
                }
                let sum: f64 = cur.x.iter().sum();
                let others = (sum - cur.x[player]) / (n as f64 - 1.0);
                let target = others + side.sign() * c_n;
                let displacement = target - cur.x[player];
                cur.x[player] = target;
                total += displacement.abs();
                steps.push(Jump { player, displacement, state: cur.x.clone() });
            }
        }
    }
    Ok(JumpSequence { steps, endpoint: cur.x, total_distance: total })
}

#[derive(Debug, Clone)]
pub struct NeValueRequest {
    /// 0-based player index.
    pub player: usize,
    pub x: StateVector,
    pub params: GameParams,
    pub thresholds: Thresholds,
}

/// Equilibrium value of one player: own jumps from the initial state plus
/// the interior value at the endpoint.
pub fn value_i(req: &NeValueRequest) -> Result<f64> {
    let n = req.x.n();
    let t = &req.thresholds;
    if n < 2 || req.params.n != n || t.n != n {
        return Err(Error::input(format!(
            "dimension mismatch: state has {n} entries, params N = {}, thresholds N = {}",
            req.params.n, t.n
        )));
    }
    if req.player >= n {
        return Err(Error::input(format!("player {} out of range 0..{n}", req.player)));
    }
    match req.params.alpha() {
        Some(a) if a == t.alpha => {}
        _ => return Err(Error::input("thresholds were solved for a different discount")),
    }
    let jumps = algorithm1(&req.x, t.c_n)?;
    let y = jumps.endpoint().y(req.player);
    Ok(jumps.charged_to(req.player) + t.interior_value(y)?)
}

/// Value along the diagonal, where no one acts initially.
pub fn diagonal_value(t: &Thresholds) -> Result<f64> {
    t.interior_value(0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbReport {
    pub n: usize,
    pub alpha: f64,
    pub c_n: f64,
    pub grid_step: f64,
    pub points: usize,
    /// Largest `|α w − h(y/k) − (k/2) w″|` with `w″` from central differences.
    pub max_residual: f64,
    pub residual_at: f64,
    /// Largest `|w′|` on the interior grid.
    pub max_abs_slope: f64,
    pub slope_at_c: f64,
    pub slope_at_minus_c: f64,
    pub curvature_at_c: f64,
    pub curvature_at_minus_c: f64,
}

/// Interior ODE residual of the one-dimensional reduction of the HJB system.
pub fn hjb_residual(n: usize, alpha: f64, cost: &CostSpec, grid_step: f64) -> Result<HjbReport> {
    if n < 2 {
        return Err(Error::input("the N-player system needs N >= 2"));
    }
    if !(grid_step > 0.0) {
        return Err(Error::input("grid step must be positive"));
    }
    let t = Thresholds::solve(n, alpha, cost)?;
    let res = t.resolvent();
    let k = res.k_ratio();
    let c = t.c_n;
    let w = |y: f64| thresholds::interior_value(&res, c, y);

    let steps = (2.0 * c / grid_step).floor() as usize;
    let mut report = HjbReport {
        n,
        alpha,
        c_n: c,
        grid_step,
        points: 0,
        max_residual: 0.0,
        residual_at: 0.0,
        max_abs_slope: 0.0,
        slope_at_c: 0.0,
        slope_at_minus_c: 0.0,
        curvature_at_c: 0.0,
        curvature_at_minus_c: 0.0,
    };
    for j in 1..steps {
        let y = -c + j as f64 * grid_step;
        if y + grid_step > c {
            break;
        }
        let (wm, w0, wp) = (w(y - grid_step)?, w(y)?, w(y + grid_step)?);
        let d2 = (wp - 2.0 * w0 + wm) / (grid_step * grid_step);
        let r = (alpha * w0 - res.source(y) - 0.5 * k * d2).abs();
        if r > report.max_residual {
            report.max_residual = r;
            report.residual_at = y;
        }
        let (d1, _) = thresholds::interior_derivs(&res, c, y)?;
        report.max_abs_slope = report.max_abs_slope.max(d1.abs());
        report.points += 1;
    }
    let (s_plus, c_plus) = thresholds::interior_derivs(&res, c, c)?;
    let (s_minus, c_minus) = thresholds::interior_derivs(&res, c, -c)?;
    report.slope_at_c = s_plus;
    report.slope_at_minus_c = s_minus;
    report.curvature_at_c = c_plus;
    report.curvature_at_minus_c = c_minus;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Two players

/// The four threshold equilibria of the two-player game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NeCase {
    /// Player 2 acts on both sides.
    One,
    /// Player 1 acts on both sides.
    Two,
    /// The lower player acts.
    Three,
    /// The higher player acts.
    Four,
}

impl NeCase {
    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(NeCase::One),
            2 => Ok(NeCase::Two),
            3 => Ok(NeCase::Three),
            4 => Ok(NeCase::Four),
            _ => Err(Error::input(format!("equilibrium case must be 1..=4, got {k}"))),
        }
    }

    pub const ALL: [NeCase; 4] = [NeCase::One, NeCase::Two, NeCase::Three, NeCase::Four];

    pub fn regions(self) -> ActionRegions {
        let (above, below) = match self {
            NeCase::One => (1, 1),
            NeCase::Two => (0, 0),
            NeCase::Three => (1, 0),
            NeCase::Four => (0, 1),
        };
        ActionRegions { above, below }
    }
}

/// Who acts outside the band, as 0-based player indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActionRegions {
    /// Actor on `x¹ − x² > c₂`.
    pub above: usize,
    /// Actor on `x¹ − x² < −c₂`.
    pub below: usize,
}

impl ActionRegions {
    pub fn describe(&self) -> String {
        format!("player {} acts on x1-x2 > c2; player {} acts on x1-x2 < -c2", self.above + 1, self.below + 1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPlayerValues {
    pub v1: f64,
    pub v2: f64,
    pub c2: f64,
    pub regions: ActionRegions,
}

/// Values of the selected two-player equilibrium at `x = (x¹, x²)`.
pub fn two_player_ne(case: NeCase, x: [f64; 2], alpha: f64, cost: &CostSpec) -> Result<TwoPlayerValues> {
    let t = Thresholds::solve(2, alpha, cost)?;
    let c = t.c_n;
    let d = x[0] - x[1];
    let regions = case.regions();
    let (v1, v2) = if d.abs() < c {
        let w = t.interior_value(d)?;
        (w, w)
    } else {
        let edge = t.interior_value(c)?;
        let actor = if d > 0.0 { regions.above } else { regions.below };
        let paid = d.abs() - c + edge;
        if actor == 0 {
            (paid, edge)
        } else {
            (edge, paid)
        }
    };
    Ok(TwoPlayerValues { v1, v2, c2: c, regions })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymValues {
    pub v1: f64,
    pub v2: f64,
    /// Thresholds `c₂⁽¹⁾`, `c₂⁽²⁾`.
    pub c: [f64; 2],
    /// Set when `α₂ > α₁ > 2^{−4/3}` fails.
    pub warning: Option<String>,
}

/// Two players with discounts `α₁ ≠ α₂`. Player 2 jumps back to `|x¹ − x²| = c₂⁽²⁾`,
/// player 1 reflects at `c₂⁽¹⁾`. Each interior value uses that player's own
/// discount with the inner threshold `c₂⁽¹⁾`.
pub fn two_player_asym(x: [f64; 2], alpha1: f64, alpha2: f64, cost: &CostSpec) -> Result<AsymValues> {
    let warning = if !(alpha2 > alpha1 && alpha1 > 2f64.powf(-4.0 / 3.0)) {
        Some(format!(
            "alpha2 > alpha1 > 2^(-4/3) does not hold for ({alpha1}, {alpha2}); values follow the same formulas but need not form an equilibrium"
        ))
    } else {
        None
    };
    let c1 = solve_c2_asym(alpha1, cost)?;
    let c2 = solve_c2_asym(alpha2, cost)?;
    let r1 = Resolvent::new(2, alpha1, cost.clone())?;
    let r2 = Resolvent::new(2, alpha2, cost.clone())?;
    let w1 = |y: f64| thresholds::interior_value(&r1, c1, y);
    let w2 = |y: f64| thresholds::interior_value(&r2, c1, y);

    let d = (x[0] - x[1]).abs();
    let (v1, v2) = if d <= c1 {
        (w1(d)?, w2(d)?)
    } else if d <= c2 {
        (d - c1 + w1(c1)?, w2(c1)?)
    } else {
        (c2 - c1 + w1(c1)?, d - c2 + w2(c1)?)
    };
    Ok(AsymValues { v1, v2, c: [c1, c2], warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    const C2: f64 = 4.707104445325443;
    const C3: f64 = 2.862265734192829;

    fn q() -> CostSpec {
        CostSpec::quadratic()
    }

    #[test]
    fn algorithm1_examples() {
        let x = StateVector::new(vec![0.3, -0.1, 0.2]);
        let j = algorithm1(&x, C3).unwrap();
        assert!(j.steps.is_empty());
        assert_eq!(j.endpoint, x.x);

        let j = algorithm1(&StateVector::new(vec![0.0, 8.0]), C2).unwrap();
        assert_eq!(j.steps.len(), 1);
        assert_eq!(j.steps[0].player, 1);
        assert!((j.total_distance - (8.0 - C2)).abs() < 1e-12);
        assert!((j.endpoint[1] - C2).abs() < 1e-12);

        let j = algorithm1(&StateVector::new(vec![9.0, -9.0, 0.0]), C3).unwrap();
        assert_eq!(j.steps.iter().map(|s| s.player).collect::<Vec<_>>(), vec![1, 0]);
        assert!((j.endpoint[0] - 3.6812).abs() < 1e-3);
        assert!((j.endpoint[1] - 1.6377).abs() < 1e-3);
        assert_eq!(j.endpoint[2], 0.0);
    }

    #[test]
    fn diagonal_values() {
        let t = Thresholds::solve(2, 2.0, &q()).unwrap();
        let r = (2.0f64).sqrt();
        let closed = 0.125 * (1.0 - 1.0 / (C2 * r).cosh());
        for a in [-3.0, 0.0, 11.0] {
            let req = NeValueRequest {
                player: 0,
                x: StateVector::new(vec![a, a]),
                params: GameParams::new(2, 2.0).unwrap(),
                thresholds: t.clone(),
            };
            assert!((value_i(&req).unwrap() - closed).abs() < 1e-14);
        }
        assert!((closed - 0.1247).abs() < 1e-4);
    }

    #[test]
    fn exterior_value_adds_jump() {
        let t = Thresholds::solve(2, 2.0, &q()).unwrap();
        let params = GameParams::new(2, 2.0).unwrap();
        let at = |x: Vec<f64>| {
            value_i(&NeValueRequest { player: 1, x: StateVector::new(x), params, thresholds: t.clone() })
                .unwrap()
        };
        assert!((at(vec![0.0, 8.0]) - (8.0 - C2 + at(vec![0.0, C2]))).abs() < 1e-12);
    }

    #[test]
    fn hjb_small() {
        let r = hjb_residual(3, 2.0, &q(), 1e-3).unwrap();
        assert!(r.max_residual <= 5e-4, "{r:?}");
        assert!((r.slope_at_c - 1.0).abs() < 1e-8);
        assert!((r.slope_at_minus_c + 1.0).abs() < 1e-8);
        assert!(r.curvature_at_c.abs() < 1e-6);
        assert!(r.max_abs_slope <= 1.0 + 1e-8);
    }

    #[test]
    fn two_player_cases() {
        let inside = [0.4, -1.1];
        let vals: Vec<_> =
            NeCase::ALL.iter().map(|&c| two_player_ne(c, inside, 2.0, &q()).unwrap()).collect();
        for v in &vals {
            assert_eq!(v.v1, vals[0].v1);
            assert_eq!(v.v2, vals[0].v2);
        }
        let edge = two_player_ne(NeCase::One, [0.0, C2], 2.0, &q()).unwrap();
        let out = two_player_ne(NeCase::One, [0.0, C2 + 1.0], 2.0, &q()).unwrap();
        assert!((out.v2 - (1.0 + edge.v2)).abs() < 1e-10);
        assert!((out.v1 - edge.v1).abs() < 1e-10);
        let swapped = two_player_ne(NeCase::Two, [C2 + 1.0, 0.0], 2.0, &q()).unwrap();
        assert!((swapped.v1 - out.v2).abs() < 1e-14);
        assert!(NeCase::from_number(5).unwrap_err().is_input());
    }

    #[test]
    fn asym_reduces_to_case_one() {
        for x in [[0.0, 1.0], [0.0, 6.0], [2.0, -9.0]] {
            let a = two_player_asym(x, 2.0, 2.0, &q()).unwrap();
            let s = two_player_ne(NeCase::One, x, 2.0, &q()).unwrap();
            assert!((a.v1 - s.v1).abs() < 1e-12 && (a.v2 - s.v2).abs() < 1e-12);
            assert!(a.warning.is_some());
        }
        let a = two_player_asym([0.0, 1.0], 1.0, 2.0, &q()).unwrap();
        assert!(a.warning.is_none());
        assert!(a.c[1] > a.c[0]);
    }
}

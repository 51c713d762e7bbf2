//! Discretized reflected dynamics and discounted-cost estimation.
//!
//! Each time step adds a Gaussian increment to every coordinate and then
//! corrects the state back into the closed waiting polyhedron. Corrections
//! move one coordinate at a time: the farthest player (largest index on
//! ties) is pushed to its face, and players whose push is no longer needed
//! after later pushes are released. The step ends only when every player
//! either has no push or sits on the face it pushed toward.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::geometry::{deviation, farthest, StateVector};
use crate::nplayer::{algorithm1, JumpSequence};
use crate::params::{k_ratio, GameParams};
use crate::rng::Streams;
use crate::stats::mean_stderr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    /// Discount rate used for cost estimates.
    pub alpha: f64,
    /// Keep every `record_stride`-th step of each trajectory; 0 keeps only
    /// the first and last states.
    #[serde(default)]
    pub record_stride: usize,
    /// Pair path `2q + 1` with path `2q` using negated increments.
    #[serde(default)]
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, paths: usize, seed: u64, alpha: f64) -> Self {
        SimConfig { dt, horizon, paths, seed, alpha, record_stride: 0, antithetic: false }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(Error::input(format!("dt = {} must lie in (0, 1e-2]", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::input("horizon must be at least one time step"));
        }
        if self.paths == 0 {
            return Err(Error::input("need at least one path"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::input("alpha must be positive"));
        }
        if self.antithetic && self.paths % 2 == 1 {
            return Err(Error::input("antithetic sampling needs an even path count"));
        }
        if self.steps() > u32::MAX as usize - 1 {
            return Err(Error::input("too many time steps"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// `e^{−αT}`; above 1e−6 the truncated horizon is short.
    pub fn truncation_weight(&self) -> f64 {
        (-self.alpha * self.steps() as f64 * self.dt).exp()
    }

    /// Draw address of path `p`: the stream index and the sign applied.
    #[inline]
    pub(crate) fn draw_of(&self, p: usize) -> (u64, f64) {
        if self.antithetic {
            ((p / 2) as u64, if p.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (p as u64, 1.0)
        }
    }
}

/// Monte Carlo estimate with its standard error and truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Bound on the discounted cost beyond the horizon.
    pub tail_bound: f64,
    pub paths: usize,
}

/// Mean and standard error, treating antithetic pairs as single samples.
pub(crate) fn summarize(samples: &[f64], antithetic: bool) -> (f64, f64) {
    if antithetic {
        let pairs: Vec<f64> = samples.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        mean_stderr(&pairs)
    } else {
        mean_stderr(samples)
    }
}

/// Per-step correction counters, merged over paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SimDiagnostics {
    pub steps: u64,
    /// Steps that ended with at least one push.
    pub correction_steps: u64,
    /// Steps that ended with pushes by two or more players.
    pub multi_player_steps: u64,
    /// As `correction_steps`, restricted to steps starting strictly inside.
    pub interior_correction_steps: u64,
    /// As `multi_player_steps`, restricted to steps starting strictly inside.
    pub interior_multi_player_steps: u64,
    /// Largest `max_i |y_i| − c_N` after correction.
    pub max_excess: f64,
    /// Largest distance from its face of a player recorded as pushing.
    pub max_localization_gap: f64,
    /// Most correction rounds in a single step.
    pub max_rounds: usize,
    /// Any accumulator decreased.
    pub monotonicity_violations: u64,
}

impl SimDiagnostics {
    fn merge(mut self, o: &SimDiagnostics) -> Self {
        self.steps += o.steps;
        self.correction_steps += o.correction_steps;
        self.multi_player_steps += o.multi_player_steps;
        self.interior_correction_steps += o.interior_correction_steps;
        self.interior_multi_player_steps += o.interior_multi_player_steps;
        self.max_excess = self.max_excess.max(o.max_excess);
        self.max_localization_gap = self.max_localization_gap.max(o.max_localization_gap);
        self.max_rounds = self.max_rounds.max(o.max_rounds);
        self.monotonicity_violations += o.monotonicity_violations;
        self
    }

    /// Among correction steps that start strictly inside, the fraction
    /// where two or more players push.
    pub fn multi_player_frequency(&self) -> f64 {
        if self.interior_correction_steps == 0 {
            0.0
        } else {
            self.interior_multi_player_steps as f64 / self.interior_correction_steps as f64
        }
    }

    /// Multi-player correction steps (from strictly inside) per time step.
    pub fn multi_player_rate(&self) -> f64 {
        self.interior_multi_player_steps as f64 / self.steps.max(1) as f64
    }
}

/// One recorded path. `states` holds `N` entries per record and
/// `local_times` holds `2N`: entries `0..N` are upward pushes (faces
/// `y_i = −c_N`), entries `N..2N` downward pushes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathTrajectory {
    pub steps: Vec<usize>,
    pub states: Vec<f64>,
    pub local_times: Vec<f64>,
}

impl PathTrajectory {
    pub fn records(&self) -> usize {
        self.steps.len()
    }

    pub fn state(&self, r: usize) -> &[f64] {
        let n = self.states.len() / self.steps.len();
        &self.states[r * n..(r + 1) * n]
    }

    pub fn local_time(&self, r: usize) -> &[f64] {
        let m = self.local_times.len() / self.steps.len();
        &self.local_times[r * m..(r + 1) * m]
    }

    /// `(ξ^{i,+}, ξ^{i,−})` at record `r`; the reflection directions are unit
    /// coordinate vectors, so these equal the local times of `i`'s faces.
    pub fn controls(&self, r: usize, player: usize) -> (f64, f64) {
        let eta = self.local_time(r);
        let n = eta.len() / 2;
        (eta[player], eta[player + n])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryBatch {
    pub n: usize,
    pub c_n: f64,
    pub dt: f64,
    /// Jumps applied at time 0 to enter the closed waiting region.
    pub initial_jumps: JumpSequence,
    pub paths: Vec<PathTrajectory>,
    pub diagnostics: SimDiagnostics,
}

impl TrajectoryBatch {
    /// CSV with columns `path,step,t,x1..xN,eta1..eta2N`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::input(format!("trajectory output: {e}"));
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["path".to_string(), "step".into(), "t".into()];
        header.extend((1..=self.n).map(|i| format!("x{i}")));
        header.extend((1..=2 * self.n).map(|j| format!("eta{j}")));
        out.write_record(&header).map_err(io)?;
        for (p, path) in self.paths.iter().enumerate() {
            for r in 0..path.records() {
                let step = path.steps[r];
                let mut row = vec![p.to_string(), step.to_string(), fmt_g(step as f64 * self.dt)];
                row.extend(path.state(r).iter().map(|&v| fmt_g(v)));
                row.extend(path.local_time(r).iter().map(|&v| fmt_g(v)));
                out.write_record(&row).map_err(io)?;
            }
        }
        out.flush().map_err(|e| Error::input(format!("trajectory output: {e}")))?;
        Ok(())
    }
}

/// Twelve significant digits, shortest form.
pub fn fmt_g(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.11e}");
    let parsed: f64 = s.parse().expect("formatted float parses");
    let plain = format!("{parsed}");
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        plain
    } else {
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{e}")
    }
}

/// Per-step projection back into the closed polyhedron.
pub(crate) struct Reflector {
    n: usize,
    c: f64,
    inv: f64,
    tol: f64,
    max_rounds: usize,
}

impl Reflector {
    pub(crate) fn new(n: usize, c: f64) -> Self {
        Reflector { n, c, inv: 1.0 / (n as f64 - 1.0), tol: 1e-12 * c.max(1.0), max_rounds: 100 * n }
    }

    #[inline]
    fn y(&self, x: &[f64], sum: f64, i: usize) -> f64 {
        x[i] - (sum - x[i]) * self.inv
    }

    /// Corrects `x` in place, accumulating per-player displacements in `u`
    /// (positive = pushed up). Returns the number of rounds used, or `None`
    /// if the cap was hit.
    pub(crate) fn correct(&self, x: &mut [f64], u: &mut [f64], ys: &mut [f64]) -> Option<usize> {
        let mut sum: f64 = x.iter().sum();
        let mut rounds = 0;
        loop {
            loop {
                for (i, y) in ys.iter_mut().enumerate().take(self.n) {
                    *y = self.y(x, sum, i);
                }
                let (i, y) = farthest(ys);
                if y.abs() <= self.c + self.tol {
                    break;
                }
                rounds += 1;
                if rounds > self.max_rounds {
                    return None;
                }
                let target = (sum - x[i]) * self.inv + self.c.copysign(y);
                let delta = target - x[i];
                x[i] = target;
                sum += delta;
                u[i] += delta;
            }
            let mut released = false;
            for j in 0..self.n {
                if u[j] == 0.0 {
                    continue;
                }
                let free = self.y(x, sum, j) - u[j];
                let want = if free < -self.c {
                    -self.c - free
                } else if free > self.c {
                    self.c - free
                } else {
                    0.0
                };
                if (want - u[j]).abs() > self.tol {
                    rounds += 1;
                    if rounds > self.max_rounds {
                        return None;
                    }
                    let delta = want - u[j];
                    x[j] += delta;
                    sum += delta;
                    u[j] = want;
                    released = true;
                }
            }
            if !released {
                return Some(rounds);
            }
        }
    }
}

/// What a single path run should produce.
pub(crate) struct PathTask<'a> {
    pub record: bool,
    pub record_stride: usize,
    /// Player whose discounted cost is accumulated, with the cost function.
    pub payoff: Option<(usize, &'a CostSpec)>,
}

pub(crate) struct PathResult {
    pub trajectory: Option<PathTrajectory>,
    pub cost: f64,
    pub diagnostics: SimDiagnostics,
}

pub(crate) fn run_path(
    p: usize,
    start: &[f64],
    c_n: f64,
    cfg: &SimConfig,
    streams: &Streams,
    task: &PathTask<'_>,
) -> Result<PathResult> {
    let n = start.len();
    let refl = Reflector::new(n, c_n);
    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    let (stream, sign) = cfg.draw_of(p);
    let k = k_ratio(n);
    let decay = (-cfg.alpha * cfg.dt).exp();
    let stride = task.record_stride;

    let mut x = start.to_vec();
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut eta = vec![0.0; 2 * n];
    let mut diag = SimDiagnostics::default();
    let mut traj =
        task.record.then(|| PathTrajectory { steps: vec![0], states: x.clone(), local_times: eta.clone() });

    let mut sum: f64 = x.iter().sum();
    let mut prev_max = (0..n).map(|i| deviation(x[i], sum, n).abs()).fold(0.0, f64::max);
    let mut disc = 1.0;
    let mut running = 0.0;
    let mut fuel = 0.0;

    for s in 0..steps {
        if let Some((i, cost)) = task.payoff {
            running += disc * cost.h(deviation(x[i], sum, n) / k);
        }
        streams.fill_normals(stream, s as u32, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += sign * sd * zi;
        }
        u.iter_mut().for_each(|v| *v = 0.0);
        let rounds = refl.correct(&mut x, &mut u, &mut ys).ok_or(Error::Projection {
            path: p,
            step: s,
            rounds: refl.max_rounds,
        })?;
        disc *= decay;
        sum = x.iter().sum();

        let mut pushers = 0;
        let mut max_abs: f64 = 0.0;
        for j in 0..n {
            let y = deviation(x[j], sum, n);
            max_abs = max_abs.max(y.abs());
            if u[j] != 0.0 {
                pushers += 1;
                let face = -c_n.copysign(u[j]);
                diag.max_localization_gap = diag.max_localization_gap.max((y - face).abs());
                if u[j] > 0.0 {
                    eta[j] += u[j];
                } else {
                    eta[j + n] -= u[j];
                }
            }
        }
        if let Some((i, _)) = task.payoff {
            fuel += disc * u[i].abs();
        }
        diag.steps += 1;
        diag.max_rounds = diag.max_rounds.max(rounds);
        diag.max_excess = diag.max_excess.max(max_abs - c_n);
        let interior = prev_max < c_n - refl.tol;
        if pushers > 0 {
            diag.correction_steps += 1;
            diag.interior_correction_steps += interior as u64;
        }
        if pushers > 1 {
            diag.multi_player_steps += 1;
            diag.interior_multi_player_steps += interior as u64;
        }
        prev_max = max_abs;

        if let Some(t) = traj.as_mut() {
            let last = s + 1 == steps;
            if last || (stride > 0 && (s + 1) % stride == 0) {
                if let Some(prev) = t.local_times.len().checked_sub(2 * n) {
                    let before = &t.local_times[prev..];
                    if eta.iter().zip(before).any(|(a, b)| a < b) {
                        diag.monotonicity_violations += 1;
                    }
                }
                t.steps.push(s + 1);
                t.states.extend_from_slice(&x);
                t.local_times.extend_from_slice(&eta);
            }
        }
    }
    Ok(PathResult { trajectory: traj, cost: running * cfg.dt + fuel, diagnostics: diag })
}

fn prepare(x0: &StateVector, c_n: f64, cfg: &SimConfig) -> Result<JumpSequence> {
    cfg.validate()?;
    if x0.n() < 2 {
        return Err(Error::input("the reflected dynamics need N >= 2"));
    }
    if !(c_n > 0.0) {
        return Err(Error::input("threshold must be positive"));
    }
    algorithm1(x0, c_n)
}

/// Simulates `cfg.paths` equilibrium trajectories from `x0`.
pub fn simulate_reflected(x0: &StateVector, c_n: f64, cfg: &SimConfig) -> Result<TrajectoryBatch> {
    let jumps = prepare(x0, c_n, cfg)?;
    let streams = Streams::new(cfg.seed);
    let task = PathTask { record: true, record_stride: cfg.record_stride, payoff: None };
    let results: Vec<PathResult> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| run_path(p, &jumps.endpoint, c_n, cfg, &streams, &task))
        .collect::<Result<_>>()?;
    let diagnostics = results.iter().fold(SimDiagnostics::default(), |d, r| d.merge(&r.diagnostics));
    Ok(TrajectoryBatch {
        n: x0.n(),
        c_n,
        dt: cfg.dt,
        initial_jumps: jumps,
        paths: results.into_iter().filter_map(|r| r.trajectory).collect(),
        diagnostics,
    })
}

/// Diagnostics only, without storing trajectories.
pub fn simulate_diagnostics(x0: &StateVector, c_n: f64, cfg: &SimConfig) -> Result<SimDiagnostics> {
    let jumps = prepare(x0, c_n, cfg)?;
    let streams = Streams::new(cfg.seed);
    let task = PathTask { record: false, record_stride: 0, payoff: None };
    let diags: Vec<SimDiagnostics> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| run_path(p, &jumps.endpoint, c_n, cfg, &streams, &task).map(|r| r.diagnostics))
        .collect::<Result<_>>()?;
    Ok(diags.iter().fold(SimDiagnostics::default(), |d, o| d.merge(o)))
}

/// Discounted cost of player `i` (0-based) under the equilibrium dynamics,
/// including the jumps it makes at time 0.
pub fn mc_payoff(
    i: usize,
    x0: &StateVector,
    params: &GameParams,
    cost: &CostSpec,
    c_n: f64,
    cfg: &SimConfig,
) -> Result<McEstimate> {
    params.validate()?;
    if params.n != x0.n() || i >= x0.n() {
        return Err(Error::input("player index or dimension does not match the game"));
    }
    if params.alpha() != Some(cfg.alpha) {
        return Err(Error::input("simulation discount differs from the game discount"));
    }
    let jumps = prepare(x0, c_n, cfg)?;
    let charge = jumps.charged_to(i);
    let streams = Streams::new(cfg.seed);
    let task = PathTask { record: false, record_stride: 0, payoff: Some((i, cost)) };
    let costs: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| run_path(p, &jumps.endpoint, c_n, cfg, &streams, &task).map(|r| r.cost))
        .collect::<Result<_>>()?;
    let (mean, stderr) = summarize(&costs, cfg.antithetic);
    let k = k_ratio(x0.n());
    Ok(McEstimate {
        mean: charge + mean,
        stderr,
        tail_bound: tail_bound(cost, c_n / k, k, c_n, cfg),
        paths: cfg.paths,
    })
}

/// `e^{−αT}·(h(edge)/α + σ²/(2 c α))`: the running cost is at most `h(edge)`
/// inside the band, and `σ²/(2c)` is the long-run pushing rate of a
/// Brownian motion with variance rate `σ²` reflected in `[−c, c]`.
pub(crate) fn tail_bound(cost: &CostSpec, edge: f64, sigma2: f64, c: f64, cfg: &SimConfig) -> f64 {
    cfg.truncation_weight() * (cost.h(edge) / cfg.alpha + sigma2 / (2.0 * c * cfg.alpha))
}

/// Projects `x` onto `[lo, hi]`, returning the new point and the upward and
/// downward pushes.
#[inline]
pub(crate) fn reflect_1d(x: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    if x < lo {
        (lo, lo - x, 0.0)
    } else if x > hi {
        (hi, 0.0, x - hi)
    } else {
        (x, 0.0, 0.0)
    }
}

/// A mean-field path: Brownian motion kept in `[m − c, m + c]` by minimal pushes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MfgPath {
    /// Signed jump at time 0.
    pub initial_jump: f64,
    pub steps: Vec<usize>,
    pub x: Vec<f64>,
    /// Cumulative upward pushes (excluding the initial jump).
    pub xi_plus: Vec<f64>,
    /// Cumulative downward pushes (excluding the initial jump).
    pub xi_minus: Vec<f64>,
    /// Some step pushed in both directions at once.
    pub simultaneous_push: bool,
    /// The path never touched the band edges after time 0.
    pub stayed_interior: bool,
}

/// `cfg.paths` independent mean-field paths from `x0`.
pub fn simulate_mfg_path(x0: f64, m: f64, c: f64, cfg: &SimConfig) -> Result<Vec<MfgPath>> {
    cfg.validate()?;
    if !(c > 0.0) {
        return Err(Error::input("threshold must be positive"));
    }
    let streams = Streams::new(cfg.seed);
    let (lo, hi) = (m - c, m + c);
    let start = x0.clamp(lo, hi);
    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    let stride = cfg.record_stride;
    Ok((0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let (stream, sign) = cfg.draw_of(p);
            let mut path = MfgPath {
                initial_jump: start - x0,
                steps: vec![0],
                x: vec![start],
                xi_plus: vec![0.0],
                xi_minus: vec![0.0],
                simultaneous_push: false,
                stayed_interior: true,
            };
            let (mut x, mut up, mut down) = (start, 0.0, 0.0);
            let mut z = [0.0];
            for s in 0..steps {
                streams.fill_normals(stream, s as u32, &mut z);
                let (nx, du, dd) = reflect_1d(x + sign * sd * z[0], lo, hi);
                x = nx;
                up += du;
                down += dd;
                path.simultaneous_push |= du > 0.0 && dd > 0.0;
                path.stayed_interior &= du == 0.0 && dd == 0.0 && x > lo && x < hi;
                if s + 1 == steps || (stride > 0 && (s + 1) % stride == 0) {
                    path.steps.push(s + 1);
                    path.x.push(x);
                    path.xi_plus.push(up);
                    path.xi_minus.push(down);
                }
            }
            path
        })
        .collect())
}

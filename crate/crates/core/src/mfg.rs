//! The mean-field game: value, control, consistency checks and the
//! N-player experiments built on them.

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{CostSpec, Resolvent};
use crate::error::{Error, Result};
use crate::montecarlo::{reflect_1d, summarize, tail_bound, McEstimate, SimConfig};
use crate::rng::{Streams, INITIAL_STEP};
use crate::stats::{ks_statistic, mean_stderr, ols_slope};
use crate::thresholds::{interior_derivs, interior_value, solve_c, Thresholds};

/// Stationary mean-field equilibrium with the population mean locked at `m0`.
#[derive(Debug, Clone)]
pub struct MfgSolution {
    pub m0: f64,
    pub c: f64,
    pub alpha: f64,
    pub cost: CostSpec,
}

impl MfgSolution {
    pub fn solve(m0: f64, alpha: f64, cost: &CostSpec) -> Result<Self> {
        Ok(MfgSolution { m0, c: solve_c(alpha, cost)?, alpha, cost: cost.clone() })
    }

    fn resolvent(&self) -> Resolvent {
        Resolvent::new(1, self.alpha, self.cost.clone()).expect("validated at solve time")
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let z = (x - self.m0).abs();
        let res = self.resolvent();
        if z <= self.c {
            interior_value(&res, self.c, z)
        } else {
            Ok(interior_value(&res, self.c, self.c)? + (z - self.c))
        }
    }

    /// `value′(x)`.
    pub fn slope(&self, x: f64) -> Result<f64> {
        let z = x - self.m0;
        if z.abs() > self.c {
            return Ok(z.signum());
        }
        Ok(interior_derivs(&self.resolvent(), self.c, z)?.0)
    }
}

/// Mean-field equilibrium value at `x` when the population mean is `m0`.
pub fn mfg_value(x: f64, m0: f64, alpha: f64, cost: &CostSpec) -> Result<f64> {
    MfgSolution::solve(m0, alpha, cost)?.value(x)
}

/// Bang-bang push returning `x` to `[m0 − c, m0 + c]`.
pub fn mfg_control_step(x: f64, m0: f64, c: f64) -> f64 {
    let (y, up, down) = reflect_1d(x, m0 - c, m0 + c);
    debug_assert!((y - x - (up - down)).abs() <= 1e-12 * (1.0 + x.abs()));
    up - down
}

/// Discounted cost `E∫e^{−αt}[h(X_t − m0) dt + d|ξ|_t]` of the bang-bang
/// policy started at `x0`.
pub fn mfg_payoff(x0: f64, sol: &MfgSolution, cfg: &SimConfig) -> Result<McEstimate> {
    cfg.validate()?;
    if cfg.alpha != sol.alpha {
        return Err(Error::input("simulation discount differs from the solution's"));
    }
    let (lo, hi) = (sol.m0 - sol.c, sol.m0 + sol.c);
    let start = x0.clamp(lo, hi);
    let charge = (start - x0).abs();
    let streams = Streams::new(cfg.seed);
    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    let decay = (-cfg.alpha * cfg.dt).exp();
    let costs: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let (stream, sign) = cfg.draw_of(p);
            let mut z = [0.0];
            let (mut x, mut disc, mut run, mut fuel) = (start, 1.0, 0.0, 0.0);
            for s in 0..steps {
                run += disc * sol.cost.h(x - sol.m0);
                streams.fill_normals(stream, s as u32, &mut z);
                let (nx, up, down) = reflect_1d(x + sign * sd * z[0], lo, hi);
                x = nx;
                disc *= decay;
                fuel += disc * (up + down);
            }
            run * cfg.dt + fuel
        })
        .collect();
    let (mean, stderr) = summarize(&costs, cfg.antithetic);
    Ok(McEstimate {
        mean: charge + mean,
        stderr,
        tail_bound: tail_bound(&sol.cost, sol.c, 1.0, sol.c, cfg),
        paths: cfg.paths,
    })
}

// ---------------------------------------------------------------------------
// Initial laws and the fixed point

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialLaw {
    PointMass(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Equal weights on `m ± a`.
    TwoPoint {
        m: f64,
        a: f64,
    },
    /// Atoms `(x, weight)`; weights need not be normalized.
    Discrete(Vec<(f64, f64)>),
}

impl InitialLaw {
    pub fn mean(&self) -> f64 {
        match self {
            InitialLaw::PointMass(m) => *m,
            InitialLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            InitialLaw::TwoPoint { m, .. } => *m,
            InitialLaw::Discrete(atoms) => {
                let w: f64 = atoms.iter().map(|a| a.1).sum();
                atoms.iter().map(|a| a.0 * a.1).sum::<f64>() / w
            }
        }
    }

    /// Rejects laws that are not symmetric about their mean.
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialLaw::PointMass(m) if m.is_finite() => Ok(()),
            InitialLaw::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            InitialLaw::TwoPoint { m, a } if m.is_finite() && a.is_finite() => Ok(()),
            InitialLaw::Discrete(atoms) => {
                if atoms.is_empty() || atoms.iter().any(|&(x, w)| !x.is_finite() || !(w > 0.0)) {
                    return Err(Error::input("discrete law needs finite atoms with positive weights"));
                }
                let m = self.mean();
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let scale = atoms.iter().map(|a| (a.0 - m).abs()).fold(1.0, f64::max);
                for &(x, _) in atoms {
                    let mirror = 2.0 * m - x;
                    let w_here: f64 =
                        atoms.iter().filter(|a| (a.0 - x).abs() <= 1e-12 * scale).map(|a| a.1).sum();
                    let w_there: f64 =
                        atoms.iter().filter(|a| (a.0 - mirror).abs() <= 1e-12 * scale).map(|a| a.1).sum();
                    if (w_here - w_there).abs() > 1e-12 * total {
                        return Err(Error::input(format!(
                            "initial law is not symmetric about its mean {m}: atom {x} has no mirror"
                        )));
                    }
                }
                Ok(())
            }
            _ => Err(Error::input("malformed initial law")),
        }
    }

    /// Draw for path `p`. Under antithetic sampling odd paths take the
    /// mirror image of their partner's draw.
    fn sample(&self, streams: &Streams, cfg: &SimConfig, p: usize) -> f64 {
        let (stream, sign) = cfg.draw_of(p);
        let (u, _) = streams.uniform_pair(0, INITIAL_STEP, stream);
        let m = self.mean();
        let base = match self {
            InitialLaw::PointMass(m) => *m,
            InitialLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
            InitialLaw::TwoPoint { m, a } => {
                if u < 0.5 {
                    m - a
                } else {
                    m + a
                }
            }
            InitialLaw::Discrete(atoms) => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let mut acc = 0.0;
                let target = u * total;
                atoms
                    .iter()
                    .find(|a| {
                        acc += a.1;
                        acc >= target
                    })
                    .unwrap_or(&atoms[atoms.len() - 1])
                    .0
            }
        };
        m + sign * (base - m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub m0: f64,
    pub c: f64,
    pub particles: usize,
    /// `max_t |m̂_t − m0|` over recorded times at or after the burn-in.
    pub max_drift: f64,
    pub drift_time: f64,
    /// `3c/√M`.
    pub band: f64,
    pub burn_in: f64,
    /// `m̂_t` at every step, starting with `t = 0` after the initial jumps.
    pub mean_path: Vec<f64>,
}

impl DriftReport {
    pub fn within_band(&self) -> bool {
        self.max_drift <= self.band
    }
}

const CHUNK: usize = 64;

/// Empirical mean of `cfg.paths` particles under the mean-field policy.
pub fn fixed_point_check(
    mu0: &InitialLaw,
    cost: &CostSpec,
    cfg: &SimConfig,
    burn_in: f64,
) -> Result<DriftReport> {
    mu0.validate()?;
    cfg.validate()?;
    let m0 = mu0.mean();
    let c = solve_c(cfg.alpha, cost)?;
    let (lo, hi) = (m0 - c, m0 + c);
    let streams = Streams::new(cfg.seed);
    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    let chunks: Vec<Vec<f64>> = (0..cfg.paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ch| {
            let mut sums = vec![0.0; steps + 1];
            let mut z = [0.0];
            for p in ch * CHUNK..((ch + 1) * CHUNK).min(cfg.paths) {
                let (stream, sign) = cfg.draw_of(p);
                let mut x = mu0.sample(&streams, cfg, p).clamp(lo, hi);
                sums[0] += x;
                for s in 0..steps {
                    streams.fill_normals(stream, s as u32, &mut z);
                    x = reflect_1d(x + sign * sd * z[0], lo, hi).0;
                    sums[s + 1] += x;
                }
            }
            sums
        })
        .collect();
    let mut mean_path = vec![0.0; steps + 1];
    for ch in &chunks {
        for (m, s) in mean_path.iter_mut().zip(ch) {
            *m += s;
        }
    }
    let mut report = DriftReport {
        m0,
        c,
        particles: cfg.paths,
        max_drift: 0.0,
        drift_time: 0.0,
        band: 3.0 * c / (cfg.paths as f64).sqrt(),
        burn_in,
        mean_path: Vec::new(),
    };
    for (s, m) in mean_path.iter_mut().enumerate() {
        *m /= cfg.paths as f64;
        let t = s as f64 * cfg.dt;
        if t >= burn_in && (*m - m0).abs() > report.max_drift {
            report.max_drift = (*m - m0).abs();
            report.drift_time = t;
        }
    }
    report.mean_path = mean_path;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub ks: f64,
    pub paths: usize,
    pub horizon: f64,
    pub c: f64,
}

/// KS distance between terminal positions of paths started at `m0` and
/// the uniform law on `[m0 − c, m0 + c]`, for any band half-width `c`.
pub fn terminal_ks(m0: f64, c: f64, cfg: &SimConfig) -> Result<KsReport> {
    cfg.validate()?;
    if !(c > 0.0) {
        return Err(Error::input("band half-width must be positive"));
    }
    let (lo, hi) = (m0 - c, m0 + c);
    let streams = Streams::new(cfg.seed);
    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    let mut terminal: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let (stream, sign) = cfg.draw_of(p);
            let mut z = [0.0];
            let mut x = m0;
            for s in 0..steps {
                streams.fill_normals(stream, s as u32, &mut z);
                x = reflect_1d(x + sign * sd * z[0], lo, hi).0;
            }
            x
        })
        .collect();
    let ks = ks_statistic(&mut terminal, |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0));
    Ok(KsReport { ks, paths: cfg.paths, horizon: cfg.horizon, c })
}

/// Stationarity of the mean-field equilibrium: terminal law against the
/// uniform law on the band. Requires `T ≥ 20/α`.
pub fn stationary_density_check(m0: f64, cost: &CostSpec, cfg: &SimConfig) -> Result<KsReport> {
    if cfg.horizon < 20.0 / cfg.alpha {
        return Err(Error::input(format!(
            "horizon {} is shorter than the burn-in 20/alpha = {}",
            cfg.horizon,
            20.0 / cfg.alpha
        )));
    }
    terminal_ks(m0, solve_c(cfg.alpha, cost)?, cfg)
}

// ---------------------------------------------------------------------------
// ε-equilibrium

#[derive(Debug, Clone, Serialize)]
pub struct EpsNeRow {
    pub n: usize,
    /// Player 1's cost when everyone follows the mean-field policy.
    pub cost_mfg: f64,
    pub stderr_mfg: f64,
    /// Player 1's cost after deviating to the comparator threshold.
    pub cost_dev: f64,
    pub stderr_dev: f64,
    pub gain: f64,
    /// Paired standard error of `gain`.
    pub stderr_gain: f64,
    pub c_dev: f64,
}

impl EpsNeRow {
    pub fn indistinguishable_from_zero(&self) -> bool {
        self.gain.abs() <= 3.0 * self.stderr_gain
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsNeReport {
    pub alpha: f64,
    pub c: f64,
    pub rows: Vec<EpsNeRow>,
    /// OLS slope of `ln max(gain, stderr)` on `ln N`; present with ≥ 4 sizes.
    pub slope: Option<f64>,
    pub flags: Vec<String>,
}

fn deviation_costs(
    n: usize,
    c: f64,
    c_dev: f64,
    cost: &CostSpec,
    cfg: &SimConfig,
    streams: &Streams,
) -> Vec<(f64, f64)> {
    let m0 = 0.0;
    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    let decay = (-cfg.alpha * cfg.dt).exp();
    let shrink = (n as f64 - 1.0) / n as f64;
    (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let (stream, sign) = cfg.draw_of(p);
            let mut z = vec![0.0; n];
            let mut others = vec![m0; n - 1];
            let (mut xa, mut xb) = (m0, m0);
            let mut disc = 1.0;
            let (mut run_a, mut run_b, mut fuel_a, mut fuel_b) = (0.0, 0.0, 0.0, 0.0);
            for s in 0..steps {
                let mbar = others.iter().sum::<f64>() / (n as f64 - 1.0);
                run_a += disc * cost.h(shrink * (xa - mbar));
                run_b += disc * cost.h(shrink * (xb - mbar));
                streams.fill_normals(stream, s as u32, &mut z);
                let dw = sign * sd * z[0];
                let (na, ua, da) = reflect_1d(xa + dw, m0 - c, m0 + c);
                let (nb, ub, db) = reflect_1d(xb + dw, m0 - c_dev, m0 + c_dev);
                xa = na;
                xb = nb;
                for (o, zj) in others.iter_mut().zip(&z[1..]) {
                    *o = reflect_1d(*o + sign * sd * zj, m0 - c, m0 + c).0;
                }
                disc *= decay;
                fuel_a += disc * (ua + da);
                fuel_b += disc * (ub + db);
            }
            (run_a * cfg.dt + fuel_a, run_b * cfg.dt + fuel_b)
        })
        .collect()
}

/// For each `N`, player 1's gain from deviating to the threshold that is
/// optimal against the frozen mean, with all others on the mean-field policy.
/// The two arms share every Brownian increment.
pub fn epsilon_ne_experiment(
    ns: &[usize],
    alpha: f64,
    cost: &CostSpec,
    cfg: &SimConfig,
) -> Result<EpsNeReport> {
    cfg.validate()?;
    if ns.is_empty() || ns.iter().any(|&n| n < 2) {
        return Err(Error::input("player counts must all be at least 2"));
    }
    if cfg.alpha != alpha {
        return Err(Error::input("simulation discount differs from the experiment's"));
    }
    let c = solve_c(alpha, cost)?;
    let base = Streams::new(cfg.seed);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let shrink = (n as f64 - 1.0) / n as f64;
        let c_dev = solve_c(alpha, &cost.rescaled(shrink)?)?;
        let streams = base.fork(n as u32);
        let pairs = deviation_costs(n, c, c_dev, cost, cfg, &streams);
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let g: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        let (cost_mfg, stderr_mfg) = summarize(&a, cfg.antithetic);
        let (cost_dev, stderr_dev) = summarize(&b, cfg.antithetic);
        let (gain, stderr_gain) = summarize(&g, cfg.antithetic);
        rows.push(EpsNeRow { n, cost_mfg, stderr_mfg, cost_dev, stderr_dev, gain, stderr_gain, c_dev });
    }
    let slope = (rows.len() >= 4).then(|| {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.gain.max(r.stderr_gain).ln()).collect();
        ols_slope(&x, &y)
    });
    let mut flags = Vec::new();
    for r in &rows {
        if r.indistinguishable_from_zero() {
            flags.push(format!("N = {}: gain indistinguishable from 0", r.n));
        }
        if r.gain < -3.0 * r.stderr_gain {
            flags.push(format!("N = {}: gain significantly negative", r.n));
        }
    }
    if rows.windows(2).any(|w| w[1].gain > w[0].gain + 3.0 * (w[0].stderr_gain + w[1].stderr_gain)) {
        flags.push("gains are not monotone in N beyond noise".into());
    }
    Ok(EpsNeReport { alpha, c, rows, slope, flags })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationSearch {
    pub threshold: f64,
    pub cost: f64,
    pub stderr: f64,
    pub evaluations: usize,
}

/// Golden-section search over player 1's deviating threshold in
/// `[lo, hi]`; every evaluation reuses the same increments.
pub fn deviation_search(
    n: usize,
    alpha: f64,
    cost: &CostSpec,
    cfg: &SimConfig,
    (lo, hi): (f64, f64),
    iterations: usize,
) -> Result<DeviationSearch> {
    cfg.validate()?;
    if n < 2 || !(0.0 < lo && lo < hi) {
        return Err(Error::input("need N >= 2 and 0 < lo < hi"));
    }
    let c = solve_c(alpha, cost)?;
    let streams = Streams::new(cfg.seed).fork(n as u32);
    let eval = |b: f64| {
        let pairs = deviation_costs(n, c, b, cost, cfg, &streams);
        let v: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        summarize(&v, cfg.antithetic)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    let mut evals = 2;
    for _ in 0..iterations {
        if f1.0 < f2.0 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval(x2);
        }
        evals += 1;
    }
    let (threshold, (cost_v, stderr)) = if f1.0 < f2.0 { (x1, f1) } else { (x2, f2) };
    Ok(DeviationSearch { threshold, cost: cost_v, stderr, evaluations: evals })
}

// ---------------------------------------------------------------------------
// Tables

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    #[serde(rename = "c_N")]
    pub c_n: f64,
    #[serde(rename = "v_N")]
    pub v_n: f64,
    pub c: f64,
    pub v_star: f64,
}

/// `c_N`, the diagonal value `v_N`, `c` and `v*` for every `(N, α)`.
pub fn convergence_tables(ns: &[usize], alphas: &[f64], cost: &CostSpec) -> Result<Vec<TableRow>> {
    let mut rows = Vec::with_capacity(ns.len() * alphas.len());
    for &alpha in alphas {
        let limit = MfgSolution::solve(0.0, alpha, cost)?;
        let v_star = limit.value(0.0)?;
        let cells: Vec<Result<TableRow>> = ns
            .par_iter()
            .map(|&n| {
                let t = Thresholds::solve(n, alpha, cost)?;
                Ok(TableRow { n, alpha, c_n: t.c_n, v_n: t.interior_value(0.0)?, c: limit.c, v_star })
            })
            .collect();
        for cell in cells {
            rows.push(cell?);
        }
    }
    Ok(rows)
}

/// Mean and standard error of an arbitrary sample, exposed for reports.
pub fn sample_summary(xs: &[f64]) -> (f64, f64) {
    mean_stderr(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> CostSpec {
        CostSpec::quadratic()
    }

    #[test]
    fn value_at_mean() {
        let c: f64 = 1.497502614683258;
        let v = mfg_value(3.0, 3.0, 2.0, &q()).unwrap();
        assert!((v - 0.25 * (1.0 - 1.0 / (2.0 * c).cosh())).abs() < 1e-14);
        assert!((v - 0.2250).abs() < 1e-4);
        let sol = MfgSolution::solve(3.0, 2.0, &q()).unwrap();
        assert_eq!(sol.slope(3.0).unwrap(), 0.0);
        assert!((sol.slope(3.0 + sol.c).unwrap() - 1.0).abs() < 1e-8);
        assert!((sol.slope(3.0 - sol.c).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn control_examples() {
        assert_eq!(mfg_control_step(0.3, 0.0, 1.0), 0.0);
        assert_eq!(mfg_control_step(3.0, 0.0, 1.0), -2.0);
        for d in [0.2, 1.7, 5.0] {
            let (a, b) = (mfg_control_step(1.0 + d, 1.0, 1.0), mfg_control_step(1.0 - d, 1.0, 1.0));
            assert!((a + b).abs() < 1e-14);
        }
    }

    #[test]
    fn laws() {
        assert!(InitialLaw::Discrete(vec![(-1.0, 1.0), (1.0, 1.0), (0.0, 3.0)]).validate().is_ok());
        assert!(InitialLaw::Discrete(vec![(-1.0, 1.0), (2.0, 1.0), (0.0, 3.0)]).validate().is_err());
        assert!(InitialLaw::Discrete(vec![(-1.0, 1.0), (1.0, 2.0)]).validate().is_err());
        assert!(InitialLaw::Uniform { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert_eq!(InitialLaw::TwoPoint { m: 2.0, a: 5.0 }.mean(), 2.0);
    }

    #[test]
    fn two_point_mirrored_mean_is_exact() {
        let cfg = SimConfig::new(1e-3, 0.01, 200, 4, 2.0).with_antithetic(true);
        let law = InitialLaw::TwoPoint { m: 1.0, a: 4.0 };
        let rep = fixed_point_check(&law, &q(), &cfg, 0.0).unwrap();
        assert!((rep.mean_path[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tables_small() {
        let rows = convergence_tables(&[2, 3], &[2.0], &q()).unwrap();
        assert!((rows[0].c_n - 4.707104445325443).abs() < 1e-10);
        assert!((rows[0].v_n - 0.12467870374860707).abs() < 1e-12);
        assert!((rows[1].v_star - 0.22504429732845668).abs() < 1e-12);
    }
}

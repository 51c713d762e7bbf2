//! `fuelgames`: thresholds, values, simulations and experiments for the
//! N-player fuel follower game and its mean-field limit.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{load_config, CommandKind, CostError, Mode, Opts, RunConfig};
use fuelgames::geometry::check_sc;
use fuelgames::mfg::{mfg_payoff, KsReport};
use fuelgames::montecarlo::fmt_g;
use fuelgames::nplayer::diagonal_value;
use fuelgames::*;

#[derive(Parser)]
#[command(name = "fuelgames", version, about = "N-player fuel follower games and their mean-field limit")]
struct Cli {
    /// JSON file with a `command` and any option; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
    /// Options for a command named in `--config`.
    #[command(flatten)]
    top: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Thresholds `c_N` (`c` for N = 1): CSV `N,alpha,c_N`.
    Thresholds(Opts),
    /// Equilibrium values at `--x0`: CSV `player,value`.
    Value(Opts),
    /// Equilibrium dynamics: trajectories, or `--mode payoff` cost estimates.
    Simulate(Opts),
    /// Mean-field game: value, payoff, fixed-point or stationarity checks.
    Mfg(Opts),
    /// Gain from unilateral deviation against the mean-field policy.
    EpsNe(Opts),
    /// Convergence tables: CSV `N,alpha,c_N,v_N,c,v_star`.
    Tables(Opts),
    /// Checks of the waiting polyhedron and its reflection directions.
    ValidateGeometry(Opts),
}

enum Failure {
    /// Bad flags or configuration.
    Usage(String),
    Lib(Error),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Usage(s)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<CostError> for Failure {
    fn from(e: CostError) -> Self {
        Failure::Lib(e.0)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib(e) if e.is_input() => 2,
            Failure::Lib(_) => 3,
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// A CSV table plus anything worth recording in the manifest.
struct Output {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Raw CSV text, for writers that produce their own.
    raw: Option<Vec<u8>>,
    report: Value,
}

impl Output {
    fn table(header: &[&str]) -> Self {
        Output {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            raw: None,
            report: Value::Null,
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn bytes(&self) -> Vec<u8> {
        if let Some(raw) = &self.raw {
            return raw.clone();
        }
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s.into_bytes()
    }
}

fn g(v: f64) -> String {
    fmt_g(v)
}

fn thresholds(cfg: &RunConfig) -> Run<Output> {
    let cost = cfg.cost()?;
    let mut out = Output::table(&["N", "alpha", "c_N"]);
    for alpha in cfg.alphas()? {
        for n in cfg.counts()? {
            let c = if n == 1 { solve_c(alpha, &cost)? } else { solve_c_n(n, alpha, &cost)? };
            out.push(vec![n.to_string(), g(alpha), g(c)]);
        }
    }
    Ok(out)
}

fn tables(cfg: &RunConfig) -> Run<Output> {
    let cost = cfg.cost()?;
    let rows = convergence_tables(&cfg.counts()?, &cfg.alphas()?, &cost)?;
    let mut out = Output::table(&["N", "alpha", "c_N", "v_N", "c", "v_star"]);
    for r in rows {
        out.push(vec![r.n.to_string(), g(r.alpha), g(r.c_n), g(r.v_n), g(r.c), g(r.v_star)]);
    }
    Ok(out)
}

fn start_state(cfg: &RunConfig, n: usize) -> Run<StateVector> {
    match cfg.x0()? {
        None => Ok(StateVector::zeros(n)),
        Some(x) if x.len() == n => Ok(StateVector::new(x)),
        Some(x) => Err(format!("--x0 has {} entries but N = {n}", x.len()).into()),
    }
}

fn players(cfg: &RunConfig, n: usize) -> Run<Vec<usize>> {
    match cfg.opts.player {
        None => Ok((0..n).collect()),
        Some(p) if (1..=n).contains(&p) => Ok(vec![p - 1]),
        Some(p) => Err(format!("--player {p} is outside 1..={n}").into()),
    }
}

fn value(cfg: &RunConfig) -> Run<Output> {
    let n = cfg.single_n()?;
    let alpha = cfg.single_alpha()?;
    let cost = cfg.cost()?;
    let x = start_state(cfg, n)?;
    let who = players(cfg, n)?;
    let mut out = Output::table(&["player", "value"]);
    let vals: Vec<f64> = if let Some(alpha2) = cfg.opts.alpha2 {
        if n != 2 {
            return Err("--alpha2 needs N = 2".to_string().into());
        }
        let v = two_player_asym([x.x[0], x.x[1]], alpha, alpha2, &cost)?;
        if let Some(w) = &v.warning {
            eprintln!("warning: {w}");
        }
        out.report = json!({ "c2_player1": v.c[0], "c2_player2": v.c[1], "warning": v.warning });
        vec![v.v1, v.v2]
    } else if let Some(case) = cfg.opts.case {
        if n != 2 {
            return Err("--case needs N = 2".to_string().into());
        }
        let v = two_player_ne(NeCase::from_number(case)?, [x.x[0], x.x[1]], alpha, &cost)?;
        out.report = json!({ "c2": v.c2, "regions": v.regions.describe() });
        vec![v.v1, v.v2]
    } else {
        let t = Thresholds::solve(n, alpha, &cost)?;
        let params = GameParams::new(n, alpha)?;
        out.report = json!({ "c_N": t.c_n, "B": t.b(), "diagonal_value": diagonal_value(&t)? });
        (0..n)
            .map(|i| value_i(&NeValueRequest { player: i, x: x.clone(), params, thresholds: t.clone() }))
            .collect::<Result<_>>()?
    };
    for i in who {
        out.push(vec![(i + 1).to_string(), g(vals[i])]);
    }
    Ok(out)
}

fn simulate(cfg: &RunConfig) -> Run<Output> {
    let n = cfg.single_n()?;
    let alpha = cfg.single_alpha()?;
    let cost = cfg.cost()?;
    let x0 = start_state(cfg, n)?;
    let c_n = solve_c_n(n, alpha, &cost)?;
    match cfg.opts.mode.unwrap_or(Mode::Trajectories) {
        Mode::Trajectories => {
            let mut sim = cfg.sim(alpha);
            // Full-resolution dumps of the default path count are unwieldy.
            sim.paths = cfg.opts.paths.unwrap_or(10);
            sim.record_stride = cfg.opts.stride.unwrap_or(10);
            let batch = simulate_reflected(&x0, c_n, &sim)?;
            let mut raw = Vec::new();
            batch.write_csv(&mut raw)?;
            let mut out = Output::table(&[]);
            out.raw = Some(raw);
            out.report = json!({
                "c_N": c_n,
                "initial_jumps": batch.initial_jumps.steps.len(),
                "initial_jump_distance": batch.initial_jumps.total_distance,
                "diagnostics": batch.diagnostics,
                "two_player_correction_frequency": batch.diagnostics.multi_player_frequency(),
            });
            Ok(out)
        }
        Mode::Payoff => {
            let sim = cfg.sim(alpha);
            let params = GameParams::new(n, alpha)?;
            let mut out = Output::table(&["player", "mean", "stderr", "tail_bound"]);
            for i in players(cfg, n)? {
                let e = mc_payoff(i, &x0, &params, &cost, c_n, &sim)?;
                out.push(vec![(i + 1).to_string(), g(e.mean), g(e.stderr), g(e.tail_bound)]);
            }
            out.report = json!({ "c_N": c_n, "truncation_weight": sim.truncation_weight() });
            Ok(out)
        }
        m => Err(format!("simulate does not support --mode {m:?}").into()),
    }
}

fn initial_law(spec: Option<&str>, m0: f64, c: f64) -> Run<InitialLaw> {
    let law = match spec.unwrap_or("point") {
        "point" => InitialLaw::PointMass(m0),
        "uniform" => InitialLaw::Uniform { lo: m0 - c, hi: m0 + c },
        s => match s.strip_prefix("two-point:").map(str::parse::<f64>) {
            Some(Ok(a)) => InitialLaw::TwoPoint { m: m0, a },
            _ => return Err(format!("unknown --law {s:?}; use point, uniform or two-point:<a>").into()),
        },
    };
    Ok(law)
}

fn mfg(cfg: &RunConfig) -> Run<Output> {
    let alpha = cfg.single_alpha()?;
    let cost = cfg.cost()?;
    let m0 = cfg.opts.m0.unwrap_or(0.0);
    let sol = MfgSolution::solve(m0, alpha, &cost)?;
    let xs = cfg.x0()?.unwrap_or_else(|| vec![m0]);
    match cfg.opts.mode.unwrap_or(Mode::Value) {
        Mode::Value => {
            let mut out = Output::table(&["x", "value", "control"]);
            for x in xs {
                out.push(vec![g(x), g(sol.value(x)?), g(mfg_control_step(x, m0, sol.c))]);
            }
            out.report = json!({ "c": sol.c, "m0": m0 });
            Ok(out)
        }
        Mode::Payoff => {
            let sim = cfg.sim(alpha);
            let mut out = Output::table(&["x", "mean", "stderr", "tail_bound", "value"]);
            for x in xs {
                let e = mfg_payoff(x, &sol, &sim)?;
                out.push(vec![g(x), g(e.mean), g(e.stderr), g(e.tail_bound), g(sol.value(x)?)]);
            }
            Ok(out)
        }
        Mode::FixedPoint => {
            let sim = cfg.sim(alpha);
            let law = initial_law(cfg.opts.law.as_deref(), m0, sol.c)?;
            let rep = fixed_point_check(&law, &cost, &sim, 0.0)?;
            let stride = cfg.opts.stride.unwrap_or(100).max(1);
            let mut out = Output::table(&["t", "mean"]);
            for (s, m) in rep.mean_path.iter().enumerate().step_by(stride) {
                out.push(vec![g(s as f64 * sim.dt), g(*m)]);
            }
            out.report = json!({
                "c": rep.c,
                "max_drift": rep.max_drift,
                "drift_time": rep.drift_time,
                "band": rep.band,
                "within_band": rep.within_band(),
            });
            Ok(out)
        }
        Mode::Stationary => {
            let mut sim = cfg.sim(alpha);
            if cfg.opts.horizon.is_none() {
                sim.horizon = 20.0f64.max(20.0 / alpha);
            }
            let KsReport { ks, paths, horizon, c } = stationary_density_check(m0, &cost, &sim)?;
            let mut out = Output::table(&["c", "ks", "paths", "horizon"]);
            out.push(vec![g(c), g(ks), paths.to_string(), g(horizon)]);
            out.report = json!({ "ks_critical_5pct": 1.36 / (paths as f64).sqrt() });
            Ok(out)
        }
        m => Err(format!("mfg does not support --mode {m:?}").into()),
    }
}

fn eps_ne(cfg: &RunConfig) -> Run<Output> {
    let alpha = cfg.single_alpha()?;
    let cost = cfg.cost()?;
    let ns = cfg.counts()?;
    let rep = epsilon_ne_experiment(&ns, alpha, &cost, &cfg.sim(alpha))?;
    let slope = rep.slope.map(g).unwrap_or_default();
    let mut out = Output::table(&["N", "cost_mfg", "stderr_mfg", "cost_dev", "stderr_dev", "gain", "slope"]);
    for r in &rep.rows {
        out.push(vec![
            r.n.to_string(),
            g(r.cost_mfg),
            g(r.stderr_mfg),
            g(r.cost_dev),
            g(r.stderr_dev),
            g(r.gain),
            slope.clone(),
        ]);
    }
    for f in &rep.flags {
        eprintln!("note: {f}");
    }
    out.report = json!({
        "c": rep.c,
        "stderr_gain": rep.rows.iter().map(|r| r.stderr_gain).collect::<Vec<_>>(),
        "deviation_thresholds": rep.rows.iter().map(|r| r.c_dev).collect::<Vec<_>>(),
        "flags": rep.flags,
    });
    Ok(out)
}

fn validate_geometry(cfg: &RunConfig) -> Run<Output> {
    let mut out = Output::table(&["N", "S_a", "S_b", "S_c", "det", "rank"]);
    let ok = |b: bool| if b { "OK" } else { "FAIL" };
    for n in cfg.counts()? {
        let sab = check_sab(n)?;
        let a = !sab.failures.iter().any(|f| f.condition == 'a') && sab.closed_form_gap < 1e-12;
        let b = !sab.failures.iter().any(|f| f.condition == 'b') && sab.closed_form_gap < 1e-12;
        let sc = check_sc(n)?.passed();
        let det = det_nmat(n)?;
        // Round-off below 1e−9 is reported as an exact zero.
        let det = if det.abs() < 1e-9 { 0.0 } else { det };
        let rank = rank_nmat(n)?;
        eprintln!("N={n}: S.a {}, S.b {}, S.c {}, det={}, rank={rank}", ok(a), ok(b), ok(sc), g(det));
        out.push(vec![n.to_string(), ok(a).into(), ok(b).into(), ok(sc).into(), g(det), rank.to_string()]);
    }
    Ok(out)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn execute(cfg: &RunConfig) -> Run<()> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let output = match cfg.command {
        CommandKind::Thresholds => thresholds(cfg),
        CommandKind::Value => value(cfg),
        CommandKind::Simulate => simulate(cfg),
        CommandKind::Mfg => mfg(cfg),
        CommandKind::EpsNe => eps_ne(cfg),
        CommandKind::Tables => tables(cfg),
        CommandKind::ValidateGeometry => validate_geometry(cfg),
    }?;
    let bytes = output.bytes();
    match &cfg.opts.out {
        None => {
            std::io::stdout().write_all(&bytes).map_err(|e| Failure::Usage(format!("stdout: {e}")))?;
        }
        Some(path) => {
            std::fs::write(path, &bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let manifest = json!({
                "command": cfg.command.name(),
                "parameters": cfg.opts,
                "seed": cfg.seed(),
                "version": env!("CARGO_PKG_VERSION"),
                "started_unix": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
                "wall_time_seconds": clock.elapsed().as_secs_f64(),
                "threads": rayon::current_num_threads(),
                "output": path,
                "report": output.report,
            });
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            let mpath = manifest_path(path);
            std::fs::write(&mpath, text).map_err(|e| Failure::Usage(format!("{}: {e}", mpath.display())))?;
        }
    }
    Ok(())
}

fn configure_threads() -> Run<()> {
    if let Ok(v) = std::env::var("FUELGAMES_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("FUELGAMES_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    Ok(())
}

fn resolve(cli: Cli) -> Run<RunConfig> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => Opts::default(),
    };
    let (kind, flags) = match cli.command {
        Some(Command::Thresholds(o)) => (Some(CommandKind::Thresholds), o),
        Some(Command::Value(o)) => (Some(CommandKind::Value), o),
        Some(Command::Simulate(o)) => (Some(CommandKind::Simulate), o),
        Some(Command::Mfg(o)) => (Some(CommandKind::Mfg), o),
        Some(Command::EpsNe(o)) => (Some(CommandKind::EpsNe), o),
        Some(Command::Tables(o)) => (Some(CommandKind::Tables), o),
        Some(Command::ValidateGeometry(o)) => (Some(CommandKind::ValidateGeometry), o),
        None => (None, Opts::default()),
    };
    let opts = flags.or(cli.top).or(file);
    let command = kind
        .or(opts.command)
        .ok_or_else(|| "no command given on the command line or in --config".to_string())?;
    Ok(RunConfig { command, opts: Opts { command: Some(command), ..opts } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| resolve(cli)).and_then(|cfg| execute(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Lib(e) if e.is_input() => eprintln!("error: {e}"),
                Failure::Lib(e) => eprintln!("numerical failure: {e}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use fuelgames::CostSpec;

/// A number, a list of numbers, or a string in range/list syntax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ListSpec {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl fmt::Display for ListSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ListSpec::One(v) => write!(f, "{v}"),
            ListSpec::Many(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            ListSpec::Text(s) => f.write_str(s),
        }
    }
}

fn parse_list_spec(s: &str) -> Result<ListSpec, String> {
    Ok(ListSpec::Text(s.to_string()))
}

impl ListSpec {
    /// Comma-separated items, each a number or an inclusive integer range `a..b`.
    pub fn floats(&self) -> Result<Vec<f64>, String> {
        let text = match self {
            ListSpec::One(v) => return Ok(vec![*v]),
            ListSpec::Many(vs) => return Ok(vs.clone()),
            ListSpec::Text(s) => s,
        };
        let mut out = Vec::new();
        for item in text.split(',').map(str::trim) {
            if item.is_empty() {
                return Err(format!("empty item in list {text:?}"));
            }
            if let Some((a, b)) = item.split_once("..") {
                let a: i64 = a.trim().parse().map_err(|_| format!("bad range start in {item:?}"))?;
                let b: i64 = b.trim().parse().map_err(|_| format!("bad range end in {item:?}"))?;
                if b < a {
                    return Err(format!("empty range {item:?}"));
                }
                out.extend((a..=b).map(|v| v as f64));
            } else {
                out.push(item.parse().map_err(|_| format!("not a number: {item:?}"))?);
            }
        }
        Ok(out)
    }

    pub fn counts(&self) -> Result<Vec<usize>, String> {
        self.floats()?
            .into_iter()
            .map(|v| {
                if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
                    Ok(v as usize)
                } else {
                    Err(format!("player counts must be positive integers, got {v}"))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Value function (value, mfg).
    Value,
    /// Trajectory dump (simulate).
    Trajectories,
    /// Monte Carlo cost estimate (simulate, mfg).
    Payoff,
    /// Empirical mean of the population (mfg).
    FixedPoint,
    /// KS distance of the terminal law to the uniform band law (mfg).
    Stationary,
}

/// Every option any command accepts. Flags override values from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Opts {
    /// Only read from `--config`; the subcommand wins when both are given.
    #[arg(skip)]
    pub command: Option<CommandKind>,
    /// Player count(s): `4`, `2,4,8` or `2..100`.
    #[arg(long, value_parser = parse_list_spec, allow_hyphen_values = true)]
    pub n: Option<ListSpec>,
    /// Discount rate(s), same list syntax.
    #[arg(long, value_parser = parse_list_spec, allow_hyphen_values = true)]
    pub alpha: Option<ListSpec>,
    /// Player 2's discount rate for the two-player game with unequal rates.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha2: Option<f64>,
    /// `quadratic` or the path of an `x,h` CSV table.
    #[arg(long)]
    pub cost: Option<String>,
    /// Initial positions, comma-separated.
    #[arg(long, value_parser = parse_list_spec, allow_hyphen_values = true)]
    pub x0: Option<ListSpec>,
    /// 1-based player; all players when omitted.
    #[arg(long)]
    pub player: Option<usize>,
    /// Two-player equilibrium case 1..=4.
    #[arg(long)]
    pub case: Option<u8>,
    /// Population mean for the mean-field game.
    #[arg(long, allow_hyphen_values = true)]
    pub m0: Option<f64>,
    /// Initial law for the fixed-point check: `point`, `uniform` or `two-point:<a>`.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Time step (default 1e-3).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulated horizon T (default ln(1e6)/alpha).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Monte Carlo paths (default 10000).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Random seed (default 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record every k-th step of each trajectory.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub antithetic: Option<bool>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Opts {
    /// Fills every unset field from `base`.
    pub fn or(self, base: Opts) -> Opts {
        Opts {
            command: self.command.or(base.command),
            n: self.n.or(base.n),
            alpha: self.alpha.or(base.alpha),
            alpha2: self.alpha2.or(base.alpha2),
            cost: self.cost.or(base.cost),
            x0: self.x0.or(base.x0),
            player: self.player.or(base.player),
            case: self.case.or(base.case),
            m0: self.m0.or(base.m0),
            law: self.law.or(base.law),
            mode: self.mode.or(base.mode),
            dt: self.dt.or(base.dt),
            horizon: self.horizon.or(base.horizon),
            paths: self.paths.or(base.paths),
            seed: self.seed.or(base.seed),
            stride: self.stride.or(base.stride),
            antithetic: self.antithetic.or(base.antithetic),
            out: self.out.or(base.out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Thresholds,
    Value,
    Simulate,
    Mfg,
    EpsNe,
    Tables,
    ValidateGeometry,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Thresholds => "thresholds",
            CommandKind::Value => "value",
            CommandKind::Simulate => "simulate",
            CommandKind::Mfg => "mfg",
            CommandKind::EpsNe => "eps-ne",
            CommandKind::Tables => "tables",
            CommandKind::ValidateGeometry => "validate-geometry",
        }
    }
}

/// Reads a `--config` JSON file: the fields of [`Opts`] plus `command`.
pub fn load_config(path: &Path) -> Result<Opts, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

/// A fully merged invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub opts: Opts,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_PATHS: usize = 10_000;

impl RunConfig {
    fn require<'a, T>(&self, v: &'a Option<T>, name: &str) -> Result<&'a T, String> {
        v.as_ref().ok_or_else(|| format!("{} needs --{name}", self.command.name()))
    }

    pub fn counts(&self) -> Result<Vec<usize>, String> {
        let ns = self.require(&self.opts.n, "n")?.counts()?;
        if ns.is_empty() {
            return Err("--n is empty".into());
        }
        Ok(ns)
    }

    pub fn single_n(&self) -> Result<usize, String> {
        match self.counts()?.as_slice() {
            [n] => Ok(*n),
            _ => Err(format!("{} takes a single --n", self.command.name())),
        }
    }

    pub fn alphas(&self) -> Result<Vec<f64>, String> {
        let a = self.require(&self.opts.alpha, "alpha")?.floats()?;
        if a.is_empty() || a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("--alpha values must be positive".into());
        }
        Ok(a)
    }

    pub fn single_alpha(&self) -> Result<f64, String> {
        match self.alphas()?.as_slice() {
            [a] => Ok(*a),
            _ => Err(format!("{} takes a single --alpha", self.command.name())),
        }
    }

    pub fn x0(&self) -> Result<Option<Vec<f64>>, String> {
        self.opts.x0.as_ref().map(ListSpec::floats).transpose()
    }

    pub fn cost(&self) -> Result<CostSpec, CostError> {
        match self.opts.cost.as_deref().unwrap_or("quadratic") {
            "quadratic" => Ok(CostSpec::quadratic()),
            path => CostSpec::from_csv_path(path).map_err(CostError),
        }
    }

    pub fn seed(&self) -> u64 {
        self.opts.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn sim(&self, alpha: f64) -> fuelgames::SimConfig {
        let o = &self.opts;
        // Default horizon leaves a discounted tail weight of 1e−6.
        let horizon = o.horizon.unwrap_or_else(|| (1e6f64.ln() / alpha).max(1.0));
        fuelgames::SimConfig::new(
            o.dt.unwrap_or(DEFAULT_DT),
            horizon,
            o.paths.unwrap_or(DEFAULT_PATHS),
            self.seed(),
            alpha,
        )
        .with_antithetic(o.antithetic.unwrap_or(false))
        .with_record_stride(o.stride.unwrap_or(1))
    }
}

/// Cost loading failure; keeps the library error for exit-code mapping.
#[derive(Debug)]
pub struct CostError(pub fuelgames::Error);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_syntax() {
        let t = |s: &str| ListSpec::Text(s.into());
        assert_eq!(t("2..5").counts().unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(t("0.2, 2,20").floats().unwrap(), vec![0.2, 2.0, 20.0]);
        assert_eq!(t("1,3..4,9").counts().unwrap(), vec![1, 3, 4, 9]);
        assert!(t("5..2").floats().is_err());
        assert!(t("2,,3").floats().is_err());
        assert!(t("2.5").counts().is_err());
        assert!(t("-1,2").floats().unwrap()[0] == -1.0);
    }

    #[test]
    fn config_json() {
        let c: Opts =
            serde_json::from_str(r#"{"command": "eps-ne", "n": [2, 4], "alpha": 2, "paths": 100}"#).unwrap();
        assert_eq!(c.command, Some(CommandKind::EpsNe));
        assert_eq!(c.n.unwrap().counts().unwrap(), vec![2, 4]);
        assert_eq!(c.alpha.unwrap().floats().unwrap(), vec![2.0]);
        let r: Opts = serde_json::from_str(r#"{"n": "2..4", "mode": "fixed-point"}"#).unwrap();
        assert_eq!(r.n.unwrap().counts().unwrap(), vec![2, 3, 4]);
        assert_eq!(r.mode, Some(Mode::FixedPoint));
        assert!(serde_json::from_str::<Opts>(r#"{"command": "bogus"}"#).is_err());
        assert!(serde_json::from_str::<Opts>(r#"{"nn": 2}"#).is_err());
    }

    #[test]
    fn flags_override_config() {
        let base = Opts { seed: Some(1), paths: Some(10), ..Opts::default() };
        let flags = Opts { seed: Some(7), ..Opts::default() };
        let merged = flags.or(base);
        assert_eq!((merged.seed, merged.paths), (Some(7), Some(10)));
    }
}

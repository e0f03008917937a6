//! Command-line front end. `run` parses arguments, dispatches to the
//! library and returns the process exit code:
//! 0 success, 1 usage, 2 arbitrage, 3 numerical failure, 4 infeasible budget.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::densities::{density_total, DensityParams};
use crate::error::{Error, Result};
use crate::hedging::{replicate, replication_backtest, sample_paths, BacktestReport, PayoffValuation};
use crate::mc::{arbitrage_demo, limit_scaling_check, mc_price, LimitBase, McMeasure};
use crate::par::Execution;
use crate::pricer::call::{call_price, CallSpec, SeriesControls};
use crate::pricer::cases::{merton_price, symmetric_price_check};
use crate::pricer::european::{Call, Constant, Stock};
use crate::quantile::{insurance_budget, Budget, QuantileProblem, QuantileSolution};
use crate::regime::{ModelParams, Regime, RegimePath};
use crate::rng::path_rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ARBITRAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Arbitrage(_) => EXIT_ARBITRAGE,
        Error::Truncation { .. } | Error::Divergence(_) | Error::BesselOverflow(_) | Error::RootNotFound(_) => EXIT_NUMERICAL,
        Error::InfeasibleBudget { .. } | Error::InfeasibleEpsilon { .. } => EXIT_INFEASIBLE,
        Error::InvalidParameter { .. }
        | Error::TimeOutOfRange { .. }
        | Error::DegenerateVelocities(_)
        | Error::InvalidGrid(_)
        | Error::Config(_) => EXIT_USAGE,
    }
}

const REQUIRED: [&str; 10] = [
    "c_plus", "c_minus", "lambda_plus", "lambda_minus", "h_plus", "h_minus", "r_plus", "r_minus", "s0", "sigma0",
];
const OPTIONAL: [&str; 2] = ["tail_epsilon", "max_terms"];

/// Model parameters plus series controls read from a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub params: ModelParams,
    pub controls: SeriesControls,
}

impl ModelConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<ModelConfig> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !REQUIRED.contains(&k) && !OPTIONAL.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", no + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        let num = |k: &str| -> Result<f64> {
            let v = map.get(k).ok_or_else(|| Error::Config(format!("missing key `{k}`")))?;
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("`{k}`: `{v}` is not a number")))
        };
        let sigma0 = match map.get("sigma0").map(String::as_str) {
            Some("+1") => Regime::Plus,
            Some("-1") => Regime::Minus,
            Some(v) => return Err(Error::Config(format!("`sigma0`: expected \"+1\" or \"-1\", got `{v}`"))),
            None => return Err(Error::Config("missing key `sigma0`".into())),
        };
        let params = ModelParams {
            c_plus: num("c_plus")?,
            c_minus: num("c_minus")?,
            lambda_plus: num("lambda_plus")?,
            lambda_minus: num("lambda_minus")?,
            h_plus: num("h_plus")?,
            h_minus: num("h_minus")?,
            r_plus: num("r_plus")?,
            r_minus: num("r_minus")?,
            s0: num("s0")?,
            sigma0,
        };
        params.validate_dynamics()?;
        let mut controls = SeriesControls::default();
        if map.contains_key("tail_epsilon") {
            controls.tail_epsilon = num("tail_epsilon")?;
        }
        if let Some(v) = map.get("max_terms") {
            controls.max_terms = v
                .parse()
                .map_err(|_| Error::Config(format!("`max_terms`: `{v}` is not a count")))?;
        }
        controls.validate()?;
        Ok(ModelConfig { params, controls })
    }

    pub fn load(path: &Path) -> Result<ModelConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ModelConfig::parse(&text)
    }
}

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// Compact JSON whose floats carry 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }
}

pub fn to_json(v: &Value) -> String {
    use serde::Serialize;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    v.serialize(&mut ser).expect("serializing a JSON value to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Parser, Debug)]
#[command(name = "telegraph", version, about = "Pricing and hedging in jump telegraph markets")]
struct Cli {
    /// Run Monte Carlo and backtests on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct OptionArgs {
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PriceMethod {
    Series,
    Mc,
    Merton,
    Symmetric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PayoffKind {
    Call,
    Stock,
    Bond,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeasureArg {
    Physical,
    Martingale,
    Reweighted,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price a European call.
    Price {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        option: OptionArgs,
        #[arg(long, value_enum, default_value = "series")]
        method: PriceMethod,
        #[arg(long, default_value_t = 1_000_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sample paths of the regime, telegraph, jump, stock and bond processes on a grid.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Density of X(t) under the physical intensities.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        /// Starting regime, "+1" or "-1"; defaults to sigma0.
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replicate a payoff along simulated paths.
    Hedge {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        option: OptionArgs,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "call")]
        payoff: PayoffKind,
    },
    /// Quantile hedge of a call under a budget or a shortfall probability.
    Quantile {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        option: OptionArgs,
        #[arg(long, conflicts_with_all = ["epsilon", "survival"])]
        budget: Option<f64>,
        #[arg(long, conflicts_with = "survival")]
        epsilon: Option<f64>,
        /// Survival probability; the budget becomes survival times the call price.
        #[arg(long)]
        survival: Option<f64>,
    },
    /// Monte Carlo expectation of a discounted payoff.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        option: OptionArgs,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "martingale")]
        measure: MeasureArg,
        #[arg(long, value_enum, default_value = "call")]
        payoff: PayoffKind,
    },
    /// Buy-at-A, sell-at-A-or-B strategy in a market without jumps.
    ArbDemo {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        maturity: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Distance of the moment generating function to its diffusion limit.
    LimitCheck {
        #[arg(long, default_value_t = 0.2)]
        vc: f64,
        #[arg(long, default_value_t = 0.1)]
        va: f64,
        #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda0: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,4,16,64")]
        levels: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0.5,1")]
        z: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
}

/// Parses `args` (program name first), runs the command and writes its
/// output to `out` and diagnostics to `err`.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match dispatch(cli.command, exec, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

enum Failure {
    Lib(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn emit(out: &mut dyn Write, v: &Value) -> io::Result<()> {
    writeln!(out, "{}", to_json(v))
}

/// Writes `text` to `path`, or to `out` when no path is given.
fn write_text(out: &mut dyn Write, path: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn dispatch(cmd: Command, exec: Execution, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Price { model, option, method, paths, seed } => {
            let cfg = ModelConfig::load(&model.config)?;
            let spec = CallSpec::new(option.strike, option.maturity)?;
            emit(out, &price_report(&cfg, &spec, method, paths, seed, exec)?)?;
        }
        Command::Simulate { model, paths, seed, grid, horizon, out: path } => {
            let cfg = ModelConfig::load(&model.config)?;
            let csv = simulate_csv(&cfg.params, paths, seed, grid, horizon)?;
            write_text(out, path.as_deref(), &csv)?;
        }
        Command::Density { model, t, points, sigma, out: path } => {
            let cfg = ModelConfig::load(&model.config)?;
            let sigma = match sigma.as_deref() {
                None => cfg.params.sigma0,
                Some("+1") | Some("1") => Regime::Plus,
                Some("-1") => Regime::Minus,
                Some(v) => return Err(Error::Config(format!("--sigma: expected +1 or -1, got `{v}`")).into()),
            };
            let csv = density_csv(&cfg.params, t, points, sigma)?;
            write_text(out, path.as_deref(), &csv)?;
        }
        Command::Hedge { model, option, paths, grid, seed, payoff } => {
            let cfg = ModelConfig::load(&model.config)?;
            let spec = CallSpec::new(option.strike, option.maturity)?;
            let sample = sample_paths(&cfg.params, spec.maturity, paths, seed, exec)?;
            let rep = match payoff {
                PayoffKind::Call => replication_backtest(&sample, &spec, &cfg.params, grid, &cfg.controls, exec)?,
                PayoffKind::Stock => replicate(
                    &PayoffValuation::new(&cfg.params, Stock, spec.maturity, cfg.controls)?,
                    &sample,
                    grid,
                    exec,
                )?,
                PayoffKind::Bond => replicate(
                    &PayoffValuation::new(&cfg.params, Constant(1.0), spec.maturity, cfg.controls)?,
                    &sample,
                    grid,
                    exec,
                )?,
            };
            emit(out, &hedge_report(&rep, paths, grid, seed))?;
        }
        Command::Quantile { model, option, budget, epsilon, survival } => {
            let cfg = ModelConfig::load(&model.config)?;
            let spec = CallSpec::new(option.strike, option.maturity)?;
            emit(out, &quantile_report(&cfg, &spec, budget, epsilon, survival)?)?;
        }
        Command::Mc { model, option, paths, seed, measure, payoff } => {
            let cfg = ModelConfig::load(&model.config)?;
            let measure = match measure {
                MeasureArg::Physical => McMeasure::Physical,
                MeasureArg::Martingale => McMeasure::Martingale,
                MeasureArg::Reweighted => McMeasure::Reweighted,
            };
            let (p, t) = (&cfg.params, option.maturity);
            let est = match payoff {
                PayoffKind::Call => mc_price(p, &Call { strike: option.strike }, t, paths, seed, measure, exec)?,
                PayoffKind::Stock => mc_price(p, &Stock, t, paths, seed, measure, exec)?,
                PayoffKind::Bond => mc_price(p, &Constant(1.0), t, paths, seed, measure, exec)?,
            };
            emit(
                out,
                &json!({
                    "mean": est.mean,
                    "std_error": est.std_error,
                    "n_paths": est.n_paths,
                    "seed": est.seed,
                }),
            )?;
        }
        Command::ArbDemo { model, a, b, maturity, paths, seed } => {
            let cfg = ModelConfig::load(&model.config)?;
            let rep = arbitrage_demo(&cfg.params, a, b, maturity, paths, seed, exec)?;
            emit(
                out,
                &json!({
                    "min_profit": rep.min_profit,
                    "p_profit_positive": rep.positive.mean,
                    "p_profit_positive_se": rep.positive.std_error,
                    "p_hit_upper": rep.hit_upper.mean,
                    "p_hit_upper_se": rep.hit_upper.std_error,
                    "mean_profit": rep.mean_profit.mean,
                    "mean_profit_se": rep.mean_profit.std_error,
                    "n_paths": paths,
                    "seed": seed,
                }),
            )?;
        }
        Command::LimitCheck { vc, va, mu, lambda0, levels, z, t } => {
            let base = LimitBase { v_c: vc, v_a: va, mu, lambda0 };
            let rows = limit_scaling_check(&base, &levels, &z, t)?;
            let arr: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "level": r.level,
                        "lambda": r.market.lambda,
                        "c": r.market.c,
                        "a": r.market.a,
                        "h": r.market.h,
                        "max_rel_error": r.max_rel_error,
                        "errors": r.values.iter().map(|&(z, plus, minus, limit)| json!({
                            "z": z,
                            "mgf_plus": plus,
                            "mgf_minus": minus,
                            "limit": limit,
                            "rel_error": (plus / limit - 1.0).abs().max((minus / limit - 1.0).abs()),
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            emit(out, &Value::Array(arr))?;
        }
    }
    Ok(())
}

fn price_report(cfg: &ModelConfig, spec: &CallSpec, method: PriceMethod, paths: usize, seed: u64, exec: Execution) -> Result<Value> {
    let p = &cfg.params;
    let y = (spec.strike / p.s0).ln();
    let mut v = json!({
        "method": format!("{method:?}").to_lowercase(),
        "price": null, "u": null, "U": null, "y": y,
        "lower_index": null, "upper_index": null, "terms": null,
        "tail_bound": null, "regime_case": null,
        "std_error": null, "n_paths": null, "seed": null,
    });
    match method {
        PriceMethod::Series => {
            let b = call_price(p, spec, &cfg.controls)?;
            v["price"] = json!(b.price);
            v["u"] = json!(b.u);
            v["U"] = json!(b.big_u);
            v["lower_index"] = json!(b.lower_index);
            v["upper_index"] = json!(b.upper_index);
            v["terms"] = json!(b.terms());
            v["tail_bound"] = json!(b.tail_bound);
            v["regime_case"] = json!(b.regime_case.name());
        }
        PriceMethod::Mc => {
            p.validate()?;
            let est = mc_price(p, &Call { strike: spec.strike }, spec.maturity, paths, seed, McMeasure::Martingale, exec)?;
            v["price"] = json!(est.mean);
            v["std_error"] = json!(est.std_error);
            v["n_paths"] = json!(est.n_paths);
            v["seed"] = json!(est.seed);
        }
        PriceMethod::Merton => {
            if p.c_plus != p.c_minus || p.h_plus != p.h_minus || p.r_plus != p.r_minus {
                return Err(Error::Config("merton needs c_plus = c_minus, h_plus = h_minus, r_plus = r_minus".into()));
            }
            p.validate()?;
            let m = merton_price(p.c_plus, p.r_plus, -p.h_plus, p.s0, spec.strike, spec.maturity)?;
            v["price"] = json!(m.price);
            v["u"] = json!(m.u);
            v["U"] = json!(m.big_u);
            v["lower_index"] = json!(m.n0);
            v["regime_case"] = json!(if p.h_plus < 0.0 { "decreasing" } else { "increasing" });
        }
        PriceMethod::Symmetric => {
            let s = symmetric_price_check(p, spec, &cfg.controls)?;
            v["price"] = json!(s.price);
            v["u"] = json!(s.u_explicit);
            v["U"] = json!(s.big_u);
            v["lower_index"] = json!(s.n_minus);
            v["upper_index"] = json!(s.n_plus);
            v["series_price"] = json!(s.series_price);
        }
    }
    Ok(v)
}

fn simulate_csv(params: &ModelParams, n_paths: usize, seed: u64, grid: usize, horizon: f64) -> Result<String> {
    if grid == 0 {
        return Err(Error::InvalidGrid("need at least one grid interval"));
    }
    crate::error::positive("horizon", horizon)?;
    let mut s = String::from("path_id,t,regime,X,J,S,B\n");
    for i in 0..n_paths {
        let mut rng = path_rng(seed, i as u64);
        let path = RegimePath::sample(params.lambda_plus, params.lambda_minus, params.sigma0, horizon, &mut rng);
        for k in 0..=grid {
            let t = crate::hedging::grid_time(k, grid, horizon);
            let regime = path.regime_at(t)?;
            s.push_str(&format!(
                "{i},{},{},{},{},{},{}\n",
                fmt_f64(t),
                if regime == Regime::Plus { "+1" } else { "-1" },
                fmt_f64(path.telegraph_value(params.c_plus, params.c_minus, t)?),
                fmt_f64(path.jump_value(params.h_plus, params.h_minus, t)?),
                fmt_f64(path.stock_price(params, t)?),
                fmt_f64(path.bond_price(params, t)?),
            ));
        }
    }
    Ok(s)
}

fn density_csv(params: &ModelParams, t: f64, points: usize, sigma: Regime) -> Result<String> {
    if points < 2 {
        return Err(Error::InvalidGrid("need at least two points"));
    }
    let dp = DensityParams::new(params.c_plus, params.c_minus, params.lambda_plus, params.lambda_minus)?;
    let (lo, hi) = (dp.c_minus * t, dp.c_plus * t);
    let mut s = String::from("x,p_continuous\n");
    let mut atom = None;
    for i in 0..points {
        let x = if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
        let d = density_total(x, t, sigma, &dp)?;
        atom = Some((d.atom_location, d.atom_weight));
        s.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(d.continuous)));
    }
    let (x_atom, w) = atom.expect("at least two points");
    s.push_str(&format!("# atom {} {}\n", fmt_f64(x_atom), fmt_f64(w)));
    Ok(s)
}

fn hedge_report(rep: &BacktestReport, paths: usize, grid: usize, seed: u64) -> Value {
    json!({
        "initial_capital": rep.initial_capital,
        "mean_abs_error": rep.mean_abs_error,
        "max_abs_error": rep.max_abs_error,
        "min_capital": rep.min_capital,
        "admissible": rep.admissible,
        "max_self_financing_defect": rep.max_self_financing_defect,
        "max_jump_defect": rep.max_jump_defect,
        "max_left_limit_gap": rep.max_left_limit_gap,
        "n_paths": paths,
        "grid": grid,
        "seed": seed,
    })
}

fn quantile_report(
    cfg: &ModelConfig,
    spec: &CallSpec,
    budget: Option<f64>,
    epsilon: Option<f64>,
    survival: Option<f64>,
) -> Result<Value> {
    let problem = QuantileProblem::new(&cfg.params, spec, &cfg.controls)?;
    let perfect = problem.perfect_price;
    let report = |mode: &str, sol: Option<&QuantileSolution>, v0: f64| {
        json!({
            "mode": mode,
            "gamma": sol.map_or(0.0, |s| s.gamma),
            "success_probability": sol.map_or(1.0, |s| s.success_probability),
            "budget": sol.map_or(v0, |s| s.budget),
            "perfect_price": perfect,
            "regime_case": problem.case.name(),
            "a": problem.a,
            "b": problem.b,
            "atom_fraction": sol.map_or(1.0, |s| s.atom_fraction),
            "thresholds": sol.map_or(problem.terms(), |s| s.thresholds.len()),
            "binding_thresholds": sol.map_or(0, |s| s.binding_thresholds()),
            "residual": sol.map_or(0.0, |s| s.residual),
        })
    };
    match (budget, epsilon, survival) {
        (Some(v0), None, None) => {
            let sol = problem.solve_budget(Budget::new(v0, perfect)?)?;
            Ok(report("budget", Some(&sol), v0))
        }
        (None, Some(eps), None) => {
            let sol = problem.solve_dual(eps)?;
            Ok(report("epsilon", Some(&sol), sol.budget))
        }
        (None, None, Some(p)) => {
            let v0 = insurance_budget(p, &cfg.params, spec, &cfg.controls)?;
            if v0 >= perfect {
                // full survival: the perfect hedge
                return Ok(report("survival", None, perfect));
            }
            let sol = problem.solve_budget(Budget::new(v0, perfect)?)?;
            Ok(report("survival", Some(&sol), v0))
        }
        _ => Err(Error::Config("give exactly one of --budget, --epsilon, --survival".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = "# market\nc_plus = 0.2\nc_minus = -0.1\nlambda_plus = 1\nlambda_minus = 0.8\nh_plus = -0.3\nh_minus = 0.2\nr_plus = 0.05\nr_minus = 0.03\ns0 = 100 # spot\nsigma0 = +1\n";

    #[test]
    fn config_round_trip_and_rejections() {
        let cfg = ModelConfig::parse(CONFIG).unwrap();
        assert_eq!(cfg.params.sigma0, Regime::Plus);
        assert_eq!(cfg.params.s0, 100.0);
        assert!(ModelConfig::parse(&format!("{CONFIG}volatility = 2\n")).is_err());
        assert!(ModelConfig::parse(&CONFIG.replace("sigma0 = +1", "sigma0 = 1")).is_err());
        assert!(ModelConfig::parse(&CONFIG.replace("s0 = 100 # spot\n", "")).is_err());
        let c = ModelConfig::parse(&format!("{CONFIG}max_terms = 50\n")).unwrap();
        assert_eq!(c.controls.max_terms, 50);
    }

    #[test]
    fn numbers_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(to_json(&json!({"x": 0.1, "y": f64::NAN, "n": 3})), r#"{"n":3,"x":1.0000000000000001e-1,"y":null}"#);
        for x in [1.5, -2e-300, std::f64::consts::PI, 1e300] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn exit_codes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["telegraph", "bogus"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["telegraph", "--help"], &mut out, &mut err), EXIT_OK);
        let e = Error::InfeasibleBudget { budget: 2.0, perfect_price: 1.0 };
        assert_eq!(exit_code(&e), EXIT_INFEASIBLE);
        assert_eq!(exit_code(&Error::Truncation { terms: 1, tail: 1.0 }), EXIT_NUMERICAL);
    }
}

//! `infoloop` command-line front end.
//!
//! Exit codes: 0 success, 1 parse or usage error, 2 unstable loop or
//! divergent simulation, 3 tolerance failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::LoopConfigFile;
use crate::decomposition::{
    controller_independence_check, decompose, directed_info_rate_via_entropy, integrand_table,
    plant_poles, LogBase, RateInputs,
};
use crate::error::{Error, Result};
use crate::lti::{is_stabilizing, LoopModel};
use crate::montecarlo::{
    compare_report, simulate_loop, SimulationConfig, WelchParams, DEFAULT_BURN_IN, DEFAULT_SAMPLES,
    DEFAULT_TOLERANCE,
};
use crate::spectral::FrequencyGrid;
use crate::suite::check_identities;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Identity residual bound used by `verify`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Bound on `|rate - (h(Y) - h(W))|` used by `verify`.
pub const CHAIN_TOL: f64 = 1e-10;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "infoloop",
    version,
    about = "Directed-information rate of linear feedback loops"
)]
pub struct Cli {
    /// Frequency grid size (power of two, at least 64).
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,

    /// Report rates in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,

    /// Write the main output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Simulation seed.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stability, poles and the rate decomposition of one loop.
    Analyze {
        config: PathBuf,
        /// Also write per-frequency integrands as CSV.
        #[arg(long, value_name = "PATH")]
        integrands: Option<PathBuf>,
    },
    /// Identity checks on a config and/or a randomized suite.
    Verify {
        config: Option<PathBuf>,
        /// Number of random stabilized loops to check.
        #[arg(long, alias = "suite", value_name = "N")]
        random: Option<usize>,
    },
    /// Monte Carlo estimate compared against the analytic rate.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Also write the simulated signals as CSV.
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
    /// Decomposition as one noise variance varies; CSV output.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated variances; may be empty.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        values: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    #[value(name = "sigma_v2")]
    SigmaV2,
    #[value(name = "sigma_w2")]
    SigmaW2,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unstable { .. } | Error::Divergence { .. } => EXIT_UNSTABLE,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CmdResult = std::result::Result<i32, Failure>;

struct Settings {
    grid: FrequencyGrid,
    base: LogBase,
    seed: u64,
    n_samples: usize,
}

impl Settings {
    fn resolve(cli: &Cli, cfg: Option<&LoopConfigFile>) -> Result<Settings> {
        let opts = cfg.map(|c| c.options).unwrap_or_default();
        let grid = match cli.grid.or(opts.grid_points) {
            Some(n) => FrequencyGrid::new(n)?,
            None => FrequencyGrid::default(),
        };
        let base = if cli.bits {
            LogBase::Bits
        } else {
            opts.log_base.unwrap_or_default()
        };
        Ok(Settings {
            grid,
            base,
            seed: cli.seed.or(opts.seed).unwrap_or(DEFAULT_SEED),
            n_samples: opts.n_samples.unwrap_or(DEFAULT_SAMPLES),
        })
    }
}

/// Parses `args` (program name first) and runs the command. Main output
/// goes to `out` unless `--output` is given; diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.output {
        Some(path) => match File::create(path) {
            Ok(f) => {
                let mut w = BufWriter::new(f);
                let r = dispatch(&cli, &mut w, err);
                match w.flush() {
                    Ok(()) => r,
                    Err(e) => Err(e.into()),
                }
            }
            Err(e) => Err(Failure {
                code: EXIT_USAGE,
                message: format!("cannot create {}: {e}", path.display()),
            }),
        },
        None => dispatch(&cli, out, err),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Analyze { config, integrands } => {
            cmd_analyze(cli, config, integrands.as_deref(), out)
        }
        Command::Verify { config, random } => cmd_verify(cli, config.as_deref(), *random, out, err),
        Command::Simulate {
            config,
            tolerance,
            trajectory,
        } => cmd_simulate(cli, config, *tolerance, trajectory.as_deref(), out, err),
        Command::Sweep {
            config,
            param,
            values,
        } => cmd_sweep(cli, config, *param, values, out),
    }
}

fn load(path: &Path) -> std::result::Result<(LoopConfigFile, LoopModel), Failure> {
    let cfg = LoopConfigFile::load(path)?;
    let model = cfg.to_model()?;
    Ok((cfg, model))
}

fn cmd_analyze(
    cli: &Cli,
    path: &Path,
    integrands: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let (cfg, model) = load(path)?;
    let settings = Settings::resolve(cli, Some(&cfg))?;
    let stability = is_stabilizing(&model);
    let poles = complex_pairs(&plant_poles(&model));
    if !stability.stabilizing {
        emit_json(
            out,
            &json!({ "stability": stability, "plant_poles": poles, "report": null }),
        )?;
        return Err(Error::Unstable {
            poles: stability.offending_poles,
        }
        .into());
    }
    let inputs = RateInputs::new(model, settings.grid);
    let report = decompose(&inputs)?.in_base(settings.base);
    if let Some(p) = integrands {
        let rows = integrand_table(&inputs)?;
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "omega,log_Syw,log_Fwy,disturbance_integrand")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{}",
                sig12(r.omega),
                sig12(r.log_syw),
                sig12(r.log_fwy),
                sig12(r.disturbance_integrand)
            )?;
        }
        w.flush()?;
    }
    emit_json(
        out,
        &json!({ "stability": stability, "plant_poles": poles, "report": report }),
    )?;
    Ok(EXIT_OK)
}

fn cmd_verify(
    cli: &Cli,
    path: Option<&Path>,
    random: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if path.is_none() && random.is_none() {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "verify needs a config path, --random N, or both".into(),
        });
    }
    let mut pass = true;
    let mut summary = serde_json::Map::new();

    if let Some(path) = path {
        let (cfg, model) = load(path)?;
        let settings = Settings::resolve(cli, Some(&cfg))?;
        let stability = is_stabilizing(&model);
        if !stability.stabilizing {
            return Err(Error::Unstable {
                poles: stability.offending_poles,
            }
            .into());
        }
        let inputs = RateInputs::new(model.clone(), settings.grid);
        let report = decompose(&inputs)?;
        let chain_gap = (report.total_rate - directed_info_rate_via_entropy(&inputs)?).abs();
        let config_pass = report.residual.abs() < RESIDUAL_TOL && chain_gap < CHAIN_TOL;
        pass &= config_pass;
        let report = report.in_base(settings.base);
        summary.insert(
            "config".into(),
            json!({
                "total_rate": report.total_rate,
                "control_term": report.control_term,
                "disturbance_term": report.disturbance_term,
                "residual": report.residual,
                "entropy_chain_gap": chain_gap,
                "pass": config_pass,
                "log_base": settings.base,
            }),
        );
        let independence = if cfg.alt_controllers.is_empty() {
            Value::Null
        } else {
            let mut controllers = vec![model.controller().clone()];
            controllers.extend(cfg.alt_controllers.iter().cloned());
            let ind = controller_independence_check(&model, &controllers, settings.grid)?;
            pass &= ind.pass;
            json!({
                "controllers": controllers.len(),
                "disturbance_terms": ind
                    .disturbance_terms
                    .iter()
                    .map(|&x| settings.base.from_nats(x))
                    .collect::<Vec<_>>(),
                "max_deviation": settings.base.from_nats(ind.max_deviation),
                "pass": ind.pass,
                "log_base": settings.base,
            })
        };
        summary.insert("independence".into(), independence);
    }

    if let Some(n) = random {
        let settings = Settings::resolve(cli, None)?;
        let mut passed = 0usize;
        let mut failures = Vec::new();
        let mut max_residual = 0.0f64;
        let mut max_chain = 0.0f64;
        for seed in 0..n as u64 {
            let case = check_identities(seed, settings.grid)?;
            max_residual = max_residual.max(case.residual.abs());
            max_chain = max_chain.max(case.entropy_chain_gap);
            if case.residual.abs() < RESIDUAL_TOL && case.entropy_chain_gap < CHAIN_TOL {
                passed += 1;
            } else {
                failures.push(seed);
            }
        }
        if n == 0 {
            writeln!(err, "note: 0 cases in the random suite")?;
        }
        pass &= failures.is_empty();
        summary.insert(
            "random".into(),
            json!({
                "cases": n,
                "passed": passed,
                "failed_seeds": failures,
                "max_abs_residual": max_residual,
                "max_entropy_chain_gap": max_chain,
            }),
        );
    }

    summary.insert("pass".into(), Value::Bool(pass));
    emit_json(out, &Value::Object(summary))?;
    Ok(if pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn cmd_simulate(
    cli: &Cli,
    path: &Path,
    tolerance: f64,
    trajectory: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: format!("tolerance must be >= 0, got {tolerance}"),
        });
    }
    let (cfg, model) = load(path)?;
    let settings = Settings::resolve(cli, Some(&cfg))?;
    let sim = SimulationConfig::new(model, settings.n_samples, DEFAULT_BURN_IN, settings.seed)?;
    // tolerance is given in the report's base
    let tol_nats = match settings.base {
        LogBase::Nats => tolerance,
        LogBase::Bits => tolerance * std::f64::consts::LN_2,
    };
    let mut record = compare_report(&sim, &WelchParams::default(), settings.grid, tol_nats)?;
    if let Some(p) = trajectory {
        let mut w = BufWriter::new(File::create(p)?);
        simulate_loop(&sim)?.write_csv(&mut w)?;
        w.flush()?;
    }
    let base = settings.base;
    record.analytic_rate = base.from_nats(record.analytic_rate);
    record.empirical_rate = base.from_nats(record.empirical_rate);
    record.abs_gap = base.from_nats(record.abs_gap);
    record.tolerance = tolerance;
    let mut value = serde_json::to_value(&record).expect("record serializes");
    value["log_base"] = serde_json::to_value(base).expect("base serializes");
    emit_json(out, &value)?;
    if record.pass {
        Ok(EXIT_OK)
    } else {
        writeln!(
            err,
            "FAIL: gap {} exceeds tolerance {}",
            sig12(record.abs_gap),
            sig12(tolerance)
        )?;
        Ok(EXIT_TOLERANCE)
    }
}

fn cmd_sweep(
    cli: &Cli,
    path: &Path,
    param: SweepParam,
    values: &str,
    out: &mut dyn Write,
) -> CmdResult {
    let (cfg, model) = load(path)?;
    let settings = Settings::resolve(cli, Some(&cfg))?;
    let values = parse_values(values)?;
    writeln!(out, "value,total,control,disturbance")?;
    for value in values {
        let (w, v) = match param {
            SweepParam::SigmaV2 => (
                model.channel_noise().clone(),
                model.output_disturbance().with_variance(value)?,
            ),
            SweepParam::SigmaW2 => (
                model.channel_noise().with_variance(value)?,
                model.output_disturbance().clone(),
            ),
        };
        let inputs = RateInputs::new(model.with_noises(w, v), settings.grid);
        let r = decompose(&inputs)?.in_base(settings.base);
        writeln!(
            out,
            "{},{},{},{}",
            sig12(value),
            sig12(r.total_rate),
            sig12(r.control_term),
            sig12(r.disturbance_term)
        )?;
    }
    Ok(EXIT_OK)
}

fn parse_values(list: &str) -> std::result::Result<Vec<f64>, Failure> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Failure {
                    code: EXIT_USAGE,
                    message: format!("invalid value `{s}` in --values"),
                })
        })
        .collect()
}

fn complex_pairs(zs: &[num_complex::Complex64]) -> Vec<[f64; 2]> {
    zs.iter().map(|z| [z.re, z.im]).collect()
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Shortest text for `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> String {
    let r = round12(x);
    if r == 0.0 {
        return "0".into();
    }
    let a = r.abs();
    if (1e-6..1e15).contains(&a) || !a.is_finite() {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(m) = serde_json::Number::from_f64(round12(x)) {
                    *n = m;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn emit_json(out: &mut dyn Write, v: &impl Serialize) -> std::io::Result<()> {
    let mut value = serde_json::to_value(v).expect("report serializes");
    round_value(&mut value);
    serde_json::to_writer_pretty(&mut *out, &value)?;
    writeln!(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round12(1.0397207708399179), 1.03972077084);
        assert_eq!(sig12(0.5 * 2f64.ln()), "0.34657359028");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(-3.0), "-3");
        assert_eq!(sig12(1.234567890123456e-9), "1.23456789012e-9");
    }

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_values("0, 1,3").unwrap(), vec![0.0, 1.0, 3.0]);
        assert!(parse_values("1,x").is_err());
        assert!(parse_values("nan").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(
            run(["infoloop", "frobnicate"], &mut out, &mut err),
            EXIT_USAGE
        );
        assert_eq!(run(["infoloop", "verify"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["infoloop", "--help"], &mut out, &mut err), EXIT_OK);
    }
}

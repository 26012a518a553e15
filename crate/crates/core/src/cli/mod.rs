//! The `vspinn` command-line front end.
//!
//! | command | writes |
//! |---|---|
//! | `pathology` | `pathology.csv`, `pathology_summary.json` |
//! | `train` | `monitor.csv`, `monitor.json`, `checkpoint.json`, `train_summary.json` |
//! | `poincare` | `poincare.csv`, `poincare_summary.json` |
//! | `weakcheck` | `weakcheck.csv`, `weakcheck_summary.json` |
//!
//! Outputs go to `--out`, else `output.dir` from the config, else
//! `$VSPINN_OUT_DIR`, else `./vspinn-out`. Exit codes: 0 success, 1 when a
//! pathology bound fails, 2 runtime failure, 64 usage or config error.

mod config;
mod poincare;
mod weakcheck;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::counterexample::pathology_table;
use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::train::{train, LossBreakdown, Mode, MonitorReport};

pub use config::{
    resolve_out_dir, Format, ModelSection, NetSection, OutputSection, ProblemSection, QuadSection,
    RunConfig, TrainSection, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
pub use poincare::{parse_domain, poincare_sweep, PoincareReport, PoincareTrial, POINCARE_COLUMNS, SWEEP_WIDTHS};
pub use weakcheck::{
    random_test_functions, weak_check, WeakReport, WeakRow, MAX_RADIUS, MIN_CLEARANCE, WEAK_COLUMNS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUNDS_FAILED: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "vspinn", version, about = "PINN and variable-splitting PINN experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify the degenerate-operator sequence against its loss and gradient bounds.
    Pathology {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Comma-separated, strictly ascending.
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        n_list: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on a configured problem and record convergence monitors.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `train.mode`.
        #[arg(long, value_parser = ["pinn", "vs"])]
        mode: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Poincaré ratios of random networks.
    Poincare {
        /// `unit_square`, `unit_disk`, `unit_hypercube(d)` or `unit_ball(d)`.
        #[arg(long, default_value = "unit_square")]
        problem_domain: String,
        /// A number ≥ 1 or `inf`.
        #[arg(long, default_value = "2")]
        p: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = crate::quad::DEFAULT_INTERIOR)]
        n_interior: usize,
        #[arg(long, default_value_t = crate::quad::DEFAULT_BOUNDARY)]
        n_boundary: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-form residual of a checkpoint against random bump test functions.
    Weakcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_testfns: usize,
        /// Monte Carlo points per test function.
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed support radius instead of random admissible radii.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit code for a failed command: 64 for usage and configuration problems,
/// 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidExponent(_)
        | Error::UnsupportedScheme { .. }
        | Error::ZeroWidth => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Pathology { d, p, n_list, out } => cmd_pathology(d, p, &n_list, out.as_deref()),
        Command::Train { config, mode, out } => cmd_train(config.as_deref(), mode.as_deref(), out.as_deref()),
        Command::Poincare {
            problem_domain,
            p,
            trials,
            seed,
            n_interior,
            n_boundary,
            out,
        } => {
            let domain = parse_domain(&problem_domain)?;
            let p = crate::train::parse_exponent(&p)
                .ok_or_else(|| Error::invalid(format!("invalid exponent `{p}`")))?;
            cmd_poincare(domain, p, trials, seed, n_interior, n_boundary, out.as_deref())
        }
        Command::Weakcheck {
            config,
            checkpoint,
            n_testfns,
            points,
            seed,
            radius,
            out,
        } => cmd_weakcheck(config.as_deref(), &checkpoint, n_testfns, points, seed, radius, out.as_deref()),
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[derive(Serialize)]
struct PathologySummary<'a> {
    d: usize,
    p: f64,
    n_list: &'a [u64],
    all_bounds_ok: bool,
    trends: crate::counterexample::Trends,
    rows: &'a [crate::counterexample::PathologyRow],
}

pub fn cmd_pathology(d: usize, p: f64, n_list: &[u64], out: Option<&Path>) -> Result<i32> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if d == 0 {
        return Err(Error::invalid("--d must be at least 1"));
    }
    let table = pathology_table(n_list, d, p)?;
    let dir = resolve_out_dir(out, None);
    prepare_dir(&dir)?;
    write_csv_file(&dir.join("pathology.csv"), |b| table.write_csv(b))?;
    let ok = table.all_bounds_ok();
    write_json(
        &dir.join("pathology_summary.json"),
        &PathologySummary {
            d,
            p,
            n_list,
            all_bounds_ok: ok,
            trends: table.trends,
            rows: &table.rows,
        },
    )?;
    println!("pathology d={d} p={p}");
    for r in &table.rows {
        println!(
            "  n={:<6} loss {:.6e} <= {:.6e}: {:<5}  grad {:.6e} >= {:.6e}: {:<5}  dist {:.6e}",
            r.n,
            r.scaled_loss_p,
            r.loss_upper_bound,
            r.loss_bound_ok,
            r.scaled_grad_p,
            r.grad_lower_bound,
            r.grad_bound_ok,
            r.dist_to_limit_p
        );
    }
    println!(
        "trends: loss decreasing {}, gradient increasing {}, distance decreasing {}",
        table.trends.loss_strictly_decreasing,
        table.trends.grad_strictly_increasing,
        table.trends.dist_strictly_decreasing
    );
    if ok {
        println!("all bounds held");
        Ok(EXIT_OK)
    } else {
        let failed: Vec<String> = table.rows.iter().filter(|r| !r.bounds_ok).map(|r| r.n.to_string()).collect();
        println!("bounds FAILED for n = {}", failed.join(", "));
        Ok(EXIT_BOUNDS_FAILED)
    }
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    problem: &'a str,
    mode: Mode,
    #[serde(with = "crate::train::exponent_serde")]
    p: f64,
    iterations: u64,
    status: &'a str,
    final_loss: Option<LossBreakdown>,
    err_u_lp: Option<f64>,
    err_du_lp: Option<f64>,
    err_v_lp: Option<f64>,
    config: &'a RunConfig,
}

fn write_monitor(dir: &Path, report: &MonitorReport, output: &OutputSection) -> Result<()> {
    if output.wants(Format::Csv) {
        write_csv_file(&dir.join("monitor.csv"), |b| report.write_csv(b))?;
    }
    if output.wants(Format::Json) {
        write_json(&dir.join("monitor.json"), report)?;
    }
    Ok(())
}

pub fn cmd_train(config: Option<&Path>, mode: Option<&str>, out: Option<&Path>) -> Result<i32> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = mode {
        cfg.train.mode = m.parse()?;
    }
    cfg.validate()?;
    let problem = cfg.problem()?;
    let nets = cfg.networks(problem.dim())?;
    let tc = cfg.train_config();
    let dir = resolve_out_dir(out, cfg.output.dir.as_deref());
    prepare_dir(&dir)?;

    let summary = |status: &'static str, report: &MonitorReport| {
        let last = report.last();
        TrainSummary {
            problem: problem.name(),
            mode: tc.mode,
            p: tc.p,
            iterations: last.map_or(0, |r| r.iter),
            status,
            final_loss: last.map(|r| r.loss),
            err_u_lp: last.and_then(|r| r.err_u_lp),
            err_du_lp: last.and_then(|r| r.err_du_lp),
            err_v_lp: last.and_then(|r| r.err_v_lp),
            config: &cfg,
        }
    };
    match train(&tc, &problem, nets) {
        Ok((nets, report)) => {
            write_monitor(&dir, &report, &cfg.output)?;
            let ckpt = Checkpoint {
                v_net: nets.v_net.as_ref().map(Into::into),
                ..Checkpoint::from_u_net(&nets.u_net)
            };
            ckpt.save(dir.join("checkpoint.json"))?;
            let s = summary("completed", &report);
            write_json(&dir.join("train_summary.json"), &s)?;
            if let Some(l) = s.final_loss {
                println!(
                    "{} {} after {} iterations: total {:.4e} (pde {:.4e}, grad_match {}, boundary {:.4e})",
                    problem.name(),
                    tc.mode,
                    s.iterations,
                    l.total,
                    l.pde,
                    l.grad_match.map_or("-".into(), |g| format!("{g:.4e}")),
                    l.boundary
                );
            }
            if let (Some(eu), Some(edu)) = (s.err_u_lp, s.err_du_lp) {
                println!("errors: ‖u − u*‖_p = {eu:.4e}, ‖Du − Du*‖_p = {edu:.4e}");
            }
            Ok(EXIT_OK)
        }
        Err(Error::DivergedTraining { iter, report }) => {
            write_monitor(&dir, &report, &cfg.output)?;
            write_json(&dir.join("train_summary.json"), &summary("diverged", &report))?;
            Err(Error::DivergedTraining { iter, report })
        }
        Err(e) => Err(e),
    }
}

pub fn cmd_poincare(
    domain: crate::quad::Domain,
    p: f64,
    trials: usize,
    seed: u64,
    n_interior: usize,
    n_boundary: usize,
    out: Option<&Path>,
) -> Result<i32> {
    let report = poincare_sweep(domain, p, trials, seed, n_interior, n_boundary)?;
    let dir = resolve_out_dir(out, None);
    prepare_dir(&dir)?;
    write_csv_file(&dir.join("poincare.csv"), |b| report.write_csv(b))?;
    write_json(&dir.join("poincare_summary.json"), &report)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "poincare on {domain}, p={p}: {} nets evaluated, {} skipped (degenerate gradient)",
        report.evaluated, report.skipped_degenerate
    );
    println!("max ratio {}, median ratio {}", fmt(report.max_ratio), fmt(report.median_ratio));
    println!(
        "u = x1: ratio {:.4} ± {}",
        report.linear_ratio,
        fmt(report.linear_std_error)
    );
    Ok(EXIT_OK)
}

pub fn cmd_weakcheck(
    config: Option<&Path>,
    checkpoint: &Path,
    n_testfns: usize,
    points: usize,
    seed: u64,
    radius: Option<f64>,
    out: Option<&Path>,
) -> Result<i32> {
    if n_testfns == 0 {
        return Err(Error::invalid("--n-testfns must be at least 1"));
    }
    if points < 2 {
        return Err(Error::invalid("--points must be at least 2"));
    }
    let cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let problem = cfg.problem()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let u = ckpt.u_net()?;
    let tests = random_test_functions(&problem, n_testfns, seed, radius)?;
    let report = weak_check(&problem, &u, &tests, points, seed)?;
    let dir = resolve_out_dir(out, cfg.output.dir.as_deref());
    prepare_dir(&dir)?;
    write_csv_file(&dir.join("weakcheck.csv"), |b| report.write_csv(b))?;
    write_json(&dir.join("weakcheck_summary.json"), &report)?;
    println!(
        "weak residual on {} over {} test functions ({} points each): max |value| {:.4e} (standard error {:.4e})",
        report.problem,
        report.rows.len(),
        points,
        report.max_abs_value,
        report.std_error_at_max
    );
    Ok(EXIT_OK)
}

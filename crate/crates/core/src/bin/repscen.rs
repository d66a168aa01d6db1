//! Command-line front end: trial design, designed runs, confidence-bound
//! curve emission, the Monte Carlo validation battery, and reference-table
//! reproduction. All randomness derives from --seed; stdout carries only
//! the summary JSON path, with logs on stderr.

use clap::{Parser, Subcommand, ValueEnum};
use repscen::bounds::{linspace, SupportBounds};
use repscen::design::{design, multi_design, BoundMode, DesignDocument, DesignSpec, MultiDesign};
use repscen::engine::run;
use repscen::scenario::ProblemConfig;
use repscen::validate::{
    self, confidence_crossings, confidence_crossings_csv, confidence_curves, qhat_cdf_check,
    qhat_cdf_csv, CheckResult, ValidationSummary,
};
use repscen::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "repscen",
    version,
    about = "Repetitive scenario approach for chance-constrained convex programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed; every random stream in the process derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel trials (default: machine parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a trial design from a design spec JSON (object or array).
    Design {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Execute a designed run: repeated sampled solves with selection.
    Run {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Tabulate the confidence-bound curves for one (m, q, support).
    Bounds {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run the Monte Carlo validation battery.
    Validate {
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Recompute reference table/figure data with pass/fail columns.
    Reproduce {
        #[arg(long, value_enum)]
        which: Which,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Which {
    Table1,
    Table2,
    Fig1,
    Fig2,
    Fig4,
    Lemma1,
}

/// Spec for `run`: which problem to solve and one design spec per
/// constraint.
#[derive(Debug, Deserialize)]
struct RunSpec {
    problem: ProblemConfig,
    designs: Vec<DesignSpec>,
}

/// Spec for `bounds`: the point (m, q) and support bounds, plus the grid.
#[derive(Debug, Deserialize)]
struct BoundsSpec {
    m: u64,
    q: u64,
    support: SupportBounds,
    #[serde(default)]
    eps_min: f64,
    #[serde(default = "default_eps_max")]
    eps_max: f64,
    #[serde(default = "default_grid_points")]
    points: usize,
}

fn default_eps_max() -> f64 {
    1.0
}

fn default_grid_points() -> usize {
    1001
}

/// Tunables for `validate`; every field has a desk-scale default.
#[derive(Debug, Deserialize)]
#[serde(default)]
struct ValidateSpec {
    ks_k_max: u64,
    ks_draws: u64,
    exceedance_r: u64,
    exceedance_eps: f64,
    exceedance_draws: u64,
    conditional_r: u64,
    conditional_m: u64,
    conditional_eps: f64,
    conditional_runs: u64,
}

impl Default for ValidateSpec {
    fn default() -> Self {
        ValidateSpec {
            ks_k_max: 5,
            ks_draws: 100_000,
            exceedance_r: 15,
            exceedance_eps: 0.2,
            exceedance_draws: 100_000,
            conditional_r: 10,
            conditional_m: 200,
            conditional_eps: 0.2,
            conditional_runs: 20_000,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    seed: u64,
    outputs: Vec<String>,
    all_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    checks: Option<&'a [CheckResult]>,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(dispatch(cli));
}

fn dispatch(cli: Cli) -> i32 {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be >= 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: failed to configure worker pool: {e}");
            return 3;
        }
    }
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_)
        | Error::InfeasibleDesign(_)
        | Error::ResourceLimit(_)
        | Error::DegenerateInput(_)
        | Error::Config(_)
        | Error::Io(_)
        | Error::Json(_) => 1,
        Error::Numerical(_) | Error::Nonconvergence { .. } => 3,
        Error::Trial { source, .. } => exit_code(source),
    }
}

/// Runs the subcommand; Ok(false) signals a validation/reproduction FAIL.
fn execute(cli: &Cli) -> Result<bool> {
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Design { spec } => cmd_design(cli, spec),
        Command::Run { spec } => cmd_run(cli, spec),
        Command::Bounds { spec } => cmd_bounds(cli, spec),
        Command::Validate { spec } => cmd_validate(cli, spec.as_deref()),
        Command::Reproduce { which } => cmd_reproduce(cli, *which),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read spec {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_artifact(cli: &Cli, name: &str, content: &str) -> Result<String> {
    let path = cli.out.join(name);
    std::fs::write(&path, content)?;
    eprintln!("wrote {}", path.display());
    Ok(path.display().to_string())
}

fn finish(cli: &Cli, command: &str, outputs: Vec<String>, all_pass: bool, checks: Option<&[CheckResult]>) -> Result<bool> {
    let summary = Summary {
        command,
        seed: cli.seed,
        outputs,
        all_pass,
        checks,
    };
    let path = cli.out.join(format!("{command}_summary.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    println!("{}", path.display());
    Ok(all_pass)
}

fn cmd_design(cli: &Cli, spec_path: &Path) -> Result<bool> {
    // Accept a single spec object or an array (one per constraint).
    let value: serde_json::Value = read_json(spec_path)?;
    let artifact = if value.is_array() {
        let specs: Vec<DesignSpec> = serde_json::from_value(value)?;
        let md: MultiDesign = multi_design(&specs)?;
        eprintln!(
            "joint design: N_trial={} p_trial={:.6}",
            md.n_trials, md.p_trial_joint
        );
        serde_json::to_string_pretty(&serde_json::json!({
            "designs": md.designs,
            "p_trial_joint": md.p_trial_joint,
            "n_trials": md.n_trials,
            "specs": specs,
        }))?
    } else {
        let spec: DesignSpec = serde_json::from_value(value)?;
        let d = design(&spec)?;
        eprintln!(
            "design: r_star={} N_trial={} p_trial={:.6} band=({},{})",
            d.r_star, d.n_trials, d.p_trial, d.q_low, d.q_high
        );
        serde_json::to_string_pretty(&DesignDocument { design: d, spec })?
    };
    let out = write_artifact(cli, "design.json", &artifact)?;
    finish(cli, "design", vec![out], true, None)
}

fn cmd_run(cli: &Cli, spec_path: &Path) -> Result<bool> {
    let spec: RunSpec = read_json(spec_path)?;
    let problem = spec.problem.build()?;
    let md = multi_design(&spec.designs)?;
    eprintln!(
        "running {} trials (r_star: {:?})",
        md.n_trials,
        md.designs.iter().map(|d| d.r_star).collect::<Vec<_>>()
    );
    let outcome = run(problem.as_ref(), &spec.designs, &md, cli.seed)?;
    eprintln!(
        "selected trial {} with q_hat {:?} (in band: {:?})",
        outcome.i_star, outcome.q_hat, outcome.in_band
    );
    let out = write_artifact(cli, "outcome.json", &serde_json::to_string_pretty(&outcome)?)?;
    finish(cli, "run", vec![out], true, None)
}

fn cmd_bounds(cli: &Cli, spec_path: &Path) -> Result<bool> {
    let spec: BoundsSpec = read_json(spec_path)?;
    let grid = linspace(spec.eps_min, spec.eps_max, spec.points);
    let csv = confidence_curves(spec.m, spec.q, spec.support, &grid)?;
    let out = write_artifact(cli, "bound_curves.csv", &csv)?;
    finish(cli, "bounds", vec![out], true, None)
}

fn cmd_validate(cli: &Cli, spec_path: Option<&Path>) -> Result<bool> {
    let spec: ValidateSpec = match spec_path {
        Some(p) => read_json(p)?,
        None => ValidateSpec::default(),
    };
    let mut checks = validate::regularized_violation_ks(spec.ks_k_max, spec.ks_draws, cli.seed)?;
    checks.push(validate::cost_exceedance_check(
        spec.exceedance_r,
        spec.exceedance_eps,
        spec.exceedance_draws,
        cli.seed,
    )?);
    checks.push(validate::conditional_cost_check(
        spec.conditional_r,
        spec.conditional_m,
        spec.conditional_eps,
        spec.conditional_runs,
        cli.seed,
    )?);
    let summary = ValidationSummary { checks };
    for c in &summary.checks {
        eprintln!("{}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    let out = write_artifact(
        cli,
        "validation_checks.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    let all = summary.all_pass();
    finish(cli, "validate", vec![out], all, Some(&summary.checks))
}

fn cmd_reproduce(cli: &Cli, which: Which) -> Result<bool> {
    match which {
        Which::Table1 => {
            let report = validate::reproduce_table1()?;
            let out = write_artifact(cli, "table1.csv", &report.csv)?;
            finish(cli, "reproduce", vec![out], report.all_pass, None)
        }
        Which::Table2 => {
            let report = validate::reproduce_table2()?;
            let out = write_artifact(cli, "table2.csv", &report.csv)?;
            finish(cli, "reproduce", vec![out], report.all_pass, None)
        }
        Which::Fig1 => {
            let support = SupportBounds::new(1, 10)?;
            let csv = confidence_curves(500, 375, support, &linspace(0.0, 1.0, 1001))?;
            let out = write_artifact(cli, "fig1.csv", &csv)?;
            finish(cli, "reproduce", vec![out], true, None)
        }
        Which::Fig2 => {
            let support = SupportBounds::new(1, 10)?;
            let rows = confidence_crossings(&[200, 500, 1000, 2000, 5000], support)?;
            // The comparison bound must widen the 5%-95% range by at least
            // a factor of two at every tabulated sample size.
            let all_pass = rows
                .iter()
                .all(|r| (r.eps95_cmp - r.eps5) / (r.eps95 - r.eps5) >= 2.0);
            let out = write_artifact(cli, "fig2.csv", &confidence_crossings_csv(&rows))?;
            finish(cli, "reproduce", vec![out], all_pass, None)
        }
        Which::Fig4 => {
            let spec = DesignSpec {
                eps_low: 0.19,
                eps_high: 0.21,
                p_prior: 0.9,
                p_post: 0.95,
                m: 100_000,
                support: SupportBounds::new(2, 5)?,
                r_max: None,
                bound_mode: BoundMode::Guaranteed,
            };
            let d = design(&spec)?;
            let problem = ProblemConfig::Minball { dim: 4 }.build()?;
            let rows = qhat_cdf_check(problem.as_ref(), &spec, &d, 200, cli.seed)?;
            let all_pass = rows.iter().all(|r| r.pass);
            let out = write_artifact(cli, "fig4.csv", &qhat_cdf_csv(&rows))?;
            finish(cli, "reproduce", vec![out], all_pass, None)
        }
        Which::Lemma1 => {
            let checks = validate::regularized_violation_ks(5, 100_000, cli.seed)?;
            let summary = ValidationSummary { checks };
            let out = write_artifact(
                cli,
                "lemma1.json",
                &serde_json::to_string_pretty(&summary)?,
            )?;
            let all = summary.all_pass();
            finish(cli, "reproduce", vec![out], all, Some(&summary.checks))
        }
    }
}

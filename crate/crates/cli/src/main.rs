use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frobenius_core::dynamics::{autoparallel_system, first_integral_drift, rk4_integrate};
use frobenius_core::expr::{CompiledExpr, VarSpace};
use frobenius_core::manifold::Connection;
use frobenius_core::scenario::{
    bundled, find_bundled, is_config_error, run, ConfigError, Evidence, IntegrationSpec, Recipe, Report, RunOptions,
    Scenario, Status,
};
use frobenius_core::GeomError;

#[derive(Parser, Debug)]
#[command(
    name = "frobenius",
    version,
    about = "Residual checks for formal and weak Frobenius structures"
)]
struct Cli {
    /// Tolerance for every at_most check and for the classification.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Number of sample points in the chart.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Chart seed; for fit-integral, the ensemble seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path for `run`, CSV path for `integrate`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run { scenario: String },
    /// List the bundled scenarios with their anchors.
    ListScenarios,
    /// Integrate the autoparallel flow of a scenario and print integral drifts.
    Integrate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        /// Initial state `x1,..,xn,v1,..,vn`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        initial: Option<Vec<f64>>,
    },
    /// Least-squares search for a polynomial first integral.
    FitIntegral {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        degree: Option<u32>,
        /// Number of trajectories in the ensemble.
        #[arg(long)]
        ensemble: Option<usize>,
    },
    /// Search for a metric compatible with the scenario's connection.
    FitMetric {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        ansatz_degree: Option<u32>,
    },
}

/// Exit statuses: 0 pass, 1 failed check, 2 configuration, 3 numerical.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<GeomError> for Failure {
    fn from(e: GeomError) -> Self {
        Failure {
            code: if is_config_error(&e) { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let opts = RunOptions {
        tol: cli.tol,
        samples: cli.samples,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Run { scenario } => cmd_run(scenario, &opts, cli.out.as_deref()),
        Command::ListScenarios => cmd_list(),
        Command::Integrate {
            scenario,
            t1,
            h,
            initial,
        } => cmd_integrate(scenario, *t1, *h, initial.clone(), cli.out.as_deref()),
        Command::FitIntegral {
            scenario,
            degree,
            ensemble,
        } => cmd_fit_integral(scenario, *degree, *ensemble, cli.seed, &opts),
        Command::FitMetric {
            scenario,
            ansatz_degree,
        } => cmd_fit_metric(scenario, *ansatz_degree, &opts),
    }
}

/// A path to a scenario file, or else the name of a bundled scenario.
fn load(spec: &str) -> Result<Scenario, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        return Ok(Scenario::from_json(&text)?);
    }
    match find_bundled(spec) {
        Some(b) => Ok(b.scenario()?),
        None => Err(Failure::config(format!(
            "`{spec}` is neither a readable file nor a bundled scenario"
        ))),
    }
}

fn write_to(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn cmd_run(spec: &str, opts: &RunOptions, out: Option<&Path>) -> Result<u8, Failure> {
    let sc = load(spec)?;
    let output = run(&sc, opts)?;
    let report = &output.report;
    let configured = sc.output.as_ref().and_then(|o| o.report.as_deref()).map(Path::new);
    let target = out.or(configured);
    write_to(target, &report.to_json())?;
    if target.is_some() {
        print_summary(report);
    }
    if let (Some(path), Some((traj, names))) = (
        sc.output.as_ref().and_then(|o| o.trajectory.as_deref()),
        output.trajectory.as_ref(),
    ) {
        traj.write_csv(BufWriter::new(fs::File::create(path)?), names)?;
    }
    for d in &report.diagnostics {
        eprintln!("numerical error: {d}");
    }
    Ok(report.exit_code as u8)
}

fn print_summary(report: &Report) {
    if let Some(c) = report.classification {
        println!("classification: {c}");
    }
    for c in &report.checks {
        println!(
            "{:<24} {:?} max {:.3e} tol {:.1e}",
            c.name, c.verdict, c.max_residual, c.tolerance
        );
    }
    println!("status: {:?}", report.status);
}

fn cmd_list() -> Result<u8, Failure> {
    let mut out = io::stdout().lock();
    for b in bundled() {
        let sc = b.scenario()?;
        let line = writeln!(
            out,
            "{} → {}  {}",
            b.name,
            sc.anchor.as_deref().unwrap_or("-"),
            sc.description.as_deref().unwrap_or("")
        );
        match line {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => break,
            other => other?,
        }
    }
    Ok(0)
}

fn autoparallel_parts(sc: &Scenario) -> Result<(&Vec<String>, bool, &Vec<String>, Option<&IntegrationSpec>), Failure> {
    match &sc.recipe {
        Recipe::Autoparallel {
            gamma,
            symmetric,
            integrals,
            integrate,
            ..
        } => Ok((gamma, *symmetric, integrals, integrate.as_ref())),
        other => Err(Failure::config(format!(
            "scenario `{}` has recipe `{}`, not autoparallel",
            sc.name,
            other.kind()
        ))),
    }
}

fn cmd_integrate(
    spec: &str,
    t1: Option<f64>,
    h: Option<f64>,
    initial: Option<Vec<f64>>,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let sc = load(spec)?;
    let (gamma, symmetric, integrals, base) = autoparallel_parts(&sc)?;
    let n = sc.dim;
    let y0 = initial
        .or_else(|| base.map(|b| b.initial.clone()))
        .ok_or_else(|| Failure::config("no initial state: pass --initial"))?;
    if y0.len() != 2 * n {
        return Err(Failure::config(format!("initial state needs {} components", 2 * n)));
    }
    let t1 = t1.or(base.map(|b| b.t1)).ok_or_else(|| Failure::config("pass --t1"))?;
    let h = h.or(base.map(|b| b.h)).ok_or_else(|| Failure::config("pass --h"))?;
    let conn = Connection::from_exprs(n, gamma, symmetric)?;
    let sys = autoparallel_system(&conn);
    let traj = rk4_integrate(&sys, &y0, 0.0, t1, h)?;
    if let Some(path) = out {
        traj.write_csv(BufWriter::new(fs::File::create(path)?), &sys.state_names())?;
    }
    println!(
        "steps: {}  final t: {:e}",
        traj.times.len() - 1,
        traj.times.last().copied().unwrap_or(0.0)
    );
    for (i, e) in integrals.iter().enumerate() {
        let f = CompiledExpr::parse_in(e, &VarSpace::phase(n)).map_err(GeomError::from)?;
        println!("F{} = {e}: drift {:.3e}", i + 1, first_integral_drift(&traj, &f)?);
    }
    Ok(0)
}

fn evidence_text(report: &Report, key: &str) -> String {
    match report.evidence.get(key) {
        Some(Evidence::Text(s)) => s.clone(),
        Some(Evidence::Number(x)) => format!("{:e}", x.0),
        Some(Evidence::Vector(v)) => v.iter().map(|x| format!("{:.6e}", x.0)).collect::<Vec<_>>().join(" "),
        Some(Evidence::Matrix(m)) => m
            .iter()
            .map(|r| r.iter().map(|x| format!("{:.6e}", x.0)).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("; "),
        None => "-".into(),
    }
}

fn finish(report: &Report) -> Result<u8, Failure> {
    if report.status == Status::NumericalError {
        return Err(Failure {
            code: 3,
            message: report.diagnostics.join("; "),
        });
    }
    Ok(0)
}

fn cmd_fit_integral(
    spec: &str,
    degree: Option<u32>,
    count: Option<usize>,
    seed: Option<u64>,
    opts: &RunOptions,
) -> Result<u8, Failure> {
    let mut sc = load(spec)?;
    match &mut sc.recipe {
        Recipe::Autoparallel {
            integral_fit: Some(fit),
            ..
        } => {
            if let Some(d) = degree {
                fit.degree = d;
            }
            if let Some(c) = count {
                fit.ensemble.count = c;
            }
            if let Some(s) = seed {
                fit.ensemble.seed = s;
            }
        }
        _ => {
            return Err(Failure::config(format!(
                "scenario `{}` has no integral_fit section",
                sc.name
            )))
        }
    }
    sc.checks = vec!["integral_fit".into()];
    // The chart seed is left alone; --seed steers the ensemble here.
    let opts = RunOptions { seed: None, ..*opts };
    let report = run(&sc, &opts)?.report;
    finish(&report)?;
    println!(
        "normalized residual: {:.6e}",
        report.metric("fit_normalized_residual").unwrap_or(f64::NAN)
    );
    println!(
        "kernel dimension: {}",
        report.metric("fit_kernel_dim").unwrap_or(f64::NAN)
    );
    println!("basis: {}", evidence_text(&report, "fit_basis"));
    println!("coefficients: {}", evidence_text(&report, "fit_coefficients"));
    Ok(0)
}

fn cmd_fit_metric(spec: &str, degree: Option<u32>, opts: &RunOptions) -> Result<u8, Failure> {
    let mut sc = load(spec)?;
    match &mut sc.recipe {
        Recipe::Autoparallel {
            metric_fit: Some(fit), ..
        } => {
            if let Some(d) = degree {
                fit.degree = d;
            }
        }
        _ => {
            return Err(Failure::config(format!(
                "scenario `{}` has no metric_fit section",
                sc.name
            )))
        }
    }
    sc.checks = vec!["metric_fit".into()];
    let report = run(&sc, opts)?.report;
    finish(&report)?;
    println!(
        "residual: {:.6e}",
        report.metric("metric_fit_residual").unwrap_or(f64::NAN)
    );
    if let Some(lb) = report.metric("metric_fit_lower_bound") {
        println!("lower bound: {lb:.6e}");
    }
    println!(
        "sigma ratio: {:.6e}",
        report.metric("metric_fit_sigma_ratio").unwrap_or(f64::NAN)
    );
    println!("method: {}", evidence_text(&report, "metric_fit_method"));
    println!(
        "best candidate at first sample: {}",
        evidence_text(&report, "metric_fit_candidate_at_first_sample")
    );
    println!("coefficients: {}", evidence_text(&report, "metric_fit_coefficients"));
    Ok(0)
}

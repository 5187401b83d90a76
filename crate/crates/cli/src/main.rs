use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use pheat_core::error_metrics::{empirical_order, read_csv, Abscissa, ErrorField, ErrorReport};
use pheat_core::experiments::{self, verify, ExperimentConfig, ExperimentKind};
use pheat_core::{Domain, Error, Mesh64};

#[derive(Parser)]
#[command(name = "pheat", version, about = "Convergence studies for the parabolic p-Laplace equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write CSV, manifest and optional .dat.
    Run {
        /// slit_constant_force, rough_in_time, known_solution, p2_validation or custom
        experiment: String,
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_path` of the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Empirical orders of one CSV column.
    Eoc {
        csv: PathBuf,
        /// sqVerr, sqVerr1, sqLinftyError, sqAerr or sqLpS
        #[arg(long)]
        field: String,
        /// h, tau or ndof
        #[arg(long, default_value = "ndof")]
        against: String,
        /// Exponent, needed for sqLpS.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Run the property suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a refined template mesh as text.
    DumpMesh {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve one run of an experiment and dump every time step.
    DumpSolution {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Exit 1: a solver or invariant check failed.
    Invariant(String),
    /// Exit 2: unusable configuration or input.
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) | Error::NonIntegrableForce(_) | Error::UnsupportedDegree(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Invariant(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invariant(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { experiment, config, output } => run(&experiment, &config, output),
        Command::Eoc { csv, field, against, p } => eoc(&csv, &field, &against, p),
        Command::Verify { seed } => run_verify(seed),
        Command::DumpMesh { domain, level, output } => dump_mesh(&domain, level, output),
        Command::DumpSolution { config, level, steps, output } => dump_solution(&config, level, steps, &output),
    }
}

fn run(experiment: &str, config: &Path, output: Option<PathBuf>) -> Result<(), Failure> {
    let kind = ExperimentKind::from_str(experiment)?;
    let cfg = ExperimentConfig::from_file(config)?;
    if cfg.experiment != kind {
        return Err(Failure::Config(format!("{} configures '{}', not '{experiment}'", config.display(), cfg.experiment.name())));
    }
    let csv = output.or_else(|| cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from(format!("{}.csv", kind.name())));
    let study = experiments::run(&cfg)?;
    let files = experiments::write_outputs(&study, &csv)?;
    eprintln!("wrote {} and {}", files.csv.display(), files.manifest.display());
    if study.reports.len() >= 2 {
        // fixed-mesh studies only refine in time
        let spatial = study.reports.windows(2).all(|w| w[0].ndof < w[1].ndof);
        let (against, label) = if spatial { (Abscissa::Ndof, "ndof") } else { (Abscissa::Tau, "tau") };
        for field in [ErrorField::SqVerr, ErrorField::SqLinftyError] {
            match empirical_order(&study.reports, field, against) {
                Ok(orders) => eprintln!("{:>14} vs {label}: least-squares slope {:+.3}", field.name(), orders.least_squares),
                Err(e) => eprintln!("{:>14}: no slope ({e})", field.name()),
            }
        }
    }
    Ok(())
}

fn eoc(csv: &Path, field: &str, against: &str, p: Option<f64>) -> Result<(), Failure> {
    let field = ErrorField::from_str(field)?;
    let against = Abscissa::from_str(against)?;
    if field == ErrorField::SqLpS && p.is_none() {
        return Err(Failure::Config("field sqLpS needs --p".into()));
    }
    let file = File::open(csv).map_err(|e| Failure::Config(format!("{}: {e}", csv.display())))?;
    let rows: Vec<ErrorReport> = read_csv(file, p)?;
    let orders = empirical_order(&rows, field, against)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "ndof M {} slope", field.name())?;
    for (k, r) in rows.iter().enumerate() {
        match k.checked_sub(1).map(|i| orders.slopes[i]) {
            Some(s) => writeln!(out, "{} {} {:.6e} {s:+.4}", r.ndof, r.steps, field.get(r))?,
            None => writeln!(out, "{} {} {:.6e} -", r.ndof, r.steps, field.get(r))?,
        }
    }
    writeln!(out, "least-squares slope {:+.4}", orders.least_squares)?;
    Ok(())
}

fn run_verify(seed: u64) -> Result<(), Failure> {
    let checks = verify::run_all(seed)?;
    let mut failed = 0;
    for c in &checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        eprintln!("{status} {:<45} {:.3e} (limit {:.1e})", c.name, c.value, c.limit);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::Invariant(format!("{failed} of {} checks failed", checks.len())));
    }
    eprintln!("all {} checks passed", checks.len());
    Ok(())
}

fn dump_mesh(domain: &str, level: usize, output: Option<PathBuf>) -> Result<(), Failure> {
    let mesh = Mesh64::at_level(Domain::from_str(domain)?, level);
    match output {
        Some(path) => mesh.write_text(BufWriter::new(File::create(path)?))?,
        None => mesh.write_text(std::io::stdout().lock())?,
    }
    Ok(())
}

fn dump_solution(config: &Path, level: usize, steps: usize, output: &Path) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_file(config)?;
    let spec = experiments::problem_spec(&cfg)?;
    let chain = experiments::mesh_chain(spec.domain, level);
    let traj = experiments::solve_level(&cfg, &spec, &chain[level], cfg.r, steps)?;
    traj.write_dump(output)?;
    eprintln!("wrote {} snapshots to {}", traj.snapshots.len(), output.display());
    Ok(())
}

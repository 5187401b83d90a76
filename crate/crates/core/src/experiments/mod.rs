//! Convergence studies: reference generation, refinement loops, CSV and
//! manifest output. Everything here is concrete `f64`.

mod config;
pub mod verify;

pub use config::{DomainVariant, ExperimentConfig, ExperimentKind, ReferenceLevel, RunLevel};

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::constitutive::PLaplaceParams;
use crate::error::{Error, Result};
use crate::error_metrics::{
    compute_errors, write_csv, write_dat, ClosedForm, ErrorReport, ExactSolution, KnownSolution, ReferenceSolution,
};
use crate::fespace::FeSpace;
use crate::mesh::{Domain, Mesh};
use crate::scalar::Vec2;
use crate::timestepper::{
    solve_on_space, BoundaryCondition, Force, InitialData, NewtonOptions, ProblemSpec, TimeGrid, TimeProfile, Trajectory,
};

/// Meshes `0..=levels` of one refinement chain. Error evaluation relies on
/// all compared meshes sharing ancestors.
pub fn mesh_chain(domain: Domain, levels: usize) -> Vec<Arc<Mesh<f64>>> {
    let mut chain = vec![Mesh::initial(domain)];
    for _ in 0..levels {
        let next = chain.last().expect("nonempty").refine();
        chain.push(next);
    }
    chain
}

/// Result of a study plus what the manifest records about it.
#[derive(Clone, Debug)]
pub struct Study {
    pub config: ExperimentConfig,
    pub reports: Vec<ErrorReport>,
    pub reference_ndof: Option<usize>,
    pub max_newton_iterations: usize,
    pub fallback_steps: usize,
}

pub fn run(config: &ExperimentConfig) -> Result<Study> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::SlitConstantForce => run_slit(config),
        ExperimentKind::RoughInTime => run_rough_in_time(config),
        ExperimentKind::KnownSolution => run_known_solution(config),
        ExperimentKind::P2Validation => run_p2_validation(config),
        ExperimentKind::Custom => run_custom(config),
    }
}

/// Slit domain, `f = 2`, zero initial and boundary data on `I = (0, 1)`.
pub fn run_slit(config: &ExperimentConfig) -> Result<Study> {
    expect_kind(config, ExperimentKind::SlitConstantForce)?;
    discrete_study(config, &problem_spec(config)?)
}

/// Unit square, `f(t) = sgn(t)|t|^(-beta)`, zero data on `I = (-0.1, 0.1)`.
pub fn run_rough_in_time(config: &ExperimentConfig) -> Result<Study> {
    expect_kind(config, ExperimentKind::RoughInTime)?;
    discrete_study(config, &problem_spec(config)?)
}

/// Exact solution `p'|t|^(1/2)|x|^(1/p')` on `I = (-1, 1)`, boundary data from
/// window averages of its nodal interpolant, initial datum its L2
/// projection at `t = -1`.
pub fn run_known_solution(config: &ExperimentConfig) -> Result<Study> {
    expect_kind(config, ExperimentKind::KnownSolution)?;
    exact_study(config, &problem_spec(config)?, &KnownSolution::new(config.p)?)
}

/// `u = a sin(pi x) sin(pi y) e^(-t)` for `p = 2` on the unit square,
/// `I = (0, 1)`.
pub fn run_p2_validation(config: &ExperimentConfig) -> Result<Study> {
    expect_kind(config, ExperimentKind::P2Validation)?;
    exact_study(config, &problem_spec(config)?, &manufactured_solution(config.amplitude))
}

/// Constant force with zero data on a chosen domain and interval.
pub fn run_custom(config: &ExperimentConfig) -> Result<Study> {
    expect_kind(config, ExperimentKind::Custom)?;
    discrete_study(config, &problem_spec(config)?)
}

fn sine_bump(a: f64) -> impl Fn(Vec2<f64>) -> f64 + Copy + Send + Sync + 'static {
    move |x| a * (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// Exact solution of the linear validation run.
pub fn manufactured_solution(amplitude: f64) -> ClosedForm<f64> {
    let shape = sine_bump(amplitude);
    ClosedForm {
        value: Arc::new(move |x, t: f64| shape(x) * (-t).exp()),
        gradient: Arc::new(move |x: Vec2<f64>, t: f64| {
            let e = amplitude * PI * (-t).exp();
            [e * (PI * x[0]).cos() * (PI * x[1]).sin(), e * (PI * x[0]).sin() * (PI * x[1]).cos()]
        }),
        breakpoints: Vec::new(),
    }
}

/// Data of the evolution problem an experiment solves.
pub fn problem_spec(config: &ExperimentConfig) -> Result<ProblemSpec<f64>> {
    let params = params(config)?;
    let domain = config.resolved_domain();
    let mut spec = match config.experiment {
        ExperimentKind::SlitConstantForce => ProblemSpec::new(params, domain, Force::constant(2.0)),
        ExperimentKind::RoughInTime => ProblemSpec::new(params, domain, Force::power_time(config.beta)?),
        ExperimentKind::KnownSolution => {
            let exact = KnownSolution::new(config.p)?;
            let value = move |x: Vec2<f64>, t: f64| exact.value(x, t);
            let mut spec = ProblemSpec::new(params, domain, exact.force());
            spec.initial = InitialData::Function(Arc::new(move |x| value(x, -1.0)));
            spec.boundary = BoundaryCondition::AveragedNodal(Arc::new(value));
            spec
        }
        ExperimentKind::P2Validation => {
            let shape = sine_bump(config.amplitude);
            let force = Force::separable(Arc::new(move |x| (2.0 * PI * PI - 1.0) * shape(x)), TimeProfile::Exp(-1.0));
            let mut spec = ProblemSpec::new(params, domain, force);
            spec.initial = InitialData::Function(Arc::new(shape));
            spec
        }
        ExperimentKind::Custom => ProblemSpec::new(params, domain, Force::constant(config.force_constant)),
    };
    spec.force_mode = config.force_mode;
    Ok(spec)
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.experiment != kind {
        return Err(Error::Config(format!("configuration is for '{}', not '{}'", config.experiment.name(), kind.name())));
    }
    Ok(())
}

fn params(config: &ExperimentConfig) -> Result<PLaplaceParams<f64>> {
    PLaplaceParams::new(config.p, config.kappa)
}

pub fn time_grid(config: &ExperimentConfig, steps: usize) -> Result<TimeGrid<f64>> {
    let (t0, t1) = config.resolved_interval();
    TimeGrid::new(t0, t1, steps)
}

/// Solves one `(level, M)` run of the study on a mesh from `chain`.
pub fn solve_level(
    config: &ExperimentConfig,
    spec: &ProblemSpec<f64>,
    mesh: &Arc<Mesh<f64>>,
    degree: usize,
    steps: usize,
) -> Result<Trajectory<f64>> {
    let space = FeSpace::new(Arc::clone(mesh), degree)?;
    let started = std::time::Instant::now();
    let traj = solve_on_space(spec, &space, &time_grid(config, steps)?, &NewtonOptions::with_tol(config.tol))?;
    log::info!("level {} degree {degree}: ndof {}, M {steps}, {:.1} s", mesh.level(), space.ndof(), started.elapsed().as_secs_f64());
    Ok(traj)
}

struct Collector {
    reports: Vec<ErrorReport>,
    max_newton_iterations: usize,
    fallback_steps: usize,
}

impl Collector {
    fn new() -> Self {
        Self { reports: Vec::new(), max_newton_iterations: 0, fallback_steps: 0 }
    }

    fn note(&mut self, traj: &Trajectory<f64>) {
        for r in &traj.reports {
            self.max_newton_iterations = self.max_newton_iterations.max(r.iterations);
            self.fallback_steps += usize::from(r.fallback_used);
        }
    }

    fn finish(self, config: &ExperimentConfig, reference_ndof: Option<usize>) -> Study {
        Study {
            config: config.clone(),
            reports: self.reports,
            reference_ndof,
            max_newton_iterations: self.max_newton_iterations,
            fallback_steps: self.fallback_steps,
        }
    }
}

fn discrete_study(config: &ExperimentConfig, spec: &ProblemSpec<f64>) -> Result<Study> {
    let rf = config.reference.ok_or_else(|| Error::Config("missing reference".into()))?;
    let chain = mesh_chain(spec.domain, rf.level);
    let mut out = Collector::new();
    let reference = solve_level(config, spec, &chain[rf.level], rf.degree, rf.steps)?;
    out.note(&reference);
    for l in &config.levels {
        let traj = solve_level(config, spec, &chain[l.level], config.r, l.steps)?;
        out.note(&traj);
        out.reports.push(compute_errors(&traj, ReferenceSolution::Discrete(&reference), &spec.params, config.quadrature_degree)?);
    }
    Ok(out.finish(config, Some(reference.space.ndof())))
}

fn exact_study(config: &ExperimentConfig, spec: &ProblemSpec<f64>, exact: &dyn ExactSolution<f64>) -> Result<Study> {
    let top = config.levels.iter().map(|l| l.level).max().unwrap_or(0);
    let chain = mesh_chain(spec.domain, top);
    let mut out = Collector::new();
    for l in &config.levels {
        let traj = solve_level(config, spec, &chain[l.level], config.r, l.steps)?;
        out.note(&traj);
        out.reports.push(compute_errors(&traj, ReferenceSolution::Exact(exact), &spec.params, config.quadrature_degree)?);
    }
    Ok(out.finish(config, None))
}

/// Text of the manifest that accompanies every CSV.
pub fn manifest(study: &Study) -> String {
    let cfg = &study.config;
    let (t0, t1) = cfg.resolved_interval();
    let mut s = String::new();
    let _ = writeln!(s, "# configuration");
    let _ = writeln!(s, "{cfg}");
    let _ = writeln!(s, "# resolved");
    let _ = writeln!(s, "domain = {}", cfg.resolved_domain().name());
    let _ = writeln!(s, "time_interval = {t0} {t1}");
    let steps: Vec<String> = cfg.levels.iter().map(|l| l.steps.to_string()).collect();
    let _ = writeln!(s, "grid = uniform, M = {}", steps.join(","));
    let initial = match cfg.experiment {
        ExperimentKind::KnownSolution => "L2 projection of the exact solution at t0",
        ExperimentKind::P2Validation => "L2 projection of the manufactured solution at t0",
        _ => "zero",
    };
    let _ = writeln!(s, "initial_data = {initial}");
    let boundary = match cfg.experiment {
        ExperimentKind::KnownSolution => "window averages of the nodal interpolant of the exact solution",
        _ => "homogeneous",
    };
    let _ = writeln!(s, "boundary_data = {boundary}");
    let reference = match (cfg.experiment.uses_discrete_reference(), cfg.reference) {
        (true, Some(rf)) => {
            format!("discrete, level {} degree {} M {} ndof {}", rf.level, rf.degree, rf.steps, study.reference_ndof.unwrap_or(0))
        }
        _ => "exact".into(),
    };
    let _ = writeln!(s, "reference = {reference}");
    let opt = NewtonOptions::<f64>::with_tol(cfg.tol);
    let _ = writeln!(s, "newton_tol = {:e}", opt.tol);
    let _ = writeln!(s, "newton_max_iterations = {}", opt.max_iterations);
    let _ = writeln!(s, "linear_tol = {:e}", opt.linear_tol);
    let _ = writeln!(s, "eps_reg = {:e}", opt.eps_reg);
    let _ = writeln!(s, "max_newton_iterations_used = {}", study.max_newton_iterations);
    let _ = writeln!(s, "fallback_steps = {}", study.fallback_steps);
    let ndofs: Vec<String> = study.reports.iter().map(|r| r.ndof.to_string()).collect();
    let _ = writeln!(s, "ndof = {}", ndofs.join(","));
    s
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub dat: Option<PathBuf>,
}

pub fn output_files(csv: &Path, with_dat: bool) -> OutputFiles {
    OutputFiles { csv: csv.to_path_buf(), manifest: csv.with_extension("manifest"), dat: with_dat.then(|| csv.with_extension("dat")) }
}

/// Writes CSV, manifest and optionally the `.dat` copy next to `csv`.
pub fn write_outputs(study: &Study, csv: &Path) -> Result<OutputFiles> {
    let files = output_files(csv, study.config.write_dat);
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(&study.reports, std::fs::File::create(&files.csv)?)?;
    std::fs::File::create(&files.manifest)?.write_all(manifest(study).as_bytes())?;
    if let Some(dat) = &files.dat {
        write_dat(&study.reports, std::io::BufWriter::new(std::fs::File::create(dat)?))?;
    }
    Ok(files)
}

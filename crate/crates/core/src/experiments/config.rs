//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::error_metrics::ERROR_QUADRATURE_DEGREE;
use crate::mesh::Domain;
use crate::timestepper::{ForceMode, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Slit domain, `f = 2`, discrete reference.
    SlitConstantForce,
    /// Unit square, `f = sgn(t)|t|^(-beta)`, discrete reference.
    RoughInTime,
    /// Closed-form solution singular at `x = 0` and `t = 0`.
    KnownSolution,
    /// Linear heat equation with a smooth manufactured solution.
    P2Validation,
    /// Constant force on any template domain, discrete reference.
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::SlitConstantForce,
        ExperimentKind::RoughInTime,
        ExperimentKind::KnownSolution,
        ExperimentKind::P2Validation,
        ExperimentKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SlitConstantForce => "slit_constant_force",
            ExperimentKind::RoughInTime => "rough_in_time",
            ExperimentKind::KnownSolution => "known_solution",
            ExperimentKind::P2Validation => "p2_validation",
            ExperimentKind::Custom => "custom",
        }
    }

    pub fn uses_discrete_reference(self) -> bool {
        matches!(self, ExperimentKind::SlitConstantForce | ExperimentKind::RoughInTime | ExperimentKind::Custom)
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slit" => Ok(ExperimentKind::SlitConstantForce),
            _ => Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Config(format!("unknown experiment '{s}'"))),
        }
    }
}

/// Square domain of the known-solution experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainVariant {
    /// `(-1,1)^2`, contains the spatial singularity.
    Omega1,
    /// `(1,3) x (-1,1)`, away from it.
    Omega2,
}

impl DomainVariant {
    pub fn domain(self) -> Domain {
        match self {
            DomainVariant::Omega1 => Domain::CenteredSquare,
            DomainVariant::Omega2 => Domain::ShiftedSquare,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainVariant::Omega1 => "omega1",
            DomainVariant::Omega2 => "omega2",
        }
    }
}

impl FromStr for DomainVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega1" => Ok(DomainVariant::Omega1),
            "omega2" => Ok(DomainVariant::Omega2),
            other => Err(Error::Config(format!("unknown domain variant '{other}'"))),
        }
    }
}

/// One compared run: refinement level and number of time steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunLevel {
    pub level: usize,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReferenceLevel {
    pub level: usize,
    pub steps: usize,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub p: f64,
    pub kappa: f64,
    /// Exponent of the rough-in-time force.
    pub beta: f64,
    pub domain_variant: DomainVariant,
    /// Domain of the custom experiment.
    pub domain: Domain,
    /// Time interval of the custom experiment.
    pub time_interval: (f64, f64),
    /// Constant force of the custom experiment.
    pub force_constant: f64,
    /// Amplitude of the manufactured solution of the linear validation.
    pub amplitude: f64,
    pub r: usize,
    pub levels: Vec<RunLevel>,
    pub reference: Option<ReferenceLevel>,
    pub force_mode: ForceMode,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Also write a whitespace separated `.dat` copy of the CSV.
    pub write_dat: bool,
    pub tol: f64,
    pub quadrature_degree: usize,
}

fn doubling(levels: std::ops::RangeInclusive<usize>, steps_at_first: usize) -> Vec<RunLevel> {
    let first = *levels.start();
    levels.map(|level| RunLevel { level, steps: steps_at_first << (level - first) }).collect()
}

impl ExperimentConfig {
    /// Desk-scale defaults of each experiment.
    pub fn preset(experiment: ExperimentKind) -> Self {
        let base = Self {
            experiment,
            p: 1.5,
            kappa: 0.0,
            beta: 0.5,
            domain_variant: DomainVariant::Omega2,
            domain: Domain::UnitSquare,
            time_interval: (0.0, 1.0),
            force_constant: 1.0,
            amplitude: 1.0,
            r: 1,
            levels: Vec::new(),
            reference: None,
            force_mode: ForceMode::ThetaAverage,
            seed: 0,
            output_path: None,
            write_dat: false,
            tol: DEFAULT_TOL,
            quadrature_degree: ERROR_QUADRATURE_DEGREE,
        };
        match experiment {
            ExperimentKind::SlitConstantForce => {
                Self { levels: doubling(2..=5, 16), reference: Some(ReferenceLevel { level: 6, steps: 128, degree: 2 }), ..base }
            }
            ExperimentKind::RoughInTime => {
                Self { levels: doubling(2..=5, 16), reference: Some(ReferenceLevel { level: 6, steps: 256, degree: 2 }), ..base }
            }
            ExperimentKind::KnownSolution => Self { levels: doubling(1..=5, 4), ..base },
            ExperimentKind::P2Validation => {
                Self { p: 2.0, levels: (1..=5).map(|level| RunLevel { level, steps: 4usize.pow(level as u32) }).collect(), ..base }
            }
            ExperimentKind::Custom => {
                Self { levels: doubling(1..=3, 4), reference: Some(ReferenceLevel { level: 4, steps: 32, degree: 2 }), ..base }
            }
        }
    }

    /// Parses `key = value` lines on top of the preset named by the
    /// mandatory `experiment` key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config(format!("line {}: empty key or value", n + 1)));
            }
            if pairs.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        let kind: ExperimentKind = pairs.remove("experiment").ok_or_else(|| Error::Config("missing key 'experiment'".into()))?.parse()?;
        let mut cfg = Self::preset(kind);
        for (key, value) in &pairs {
            cfg.set(key, value)?;
        }
        if kind.uses_discrete_reference() && !pairs.contains_key("reference") && pairs.contains_key("r") {
            if let Some(rf) = cfg.reference.as_mut() {
                rf.degree = cfg.r + 1;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "p" => self.p = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "domain_variant" => self.domain_variant = value.parse()?,
            "domain" => self.domain = value.parse()?,
            "t0" => self.time_interval.0 = num(key, value)?,
            "t_end" => self.time_interval.1 = num(key, value)?,
            "force_constant" => self.force_constant = num(key, value)?,
            "amplitude" => self.amplitude = num(key, value)?,
            "r" => self.r = num(key, value)?,
            "levels" => self.levels = parse_levels(value)?,
            "reference" => self.reference = Some(parse_reference(value)?),
            "force_mode" => {
                self.force_mode = match value {
                    "theta_average" => ForceMode::ThetaAverage,
                    "point_value" => ForceMode::PointValue,
                    other => return Err(Error::Config(format!("unknown force_mode '{other}'"))),
                }
            }
            "seed" => self.seed = num(key, value)?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            "write_dat" => self.write_dat = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "quadrature_degree" => self.quadrature_degree = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p = {} must be a finite number above 1", self.p));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa = {} must be nonnegative", self.kappa));
        }
        if self.experiment == ExperimentKind::RoughInTime && !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta = {} must lie in (0, 1) for an integrable force", self.beta));
        }
        if self.experiment == ExperimentKind::KnownSolution && self.kappa != 0.0 {
            return bad("the known solution requires kappa = 0".into());
        }
        if self.experiment == ExperimentKind::P2Validation && self.p != 2.0 {
            return bad("p2_validation requires p = 2".into());
        }
        if !(1..=2).contains(&self.r) {
            return bad(format!("degree r = {} not in {{1, 2}}", self.r));
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive".into());
        }
        if self.quadrature_degree == 0 || self.quadrature_degree > crate::quadrature::MAX_TRIANGLE_DEGREE {
            return bad(format!("quadrature_degree = {} unsupported", self.quadrature_degree));
        }
        let (t0, t1) = self.time_interval;
        if !(t0 < t1) {
            return bad(format!("empty time interval ({t0}, {t1})"));
        }
        if self.levels.is_empty() {
            return bad("no levels".into());
        }
        if self.levels.iter().any(|l| l.steps == 0) {
            return bad("every level needs at least one time step".into());
        }
        if self.experiment.uses_discrete_reference() {
            let Some(rf) = self.reference else {
                return bad("a discrete reference 'level:M:degree' is required".into());
            };
            if !(1..=3).contains(&rf.degree) {
                return bad(format!("reference degree {} not in 1..=3", rf.degree));
            }
            for l in &self.levels {
                if l.level >= rf.level {
                    return bad(format!("level {} is not coarser than the reference level {}", l.level, rf.level));
                }
                if rf.steps % l.steps != 0 {
                    return bad(format!("M = {} does not divide the reference M = {}", l.steps, rf.steps));
                }
            }
        }
        Ok(())
    }

    /// Domain the experiment runs on.
    pub fn resolved_domain(&self) -> Domain {
        match self.experiment {
            ExperimentKind::SlitConstantForce => Domain::Slit,
            ExperimentKind::RoughInTime | ExperimentKind::P2Validation => Domain::UnitSquare,
            ExperimentKind::KnownSolution => self.domain_variant.domain(),
            ExperimentKind::Custom => self.domain,
        }
    }

    /// Time interval the experiment runs on.
    pub fn resolved_interval(&self) -> (f64, f64) {
        match self.experiment {
            ExperimentKind::SlitConstantForce | ExperimentKind::P2Validation => (0.0, 1.0),
            ExperimentKind::RoughInTime => (-0.1, 0.1),
            ExperimentKind::KnownSolution => (-1.0, 1.0),
            ExperimentKind::Custom => self.time_interval,
        }
    }
}

fn num<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

fn parse_levels(value: &str) -> Result<Vec<RunLevel>> {
    value
        .split(',')
        .map(|item| {
            let (l, m) = item.trim().split_once(':').ok_or_else(|| Error::Config(format!("level '{item}' is not 'level:M'")))?;
            Ok(RunLevel { level: num("levels", l.trim())?, steps: num("levels", m.trim())? })
        })
        .collect()
}

fn parse_reference(value: &str) -> Result<ReferenceLevel> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let [l, m, d] = parts[..] else {
        return Err(Error::Config(format!("reference '{value}' is not 'level:M:degree'")));
    };
    Ok(ReferenceLevel { level: num("reference", l)?, steps: num("reference", m)?, degree: num("reference", d)? })
}

impl fmt::Display for ExperimentConfig {
    /// Re-parsable form of the configuration.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment = {}", self.experiment.name())?;
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "kappa = {}", self.kappa)?;
        match self.experiment {
            ExperimentKind::RoughInTime => writeln!(f, "beta = {}", self.beta)?,
            ExperimentKind::KnownSolution => writeln!(f, "domain_variant = {}", self.domain_variant.name())?,
            ExperimentKind::P2Validation => writeln!(f, "amplitude = {}", self.amplitude)?,
            ExperimentKind::Custom => {
                writeln!(f, "domain = {}", self.domain.name())?;
                writeln!(f, "t0 = {}", self.time_interval.0)?;
                writeln!(f, "t_end = {}", self.time_interval.1)?;
                writeln!(f, "force_constant = {}", self.force_constant)?;
            }
            ExperimentKind::SlitConstantForce => {}
        }
        writeln!(f, "r = {}", self.r)?;
        let levels: Vec<String> = self.levels.iter().map(|l| format!("{}:{}", l.level, l.steps)).collect();
        writeln!(f, "levels = {}", levels.join(","))?;
        if let Some(rf) = self.reference {
            writeln!(f, "reference = {}:{}:{}", rf.level, rf.steps, rf.degree)?;
        }
        let mode = match self.force_mode {
            ForceMode::ThetaAverage => "theta_average",
            ForceMode::PointValue => "point_value",
        };
        writeln!(f, "force_mode = {mode}")?;
        writeln!(f, "seed = {}", self.seed)?;
        if let Some(path) = &self.output_path {
            writeln!(f, "output_path = {}", path.display())?;
        }
        writeln!(f, "write_dat = {}", self.write_dat)?;
        writeln!(f, "tol = {:e}", self.tol)?;
        write!(f, "quadrature_degree = {}", self.quadrature_degree)
    }
}

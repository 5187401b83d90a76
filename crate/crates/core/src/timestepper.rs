//! Implicit Euler time stepping: time grids and averaging weights, force
//! averaging, the per-step nonlinear solve and whole trajectories.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::assembly::{assemble_load, euclid, solve_spd, QuadratureField, StepProblem, DEFAULT_CG_TOL};
use crate::constitutive::{PLaplaceParams, DEFAULT_EPS_REG};
use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSpace};
use crate::mesh::{Domain, Mesh};
use crate::projection::{averaged_boundary_values, l2_project, BoundaryData};
use crate::quadrature::gauss_legendre;
use crate::scalar::{Real, Vec2};

/// Uniform partition `t0 < t0 + tau < ... < t_end` with `steps` intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    t0: T,
    t_end: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, t_end: T, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("time grid ({t0}, {t_end}) with {steps} steps")));
        }
        Ok(Self { t0, t_end, steps })
    }

    pub fn t0(&self) -> T {
        self.t0
    }
    pub fn t_end(&self) -> T {
        self.t_end
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn tau(&self) -> T {
        (self.t_end - self.t0) / T::from_usize_lossy(self.steps)
    }

    /// `t_m`; the last node is exactly `t_end`.
    pub fn t(&self, m: usize) -> T {
        if m == self.steps {
            self.t_end
        } else {
            self.t0 + T::from_usize_lossy(m) * self.tau()
        }
    }

    /// `I_m = [t_{m-1}, t_m]`.
    pub fn interval(&self, m: usize) -> (T, T) {
        (self.t(m - 1), self.t(m))
    }

    /// `J_m = [t_{m-1}, t_{m+1}]`, cut off at `t_end` for the last step.
    pub fn window(&self, m: usize) -> (T, T) {
        (self.t(m - 1), self.t((m + 1).min(self.steps)))
    }

    pub fn window_length(&self, m: usize) -> T {
        let (a, b) = self.window(m);
        b - a
    }
}

/// Piecewise linear, nonnegative weight given by its knots; zero outside
/// `[knots[0].0, knots.last().0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaWeight<T> {
    knots: Vec<(T, T)>,
}

impl<T: Real> ThetaWeight<T> {
    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    pub fn support(&self) -> (T, T) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    pub fn value(&self, s: T) -> T {
        let (a, b) = self.support();
        if s < a || s > b {
            return T::zero();
        }
        for w in self.knots.windows(2) {
            let ((s0, v0), (s1, v1)) = (w[0], w[1]);
            if s <= s1 {
                return v0 + (v1 - v0) * (s - s0) / (s1 - s0);
            }
        }
        self.knots[self.knots.len() - 1].1
    }

    pub fn mass(&self) -> T {
        self.pieces().map(|(s0, s1, v0, v1)| (v0 + v1) * (s1 - s0) * T::lit(0.5)).sum()
    }

    /// Linear pieces `(s0, s1, value(s0), value(s1))`.
    pub fn pieces(&self) -> impl Iterator<Item = (T, T, T, T)> + '_ {
        self.knots.windows(2).map(|w| (w[0].0, w[1].0, w[0].1, w[1].1))
    }

    /// `int theta(s) g(s) ds` with `n`-point Gauss per linear piece, pieces
    /// split at `breaks`.
    pub fn integrate(&self, n: usize, breaks: &[T], mut g: impl FnMut(T) -> T) -> T {
        let (x, w) = gauss_legendre(n);
        let mut total = T::zero();
        for (s0, s1, v0, v1) in self.pieces() {
            for (a, b) in split_at(s0, s1, breaks) {
                let half = (b - a) * T::lit(0.5);
                let mid = (a + b) * T::lit(0.5);
                for (&xi, &wi) in x.iter().zip(&w) {
                    let s = mid + half * T::lit(xi);
                    let theta = v0 + (v1 - v0) * (s - s0) / (s1 - s0);
                    total += T::lit(wi) * half * theta * g(s);
                }
            }
        }
        total
    }
}

pub(crate) fn split_at<T: Real>(a: T, b: T, breaks: &[T]) -> Vec<(T, T)> {
    let mut cuts: Vec<T> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for c in cuts {
        out.push((lo, c));
        lo = c;
    }
    out.push((lo, b));
    out
}

/// Averaging weight of step `m`. For `m >= 2` it is
/// `theta_m(s) = (1 / (tau |J_m|)) |[max(s, t_{m-1}), min(s + tau, t_{m+1})]|`,
/// for `m = 1` it is `(1 / (tau |J_1|)) |[max(s, t0), t_2]|` on `s >= t0`.
/// On the cut-off last window the weight is rescaled to mass one.
pub fn theta_weight<T: Real>(m: usize, grid: &TimeGrid<T>) -> ThetaWeight<T> {
    assert!((1..=grid.steps()).contains(&m), "step index {m} out of range");
    let tau = grid.tau();
    let (a, b) = grid.window(m);
    let scale = T::one() / (tau * (b - a));
    let overlap = |s: T| {
        if m == 1 {
            (b - s.max(a)).max(T::zero())
        } else {
            ((s + tau).min(b) - s.max(a)).max(T::zero())
        }
    };
    let nodes: Vec<T> = if m == 1 {
        vec![a, b]
    } else if m < grid.steps() {
        vec![grid.t(m - 2), a, grid.t(m), b]
    } else {
        vec![grid.t(m - 2), a, b]
    };
    let mut knots: Vec<(T, T)> = nodes.into_iter().map(|s| (s, scale * overlap(s))).collect();
    let weight = ThetaWeight { knots: knots.clone() };
    let mass = weight.mass();
    for k in &mut knots {
        k.1 /= mass;
    }
    ThetaWeight { knots }
}

/// Point evaluation of [`theta_weight`].
pub fn theta_density<T: Real>(m: usize, sigma: T, grid: &TimeGrid<T>) -> T {
    theta_weight(m, grid).value(sigma)
}

pub type SpaceFn<T> = Arc<dyn Fn(Vec2<T>) -> T + Send + Sync>;
pub type SpaceTimeFn<T> = Arc<dyn Fn(Vec2<T>, T) -> T + Send + Sync>;

/// Time factor of a separable force term.
#[derive(Clone)]
pub enum TimeProfile<T> {
    One,
    /// `sgn(t) |t|^e`
    SignedPower(T),
    /// `|t|^e`
    AbsPower(T),
    /// `exp(rate * t)`
    Exp(T),
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Real> std::fmt::Debug for TimeProfile<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeProfile::One => write!(f, "One"),
            TimeProfile::SignedPower(e) => write!(f, "SignedPower({e})"),
            TimeProfile::AbsPower(e) => write!(f, "AbsPower({e})"),
            TimeProfile::Exp(r) => write!(f, "Exp({r})"),
            TimeProfile::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl<T: Real> TimeProfile<T> {
    pub fn eval(&self, t: T) -> T {
        match self {
            TimeProfile::One => T::one(),
            TimeProfile::SignedPower(e) => {
                if t == T::zero() {
                    T::zero()
                } else {
                    t.signum() * t.abs().powf(*e)
                }
            }
            TimeProfile::AbsPower(e) => t.abs().powf(*e),
            TimeProfile::Exp(r) => (*r * t).exp(),
            TimeProfile::Custom(f) => f(t),
        }
    }

    fn check_integrable(&self) -> Result<()> {
        match self {
            TimeProfile::SignedPower(e) | TimeProfile::AbsPower(e) if *e <= -T::one() => Err(Error::NonIntegrableForce(-e.to_f64_lossy())),
            _ => Ok(()),
        }
    }

    /// `int theta(s) g(s) ds`. Powers of `|t|` are integrated in closed
    /// form on every linear piece of `theta`, split at zero.
    pub fn theta_average(&self, theta: &ThetaWeight<T>) -> Result<T> {
        self.check_integrable()?;
        let zero = [T::zero()];
        Ok(match self {
            TimeProfile::One => theta.mass(),
            TimeProfile::SignedPower(e) | TimeProfile::AbsPower(e) => {
                let signed = matches!(self, TimeProfile::SignedPower(_));
                let mut total = T::zero();
                for (s0, s1, v0, v1) in theta.pieces() {
                    let slope = (v1 - v0) / (s1 - s0);
                    for (a, b) in split_at(s0, s1, &zero) {
                        // theta(s) = v0 + slope (s - s0) = (v0 - slope s0) + slope s
                        let (m0, m1) = power_moments(a, b, *e, signed);
                        total += (v0 - slope * s0) * m0 + slope * m1;
                    }
                }
                total
            }
            TimeProfile::Exp(_) | TimeProfile::Custom(_) => theta.integrate(5, &zero, |s| self.eval(s)),
        })
    }
}

/// `(int_a^b w(s) ds, int_a^b s w(s) ds)` for `w = |s|^e` or `sgn(s)|s|^e`,
/// with `a` and `b` on the same side of zero.
fn power_moments<T: Real>(a: T, b: T, e: T, signed: bool) -> (T, T) {
    let one = T::one();
    let two = one + one;
    // antiderivatives on the positive half line
    let f0 = |u: T| u.powf(e + one) / (e + one);
    let f1 = |u: T| u.powf(e + two) / (e + two);
    if a >= T::zero() {
        (f0(b) - f0(a), f1(b) - f1(a))
    } else {
        // s = -u with u in [-b, -a]
        let (ua, ub) = (-b, -a);
        let m0 = f0(ub) - f0(ua);
        let m1 = -(f1(ub) - f1(ua));
        if signed {
            (-m0, -m1)
        } else {
            (m0, m1)
        }
    }
}

/// One additive term of a force.
#[derive(Clone)]
pub enum ForceTerm<T> {
    Separable { space: SpaceFn<T>, time: TimeProfile<T> },
    General(SpaceTimeFn<T>),
}

/// Right-hand side `f(x, t)` as a sum of terms.
#[derive(Clone, Default)]
pub struct Force<T> {
    terms: Vec<ForceTerm<T>>,
}

impl<T: Real> std::fmt::Debug for Force<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Force({} terms)", self.terms.len())
    }
}

impl<T: Real> Force<T> {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::separable(Arc::new(move |_| c), TimeProfile::One)
    }

    /// `sgn(t) |t|^(-beta)`, constant in space.
    pub fn power_time(beta: T) -> Result<Self> {
        if !(beta > T::zero() && beta < T::one()) {
            return Err(Error::NonIntegrableForce(beta.to_f64_lossy()));
        }
        Ok(Self::separable(Arc::new(|_| T::one()), TimeProfile::SignedPower(-beta)))
    }

    pub fn separable(space: SpaceFn<T>, time: TimeProfile<T>) -> Self {
        Self { terms: vec![ForceTerm::Separable { space, time }] }
    }

    pub fn general(f: SpaceTimeFn<T>) -> Self {
        Self { terms: vec![ForceTerm::General(f)] }
    }

    pub fn with_term(mut self, term: ForceTerm<T>) -> Self {
        self.terms.push(term);
        self
    }

    pub fn terms(&self) -> &[ForceTerm<T>] {
        &self.terms
    }

    pub fn eval(&self, x: Vec2<T>, t: T) -> T {
        self.terms
            .iter()
            .map(|term| match term {
                ForceTerm::Separable { space, time } => space(x) * time.eval(t),
                ForceTerm::General(f) => f(x, t),
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForceMode {
    /// `f_m = int theta_m(s) f(s) ds`
    ThetaAverage,
    /// `f_m = f(t_m)`
    PointValue,
}

/// Time-discrete force of step `m` at the points of a degree-`degree` rule.
pub fn average_force<T: Real>(
    force: &Force<T>,
    m: usize,
    grid: &TimeGrid<T>,
    space: &FeSpace<T>,
    mode: ForceMode,
    degree: usize,
) -> Result<QuadratureField<T>> {
    let theta = theta_weight(m, grid);
    let tm = grid.t(m);
    let mut factors = Vec::with_capacity(force.terms.len());
    for term in &force.terms {
        if let ForceTerm::Separable { time, .. } = term {
            factors.push(match mode {
                ForceMode::ThetaAverage => time.theta_average(&theta)?,
                ForceMode::PointValue => {
                    let v = time.eval(tm);
                    if !v.is_finite() {
                        return Err(Error::InvalidParameter(format!("force is singular at t = {tm}")));
                    }
                    v
                }
            });
        } else {
            factors.push(T::zero());
        }
    }
    if force.terms.is_empty() {
        return Ok(QuadratureField::constant(space, T::zero()));
    }
    let zero = [T::zero()];
    QuadratureField::from_fn(space, degree, |_, x| {
        force
            .terms
            .iter()
            .zip(&factors)
            .map(|(term, &a)| match term {
                ForceTerm::Separable { space, .. } => a * space(x),
                ForceTerm::General(f) => match mode {
                    ForceMode::ThetaAverage => theta.integrate(5, &zero, |s| f(x, s)),
                    ForceMode::PointValue => f(x, tm),
                },
            })
            .sum()
    })
}

#[derive(Clone)]
pub enum InitialData<T> {
    Zero,
    Function(SpaceFn<T>),
}

#[derive(Clone)]
pub enum BoundaryCondition<T> {
    Homogeneous,
    /// Window averages of the nodal interpolant of `g(x, t)`.
    AveragedNodal(SpaceTimeFn<T>),
}

/// Everything that defines an evolution problem apart from the discretisation.
#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub params: PLaplaceParams<T>,
    pub domain: Domain,
    pub force: Force<T>,
    pub initial: InitialData<T>,
    pub boundary: BoundaryCondition<T>,
    pub force_mode: ForceMode,
    /// Quadrature exactness for the load vector; `None` means `2r + 2`.
    pub load_degree: Option<usize>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(params: PLaplaceParams<T>, domain: Domain, force: Force<T>) -> Self {
        Self {
            params,
            domain,
            force,
            initial: InitialData::Zero,
            boundary: BoundaryCondition::Homogeneous,
            force_mode: ForceMode::ThetaAverage,
            load_degree: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub energy_values: Vec<f64>,
    pub fallback_used: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions<T> {
    pub tol: T,
    pub max_iterations: usize,
    pub armijo: T,
    pub max_halvings: usize,
    pub eps_reg: T,
    pub linear_tol: T,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_iterations: 200,
            armijo: T::lit(1e-4),
            max_halvings: 40,
            eps_reg: T::lit(DEFAULT_EPS_REG),
            linear_tol: T::lit(DEFAULT_CG_TOL),
        }
    }
}

impl<T: Real> NewtonOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }
}

pub const DEFAULT_TOL: f64 = 1e-10;

enum Search<T> {
    /// New iterate and the energy change that led to it.
    Accepted(Vec<T>, T),
    Failed,
}

/// Backtracking on the step energy along `d` from `u` (slope `r . d`).
fn line_search<T: Real>(problem: &StepProblem<T>, u: &[T], d: &[T], slope: T, opt: &NewtonOptions<T>) -> Search<T> {
    let line = problem.along(u, d);
    let point = |alpha: T| -> Vec<T> { u.iter().zip(d).map(|(&a, &b)| a + alpha * b).collect() };
    let mut alpha = T::one();
    for _ in 0..=opt.max_halvings {
        let (de, scale) = line.change(alpha);
        if de.abs() <= T::lit(64.0) * T::epsilon() * scale {
            // below rounding: no decrease can be certified along this line
            return Search::Failed;
        }
        if de < T::zero() && de <= opt.armijo * alpha * slope {
            let ratio = de / (alpha * slope);
            let factor = if ratio > T::lit(0.9) {
                // energy still falling linearly: the Jacobian overestimates
                // the curvature
                T::lit(2.0)
            } else if ratio < T::lit(0.25) {
                // overshoot, typically a sign flip where gradients collapse
                T::lit(0.5)
            } else {
                return Search::Accepted(point(alpha), de);
            };
            let (mut best, mut best_de) = (alpha, de);
            for _ in 0..opt.max_halvings {
                alpha *= factor;
                let dw = line.change(alpha).0;
                if !(dw < best_de) {
                    break;
                }
                best = alpha;
                best_de = dw;
            }
            return Search::Accepted(point(best), best_de);
        }
        alpha *= T::lit(0.5);
    }
    Search::Failed
}

/// Minimises the step energy by damped Newton; falls back to a Kacanov step
/// whenever no Armijo step exists along the Newton direction.
pub fn solve_step<T: Real>(problem: &StepProblem<T>, init: &[T], opt: &NewtonOptions<T>) -> Result<(Vec<T>, NewtonReport)> {
    let mut u = init.to_vec();
    problem.impose_boundary(&mut u);
    let target = opt.tol * (T::one() + problem.rhs_norm());
    let mut energy = problem.energy(&u);
    let mut report = NewtonReport { energy_values: vec![energy.to_f64_lossy()], ..Default::default() };
    loop {
        let r = problem.residual(&u);
        let rn = euclid(&r);
        report.final_residual_norm = rn.to_f64_lossy();
        if rn <= target {
            return Ok((u, report));
        }
        if report.iterations >= opt.max_iterations || !rn.is_finite() {
            return Err(Error::NonConvergence { step: 0, report: Box::new(report) });
        }
        report.iterations += 1;

        let newton = match problem.jacobian(&u) {
            Ok(j) => {
                let neg: Vec<T> = r.iter().map(|&v| -v).collect();
                // inexact Newton: loose linear solves far from the minimiser
                let forcing = (rn / (T::one() + problem.rhs_norm())).sqrt().min(T::lit(0.1)).max(opt.linear_tol);
                let (d, _) = solve_spd(&j, &neg, forcing)?;
                let slope = crate::assembly::dot_slice(&r, &d);
                if slope < T::zero() {
                    match line_search(problem, &u, &d, slope, opt) {
                        Search::Accepted(v, de) => Some((v, de)),
                        Search::Failed => accept_if_flat(problem, &u, &d, rn),
                    }
                } else {
                    None
                }
            }
            Err(Error::SingularJacobian) => None,
            Err(e) => return Err(e),
        };
        let (v, de) = match newton {
            Some(step) => step,
            None => {
                report.fallback_used = true;
                match kacanov_step(problem, &u, opt)? {
                    Some(step) => step,
                    None => {
                        report.energy_values.push(energy.to_f64_lossy());
                        return Err(Error::NonConvergence { step: 0, report: Box::new(report) });
                    }
                }
            }
        };
        u = v;
        energy += de;
        report.energy_values.push(energy.to_f64_lossy());
    }
}

/// Close to the minimiser the Armijo test drowns in rounding; accept the full
/// step there if it does not raise the energy beyond rounding and reduces
/// the residual.
fn accept_if_flat<T: Real>(problem: &StepProblem<T>, u: &[T], d: &[T], rn: T) -> Option<(Vec<T>, T)> {
    let v: Vec<T> = u.iter().zip(d).map(|(&a, &b)| a + b).collect();
    let (de, scale) = problem.energy_change(u, &v);
    let flat = de <= T::lit(64.0) * T::epsilon() * scale;
    if flat && euclid(&problem.residual(&v)) < rn {
        Some((v, de.min(T::zero())))
    } else {
        None
    }
}

fn kacanov_target<T: Real>(problem: &StepProblem<T>, u: &[T], opt: &NewtonOptions<T>) -> Result<Vec<T>> {
    let (a, b) = problem.kacanov_system(u)?;
    Ok(solve_spd(&a, &b, opt.linear_tol)?.0)
}

/// One lagged-coefficient step followed by a line search.
fn kacanov_step<T: Real>(problem: &StepProblem<T>, u: &[T], opt: &NewtonOptions<T>) -> Result<Option<(Vec<T>, T)>> {
    let w = kacanov_target(problem, u, opt)?;
    let d: Vec<T> = w.iter().zip(u).map(|(&a, &b)| a - b).collect();
    let r = problem.residual(u);
    let slope = crate::assembly::dot_slice(&r, &d);
    if slope >= T::zero() {
        return Ok(None);
    }
    Ok(match line_search(problem, u, &d, slope, opt) {
        Search::Accepted(v, de) => Some((v, de)),
        Search::Failed => None,
    })
}

/// Pure Kacanov iteration with line search, run to the same stopping rule as
/// [`solve_step`]. Slow, but independent of the Newton machinery.
pub fn kacanov_solve<T: Real>(problem: &StepProblem<T>, init: &[T], opt: &NewtonOptions<T>) -> Result<(Vec<T>, NewtonReport)> {
    let mut u = init.to_vec();
    problem.impose_boundary(&mut u);
    let target = opt.tol * (T::one() + problem.rhs_norm());
    let mut energy = problem.energy(&u);
    let mut report = NewtonReport { energy_values: vec![energy.to_f64_lossy()], fallback_used: true, ..Default::default() };
    loop {
        let rn = euclid(&problem.residual(&u));
        report.final_residual_norm = rn.to_f64_lossy();
        if rn <= target {
            return Ok((u, report));
        }
        if report.iterations >= opt.max_iterations {
            return Err(Error::NonConvergence { step: 0, report: Box::new(report) });
        }
        report.iterations += 1;
        match kacanov_step(problem, &u, opt)? {
            Some((v, de)) => {
                u = v;
                energy += de;
            }
            None => {
                // plain fixed-point update once the energy is flat
                let w = kacanov_target(problem, &u, opt)?;
                energy += problem.energy_change(&u, &w).0;
                u = w;
            }
        }
        report.energy_values.push(energy.to_f64_lossy());
    }
}

/// Sequence of discrete solutions `u_{m,h}`, `m = 0..=M`.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub space: Arc<FeSpace<T>>,
    pub grid: TimeGrid<T>,
    pub snapshots: Vec<FeFunction<T>>,
    pub reports: Vec<NewtonReport>,
}

impl<T: Real> Trajectory<T> {
    /// Writes `snapshot_<m>.txt` per step and a `manifest.txt` with lines
    /// `m t_m newton_iters residual`.
    pub fn write_dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.txt"))?);
        for (m, snap) in self.snapshots.iter().enumerate() {
            let f = std::fs::File::create(dir.join(format!("snapshot_{m:05}.txt")))?;
            snap.write_text(std::io::BufWriter::new(f))?;
            let (iters, res) = if m == 0 {
                (0, 0.0)
            } else {
                let r = &self.reports[m - 1];
                (r.iterations, r.final_residual_norm)
            };
            writeln!(manifest, "{m} {:.17e} {iters} {res:.6e}", self.grid.t(m).to_f64_lossy())?;
        }
        manifest.flush()?;
        Ok(())
    }
}

/// Dirichlet values of step `m` as a full-length coefficient vector.
pub fn boundary_vector<T: Real>(spec: &ProblemSpec<T>, space: &Arc<FeSpace<T>>, m: usize, grid: &TimeGrid<T>) -> Result<BoundaryData<T>> {
    Ok(match &spec.boundary {
        BoundaryCondition::Homogeneous => BoundaryData::homogeneous(space),
        BoundaryCondition::AveragedNodal(g) => averaged_boundary_values(space, |x, t| g(x, t), m, grid),
    })
}

/// One implicit Euler step from `u_prev` to `t_m`.
pub fn step<T: Real>(
    u_prev: &FeFunction<T>,
    m: usize,
    grid: &TimeGrid<T>,
    spec: &ProblemSpec<T>,
    opt: &NewtonOptions<T>,
) -> Result<(FeFunction<T>, NewtonReport)> {
    let space = u_prev.space();
    let degree = spec.load_degree.unwrap_or_else(|| crate::assembly::default_degree(space.degree()));
    let field = average_force(&spec.force, m, grid, space, spec.force_mode, degree)?;
    let load = assemble_load(space, &field);
    let boundary = boundary_vector(spec, space, m, grid)?.full_vector(space.ndof());
    let problem = StepProblem::new(u_prev, grid.tau(), load, spec.params, boundary, opt.eps_reg)?;
    let (u, report) = solve_step(&problem, u_prev.coeffs(), opt).map_err(|e| match e {
        Error::NonConvergence { report, .. } => Error::NonConvergence { step: m, report },
        other => other,
    })?;
    Ok((FeFunction::from_coeffs(space, u)?, report))
}

/// Discrete initial datum: L2 projection onto the full space.
pub fn initial_snapshot<T: Real>(spec: &ProblemSpec<T>, space: &Arc<FeSpace<T>>) -> Result<FeFunction<T>> {
    match &spec.initial {
        InitialData::Zero => Ok(FeFunction::zero(space)),
        InitialData::Function(g) => l2_project(space, |x| g(x)),
    }
}

/// Runs all `M` steps on `space`. The boundary DOFs of the initial
/// snapshot are overwritten with the boundary data of the first step.
pub fn solve_on_space<T: Real>(
    spec: &ProblemSpec<T>,
    space: &Arc<FeSpace<T>>,
    grid: &TimeGrid<T>,
    opt: &NewtonOptions<T>,
) -> Result<Trajectory<T>> {
    let mut u0 = initial_snapshot(spec, space)?;
    let first = boundary_vector(spec, space, 1, grid)?;
    first.overwrite(&mut u0);
    let mut snapshots = Vec::with_capacity(grid.steps() + 1);
    let mut reports = Vec::with_capacity(grid.steps());
    snapshots.push(u0);
    for m in 1..=grid.steps() {
        let (u, report) = step(&snapshots[m - 1], m, grid, spec, opt)?;
        snapshots.push(u);
        reports.push(report);
    }
    Ok(Trajectory { space: Arc::clone(space), grid: *grid, snapshots, reports })
}

/// Builds the mesh of `spec.domain` at `level`, the degree-`r` space on it,
/// and runs [`solve_on_space`].
pub fn solve_evolution<T: Real>(spec: &ProblemSpec<T>, level: usize, r: usize, grid: &TimeGrid<T>, tol: T) -> Result<Trajectory<T>> {
    let space = FeSpace::new(Mesh::at_level(spec.domain, level), r)?;
    solve_on_space(spec, &space, grid, &NewtonOptions::with_tol(tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_laplace;
    use crate::linalg::solve_direct;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(t0: f64, t1: f64, m: usize) -> TimeGrid<f64> {
        TimeGrid::new(t0, t1, m).unwrap()
    }

    fn integrate_theta(w: &ThetaWeight<f64>, g: impl Fn(f64) -> f64) -> f64 {
        // composite Gauss; 42 pieces keep the kinks of 2- and 3-tau supports
        // on piece boundaries
        let (a, b) = w.support();
        let pieces = 42;
        (0..pieces)
            .map(|k| {
                let s0 = a + (b - a) * k as f64 / pieces as f64;
                let s1 = a + (b - a) * (k + 1) as f64 / pieces as f64;
                crate::quadrature::integrate_interval(s0, s1, 10, |s| w.value(s) * g(s))
            })
            .sum()
    }

    #[test]
    fn grid_nodes_and_windows() {
        let g = grid(-0.1, 0.1, 8);
        assert!((g.tau() - 0.025).abs() < 1e-17);
        assert_eq!(g.t(8), 0.1);
        assert_eq!(g.window(3), (g.t(2), g.t(4)));
        assert_eq!(g.window(8), (g.t(7), g.t(8)));
        let total: f64 = (1..=8).map(|m| g.window_length(m)).sum();
        assert!((total - (2.0 * 0.2 - 0.025)).abs() < 1e-15);
        assert!(TimeGrid::new(0.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn theta_shapes() {
        let g = grid(0.0, 1.0, 10);
        let tau = g.tau();
        // plateau 1/(2 tau) on I_m, ramps on the neighbours
        let w = theta_weight(4, &g);
        assert!((w.value(0.35) - 1.0 / (2.0 * tau)).abs() < 1e-12);
        assert!((w.value(0.25) - 0.5 / (2.0 * tau)).abs() < 1e-12);
        assert!((w.value(0.45) - 0.5 / (2.0 * tau)).abs() < 1e-12);
        assert_eq!(w.support(), (g.t(2), g.t(5)));
        assert_eq!(w.value(0.19), 0.0);
        // first step: (2 tau - s) / (2 tau^2)
        let w1 = theta_weight(1, &g);
        assert!((w1.value(0.0) - 1.0 / tau).abs() < 1e-12);
        assert!(w1.value(2.0 * tau).abs() < 1e-12);
        assert!((w1.value(0.05) - (2.0 * tau - 0.05) / (2.0 * tau * tau)).abs() < 1e-10);
        // shifted grids use local coordinates
        let h = grid(-1.0, 0.0, 10);
        let v1 = theta_weight(1, &h);
        assert!((v1.value(-1.0) - 1.0 / tau).abs() < 1e-12);
        assert!((theta_density(4, -0.65, &h) - 1.0 / (2.0 * tau)).abs() < 1e-12);
    }

    #[test]
    fn theta_has_unit_mass() {
        for &(t0, t1, steps) in &[(0.0, 1.0, 1), (0.0, 1.0, 2), (0.0, 1.0, 7), (-0.1, 0.1, 16), (-1.0, 1.0, 32)] {
            let g = grid(t0, t1, steps);
            for m in 1..=steps {
                let w = theta_weight(m, &g);
                assert!((integrate_theta(&w, |_| 1.0) - 1.0).abs() < 1e-13, "m={m} M={steps}");
                assert!((w.mass() - 1.0).abs() < 1e-13);
                assert!(w.support().0 >= t0 - 1e-15 && w.support().1 <= t1 + 1e-15);
            }
        }
    }

    #[test]
    fn theta_first_moment() {
        // the trapezoid on [t_{m-2}, t_{m+1}] is symmetric about t_m - tau/2
        let g = grid(0.0, 1.0, 10);
        for m in 2..10 {
            let w = theta_weight(m, &g);
            let c = integrate_theta(&w, |s| s);
            assert!((c - (g.t(m) - 0.5 * g.tau())).abs() < 1e-13);
            let a = TimeProfile::Custom(Arc::new(|s: f64| s)).theta_average(&w).unwrap();
            assert!((a - c).abs() < 1e-13);
        }
        // first step: mean of (2 tau - s)/(2 tau^2) s over [0, 2 tau] is 2 tau / 3
        let w1 = theta_weight(1, &g);
        assert!((integrate_theta(&w1, |s| s) - 2.0 * g.tau() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn power_profiles_match_quadrature() {
        let g = grid(-0.1, 0.1, 10);
        for &e in &[-0.9, -0.5, -0.1, 0.5, 1.5] {
            for m in 1..=10 {
                let w = theta_weight(m, &g);
                for prof in [TimeProfile::SignedPower(e), TimeProfile::AbsPower(e)] {
                    let exact = prof.theta_average(&w).unwrap();
                    let odd = matches!(prof, TimeProfile::SignedPower(_));
                    // oracle: on each side of 0 substitute |s| = u^(1/(e+1)), so
                    // |s|^e ds = du / (e+1); graded Gauss in u towards 0
                    let (a, b) = w.support();
                    let mut breaks = vec![0.0];
                    breaks.extend(w.knots().iter().map(|k| k.0));
                    let q = 1.0 / (e + 1.0);
                    let approx: f64 = split_at(a, b, &breaks)
                        .into_iter()
                        .map(|(s0, s1)| {
                            let (sign, lo, hi) = if s0 >= 0.0 { (1.0, s0, s1) } else { (-1.0, -s1, -s0) };
                            let side = if odd { sign } else { 1.0 };
                            let (u0, u1) = (lo.powf(e + 1.0), hi.powf(e + 1.0));
                            let mut cuts = vec![u0];
                            if u0 == 0.0 {
                                cuts.extend((1..60).rev().map(|k| u1 * 0.5f64.powi(k)));
                            }
                            cuts.push(u1);
                            cuts.windows(2)
                                .map(|c| crate::quadrature::integrate_interval(c[0], c[1], 20, |u| w.value(sign * u.powf(q))))
                                .sum::<f64>()
                                * side
                                / (e + 1.0)
                        })
                        .sum();
                    let scale = exact.abs().max(1.0);
                    assert!((exact - approx).abs() < 1e-9 * scale, "e={e} m={m}: {exact} vs {approx}");
                }
            }
        }
    }

    #[test]
    fn odd_force_averages_to_zero_on_symmetric_windows() {
        // five steps on (-0.1, 0.1): I_3 = [-0.02, 0.02] and theta_3 is even about 0
        let g = grid(-0.1, 0.1, 5);
        let f = Force::<f64>::power_time(0.5).unwrap();
        let ForceTerm::Separable { time, .. } = &f.terms()[0] else { unreachable!() };
        let v = time.theta_average(&theta_weight(3, &g)).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
        assert!(time.theta_average(&theta_weight(4, &g)).unwrap() > 0.0);
    }

    #[test]
    fn non_integrable_force_rejected() {
        assert!(matches!(Force::<f64>::power_time(1.0), Err(Error::NonIntegrableForce(_))));
        assert!(matches!(Force::<f64>::power_time(1.5), Err(Error::NonIntegrableForce(_))));
        let g = grid(-1.0, 1.0, 4);
        let w = theta_weight(2, &g);
        assert!(TimeProfile::AbsPower(-1.2).theta_average(&w).is_err());
    }

    #[test]
    fn constant_force_average() {
        let space = FeSpace::new(Mesh::at_level(Domain::UnitSquare, 1), 1).unwrap();
        let g = grid(0.0, 1.0, 5);
        for m in 1..=5 {
            let f = average_force(&Force::constant(2.0), m, &g, &space, ForceMode::ThetaAverage, 4).unwrap();
            assert!(f.values.iter().all(|&v| (v - 2.0).abs() < 1e-14));
        }
        let lin = Force::general(Arc::new(|_, t: f64| t));
        let f = average_force(&lin, 3, &g, &space, ForceMode::PointValue, 1).unwrap();
        assert!(f.values.iter().all(|&v| (v - 0.6).abs() < 1e-15));
    }

    #[test]
    fn discrete_product_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let tau: f64 = rng.gen_range(0.01..1.0);
            let a0: f64 = rng.gen_range(-1.0..1.0);
            let a1: f64 = rng.gen_range(-1.0..1.0);
            let d = (a1 - a0) / tau;
            let lhs = d * a1;
            let rhs = 0.5 * (a1 * a1 - a0 * a0) / tau + 0.5 * tau * d * d;
            assert!((lhs - rhs).abs() <= 1e-15 * (1.0 + lhs.abs()).max(d * d), "{lhs} {rhs}");
        }
    }

    fn problem(space: &Arc<FeSpace<f64>>, p: f64, tau: f64, seed: u64) -> StepProblem<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prev: Vec<f64> = (0..space.ndof()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prev = FeFunction::from_coeffs(space, prev).unwrap();
        let field = QuadratureField::from_fn(space, 4, |_, x| 1.0 + x[0] - 2.0 * x[1]).unwrap();
        let load = assemble_load(space, &field);
        let bnd: Vec<f64> = space.dof_coords().iter().map(|x| 0.3 * x[0] - 0.1).collect();
        StepProblem::new(&prev, tau, load, PLaplaceParams::new(p, 0.0).unwrap(), bnd, DEFAULT_EPS_REG).unwrap()
    }

    #[test]
    fn linear_case_is_one_newton_step() {
        let space = FeSpace::new(Mesh::at_level(Domain::UnitSquare, 2), 1).unwrap();
        let pr = problem(&space, 2.0, 0.1, 1);
        let (u, rep) = solve_step(&pr, pr.u_prev(), &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        // direct solve of (M/tau + A) u = M u_prev / tau + b
        let mut a = assemble_laplace(&space);
        a.add_scaled(1.0 / pr.tau(), space.mass_matrix());
        let mut rhs = pr.rhs();
        let mut g = vec![0.0; space.ndof()];
        pr.impose_boundary(&mut g);
        a.pin_dofs(space.boundary_mask(), Some((&mut rhs, &g)));
        let (x, _) = solve_direct(&a, &rhs).unwrap();
        for (ui, xi) in u.iter().zip(&x) {
            assert!((ui - xi).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let space = FeSpace::new(Mesh::at_level(Domain::Slit, 1), 1).unwrap();
        let zero = FeFunction::zero(&space);
        let pr = StepProblem::new(
            &zero,
            0.1,
            vec![0.0; space.ndof()],
            PLaplaceParams::new(1.5, 0.0).unwrap(),
            vec![0.0; space.ndof()],
            DEFAULT_EPS_REG,
        )
        .unwrap();
        let (u, rep) = solve_step(&pr, zero.coeffs(), &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn newton_agrees_with_kacanov() {
        for (domain, level, p) in
            [(Domain::UnitSquare, 2, 3.0), (Domain::UnitSquare, 2, 1.5), (Domain::Slit, 1, 1.5), (Domain::Slit, 1, 3.0)]
        {
            let space = FeSpace::new(Mesh::at_level(domain, level), 1).unwrap();
            assert!(space.ndof() <= 100);
            let pr = problem(&space, p, 0.05, 7);
            let opt = NewtonOptions { max_iterations: 20_000, tol: 1e-12, ..NewtonOptions::default() };
            let (u, rep) = solve_step(&pr, pr.u_prev(), &opt).unwrap();
            let (v, _) = kacanov_solve(&pr, pr.u_prev(), &opt).unwrap();
            let diff = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-8, "{domain:?} p={p}: {diff}");
            for w in rep.energy_values.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
            }
            assert!(pr.energy(&u) <= pr.energy(pr.u_prev()));
        }
    }

    #[test]
    fn zero_state_start_for_singular_exponent() {
        // kappa = 0, p < 2 from a vanishing gradient: the regularised Jacobian
        // is huge but the solve still converges
        let space = FeSpace::new(Mesh::at_level(Domain::Slit, 3), 1).unwrap();
        let spec = ProblemSpec::new(PLaplaceParams::new(1.5, 0.0).unwrap(), Domain::Slit, Force::constant(2.0));
        let g = grid(0.0, 1.0, 4);
        let traj = solve_on_space(&spec, &space, &g, &NewtonOptions::default()).unwrap();
        assert_eq!(traj.snapshots.len(), 5);
        assert!(traj.reports.iter().all(|r| r.iterations < 200));
        assert!(traj.snapshots[4].coeffs().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn energy_dissipation_without_force() {
        let space = FeSpace::new(Mesh::at_level(Domain::UnitSquare, 3), 1).unwrap();
        for p in [1.5, 3.0] {
            let mut spec = ProblemSpec::new(PLaplaceParams::new(p, 0.0).unwrap(), Domain::UnitSquare, Force::zero());
            spec.initial =
                InitialData::Function(Arc::new(|x: Vec2<f64>| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()));
            let g = grid(0.0, 0.5, 10);
            let traj = solve_on_space(&spec, &space, &g, &NewtonOptions::default()).unwrap();
            let mass = space.mass_matrix();
            let norm2 = |u: &FeFunction<f64>| crate::assembly::dot_slice(u.coeffs(), &mass.apply(u.coeffs()));
            let norms: Vec<f64> = traj.snapshots.iter().map(norm2).collect();
            for w in norms.windows(2) {
                assert!(w[1] <= w[0] + 1e-14);
            }
            // tau sum int S(grad u_m) . grad u_m <= |u_0|^2 / 2
            let dissipated: f64 = traj.snapshots[1..]
                .iter()
                .map(|u| {
                    let pr = StepProblem::new(u, g.tau(), vec![0.0; space.ndof()], spec.params, vec![0.0; space.ndof()], DEFAULT_EPS_REG)
                        .unwrap();
                    // residual of the stationary part is K(u) u = int S(grad u) . grad u
                    let r = pr.residual(u.coeffs());
                    let interior: f64 = (0..space.ndof()).filter(|&i| !space.is_boundary_dof(i)).map(|i| r[i] * u.coeffs()[i]).sum();
                    interior
                })
                .sum::<f64>()
                * g.tau();
            // u_0 after the boundary overwrite
            assert!(dissipated <= 0.5 * norms[0] + 1e-8, "{dissipated} vs {}", 0.5 * norms[0]);
        }
    }

    #[test]
    fn stationary_data_is_a_fixed_point() {
        let space = FeSpace::new(Mesh::at_level(Domain::UnitSquare, 2), 1).unwrap();
        let params = PLaplaceParams::new(3.0, 0.0).unwrap();
        let spec = ProblemSpec::new(params, Domain::UnitSquare, Force::constant(1.0));
        // discrete steady state: a very long implicit step
        let g0 = grid(0.0, 1e6, 1);
        let steady = solve_on_space(&spec, &space, &g0, &NewtonOptions::default()).unwrap().snapshots.pop().unwrap();
        let g = grid(0.0, 1.0, 5);
        let mut u = steady.clone();
        for m in 1..=5 {
            let (next, _) = step(&u, m, &g, &spec, &NewtonOptions::default()).unwrap();
            u = next;
        }
        let diff = u.coeffs().iter().zip(steady.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // the long step leaves an O(1/T) remainder
        assert!(diff < 1e-5, "{diff}");
    }

    #[test]
    fn steps_satisfy_the_weak_form() {
        let space = FeSpace::new(Mesh::at_level(Domain::CenteredSquare, 2), 2).unwrap();
        let spec = ProblemSpec::new(PLaplaceParams::new(1.5, 0.0).unwrap(), Domain::CenteredSquare, Force::constant(1.0));
        let g = grid(0.0, 0.2, 3);
        let traj = solve_on_space(&spec, &space, &g, &NewtonOptions::default()).unwrap();
        for m in 1..=3 {
            let field = average_force(&spec.force, m, &g, &space, ForceMode::ThetaAverage, 6).unwrap();
            let r = crate::assembly::assemble_step_residual(
                &traj.snapshots[m],
                &traj.snapshots[m - 1],
                g.tau(),
                &field,
                spec.params,
                vec![0.0; space.ndof()],
            )
            .unwrap();
            let pr_rhs = {
                let pr = StepProblem::new(
                    &traj.snapshots[m - 1],
                    g.tau(),
                    assemble_load(&space, &field),
                    spec.params,
                    vec![0.0; space.ndof()],
                    DEFAULT_EPS_REG,
                )
                .unwrap();
                pr.rhs_norm()
            };
            assert!(euclid(&r) <= 1e-10 * (1.0 + pr_rhs));
        }
    }
}

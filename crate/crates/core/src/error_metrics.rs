//! Squared error quantities against exact or discrete reference solutions,
//! window averages over `J_m`, CSV rows and empirical convergence orders.

use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::constitutive::{s_flux, v_transform, PLaplaceParams};
use crate::error::{Error, Result};
use crate::fespace::FeSpace;
use crate::projection::least_squares;
use crate::quadrature::{gauss_legendre, triangle_rule};
use crate::scalar::{dot, norm, pow, sub, Real, Vec2};
use crate::timestepper::{split_at, Force, ForceTerm, TimeGrid, TimeProfile, Trajectory};

/// Default exactness degree of the spatial error quadrature.
pub const ERROR_QUADRATURE_DEGREE: usize = 8;

/// Time means of an exact solution over a window `[a, b]` at a fixed point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WindowStats<T> {
    pub mean_value: T,
    pub mean_v: Vec2<T>,
    /// Mean of `|V(grad u)|^2`.
    pub mean_v_sq: T,
    pub mean_s: Vec2<T>,
}

impl<T: Real> WindowStats<T> {
    /// Means over the union of two adjacent intervals of lengths `la`, `lb`.
    pub fn join(&self, la: T, other: &Self, lb: T) -> Self {
        let (wa, wb) = (la / (la + lb), lb / (la + lb));
        let mix = |a: T, b: T| wa * a + wb * b;
        WindowStats {
            mean_value: mix(self.mean_value, other.mean_value),
            mean_v: [mix(self.mean_v[0], other.mean_v[0]), mix(self.mean_v[1], other.mean_v[1])],
            mean_v_sq: mix(self.mean_v_sq, other.mean_v_sq),
            mean_s: [mix(self.mean_s[0], other.mean_s[0]), mix(self.mean_s[1], other.mean_s[1])],
        }
    }
}

/// Closed-form solution used as an exact reference.
pub trait ExactSolution<T: Real>: Send + Sync {
    fn value(&self, x: Vec2<T>, t: T) -> T;
    fn gradient(&self, x: Vec2<T>, t: T) -> Vec2<T>;

    /// Times at which the solution is not smooth.
    fn time_breakpoints(&self) -> Vec<T> {
        Vec::new()
    }

    /// Means over `[a, b]`; `cuts` are interior points where the caller
    /// wants the time quadrature split (grid nodes).
    fn window_stats(&self, x: Vec2<T>, a: T, b: T, cuts: &[T], params: &PLaplaceParams<T>) -> WindowStats<T> {
        gauss_window_stats(self, x, a, b, cuts, params)
    }
}

/// 5-point Gauss per piece of `[a, b]`, split at `cuts` and at the solution's
/// breakpoints.
pub fn gauss_window_stats<T: Real, E: ExactSolution<T> + ?Sized>(
    exact: &E,
    x: Vec2<T>,
    a: T,
    b: T,
    cuts: &[T],
    params: &PLaplaceParams<T>,
) -> WindowStats<T> {
    static GAUSS: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (gx, gw) = GAUSS.get_or_init(|| gauss_legendre(5));
    let mut breaks = cuts.to_vec();
    breaks.extend(exact.time_breakpoints());
    let mut acc = WindowStats::<T>::default();
    for (s0, s1) in split_at(a, b, &breaks) {
        let half = (s1 - s0) * T::lit(0.5);
        let mid = (s0 + s1) * T::lit(0.5);
        for (&xi, &wi) in gx.iter().zip(gw) {
            let t = mid + half * T::lit(xi);
            let w = T::lit(wi) * half;
            let g = exact.gradient(x, t);
            let v = v_transform(g, params);
            let s = s_flux(g, params);
            acc.mean_value += w * exact.value(x, t);
            acc.mean_v_sq += w * dot(v, v);
            for i in 0..2 {
                acc.mean_v[i] += w * v[i];
                acc.mean_s[i] += w * s[i];
            }
        }
    }
    let len = b - a;
    WindowStats {
        mean_value: acc.mean_value / len,
        mean_v: [acc.mean_v[0] / len, acc.mean_v[1] / len],
        mean_v_sq: acc.mean_v_sq / len,
        mean_s: [acc.mean_s[0] / len, acc.mean_s[1] / len],
    }
}

pub type GradientFn<T> = Arc<dyn Fn(Vec2<T>, T) -> Vec2<T> + Send + Sync>;

/// Exact solution given by closures; window means use Gauss quadrature.
#[derive(Clone)]
pub struct ClosedForm<T> {
    pub value: Arc<dyn Fn(Vec2<T>, T) -> T + Send + Sync>,
    pub gradient: GradientFn<T>,
    pub breakpoints: Vec<T>,
}

impl<T: Real> ExactSolution<T> for ClosedForm<T> {
    fn value(&self, x: Vec2<T>, t: T) -> T {
        (self.value)(x, t)
    }
    fn gradient(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        (self.gradient)(x, t)
    }
    fn time_breakpoints(&self) -> Vec<T> {
        self.breakpoints.clone()
    }
}

/// `u(x, t) = p' |t|^(1/2) |x|^(1/p')`, a solution for `kappa = 0` with the
/// force returned by [`KnownSolution::force`]. Singular at `x = 0` and `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnownSolution<T> {
    p: T,
}

impl<T: Real> KnownSolution<T> {
    pub fn new(p: T) -> Result<Self> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 1")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> T {
        self.p
    }

    fn conj(&self) -> T {
        self.p / (self.p - T::one())
    }

    /// `u_t - div S(grad u)`:
    /// `(p'/2) sgn(t)|t|^(-1/2) |x|^(1/p') - (1/p) |t|^((p-1)/2) |x|^(-1-1/p')`.
    pub fn force(&self) -> Force<T> {
        let (p, q) = (self.p, self.conj());
        let half = T::lit(0.5);
        let dt_part = Force::separable(Arc::new(move |x: Vec2<T>| q * half * norm(x).powf(T::one() / q)), TimeProfile::SignedPower(-half));
        dt_part.with_term(ForceTerm::Separable {
            space: Arc::new(move |x: Vec2<T>| -norm(x).powf(-T::one() - T::one() / q) / p),
            time: TimeProfile::AbsPower((p - T::one()) * half),
        })
    }

    /// `V(grad u) = |t|^(p/4) |x|^(-1/2) x/|x|`.
    pub fn v_field(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let r = norm(x);
        let c = t.abs().powf(self.p * T::lit(0.25)) * r.powf(-T::lit(1.5));
        [c * x[0], c * x[1]]
    }

    /// `S(grad u) = |t|^((p-1)/2) |x|^(-1/p') x/|x|`.
    pub fn s_field(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let r = norm(x);
        let c = t.abs().powf((self.p - T::one()) * T::lit(0.5)) * r.powf(-T::one() / self.conj() - T::one());
        [c * x[0], c * x[1]]
    }
}

/// Mean of `|t|^e` over `[a, b]`, `e > -1`.
fn mean_abs_power<T: Real>(e: T, a: T, b: T) -> T {
    let f = |t: T| {
        let v = t.abs().powf(e + T::one()) / (e + T::one());
        if t < T::zero() {
            -v
        } else {
            v
        }
    };
    (f(b) - f(a)) / (b - a)
}

impl<T: Real> ExactSolution<T> for KnownSolution<T> {
    fn value(&self, x: Vec2<T>, t: T) -> T {
        self.conj() * t.abs().sqrt() * norm(x).powf(T::one() / self.conj())
    }

    fn gradient(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let r = norm(x);
        let c = t.abs().sqrt() * r.powf(-T::one() / self.p - T::one());
        [c * x[0], c * x[1]]
    }

    fn time_breakpoints(&self) -> Vec<T> {
        vec![T::zero()]
    }

    /// Closed-form means; falls back to quadrature for other parameters.
    fn window_stats(&self, x: Vec2<T>, a: T, b: T, cuts: &[T], params: &PLaplaceParams<T>) -> WindowStats<T> {
        if params.p() != self.p || params.kappa() != T::zero() {
            return gauss_window_stats(self, x, a, b, cuts, params);
        }
        let (p, q) = (self.p, self.conj());
        let half = T::lit(0.5);
        let r = norm(x);
        let dir = [x[0] / r, x[1] / r];
        let mv = mean_abs_power(p * T::lit(0.25), a, b) * r.powf(-half);
        let ms = mean_abs_power((p - T::one()) * half, a, b) * r.powf(-T::one() / q);
        WindowStats {
            mean_value: q * r.powf(T::one() / q) * mean_abs_power(half, a, b),
            mean_v: [mv * dir[0], mv * dir[1]],
            mean_v_sq: mean_abs_power(p * half, a, b) / r,
            mean_s: [ms * dir[0], ms * dir[1]],
        }
    }
}

/// What a trajectory is compared against.
#[derive(Clone, Copy)]
pub enum ReferenceSolution<'a, T: Real> {
    Exact(&'a dyn ExactSolution<T>),
    /// Finer run on a descendant mesh with a step count that is a multiple
    /// of the compared one.
    Discrete(&'a Trajectory<T>),
}

/// Squared error quantities of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub ndof: usize,
    pub steps: usize,
    pub h: f64,
    pub tau: f64,
    /// `max_m |u_{h,m} - <u_ref>_{J_m}|^2`
    pub sq_linfty_l2: f64,
    /// Exact reference: `sum_m (tau/|J_m|) int_{J_m} |V(grad u_{h,m}) - V(grad u)|^2`.
    /// Discrete reference: `tau sum_m |V(grad u_{h,m}) - V(grad <u_ref>_{J_m})|^2`.
    pub sq_l2_v: f64,
    /// Exact reference: `tau sum_m |V(grad u_{h,m}) - <V(grad u)>_{J_m}|^2`.
    /// Discrete reference: equal to `sq_l2_v`.
    pub sq_l2_v_avg: f64,
    /// `lp_s_sum^(2/p')`
    pub sq_lp_s: f64,
    /// `tau sum_m |S(grad u_{h,m}) - S_ref,m|_{L^p'}^p'`
    pub lp_s_sum: f64,
}

#[derive(Default)]
struct Sums<T> {
    linfty: T,
    full: T,
    avg: T,
    lps: T,
}

fn finish<T: Real>(traj: &Trajectory<T>, sums: Sums<T>, params: &PLaplaceParams<T>) -> ErrorReport {
    let tau = traj.grid.tau();
    let q = params.conjugate();
    let lp_s_sum = (tau * sums.lps).to_f64_lossy();
    ErrorReport {
        ndof: traj.space.ndof(),
        steps: traj.grid.steps(),
        h: traj.space.mesh().quality().h_max.to_f64_lossy(),
        tau: tau.to_f64_lossy(),
        sq_linfty_l2: sums.linfty.to_f64_lossy(),
        sq_l2_v: (tau * sums.full).to_f64_lossy(),
        sq_l2_v_avg: (tau * sums.avg).to_f64_lossy(),
        sq_lp_s: lp_s_sum.powf(2.0 / q.to_f64_lossy()),
        lp_s_sum,
    }
}

/// All squared errors of `traj` against `reference`, spatial quadrature of
/// exactness `degree`.
pub fn compute_errors<T: Real>(
    traj: &Trajectory<T>,
    reference: ReferenceSolution<'_, T>,
    params: &PLaplaceParams<T>,
    degree: usize,
) -> Result<ErrorReport> {
    if traj.snapshots.len() != traj.grid.steps() + 1 {
        return Err(Error::InvalidParameter("trajectory is incomplete".into()));
    }
    let sums = match reference {
        ReferenceSolution::Exact(exact) => exact_sums(traj, exact, params, degree)?,
        ReferenceSolution::Discrete(r) => discrete_sums(traj, r, params, degree)?,
    };
    Ok(finish(traj, sums, params))
}

fn exact_sums<T: Real>(traj: &Trajectory<T>, exact: &dyn ExactSolution<T>, params: &PLaplaceParams<T>, degree: usize) -> Result<Sums<T>> {
    let space = &*traj.space;
    let grid = &traj.grid;
    let rule = triangle_rule::<T>(degree)?;
    let tab = space.tabulate(&rule);
    let nloc = space.n_local();
    let q = params.conjugate();
    let mut sums = Sums::<T>::default();
    let steps = grid.steps();
    let mut l2 = vec![T::zero(); steps + 1];
    // means over [t_{k-1}, t_k]; every window J_m is one or two of these
    let mut pieces = vec![WindowStats::<T>::default(); steps + 1];
    for t in 0..space.n_cells() {
        let geo = space.geometry(t);
        let dofs = space.cell_dofs(t);
        for k in 0..tab.n_points {
            let x = geo.point(tab.points[k]);
            let w = tab.weights[k] * geo.area;
            for j in 1..=steps {
                pieces[j] = exact.window_stats(x, grid.t(j - 1), grid.t(j), &[], params);
            }
            for m in 1..=steps {
                let st = if m < steps {
                    pieces[m].join(grid.t(m) - grid.t(m - 1), &pieces[m + 1], grid.t(m + 1) - grid.t(m))
                } else {
                    pieces[m]
                };
                let (uh, gh) = eval_tabulated(space, &tab, t, k, dofs, traj.snapshots[m].coeffs(), nloc);
                l2[m] += w * (uh - st.mean_value) * (uh - st.mean_value);
                let dv = sub(v_transform(gh, params), st.mean_v);
                let e_avg = dot(dv, dv);
                let spread = (st.mean_v_sq - dot(st.mean_v, st.mean_v)).max(T::zero());
                sums.avg += w * e_avg;
                sums.full += w * (e_avg + spread);
                sums.lps += w * pow(norm(sub(s_flux(gh, params), st.mean_s)), q);
            }
        }
    }
    sums.linfty = l2.into_iter().fold(T::zero(), T::max);
    Ok(sums)
}

#[inline]
fn eval_tabulated<T: Real>(
    space: &FeSpace<T>,
    tab: &crate::fespace::Tabulation<T>,
    t: usize,
    k: usize,
    dofs: &[usize],
    u: &[T],
    nloc: usize,
) -> (T, Vec2<T>) {
    let mut val = T::zero();
    let mut bary = [T::zero(); 3];
    for a in 0..nloc {
        let c = u[dofs[a]];
        val += c * tab.values[k * nloc + a];
        let g = tab.bary_gradients[k * nloc + a];
        for l in 0..3 {
            bary[l] += c * g[l];
        }
    }
    (val, space.geometry(t).physical_gradient(bary))
}

/// Checks nesting of meshes and grids; returns (mesh levels between, steps
/// of the reference per compared step).
pub fn check_hierarchy<T: Real>(traj: &Trajectory<T>, reference: &Trajectory<T>) -> Result<(usize, usize)> {
    let levels = reference
        .space
        .mesh()
        .levels_below(traj.space.mesh())
        .ok_or_else(|| Error::IncompatibleHierarchy("reference mesh does not descend from the compared mesh".into()))?;
    let (g, r) = (&traj.grid, &reference.grid);
    let span = (g.t_end() - g.t0()).abs();
    let eps = T::lit(1e-12) * span;
    if (g.t0() - r.t0()).abs() > eps || (g.t_end() - r.t_end()).abs() > eps {
        return Err(Error::IncompatibleHierarchy("time intervals differ".into()));
    }
    if r.steps() % g.steps() != 0 {
        return Err(Error::IncompatibleHierarchy(format!("{} reference steps are not a multiple of {}", r.steps(), g.steps())));
    }
    if reference.snapshots.len() != r.steps() + 1 {
        return Err(Error::InvalidParameter("reference trajectory is incomplete".into()));
    }
    Ok((levels, r.steps() / g.steps()))
}

/// Coefficients of the trapezoidal mean of the reference snapshots with
/// nodes in `J_m`.
fn reference_window_mean<T: Real>(reference: &Trajectory<T>, m: usize, steps: usize, ratio: usize) -> Vec<T> {
    let j0 = (m - 1) * ratio;
    let j1 = (m + 1).min(steps) * ratio;
    let n = reference.space.ndof();
    let mut out = vec![T::zero(); n];
    let half = T::lit(0.5);
    for j in j0..=j1 {
        let w = if j == j0 || j == j1 { half } else { T::one() };
        for (o, &c) in out.iter_mut().zip(reference.snapshots[j].coeffs()) {
            *o += w * c;
        }
    }
    let len = T::from_usize_lossy(j1 - j0);
    out.iter_mut().for_each(|v| *v /= len);
    out
}

fn discrete_sums<T: Real>(traj: &Trajectory<T>, reference: &Trajectory<T>, params: &PLaplaceParams<T>, degree: usize) -> Result<Sums<T>> {
    let (levels, ratio) = check_hierarchy(traj, reference)?;
    let fine = &*reference.space;
    let coarse = &*traj.space;
    let rule = triangle_rule::<T>(degree)?;
    let tab = fine.tabulate(&rule);
    let (nf, nc) = (fine.n_local(), coarse.n_local());
    let np = tab.n_points;
    // basis values and physical gradients of the compared space at the
    // reference quadrature points
    let mut c_vals = vec![T::zero(); fine.n_cells() * np * nc];
    let mut c_grads = vec![[T::zero(); 2]; fine.n_cells() * np * nc];
    let mut bary = vec![[T::zero(); 3]; nc];
    for tf in 0..fine.n_cells() {
        let tc = tf >> (2 * levels);
        let gf = fine.geometry(tf);
        let gc = coarse.geometry(tc);
        for k in 0..np {
            let lam = coarse.mesh().barycentric(tc, gf.point(tab.points[k]));
            let base = (tf * np + k) * nc;
            coarse.element().values(lam, &mut c_vals[base..base + nc]);
            coarse.element().bary_gradients(lam, &mut bary);
            for a in 0..nc {
                c_grads[base + a] = gc.physical_gradient(bary[a]);
            }
        }
    }
    let q = params.conjugate();
    let steps = traj.grid.steps();
    let mut sums = Sums::<T>::default();
    for m in 1..=steps {
        let mean = reference_window_mean(reference, m, steps, ratio);
        let u = traj.snapshots[m].coeffs();
        let mut l2 = T::zero();
        for tf in 0..fine.n_cells() {
            let gf = fine.geometry(tf);
            let fdofs = fine.cell_dofs(tf);
            let cdofs = coarse.cell_dofs(tf >> (2 * levels));
            for k in 0..np {
                let w = tab.weights[k] * gf.area;
                let (ur, gr) = eval_tabulated(fine, &tab, tf, k, fdofs, &mean, nf);
                let base = (tf * np + k) * nc;
                let mut uh = T::zero();
                let mut gh = [T::zero(); 2];
                for a in 0..nc {
                    let c = u[cdofs[a]];
                    uh += c * c_vals[base + a];
                    gh[0] += c * c_grads[base + a][0];
                    gh[1] += c * c_grads[base + a][1];
                }
                l2 += w * (uh - ur) * (uh - ur);
                let dv = sub(v_transform(gh, params), v_transform(gr, params));
                sums.full += w * dot(dv, dv);
                sums.lps += w * pow(norm(sub(s_flux(gh, params), s_flux(gr, params))), q);
            }
        }
        sums.linfty = sums.linfty.max(l2);
    }
    sums.avg = sums.full;
    Ok(sums)
}

/// `max_m |u_{h,m} - <u_ref>_{J_m}|^2_{L^2}`
pub fn err_linfty_l2<T: Real>(traj: &Trajectory<T>, reference: ReferenceSolution<'_, T>, params: &PLaplaceParams<T>) -> Result<f64> {
    Ok(compute_errors(traj, reference, params, ERROR_QUADRATURE_DEGREE)?.sq_linfty_l2)
}

/// `(sq_l2_v, sq_l2_v_avg)`, see [`ErrorReport`].
pub fn err_l2_v<T: Real>(traj: &Trajectory<T>, reference: ReferenceSolution<'_, T>, params: &PLaplaceParams<T>) -> Result<(f64, f64)> {
    let r = compute_errors(traj, reference, params, ERROR_QUADRATURE_DEGREE)?;
    Ok((r.sq_l2_v, r.sq_l2_v_avg))
}

/// `(tau sum_m |S(grad u_{h,m}) - S_ref,m|^p')^(2/p')`; the reference flux is
/// `S(grad <u_ref>_{J_m})` for discrete and `<S(grad u)>_{J_m}` for exact
/// references.
pub fn err_lp_s<T: Real>(traj: &Trajectory<T>, reference: ReferenceSolution<'_, T>, params: &PLaplaceParams<T>) -> Result<f64> {
    Ok(compute_errors(traj, reference, params, ERROR_QUADRATURE_DEGREE)?.sq_lp_s)
}

/// Column selector for orders and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorField {
    SqVerr,
    SqVerr1,
    SqLinftyError,
    /// Unpowered `L^p'` sum as stored in the CSV.
    SqAerr,
    /// `SqAerr^(2/p')`
    SqLpS,
}

impl ErrorField {
    pub fn name(self) -> &'static str {
        match self {
            ErrorField::SqVerr => "sqVerr",
            ErrorField::SqVerr1 => "sqVerr1",
            ErrorField::SqLinftyError => "sqLinftyError",
            ErrorField::SqAerr => "sqAerr",
            ErrorField::SqLpS => "sqLpS",
        }
    }

    pub fn get(self, r: &ErrorReport) -> f64 {
        match self {
            ErrorField::SqVerr => r.sq_l2_v,
            ErrorField::SqVerr1 => r.sq_l2_v_avg,
            ErrorField::SqLinftyError => r.sq_linfty_l2,
            ErrorField::SqAerr => r.lp_s_sum,
            ErrorField::SqLpS => r.sq_lp_s,
        }
    }
}

impl FromStr for ErrorField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [ErrorField::SqVerr, ErrorField::SqVerr1, ErrorField::SqLinftyError, ErrorField::SqAerr, ErrorField::SqLpS]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown error field '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Abscissa {
    H,
    Tau,
    Ndof,
}

impl Abscissa {
    pub fn get(self, r: &ErrorReport) -> f64 {
        match self {
            Abscissa::H => r.h,
            Abscissa::Tau => r.tau,
            Abscissa::Ndof => r.ndof as f64,
        }
    }
}

impl FromStr for Abscissa {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Abscissa::H),
            "tau" => Ok(Abscissa::Tau),
            "ndof" => Ok(Abscissa::Ndof),
            _ => Err(Error::Config(format!("unknown abscissa '{s}'"))),
        }
    }
}

/// Log-log slopes between consecutive levels and of a global fit.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderReport {
    pub slopes: Vec<f64>,
    pub least_squares: f64,
}

/// Orders of `(abscissa, error)` pairs; abscissae must be strictly monotone
/// and errors positive.
pub fn fit_orders(points: &[(f64, f64)]) -> Result<OrderReport> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("at least two levels are needed"));
    }
    let increasing = points.windows(2).all(|w| w[1].0 > w[0].0);
    let decreasing = points.windows(2).all(|w| w[1].0 < w[0].0);
    if !(increasing || decreasing) || points.iter().any(|p| !(p.0 > 0.0)) {
        return Err(Error::InvalidParameter("abscissae must be positive and strictly monotone".into()));
    }
    if points.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::InvalidParameter("errors must be positive and finite".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let slopes = logs.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    Ok(OrderReport { slopes, least_squares: least_squares(&logs).0 })
}

pub fn empirical_order(reports: &[ErrorReport], field: ErrorField, against: Abscissa) -> Result<OrderReport> {
    let pts: Vec<(f64, f64)> = reports.iter().map(|r| (against.get(r), field.get(r))).collect();
    fit_orders(&pts)
}

pub const CSV_HEADER: &str = "ndof,M,h,tau,sqVerr,sqVerr1,sqLinftyError,sqAerr";

fn csv_record(r: &ErrorReport) -> [String; 8] {
    let e = |v: f64| format!("{v:.16e}");
    [r.ndof.to_string(), r.steps.to_string(), e(r.h), e(r.tau), e(r.sq_l2_v), e(r.sq_l2_v_avg), e(r.sq_linfty_l2), e(r.lp_s_sum)]
}

/// CSV with [`CSV_HEADER`]; floats carry 17 significant digits.
pub fn write_csv<W: Write>(reports: &[ErrorReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for r in reports {
        out.write_record(csv_record(r)).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("CSV: {e}"))
}

/// Whitespace separated copy with a `#` header, for gnuplot.
pub fn write_dat<W: Write>(reports: &[ErrorReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# {}", CSV_HEADER.replace(',', " "))?;
    for r in reports {
        writeln!(w, "{}", csv_record(r).join(" "))?;
    }
    Ok(())
}

/// Parses rows written by [`write_csv`]. `sq_lp_s` is only known when `p`
/// is given; otherwise it is NaN.
pub fn read_csv<R: Read>(r: R, p: Option<f64>) -> Result<Vec<ErrorReport>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header '{}'", header.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let bad = |k: usize| Error::Config(format!("CSV row {}: bad value '{}'", i + 2, &rec[k]));
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(k));
        let u = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(k));
        let lp_s_sum = f(7)?;
        out.push(ErrorReport {
            ndof: u(0)?,
            steps: u(1)?,
            h: f(2)?,
            tau: f(3)?,
            sq_l2_v: f(4)?,
            sq_l2_v_avg: f(5)?,
            sq_linfty_l2: f(6)?,
            sq_lp_s: p.map_or(f64::NAN, |p| lp_s_sum.powf(2.0 * (p - 1.0) / p)),
            lp_s_sum,
        });
    }
    Ok(out)
}

/// `sum_m |J_m|` for a grid: `2 (t_end - t0) - tau`.
pub fn total_window_length<T: Real>(grid: &TimeGrid<T>) -> T {
    (1..=grid.steps()).map(|m| grid.window_length(m)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::nodal_interpolate;
    use crate::mesh::{Domain, Mesh};
    use crate::quadrature::integrate_interval;
    use crate::timestepper::{solve_evolution, NewtonReport, ProblemSpec};
    use crate::FeFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trajectory(space: &Arc<FeSpace<f64>>, grid: TimeGrid<f64>, snap: impl Fn(usize) -> FeFunction<f64>) -> Trajectory<f64> {
        Trajectory {
            space: Arc::clone(space),
            grid,
            snapshots: (0..=grid.steps()).map(snap).collect(),
            reports: vec![NewtonReport::default(); grid.steps()],
        }
    }

    fn constant_in_time(g: impl Fn(Vec2<f64>) -> f64 + Send + Sync + 'static, dg: Vec2<f64>) -> ClosedForm<f64> {
        ClosedForm { value: Arc::new(move |x, _| g(x)), gradient: Arc::new(move |_, _| dg), breakpoints: Vec::new() }
    }

    fn sine_solution() -> ClosedForm<f64> {
        use std::f64::consts::PI;
        ClosedForm {
            value: Arc::new(|x: Vec2<f64>, t: f64| (PI * x[0]).sin() * (PI * x[1]).sin() * (-t).exp()),
            gradient: Arc::new(|x: Vec2<f64>, t: f64| {
                let e = PI * (-t).exp();
                [e * (PI * x[0]).cos() * (PI * x[1]).sin(), e * (PI * x[0]).sin() * (PI * x[1]).cos()]
            }),
            breakpoints: Vec::new(),
        }
    }

    #[test]
    fn known_solution_satisfies_the_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &p in &[1.5, 3.0] {
            let sol = KnownSolution::new(p).unwrap();
            let params = PLaplaceParams::new(p, 0.0).unwrap();
            let force = sol.force();
            for _ in 0..100 {
                let r = rng.gen_range(0.2..2.5);
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                let x = [r * phi.cos(), r * phi.sin()];
                let t = rng.gen_range(0.05..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let h = 1e-5;
                // gradient and fluxes against finite differences / constitutive maps
                let g = sol.gradient(x, t);
                let fd = [
                    (sol.value([x[0] + h, x[1]], t) - sol.value([x[0] - h, x[1]], t)) / (2.0 * h),
                    (sol.value([x[0], x[1] + h], t) - sol.value([x[0], x[1] - h], t)) / (2.0 * h),
                ];
                assert!(norm(sub(g, fd)) < 1e-7 * (1.0 + norm(g)));
                assert!(norm(sub(sol.v_field(x, t), v_transform(g, &params))) < 1e-12 * (1.0 + norm(g)));
                assert!(norm(sub(sol.s_field(x, t), s_flux(g, &params))) < 1e-12 * (1.0 + norm(g)));
                // f = u_t - div S(grad u), divergence by central differences
                let s = |y: Vec2<f64>| s_flux(sol.gradient(y, t), &params);
                let div = (s([x[0] + h, x[1]])[0] - s([x[0] - h, x[1]])[0] + s([x[0], x[1] + h])[1] - s([x[0], x[1] - h])[1]) / (2.0 * h);
                let ut = (sol.value(x, t + h) - sol.value(x, t - h)) / (2.0 * h);
                let f = force.eval(x, t);
                assert!((f - (ut - div)).abs() < 1e-6 * (1.0 + f.abs()), "p={p} x={x:?} t={t}: {f} vs {}", ut - div);
            }
        }
    }

    /// Composite Gauss graded towards t = 0.
    fn graded_mean(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
        let mut breaks = vec![0.0];
        for k in 1..80 {
            let d = 0.5f64.powi(k);
            breaks.push(d);
            breaks.push(-d);
        }
        split_at(a, b, &breaks).into_iter().map(|(s0, s1)| integrate_interval(s0, s1, 12, &g)).sum::<f64>() / (b - a)
    }

    #[test]
    fn analytic_window_means() {
        for &p in &[1.5, 3.0] {
            let sol = KnownSolution::new(p).unwrap();
            let params = PLaplaceParams::new(p, 0.0).unwrap();
            let x = [1.7, -0.4];
            for &(a, b) in &[(-0.25, 0.25), (0.0, 0.125), (-0.5, 0.0), (0.25, 0.5), (-1.0, -0.75), (-0.0625, 0.1875)] {
                let st = sol.window_stats(x, a, b, &[], &params);
                let rel = |u: f64, v: f64| (u - v).abs() / v.abs().max(1e-300);
                assert!(rel(st.mean_value, graded_mean(a, b, |t| sol.value(x, t))) < 1e-12);
                assert!(rel(st.mean_v_sq, graded_mean(a, b, |t| dot(sol.v_field(x, t), sol.v_field(x, t)))) < 1e-12);
                for i in 0..2 {
                    assert!(rel(st.mean_v[i], graded_mean(a, b, |t| sol.v_field(x, t)[i])) < 1e-12);
                    assert!(rel(st.mean_s[i], graded_mean(a, b, |t| sol.s_field(x, t)[i])) < 1e-12);
                }
            }
            // shifted parameters fall back to quadrature of the same fields
            let other = PLaplaceParams::new(p, 0.5).unwrap();
            let st = sol.window_stats(x, 0.25, 0.5, &[], &other);
            let g = gauss_window_stats(&sol, x, 0.25, 0.5, &[], &other);
            assert_eq!(st, g);
        }
    }

    #[test]
    fn constant_fields_have_closed_form_errors() {
        let space = FeSpace::new(Mesh::at_level(Domain::UnitSquare, 0), 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let (pg, qg) = ([0.7, -1.3], [0.2, 0.5]);
        let uh = nodal_interpolate(&space, move |x| pg[0] * x[0] + pg[1] * x[1]).unwrap();
        let traj = trajectory(&space, grid, |_| uh.clone());
        let exact = constant_in_time(move |x| qg[0] * x[0] + qg[1] * x[1], qg);
        for &p in &[1.5, 2.0, 3.0] {
            let params = PLaplaceParams::new(p, 0.0).unwrap();
            let r = compute_errors(&traj, ReferenceSolution::Exact(&exact), &params, ERROR_QUADRATURE_DEGREE).unwrap();
            let q = params.conjugate();
            let ds = norm(sub(s_flux(pg, &params), s_flux(qg, &params))).powf(q);
            assert!((r.lp_s_sum - ds).abs() < 1e-13 * ds);
            assert!((r.sq_lp_s - ds.powf(2.0 / q)).abs() < 1e-12 * ds.powf(2.0 / q));
            let dv = norm(sub(v_transform(pg, &params), v_transform(qg, &params))).powi(2);
            assert!((r.sq_l2_v_avg - dv).abs() < 1e-13 * dv);
            assert!((r.sq_l2_v - dv).abs() < 1e-13 * dv);
            let (a, b) = (pg[0] - qg[0], pg[1] - qg[1]);
            let l2 = a * a / 3.0 + b * b / 3.0 + a * b / 2.0;
            assert!((r.sq_linfty_l2 - l2).abs() < 1e-14);
            assert_eq!((r.ndof, r.steps), (4, 4));
        }
        // u_h = 1 against 0 on the unit square
        let one = nodal_interpolate(&space, |_| 1.0).unwrap();
        let traj = trajectory(&space, grid, |_| one.clone());
        let zero = constant_in_time(|_| 0.0, [0.0, 0.0]);
        let params = PLaplaceParams::new(1.5, 0.0).unwrap();
        assert!((err_linfty_l2(&traj, ReferenceSolution::Exact(&zero), &params).unwrap() - 1.0).abs() < 1e-14);
        let same = constant_in_time(|_| 1.0, [0.0, 0.0]);
        let r = compute_errors(&traj, ReferenceSolution::Exact(&same), &params, 8).unwrap();
        assert!(r.sq_linfty_l2 < 1e-30);
        assert_eq!((r.sq_l2_v, r.sq_l2_v_avg, r.lp_s_sum), (0.0, 0.0, 0.0));
    }

    #[test]
    fn p2_errors_match_gradient_seminorm() {
        let space = FeSpace::new(Mesh::at_level(Domain::UnitSquare, 2), 1).unwrap();
        let grid = TimeGrid::new(0.0, 0.5, 5).unwrap();
        let sol = sine_solution();
        let traj = trajectory(&space, grid, |m| nodal_interpolate(&space, |x| 1.1 * sol.value(x, grid.t(m))).unwrap());
        let params = PLaplaceParams::new(2.0, 0.0).unwrap();
        let r = compute_errors(&traj, ReferenceSolution::Exact(&sol), &params, ERROR_QUADRATURE_DEGREE).unwrap();
        // independent: mean gradient from the exact time mean of exp(-t),
        // gradients via point evaluation
        let rule = triangle_rule::<f64>(ERROR_QUADRATURE_DEGREE).unwrap();
        let mut seminorm = 0.0;
        for m in 1..=grid.steps() {
            let (a, b) = grid.window(m);
            let et = ((-a).exp() - (-b).exp()) / (b - a);
            for t in 0..space.n_cells() {
                let geo = space.geometry(t);
                for (lam, w) in rule.points.iter().zip(&rule.weights) {
                    let x = geo.point(*lam);
                    let g = sol.gradient(x, 0.0);
                    let gh = traj.snapshots[m].eval_gradient(t, *lam);
                    let d = [gh[0] - et * g[0], gh[1] - et * g[1]];
                    seminorm += w * geo.area * dot(d, d);
                }
            }
        }
        seminorm *= grid.tau();
        assert!((r.sq_l2_v_avg - seminorm).abs() < 1e-10 * seminorm, "{} vs {seminorm}", r.sq_l2_v_avg);
        assert!((r.sq_lp_s - r.sq_l2_v_avg).abs() < 1e-10 * seminorm);
        assert!(r.sq_l2_v >= r.sq_l2_v_avg);
    }

    #[test]
    fn decomposition_of_the_full_error() {
        let p = 1.5;
        let sol = KnownSolution::new(p).unwrap();
        let params = PLaplaceParams::new(p, 0.0).unwrap();
        let space = FeSpace::new(Mesh::at_level(Domain::ShiftedSquare, 1), 1).unwrap();
        let grid = TimeGrid::new(-1.0, 1.0, 6).unwrap();
        let traj = trajectory(&space, grid, |m| nodal_interpolate(&space, |x| sol.value(x, grid.t(m))).unwrap());
        let r = compute_errors(&traj, ReferenceSolution::Exact(&sol), &params, ERROR_QUADRATURE_DEGREE).unwrap();
        // sum_m (tau/|J_m|) int_{J_m} |V(grad u) - <V(grad u)>_{J_m}|^2, directly
        let rule = triangle_rule::<f64>(ERROR_QUADRATURE_DEGREE).unwrap();
        let mut spread = 0.0;
        for m in 1..=grid.steps() {
            let (a, b) = grid.window(m);
            for t in 0..space.n_cells() {
                let geo = space.geometry(t);
                for (lam, w) in rule.points.iter().zip(&rule.weights) {
                    let x = geo.point(*lam);
                    let mean = [graded_mean(a, b, |s| sol.v_field(x, s)[0]), graded_mean(a, b, |s| sol.v_field(x, s)[1])];
                    let var = graded_mean(a, b, |s| {
                        let d = sub(sol.v_field(x, s), mean);
                        dot(d, d)
                    });
                    spread += w * geo.area * grid.tau() * var;
                }
            }
        }
        let diff = r.sq_l2_v - r.sq_l2_v_avg;
        assert!((diff - spread).abs() < 1e-8 * spread, "{diff} vs {spread}");
    }

    #[test]
    fn self_comparison_and_nested_references() {
        // window means of a run constant in time are the snapshots themselves
        let spec = ProblemSpec::new(PLaplaceParams::new(1.5, 0.0).unwrap(), Domain::UnitSquare, crate::timestepper::Force::constant(1.0));
        let grid = TimeGrid::new(0.0, 0.2, 4).unwrap();
        let run = solve_evolution(&spec, 2, 1, &grid, 1e-10).unwrap();
        let frozen = trajectory(&run.space, grid, |_| run.snapshots[2].clone());
        let r = compute_errors(&frozen, ReferenceSolution::Discrete(&frozen), &spec.params, 8).unwrap();
        assert!(r.sq_linfty_l2 < 1e-30 && r.sq_l2_v < 1e-28 && r.lp_s_sum < 1e-20, "{r:?}");
        // an evolving run differs from its own window means
        let r = compute_errors(&run, ReferenceSolution::Discrete(&run), &spec.params, 8).unwrap();
        assert!(r.sq_l2_v > 0.0);

        // a P1 function on level 1 is reproduced exactly by P2 on level 3
        let coarse_mesh = Mesh::at_level(Domain::Slit, 1);
        let fine_mesh = coarse_mesh.refine().refine();
        let coarse = FeSpace::new(Arc::clone(&coarse_mesh), 1).unwrap();
        let fine = FeSpace::new(Arc::clone(&fine_mesh), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let uc = FeFunction::from_coeffs(&coarse, (0..coarse.ndof()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let coarse_grid = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let fine_grid = TimeGrid::new(0.0, 1.0, 6).unwrap();
        let traj_c = trajectory(&coarse, coarse_grid, |_| uc.clone());
        // fine interpolant: evaluate the coarse function through the hierarchy,
        // picking the slit side from the fine node's triangle
        let mut coeffs = vec![0.0; fine.ndof()];
        for t in 0..fine.n_cells() {
            let tc = t >> 4;
            for &i in fine.cell_dofs(t) {
                let x = fine.dof_coords()[i];
                coeffs[i] = uc.eval(tc, coarse_mesh.barycentric(tc, x));
            }
        }
        let uf = FeFunction::from_coeffs(&fine, coeffs).unwrap();
        let traj_f = trajectory(&fine, fine_grid, |_| uf.clone());
        let params = PLaplaceParams::new(3.0, 0.0).unwrap();
        let r = compute_errors(&traj_c, ReferenceSolution::Discrete(&traj_f), &params, 8).unwrap();
        assert!(r.sq_linfty_l2 < 1e-28 && r.sq_l2_v < 1e-24 && r.lp_s_sum < 1e-20, "{r:?}");
        assert_eq!(r.sq_l2_v, r.sq_l2_v_avg);

        // hierarchy violations
        let unrelated = FeSpace::new(Mesh::at_level(Domain::Slit, 3), 2).unwrap();
        let traj_u = trajectory(&unrelated, fine_grid, |_| FeFunction::zero(&unrelated));
        assert!(matches!(compute_errors(&traj_c, ReferenceSolution::Discrete(&traj_u), &params, 8), Err(Error::IncompatibleHierarchy(_))));
        let odd_grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let traj_odd = trajectory(&fine, odd_grid, |_| uf.clone());
        assert!(matches!(
            compute_errors(&traj_c, ReferenceSolution::Discrete(&traj_odd), &params, 8),
            Err(Error::IncompatibleHierarchy(_))
        ));
        // coarser "reference" is not a descendant
        assert!(matches!(compute_errors(&traj_f, ReferenceSolution::Discrete(&traj_c), &params, 8), Err(Error::IncompatibleHierarchy(_))));
    }

    #[test]
    fn trapezoid_window_mean() {
        let space = FeSpace::new(Mesh::at_level(Domain::UnitSquare, 0), 1).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let traj = trajectory(&space, grid, |j| FeFunction::from_coeffs(&space, vec![(j * j) as f64; 4]).unwrap());
        // steps 2 per compared step; window of m = 2 covers nodes 2..=6
        let mean = reference_window_mean(&traj, 2, 4, 2);
        let expect = (0.5 * 4.0 + 9.0 + 16.0 + 25.0 + 0.5 * 36.0) / 4.0;
        assert!((mean[0] - expect).abs() < 1e-14);
        // last window is cut off: nodes 6..=8
        let mean = reference_window_mean(&traj, 4, 4, 2);
        assert!((mean[0] - (0.5 * 36.0 + 49.0 + 0.5 * 64.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn window_lengths_sum() {
        for &(t0, t1, m) in &[(0.0, 1.0, 4), (-0.1, 0.1, 16), (-1.0, 1.0, 7)] {
            let g = TimeGrid::<f64>::new(t0, t1, m).unwrap();
            let expect = 2.0 * (t1 - t0) - 2.0 * g.tau() + g.tau();
            assert!((total_window_length(&g) - expect).abs() < 1e-14);
        }
    }

    fn report(ndof: usize, h: f64, v: f64) -> ErrorReport {
        ErrorReport { ndof, steps: 4, h, tau: h, sq_linfty_l2: v, sq_l2_v: v, sq_l2_v_avg: v, sq_lp_s: v, lp_s_sum: v }
    }

    #[test]
    fn orders() {
        let r = [report(10, 0.1, 1e-2), report(40, 0.05, 2.5e-3)];
        let o = empirical_order(&r, ErrorField::SqVerr, Abscissa::H).unwrap();
        assert!((o.slopes[0] - 2.0).abs() < 1e-12 && (o.least_squares - 2.0).abs() < 1e-12);
        let o = empirical_order(&r, ErrorField::SqVerr, Abscissa::Ndof).unwrap();
        assert!((o.least_squares + 1.0).abs() < 1e-12);
        let flat = [report(10, 0.1, 0.3), report(40, 0.05, 0.3), report(160, 0.025, 0.3)];
        assert_eq!(empirical_order(&flat, ErrorField::SqAerr, Abscissa::H).unwrap().least_squares, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<ErrorReport> = (0..6)
            .map(|k| {
                let h = 0.5f64.powi(k);
                report(4usize.pow(k as u32), h, h * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let ls = empirical_order(&noisy, ErrorField::SqLinftyError, Abscissa::H).unwrap().least_squares;
        assert!((0.95..=1.05).contains(&ls));
        assert!(matches!(empirical_order(&r[..1], ErrorField::SqVerr, Abscissa::H), Err(Error::InsufficientData(_))));
        assert!(empirical_order(&[report(10, 0.1, 0.0), report(40, 0.05, 1.0)], ErrorField::SqVerr, Abscissa::H).is_err());
        assert_eq!("sqVerr1".parse::<ErrorField>().unwrap(), ErrorField::SqVerr1);
        assert!("bogus".parse::<ErrorField>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            ErrorReport {
                ndof: 12,
                steps: 4,
                h: 0.1 + 0.2,
                tau: 1.0 / 3.0,
                sq_linfty_l2: 1e-300,
                sq_l2_v: 2.0f64.sqrt(),
                sq_l2_v_avg: 0.0,
                sq_lp_s: 0.5f64.powf(4.0 / 3.0),
                lp_s_sum: 0.5,
            },
            report(82689, 1.0 / 1024.0, std::f64::consts::PI),
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("ndof,M,h,tau,sqVerr,sqVerr1,sqLinftyError,sqAerr\n"));
        let back = read_csv(buf.as_slice(), Some(3.0)).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!((a.ndof, a.steps, a.h, a.tau), (b.ndof, b.steps, b.h, b.tau));
            assert_eq!((a.sq_l2_v, a.sq_l2_v_avg, a.sq_linfty_l2, a.lp_s_sum), (b.sq_l2_v, b.sq_l2_v_avg, b.sq_linfty_l2, b.lp_s_sum));
        }
        assert!((back[0].sq_lp_s - rows[0].sq_lp_s).abs() < 1e-15);
        assert!(read_csv(buf.as_slice(), None).unwrap()[0].sq_lp_s.is_nan());
        assert!(read_csv("a,b\n1,2\n".as_bytes(), None).is_err());
        let mut dat = Vec::new();
        write_dat(&rows, &mut dat).unwrap();
        assert!(String::from_utf8(dat).unwrap().starts_with("# ndof M h tau"));
    }
}

//! Mass, stiffness and load assembly, and the per-step nonlinear system of
//! the implicit Euler scheme.

use std::sync::Arc;

use crate::constitutive::{ds_jacobian, s_flux, PLaplaceParams};
use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSpace, Tabulation};
use crate::quadrature::{triangle_rule, QuadratureRule};
use crate::scalar::{dot, mat_vec, norm, Real, Vec2};

pub use crate::linalg::{
    conjugate_gradient, solve_direct, solve_spd, LinearSolveReport, SolveMethod, SparseMatrix, SparsityPattern, DEFAULT_CG_TOL,
};

/// Values of a scalar field at the points of a quadrature rule on every cell
/// (`values[t * n_points + q]`).
#[derive(Clone, Debug)]
pub struct QuadratureField<T> {
    pub rule: QuadratureRule<T>,
    pub values: Vec<T>,
}

impl<T: Real> QuadratureField<T> {
    pub fn from_fn(space: &FeSpace<T>, degree: usize, mut f: impl FnMut(usize, Vec2<T>) -> T) -> Result<Self> {
        let rule = triangle_rule(degree)?;
        let mut values = Vec::with_capacity(space.n_cells() * rule.len());
        for t in 0..space.n_cells() {
            let geo = space.geometry(t);
            for &lam in &rule.points {
                values.push(f(t, geo.point(lam)));
            }
        }
        Ok(Self { rule, values })
    }

    pub fn constant(space: &FeSpace<T>, value: T) -> Self {
        let rule = triangle_rule(1).expect("centroid rule");
        Self { rule, values: vec![value; space.n_cells()] }
    }
}

/// Quadrature exactness used for the nonlinear terms: `2r + 2`.
pub fn default_degree(r: usize) -> usize {
    2 * r + 2
}

/// `M_ij = int phi_i phi_j`, exact (degree `2r` rule).
pub fn assemble_mass<T: Real>(space: &FeSpace<T>) -> SparseMatrix<T> {
    let rule = triangle_rule(2 * space.degree()).expect("supported degree");
    let tab = space.tabulate(&rule);
    let nloc = space.n_local();
    let mut m = SparseMatrix::zeros(space.pattern(), true);
    let mut local = vec![T::zero(); nloc * nloc];
    for t in 0..space.n_cells() {
        local.iter_mut().for_each(|v| *v = T::zero());
        let area = space.geometry(t).area;
        for q in 0..tab.n_points {
            let w = tab.weights[q] * area;
            let phi = &tab.values[q * nloc..(q + 1) * nloc];
            for a in 0..nloc {
                for b in a..nloc {
                    local[a * nloc + b] += w * phi[a] * phi[b];
                }
            }
        }
        symmetrize_upper(&mut local, nloc);
        m.add_cell(t, &local);
    }
    m
}

/// Laplace stiffness `A_ij = int grad phi_i . grad phi_j`, exact.
pub fn assemble_laplace<T: Real>(space: &FeSpace<T>) -> SparseMatrix<T> {
    let rule = triangle_rule((2 * space.degree() - 2).max(1)).expect("supported degree");
    let tab = space.tabulate(&rule);
    let nloc = space.n_local();
    let mut m = SparseMatrix::zeros(space.pattern(), true);
    let mut local = vec![T::zero(); nloc * nloc];
    let mut grads = vec![[T::zero(); 2]; nloc];
    for t in 0..space.n_cells() {
        local.iter_mut().for_each(|v| *v = T::zero());
        let geo = space.geometry(t);
        for q in 0..tab.n_points {
            let w = tab.weights[q] * geo.area;
            for a in 0..nloc {
                grads[a] = geo.physical_gradient(tab.bary_gradients[q * nloc + a]);
            }
            for a in 0..nloc {
                for b in a..nloc {
                    local[a * nloc + b] += w * dot(grads[a], grads[b]);
                }
            }
        }
        symmetrize_upper(&mut local, nloc);
        m.add_cell(t, &local);
    }
    m
}

fn symmetrize_upper<T: Real>(local: &mut [T], n: usize) {
    for a in 0..n {
        for b in 0..a {
            local[a * n + b] = local[b * n + a];
        }
    }
}

/// `b_i = int f phi_i` for a field sampled on quadrature points.
pub fn assemble_load<T: Real>(space: &FeSpace<T>, field: &QuadratureField<T>) -> Vec<T> {
    let tab = space.tabulate(&field.rule);
    let nloc = space.n_local();
    let nq = tab.n_points;
    let mut b = vec![T::zero(); space.ndof()];
    for t in 0..space.n_cells() {
        let area = space.geometry(t).area;
        let dofs = space.cell_dofs(t);
        for q in 0..nq {
            let fw = field.values[t * nq + q] * tab.weights[q] * area;
            for a in 0..nloc {
                b[dofs[a]] += fw * tab.values[q * nloc + a];
            }
        }
    }
    b
}

/// Physical basis gradients at every point of a tabulation for one cell.
fn cell_gradients<T: Real>(space: &FeSpace<T>, tab: &Tabulation<T>, t: usize, out: &mut [Vec2<T>]) {
    let geo = space.geometry(t);
    for (o, &d) in out.iter_mut().zip(&tab.bary_gradients) {
        *o = geo.physical_gradient(d);
    }
}

/// Rule for the gradient-only terms. For `r = 1` gradients are constant per
/// cell, so the centroid rule integrates them exactly.
fn flux_rule<T: Real>(space: &FeSpace<T>) -> QuadratureRule<T> {
    let degree = if space.degree() == 1 { 1 } else { default_degree(space.degree()) };
    triangle_rule(degree).expect("supported degree")
}

/// One implicit Euler step: minimise
/// `E(v) = |v - u_prev|^2_{L2} / (2 tau) + int phi(|grad v|) - int f_m v`
/// over coefficient vectors matching `boundary_values` on the Dirichlet DOFs.
pub struct StepProblem<T: Real> {
    space: Arc<FeSpace<T>>,
    u_prev: Vec<T>,
    tau: T,
    load: Vec<T>,
    params: PLaplaceParams<T>,
    boundary_values: Vec<T>,
    eps_reg: T,
    flux_tab: Tabulation<T>,
}

impl<T: Real> StepProblem<T> {
    /// `load` is the assembled vector `int f_m phi_i`; `boundary_values` has
    /// length `ndof` and is read on boundary DOFs only.
    pub fn new(
        u_prev: &FeFunction<T>,
        tau: T,
        load: Vec<T>,
        params: PLaplaceParams<T>,
        boundary_values: Vec<T>,
        eps_reg: T,
    ) -> Result<Self> {
        let space = Arc::clone(u_prev.space());
        if load.len() != space.ndof() || boundary_values.len() != space.ndof() {
            return Err(Error::SpaceMismatch);
        }
        if !(tau > T::zero()) {
            return Err(Error::InvalidParameter(format!("time step {tau} must be positive")));
        }
        let flux_tab = space.tabulate(&flux_rule(&space));
        Ok(Self { u_prev: u_prev.coeffs().to_vec(), space, tau, load, params, boundary_values, eps_reg, flux_tab })
    }

    pub fn space(&self) -> &Arc<FeSpace<T>> {
        &self.space
    }
    pub fn tau(&self) -> T {
        self.tau
    }
    pub fn params(&self) -> &PLaplaceParams<T> {
        &self.params
    }
    pub fn boundary_values(&self) -> &[T] {
        &self.boundary_values
    }
    pub fn u_prev(&self) -> &[T] {
        &self.u_prev
    }

    /// Copies the prescribed boundary values into `u`.
    pub fn impose_boundary(&self, u: &mut [T]) {
        for (i, ui) in u.iter_mut().enumerate() {
            if self.space.is_boundary_dof(i) {
                *ui = self.boundary_values[i];
            }
        }
    }

    /// Data side of the step equation, `b + M u_prev / tau`, on free DOFs.
    pub fn rhs(&self) -> Vec<T> {
        let mut r = self.space.mass_matrix().apply(&self.u_prev);
        let inv_tau = T::one() / self.tau;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = if self.space.is_boundary_dof(i) { T::zero() } else { *ri * inv_tau + self.load[i] };
        }
        r
    }

    pub fn rhs_norm(&self) -> T {
        euclid(&self.rhs())
    }

    /// Gradient of the step energy on free DOFs; Dirichlet rows hold `u_i - g_i`.
    pub fn residual(&self, u: &[T]) -> Vec<T> {
        let space = &*self.space;
        let diff: Vec<T> = u.iter().zip(&self.u_prev).map(|(&a, &b)| a - b).collect();
        let mut r = space.mass_matrix().apply(&diff);
        let inv_tau = T::one() / self.tau;
        for (ri, &bi) in r.iter_mut().zip(&self.load) {
            *ri = *ri * inv_tau - bi;
        }
        let nloc = space.n_local();
        let tab = &self.flux_tab;
        let mut grads = vec![[T::zero(); 2]; tab.n_points * nloc];
        for t in 0..space.n_cells() {
            let dofs = space.cell_dofs(t);
            cell_gradients(space, tab, t, &mut grads);
            let area = space.geometry(t).area;
            for q in 0..tab.n_points {
                let g = &grads[q * nloc..(q + 1) * nloc];
                let grad_u = gradient_at(u, dofs, g);
                let s = s_flux(grad_u, &self.params);
                let w = tab.weights[q] * area;
                for a in 0..nloc {
                    r[dofs[a]] += w * dot(s, g[a]);
                }
            }
        }
        for (i, ri) in r.iter_mut().enumerate() {
            if space.is_boundary_dof(i) {
                *ri = u[i] - self.boundary_values[i];
            }
        }
        r
    }

    /// `M / tau + K(u)` with `K_ij = int grad phi_i . DS(grad u) grad phi_j`,
    /// Dirichlet rows and columns pinned.
    pub fn jacobian(&self, u: &[T]) -> Result<SparseMatrix<T>> {
        self.operator(u, None, |xi| ds_jacobian(xi, &self.params, self.eps_reg))
    }

    /// Lagged-coefficient operator of the Kacanov iteration:
    /// `M / tau + int (kappa + |grad u|)^(p-2) grad phi_i . grad phi_j`.
    /// with Dirichlet DOFs eliminated into the right-hand side, so `A(u) u - b`
    /// is the residual on free DOFs.
    pub fn kacanov_system(&self, u: &[T]) -> Result<(SparseMatrix<T>, Vec<T>)> {
        let mut b = self.rhs();
        let a = self.operator(u, Some(&mut b), |xi| {
            let c = self.params.flux_coefficient(norm(xi).max(self.eps_reg));
            if !c.is_finite() {
                return Err(Error::SingularJacobian);
            }
            Ok([[c, T::zero()], [T::zero(), c]])
        })?;
        Ok((a, b))
    }

    fn operator(&self, u: &[T], rhs: Option<&mut [T]>, coefficient: impl Fn(Vec2<T>) -> Result<[[T; 2]; 2]>) -> Result<SparseMatrix<T>> {
        let space = &*self.space;
        let nloc = space.n_local();
        let tab = &self.flux_tab;
        let mut k = SparseMatrix::zeros(space.pattern(), true);
        let mut local = vec![T::zero(); nloc * nloc];
        let mut grads = vec![[T::zero(); 2]; tab.n_points * nloc];
        for t in 0..space.n_cells() {
            local.iter_mut().for_each(|v| *v = T::zero());
            let dofs = space.cell_dofs(t);
            cell_gradients(space, tab, t, &mut grads);
            let area = space.geometry(t).area;
            for q in 0..tab.n_points {
                let g = &grads[q * nloc..(q + 1) * nloc];
                let d = coefficient(gradient_at(u, dofs, g))?;
                let w = tab.weights[q] * area;
                for b in 0..nloc {
                    let dg = mat_vec(&d, g[b]);
                    for a in 0..=b {
                        local[a * nloc + b] += w * dot(g[a], dg);
                    }
                }
            }
            symmetrize_upper(&mut local, nloc);
            k.add_cell(t, &local);
        }
        k.add_scaled(T::one() / self.tau, space.mass_matrix());
        k.pin_dofs(space.boundary_mask(), rhs.map(|b| (b, &self.boundary_values[..])));
        Ok(k)
    }

    /// Step energy `E_m(u)`.
    pub fn energy(&self, u: &[T]) -> T {
        let space = &*self.space;
        let diff: Vec<T> = u.iter().zip(&self.u_prev).map(|(&a, &b)| a - b).collect();
        let mdiff = space.mass_matrix().apply(&diff);
        let kinetic = dot_slice(&diff, &mdiff) / (self.tau + self.tau);
        let nloc = space.n_local();
        let tab = &self.flux_tab;
        let mut grads = vec![[T::zero(); 2]; tab.n_points * nloc];
        let mut stored = T::zero();
        for t in 0..space.n_cells() {
            let dofs = space.cell_dofs(t);
            cell_gradients(space, tab, t, &mut grads);
            let area = space.geometry(t).area;
            for q in 0..tab.n_points {
                let g = &grads[q * nloc..(q + 1) * nloc];
                stored += tab.weights[q] * area * self.params.phi(norm(gradient_at(u, dofs, g)));
            }
        }
        kinetic + stored - dot_slice(&self.load, u)
    }

    /// `E(v) - E(u)` without forming either energy (the constant parts cancel
    /// exactly), and the magnitude of the summed terms as a rounding scale.
    pub fn energy_change(&self, u: &[T], v: &[T]) -> (T, T) {
        let space = &*self.space;
        let two = T::lit(2.0);
        let d: Vec<T> = v.iter().zip(u).map(|(&a, &b)| a - b).collect();
        let md = space.mass_matrix().apply(&d);
        let mut delta = T::zero();
        let mut scale = T::zero();
        for i in 0..d.len() {
            let s = v[i] + u[i] - two * self.u_prev[i];
            let k = md[i] * s / (self.tau + self.tau);
            let l = self.load[i] * d[i];
            delta += k - l;
            scale += k.abs() + l.abs();
        }
        let nloc = space.n_local();
        let tab = &self.flux_tab;
        let mut grads = vec![[T::zero(); 2]; tab.n_points * nloc];
        for t in 0..space.n_cells() {
            let dofs = space.cell_dofs(t);
            cell_gradients(space, tab, t, &mut grads);
            let area = space.geometry(t).area;
            for q in 0..tab.n_points {
                let g = &grads[q * nloc..(q + 1) * nloc];
                let pv = self.params.phi(norm(gradient_at(v, dofs, g)));
                let pu = self.params.phi(norm(gradient_at(u, dofs, g)));
                let w = tab.weights[q] * area;
                delta += w * (pv - pu);
                scale += w * (pv + pu);
            }
        }
        (delta, scale)
    }

    /// The step energy restricted to the line `u + alpha d`, for cheap
    /// repeated [`energy_change`](Self::energy_change) evaluations.
    pub fn along(&self, u: &[T], d: &[T]) -> LineEnergy<T> {
        let space = &*self.space;
        let md = space.mass_matrix().apply(d);
        let two_tau = self.tau + self.tau;
        let (mut linear, mut quadratic, mut scale) = (T::zero(), T::zero(), T::zero());
        for i in 0..d.len() {
            let k = md[i] * (u[i] - self.u_prev[i]) / self.tau;
            let l = self.load[i] * d[i];
            linear += k - l;
            quadratic += md[i] * d[i] / two_tau;
            scale += k.abs() + l.abs();
        }
        let nloc = space.n_local();
        let tab = &self.flux_tab;
        let mut grads = vec![[T::zero(); 2]; tab.n_points * nloc];
        let mut points = Vec::with_capacity(space.n_cells() * tab.n_points);
        for t in 0..space.n_cells() {
            let dofs = space.cell_dofs(t);
            cell_gradients(space, tab, t, &mut grads);
            let area = space.geometry(t).area;
            for q in 0..tab.n_points {
                let g = &grads[q * nloc..(q + 1) * nloc];
                let gu = gradient_at(u, dofs, g);
                points.push(LinePoint {
                    weight: tab.weights[q] * area,
                    base: gu,
                    dir: gradient_at(d, dofs, g),
                    phi_base: self.params.phi(norm(gu)),
                });
            }
        }
        LineEnergy { params: self.params, linear, quadratic, kinetic_scale: scale, points }
    }
}

struct LinePoint<T> {
    weight: T,
    base: Vec2<T>,
    dir: Vec2<T>,
    phi_base: T,
}

/// See [`StepProblem::along`].
pub struct LineEnergy<T: Real> {
    params: PLaplaceParams<T>,
    linear: T,
    quadratic: T,
    kinetic_scale: T,
    points: Vec<LinePoint<T>>,
}

impl<T: Real> LineEnergy<T> {
    /// `E(u + alpha d) - E(u)` and a rounding scale, as in
    /// [`StepProblem::energy_change`].
    pub fn change(&self, alpha: T) -> (T, T) {
        let kinetic = alpha * (self.linear + alpha * self.quadratic);
        let mut delta = kinetic;
        let mut scale = alpha.abs() * (self.kinetic_scale + alpha.abs() * self.quadratic.abs());
        for pt in &self.points {
            let g = [pt.base[0] + alpha * pt.dir[0], pt.base[1] + alpha * pt.dir[1]];
            let pv = self.params.phi(norm(g));
            delta += pt.weight * (pv - pt.phi_base);
            scale += pt.weight * (pv + pt.phi_base);
        }
        (delta, scale)
    }
}

#[inline]
fn gradient_at<T: Real>(u: &[T], dofs: &[usize], grads: &[Vec2<T>]) -> Vec2<T> {
    let mut g = [T::zero(); 2];
    for (&i, dg) in dofs.iter().zip(grads) {
        g[0] += u[i] * dg[0];
        g[1] += u[i] * dg[1];
    }
    g
}

pub(crate) fn dot_slice<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn euclid<T: Real>(a: &[T]) -> T {
    dot_slice(a, a).sqrt()
}

/// Residual of the step equation at `u` (see [`StepProblem::residual`]).
pub fn assemble_step_residual<T: Real>(
    u: &FeFunction<T>,
    u_prev: &FeFunction<T>,
    tau: T,
    force: &QuadratureField<T>,
    params: PLaplaceParams<T>,
    boundary_values: Vec<T>,
) -> Result<Vec<T>> {
    if !Arc::ptr_eq(u.space(), u_prev.space()) {
        return Err(Error::SpaceMismatch);
    }
    let load = assemble_load(u.space(), force);
    let problem = StepProblem::new(u_prev, tau, load, params, boundary_values, T::lit(crate::constitutive::DEFAULT_EPS_REG))?;
    Ok(problem.residual(u.coeffs()))
}

/// Newton matrix `M / tau + K(u)` with pinned Dirichlet rows and columns.
pub fn assemble_step_jacobian<T: Real>(u: &FeFunction<T>, tau: T, params: PLaplaceParams<T>) -> Result<SparseMatrix<T>> {
    let space = u.space();
    let zero = vec![T::zero(); space.ndof()];
    let problem = StepProblem::new(u, tau, zero.clone(), params, zero, T::lit(crate::constitutive::DEFAULT_EPS_REG))?;
    problem.jacobian(u.coeffs())
}

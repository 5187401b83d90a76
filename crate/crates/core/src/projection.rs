//! L2 projection onto the full finite element space, nodal interpolation,
//! time-averaged Dirichlet data, and numerical checks of the projection's
//! locality and of its stability in the `V` quasi-norm.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use crate::assembly::{assemble_load, solve_spd, QuadratureField};
use crate::constitutive::{v_transform, PLaplaceParams};
use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSpace};
use crate::quadrature::{gauss_legendre, triangle_rule};
use crate::scalar::{norm, sub, Real, Vec2};
use crate::timestepper::{split_at, TimeGrid};

pub use crate::fespace::nodal_interpolate;

fn projection_tol<T: Real>() -> T {
    (T::epsilon() * T::lit(100.0)).max(T::lit(1e-13))
}

/// Solves `M c = b` on all DOFs (no boundary constraint).
pub fn l2_project_field<T: Real>(space: &Arc<FeSpace<T>>, field: &QuadratureField<T>) -> Result<FeFunction<T>> {
    let b = assemble_load(space, field);
    let (c, _) = solve_spd(space.mass_matrix(), &b, projection_tol())?;
    FeFunction::from_coeffs(space, c)
}

/// `Pi_2 g`, load integrated with exactness `2r + 2`.
pub fn l2_project<T: Real>(space: &Arc<FeSpace<T>>, g: impl Fn(Vec2<T>) -> T) -> Result<FeFunction<T>> {
    let field = QuadratureField::from_fn(space, crate::assembly::default_degree(space.degree()), |_, x| g(x))?;
    l2_project_field(space, &field)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    Homogeneous,
    AveragedNodal,
}

/// Dirichlet values of one time step, listed in the order of
/// [`FeSpace::boundary_dofs`].
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData<T> {
    pub mode: BoundaryMode,
    pub dofs: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> BoundaryData<T> {
    pub fn homogeneous(space: &FeSpace<T>) -> Self {
        let dofs = space.boundary_dofs();
        let values = vec![T::zero(); dofs.len()];
        Self { mode: BoundaryMode::Homogeneous, dofs, values }
    }

    /// Coefficient vector of length `ndof`, zero off the boundary.
    pub fn full_vector(&self, ndof: usize) -> Vec<T> {
        let mut v = vec![T::zero(); ndof];
        for (&i, &g) in self.dofs.iter().zip(&self.values) {
            v[i] = g;
        }
        v
    }

    pub fn overwrite(&self, u: &mut FeFunction<T>) {
        let c = u.coeffs_mut();
        for (&i, &g) in self.dofs.iter().zip(&self.values) {
            c[i] = g;
        }
    }
}

/// `(1 / |J_m|) int_{J_m} g(x_b, s) ds` at every boundary node `x_b`, by
/// 5-point Gauss on each `I`-interval of the window, split at `s = 0`.
pub fn averaged_boundary_values<T: Real>(space: &FeSpace<T>, g: impl Fn(Vec2<T>, T) -> T, m: usize, grid: &TimeGrid<T>) -> BoundaryData<T> {
    let (a, b) = grid.window(m);
    let mut pieces = Vec::new();
    for k in m..=(m + 1).min(grid.steps()) {
        let (s0, s1) = grid.interval(k);
        pieces.extend(split_at(s0, s1, &[T::zero()]));
    }
    let (x, w) = gauss_legendre(5);
    let len = b - a;
    let dofs = space.boundary_dofs();
    let values = dofs
        .iter()
        .map(|&i| {
            let xb = space.dof_coords()[i];
            let mut total = T::zero();
            for &(s0, s1) in &pieces {
                let half = (s1 - s0) * T::lit(0.5);
                let mid = (s0 + s1) * T::lit(0.5);
                for (&xi, &wi) in x.iter().zip(&w) {
                    total += T::lit(wi) * half * g(xb, mid + half * T::lit(xi));
                }
            }
            total / len
        })
        .collect();
    BoundaryData { mode: BoundaryMode::AveragedNodal, dofs, values }
}

/// Source of the decay experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecaySource {
    /// Indicator function of one triangle.
    Triangle(usize),
    /// A constant; the projection is exact and nothing decays.
    Constant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    /// Fitted factor per layer of neighbouring triangles; `0` for a constant source.
    pub q_fit: f64,
    pub c_fit: f64,
    /// `(distance, max |Pi_2 v|)` for every nonempty distance.
    pub profile: Vec<(usize, f64)>,
}

/// Triangle closest to the centroid of the mesh.
pub fn central_triangle<T: Real>(space: &FeSpace<T>) -> usize {
    let mesh = space.mesh();
    let n = T::from_usize_lossy(mesh.n_triangles());
    let mut c = [T::zero(); 2];
    for t in 0..mesh.n_triangles() {
        let ct = mesh.centroid(t);
        c[0] += ct[0] / n;
        c[1] += ct[1] / n;
    }
    (0..mesh.n_triangles())
        .min_by(|&a, &b| {
            let da = norm(sub(mesh.centroid(a), c));
            let db = norm(sub(mesh.centroid(b), c));
            da.partial_cmp(&db).expect("finite")
        })
        .expect("nonempty mesh")
}

/// Projects the indicator of a central triangle and fits
/// `max_{dist(T) = k} |Pi_2 v| ~ c q^k` over the vertex-neighbour distance `k >= 1`.
pub fn verify_l2_decay<T: Real>(space: &Arc<FeSpace<T>>) -> Result<DecayReport> {
    verify_l2_decay_from(space, DecaySource::Triangle(central_triangle(space)))
}

pub fn verify_l2_decay_from<T: Real>(space: &Arc<FeSpace<T>>, source: DecaySource) -> Result<DecayReport> {
    let src = match source {
        DecaySource::Constant => return Ok(DecayReport { q_fit: 0.0, c_fit: 0.0, profile: Vec::new() }),
        DecaySource::Triangle(t) => t,
    };
    let mesh = space.mesh();
    if src >= mesh.n_triangles() {
        return Err(Error::InvalidParameter(format!("triangle {src} out of range")));
    }
    let degree = crate::assembly::default_degree(space.degree());
    let field = QuadratureField::from_fn(space, degree, |t, _| if t == src { T::one() } else { T::zero() })?;
    let pv = l2_project_field(space, &field)?;

    let dist = triangle_distances(space, src);
    let mut profile: Vec<(usize, f64)> = Vec::new();
    for t in 0..mesh.n_triangles() {
        let k = dist[t];
        let v = space.cell_dofs(t).iter().map(|&i| pv.coeffs()[i].abs()).fold(T::zero(), T::max).to_f64_lossy();
        match profile.iter_mut().find(|(d, _)| *d == k) {
            Some(entry) => entry.1 = entry.1.max(v),
            None => profile.push((k, v)),
        }
    }
    profile.sort_by_key(|&(k, _)| k);
    let peak = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    let floor = peak * 1e3 * T::epsilon().to_f64_lossy();
    let pts: Vec<(f64, f64)> = profile.iter().filter(|&&(k, v)| k >= 1 && v > floor).map(|&(k, v)| (k as f64, v.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("fewer than two distance layers above rounding"));
    }
    let (slope, intercept) = least_squares(&pts);
    Ok(DecayReport { q_fit: slope.exp(), c_fit: intercept.exp(), profile })
}

/// Breadth-first distance between triangles that share a vertex.
fn triangle_distances<T: Real>(space: &FeSpace<T>, src: usize) -> Vec<usize> {
    let mesh = space.mesh();
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            by_vertex[v].push(t);
        }
    }
    let mut dist = vec![usize::MAX; mesh.n_triangles()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(t) = queue.pop_front() {
        for &v in &mesh.triangles()[t] {
            for &s in &by_vertex[v] {
                if dist[s] == usize::MAX {
                    dist[s] = dist[t] + 1;
                    queue.push_back(s);
                }
            }
        }
    }
    dist
}

/// Slope and intercept of the least-squares line through `pts`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// One row of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `log(value)` against `log(h)`.
    pub order: f64,
}

/// `|V(grad v) - V(grad Pi_2 v)|_{L2}` on every space; `grad_v` is the exact
/// gradient of `v`.
pub fn verify_v_stability<T: Real>(
    spaces: &[Arc<FeSpace<T>>],
    v: impl Fn(Vec2<T>) -> T,
    grad_v: impl Fn(Vec2<T>) -> Vec2<T>,
    params: &PLaplaceParams<T>,
) -> Result<StabilityReport> {
    let mut rows = Vec::with_capacity(spaces.len());
    for space in spaces {
        let pv = l2_project(space, &v)?;
        let rule = triangle_rule::<T>(2 * space.degree() + 4)?;
        let mut total = T::zero();
        for t in 0..space.n_cells() {
            let geo = space.geometry(t);
            for (&lam, &w) in rule.points.iter().zip(&rule.weights) {
                let a = v_transform(grad_v(geo.point(lam)), params);
                let b = v_transform(pv.eval_gradient(t, lam), params);
                let d = sub(a, b);
                total += w * geo.area * (d[0] * d[0] + d[1] * d[1]);
            }
        }
        rows.push(StudyRow {
            level: space.mesh().level(),
            h: space.mesh().quality().h_max.to_f64_lossy(),
            value: total.sqrt().to_f64_lossy(),
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.value > 0.0).map(|r| (r.h.ln(), r.value.ln())).collect();
    let order = if pts.len() >= 2 { least_squares(&pts).0 } else { 0.0 };
    Ok(StabilityReport { rows, order })
}

/// CSV rows `level,h,value`.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "level,h,value")?;
    for r in rows {
        writeln!(w, "{},{:.16e},{:.16e}", r.level, r.h, r.value)?;
    }
    Ok(())
}

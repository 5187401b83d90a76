//! Continuous Lagrange spaces of degree 1 to 3 on a [`Mesh`].
//!
//! DOF numbering is hierarchical: vertex DOFs first (DOF `v` sits on vertex
//! `v`), then `r - 1` DOFs per edge ordered from the lower to the higher
//! vertex index, then one interior DOF per triangle for `r = 3`.
//!
//! Local node order on a triangle: the three vertices, then the nodes of
//! local edges `(0,1)`, `(1,2)`, `(2,0)` walking from the first to the
//! second vertex, then the interior node.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use crate::assembly::{assemble_mass, SparseMatrix, SparsityPattern};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::scalar::{Real, Vec2};

/// Lagrange element on the reference triangle, parameterised by barycentric
/// multi-indices `alpha` with `|alpha| = r`.
#[derive(Clone, Debug)]
pub struct LagrangeElement {
    degree: usize,
    alphas: Vec<[usize; 3]>,
}

impl LagrangeElement {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let r = degree;
        let mut alphas = Vec::with_capacity((r + 1) * (r + 2) / 2);
        for i in 0..3 {
            let mut a = [0; 3];
            a[i] = r;
            alphas.push(a);
        }
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            for s in 1..r {
                let mut a = [0; 3];
                a[i] = r - s;
                a[j] = s;
                alphas.push(a);
            }
        }
        if r == 3 {
            alphas.push([1, 1, 1]);
        }
        Ok(Self { degree, alphas })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_local(&self) -> usize {
        self.alphas.len()
    }

    /// Barycentric coordinates of local node `a`.
    pub fn node<T: Real>(&self, a: usize) -> [T; 3] {
        let r = T::from_usize_lossy(self.degree);
        self.alphas[a].map(|k| T::from_usize_lossy(k) / r)
    }

    /// `prod_{q<k} (r x - q) / (q + 1)` and its derivative in `x`.
    fn factor<T: Real>(&self, k: usize, x: T) -> (T, T) {
        let r = T::from_usize_lossy(self.degree);
        let mut value = T::one();
        let mut deriv = T::zero();
        for q in 0..k {
            let qf = T::from_usize_lossy(q);
            let den = qf + T::one();
            let f = (r * x - qf) / den;
            deriv = deriv * f + value * r / den;
            value *= f;
        }
        (value, deriv)
    }

    pub fn values<T: Real>(&self, lam: [T; 3], out: &mut [T]) {
        for (a, alpha) in self.alphas.iter().enumerate() {
            out[a] = (0..3).map(|l| self.factor(alpha[l], lam[l]).0).fold(T::one(), |acc, v| acc * v);
        }
    }

    /// Partial derivatives with respect to the three barycentric coordinates,
    /// treated as independent variables.
    pub fn bary_gradients<T: Real>(&self, lam: [T; 3], out: &mut [[T; 3]]) {
        for (a, alpha) in self.alphas.iter().enumerate() {
            let f: [(T, T); 3] = [0, 1, 2].map(|l| self.factor(alpha[l], lam[l]));
            out[a] = [f[0].1 * f[1].0 * f[2].0, f[0].0 * f[1].1 * f[2].0, f[0].0 * f[1].0 * f[2].1];
        }
    }
}

/// Affine geometry of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry<T> {
    pub vertices: [Vec2<T>; 3],
    pub area: T,
    pub grad_lambda: [Vec2<T>; 3],
}

impl<T: Real> CellGeometry<T> {
    pub fn new(vertices: [Vec2<T>; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
        let d2 = [p2[0] - p0[0], p2[1] - p0[1]];
        let det = d1[0] * d2[1] - d1[1] * d2[0];
        let g1 = [d2[1] / det, -d2[0] / det];
        let g2 = [-d1[1] / det, d1[0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        Self { vertices, area: det * T::lit(0.5), grad_lambda: [g0, g1, g2] }
    }

    pub fn point(&self, lam: [T; 3]) -> Vec2<T> {
        let v = &self.vertices;
        [lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0], lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1]]
    }

    #[inline]
    pub fn physical_gradient(&self, dbary: [T; 3]) -> Vec2<T> {
        let g = &self.grad_lambda;
        [dbary[0] * g[0][0] + dbary[1] * g[1][0] + dbary[2] * g[2][0], dbary[0] * g[0][1] + dbary[1] * g[1][1] + dbary[2] * g[2][1]]
    }
}

/// Basis values and barycentric derivatives at the points of a rule.
#[derive(Clone, Debug)]
pub struct Tabulation<T> {
    pub n_points: usize,
    pub n_local: usize,
    /// `values[q * n_local + a]`
    pub values: Vec<T>,
    pub bary_gradients: Vec<[T; 3]>,
    pub weights: Vec<T>,
    pub points: Vec<[T; 3]>,
}

#[derive(Debug)]
pub struct FeSpace<T> {
    mesh: Arc<Mesh<T>>,
    element: LagrangeElement,
    dof_coords: Vec<Vec2<T>>,
    cell_dofs: Vec<usize>,
    boundary: Vec<bool>,
    geometry: Vec<CellGeometry<T>>,
    pattern: OnceLock<Arc<SparsityPattern>>,
    mass: OnceLock<SparseMatrix<T>>,
}

impl<T: Real> FeSpace<T> {
    pub fn new(mesh: Arc<Mesh<T>>, degree: usize) -> Result<Arc<Self>> {
        let element = LagrangeElement::new(degree)?;
        let r = degree;
        let nv = mesh.n_vertices();
        let ne = mesh.edges().len();
        let nt = mesh.n_triangles();
        let ndof = nv + ne * (r - 1) + if r == 3 { nt } else { 0 };
        let nloc = element.n_local();

        let mut cell_dofs = Vec::with_capacity(nt * nloc);
        let mut dof_coords = vec![[T::zero(); 2]; ndof];
        let mut geometry = Vec::with_capacity(nt);
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            let te = mesh.triangle_edges()[t];
            let geo = CellGeometry::new(mesh.triangle_coords(t));
            let start = cell_dofs.len();
            cell_dofs.extend_from_slice(&tri);
            for k in 0..3 {
                let (gi, gj) = (tri[k], tri[(k + 1) % 3]);
                for s in 1..r {
                    let global_s = if gi < gj { s } else { r - s };
                    cell_dofs.push(nv + te[k] * (r - 1) + global_s - 1);
                }
            }
            if r == 3 {
                cell_dofs.push(nv + ne * (r - 1) + t);
            }
            for a in 0..nloc {
                dof_coords[cell_dofs[start + a]] = geo.point(element.node(a));
            }
            geometry.push(geo);
        }

        let mut boundary = vec![false; ndof];
        for (v, b) in boundary.iter_mut().enumerate().take(nv) {
            *b = mesh.is_boundary_vertex(v);
        }
        for be in mesh.boundary_edges() {
            for s in 0..(r - 1) {
                boundary[nv + be.edge * (r - 1) + s] = true;
            }
        }

        Ok(Arc::new(Self { mesh, element, dof_coords, cell_dofs, boundary, geometry, pattern: OnceLock::new(), mass: OnceLock::new() }))
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }
    pub fn degree(&self) -> usize {
        self.element.degree
    }
    pub fn element(&self) -> &LagrangeElement {
        &self.element
    }
    pub fn ndof(&self) -> usize {
        self.dof_coords.len()
    }
    pub fn n_local(&self) -> usize {
        self.element.n_local()
    }
    pub fn n_cells(&self) -> usize {
        self.geometry.len()
    }
    pub fn dof_coords(&self) -> &[Vec2<T>] {
        &self.dof_coords
    }
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.n_local();
        &self.cell_dofs[t * n..(t + 1) * n]
    }
    pub fn geometry(&self, t: usize) -> &CellGeometry<T> {
        &self.geometry[t]
    }
    pub fn is_boundary_dof(&self, i: usize) -> bool {
        self.boundary[i]
    }
    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }
    pub fn boundary_dofs(&self) -> Vec<usize> {
        (0..self.ndof()).filter(|&i| self.boundary[i]).collect()
    }
    pub fn n_interior_dofs(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        self.pattern.get_or_init(|| Arc::new(SparsityPattern::from_cells(self.ndof(), self.n_local(), &self.cell_dofs)))
    }

    /// Unconstrained mass matrix, assembled on first use.
    pub fn mass_matrix(&self) -> &SparseMatrix<T> {
        self.mass.get_or_init(|| assemble_mass(self))
    }

    pub fn tabulate(&self, rule: &QuadratureRule<T>) -> Tabulation<T> {
        let nloc = self.n_local();
        let nq = rule.len();
        let mut values = vec![T::zero(); nq * nloc];
        let mut bary_gradients = vec![[T::zero(); 3]; nq * nloc];
        for (q, &lam) in rule.points.iter().enumerate() {
            self.element.values(lam, &mut values[q * nloc..(q + 1) * nloc]);
            self.element.bary_gradients(lam, &mut bary_gradients[q * nloc..(q + 1) * nloc]);
        }
        Tabulation { n_points: nq, n_local: nloc, values, bary_gradients, weights: rule.weights.clone(), points: rule.points.clone() }
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other)
    }
}

/// Coefficient vector over an [`FeSpace`].
#[derive(Clone, Debug)]
pub struct FeFunction<T> {
    space: Arc<FeSpace<T>>,
    coeffs: Vec<T>,
}

impl<T: Real> FeFunction<T> {
    pub fn zero(space: &Arc<FeSpace<T>>) -> Self {
        Self { space: Arc::clone(space), coeffs: vec![T::zero(); space.ndof()] }
    }

    pub fn from_coeffs(space: &Arc<FeSpace<T>>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != space.ndof() {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { space: Arc::clone(space), coeffs })
    }

    pub fn space(&self) -> &Arc<FeSpace<T>> {
        &self.space
    }
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }
    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn eval(&self, t: usize, lam: [T; 3]) -> T {
        let nloc = self.space.n_local();
        let mut phi = [T::zero(); 10];
        self.space.element.values(lam, &mut phi[..nloc]);
        self.space.cell_dofs(t).iter().zip(&phi[..nloc]).map(|(&i, &v)| self.coeffs[i] * v).sum()
    }

    pub fn eval_gradient(&self, t: usize, lam: [T; 3]) -> Vec2<T> {
        let nloc = self.space.n_local();
        let mut d = [[T::zero(); 3]; 10];
        self.space.element.bary_gradients(lam, &mut d[..nloc]);
        let mut acc = [T::zero(); 3];
        for (&i, g) in self.space.cell_dofs(t).iter().zip(&d[..nloc]) {
            let c = self.coeffs[i];
            for l in 0..3 {
                acc[l] += c * g[l];
            }
        }
        self.space.geometry(t).physical_gradient(acc)
    }

    /// Value at a physical point, located through the mesh hierarchy.
    pub fn eval_at(&self, x: Vec2<T>, side: Option<crate::mesh::Side>) -> Result<T> {
        let (t, lam) = self.space.mesh().locate_point(x, side)?;
        Ok(self.eval(t, lam))
    }

    /// Header `ndof <n> degree <r> level <k>` followed by one coefficient per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ndof {} degree {} level {}", self.space.ndof(), self.space.degree(), self.space.mesh().level())?;
        for c in &self.coeffs {
            writeln!(w, "{c:.17e}")?;
        }
        Ok(())
    }
}

/// Nodal interpolation: coefficients are the values of `g` at the DOF nodes.
pub fn nodal_interpolate<T: Real>(space: &Arc<FeSpace<T>>, g: impl Fn(Vec2<T>) -> T) -> Result<FeFunction<T>> {
    let coeffs = space
        .dof_coords()
        .iter()
        .map(|&x| {
            let v = g(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteValue { x: x[0].to_f64_lossy(), y: x[1].to_f64_lossy(), value: v.to_f64_lossy() })
            }
        })
        .collect::<Result<Vec<T>>>()?;
    FeFunction::from_coeffs(space, coeffs)
}

//! Conforming triangulations of the model domains and their red refinement.
//!
//! Refinement keeps a strict numbering contract: the four children of parent
//! triangle `t` are triangles `4t..4t+4` of the refined mesh, parent vertices
//! keep their indices, and the midpoint of parent edge `e` becomes vertex
//! `n_parent_vertices + e`. Point location and coarse-on-fine evaluation rely
//! on it.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{norm, sub, Real, Vec2};

/// Model domains with hard-coded coarse templates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// `(0,1)^2`, two triangles split along the `(0,0)-(1,1)` diagonal.
    UnitSquare,
    /// `(-1,1)^2`, 3x3 vertex grid, eight triangles, origin is a vertex.
    CenteredSquare,
    /// `(1,3) x (-1,1)`, same template as the centered square shifted by `(2,0)`.
    ShiftedSquare,
    /// `(-1,1)^2` minus the cut `(-1,0] x {0}`. Twelve vertices, ten
    /// triangles, all vertices on the boundary; vertices on the cut are
    /// stored twice (upper and lower copy).
    Slit,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            _ => 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::UnitSquare => "unit_square",
            Domain::CenteredSquare => "centered_square",
            Domain::ShiftedSquare => "shifted_square",
            Domain::Slit => "slit",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_square" => Ok(Domain::UnitSquare),
            "centered_square" | "omega1" => Ok(Domain::CenteredSquare),
            "shifted_square" | "omega2" => Ok(Domain::ShiftedSquare),
            "slit" => Ok(Domain::Slit),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    Outer,
    /// Either side of the slit. Dirichlet like the outer boundary.
    Slit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub edge: usize,
    pub tag: BoundaryTag,
}

/// Which side of the slit a query point on the cut belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshQuality<T> {
    pub h_max: T,
    pub h_min: T,
    /// `max_T h_T / rho_T` with `rho_T` twice the inradius.
    pub gamma: T,
    pub quasi_uniformity_ratio: T,
}

/// Diameter, inradius and inscribed-ball diameter of a single triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleShape<T> {
    pub diameter: T,
    pub inradius: T,
    pub rho: T,
    pub area: T,
}

pub fn triangle_shape<T: Real>(p: [Vec2<T>; 3]) -> TriangleShape<T> {
    let a = norm(sub(p[1], p[0]));
    let b = norm(sub(p[2], p[1]));
    let c = norm(sub(p[0], p[2]));
    let area = signed_area(p).abs();
    let perimeter = a + b + c;
    let inradius = (area + area) / perimeter;
    TriangleShape { diameter: a.max(b).max(c), inradius, rho: inradius + inradius, area }
}

#[inline]
pub fn signed_area<T: Real>(p: [Vec2<T>; 3]) -> T {
    let d1 = sub(p[1], p[0]);
    let d2 = sub(p[2], p[0]);
    (d1[0] * d2[1] - d1[1] * d2[0]) * T::lit(0.5)
}

#[derive(Debug)]
pub struct Mesh<T> {
    domain: Domain,
    vertices: Vec<Vec2<T>>,
    triangles: Vec<[usize; 3]>,
    /// Unique edges as sorted vertex pairs, numbered by first appearance.
    edges: Vec<[usize; 2]>,
    /// Local edge `i` of a triangle joins local vertices `i` and `(i+1)%3`.
    triangle_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    boundary_vertex: Vec<bool>,
    boundary_edge_flag: Vec<bool>,
    level: usize,
    parent: Option<Arc<Mesh<T>>>,
}

const LOCATE_TOL: f64 = 1e-10;

impl<T: Real> Mesh<T> {
    /// Coarse template for `domain` (level 0).
    pub fn initial(domain: Domain) -> Arc<Self> {
        let (verts, tris): (Vec<[f64; 2]>, Vec<[usize; 3]>) = match domain {
            Domain::UnitSquare => (vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]]),
            Domain::CenteredSquare => grid3x3(-1.0, -1.0),
            Domain::ShiftedSquare => grid3x3(1.0, -1.0),
            Domain::Slit => (
                vec![
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [1.0, 1.0],
                    [0.0, 1.0],
                    [-1.0, 1.0],
                    [-1.0, 0.0],
                    [-0.5, 0.0],
                    [-0.5, 0.0],
                    [-1.0, 0.0],
                    [-1.0, -1.0],
                    [0.0, -1.0],
                    [1.0, -1.0],
                ],
                vec![[0, 1, 2], [0, 2, 3], [6, 0, 3], [6, 3, 4], [6, 4, 5], [0, 11, 1], [0, 10, 11], [7, 10, 0], [7, 9, 10], [7, 8, 9]],
            ),
        };
        let vertices = verts.into_iter().map(|[x, y]| [T::lit(x), T::lit(y)]).collect();
        Arc::new(Self::from_parts(domain, vertices, tris, 0, None))
    }

    /// Red refinement: every triangle is split into four similar children.
    pub fn refine(self: &Arc<Self>) -> Arc<Self> {
        let half = T::lit(0.5);
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|&[a, b]| {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            [(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half]
        }));
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [e0, e1, e2] = self.triangle_edges[t];
            let (m01, m12, m20) = (nv + e0, nv + e1, nv + e2);
            triangles.push([tri[0], m01, m20]);
            triangles.push([m01, tri[1], m12]);
            triangles.push([m20, m12, tri[2]]);
            triangles.push([m01, m12, m20]);
        }
        Arc::new(Self::from_parts(self.domain, vertices, triangles, self.level + 1, Some(Arc::clone(self))))
    }

    /// Refines `levels` times starting from the coarse template.
    pub fn at_level(domain: Domain, levels: usize) -> Arc<Self> {
        let mut mesh = Self::initial(domain);
        for _ in 0..levels {
            mesh = mesh.refine();
        }
        mesh
    }

    fn from_parts(domain: Domain, vertices: Vec<Vec2<T>>, triangles: Vec<[usize; 3]>, level: usize, parent: Option<Arc<Mesh<T>>>) -> Self {
        let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(3 * triangles.len() / 2 + 8);
        let mut edges = Vec::new();
        let mut uses: Vec<u8> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut te = [0usize; 3];
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let key = if a < b { [a, b] } else { [b, a] };
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    uses.push(0);
                    edges.len() - 1
                });
                uses[e] += 1;
                te[i] = e;
            }
            triangle_edges.push(te);
        }
        let mut boundary_edges = Vec::new();
        let mut boundary_vertex = vec![false; vertices.len()];
        let mut boundary_edge_flag = vec![false; edges.len()];
        let zero = T::zero();
        for (e, &[a, b]) in edges.iter().enumerate() {
            debug_assert!(uses[e] <= 2, "non-manifold edge");
            if uses[e] == 1 {
                let (pa, pb) = (vertices[a], vertices[b]);
                let on_cut = domain == Domain::Slit
                    && pa[1] == zero
                    && pb[1] == zero
                    && pa[0] <= zero
                    && pb[0] <= zero
                    && (pa[0] > T::lit(-1.0) || pb[0] > T::lit(-1.0));
                let tag = if on_cut { BoundaryTag::Slit } else { BoundaryTag::Outer };
                boundary_edges.push(BoundaryEdge { vertices: [a, b], edge: e, tag });
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
                boundary_edge_flag[e] = true;
            }
        }
        Self { domain, vertices, triangles, edges, triangle_edges, boundary_edges, boundary_vertex, boundary_edge_flag, level, parent }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn vertices(&self) -> &[Vec2<T>] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge_flag[e]
    }
    pub fn level(&self) -> usize {
        self.level
    }
    pub fn parent(&self) -> Option<&Arc<Mesh<T>>> {
        self.parent.as_ref()
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [Vec2<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> T {
        signed_area(self.triangle_coords(t))
    }

    pub fn centroid(&self, t: usize) -> Vec2<T> {
        let p = self.triangle_coords(t);
        let third = T::lit(1.0 / 3.0);
        [(p[0][0] + p[1][0] + p[2][0]) * third, (p[0][1] + p[1][1] + p[2][1]) * third]
    }

    pub fn total_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn quality(&self) -> MeshQuality<T> {
        let mut h_max = T::zero();
        let mut h_min = T::infinity();
        let mut gamma = T::zero();
        for t in 0..self.triangles.len() {
            let s = triangle_shape(self.triangle_coords(t));
            h_max = h_max.max(s.diameter);
            h_min = h_min.min(s.diameter);
            gamma = gamma.max(s.diameter / s.rho);
        }
        MeshQuality { h_max, h_min, gamma, quasi_uniformity_ratio: h_max / h_min }
    }

    /// Number of refinement levels between `coarse` and `self`, if `coarse`
    /// is `self` or one of its ancestors.
    pub fn levels_below(&self, coarse: &Mesh<T>) -> Option<usize> {
        let mut cur: &Mesh<T> = self;
        let mut k = 0;
        loop {
            if std::ptr::eq(cur, coarse) {
                return Some(k);
            }
            cur = cur.parent.as_deref()?;
            k += 1;
        }
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: Vec2<T>) -> [T; 3] {
        let [p0, p1, p2] = self.triangle_coords(t);
        let d1 = sub(p1, p0);
        let d2 = sub(p2, p0);
        let r = sub(x, p0);
        let det = d1[0] * d2[1] - d1[1] * d2[0];
        let l1 = (r[0] * d2[1] - r[1] * d2[0]) / det;
        let l2 = (d1[0] * r[1] - d1[1] * r[0]) / det;
        [T::one() - l1 - l2, l1, l2]
    }

    /// Finds a triangle containing `x` together with barycentric
    /// coordinates. On slit meshes a point on the cut belongs to the triangle
    /// on the requested `side`; without a hint the first hit wins.
    pub fn locate_point(&self, x: Vec2<T>, side: Option<Side>) -> Result<(usize, [T; 3])> {
        let candidates: Vec<usize> = match &self.parent {
            Some(parent) => {
                let (pt, _) = parent.locate_point(x, side)?;
                (4 * pt..4 * pt + 4).collect()
            }
            None => (0..self.triangles.len()).collect(),
        };
        let tol = T::lit(LOCATE_TOL);
        let mut first: Option<(usize, [T; 3])> = None;
        let mut best: Option<(usize, [T; 3], T)> = None;
        for t in candidates {
            let lam = self.barycentric(t, x);
            let worst = lam[0].min(lam[1]).min(lam[2]);
            if worst >= -tol {
                let matches_side = match side {
                    None => true,
                    Some(s) => {
                        let cy = self.centroid(t)[1];
                        match s {
                            Side::Above => cy >= x[1],
                            Side::Below => cy <= x[1],
                        }
                    }
                };
                if matches_side {
                    return Ok((t, clamp_barycentric(lam)));
                }
                first.get_or_insert((t, lam));
            } else if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, lam, worst));
            }
        }
        if let Some((t, lam)) = first {
            return Ok((t, clamp_barycentric(lam)));
        }
        Err(Error::PointOutsideDomain { x: x[0].to_f64_lossy(), y: x[1].to_f64_lossy() })
    }

    /// Triangles sharing at least one vertex with each triangle.
    pub fn vertex_neighbours(&self) -> Vec<Vec<usize>> {
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                incident[v].push(t);
            }
        }
        self.triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let mut n: Vec<usize> = tri.iter().flat_map(|&v| incident[v].iter().copied()).filter(|&s| s != t).collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect()
    }

    /// Plain text dump: header `vertices <n> triangles <m>`, then `x y` lines,
    /// then `i j k` lines with 0-based indices.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertices {} triangles {}", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn clamp_barycentric<T: Real>(lam: [T; 3]) -> [T; 3] {
    let c = lam.map(|l| l.max(T::zero()).min(T::one()));
    let s = c[0] + c[1] + c[2];
    c.map(|l| l / s)
}

fn grid3x3(x0: f64, y0: f64) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let mut v = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            v.push([x0 + i as f64, y0 + j as f64]);
        }
    }
    let mut t = Vec::with_capacity(8);
    for j in 0..2 {
        for i in 0..2 {
            let v00 = 3 * j + i;
            let (v10, v01, v11) = (v00 + 1, v00 + 3, v00 + 4);
            t.push([v00, v10, v11]);
            t.push([v00, v11, v01]);
        }
    }
    (v, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [Domain; 4] = [Domain::UnitSquare, Domain::CenteredSquare, Domain::ShiftedSquare, Domain::Slit];

    fn edge_uses(m: &Mesh<f64>) -> Vec<usize> {
        let mut uses = vec![0; m.edges().len()];
        for te in m.triangle_edges() {
            for &e in te {
                uses[e] += 1;
            }
        }
        uses
    }

    #[test]
    fn templates_are_conforming_and_positively_oriented() {
        for d in ALL {
            let mut m = Mesh::<f64>::initial(d);
            let mut nb = m.boundary_edges().len();
            for level in 0..4 {
                assert_eq!(m.level(), level);
                for t in 0..m.n_triangles() {
                    assert!(m.area(t) > 0.0, "{d:?} level {level} triangle {t}");
                }
                let uses = edge_uses(&m);
                assert!(uses.iter().all(|&u| u == 1 || u == 2));
                assert_eq!(uses.iter().filter(|&&u| u == 1).count(), m.boundary_edges().len());
                let rel = (m.total_area() - d.area()).abs() / d.area();
                assert!(rel < 1e-12);
                // Euler characteristic of a disk
                let chi = m.n_vertices() as i64 - m.edges().len() as i64 + m.n_triangles() as i64;
                assert_eq!(chi, 1);
                let next = m.refine();
                assert_eq!(next.boundary_edges().len(), 2 * nb);
                nb = next.boundary_edges().len();
                m = next;
            }
        }
    }

    #[test]
    fn slit_template_duplicates_cut_vertices() {
        for level in 0..4 {
            let m = Mesh::<f64>::at_level(Domain::Slit, level);
            let count = |x: f64, y: f64| m.vertices().iter().filter(|v| v[0] == x && v[1] == y).count();
            assert_eq!(count(0.0, 0.0), 1);
            let on_cut: Vec<_> = m.vertices().iter().filter(|v| v[1] == 0.0 && v[0] < 0.0).collect();
            let n_cut_points = 2usize << level; // x in [-1, 0) on a 2^-(level+1) grid
            assert_eq!(on_cut.len(), 2 * n_cut_points);
            for v in on_cut {
                assert_eq!(count(v[0], v[1]), 2);
            }
            let slit_edges = m.boundary_edges().iter().filter(|b| b.tag == BoundaryTag::Slit).count();
            assert_eq!(slit_edges, 2 * 2 * (1 << level));
        }
        let m = Mesh::<f64>::initial(Domain::Slit);
        assert_eq!(m.n_vertices(), 12);
        assert_eq!(m.n_triangles(), 10);
        assert_eq!(m.edges().len(), 21);
    }

    #[test]
    fn shifted_square_bounding_box() {
        let m = Mesh::<f64>::at_level(Domain::ShiftedSquare, 2);
        assert!(m.vertices().iter().all(|v| (1.0..=3.0).contains(&v[0]) && (-1.0..=1.0).contains(&v[1])));
        for d in [Domain::CenteredSquare, Domain::Slit] {
            let m = Mesh::<f64>::initial(d);
            assert!(m.vertices().iter().any(|v| v[0] == 0.0 && v[1] == 0.0));
        }
    }

    #[test]
    fn unit_square_counts() {
        let m = Mesh::<f64>::initial(Domain::UnitSquare);
        assert_eq!((m.n_vertices(), m.n_triangles()), (4, 2));
        assert_eq!(m.refine().n_triangles(), 8);
    }

    #[test]
    fn shape_measures_closed_forms() {
        let s = triangle_shape([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!((s.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.inradius - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((s.rho - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        let s = triangle_shape([[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]]);
        assert!((s.inradius - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((s.diameter / s.rho - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn red_refinement_preserves_shape_and_halves_h() {
        for d in ALL {
            let m0 = Mesh::<f64>::initial(d);
            let q0 = m0.quality();
            assert!(q0.gamma.is_finite() && q0.gamma >= 3f64.sqrt());
            let mut prev = q0;
            let mut m = m0;
            for _ in 0..3 {
                m = m.refine();
                let q = m.quality();
                assert!((q.gamma - prev.gamma).abs() <= 1e-12 * prev.gamma);
                assert!((q.h_max - prev.h_max / 2.0).abs() <= 1e-12 * prev.h_max);
                assert!((q.quasi_uniformity_ratio - q0.quasi_uniformity_ratio).abs() <= 1e-12 * q0.quasi_uniformity_ratio);
                assert!(q.quasi_uniformity_ratio >= 1.0);
                prev = q;
            }
        }
    }

    #[test]
    fn children_are_nested_in_parents() {
        let m = Mesh::<f64>::at_level(Domain::CenteredSquare, 2);
        let parent = m.parent().unwrap();
        for t in 0..m.n_triangles() {
            let c = m.centroid(t);
            let lam = parent.barycentric(t / 4, c);
            assert!(lam.iter().all(|&l| l > 0.0));
            for &v in &m.triangles()[t] {
                let lam = parent.barycentric(t / 4, m.vertices()[v]);
                assert!(lam.iter().all(|&l| l >= -1e-14));
            }
        }
        assert_eq!(m.levels_below(parent), Some(1));
        assert_eq!(m.levels_below(&m), Some(0));
        let other = Mesh::<f64>::initial(Domain::CenteredSquare);
        assert_eq!(m.levels_below(&other), None);
    }

    #[test]
    fn locate_basic_cases() {
        let m = Mesh::<f64>::at_level(Domain::UnitSquare, 2);
        for t in [0, 5, 17, 31] {
            let (found, lam) = m.locate_point(m.centroid(t), None).unwrap();
            assert_eq!(found, t);
            for l in lam {
                assert!((l - 1.0 / 3.0).abs() < 1e-12);
            }
            let v = m.vertices()[m.triangles()[t][1]];
            let (found, lam) = m.locate_point(v, None).unwrap();
            assert!(lam.iter().filter(|&&l| (l - 1.0).abs() < 1e-12).count() == 1);
            assert!(m.triangles()[found].contains(&m.triangles()[t][1]));
        }
        // shared edge between the two coarse triangles
        let (t, lam) = m.locate_point([0.3, 0.3], None).unwrap();
        let s: f64 = lam.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(lam.iter().any(|&l| l.abs() < 1e-12));
        assert!(t < m.n_triangles());
        assert!(matches!(m.locate_point([1.5, 0.2], None), Err(Error::PointOutsideDomain { .. })));
    }

    #[test]
    fn locate_on_slit_respects_side() {
        let m = Mesh::<f64>::at_level(Domain::Slit, 2);
        let x = [-0.4, 0.0];
        let (ta, _) = m.locate_point(x, Some(Side::Above)).unwrap();
        let (tb, _) = m.locate_point(x, Some(Side::Below)).unwrap();
        assert!(m.centroid(ta)[1] > 0.0);
        assert!(m.centroid(tb)[1] < 0.0);
    }

    #[test]
    fn locate_is_consistent_across_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fine = Mesh::<f64>::at_level(Domain::CenteredSquare, 3);
        let coarse = fine.parent().unwrap().clone();
        for _ in 0..100 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let (tf, lam) = fine.locate_point(x, None).unwrap();
            let (tc, _) = coarse.locate_point(x, None).unwrap();
            assert_eq!(tf / 4, tc);
            assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(lam.iter().all(|&l| (0.0..=1.0).contains(&l)));
        }
    }

    #[test]
    fn text_dump_header() {
        let m = Mesh::<f64>::initial(Domain::UnitSquare);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "vertices 4 triangles 2");
        assert_eq!(lines.len(), 1 + 4 + 2);
        assert_eq!(lines[6], "0 2 3");
    }
}

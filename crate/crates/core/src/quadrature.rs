//! Quadrature on the reference triangle and on intervals.
//!
//! Degrees 1, 2, 4 and 5 use symmetric rules; degree 3 reuses the degree 4
//! rule. From degree 6 upwards a collapsed (Duffy) tensor Gauss-Legendre
//! rule is used, which has positive weights but no rotational symmetry.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    /// Barycentric coordinates `(l0, l1, l2)`.
    pub points: Vec<[T; 3]>,
    /// Weights normalised to the reference measure: they sum to one.
    pub weights: Vec<T>,
    pub exactness_degree: usize,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub const MAX_TRIANGLE_DEGREE: usize = 20;

pub fn triangle_rule<T: Real>(degree: usize) -> Result<QuadratureRule<T>> {
    if degree == 0 || degree > MAX_TRIANGLE_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    let third = 1.0 / 3.0;
    let mut pts: Vec<[f64; 3]> = Vec::new();
    let mut wts: Vec<f64> = Vec::new();
    let orbit = |a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>| {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            pts.push(p);
            wts.push(w);
        }
    };
    match degree {
        1 => {
            pts.push([third; 3]);
            wts.push(1.0);
        }
        2 => orbit(1.0 / 6.0, 1.0 / 3.0, &mut pts, &mut wts),
        3 | 4 => {
            orbit(0.445_948_490_915_964_9, 0.223_381_589_678_011_47, &mut pts, &mut wts);
            orbit(0.091_576_213_509_770_74, 0.109_951_743_655_321_87, &mut pts, &mut wts);
        }
        5 => {
            let s15 = 15f64.sqrt();
            pts.push([third; 3]);
            wts.push(9.0 / 40.0);
            orbit((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0, &mut pts, &mut wts);
            orbit((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0, &mut pts, &mut wts);
        }
        _ => {
            // (u, v) in [0,1]^2 -> (x, y) = (u, (1-u) v), Jacobian (1-u).
            let n = (degree + 3) / 2;
            let (nodes, weights) = gauss_legendre_unit(n);
            for (&u, &wu) in nodes.iter().zip(&weights) {
                for (&v, &wv) in nodes.iter().zip(&weights) {
                    let x = u;
                    let y = (1.0 - u) * v;
                    pts.push([1.0 - x - y, x, y]);
                    wts.push(2.0 * wu * wv * (1.0 - u));
                }
            }
        }
    }
    Ok(QuadratureRule {
        points: pts.into_iter().map(|p| p.map(T::lit)).collect(),
        weights: wts.into_iter().map(T::lit).collect(),
        exactness_degree: degree,
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|&x| 0.5 * (x + 1.0)).collect(), w.iter().map(|&w| 0.5 * w).collect())
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss-Legendre integration of `f` over `[a, b]` with `n` points.
pub fn integrate_interval<T: Real>(a: T, b: T, n: usize, mut f: impl FnMut(T) -> T) -> T {
    let (x, w) = gauss_legendre(n);
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    x.iter().zip(&w).map(|(&xi, &wi)| T::lit(wi) * f(mid + half * T::lit(xi))).sum::<T>() * half
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn centroid_rule() {
        let q = triangle_rule::<f64>(1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.weights[0], 1.0);
        assert!(q.points[0].iter().all(|&l| (l - 1.0 / 3.0).abs() < 1e-16));
    }

    #[test]
    fn monomials_integrate_exactly() {
        for d in 1..=MAX_TRIANGLE_DEGREE {
            let q = triangle_rule::<f64>(d).unwrap();
            let wsum: f64 = q.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14, "degree {d}");
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for a in 0..=d {
                for b in 0..=(d - a) {
                    // reference triangle has area 1/2, weights are normalised to 1
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 =
                        q.points.iter().zip(&q.weights).map(|(l, w)| w * 0.5 * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                    assert!((approx - exact).abs() < 1e-14 * exact.max(1e-3), "d={d} a={a} b={b}: {approx} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert!(matches!(triangle_rule::<f64>(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(triangle_rule::<f64>(21), Err(Error::UnsupportedDegree(21))));
    }

    #[test]
    fn gauss_legendre_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
        let v = integrate_interval(0.0f64, 2.0, 5, |t| t * t);
        assert!((v - 8.0 / 3.0).abs() < 1e-14);
    }
}

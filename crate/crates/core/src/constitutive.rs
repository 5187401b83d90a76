//! Shifted power-law constitutive relations.
//!
//! With `phi(t) = int_0^t (kappa + s)^(p-2) s ds` the flux and the
//! quasi-norm transform are
//!
//! ```text
//! S(xi) = (kappa + |xi|)^(p-2) xi
//! V(xi) = (kappa + |xi|)^((p-2)/2) xi
//! ```
//!
//! and the shifted functions are `phi_a(t) = int_0^t (kappa + a + s)^(p-2) s ds`.

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, pow, sub, Mat2, Real, Vec2};

/// Jacobian regularisation used by the Newton solver.
pub const DEFAULT_EPS_REG: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PLaplaceParams<T> {
    p: T,
    kappa: T,
}

impl<T: Real> PLaplaceParams<T> {
    pub fn new(p: T, kappa: T) -> Result<Self> {
        if !(p > T::one() && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponent p = {p} must lie in (1, inf)")));
        }
        if !(kappa >= T::zero() && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("shift kappa = {kappa} must be >= 0")));
        }
        Ok(Self { p, kappa })
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn conjugate(&self) -> T {
        self.p / (self.p - T::one())
    }

    /// `(kappa + t)^e` with the zero-base limit taken as 0 for `e > 0`,
    /// 1 for `e = 0` and infinity for `e < 0`.
    #[inline]
    fn shifted_pow(&self, t: T, e: T) -> T {
        let base = self.kappa + t;
        if base > T::zero() {
            pow(base, e)
        } else if e > T::zero() {
            T::zero()
        } else if e == T::zero() {
            T::one()
        } else {
            T::infinity()
        }
    }

    /// Scalar coefficient `(kappa + t)^(p-2)`; zero-gradient callers must not
    /// multiply an infinite coefficient by a zero vector.
    #[inline]
    pub fn flux_coefficient(&self, t: T) -> T {
        self.shifted_pow(t, self.p - T::lit(2.0))
    }

    /// `phi(t)` (unshifted).
    pub fn phi(&self, t: T) -> T {
        phi_shifted(T::zero(), t, self)
    }

    /// `phi'(t) = (kappa + t)^(p-2) t`.
    pub fn phi_prime(&self, t: T) -> T {
        if t == T::zero() {
            return T::zero();
        }
        self.flux_coefficient(t) * t
    }

    /// `phi''(t) = (kappa + t)^(p-3) (kappa + (p-1) t)`.
    pub fn phi_second(&self, t: T) -> T {
        let pm1 = self.p - T::one();
        if self.kappa == T::zero() {
            return pm1 * pow(t, self.p - T::lit(2.0));
        }
        self.shifted_pow(t, self.p - T::lit(3.0)) * (self.kappa + pm1 * t)
    }
}

/// `S(xi) = (kappa + |xi|)^(p-2) xi`, continuous at `xi = 0`.
#[inline]
pub fn s_flux<T: Real>(xi: Vec2<T>, params: &PLaplaceParams<T>) -> Vec2<T> {
    let n = norm(xi);
    if n == T::zero() {
        return [T::zero(); 2];
    }
    let c = params.flux_coefficient(n);
    [c * xi[0], c * xi[1]]
}

/// `V(xi) = (kappa + |xi|)^((p-2)/2) xi`.
#[inline]
pub fn v_transform<T: Real>(xi: Vec2<T>, params: &PLaplaceParams<T>) -> Vec2<T> {
    let n = norm(xi);
    if n == T::zero() {
        return [T::zero(); 2];
    }
    let c = params.shifted_pow(n, (params.p - T::lit(2.0)) * T::lit(0.5));
    [c * xi[0], c * xi[1]]
}

/// Derivative of [`s_flux`]:
/// `a^(p-2) I + (p-2) a^(p-3) |xi| (xi (x) xi) / |xi|^2` with
/// `a = kappa + max(|xi|, eps_reg)`.
pub fn ds_jacobian<T: Real>(xi: Vec2<T>, params: &PLaplaceParams<T>, eps_reg: T) -> Result<Mat2<T>> {
    let n = norm(xi);
    let a = params.kappa + n.max(eps_reg);
    if a == T::zero() {
        if params.p < T::lit(2.0) {
            return Err(Error::SingularJacobian);
        }
        // p >= 2, kappa = 0 at xi = 0: the limit is 0 (p > 2) or I (p = 2)
        let d = if params.p == T::lit(2.0) { T::one() } else { T::zero() };
        return Ok([[d, T::zero()], [T::zero(), d]]);
    }
    let pm2 = params.p - T::lit(2.0);
    let lead = pow(a, pm2);
    if n == T::zero() {
        return Ok([[lead, T::zero()], [T::zero(), lead]]);
    }
    // (p-2) a^(p-3) |xi| / |xi|^2 = (p-2) a^(p-3) / |xi|
    let c = pm2 * lead / a / n;
    let off = c * xi[0] * xi[1];
    Ok([[lead + c * xi[0] * xi[0], off], [off, lead + c * xi[1] * xi[1]]])
}

/// Closed form of `phi_a(t) = int_0^t (kappa + a + s)^(p-2) s ds`.
pub fn phi_shifted<T: Real>(a: T, t: T, params: &PLaplaceParams<T>) -> T {
    let p = params.p;
    if t <= T::zero() {
        return T::zero();
    }
    let c = params.kappa + a;
    if c == T::zero() {
        return pow(t, p) / p;
    }
    // phi = c^p * g(x), g(x) = int_0^x (1+y)^(p-2) y dy, x = t / c
    let x = t / c;
    let g = if x < T::lit(0.125) {
        // binomial series: sum_k binom(p-2, k) x^(k+2) / (k+2)
        let mut sum = T::zero();
        let mut binom = T::one();
        let mut xp = x * x;
        for k in 0..60 {
            let kf = T::from_usize_lossy(k);
            let term = binom * xp / (kf + T::lit(2.0));
            sum += term;
            if term.abs() <= T::epsilon() * T::lit(1e-2) * sum.abs() {
                break;
            }
            binom = binom * (p - T::lit(2.0) - kf) / (kf + T::one());
            xp *= x;
        }
        sum
    } else {
        // ((1+x)^p - 1)/p - ((1+x)^(p-1) - 1)/(p-1)
        let l = x.ln_1p();
        (p * l).exp_m1() / p - ((p - T::one()) * l).exp_m1() / (p - T::one())
    };
    pow(c, p) * g
}

/// The four quantities compared by the equivalence lemma for a pair of
/// distinct gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivalenceQuantities<T> {
    /// `(S(P) - S(Q)) . (P - Q)`
    pub monotonicity: T,
    /// `|V(P) - V(Q)|^2`
    pub v_distance: T,
    /// `phi_{|P|}(|P - Q|)`
    pub shifted_phi: T,
    /// `phi''(|P| + |Q|) |P - Q|^2`
    pub second_derivative: T,
}

impl<T: Real> EquivalenceQuantities<T> {
    /// Ratios of the last three quantities against the first.
    pub fn ratios(&self) -> [T; 3] {
        [self.v_distance / self.monotonicity, self.shifted_phi / self.monotonicity, self.second_derivative / self.monotonicity]
    }
}

pub fn equivalence_ratios<T: Real>(p_vec: Vec2<T>, q_vec: Vec2<T>, params: &PLaplaceParams<T>) -> Result<EquivalenceQuantities<T>> {
    if p_vec == q_vec {
        return Err(Error::DegenerateInput("equivalence quantities need P != Q"));
    }
    let d = sub(p_vec, q_vec);
    let dn = norm(d);
    let ds = sub(s_flux(p_vec, params), s_flux(q_vec, params));
    let dv = sub(v_transform(p_vec, params), v_transform(q_vec, params));
    Ok(EquivalenceQuantities {
        monotonicity: dot(ds, d),
        v_distance: dot(dv, dv),
        shifted_phi: phi_shifted(norm(p_vec), dn, params),
        second_derivative: params.phi_second(norm(p_vec) + norm(q_vec)) * dn * dn,
    })
}

//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// 2D point or vector.
pub type Vec2<T> = [T; 2];

/// Symmetric 2x2 matrix stored row-major.
pub type Mat2<T> = [[T; 2]; 2];

#[inline]
pub fn dot<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm<T: Real>(a: Vec2<T>) -> T {
    let sq = a[0] * a[0] + a[1] * a[1];
    if sq >= T::min_positive_value() && sq.is_finite() {
        sq.sqrt()
    } else {
        a[0].hypot(a[1])
    }
}

/// `x^e` for `x >= 0`. For `x > 0`, half-integer exponents up to 8 in magnitude, which
/// cover the common `p` values, go through `powi` and `sqrt`.
#[inline]
pub fn pow<T: Real>(x: T, e: T) -> T {
    let twice = e + e;
    if x > T::zero() && twice.abs() <= T::lit(16.0) && twice == twice.round() {
        let k = twice.to_i32().expect("small integer");
        let whole = x.powi(k.div_euclid(2));
        return if k.rem_euclid(2) == 1 { whole * x.sqrt() } else { whole };
    }
    x.powf(e)
}

#[inline]
pub fn sub<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale<T: Real>(s: T, a: Vec2<T>) -> Vec2<T> {
    [s * a[0], s * a[1]]
}

#[inline]
pub fn mat_vec<T: Real>(m: &Mat2<T>, v: Vec2<T>) -> Vec2<T> {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

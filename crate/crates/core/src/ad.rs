//! Forward-mode automatic differentiation.
//!
//! Vector fields are written once against [`Scalar`] and evaluated either on
//! plain `f64` or on (possibly nested) [`Dual`] numbers. Nesting gives exact
//! higher derivatives: a bracket of brackets evaluates its inner fields on
//! `Dual<Dual<f64>>` without any symbolic expansion.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Real-like number type the vector fields are generic over.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_f64(v: f64) -> Self;

    /// Innermost real value.
    fn re(&self) -> f64;

    fn exp(self) -> Self;

    fn ln(self) -> Self;

    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return Self::one() / self.powi(-n);
        }
        let mut acc = Self::one();
        let mut base = self;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        acc
    }

    /// Real power. Integer exponents go through `powi` and accept any sign
    /// of the base; fractional exponents use `exp(e ln x)` and need `x > 0`.
    fn powf(self, e: f64) -> Self {
        if e.fract() == 0.0 && e.abs() <= 64.0 {
            self.powi(e as i32)
        } else {
            (self.ln() * Self::from_f64(e)).exp()
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        if e.fract() == 0.0 && e.abs() <= 64.0 {
            f64::powi(self, e as i32)
        } else {
            f64::powf(self, e)
        }
    }
}

/// Dual number `v + d ε` with `ε² = 0`, generic over its component type so
/// it can be nested.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Self { v, d }
    }

    pub fn constant(v: T) -> Self {
        Self { v, d: T::zero() }
    }

    pub fn variable(v: T) -> Self {
        Self { v, d: T::one() }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, self.d + o.d)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, self.d - o.d)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.v;
        let q = self.v * inv;
        Self::new(q, (self.d - q * o.d) * inv)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.v, -self.d)
    }
}

impl<T: Scalar> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }

    fn re(&self) -> f64 {
        self.v.re()
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        Self::new(e, self.d * e)
    }

    fn ln(self) -> Self {
        Self::new(self.v.ln(), self.d / self.v)
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Self::new(s, self.d / (T::from_f64(2.0) * s))
    }

    fn powf(self, e: f64) -> Self {
        if e == 0.0 {
            return Self::one();
        }
        if e.fract() == 0.0 && e.abs() <= 64.0 {
            return self.powi(e as i32);
        }
        let pm1 = self.v.powf(e - 1.0);
        Self::new(pm1 * self.v, self.d * T::from_f64(e) * pm1)
    }
}

/// Seeds direction `dir` of a point: the returned duals carry the unit tangent
/// `e_dir`.
pub fn seed<T: Scalar, const N: usize>(q: &[T; N], dir: usize) -> [Dual<T>; N] {
    std::array::from_fn(|i| {
        if i == dir {
            Dual::variable(q[i])
        } else {
            Dual::constant(q[i])
        }
    })
}

/// Lifts a point to duals with the given tangent.
pub fn seed_with<T: Scalar, const N: usize>(q: &[T; N], tangent: &[T; N]) -> [Dual<T>; N] {
    std::array::from_fn(|i| Dual::new(q[i], tangent[i]))
}

pub fn values<T: Scalar, const N: usize>(v: &[Dual<T>; N]) -> [T; N] {
    std::array::from_fn(|i| v[i].v)
}

pub fn tangents<T: Scalar, const N: usize>(v: &[Dual<T>; N]) -> [T; N] {
    std::array::from_fn(|i| v[i].d)
}

/// Converts an `f64` array to any scalar type.
pub fn lift<S: Scalar, const N: usize>(q: &[f64; N]) -> [S; N] {
    std::array::from_fn(|i| S::from_f64(q[i]))
}

pub fn real_parts<S: Scalar, const N: usize>(q: &[S; N]) -> [f64; N] {
    std::array::from_fn(|i| q[i].re())
}

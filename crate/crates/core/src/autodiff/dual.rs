//! Forward-mode dual numbers.
//!
//! [`Dual1`] carries one directional derivative, [`Dual2`] carries two seed
//! directions and their mixed second derivative (a hyper-dual number). Both
//! are generic over the underlying [`Scalar`], so they nest: a `Dual1<Var>`
//! records spatial derivatives on a reverse-mode tape, and
//! `Dual1<Dual1<f64>>` yields second derivatives of first derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{sign_of, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual1<T> {
    pub value: T,
    pub tangent: T,
}

impl<T: Scalar> Dual1<T> {
    pub fn new(value: T, tangent: T) -> Self {
        Dual1 { value, tangent }
    }

    pub fn constant(value: T) -> Self {
        Dual1 {
            value,
            tangent: T::zero(),
        }
    }

    pub fn variable(value: T) -> Self {
        Dual1 {
            value,
            tangent: T::one(),
        }
    }

    #[inline]
    fn chain(self, f0: T, f1: T) -> Self {
        Dual1 {
            value: f0,
            tangent: self.tangent * f1,
        }
    }
}

impl<T: Scalar> Add for Dual1<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Dual1::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl<T: Scalar> Sub for Dual1<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Dual1::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl<T: Scalar> Mul for Dual1<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Dual1::new(
            self.value * rhs.value,
            self.tangent * rhs.value + self.value * rhs.tangent,
        )
    }
}

impl<T: Scalar> Div for Dual1<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        Dual1::new(q, (self.tangent - q * rhs.tangent) / rhs.value)
    }
}

impl<T: Scalar> Neg for Dual1<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual1::new(-self.value, -self.tangent)
    }
}

impl<T: Scalar> Add<f64> for Dual1<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        Dual1::new(self.value + rhs, self.tangent)
    }
}

impl<T: Scalar> Sub<f64> for Dual1<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        Dual1::new(self.value - rhs, self.tangent)
    }
}

impl<T: Scalar> Mul<f64> for Dual1<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Dual1::new(self.value * rhs, self.tangent * rhs)
    }
}

impl<T: Scalar> Div<f64> for Dual1<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        Dual1::new(self.value / rhs, self.tangent / rhs)
    }
}

impl<T: Scalar> Scalar for Dual1<T> {
    fn from_f64(v: f64) -> Self {
        Dual1::constant(T::from_f64(v))
    }

    fn value(&self) -> f64 {
        self.value.value()
    }

    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.chain(t, -(t * t) + 1.0)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.value.ln(), self.value.recip())
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, (s * 2.0).recip())
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        self.chain(self.value.powi(n), self.value.powi(n - 1) * n as f64)
    }

    fn abs(self) -> Self {
        self.chain(self.value.abs(), T::from_f64(sign_of(self.value.value())))
    }

    fn recip(self) -> Self {
        let r = self.value.recip();
        self.chain(r, -(r * r))
    }
}

/// Hyper-dual number with seeds along two directions.
///
/// For `f` evaluated at `x + e1·h1 + e2·h2` (with `e1² = e2² = 0`),
/// `t1 = ∂f/∂h1`, `t2 = ∂f/∂h2` and `t12 = ∂²f/∂h1∂h2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2<T> {
    pub value: T,
    pub t1: T,
    pub t2: T,
    pub t12: T,
}

impl<T: Scalar> Dual2<T> {
    pub fn new(value: T, t1: T, t2: T, t12: T) -> Self {
        Dual2 { value, t1, t2, t12 }
    }

    pub fn constant(value: T) -> Self {
        let z = T::zero();
        Dual2::new(value, z, z, z)
    }

    #[inline]
    fn chain(self, f0: T, f1: T, f2: T) -> Self {
        Dual2 {
            value: f0,
            t1: self.t1 * f1,
            t2: self.t2 * f1,
            t12: self.t12 * f1 + self.t1 * self.t2 * f2,
        }
    }
}

impl<T: Scalar> Add for Dual2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Dual2::new(
            self.value + rhs.value,
            self.t1 + rhs.t1,
            self.t2 + rhs.t2,
            self.t12 + rhs.t12,
        )
    }
}

impl<T: Scalar> Sub for Dual2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Dual2::new(
            self.value - rhs.value,
            self.t1 - rhs.t1,
            self.t2 - rhs.t2,
            self.t12 - rhs.t12,
        )
    }
}

impl<T: Scalar> Mul for Dual2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Dual2::new(
            self.value * rhs.value,
            self.t1 * rhs.value + self.value * rhs.t1,
            self.t2 * rhs.value + self.value * rhs.t2,
            self.t12 * rhs.value + self.t1 * rhs.t2 + self.t2 * rhs.t1 + self.value * rhs.t12,
        )
    }
}

impl<T: Scalar> Div for Dual2<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        let q1 = (self.t1 - q * rhs.t1) / rhs.value;
        let q2 = (self.t2 - q * rhs.t2) / rhs.value;
        let q12 = (self.t12 - q1 * rhs.t2 - q2 * rhs.t1 - q * rhs.t12) / rhs.value;
        Dual2::new(q, q1, q2, q12)
    }
}

impl<T: Scalar> Neg for Dual2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual2::new(-self.value, -self.t1, -self.t2, -self.t12)
    }
}

impl<T: Scalar> Add<f64> for Dual2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        Dual2 {
            value: self.value + rhs,
            ..self
        }
    }
}

impl<T: Scalar> Sub<f64> for Dual2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        Dual2 {
            value: self.value - rhs,
            ..self
        }
    }
}

impl<T: Scalar> Mul<f64> for Dual2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Dual2::new(self.value * rhs, self.t1 * rhs, self.t2 * rhs, self.t12 * rhs)
    }
}

impl<T: Scalar> Div<f64> for Dual2<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        Dual2::new(self.value / rhs, self.t1 / rhs, self.t2 / rhs, self.t12 / rhs)
    }
}

impl<T: Scalar> Scalar for Dual2<T> {
    fn from_f64(v: f64) -> Self {
        Dual2::constant(T::from_f64(v))
    }

    fn value(&self) -> f64 {
        self.value.value()
    }

    fn sin(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        let d1 = -(t * t) + 1.0;
        self.chain(t, d1, t * d1 * -2.0)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let r = self.value.recip();
        self.chain(self.value.ln(), r, -(r * r))
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        let d1 = (s * 2.0).recip();
        self.chain(s, d1, -(d1 / (self.value * 2.0)))
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => {
                let nf = n as f64;
                self.chain(
                    self.value.powi(n),
                    self.value.powi(n - 1) * nf,
                    self.value.powi(n - 2) * (nf * (nf - 1.0)),
                )
            }
        }
    }

    fn abs(self) -> Self {
        self.chain(
            self.value.abs(),
            T::from_f64(sign_of(self.value.value())),
            T::zero(),
        )
    }

    fn recip(self) -> Self {
        let r = self.value.recip();
        self.chain(r, -(r * r), r * r * r * 2.0)
    }
}

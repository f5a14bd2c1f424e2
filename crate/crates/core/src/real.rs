//! Scalar abstraction used by every field evaluation.
//!
//! Fields are written once, generically over [`Real`], and evaluated either
//! on plain `f64` or on (possibly nested) forward-mode [`Dual`] numbers.
//! Nesting `Dual<Dual<f64>>` yields exact mixed second partials, and one more
//! level gives third partials, which is what the divergence of the Einstein
//! tensor needs.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    /// Innermost real part.
    fn re(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;

    fn abs(self) -> Self {
        if self.re() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
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
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

/// First-order dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    /// A seeded variable: value `re` with unit tangent.
    pub fn var(re: T) -> Self {
        Dual { re, eps: T::one() }
    }

    pub fn constant(re: T) -> Self {
        Dual { re, eps: T::zero() }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let q = self.re * inv;
        Dual::new(q, (self.eps - q * o.eps) * inv)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Real> Real for Dual<T> {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual::constant(T::cst(v))
    }
    #[inline]
    fn re(self) -> f64 {
        self.re.re()
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / s.scale(2.0))
    }
    fn powi(self, k: i32) -> Self {
        match k {
            0 => Self::one(),
            1 => self,
            _ => Dual::new(self.re.powi(k), self.eps * self.re.powi(k - 1).scale(k as f64)),
        }
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        Dual::new(self.re.scale(c), self.eps.scale(c))
    }
}

pub type Dual2<T> = Dual<Dual<T>>;

/// Lift a slice of reals into duals seeded along the coordinate `dir`.
pub fn seed<T: Real>(x: &[T], dir: usize) -> Vec<Dual<T>> {
    x.iter()
        .enumerate()
        .map(|(k, &v)| if k == dir { Dual::var(v) } else { Dual::constant(v) })
        .collect()
}

/// Seed along `i` (inner) and `j` (outer) for a mixed second partial.
pub fn seed2<T: Real>(x: &[T], i: usize, j: usize) -> Vec<Dual2<T>> {
    x.iter()
        .enumerate()
        .map(|(k, &v)| {
            let inner = Dual::new(v, if k == i { T::one() } else { T::zero() });
            let outer = Dual::new(if k == j { T::one() } else { T::zero() }, T::zero());
            Dual::new(inner, outer)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Dual::var(2.0);
        let y = x * x * x;
        assert_eq!(y.re, 8.0);
        assert_eq!(y.eps, 12.0);
        let z = Dual::<f64>::cst(1.0) / x;
        assert!((z.eps + 0.25).abs() < 1e-15);
    }

    #[test]
    fn nested_duals_give_mixed_partials() {
        // f(a, b) = sin(a) * b^2 at (0.3, 1.5); d2f/da db = 2 b cos(a)
        let x = seed2(&[0.3_f64, 1.5], 0, 1);
        let f = x[0].sin() * x[1].powi(2);
        assert!((f.eps.eps - 2.0 * 1.5 * 0.3_f64.cos()).abs() < 1e-14);
        assert!((f.re.eps - 1.5 * 1.5 * 0.3_f64.cos()).abs() < 1e-14);
        assert!((f.eps.re - 2.0 * 1.5 * 0.3_f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn transcendental_derivatives() {
        let x = Dual::var(0.7_f64);
        assert!((x.exp().eps - 0.7_f64.exp()).abs() < 1e-15);
        assert!((x.ln().eps - 1.0 / 0.7).abs() < 1e-14);
        assert!((x.sqrt().eps - 0.5 / 0.7_f64.sqrt()).abs() < 1e-14);
        assert!((x.cos().eps + 0.7_f64.sin()).abs() < 1e-15);
    }
}

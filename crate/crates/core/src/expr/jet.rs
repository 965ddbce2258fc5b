//! Second-order truncated Taylor arithmetic.
//!
//! A [`Jet2`] carries a scalar value together with its gradient and Hessian
//! with respect to the `n` chart coordinates. Every operation propagates all
//! three exactly (up to rounding), so composing jets yields exact first and
//! second derivatives of the composed function.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Index of `(i, j)` in a packed upper-triangular `n x n` array.
#[inline]
fn tri(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Value, gradient and symmetric Hessian of a scalar function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    value: f64,
    grad: Vec<f64>,
    /// Packed upper triangle, so symmetry holds by construction.
    hess: Vec<f64>,
}

impl Jet2 {
    pub fn constant(n: usize, value: f64) -> Self {
        Jet2 {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; n * (n + 1) / 2],
        }
    }

    /// The coordinate function `x_{index}` (0-based) evaluated at `value`.
    pub fn variable(n: usize, index: usize, value: f64) -> Self {
        let mut jet = Jet2::constant(n, value);
        jet.grad[index] = 1.0;
        jet
    }

    /// Builds a jet from a full Hessian; only the upper triangle is read.
    pub fn from_parts(value: f64, grad: Vec<f64>, hessian: impl Fn(usize, usize) -> f64) -> Self {
        let n = grad.len();
        let mut hess = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            for j in i..n {
                hess[tri(n, i, j)] = hessian(i, j);
            }
        }
        Jet2 { value, grad, hess }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn partial(&self, i: usize) -> f64 {
        self.grad[i]
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        self.hess[tri(self.dim(), i, j)]
    }

    pub fn hessian_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.hessian(i, j)).collect()).collect()
    }

    /// Composition `f(self)` given `f`, `f'` and `f''` at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.dim();
        let grad = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; self.hess.len()];
        for i in 0..n {
            for j in i..n {
                let k = tri(n, i, j);
                hess[k] = f1 * self.hess[k] + f2 * self.grad[i] * self.grad[j];
            }
        }
        Jet2 { value: f0, grad, hess }
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            value: c * self.value,
            grad: self.grad.iter().map(|g| c * g).collect(),
            hess: self.hess.iter().map(|h| c * h).collect(),
        }
    }

    pub fn offset(&self, c: f64) -> Jet2 {
        let mut out = self.clone();
        out.value += c;
        out
    }

    pub fn recip(&self) -> Jet2 {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(&self) -> Jet2 {
        let t = self.value.tan();
        let d = 1.0 + t * t;
        self.chain(t, d, 2.0 * t * d)
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    /// Natural logarithm; the caller guarantees a positive value.
    pub fn ln(&self) -> Jet2 {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    /// Square root; the caller guarantees a positive value.
    pub fn sqrt(&self) -> Jet2 {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn sinh(&self) -> Jet2 {
        let (sh, ch) = (self.value.sinh(), self.value.cosh());
        self.chain(sh, ch, sh)
    }

    pub fn cosh(&self) -> Jet2 {
        let (sh, ch) = (self.value.sinh(), self.value.cosh());
        self.chain(ch, sh, ch)
    }

    pub fn tanh(&self) -> Jet2 {
        let t = self.value.tanh();
        let d = 1.0 - t * t;
        self.chain(t, d, -2.0 * t * d)
    }

    pub fn atan(&self) -> Jet2 {
        let v = self.value;
        let d = 1.0 / (1.0 + v * v);
        self.chain(v.atan(), d, -2.0 * v * d * d)
    }

    /// `self^c` for a constant exponent. Integer exponents accept any base;
    /// the derivative coefficients vanish identically where `c (c - 1) = 0`.
    pub fn powf(&self, c: f64) -> Jet2 {
        let v = self.value;
        if c == 0.0 {
            return Jet2::constant(self.dim(), 1.0);
        }
        if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
            let k = c as i32;
            let f0 = v.powi(k);
            let f1 = c * v.powi(k - 1);
            let f2 = if k == 1 { 0.0 } else { c * (c - 1.0) * v.powi(k - 2) };
            return self.chain(f0, f1, f2);
        }
        self.chain(v.powf(c), c * v.powf(c - 1.0), c * (c - 1.0) * v.powf(c - 2.0))
    }

    /// `self^w` for a jet exponent, computed as `exp(w ln self)`.
    pub fn pow(&self, w: &Jet2) -> Jet2 {
        (&self.ln() * w).exp()
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value + rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value - rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        let n = self.dim();
        let (u, v) = (self.value, rhs.value);
        let grad = self
            .grad
            .iter()
            .zip(&rhs.grad)
            .map(|(du, dv)| du * v + u * dv)
            .collect();
        let mut hess = vec![0.0; self.hess.len()];
        for i in 0..n {
            for j in i..n {
                let k = tri(n, i, j);
                hess[k] = self.hess[k] * v + u * rhs.hess[k] + self.grad[i] * rhs.grad[j] + self.grad[j] * rhs.grad[i];
            }
        }
        Jet2 {
            value: u * v,
            grad,
            hess,
        }
    }
}

impl Div for &Jet2 {
    type Output = Jet2;
    fn div(self, rhs: &Jet2) -> Jet2 {
        self * &rhs.recip()
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet2 {
            type Output = Jet2;
            fn $m(self, rhs: Jet2) -> Jet2 {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet2> for Jet2 {
            type Output = Jet2;
            fn $m(self, rhs: &Jet2) -> Jet2 {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet2> for &Jet2 {
            type Output = Jet2;
            fn $m(self, rhs: Jet2) -> Jet2 {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

/// Sum of a sequence of jets of dimension `n`.
pub fn sum_jets<'a>(n: usize, jets: impl IntoIterator<Item = &'a Jet2>) -> Jet2 {
    jets.into_iter().fold(Jet2::constant(n, 0.0), |acc, j| &acc + j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_index_covers_triangle() {
        let n = 4;
        let mut seen = vec![false; n * (n + 1) / 2];
        for i in 0..n {
            for j in i..n {
                let k = tri(n, i, j);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, tri(n, j, i));
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn bilinear_product() {
        let x = Jet2::variable(2, 0, 3.0);
        let y = Jet2::variable(2, 1, 5.0);
        let p = &x * &y;
        assert_eq!(p.value(), 15.0);
        assert_eq!(p.gradient(), &[5.0, 3.0]);
        assert_eq!(p.hessian_matrix(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn integer_power_at_zero_is_finite() {
        let x = Jet2::variable(1, 0, 0.0);
        let sq = x.powf(2.0);
        assert_eq!((sq.value(), sq.partial(0), sq.hessian(0, 0)), (0.0, 0.0, 2.0));
        let lin = x.powf(1.0);
        assert_eq!((lin.value(), lin.partial(0), lin.hessian(0, 0)), (0.0, 1.0, 0.0));
    }

    #[test]
    fn quotient_rule() {
        // f = x / y at (2, 4): fx = 1/4, fy = -1/8, fxx = 0, fxy = -1/16, fyy = 2x/y^3 = 1/16
        let x = Jet2::variable(2, 0, 2.0);
        let y = Jet2::variable(2, 1, 4.0);
        let q = &x / &y;
        assert!((q.value() - 0.5).abs() < 1e-15);
        assert!((q.partial(0) - 0.25).abs() < 1e-15);
        assert!((q.partial(1) + 0.125).abs() < 1e-15);
        assert!(q.hessian(0, 0).abs() < 1e-15);
        assert!((q.hessian(0, 1) + 1.0 / 16.0).abs() < 1e-15);
        assert!((q.hessian(1, 1) - 1.0 / 16.0).abs() < 1e-15);
    }
}

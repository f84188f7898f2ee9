//! Number types a profile expression can be evaluated over: real depths,
//! complex depths (for contour-deformed integration paths) and truncated
//! Taylor series (for local expansions about a critical layer).

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Scalar for Complex64 {
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn tanh(self) -> Self {
        // the textbook formula overflows to NaN for large real parts
        if self.re.abs() > 20.0 {
            let sign = self.re.signum();
            let decay = (-2.0 * self.re.abs()).exp();
            let twist = Complex64::new(0.0, 2.0 * sign * self.im).exp();
            return Complex64::new(sign, 0.0) * (Complex64::new(1.0, 0.0) - 2.0 * decay * twist);
        }
        Complex64::tanh(self)
    }
    fn powi(self, n: i32) -> Self {
        Complex64::powi(&self, n)
    }
}

/// Number of Taylor coefficients carried by [`Jet`].
pub const JET_LEN: usize = 40;

/// Truncated Taylor series `sum_n coef[n] * t^n` about a real point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub coef: [f64; JET_LEN],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut coef = [0.0; JET_LEN];
        coef[0] = v;
        Self { coef }
    }

    /// The identity series `x0 + t`.
    pub fn variable(x0: f64) -> Self {
        let mut coef = [0.0; JET_LEN];
        coef[0] = x0;
        coef[1] = 1.0;
        Self { coef }
    }

    /// Coefficients of `self(t) / t`, assuming the constant term vanishes.
    pub fn shift_down(&self) -> Self {
        let mut coef = [0.0; JET_LEN];
        coef[..JET_LEN - 1].copy_from_slice(&self.coef[1..]);
        Self { coef }
    }
}

impl Add for Jet {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.coef.iter_mut().zip(rhs.coef).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Jet {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.coef.iter_mut().zip(rhs.coef).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for Jet {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.coef.iter_mut().for_each(|a| *a = -*a);
        self
    }
}

impl Mul for Jet {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [0.0; JET_LEN];
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = (0..=n).map(|j| self.coef[j] * rhs.coef[n - j]).sum();
        }
        Self { coef: out }
    }
}

impl Div for Jet {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut out = [0.0; JET_LEN];
        for n in 0..JET_LEN {
            let acc: f64 = (1..=n).map(|j| rhs.coef[j] * out[n - j]).sum();
            out[n] = (self.coef[n] - acc) / rhs.coef[0];
        }
        Self { coef: out }
    }
}

impl Scalar for Jet {
    fn from_f64(v: f64) -> Self {
        Jet::constant(v)
    }

    fn exp(self) -> Self {
        let a = &self.coef;
        let mut e = [0.0; JET_LEN];
        e[0] = a[0].exp();
        for n in 1..JET_LEN {
            let acc: f64 = (1..=n).map(|j| j as f64 * a[j] * e[n - j]).sum();
            e[n] = acc / n as f64;
        }
        Self { coef: e }
    }

    fn sin(self) -> Self {
        sin_cos(&self).0
    }

    fn cos(self) -> Self {
        sin_cos(&self).1
    }

    fn tanh(self) -> Self {
        // t' = (1 - t^2) a'
        let a = &self.coef;
        let mut t = [0.0; JET_LEN];
        let mut w = [0.0; JET_LEN];
        t[0] = a[0].tanh();
        w[0] = 1.0 - t[0] * t[0];
        for n in 1..JET_LEN {
            let acc: f64 = (1..=n).map(|j| j as f64 * a[j] * w[n - j]).sum();
            t[n] = acc / n as f64;
            let sq: f64 = (0..=n).map(|i| t[i] * t[n - i]).sum();
            w[n] = -sq;
        }
        Self { coef: t }
    }

    fn powi(self, n: i32) -> Self {
        let mut acc = Jet::constant(1.0);
        for _ in 0..n.unsigned_abs() {
            acc = acc * self;
        }
        if n < 0 {
            Jet::constant(1.0) / acc
        } else {
            acc
        }
    }
}

fn sin_cos(x: &Jet) -> (Jet, Jet) {
    let a = &x.coef;
    let mut s = [0.0; JET_LEN];
    let mut c = [0.0; JET_LEN];
    s[0] = a[0].sin();
    c[0] = a[0].cos();
    for n in 1..JET_LEN {
        let ds: f64 = (1..=n).map(|j| j as f64 * a[j] * c[n - j]).sum();
        let dc: f64 = (1..=n).map(|j| j as f64 * a[j] * s[n - j]).sum();
        s[n] = ds / n as f64;
        c[n] = -dc / n as f64;
    }
    (Jet { coef: s }, Jet { coef: c })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_exp_matches_factorials() {
        let e = Jet::variable(0.0).exp();
        let mut fact = 1.0;
        for n in 0..12 {
            if n > 0 {
                fact *= n as f64;
            }
            assert!((e.coef[n] - 1.0 / fact).abs() < 1e-15);
        }
    }

    #[test]
    fn jet_tanh_derivatives() {
        let x0: f64 = 0.37;
        let t = Jet::variable(x0).tanh();
        let th = x0.tanh();
        let sech2 = 1.0 - th * th;
        assert!((t.coef[1] - sech2).abs() < 1e-15);
        assert!((t.coef[2] - (-th * sech2)).abs() < 1e-15);
    }

    #[test]
    fn jet_division_inverts_multiplication() {
        let a = Jet::variable(0.4).sin() + Jet::constant(2.0);
        let b = Jet::variable(0.4).exp();
        let back = (a * b) / b;
        for n in 0..JET_LEN {
            assert!((back.coef[n] - a.coef[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_tanh_far_from_origin() {
        let z = Complex64::new(30.0, 0.4);
        let v = Scalar::tanh(z);
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }
}

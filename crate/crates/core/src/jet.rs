//! Second-order forward-mode differentiation in two variables.
//!
//! Hamiltonians, one-form coefficients and densities are written once as
//! closures over [`Jet2`]; evaluating them on seeded jets yields value,
//! gradient and Hessian in one pass.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

/// Value, gradient and Hessian `[h_uu, h_uv, h_vv]` of a scalar in two variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d: [f64; 2],
    pub h: [f64; 3],
}

/// A smooth scalar field in chart coordinates.
pub type ChartField = Arc<dyn Fn(Jet2, Jet2) -> Jet2 + Send + Sync>;

/// A smooth time-dependent scalar field in chart coordinates.
pub type TimeField = Arc<dyn Fn(f64, Jet2, Jet2) -> Jet2 + Send + Sync>;

pub fn chart_field<F>(f: F) -> ChartField
where
    F: Fn(Jet2, Jet2) -> Jet2 + Send + Sync + 'static,
{
    Arc::new(f)
}

pub fn time_field<F>(f: F) -> TimeField
where
    F: Fn(f64, Jet2, Jet2) -> Jet2 + Send + Sync + 'static,
{
    Arc::new(f)
}

impl Jet2 {
    pub fn constant(c: f64) -> Self {
        Jet2 { v: c, d: [0.0; 2], h: [0.0; 3] }
    }

    pub fn var_u(u: f64) -> Self {
        Jet2 { v: u, d: [1.0, 0.0], h: [0.0; 3] }
    }

    pub fn var_v(v: f64) -> Self {
        Jet2 { v, d: [0.0, 1.0], h: [0.0; 3] }
    }

    /// Seeds both coordinates at `(u, v)`.
    pub fn seed(u: f64, v: f64) -> (Self, Self) {
        (Self::var_u(u), Self::var_v(v))
    }

    /// Applies a scalar function with derivatives `f0, f1, f2` at `self.v`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let [a, b] = self.d;
        Jet2 {
            v: f0,
            d: [f1 * a, f1 * b],
            h: [
                f1 * self.h[0] + f2 * a * a,
                f1 * self.h[1] + f2 * a * b,
                f1 * self.h[2] + f2 * b * b,
            ],
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let x = self.v;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn recip(self) -> Self {
        let x = self.v;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn powi(self, n: i32) -> Self {
        let x = self.v;
        match n {
            0 => Jet2::constant(1.0),
            1 => self,
            _ => {
                let nf = n as f64;
                self.chain(x.powi(n), nf * x.powi(n - 1), nf * (nf - 1.0) * x.powi(n - 2))
            }
        }
    }

    pub fn powf(self, p: f64) -> Self {
        if p.fract() == 0.0 && p.abs() < 64.0 {
            return self.powi(p as i32);
        }
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    /// General power `self^e` with a non-constant exponent.
    pub fn pow(self, e: Jet2) -> Self {
        if e.d == [0.0; 2] && e.h == [0.0; 3] {
            return self.powf(e.v);
        }
        (e * self.ln()).exp()
    }

    pub fn gradient(&self) -> [f64; 2] {
        self.d
    }
}

impl From<f64> for Jet2 {
    fn from(c: f64) -> Self {
        Jet2::constant(c)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            v: -self.v,
            d: [-self.d[0], -self.d[1]],
            h: [-self.h[0], -self.h[1], -self.h[2]],
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let (a, b) = (self, o);
        Jet2 {
            v: a.v * b.v,
            d: [a.v * b.d[0] + b.v * a.d[0], a.v * b.d[1] + b.v * a.d[1]],
            h: [
                a.v * b.h[0] + b.v * a.h[0] + 2.0 * a.d[0] * b.d[0],
                a.v * b.h[1] + b.v * a.h[1] + a.d[0] * b.d[1] + a.d[1] * b.d[0],
                a.v * b.h[2] + b.v * a.h[2] + 2.0 * a.d[1] * b.d[1],
            ],
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

macro_rules! scalar_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<f64> for Jet2 {
            type Output = Jet2;
            fn $m(self, o: f64) -> Jet2 { $tr::$m(self, Jet2::constant(o)) }
        }
        impl $tr<Jet2> for f64 {
            type Output = Jet2;
            fn $m(self, o: Jet2) -> Jet2 { $tr::$m(Jet2::constant(self), o) }
        }
    )*};
}
scalar_ops!(Add add, Sub sub, Mul mul, Div div);

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(Jet2, Jet2) -> Jet2, u: f64, v: f64) {
        let (ju, jv) = Jet2::seed(u, v);
        let j = f(ju, jv);
        let val = |a: f64, b: f64| f(Jet2::constant(a), Jet2::constant(b)).v;
        let h = 1e-4;
        let du = (val(u + h, v) - val(u - h, v)) / (2.0 * h);
        let dv = (val(u, v + h) - val(u, v - h)) / (2.0 * h);
        assert!((j.d[0] - du).abs() < 1e-7, "d_u {} vs {}", j.d[0], du);
        assert!((j.d[1] - dv).abs() < 1e-7, "d_v {} vs {}", j.d[1], dv);
        let g = |a: f64, b: f64| {
            let (x, y) = Jet2::seed(a, b);
            f(x, y).d
        };
        let huu = (g(u + h, v)[0] - g(u - h, v)[0]) / (2.0 * h);
        let huv = (g(u, v + h)[0] - g(u, v - h)[0]) / (2.0 * h);
        let hvv = (g(u, v + h)[1] - g(u, v - h)[1]) / (2.0 * h);
        assert!((j.h[0] - huu).abs() < 1e-6);
        assert!((j.h[1] - huv).abs() < 1e-6);
        assert!((j.h[2] - hvv).abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_check(|x, y| x * y + (x * 2.0).sin() * y.cos(), 0.3, -0.7);
        fd_check(|x, y| (x * x + y * y).exp() / (1.0 + x * x), 0.4, 0.2);
        fd_check(|x, y| (x * x + y * y + 1.0).sqrt().ln() - y.powi(3), 0.1, 0.9);
        fd_check(|x, y| (x + 2.0).pow(y), 0.5, 1.3);
        fd_check(|x, y| (x + 2.0).powf(2.5) * y.recip(), 0.5, 1.3);
    }
}

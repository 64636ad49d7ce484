//! Forward-mode dual numbers with a fixed number of tangent slots.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Tangent slots: up to four spatial coordinates plus time.
pub const DUAL_WIDTH: usize = 5;
/// Slot reserved for the time variable `t`.
pub const TIME_SLOT: usize = DUAL_WIDTH - 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub du: [f64; DUAL_WIDTH],
}

impl Dual {
    pub const fn constant(re: f64) -> Self {
        Self {
            re,
            du: [0.0; DUAL_WIDTH],
        }
    }

    /// Independent variable seeded in tangent slot `slot`.
    pub fn var(re: f64, slot: usize) -> Self {
        let mut du = [0.0; DUAL_WIDTH];
        du[slot] = 1.0;
        Self { re, du }
    }

    fn chain(self, f: f64, df: f64) -> Self {
        Self {
            re: f,
            du: self.du.map(|d| df * d),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.du.iter().all(|d| d.is_finite())
    }
}

/// Scalars an expression can be evaluated over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;
    fn re(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn powf(self, p: Self) -> Self {
        (p * self.ln()).exp()
    }
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: Self) -> Self {
        f64::powf(self, p)
    }
}

impl Scalar for Dual {
    fn from_f64(c: f64) -> Self {
        Dual::constant(c)
    }
    fn re(&self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual::constant(1.0),
            1 => self,
            _ => self.chain(self.re.powi(n), n as f64 * self.re.powi(n - 1)),
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        let mut du = self.du;
        for (d, e) in du.iter_mut().zip(o.du) {
            *d += e;
        }
        Dual { re: self.re + o.re, du }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        let mut du = self.du;
        for (d, e) in du.iter_mut().zip(o.du) {
            *d -= e;
        }
        Dual { re: self.re - o.re, du }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let mut du = [0.0; DUAL_WIDTH];
        for k in 0..DUAL_WIDTH {
            du[k] = self.du[k] * o.re + self.re * o.du[k];
        }
        Dual { re: self.re * o.re, du }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.re;
        let re = self.re * inv;
        let mut du = [0.0; DUAL_WIDTH];
        for k in 0..DUAL_WIDTH {
            du[k] = (self.du[k] - re * o.du[k]) * inv;
        }
        Dual { re, du }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            re: -self.re,
            du: self.du.map(|d| -d),
        }
    }
}

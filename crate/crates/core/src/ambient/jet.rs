//! Second-order forward-mode scalars on R³.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to the three chart coordinates. Every ambient field is written
//! once as an expression in jets, and the exact first and second partials
//! fall out of the arithmetic.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 3],
    pub dd: [[f64; 3]; 3],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet {
            v,
            d: [0.0; 3],
            dd: [[0.0; 3]; 3],
        }
    }

    /// The coordinate function x_k.
    pub fn coordinate(x: &[f64; 3], k: usize) -> Self {
        let mut j = Jet::constant(x[k]);
        j.d[k] = 1.0;
        j
    }

    pub fn coordinates(x: &[f64; 3]) -> [Jet; 3] {
        [
            Jet::coordinate(x, 0),
            Jet::coordinate(x, 1),
            Jet::coordinate(x, 2),
        ]
    }

    /// Applies a scalar function with derivatives `(f, f', f'')` at `self.v`.
    pub fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        let mut out = Jet::constant(f);
        for a in 0..3 {
            out.d[a] = df * self.d[a];
            for b in 0..3 {
                out.dd[a][b] = df * self.dd[a][b] + ddf * self.d[a] * self.d[b];
            }
        }
        out
    }

    pub fn powf(self, p: f64) -> Self {
        let v = self.v;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(self) -> Self {
        let v = self.v;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn scale(self, c: f64) -> Self {
        let mut out = self;
        out.v *= c;
        for a in 0..3 {
            out.d[a] *= c;
            for b in 0..3 {
                out.dd[a][b] *= c;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.v += o.v;
        for a in 0..3 {
            out.d[a] += o.d[a];
            for b in 0..3 {
                out.dd[a][b] += o.dd[a][b];
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for a in 0..3 {
            out.d[a] = self.d[a] * o.v + self.v * o.d[a];
            for b in 0..3 {
                out.dd[a][b] = self.dd[a][b] * o.v
                    + self.d[a] * o.d[b]
                    + self.d[b] * o.d[a]
                    + self.v * o.dd[a][b];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[f64; 3]) -> Jet, x: [f64; 3]) {
        let h = 1e-4;
        let j = f(&x);
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            let d = (fp.v - fm.v) / (2.0 * h);
            assert!((d - j.d[a]).abs() < 1e-7 * (1.0 + d.abs()), "grad {a}");
            for b in 0..3 {
                let dd = (fp.d[b] - fm.d[b]) / (2.0 * h);
                assert!((dd - j.dd[a][b]).abs() < 1e-7 * (1.0 + dd.abs()), "hess {a}{b}");
            }
        }
    }

    #[test]
    fn radius_power_matches_finite_differences() {
        fd_check(
            |x| {
                let [a, b, c] = Jet::coordinates(x);
                (a * a + b * b + c * c).powf(-0.75) * a
            },
            [3.0, -1.5, 2.2],
        );
    }

    #[test]
    fn quotient_and_sqrt() {
        fd_check(
            |x| {
                let [a, b, c] = Jet::coordinates(x);
                (a * b + 4.0).sqrt() / (c * c + 1.0)
            },
            [1.3, 0.7, -0.4],
        );
    }
}

//! One-variable truncated power series over the complex numbers.
//!
//! Support for the linearization and cohomology solvers: products,
//! composition, compositional inversion, differentiation, integration.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients `c[0] + c[1] z + ... + c[n] z^n`; all operations truncate to
/// the shorter operand's length unless stated otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub c: Vec<Complex64>,
}

impl Series {
    pub fn new(c: Vec<Complex64>) -> Self {
        Self { c }
    }

    pub fn zeros(len: usize) -> Self {
        Self { c: vec![ZERO; len] }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.c.get(k).copied().unwrap_or(ZERO)
    }

    pub fn truncate(mut self, len: usize) -> Self {
        self.c.truncate(len);
        self.c.resize(len, ZERO);
        self
    }

    pub fn add(&self, other: &Series) -> Series {
        let n = self.len().max(other.len());
        let mut out = Series::zeros(n);
        for k in 0..n {
            out.c[k] = self.get(k) + other.get(k);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Series {
        Series::new(self.c.iter().map(|&a| a * s).collect())
    }

    /// Product truncated to `len` coefficients.
    pub fn mul_trunc(&self, other: &Series, len: usize) -> Series {
        let mut out = Series::zeros(len);
        for (i, &a) in self.c.iter().enumerate().take(len) {
            if a == ZERO {
                continue;
            }
            for (j, &b) in other.c.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                out.c[i + j] += a * b;
            }
        }
        out
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn inverse(&self, len: usize) -> Series {
        let mut out = Series::zeros(len);
        let p0 = self.c[0];
        out.c[0] = Complex64::new(1.0, 0.0) / p0;
        for n in 1..len {
            let mut acc = ZERO;
            for k in 1..=n {
                acc += self.get(k) * out.c[n - k];
            }
            out.c[n] = -acc / p0;
        }
        out
    }

    /// Composition `self(inner)`; `inner` must have zero constant term.
    pub fn compose(&self, inner: &Series, len: usize) -> Series {
        debug_assert!(inner.get(0).norm() == 0.0);
        let mut acc = Series::zeros(len);
        for &coeff in self.c.iter().rev() {
            acc = acc.mul_trunc(inner, len);
            acc.c[0] += coeff;
        }
        acc
    }

    /// Compositional inverse of a series with `c[0] = 0`, `c[1] != 0`:
    /// returns `g` with `self(g(z)) = z` to the truncation order.
    pub fn reversion(&self, len: usize) -> Series {
        debug_assert!(self.get(0).norm() == 0.0 && self.get(1).norm() > 0.0);
        let mut g = Series::zeros(len);
        if len > 1 {
            g.c[1] = Complex64::new(1.0, 0.0) / self.c[1];
        }
        // Solve order by order: [z^n] f(g) = 0 for n >= 2.
        for n in 2..len {
            let trial = self.compose(&g, n + 1);
            // The coefficient of z^n currently produced; correcting g_n by d
            // changes it by f'(0) * d = c[1] * d.
            let err = trial.get(n);
            g.c[n] = -err / self.c[1];
        }
        g
    }

    /// Termwise derivative.
    pub fn derivative(&self) -> Series {
        if self.len() <= 1 {
            return Series::zeros(1);
        }
        let mut out = Series::zeros(self.len() - 1);
        for k in 1..self.len() {
            out.c[k - 1] = self.c[k] * k as f64;
        }
        out
    }

    /// Termwise antiderivative with zero constant term.
    pub fn integral(&self) -> Series {
        let mut out = Series::zeros(self.len() + 1);
        for k in 0..self.len() {
            out.c[k + 1] = self.c[k] / (k + 1) as f64;
        }
        out
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.c.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn inverse_times_series_is_one() {
        let f = Series::new(vec![c(2.0), c(1.0), c(-0.5), c(0.25)]);
        let inv = f.inverse(8);
        let prod = f.mul_trunc(&inv, 8);
        assert!((prod.get(0) - c(1.0)).norm() < 1e-14);
        for k in 1..8 {
            assert!(prod.get(k).norm() < 1e-13, "coefficient {k}");
        }
    }

    #[test]
    fn reversion_inverts_composition() {
        let f = Series::new(vec![c(0.0), c(0.5), c(1.0), c(-2.0), c(0.3)]);
        let g = f.reversion(10);
        let id = f.compose(&g, 10);
        assert!((id.get(1) - c(1.0)).norm() < 1e-12);
        for k in 2..10 {
            assert!(id.get(k).norm() < 1e-10, "coefficient {k}: {}", id.get(k));
        }
    }

    #[test]
    fn derivative_integral_roundtrip() {
        let f = Series::new(vec![c(0.0), c(1.0), c(2.0), c(3.0)]);
        let back = f.derivative().integral();
        for k in 1..4 {
            assert!((back.get(k) - f.get(k)).norm() < 1e-15);
        }
    }
}

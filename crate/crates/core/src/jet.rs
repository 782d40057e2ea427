//! Truncated bivariate Taylor jets.
//!
//! A [`Jet2`] stores the coefficients of a map `(u, v) -> F(u, v)` expanded
//! at the origin, where `u` is a dynamical-space deviation and `v` a
//! parameter deviation:
//!
//! ```text
//! c[i][j] = (d^i/du^i d^j/dv^j F)(0, 0) / (i! j!),   i <= k_z, j <= k_w.
//! ```
//!
//! Arithmetic is exact truncated-Taylor algebra: composing polynomial jets
//! reproduces the polynomial coefficients to rounding error only.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum supported order in the dynamical variable.
pub const K_Z_MAX: usize = 8;
/// Maximum supported order in the parameter variable.
pub const K_W_MAX: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    kz: usize,
    kw: usize,
    /// Row-major: `c[i * (kw + 1) + j]`.
    c: Vec<Complex64>,
}

pub fn check_orders(kz: usize, kw: usize) -> Result<()> {
    if kz > K_Z_MAX {
        return Err(Error::Order {
            requested: kz,
            cap: K_Z_MAX,
        });
    }
    if kw > K_W_MAX {
        return Err(Error::Order {
            requested: kw,
            cap: K_W_MAX,
        });
    }
    Ok(())
}

impl Jet2 {
    pub fn zeros(kz: usize, kw: usize) -> Self {
        Self {
            kz,
            kw,
            c: vec![Complex64::new(0.0, 0.0); (kz + 1) * (kw + 1)],
        }
    }

    pub fn constant(value: Complex64, kz: usize, kw: usize) -> Self {
        let mut jet = Self::zeros(kz, kw);
        jet.set(0, 0, value);
        jet
    }

    /// The identity in `z`: `F(u, v) = u`, so `c[1][0] = 1` and all other
    /// entries vanish.
    pub fn identity(kz: usize, kw: usize) -> Self {
        let mut jet = Self::zeros(kz, kw);
        if kz >= 1 {
            jet.set(1, 0, Complex64::new(1.0, 0.0));
        }
        jet
    }

    /// `F(u, v) = base + u`: a moving point expanded about `base`.
    pub fn variable(base: Complex64, kz: usize, kw: usize) -> Self {
        let mut jet = Self::identity(kz, kw);
        jet.set(0, 0, base);
        jet
    }

    pub fn kz(&self) -> usize {
        self.kz
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.c[i * (self.kw + 1) + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.c[i * (self.kw + 1) + j] = value;
    }

    /// Constant term `F(0, 0)`.
    pub fn value(&self) -> Complex64 {
        self.get(0, 0)
    }

    /// `d^n F / dz^n` at the base point (coefficient times n!).
    pub fn dz(&self, n: usize) -> Complex64 {
        let mut fact = 1.0;
        for k in 2..=n {
            fact *= k as f64;
        }
        self.get(n, 0) * fact
    }

    /// `dF/dw` at the base point.
    pub fn dw(&self) -> Complex64 {
        self.get(0, 1)
    }

    /// Mixed derivative `d2F/dz dw` at the base point.
    pub fn dzw(&self) -> Complex64 {
        self.get(1, 1)
    }

    pub fn add(&self, other: &Jet2) -> Jet2 {
        debug_assert_eq!((self.kz, self.kw), (other.kz, other.kw));
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(&other.c) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Jet2) -> Jet2 {
        debug_assert_eq!((self.kz, self.kw), (other.kz, other.kw));
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(&other.c) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Jet2 {
        let mut out = self.clone();
        for a in out.c.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Truncated product.
    pub fn mul(&self, other: &Jet2) -> Jet2 {
        debug_assert_eq!((self.kz, self.kw), (other.kz, other.kw));
        let mut out = Jet2::zeros(self.kz, self.kw);
        for i1 in 0..=self.kz {
            for j1 in 0..=self.kw {
                let a = self.get(i1, j1);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..=(self.kz - i1) {
                    for j2 in 0..=(self.kw - j1) {
                        let prod = a * other.get(i2, j2);
                        let idx = (i1 + i2) * (self.kw + 1) + (j1 + j2);
                        out.c[idx] += prod;
                    }
                }
            }
        }
        out
    }

    /// Substitute `delta` for the `z`-deviation of `self`, keeping the
    /// parameter deviation shared:
    ///
    /// ```text
    /// result(u, v) = sum_i [ sum_j self[i][j] v^j ] * delta(u, v)^i.
    /// ```
    ///
    /// `delta` must have zero constant term (it is the deviation of the
    /// inner point from the base point the outer jet was expanded at).
    pub fn compose_z(&self, delta: &Jet2) -> Jet2 {
        debug_assert_eq!(self.kw, delta.kw);
        debug_assert!(
            delta.value().norm() == 0.0,
            "inner jet must have zero constant term"
        );
        // Horner in delta with v-polynomial coefficients.
        let mut acc = self.row(self.kz, delta.kz);
        for i in (0..self.kz).rev() {
            acc = acc.mul(delta).add(&self.row(i, delta.kz));
        }
        acc
    }

    /// The `v`-polynomial `sum_j self[i][j] v^j` as a jet of shape (kz, kw).
    fn row(&self, i: usize, kz: usize) -> Jet2 {
        let mut out = Jet2::zeros(kz, self.kw);
        for j in 0..=self.kw {
            out.set(0, j, self.get(i, j));
        }
        out
    }

    /// Copy with the constant term set to zero; pairs with [`Jet2::compose_z`].
    pub fn deviation(&self) -> Jet2 {
        let mut out = self.clone();
        out.set(0, 0, Complex64::new(0.0, 0.0));
        out
    }

    /// Evaluate the truncated polynomial at concrete deviations.
    pub fn eval(&self, u: Complex64, v: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in (0..=self.kz).rev() {
            let mut row = Complex64::new(0.0, 0.0);
            for j in (0..=self.kw).rev() {
                row = row * v + self.get(i, j);
            }
            acc = acc * u + row;
        }
        acc
    }
}

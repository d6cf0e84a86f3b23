//! Dense univariate polynomials in the Lagrange multiplier and their real roots.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, Schur};

use crate::error::{PoseError, Result};

/// Default threshold on `|imag| / (1 + |real|)` for treating an eigenvalue as real.
pub const DEFAULT_IMAG_TOL: f64 = 1e-8;

/// Coefficients smaller than this fraction of the largest one are trimmed
/// from the top before root finding.
pub const TRIM_RELATIVE: f64 = 1e-13;

/// Real roots closer than this are merged.
pub const ROOT_MERGE_SPACING: f64 = 1e-10;

const NEWTON_POLISH_STEPS: usize = 2;

/// A polynomial with real coefficients; `coeffs[i]` multiplies `λ^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients. An empty list is the zero polynomial.
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self::zero();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c0 + c1·λ`
    pub fn linear(c0: f64, c1: f64) -> Self {
        Self {
            coeffs: vec![c0, c1],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `λ^i`, zero past the stored length.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Largest index with a non-zero coefficient (0 for constants, including zero).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }

    pub fn leading_coeff(&self) -> f64 {
        self.coeffs[self.degree()]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Drops trailing exact zeros.
    pub fn trimmed(&self) -> Self {
        Self {
            coeffs: self.coeffs[..=self.degree()].to_vec(),
        }
    }

    /// Drops leading coefficients below `rel · max|c|`.
    pub fn trimmed_relative(&self, rel: f64) -> Self {
        let scale = self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let cut = rel * scale;
        let top = self.coeffs.iter().rposition(|c| c.abs() > cut).unwrap_or(0);
        Self {
            coeffs: self.coeffs[..=top].to_vec(),
        }
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Value and first derivative at `t` in one pass.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for c in self.coeffs.iter().rev() {
            dp = dp * t + p;
            p = p * t + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Coefficient convolution.
    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// `p · p`; the degree doubles.
    pub fn sq_norm(&self) -> Polynomial {
        self.mul(self)
    }

    fn zip_with(&self, other: &Polynomial, f: impl Fn(f64, f64) -> f64) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..n).map(|i| f(self.coeff(i), other.coeff(i))).collect())
    }
}

/// Product of two polynomials.
pub fn poly_mul(p: &Polynomial, q: &Polynomial) -> Polynomial {
    p.mul(q)
}

/// Squared norm `p · p`.
pub fn poly_sq_norm(p: &Polynomial) -> Polynomial {
    p.sq_norm()
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::mul(self, rhs)
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

/// All real roots of `p`, ascending.
///
/// Eigenvalues of the balanced companion matrix of the monic normalization;
/// eigenvalues with `|imag| > imag_tol·(1+|real|)` are dropped, the rest are
/// Newton-polished on `p` and merged when closer than [`ROOT_MERGE_SPACING`].
pub fn real_roots(p: &Polynomial, imag_tol: f64) -> Result<Vec<f64>> {
    if p.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(PoseError::InvalidInput(
            "polynomial has non-finite coefficients".into(),
        ));
    }
    let p = p.trimmed_relative(TRIM_RELATIVE);
    let n = p.degree();
    if n == 0 {
        return Err(PoseError::InvalidInput(
            "root finding needs a polynomial of degree at least 1".into(),
        ));
    }

    let lead = p.coeffs[n];
    let mut roots: Vec<f64> = if n == 1 {
        vec![-p.coeffs[0] / lead]
    } else {
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            companion[(0, j)] = -p.coeffs[n - 1 - j] / lead;
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        balance_parlett_reinsch(&mut companion);
        let schur = Schur::try_new(companion, f64::EPSILON, 10_000).ok_or_else(|| {
            PoseError::InvalidInput("companion eigen-decomposition did not converge".into())
        })?;
        schur
            .complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() <= imag_tol * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .collect()
    };

    for r in roots.iter_mut() {
        *r = polish_root(&p, *r);
    }

    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() < ROOT_MERGE_SPACING);
    Ok(roots)
}

fn polish_root(p: &Polynomial, mut x: f64) -> f64 {
    let (mut fx, _) = p.eval_with_derivative(x);
    for _ in 0..NEWTON_POLISH_STEPS {
        let (_, dfx) = p.eval_with_derivative(x);
        if dfx == 0.0 || !dfx.is_finite() {
            break;
        }
        let cand = x - fx / dfx;
        let fc = p.eval(cand);
        // only accept steps that reduce |p|
        if fc.abs() < fx.abs() {
            x = cand;
            fx = fc;
        } else {
            break;
        }
    }
    x
}

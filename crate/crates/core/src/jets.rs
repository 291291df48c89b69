//! Order-2 truncated Taylor arithmetic and smooth vector fields.
//!
//! A [`Jet2`] carries `f(x + s v)` up to `s^2`:
//! `value + s * d1 + s^2 * d2 / 2`. Evaluating a field once on a jet point
//! seeded with a direction yields the value, the directional derivative and
//! the second directional derivative, all exact to rounding.
//!
//! Fields are written once against the [`Scalar`] trait (see [`GenericField`])
//! and can then be evaluated on `f64` or on [`Jet2`].

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::EvalError;

/// Truncated second-order Taylor number along a single seed direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0, 0.0)
    }

    /// The path `x + s * v` for a single coordinate.
    pub const fn seeded(value: f64, direction: f64) -> Self {
        Self::new(value, direction, 0.0)
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    #[inline]
    fn chain(self, g: f64, dg: f64, ddg: f64) -> Self {
        Self { value: g, d1: dg * self.d1, d2: ddg * self.d1 * self.d1 + dg * self.d2 }
    }

    fn has_seed(&self) -> bool {
        self.d1 != 0.0 || self.d2 != 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}

impl From<f64> for Jet2 {
    fn from(value: f64) -> Self {
        Self::constant(value)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(self, rhs: Jet2) -> Jet2 {
        Jet2::new(self.value + rhs.value, self.d1 + rhs.d1, self.d2 + rhs.d2)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    #[inline]
    fn sub(self, rhs: Jet2) -> Jet2 {
        Jet2::new(self.value - rhs.value, self.d1 - rhs.d1, self.d2 - rhs.d2)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(self, rhs: Jet2) -> Jet2 {
        Jet2::new(
            self.value * rhs.value,
            self.d1 * rhs.value + self.value * rhs.d1,
            self.d2 * rhs.value + 2.0 * self.d1 * rhs.d1 + self.value * rhs.d2,
        )
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[inline]
    fn div(self, rhs: Jet2) -> Jet2 {
        let q = self.value / rhs.value;
        let q1 = (self.d1 - q * rhs.d1) / rhs.value;
        let q2 = (self.d2 - 2.0 * q1 * rhs.d1 - q * rhs.d2) / rhs.value;
        Jet2::new(q, q1, q2)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    #[inline]
    fn neg(self) -> Jet2 {
        Jet2::new(-self.value, -self.d1, -self.d2)
    }
}

/// Numeric kind a [`GenericField`] can be evaluated on.
///
/// The fallible functions report a domain violation instead of producing
/// infinities.
pub trait Scalar:
    Copy + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    /// Real, sign-preserving cube root.
    fn cbrt(self) -> Self;
    fn sqrt(self) -> Result<Self, EvalError>;
    fn tan(self) -> Result<Self, EvalError>;
    fn sec(self) -> Result<Self, EvalError>;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::constant(c)
    }

    fn powi(self, k: u32) -> Self {
        let mut acc = Self::constant(1.0);
        for _ in 0..k {
            acc = acc * self;
        }
        acc
    }
}

// cos within one ulp-scale of zero means tan/sec are not representable.
fn cos_vanishes(c: f64) -> bool {
    c.abs() <= f64::EPSILON
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn cbrt(self) -> Self {
        f64::cbrt(self)
    }
    fn sqrt(self) -> Result<Self, EvalError> {
        if self > 0.0 {
            Ok(f64::sqrt(self))
        } else {
            Err(EvalError::Domain { op: "sqrt", value: self })
        }
    }
    fn tan(self) -> Result<Self, EvalError> {
        if cos_vanishes(f64::cos(self)) {
            return Err(EvalError::Domain { op: "tan", value: self });
        }
        Ok(f64::tan(self))
    }
    fn sec(self) -> Result<Self, EvalError> {
        let c = f64::cos(self);
        if cos_vanishes(c) {
            return Err(EvalError::Domain { op: "sec", value: self });
        }
        Ok(1.0 / c)
    }
}

impl Scalar for Jet2 {
    fn constant(c: f64) -> Self {
        Jet2::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }
    fn cbrt(self) -> Self {
        let r = self.value.cbrt();
        if !self.has_seed() {
            return Jet2::constant(r);
        }
        // d/da a^(1/3) = 1 / (3 r^2), d2 = -2 / (9 a r^2)
        let dg = 1.0 / (3.0 * r * r);
        let ddg = -2.0 / (9.0 * self.value * r * r);
        self.chain(r, dg, ddg)
    }
    fn sqrt(self) -> Result<Self, EvalError> {
        if self.value <= 0.0 {
            return Err(EvalError::Domain { op: "sqrt", value: self.value });
        }
        let r = self.value.sqrt();
        let dg = 0.5 / r;
        let ddg = -0.25 / (r * self.value);
        Ok(self.chain(r, dg, ddg))
    }
    fn tan(self) -> Result<Self, EvalError> {
        let c = self.value.cos();
        if cos_vanishes(c) {
            return Err(EvalError::Domain { op: "tan", value: self.value });
        }
        let t = self.value.tan();
        let sec2 = 1.0 / (c * c);
        Ok(self.chain(t, sec2, 2.0 * t * sec2))
    }
    fn sec(self) -> Result<Self, EvalError> {
        let c = self.value.cos();
        if cos_vanishes(c) {
            return Err(EvalError::Domain { op: "sec", value: self.value });
        }
        let sec = 1.0 / c;
        let tan = self.value.tan();
        Ok(self.chain(sec, sec * tan, sec * (tan * tan + sec * sec)))
    }
}

/// Jet sine.
pub fn jet_sin(a: Jet2) -> Jet2 {
    Scalar::sin(a)
}

/// Jet cosine.
pub fn jet_cos(a: Jet2) -> Jet2 {
    Scalar::cos(a)
}

/// Jet square root; requires a strictly positive value.
pub fn jet_sqrt(a: Jet2) -> Result<Jet2, EvalError> {
    Scalar::sqrt(a)
}

/// Real (sign-preserving) jet cube root.
pub fn jet_cbrt(a: Jet2) -> Jet2 {
    Scalar::cbrt(a)
}

pub fn jet_tan(a: Jet2) -> Result<Jet2, EvalError> {
    Scalar::tan(a)
}

pub fn jet_sec(a: Jet2) -> Result<Jet2, EvalError> {
    Scalar::sec(a)
}

/// A smooth map `R^n -> R^n` that can be evaluated on reals and on jets.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_jet(&self, x: &[Jet2]) -> Result<Vec<Jet2>, EvalError>;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let lifted: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v)).collect();
        Ok(self.eval_jet(&lifted)?.into_iter().map(|j| j.value).collect())
    }
}

/// Shared handle to a vector field.
pub type Field = Arc<dyn VectorField>;

/// A field written once, generically over the scalar kind.
///
/// Every `GenericField` is a [`VectorField`].
pub trait GenericField: Send + Sync {
    fn dim(&self) -> usize;
    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, EvalError>;
}

impl<T: GenericField> VectorField for T {
    fn dim(&self) -> usize {
        GenericField::dim(self)
    }

    fn eval_jet(&self, x: &[Jet2]) -> Result<Vec<Jet2>, EvalError> {
        check_dim(GenericField::dim(self), x.len())?;
        self.apply(x)
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        check_dim(GenericField::dim(self), x.len())?;
        self.apply(x)
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<(), EvalError> {
    if expected != found {
        return Err(EvalError::Dimension { expected, found });
    }
    Ok(())
}

/// Constant field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField(pub Vec<f64>);

impl GenericField for ConstantField {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply<S: Scalar>(&self, _x: &[S]) -> Result<Vec<S>, EvalError> {
        Ok(self.0.iter().map(|&c| S::constant(c)).collect())
    }
}

/// One monomial `coef * prod_i x_i^powers[i]` contributing to component `row`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Monomial {
    pub row: usize,
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Polynomial vector field given as a list of monomials (rows are 0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialField {
    dim: usize,
    terms: Vec<Monomial>,
}

impl PolynomialField {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self, EvalError> {
        for term in &terms {
            check_dim(dim, term.powers.len())?;
            if term.row >= dim {
                return Err(EvalError::Dimension { expected: dim, found: term.row + 1 });
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.powers.iter().sum::<u32>()).max().unwrap_or(0)
    }
}

impl GenericField for PolynomialField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, EvalError> {
        let mut out = vec![S::zero(); self.dim];
        for term in &self.terms {
            let mut acc = S::constant(term.coef);
            for (xi, &p) in x.iter().zip(&term.powers) {
                if p > 0 {
                    acc = acc * xi.powi(p);
                }
            }
            out[term.row] = out[term.row] + acc;
        }
        Ok(out)
    }
}

/// `Df(x) * g(x)`: derivative of `f` at `x` along the vector `g(x)`.
pub fn directional_derivative(f: &dyn VectorField, g: &dyn VectorField, x: &[f64]) -> Result<Vec<f64>, EvalError> {
    check_dim(f.dim(), g.dim())?;
    let direction = g.eval(x)?;
    derivative_along(f, x, &direction)
}

/// `Df(x) * v` for an explicit vector `v`.
pub fn derivative_along(f: &dyn VectorField, x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), v.len())?;
    let point: Vec<Jet2> = x.iter().zip(v).map(|(&xi, &vi)| Jet2::seeded(xi, vi)).collect();
    Ok(f.eval_jet(&point)?.into_iter().map(|j| j.d1).collect())
}

/// `D^2 f(x)[v, v]`.
pub fn second_derivative_along(f: &dyn VectorField, x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), v.len())?;
    let point: Vec<Jet2> = x.iter().zip(v).map(|(&xi, &vi)| Jet2::seeded(xi, vi)).collect();
    Ok(f.eval_jet(&point)?.into_iter().map(|j| j.d2).collect())
}

/// Symmetric bilinear form `D^2 f(x)[u, v]` by polarization.
pub fn second_derivative_bilinear(f: &dyn VectorField, x: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
    let sum: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
    let quv = second_derivative_along(f, x, &sum)?;
    let qu = second_derivative_along(f, x, u)?;
    let qv = second_derivative_along(f, x, v)?;
    Ok(quv.iter().zip(&qu).zip(&qv).map(|((s, a), b)| 0.5 * (s - a - b)).collect())
}

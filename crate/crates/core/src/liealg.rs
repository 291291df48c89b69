//! Lie brackets of vector fields, index-set bookkeeping and the bracket
//! matrix whose inverse shapes the feedback coefficients.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, Result};
use crate::jets::{check_dim, derivative_along, second_derivative_bilinear, Field, Jet2, VectorField};
use crate::linalg::{condition_estimate, inverse_spectral_norm, norm2, Lu};

/// Condition estimates above this make the bracket matrix unusable.
pub const SINGULARITY_THRESHOLD: f64 = 1e8;

/// Chosen control fields and brackets, with 1-based input indices.
///
/// Generator order is fixed: `s1` fields, then `s2` brackets, then `s3`
/// brackets, each in listed order. Feedback coefficient `a[j]` multiplies
/// generator `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct IndexSets {
    #[serde(default)]
    pub s1: Vec<usize>,
    #[serde(default)]
    pub s2: Vec<(usize, usize)>,
    #[serde(default)]
    pub s3: Vec<(usize, usize, usize)>,
}

/// One column of the bracket matrix, with 1-based input indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Field(usize),
    Bracket(usize, usize),
    NestedBracket(usize, usize, usize),
}

impl IndexSets {
    pub fn new(s1: Vec<usize>, s2: Vec<(usize, usize)>, s3: Vec<(usize, usize, usize)>) -> Self {
        Self { s1, s2, s3 }
    }

    pub fn len(&self) -> usize {
        self.s1.len() + self.s2.len() + self.s3.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks cardinality against `n` and every index against `1..=m`.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::IndexSets(format!(
                "|S1| + |S2| + |S3| = {} but the state dimension is {n}",
                self.len()
            )));
        }
        let in_range = |i: usize| (1..=m).contains(&i);
        let bad = self
            .s1
            .iter()
            .copied()
            .chain(self.s2.iter().flat_map(|&(a, b)| [a, b]))
            .chain(self.s3.iter().flat_map(|&(a, b, c)| [a, b, c]))
            .find(|&i| !in_range(i));
        if let Some(i) = bad {
            return Err(Error::IndexSets(format!("index {i} outside 1..={m}")));
        }
        if has_duplicates(&self.s1) || has_duplicates(&self.s2) || has_duplicates(&self.s3) {
            return Err(Error::IndexSets("duplicate entry".into()));
        }
        Ok(())
    }

    pub fn generators(&self) -> impl Iterator<Item = Generator> + '_ {
        self.s1
            .iter()
            .map(|&i| Generator::Field(i))
            .chain(self.s2.iter().map(|&(a, b)| Generator::Bracket(a, b)))
            .chain(self.s3.iter().map(|&(a, b, c)| Generator::NestedBracket(a, b, c)))
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items.iter().enumerate().any(|(i, a)| items[..i].contains(a))
}

/// `[f, g](x) = Dg(x) f(x) - Df(x) g(x)`.
pub fn lie_bracket(f: &dyn VectorField, g: &dyn VectorField, x: &[f64]) -> Result<Vec<f64>, EvalError> {
    check_dim(f.dim(), g.dim())?;
    check_dim(f.dim(), x.len())?;
    let fx = f.eval(x)?;
    let gx = g.eval(x)?;
    let dg_f = derivative_along(g, x, &fx)?;
    let df_g = derivative_along(f, x, &gx)?;
    Ok(dg_f.iter().zip(&df_g).map(|(a, b)| a - b).collect())
}

/// The bracket `[f, g]` as a field in its own right, so brackets can nest.
///
/// Jet evaluation is exact in the value and first-order channels. The
/// second-order channel needs third derivatives of `f` and `g` whenever the
/// seed direction is nonzero; it is then reported as NaN, which limits exact
/// nesting to depth three.
pub struct BracketField {
    f: Field,
    g: Field,
}

pub fn lie_bracket_field(f: Field, g: Field) -> Field {
    Arc::new(BracketField { f, g })
}

impl BracketField {
    /// `D[f,g](x) d = D^2g[f,d] + Dg Df d - D^2f[g,d] - Df Dg d`.
    fn derivative(&self, x: &[f64], fx: &[f64], gx: &[f64], d: &[f64]) -> Result<Vec<f64>, EvalError> {
        let f = self.f.as_ref();
        let g = self.g.as_ref();
        let d2g = second_derivative_bilinear(g, x, fx, d)?;
        let d2f = second_derivative_bilinear(f, x, gx, d)?;
        let df_d = derivative_along(f, x, d)?;
        let dg_d = derivative_along(g, x, d)?;
        let dg_df_d = derivative_along(g, x, &df_d)?;
        let df_dg_d = derivative_along(f, x, &dg_d)?;
        Ok((0..x.len()).map(|i| d2g[i] + dg_df_d[i] - d2f[i] - df_dg_d[i]).collect())
    }
}

impl VectorField for BracketField {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn eval_jet(&self, point: &[Jet2]) -> Result<Vec<Jet2>, EvalError> {
        check_dim(self.f.dim(), self.g.dim())?;
        check_dim(self.f.dim(), point.len())?;
        let x: Vec<f64> = point.iter().map(|j| j.value).collect();
        let v: Vec<f64> = point.iter().map(|j| j.d1).collect();
        let w: Vec<f64> = point.iter().map(|j| j.d2).collect();
        let fx = self.f.eval(&x)?;
        let gx = self.g.eval(&x)?;
        let dg_f = derivative_along(self.g.as_ref(), &x, &fx)?;
        let df_g = derivative_along(self.f.as_ref(), &x, &gx)?;
        let value: Vec<f64> = dg_f.iter().zip(&df_g).map(|(a, b)| a - b).collect();

        let zero = |u: &[f64]| u.iter().all(|c| *c == 0.0);
        let (d1, d2) = match (zero(&v), zero(&w)) {
            (true, true) => (vec![0.0; x.len()], vec![0.0; x.len()]),
            (true, false) => (vec![0.0; x.len()], self.derivative(&x, &fx, &gx, &w)?),
            (false, _) => (self.derivative(&x, &fx, &gx, &v)?, vec![f64::NAN; x.len()]),
        };
        Ok((0..x.len()).map(|i| Jet2::new(value[i], d1[i], d2[i])).collect())
    }
}

/// Value of one generator at `x`.
pub fn generator_value(fields: &[Field], generator: Generator, x: &[f64]) -> Result<Vec<f64>> {
    let field = |i: usize| -> Result<&Field> {
        fields.get(i.wrapping_sub(1)).ok_or_else(|| Error::IndexSets(format!("no control field with index {i}")))
    };
    let column = match generator {
        Generator::Field(i) => field(i)?.eval(x)?,
        Generator::Bracket(a, b) => lie_bracket(field(a)?.as_ref(), field(b)?.as_ref(), x)?,
        Generator::NestedBracket(a, b, c) => {
            let inner = lie_bracket_field(field(a)?.clone(), field(b)?.clone());
            lie_bracket(inner.as_ref(), field(c)?.as_ref(), x)?
        }
    };
    Ok(column)
}

/// Bracket matrix at a point, factored once.
#[derive(Debug, Clone)]
pub struct BracketMatrix {
    pub entries: DMatrix<f64>,
    pub x: Vec<f64>,
    pub cond: f64,
    lu: Lu,
}

impl BracketMatrix {
    pub fn from_entries(entries: DMatrix<f64>, x: Vec<f64>) -> Self {
        let lu = Lu::new(&entries);
        let cond = condition_estimate(&entries, &lu);
        Self { entries, x, cond, lu }
    }

    pub fn determinant(&self) -> f64 {
        self.lu.determinant()
    }

    pub fn inverse_norm(&self) -> f64 {
        inverse_spectral_norm(&self.entries)
    }

    pub fn is_singular(&self) -> bool {
        self.cond.is_nan() || self.cond > SINGULARITY_THRESHOLD
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.entries.column(j).iter().copied().collect()
    }
}

/// Assembles the n x n matrix of chosen fields and brackets at `x`.
pub fn assemble_f(fields: &[Field], sets: &IndexSets, x: &[f64]) -> Result<BracketMatrix> {
    let n = x.len();
    sets.validate(n, fields.len())?;
    let mut entries = DMatrix::zeros(n, n);
    for (j, generator) in sets.generators().enumerate() {
        let column = generator_value(fields, generator, x)?;
        check_dim(n, column.len())?;
        for (i, v) in column.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(BracketMatrix::from_entries(entries, x.to_vec()))
}

/// Solves `F(x) a = -gamma (x - x_star)`.
pub fn feedback_coefficients(matrix: &BracketMatrix, gamma: f64, x: &[f64], x_star: &[f64]) -> Result<Vec<f64>> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Parameter(format!("gain must be positive, got {gamma}")));
    }
    check_dim(matrix.entries.nrows(), x.len())?;
    check_dim(x.len(), x_star.len())?;
    if matrix.is_singular() {
        return Err(Error::Singular { x: matrix.x.clone(), cond: matrix.cond });
    }
    let rhs: Vec<f64> = x.iter().zip(x_star).map(|(xi, si)| -gamma * (xi - si)).collect();
    matrix.lu.solve(&rhs).ok_or_else(|| Error::Singular { x: matrix.x.clone(), cond: matrix.cond })
}

/// `||F a + gamma (x - x_star)||`.
pub fn feedback_residual(matrix: &BracketMatrix, a: &[f64], gamma: f64, x: &[f64], x_star: &[f64]) -> f64 {
    let n = x.len();
    let r: Vec<f64> = (0..n)
        .map(|i| {
            let fa: f64 = (0..n).map(|j| matrix.entries[(i, j)] * a[j]).sum();
            fa + gamma * (x[i] - x_star[i])
        })
        .collect();
    norm2(&r)
}

/// Acceptance thresholds for the rank check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCriteria {
    pub min_abs_det: f64,
    pub max_cond: f64,
}

impl Default for RankCriteria {
    fn default() -> Self {
        Self { min_abs_det: 1e-6, max_cond: SINGULARITY_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankPoint {
    pub x: Vec<f64>,
    pub abs_det: f64,
    pub cond: f64,
    pub inverse_norm: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub points: Vec<RankPoint>,
    pub pass: bool,
    /// Largest `||F^-1(x)||` over the points that evaluated.
    pub max_inverse_norm: f64,
}

impl RankReport {
    /// Whether `||F^-1(x)|| <= alpha` held at every evaluated sample.
    pub fn inverse_bounded_by(&self, alpha: f64) -> bool {
        self.points.iter().all(|p| p.error.is_none()) && self.max_inverse_norm <= alpha
    }

    pub fn failures(&self) -> impl Iterator<Item = &RankPoint> {
        self.points.iter().filter(|p| !p.pass)
    }
}

/// Checks that the chosen fields and brackets span `R^n` at every sample.
pub fn check_rank(
    fields: &[Field],
    sets: &IndexSets,
    samples: &[Vec<f64>],
    criteria: RankCriteria,
) -> Result<RankReport> {
    if samples.is_empty() {
        return Err(Error::Parameter("rank check needs at least one sample point".into()));
    }
    let mut points = Vec::with_capacity(samples.len());
    let mut max_inverse_norm: f64 = 0.0;
    for x in samples {
        let point = match assemble_f(fields, sets, x) {
            Ok(f) => {
                let abs_det = f.determinant().abs();
                let inverse_norm = f.inverse_norm();
                max_inverse_norm = max_inverse_norm.max(inverse_norm);
                let pass = abs_det > criteria.min_abs_det && f.cond <= criteria.max_cond;
                RankPoint { x: x.clone(), abs_det, cond: f.cond, inverse_norm, pass, error: None }
            }
            Err(e @ Error::IndexSets(_)) => return Err(e),
            Err(e) => RankPoint {
                x: x.clone(),
                abs_det: f64::NAN,
                cond: f64::INFINITY,
                inverse_norm: f64::INFINITY,
                pass: false,
                error: Some(e.to_string()),
            },
        };
        points.push(point);
    }
    let pass = points.iter().all(|p| p.pass);
    Ok(RankReport { points, pass, max_inverse_norm })
}

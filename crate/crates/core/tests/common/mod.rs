//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nhstab_core::jets::{Field, Monomial, PolynomialField};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random polynomial field with degree at most `max_degree`.
pub fn random_polynomial(rng: &mut ChaCha8Rng, dim: usize, max_degree: u32) -> PolynomialField {
    let mut terms = Vec::new();
    for row in 0..dim {
        for _ in 0..rng.gen_range(1..=3) {
            let mut powers = vec![0u32; dim];
            let degree = rng.gen_range(0..=max_degree);
            for _ in 0..degree {
                powers[rng.gen_range(0..dim)] += 1;
            }
            terms.push(Monomial { row, coef: rng.gen_range(-2.0..2.0), powers });
        }
    }
    PolynomialField::new(dim, terms).unwrap()
}

pub fn random_field(rng: &mut ChaCha8Rng, dim: usize, max_degree: u32) -> Field {
    Arc::new(random_polynomial(rng, dim, max_degree))
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-radius..radius)).collect()
}

pub type Map<'a> = dyn Fn(&[f64]) -> Vec<f64> + 'a;

/// Five-point central difference of `f` at `x` along `v`; exact up to
/// rounding for polynomials of degree at most four.
pub fn fd_directional(f: &Map, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let shifted = |s: f64| -> Vec<f64> { f(&x.iter().zip(v).map(|(a, b)| a + s * h * b).collect::<Vec<_>>()) };
    let (p1, m1, p2, m2) = (shifted(1.0), shifted(-1.0), shifted(2.0), shifted(-2.0));
    (0..p1.len()).map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h)).collect()
}

/// `[f, g](x) = Dg f - Df g`, with all derivatives by finite differences.
pub fn fd_bracket(f: &Map, g: &Map, x: &[f64], h: f64) -> Vec<f64> {
    let fx = f(x);
    let gx = g(x);
    let dg_f = fd_directional(g, x, &fx, h);
    let df_g = fd_directional(f, x, &gx, h);
    dg_f.iter().zip(&df_g).map(|(a, b)| a - b).collect()
}

pub fn eval_map(field: &Field) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |x: &[f64]| field.eval(x).unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `max |a - b| <= rel * max(1, max |b|)`.
pub fn close_rel(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * max_abs(b).max(1.0))
}

/// Every normalized order-`order` integer relation on `k`, by scanning the
/// full box `[-order, order]^q` with an odometer and sorting afterwards.
pub fn brute_force_relations(k: &[i64], order: i64) -> Vec<Vec<i64>> {
    let q = k.len();
    let mut out = Vec::new();
    let mut c = vec![-order; q];
    loop {
        let l1: i64 = c.iter().map(|v| v.abs()).sum();
        let first = c.iter().find(|v| **v != 0).copied().unwrap_or(0);
        if l1 == order && first > 0 && c.iter().zip(k).map(|(a, b)| a * b).sum::<i64>() == 0 {
            let g = c.iter().fold(0i64, |g, v| euclid(g, v.abs()));
            if g == 1 {
                out.push(c.clone());
            }
        }
        let mut i = q;
        loop {
            if i == 0 {
                out.sort();
                return out;
            }
            i -= 1;
            if c[i] < order {
                c[i] += 1;
                break;
            }
            c[i] = -order;
        }
    }
}

fn euclid(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        euclid(b, a % b)
    }
}

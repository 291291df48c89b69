//! Integer resonance detection among oscillation multipliers, validation of
//! kappa assignments and a deterministic search for resonance-free ones.
//!
//! A resonance of order `N` between pairwise distinct integers `k` is a
//! relation `sum c_i k_i = 0` with coprime `c` and `sum |c_i| = N`. Since `c`
//! and `-c` describe the same relation, certificates are normalized so that
//! their first nonzero coefficient is positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::IndexSets;

/// Order of the resonances that must be absent within a nested-bracket tuple.
pub const THIRD_ORDER: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonanceCertificate {
    pub coefficients: Vec<i64>,
    pub order: u32,
    pub kappas: Vec<i64>,
}

impl ResonanceCertificate {
    /// Checks the three defining relations in exact integer arithmetic.
    pub fn is_valid(&self) -> bool {
        let annihilates = self.coefficients.iter().zip(&self.kappas).map(|(c, k)| c * k).sum::<i64>() == 0;
        let order = self.coefficients.iter().map(|c| c.unsigned_abs()).sum::<u64>() == self.order as u64;
        let coprime = self.coefficients.iter().fold(0, |g, c| gcd(g, c.unsigned_abs())) == 1;
        annihilates && order && coprime && self.coefficients.len() == self.kappas.len()
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Every order-`order` certificate for `k`, in lexicographic order.
pub fn all_resonances(k: &[i64], order: u32) -> Vec<ResonanceCertificate> {
    let mut found = Vec::new();
    let mut coeffs = vec![0i64; k.len()];
    enumerate(k, order as i64, 0, false, &mut coeffs, &mut |c| {
        found.push(ResonanceCertificate { coefficients: c.to_vec(), order, kappas: k.to_vec() });
        true
    });
    found
}

/// First order-`order` certificate for `k` in lexicographic order, if any.
pub fn find_resonance(k: &[i64], order: u32) -> Option<ResonanceCertificate> {
    let mut first = None;
    let mut coeffs = vec![0i64; k.len()];
    enumerate(k, order as i64, 0, false, &mut coeffs, &mut |c| {
        first = Some(ResonanceCertificate { coefficients: c.to_vec(), order, kappas: k.to_vec() });
        false
    });
    first
}

// Depth-first over coefficient positions; `visit` returns false to stop.
fn enumerate(
    k: &[i64],
    remaining: i64,
    pos: usize,
    nonzero_seen: bool,
    coeffs: &mut [i64],
    visit: &mut dyn FnMut(&[i64]) -> bool,
) -> bool {
    if pos == k.len() {
        if remaining != 0 || !nonzero_seen {
            return true;
        }
        let dot: i64 = coeffs.iter().zip(k).map(|(c, v)| c * v).sum();
        let g = coeffs.iter().fold(0, |g, c| gcd(g, c.unsigned_abs()));
        if dot == 0 && g == 1 {
            return visit(coeffs);
        }
        return true;
    }
    let low = if nonzero_seen { -remaining } else { 0 };
    for c in low..=remaining {
        coeffs[pos] = c;
        if !enumerate(k, remaining - c.abs(), pos + 1, nonzero_seen || c != 0, coeffs, visit) {
            coeffs[pos] = 0;
            return false;
        }
    }
    coeffs[pos] = 0;
    true
}

/// Multipliers for one nested-bracket tuple; the sum and difference
/// multipliers are derived so their defining identities hold exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleKappa {
    pub k1: i64,
    pub k2: i64,
}

impl TripleKappa {
    pub fn new(k1: i64, k2: i64) -> Self {
        Self { k1, k2 }
    }
    pub fn k3(&self) -> i64 {
        self.k1 + self.k2
    }
    /// Signed; negative when `k1 > k2`.
    pub fn k4(&self) -> i64 {
        self.k2 - self.k1
    }
    pub fn values(&self) -> [i64; 4] {
        [self.k1, self.k2, self.k3(), self.k4()]
    }
}

/// The two relations built into every tuple: `k1 + k2 - k3 = 0` and
/// `k1 - k2 + k4 = 0`.
pub const IMPOSED_RELATIONS: [[i64; 4]; 2] = [[1, 1, -1, 0], [1, -1, 0, 1]];

fn is_imposed(c: &[i64]) -> bool {
    IMPOSED_RELATIONS.iter().any(|r| c == r.as_slice() || c.iter().zip(r).all(|(a, b)| *a == -b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaAssignment {
    /// One multiplier per `S2` pair, in index-set order.
    pub second_order: Vec<((usize, usize), i64)>,
    /// One multiplier pair per `S3` triple, in index-set order.
    pub third_order: Vec<((usize, usize, usize), TripleKappa)>,
}

impl KappaAssignment {
    pub fn new(sets: &IndexSets, second: &[i64], third: &[(i64, i64)]) -> Result<Self> {
        if second.len() != sets.s2.len() {
            return Err(Error::Kappa(format!(
                "{} second-order multipliers given for {} pairs",
                second.len(),
                sets.s2.len()
            )));
        }
        if third.len() != sets.s3.len() {
            return Err(Error::Kappa(format!(
                "{} third-order multiplier pairs given for {} triples",
                third.len(),
                sets.s3.len()
            )));
        }
        let assignment = Self {
            second_order: sets.s2.iter().copied().zip(second.iter().copied()).collect(),
            third_order: sets.s3.iter().copied().zip(third.iter().map(|&(a, b)| TripleKappa::new(a, b))).collect(),
        };
        assignment.check_structure()?;
        Ok(assignment)
    }

    pub fn check_structure(&self) -> Result<()> {
        if let Some((pair, k)) = self.second_order.iter().find(|(_, k)| *k <= 0) {
            return Err(Error::Kappa(format!("multiplier {k} for pair {pair:?} is not positive")));
        }
        for (triple, t) in &self.third_order {
            if t.k1 <= 0 || t.k2 <= 0 {
                return Err(Error::Kappa(format!(
                    "multipliers ({}, {}) for triple {triple:?} are not positive",
                    t.k1, t.k2
                )));
            }
        }
        Ok(())
    }

    /// Every stored multiplier, using `|k4|`, in assignment order.
    pub fn distinctness_values(&self) -> Vec<i64> {
        self.second_order
            .iter()
            .map(|(_, k)| *k)
            .chain(self.third_order.iter().flat_map(|(_, t)| {
                let [a, b, c, d] = t.values();
                [a, b, c, d.abs()]
            }))
            .collect()
    }

    /// Largest multiplier in absolute value; sets the fastest oscillation.
    pub fn max_multiplier(&self) -> i64 {
        self.distinctness_values().into_iter().max().unwrap_or(0)
    }

    pub fn second_values(&self) -> Vec<i64> {
        self.second_order.iter().map(|(_, k)| *k).collect()
    }

    pub fn third_values(&self) -> Vec<(i64, i64)> {
        self.third_order.iter().map(|(_, t)| (t.k1, t.k2)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TupleResonance {
    pub triple: (usize, usize, usize),
    pub certificate: ResonanceCertificate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KappaDiagnostics {
    pub pass: bool,
    /// Values (with `|k4|`) that occur more than once.
    pub duplicates: Vec<i64>,
    /// Non-imposed third-order relations, per triple.
    pub violations: Vec<TupleResonance>,
    /// Per triple: rank of the relation lattice beyond the two imposed ones.
    pub extra_rank: Vec<usize>,
    /// Third-order relations linking two different triples. Informational.
    pub cross_tuple: Vec<ResonanceCertificate>,
}

/// Checks pairwise distinctness and the absence of non-imposed third-order
/// resonances within each nested-bracket tuple.
pub fn validate_kappa(assignment: &KappaAssignment) -> Result<KappaDiagnostics> {
    assignment.check_structure()?;
    let values = assignment.distinctness_values();
    let mut duplicates: Vec<i64> =
        values.iter().enumerate().filter(|(i, v)| values[..*i].contains(v)).map(|(_, v)| *v).collect();
    duplicates.sort_unstable();
    duplicates.dedup();

    let mut violations = Vec::new();
    let mut extra_rank = Vec::new();
    for (triple, t) in &assignment.third_order {
        let extra: Vec<ResonanceCertificate> =
            all_resonances(&t.values(), THIRD_ORDER).into_iter().filter(|c| !is_imposed(&c.coefficients)).collect();
        let mut rows: Vec<Vec<i64>> = IMPOSED_RELATIONS.iter().map(|r| r.to_vec()).collect();
        rows.extend(extra.iter().map(|c| c.coefficients.clone()));
        extra_rank.push(integer_rank(&rows) - IMPOSED_RELATIONS.len());
        violations.extend(extra.into_iter().map(|certificate| TupleResonance { triple: *triple, certificate }));
    }

    let mut cross_tuple = Vec::new();
    for i in 0..assignment.third_order.len() {
        for j in (i + 1)..assignment.third_order.len() {
            let joined: Vec<i64> =
                assignment.third_order[i].1.values().into_iter().chain(assignment.third_order[j].1.values()).collect();
            cross_tuple.extend(all_resonances(&joined, THIRD_ORDER).into_iter().filter(|c| {
                c.coefficients[..4].iter().any(|v| *v != 0) && c.coefficients[4..].iter().any(|v| *v != 0)
            }));
        }
    }

    Ok(KappaDiagnostics {
        pass: duplicates.is_empty() && violations.is_empty(),
        duplicates,
        violations,
        extra_rank,
        cross_tuple,
    })
}

/// Rank over the rationals, by fraction-free elimination.
fn integer_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for r in (rank + 1)..m.len() {
            let (a, b) = (m[rank][col], m[r][col]);
            if b == 0 {
                continue;
            }
            let (head, tail) = m.split_at_mut(r);
            for (v, p) in tail[0].iter_mut().zip(&head[rank]) {
                *v = *v * a - p * b;
            }
            let g = m[r].iter().fold(0u64, |g, v| gcd(g, v.unsigned_abs() as u64)) as i128;
            if g > 1 {
                m[r].iter_mut().for_each(|v| *v /= g);
            }
        }
        rank += 1;
    }
    rank
}

/// Greedy smallest-first assignment that passes [`validate_kappa`].
pub fn search_kappa(sets: &IndexSets, bound: i64) -> Result<KappaAssignment> {
    let exhausted = || Error::KappaExhausted { bound };
    let mut used: Vec<i64> = Vec::new();
    let mut second = Vec::with_capacity(sets.s2.len());
    for _ in &sets.s2 {
        let k = (1..=bound).find(|k| !used.contains(k)).ok_or_else(exhausted)?;
        used.push(k);
        second.push(k);
    }
    let mut third = Vec::with_capacity(sets.s3.len());
    for &triple in &sets.s3 {
        let mut chosen = None;
        'search: for k1 in 1..=bound {
            for k2 in 1..=bound {
                let t = TripleKappa::new(k1, k2);
                if k1 == k2 || t.k3() > bound {
                    continue;
                }
                let [a, b, c, d] = t.values();
                let candidate = [a, b, c, d.abs()];
                let distinct = candidate.iter().enumerate().all(|(i, v)| !candidate[..i].contains(v));
                if !distinct || candidate.iter().any(|v| used.contains(v)) {
                    continue;
                }
                let single = KappaAssignment { second_order: vec![], third_order: vec![(triple, t)] };
                if validate_kappa(&single)?.pass {
                    used.extend(candidate);
                    chosen = Some((k1, k2));
                    break 'search;
                }
            }
        }
        third.push(chosen.ok_or_else(exhausted)?);
    }
    KappaAssignment::new(sets, &second, &third)
}

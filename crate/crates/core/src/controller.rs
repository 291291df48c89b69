//! Time-periodic oscillating feedback.
//!
//! With period `eps` and the coefficients `a` obtained from the bracket
//! matrix at a sampled state, input `k` is
//!
//! ```text
//! u_k(t) = sum_{i in S1} a_i d(k,i)
//!   + eps^(-1/2) sum_{(j1,j2) in S2} sqrt|a_j| 2 sqrt(pi kj)
//!       [d(k,j1) sign(a_j) cos(w_j t) + d(k,j2) sin(w_j t)]
//!   + eps^(-2/3) sum_{(l1,l2,l3) in S3} cbrt(a_l) 2 cbrt(2 pi^2 c_l)
//!       [d(k,l1) cos(w1 t) + d(k,l2) sin(w2 t) + d(k,l3) cos(w1 t) sin(w2 t)]
//! ```
//!
//! where `w = 2 pi kappa / eps`, `d` is the Kronecker delta and `c_l` is
//! `k3 * k4` (or `k4` under [`AmplitudeRule::Difference`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Field;
use crate::liealg::{assemble_f, feedback_coefficients, IndexSets};
use crate::resonance::{validate_kappa, KappaAssignment, KappaDiagnostics};

/// Which multiplier product scales the nested-bracket amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeRule {
    /// `2 cbrt(2 pi^2 k3 k4)`.
    #[default]
    Product,
    /// `2 cbrt(2 pi^2 k4)`, the abbreviated form used for the car example.
    Difference,
}

#[derive(Debug, Clone)]
struct SecondTerm {
    j1: usize,
    j2: usize,
    omega: f64,
    gain: f64,
}

#[derive(Debug, Clone)]
struct ThirdTerm {
    l1: usize,
    l2: usize,
    l3: usize,
    omega1: f64,
    omega2: f64,
    gain: f64,
}

/// Everything needed to evaluate the feedback. Immutable once built.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    pub epsilon: f64,
    pub gamma: f64,
    pub x_star: Vec<f64>,
    pub sets: IndexSets,
    pub kappa: KappaAssignment,
    pub m: usize,
    pub amplitude_rule: AmplitudeRule,
    pub diagnostics: KappaDiagnostics,
    pub resonance_acknowledged: bool,
    second: Vec<SecondTerm>,
    third: Vec<ThirdTerm>,
}

impl ControlLaw {
    /// Validates parameters and multipliers and caches per-term constants.
    ///
    /// Multipliers failing [`validate_kappa`] are accepted only when
    /// `acknowledge_resonance` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        epsilon: f64,
        gamma: f64,
        x_star: Vec<f64>,
        sets: IndexSets,
        kappa: KappaAssignment,
        m: usize,
        amplitude_rule: AmplitudeRule,
        acknowledge_resonance: bool,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!("period must be positive, got {epsilon}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("gain must be positive, got {gamma}")));
        }
        sets.validate(x_star.len(), m)?;
        let expected_s2: Vec<_> = kappa.second_order.iter().map(|(p, _)| *p).collect();
        let expected_s3: Vec<_> = kappa.third_order.iter().map(|(t, _)| *t).collect();
        if expected_s2 != sets.s2 || expected_s3 != sets.s3 {
            return Err(Error::Kappa("multipliers do not match the index sets".into()));
        }
        let diagnostics = validate_kappa(&kappa)?;
        if !diagnostics.duplicates.is_empty() {
            return Err(Error::Kappa(format!("multipliers are not pairwise distinct: {:?}", diagnostics.duplicates)));
        }
        if !diagnostics.pass && !acknowledge_resonance {
            return Err(Error::Kappa(format!(
                "unacknowledged third-order resonances: {:?}",
                diagnostics.violations.iter().map(|v| &v.certificate.coefficients).collect::<Vec<_>>()
            )));
        }

        let second = kappa
            .second_order
            .iter()
            .map(|&((j1, j2), k)| SecondTerm {
                j1: j1 - 1,
                j2: j2 - 1,
                omega: 2.0 * PI * k as f64 / epsilon,
                gain: epsilon.powf(-0.5) * 2.0 * (PI * k as f64).sqrt(),
            })
            .collect();
        let third = kappa
            .third_order
            .iter()
            .map(|&((l1, l2, l3), t)| {
                let product = match amplitude_rule {
                    AmplitudeRule::Product => (t.k3() * t.k4()) as f64,
                    AmplitudeRule::Difference => t.k4() as f64,
                };
                ThirdTerm {
                    l1: l1 - 1,
                    l2: l2 - 1,
                    l3: l3 - 1,
                    omega1: 2.0 * PI * t.k1 as f64 / epsilon,
                    omega2: 2.0 * PI * t.k2 as f64 / epsilon,
                    gain: epsilon.powf(-2.0 / 3.0) * 2.0 * (2.0 * PI * PI * product).cbrt(),
                }
            })
            .collect();
        Ok(Self {
            epsilon,
            gamma,
            x_star,
            sets,
            kappa,
            m,
            amplitude_rule,
            diagnostics,
            resonance_acknowledged: acknowledge_resonance,
            second,
            third,
        })
    }

    pub fn n(&self) -> usize {
        self.x_star.len()
    }

    /// Largest multiplier; `max_multiplier / eps` is the fastest frequency.
    pub fn max_multiplier(&self) -> i64 {
        self.kappa.max_multiplier().max(1)
    }

    /// Substeps per period giving the fastest sinusoid 64 steps per cycle.
    pub fn default_substeps(&self) -> usize {
        64 * self.max_multiplier() as usize
    }
}

/// Feedback state frozen at a sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSample {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    /// `sign(a_j)` per `S2` pair, with `sign(0) = 0`.
    pub signs: Vec<f64>,
    /// `sqrt|a_j|` per `S2` pair.
    pub sqrt_amplitudes: Vec<f64>,
    /// Real cube root of `a_l` per `S3` triple.
    pub cbrt_amplitudes: Vec<f64>,
}

impl ControlSample {
    pub fn from_coefficients(sets: &IndexSets, x: Vec<f64>, a: Vec<f64>) -> Self {
        let n1 = sets.s1.len();
        let n2 = sets.s2.len();
        let pair_coeffs = &a[n1..n1 + n2];
        let signs = pair_coeffs
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        let sqrt_amplitudes = pair_coeffs.iter().map(|v| v.abs().sqrt()).collect();
        let cbrt_amplitudes = a[n1 + n2..].iter().map(|v| v.cbrt()).collect();
        Self { x, a, signs, sqrt_amplitudes, cbrt_amplitudes }
    }
}

pub fn prepare_sample(law: &ControlLaw, fields: &[Field], x_sample: &[f64]) -> Result<ControlSample> {
    let matrix = assemble_f(fields, &law.sets, x_sample)?;
    let a = feedback_coefficients(&matrix, law.gamma, x_sample, &law.x_star)?;
    Ok(ControlSample::from_coefficients(&law.sets, x_sample.to_vec(), a))
}

/// `u(t)` for the frozen sample.
pub fn evaluate(law: &ControlLaw, sample: &ControlSample, t: f64) -> Vec<f64> {
    let mut u = vec![0.0; law.m];
    evaluate_into(law, sample, t, &mut u);
    u
}

pub fn evaluate_into(law: &ControlLaw, sample: &ControlSample, t: f64, u: &mut [f64]) {
    u.iter_mut().for_each(|v| *v = 0.0);
    for (&i, &a) in law.sets.s1.iter().zip(&sample.a) {
        u[i - 1] += a;
    }
    for (j, term) in law.second.iter().enumerate() {
        let amp = term.gain * sample.sqrt_amplitudes[j];
        if amp == 0.0 {
            continue;
        }
        let (s, c) = (term.omega * t).sin_cos();
        u[term.j1] += amp * sample.signs[j] * c;
        u[term.j2] += amp * s;
    }
    for (l, term) in law.third.iter().enumerate() {
        let amp = term.gain * sample.cbrt_amplitudes[l];
        if amp == 0.0 {
            continue;
        }
        let c1 = (term.omega1 * t).cos();
        let s2 = (term.omega2 * t).sin();
        u[term.l1] += amp * c1;
        u[term.l2] += amp * s2;
        u[term.l3] += amp * c1 * s2;
    }
}

/// `max_t sum_k |u_k(t)|` over one period, sampled at 1024 points.
pub fn max_magnitude(law: &ControlLaw, sample: &ControlSample) -> f64 {
    const POINTS: usize = 1024;
    let mut u = vec![0.0; law.m];
    (0..POINTS)
        .map(|i| {
            evaluate_into(law, sample, law.epsilon * i as f64 / POINTS as f64, &mut u);
            u.iter().map(|v| v.abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

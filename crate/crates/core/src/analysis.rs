//! Empirical stability certificates computed from trajectories.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulator::Trajectory;

/// Minimum number of sampling instants needed for a certificate.
pub const MIN_SAMPLES: usize = 10;
/// Fraction of the horizon used for the tail radius.
pub const TAIL_FRACTION: f64 = 0.2;
pub const R_SQUARED_THRESHOLD: f64 = 0.9;
/// Sample norms at or below this are treated as numerical zero.
pub const ZERO_NORM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Decay rate of the log-linear fit of the sampled error norms.
    pub lambda_fit: f64,
    pub r_squared: f64,
    /// Largest error norm over the final 20% of the horizon.
    pub rho_est: f64,
    /// First recorded time after which the error stays within `rho`.
    pub t1_est: Option<f64>,
    pub envelope_ok: bool,
    /// Largest rate for which the exponential envelope holds before `t1`;
    /// infinite when no point constrains it.
    pub lambda_envelope: f64,
    /// Share of sampling steps outside the `rho/2` ball that contract by
    /// at least `1 - lambda_fit * eps`.
    pub contraction_fraction: f64,
    /// Set by [`certify_exponential`] only.
    pub exponential_ok: Option<bool>,
    pub rho: f64,
    pub samples_used: usize,
    /// The error hit numerical zero right after the first sample, so no rate
    /// can be fitted; the envelope is then judged by `lambda_envelope` alone.
    pub finite_time: bool,
}

/// Least-squares line `y = intercept + slope * t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(t: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = t.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mt = t[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (ti, yi) in t[..n].iter().zip(&y[..n]) {
        let (dt, dy) = (ti - mt, yi - my);
        stt += dt * dt;
        // offset by y[0] so a constant series has an exactly zero slope
        sty += dt * (yi - y[0]);
        syy += dy * dy;
    }
    if stt == 0.0 {
        return None;
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = t[..n]
        .iter()
        .zip(&y[..n])
        .map(|(ti, yi)| {
            let r = yi - intercept - slope * ti;
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Some(LineFit { slope, intercept, r_squared })
}

/// Sup of the error norm over the last [`TAIL_FRACTION`] of the horizon.
pub fn tail_radius(traj: &Trajectory) -> f64 {
    let start = traj.horizon() * (1.0 - TAIL_FRACTION);
    traj.times.iter().zip(traj.error_norms()).filter(|(t, _)| **t >= start).map(|(_, v)| v).fold(0.0, f64::max)
}

/// Earliest recorded time from which every later point lies in the closed
/// `rho` ball.
pub fn entry_time(times: &[f64], norms: &[f64], rho: f64) -> Option<f64> {
    let mut entry = None;
    for (t, v) in times.iter().zip(norms).rev() {
        if *v > rho {
            break;
        }
        entry = Some(*t);
    }
    entry
}

/// Checks the practical envelope `||x(t)|| <= ||x0|| e^{-lambda t} + rho`.
pub fn certify_practical(traj: &Trajectory, rho: f64) -> Result<StabilityReport> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Parameter(format!("rho must be a non-negative real, got {rho}")));
    }
    let samples = traj.sample_norms();
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooShort { needed: MIN_SAMPLES, found: samples.len() });
    }
    let norms = traj.error_norms();
    let t1 = entry_time(&traj.times, &norms, rho);

    let before_t1 = |t: f64| t1.is_none_or(|t1| t < t1);
    let mut fit_t = Vec::new();
    let mut fit_y = Vec::new();
    for (t, v) in traj.sample_times.iter().zip(&samples) {
        if before_t1(*t) && *v > ZERO_NORM {
            fit_t.push(*t);
            fit_y.push(v.ln());
        }
    }
    if fit_t.len() < 2 {
        (fit_t, fit_y) = log_prefix(&traj.sample_times, &samples);
    }
    Ok(build_report(traj, rho, t1, &fit_t, &fit_y, &norms, &samples, None))
}

/// Fits `ln ||x(t_j)||` over the prefix before the first numerical zero and
/// issues the exponential verdict. The envelope fields use `rho = 0`.
pub fn certify_exponential(traj: &Trajectory) -> Result<StabilityReport> {
    let samples = traj.sample_norms();
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooShort { needed: MIN_SAMPLES, found: samples.len() });
    }
    let norms = traj.error_norms();
    let (fit_t, fit_y) = log_prefix(&traj.sample_times, &samples);
    let mut report =
        build_report(traj, 0.0, entry_time(&traj.times, &norms, 0.0), &fit_t, &fit_y, &norms, &samples, None);
    report.exponential_ok =
        Some(report.finite_time || (report.lambda_fit > 0.0 && report.r_squared >= R_SQUARED_THRESHOLD));
    Ok(report)
}

fn log_prefix(times: &[f64], samples: &[f64]) -> (Vec<f64>, Vec<f64>) {
    times.iter().zip(samples).take_while(|(_, v)| **v > ZERO_NORM).map(|(t, v)| (*t, v.ln())).unzip()
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    traj: &Trajectory,
    rho: f64,
    t1: Option<f64>,
    fit_t: &[f64],
    fit_y: &[f64],
    norms: &[f64],
    samples: &[f64],
    exponential_ok: Option<bool>,
) -> StabilityReport {
    let fit = fit_line(fit_t, fit_y);
    let (lambda_fit, r_squared) = match fit {
        Some(fit) => (-fit.slope, fit.r_squared),
        None => (0.0, 0.0),
    };
    let finite_time = fit.is_none() && samples.get(1).is_some_and(|v| *v <= ZERO_NORM);

    let x0 = norms.first().copied().unwrap_or(0.0);
    let mut lambda_envelope = f64::INFINITY;
    for (t, v) in traj.times.iter().zip(norms) {
        if t1.is_some_and(|t1| *t >= t1) {
            break;
        }
        let excess = v - rho;
        if excess <= 0.0 {
            continue;
        }
        if *t <= 0.0 {
            // x0 itself never violates the envelope
            continue;
        }
        let bound = if x0 > 0.0 { -(excess / x0).ln() / t } else { f64::NEG_INFINITY };
        lambda_envelope = lambda_envelope.min(bound);
    }
    let envelope_ok = lambda_envelope > 0.0 && (finite_time || (lambda_fit > 0.0 && lambda_fit.is_finite()));

    let eps = traj.meta.epsilon;
    let factor = 1.0 - lambda_fit * eps;
    let mut outside = 0usize;
    let mut contracted = 0usize;
    for w in samples.windows(2) {
        if w[0] > rho / 2.0 {
            outside += 1;
            if w[1] <= factor * w[0] {
                contracted += 1;
            }
        }
    }
    let contraction_fraction = if outside == 0 { 1.0 } else { contracted as f64 / outside as f64 };

    StabilityReport {
        lambda_fit,
        r_squared,
        rho_est: tail_radius(traj),
        t1_est: t1,
        envelope_ok,
        lambda_envelope,
        contraction_fraction,
        exponential_ok,
        rho,
        samples_used: fit_t.len(),
        finite_time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepParams {
    pub epsilon: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: SweepParams,
    /// `None` when the run produced no certifiable trajectory.
    pub report: Option<StabilityReport>,
}

/// Rows ordered by `(epsilon, gamma)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const REPORT_HEADER: &str = "eps,gamma,lambda_fit,r_squared,rho_est,t1_est,envelope_ok";

impl SweepTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        for row in &self.rows {
            writeln!(w, "{}", report_line(row.params, row.report.as_ref()))?;
        }
        Ok(())
    }
}

/// One CSV row; an absent `t1_est` or report leaves empty fields.
pub fn report_line(params: SweepParams, report: Option<&StabilityReport>) -> String {
    let head = format!("{:.16e},{:.16e}", params.epsilon, params.gamma);
    match report {
        None => format!("{head},,,,,"),
        Some(r) => {
            let t1 = r.t1_est.map(|t| format!("{t:.16e}")).unwrap_or_default();
            format!("{head},{:.16e},{:.16e},{:.16e},{t1},{}", r.lambda_fit, r.r_squared, r.rho_est, r.envelope_ok)
        }
    }
}

pub fn sweep_summary(runs: Vec<(SweepParams, Option<StabilityReport>)>) -> SweepTable {
    let mut rows: Vec<SweepRow> = runs.into_iter().map(|(params, report)| SweepRow { params, report }).collect();
    rows.sort_by(|a, b| a.params.epsilon.total_cmp(&b.params.epsilon).then(a.params.gamma.total_cmp(&b.params.gamma)));
    SweepTable { rows }
}

//! Sampled-data closed-loop simulation.
//!
//! The feedback coefficients are frozen at `t_j = j * eps` and the
//! time-varying input is applied over `[t_j, t_{j+1})` while the dynamics
//! `x' = g(t, x) + sum_i f_i(x) u_i(t)` are integrated with fixed-step RK4.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::controller::{evaluate_into, prepare_sample, ControlLaw, ControlSample};
use crate::error::{Error, EvalError, Result};
use crate::jets::Field;
use crate::linalg::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Sin,
    Cos,
}

/// `offset + amplitude * wave(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Harmonic {
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub wave: Waveform,
}

impl Harmonic {
    pub fn constant(offset: f64) -> Self {
        Self { offset, ..Self::default() }
    }

    pub fn sin(amplitude: f64, omega: f64) -> Self {
        Self { amplitude, omega, ..Self::default() }
    }

    pub fn cos(amplitude: f64, omega: f64) -> Self {
        Self { amplitude, omega, wave: Waveform::Cos, ..Self::default() }
    }

    pub fn at(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return self.offset;
        }
        let arg = self.omega * t + self.phase;
        let w = match self.wave {
            Waveform::Sin => arg.sin(),
            Waveform::Cos => arg.cos(),
        };
        self.offset + self.amplitude * w
    }

    /// `|offset| + |amplitude|`.
    pub fn bound(&self) -> f64 {
        self.offset.abs() + self.amplitude.abs()
    }
}

/// `coef * x[source]^3 * time_factor(t)` added to component `row` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicTerm {
    pub row: usize,
    pub source: usize,
    pub coef: f64,
    #[serde(default = "unit_harmonic")]
    pub time_factor: Harmonic,
}

fn unit_harmonic() -> Harmonic {
    Harmonic::constant(1.0)
}

/// Uncontrolled part of the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftModel {
    #[default]
    None,
    /// Component-wise harmonic signal of time only.
    TimeSignal {
        components: Vec<Harmonic>,
        #[serde(default)]
        bound: Option<f64>,
    },
    /// Sum of cubic state monomials with harmonic time factors, vanishing at
    /// the origin like `||x||^3`.
    StateCubic { n: usize, terms: Vec<CubicTerm>, cubic_bound: f64, lipschitz: f64 },
    /// Input disturbances: `g(t, x) = sum_k f_k(x) n_k(t)`.
    ActuatorNoise {
        signals: Vec<Harmonic>,
        #[serde(default)]
        bound: Option<f64>,
    },
}

impl DriftModel {
    pub fn is_none(&self) -> bool {
        matches!(self, DriftModel::None)
    }

    /// The declared `M_g`: a bound on `||g||` (or on `||g|| / ||x||^3` for
    /// the cubic variant). Time signals derive one from their harmonics when
    /// none is declared.
    pub fn declared_bound(&self) -> Option<f64> {
        match self {
            DriftModel::None => Some(0.0),
            DriftModel::TimeSignal { components, bound } => {
                bound.or_else(|| Some(components.iter().map(|h| h.bound().powi(2)).sum::<f64>().sqrt()))
            }
            DriftModel::StateCubic { cubic_bound, .. } => Some(*cubic_bound),
            DriftModel::ActuatorNoise { bound, .. } => *bound,
        }
    }

    pub fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        let mismatch = |what: &str, found: usize, expected: usize| {
            Err(Error::Parameter(format!("drift {what} has {found} entries, expected {expected}")))
        };
        match self {
            DriftModel::None => Ok(()),
            DriftModel::TimeSignal { components, .. } if components.len() != n => {
                mismatch("time signal", components.len(), n)
            }
            DriftModel::StateCubic { n: dn, terms, .. } => {
                if *dn != n {
                    return mismatch("state dimension", *dn, n);
                }
                match terms.iter().find(|t| t.row >= n || t.source >= n) {
                    Some(t) => Err(Error::Parameter(format!("cubic drift term {t:?} indexes outside {n}"))),
                    None => Ok(()),
                }
            }
            DriftModel::ActuatorNoise { signals, .. } if signals.len() != m => {
                mismatch("actuator noise", signals.len(), m)
            }
            _ => Ok(()),
        }
    }
}

/// Evaluates the drift at `(t, x)`.
pub fn drift_eval(drift: &DriftModel, fields: &[Field], t: f64, x: &[f64]) -> Result<Vec<f64>, EvalError> {
    let n = x.len();
    let mut out = vec![0.0; n];
    match drift {
        DriftModel::None => {}
        DriftModel::TimeSignal { components, .. } => {
            crate::jets::check_dim(n, components.len())?;
            for (o, h) in out.iter_mut().zip(components) {
                *o = h.at(t);
            }
        }
        DriftModel::StateCubic { terms, .. } => {
            for term in terms {
                crate::jets::check_dim(n, n.max(term.row + 1).max(term.source + 1))?;
                let s = x[term.source];
                out[term.row] += term.coef * s * s * s * term.time_factor.at(t);
            }
        }
        DriftModel::ActuatorNoise { signals, .. } => {
            crate::jets::check_dim(fields.len(), signals.len())?;
            for (field, signal) in fields.iter().zip(signals) {
                let w = signal.at(t);
                if w == 0.0 {
                    continue;
                }
                for (o, f) in out.iter_mut().zip(field.eval(x)?) {
                    *o += f * w;
                }
            }
        }
    }
    Ok(out)
}

/// Open box `|x_i| < max_abs` on selected coordinates (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBound {
    pub index: usize,
    pub max_abs: f64,
}

/// Membership test for the admissible state domain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DomainGuard {
    #[serde(default)]
    pub bounds: Vec<AxisBound>,
}

impl DomainGuard {
    pub fn everywhere() -> Self {
        Self::default()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
            && self.bounds.iter().all(|b| x.get(b.index).is_some_and(|v| v.abs() < b.max_abs))
    }
}

/// Control-affine system `x' = g(t, x) + sum_i f_i(x) u_i`.
#[derive(Clone)]
pub struct ControlSystem {
    pub n: usize,
    pub m: usize,
    pub fields: Vec<Field>,
    pub drift: DriftModel,
    pub guard: DomainGuard,
}

impl std::fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlSystem")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("drift", &self.drift)
            .field("guard", &self.guard)
            .finish_non_exhaustive()
    }
}

impl ControlSystem {
    pub fn new(fields: Vec<Field>, drift: DriftModel, guard: DomainGuard) -> Result<Self> {
        let n = fields
            .first()
            .map(|f| f.dim())
            .ok_or_else(|| Error::Parameter("a control system needs at least one field".into()))?;
        if let Some(bad) = fields.iter().find(|f| f.dim() != n) {
            return Err(Error::Parameter(format!("field dimension {} differs from {n}", bad.dim())));
        }
        drift.check_dims(n, fields.len())?;
        Ok(Self { n, m: fields.len(), fields, drift, guard })
    }

    /// Right-hand side for a given input vector.
    pub fn rhs(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut dx = drift_eval(&self.drift, &self.fields, t, x)?;
        for (field, &ui) in self.fields.iter().zip(u) {
            if ui == 0.0 {
                continue;
            }
            for (d, f) in dx.iter_mut().zip(field.eval(x)?) {
                *d += f * ui;
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub epsilon: f64,
    pub gamma: f64,
    pub kappa2: Vec<i64>,
    pub kappa3: Vec<(i64, i64)>,
    pub substeps: usize,
    pub scenario: String,
    pub x_star: Vec<f64>,
}

/// Dense simulation output; one row per RK4 substep.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub sample_times: Vec<f64>,
    pub sample_states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.meta.x_star.len()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `||x - x_star||` at every recorded point.
    pub fn error_norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| distance(x, &self.meta.x_star)).collect()
    }

    /// `||x(t_j) - x_star||` at every sampling instant.
    pub fn sample_norms(&self) -> Vec<f64> {
        self.sample_states.iter().map(|x| distance(x, &self.meta.x_star)).collect()
    }

    /// Builds a trajectory holding only sampled norms along the first axis.
    /// Used for synthetic certification inputs.
    pub fn from_sample_norms(epsilon: f64, norms: &[f64]) -> Self {
        let times: Vec<f64> = (0..norms.len()).map(|j| j as f64 * epsilon).collect();
        let states: Vec<Vec<f64>> = norms.iter().map(|v| vec![*v]).collect();
        Self {
            times: times.clone(),
            controls: vec![vec![]; norms.len()],
            sample_times: times,
            sample_states: states.clone(),
            states,
            meta: TrajectoryMeta {
                epsilon,
                gamma: 0.0,
                kappa2: vec![],
                kappa3: vec![],
                substeps: 1,
                scenario: "synthetic".into(),
                x_star: vec![0.0],
            },
        }
    }

    /// Writes `t,x1..xn,u1..um,norm_x` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let m = self.controls.first().map_or(0, |u| u.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n()).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("norm_x".into());
        writeln!(w, "{}", header.join(","))?;
        for ((t, x), u) in self.times.iter().zip(&self.states).zip(&self.controls) {
            write!(w, "{t:.16e}")?;
            for v in x.iter().chain(u) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w, ",{:.16e}", distance(x, &self.meta.x_star))?;
        }
        Ok(())
    }
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    norm2(&d)
}

/// Why a run stopped before the horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum RunFailure {
    DomainExit { t: f64, x: Vec<f64> },
    Singular { t: f64, error: Error },
    Evaluation { t: f64, error: EvalError },
    NonFinite { t: f64 },
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::DomainExit { t, x } => write!(f, "state left the domain at t = {t}: {x:?}"),
            RunFailure::Singular { t, error } => write!(f, "feedback unavailable at t = {t}: {error}"),
            RunFailure::Evaluation { t, error } => write!(f, "evaluation failed at t = {t}: {error}"),
            RunFailure::NonFinite { t } => write!(f, "state became non-finite at t = {t}"),
        }
    }
}

/// Result of a closed-loop run; on failure the trajectory is the prefix
/// computed before the stop.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub failure: Option<RunFailure>,
}

impl RunResult {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Number of sampling periods covering `horizon`, rounding up.
pub fn periods_for(horizon: f64, epsilon: f64) -> usize {
    ((horizon / epsilon) - 1e-9).ceil().max(1.0) as usize
}

/// Simulates the sampled-data closed loop from `x0` over whole periods
/// covering `horizon`.
pub fn pi_eps_solve(
    system: &ControlSystem,
    law: &ControlLaw,
    x0: &[f64],
    horizon: f64,
    substeps_per_period: usize,
    scenario: &str,
) -> Result<RunResult> {
    if x0.len() != system.n || law.n() != system.n || law.m != system.m {
        return Err(Error::Parameter(format!(
            "dimension mismatch: system ({}, {}), law ({}, {}), x0 {}",
            system.n,
            system.m,
            law.n(),
            law.m,
            x0.len()
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    if substeps_per_period == 0 {
        return Err(Error::Parameter("substeps per period must be positive".into()));
    }
    if !system.guard.contains(x0) {
        return Err(Error::Parameter(format!("initial state {x0:?} is outside the domain")));
    }

    let eps = law.epsilon;
    let periods = periods_for(horizon, eps);
    let h = eps / substeps_per_period as f64;
    let rows = periods * substeps_per_period + 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(rows),
        states: Vec::with_capacity(rows),
        controls: Vec::with_capacity(rows),
        sample_times: Vec::with_capacity(periods + 1),
        sample_states: Vec::with_capacity(periods + 1),
        meta: TrajectoryMeta {
            epsilon: eps,
            gamma: law.gamma,
            kappa2: law.kappa.second_values(),
            kappa3: law.kappa.third_values(),
            substeps: substeps_per_period,
            scenario: scenario.to_string(),
            x_star: law.x_star.clone(),
        },
    };

    let mut x = x0.to_vec();
    let mut u = vec![0.0; system.m];
    let finish = |traj, failure| Ok(RunResult { trajectory: traj, failure });

    for j in 0..=periods {
        let t_j = j as f64 * eps;
        let sample = match prepare_sample(law, &system.fields, &x) {
            Ok(s) => s,
            Err(Error::Eval(error)) => return finish(traj, Some(RunFailure::Evaluation { t: t_j, error })),
            Err(error) => return finish(traj, Some(RunFailure::Singular { t: t_j, error })),
        };
        traj.sample_times.push(t_j);
        traj.sample_states.push(x.clone());
        evaluate_into(law, &sample, t_j, &mut u);
        traj.times.push(t_j);
        traj.states.push(x.clone());
        traj.controls.push(u.clone());
        if j == periods {
            break;
        }
        for i in 0..substeps_per_period {
            let t = t_j + i as f64 * h;
            x = match rk4_step(system, law, &sample, t, h, &x) {
                Ok(next) => next,
                Err(error) => return finish(traj, Some(RunFailure::Evaluation { t, error })),
            };
            // t_{j+1} is recorded by the next period's sampling step
            if i + 1 == substeps_per_period {
                break;
            }
            let t_next = t_j + (i + 1) as f64 * h;
            if let Some(failure) = check_state(system, t_next, &x) {
                return finish(traj, Some(failure));
            }
            evaluate_into(law, &sample, t_next, &mut u);
            traj.times.push(t_next);
            traj.states.push(x.clone());
            traj.controls.push(u.clone());
        }
        if let Some(failure) = check_state(system, (j + 1) as f64 * eps, &x) {
            return finish(traj, Some(failure));
        }
    }
    finish(traj, None)
}

fn check_state(system: &ControlSystem, t: f64, x: &[f64]) -> Option<RunFailure> {
    if x.iter().any(|v| !v.is_finite()) {
        return Some(RunFailure::NonFinite { t });
    }
    if !system.guard.contains(x) {
        return Some(RunFailure::DomainExit { t, x: x.to_vec() });
    }
    None
}

/// Classical RK4 with the input evaluated at the stage times.
fn rk4_step(
    system: &ControlSystem,
    law: &ControlLaw,
    sample: &ControlSample,
    t: f64,
    h: f64,
    x: &[f64],
) -> Result<Vec<f64>, EvalError> {
    let mut u = vec![0.0; system.m];
    let mut stage = |ts: f64, xs: &[f64]| -> Result<Vec<f64>, EvalError> {
        evaluate_into(law, sample, ts, &mut u);
        system.rhs(ts, xs, &u)
    };
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
    let k1 = stage(t, x)?;
    let k2 = stage(t + 0.5 * h, &axpy(0.5 * h, &k1))?;
    let k3 = stage(t + 0.5 * h, &axpy(0.5 * h, &k2))?;
    let k4 = stage(t + h, &axpy(h, &k3))?;
    Ok((0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Drift magnitudes observed along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftMonitor {
    pub max_norm: f64,
    /// `max ||g|| / ||x||^3` over points with `||x|| > 1e-12`.
    pub max_cubic_ratio: f64,
    pub declared_bound: Option<f64>,
    pub within_declared: bool,
}

/// Re-evaluates the drift along `traj` and compares with the declared bound.
pub fn monitor_bounds(drift: &DriftModel, fields: &[Field], traj: &Trajectory) -> Result<DriftMonitor, EvalError> {
    let mut max_norm: f64 = 0.0;
    let mut max_cubic_ratio: f64 = 0.0;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let g = norm2(&drift_eval(drift, fields, *t, x)?);
        max_norm = max_norm.max(g);
        let r = norm2(x);
        if r > 1e-12 {
            max_cubic_ratio = max_cubic_ratio.max(g / (r * r * r));
        }
    }
    let declared_bound = drift.declared_bound();
    let observed = match drift {
        DriftModel::StateCubic { .. } => max_cubic_ratio,
        _ => max_norm,
    };
    let within_declared = declared_bound.is_none_or(|b| observed <= b * (1.0 + 1e-12));
    Ok(DriftMonitor { max_norm, max_cubic_ratio, declared_bound, within_declared })
}

//! Built-in scenarios.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{AmplitudeRule, ControlLaw};
use crate::error::{EvalError, Result};
use crate::jets::{ConstantField, Field, GenericField, Monomial, PolynomialField, Scalar};
use crate::liealg::{check_rank, IndexSets, RankCriteria, RankReport};
use crate::resonance::{validate_kappa, KappaAssignment, KappaDiagnostics};
use crate::simulator::{
    pi_eps_solve, AxisBound, ControlSystem, CubicTerm, DomainGuard, DriftModel, Harmonic, RunResult,
};

/// Distance kept from the `x5 = +-pi/2` singularity of the vehicle fields.
pub const VEHICLE_PITCH_MARGIN: f64 = 1e-3;
pub const CAR_RANK_SEED: u64 = 20_240_917;
pub const CAR_RANK_POINTS: usize = 100;

pub const SCENARIO_NAMES: [&str; 5] = [
    "underwater_vehicle",
    "underwater_vehicle_cubic_drift",
    "front_wheel_car",
    "sampled_integrator",
    "exponential_baseline",
];

/// A system together with the law parameters and initial condition of one
/// experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub system: ControlSystem,
    pub sets: IndexSets,
    pub kappa2: Vec<i64>,
    pub kappa3: Vec<(i64, i64)>,
    pub epsilon: f64,
    pub gamma: f64,
    pub x_star: Vec<f64>,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub amplitude_rule: AmplitudeRule,
    pub acknowledge_resonance: bool,
    /// Points at which the rank condition is checked.
    pub rank_samples: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn kappa(&self) -> Result<KappaAssignment> {
        KappaAssignment::new(&self.sets, &self.kappa2, &self.kappa3)
    }

    pub fn kappa_diagnostics(&self) -> Result<KappaDiagnostics> {
        validate_kappa(&self.kappa()?)
    }

    pub fn law(&self) -> Result<ControlLaw> {
        ControlLaw::new(
            self.epsilon,
            self.gamma,
            self.x_star.clone(),
            self.sets.clone(),
            self.kappa()?,
            self.system.m,
            self.amplitude_rule,
            self.acknowledge_resonance,
        )
    }

    pub fn check_rank(&self) -> Result<RankReport> {
        check_rank(&self.system.fields, &self.sets, &self.rank_samples, RankCriteria::default())
    }

    /// Runs the scenario over its horizon; `substeps` defaults to
    /// [`ControlLaw::default_substeps`].
    pub fn run(&self, substeps: Option<usize>) -> Result<RunResult> {
        let law = self.law()?;
        let substeps = substeps.unwrap_or_else(|| law.default_substeps());
        pi_eps_solve(&self.system, &law, &self.x0, self.horizon, substeps, &self.name)
    }
}

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "underwater_vehicle" => Some(underwater_vehicle()),
        "underwater_vehicle_cubic_drift" => Some(underwater_vehicle_cubic_drift()),
        "front_wheel_car" => Some(front_wheel_car()),
        "sampled_integrator" => Some(sampled_integrator()),
        "exponential_baseline" => Some(exponential_baseline()),
        _ => None,
    }
}

/// Kinematic underwater vehicle; `x4..x6` are Euler angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VehicleField(pub usize);

impl GenericField for VehicleField {
    fn dim(&self) -> usize {
        6
    }

    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, EvalError> {
        let z = S::zero();
        let one = S::constant(1.0);
        Ok(match self.0 {
            1 => {
                let (c5, s5) = (x[4].cos(), x[4].sin());
                vec![c5 * x[5].cos(), c5 * x[5].sin(), -s5, z, z, z]
            }
            2 => vec![z, z, z, one, z, z],
            3 => {
                let (s4, c4) = (x[3].sin(), x[3].cos());
                vec![z, z, z, s4 * x[4].tan()?, c4, s4 * x[4].sec()?]
            }
            4 => {
                let (s4, c4) = (x[3].sin(), x[3].cos());
                vec![z, z, z, c4 * x[4].tan()?, -s4, c4 * x[4].sec()?]
            }
            k => panic!("vehicle has fields 1..=4, got {k}"),
        })
    }
}

/// Front-wheel drive car; `x3` is the heading and `x4` the steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CarField(pub usize);

impl GenericField for CarField {
    fn dim(&self) -> usize {
        4
    }

    fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, EvalError> {
        let z = S::zero();
        Ok(match self.0 {
            1 => {
                let c4 = x[3].cos();
                vec![x[2].cos() * c4, x[2].sin() * c4, x[3].sin(), z]
            }
            2 => vec![z, z, z, S::constant(1.0)],
            k => panic!("car has fields 1..=2, got {k}"),
        })
    }
}

pub fn vehicle_fields() -> Vec<Field> {
    (1..=4).map(|k| Arc::new(VehicleField(k)) as Field).collect()
}

pub fn car_fields() -> Vec<Field> {
    (1..=2).map(|k| Arc::new(CarField(k)) as Field).collect()
}

pub fn vehicle_guard() -> DomainGuard {
    DomainGuard { bounds: vec![AxisBound { index: 4, max_abs: PI / 2.0 - VEHICLE_PITCH_MARGIN }] }
}

/// `{-1.2, 0, 1.2}^6`.
pub fn vehicle_rank_grid() -> Vec<Vec<f64>> {
    let levels = [-1.2, 0.0, 1.2];
    (0..3usize.pow(6))
        .map(|mut code| {
            (0..6)
                .map(|_| {
                    let v = levels[code % 3];
                    code /= 3;
                    v
                })
                .collect()
        })
        .collect()
}

/// Seeded uniform points in `[-2, 2]^4`.
pub fn car_rank_points() -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(CAR_RANK_SEED);
    (0..CAR_RANK_POINTS).map(|_| (0..4).map(|_| rng.gen_range(-2.0..=2.0)).collect()).collect()
}

fn vehicle_base(name: &str, description: &str, drift: DriftModel) -> Scenario {
    let system = ControlSystem::new(vehicle_fields(), drift, vehicle_guard()).expect("vehicle fields are consistent");
    Scenario {
        name: name.into(),
        description: description.into(),
        system,
        sets: IndexSets::new(vec![1, 2, 3, 4], vec![(1, 3), (1, 4)], vec![]),
        kappa2: vec![1, 2],
        kappa3: vec![],
        epsilon: 0.1,
        gamma: 10.0,
        x_star: vec![0.0; 6],
        x0: vec![5.0, 10.0, 10.0, 1.5 * PI, PI / 4.0, -PI],
        horizon: 20.0,
        amplitude_rule: AmplitudeRule::Product,
        acknowledge_resonance: false,
        rank_samples: vehicle_rank_grid(),
    }
}

/// Vehicle disturbed by `g(t) = (0, 2, 5 sin t, 0, 0, 0)`.
pub fn underwater_vehicle() -> Scenario {
    let drift = DriftModel::TimeSignal {
        components: vec![
            Harmonic::constant(0.0),
            Harmonic::constant(2.0),
            Harmonic::sin(5.0, 1.0),
            Harmonic::constant(0.0),
            Harmonic::constant(0.0),
            Harmonic::constant(0.0),
        ],
        bound: None,
    };
    vehicle_base("underwater_vehicle", "3D underwater vehicle with wave and current disturbance", drift)
}

/// Vehicle with the vanishing drift `g(t, x) = (0, x1^3, x2^3 sin t, 0, 0, 0)`.
pub fn underwater_vehicle_cubic_drift() -> Scenario {
    let x0_norm: f64 = underwater_vehicle().x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let drift = DriftModel::StateCubic {
        n: 6,
        terms: vec![
            CubicTerm { row: 1, source: 0, coef: 1.0, time_factor: Harmonic::constant(1.0) },
            CubicTerm { row: 2, source: 1, coef: 1.0, time_factor: Harmonic::sin(1.0, 1.0) },
        ],
        // sqrt(x1^6 + x2^6) <= ||x||^3
        cubic_bound: 1.0,
        // on the ball of radius ||x0||: |d(s^3)/ds| <= 3 r^2
        lipschitz: 3.0 * x0_norm * x0_norm,
    };
    vehicle_base("underwater_vehicle_cubic_drift", "3D underwater vehicle with state-dependent cubic drift", drift)
}

/// Car with actuator errors `n1 = 2 cos(10 pi t)`, `n2 = sin(20 pi t)`.
pub fn front_wheel_car() -> Scenario {
    let drift = DriftModel::ActuatorNoise {
        signals: vec![Harmonic::cos(2.0, 10.0 * PI), Harmonic::sin(1.0, 20.0 * PI)],
        bound: Some(5f64.sqrt()),
    };
    let system = ControlSystem::new(car_fields(), drift, DomainGuard::everywhere()).expect("car fields are consistent");
    Scenario {
        name: "front_wheel_car".into(),
        description: "front-wheel drive car with actuator noise".into(),
        system,
        sets: IndexSets::new(vec![1, 2], vec![(1, 2)], vec![(1, 2, 1)]),
        kappa2: vec![7],
        kappa3: vec![(3, 1)],
        epsilon: 0.5,
        gamma: 15.0,
        x_star: vec![0.0; 4],
        x0: vec![5.0, 3.0, -PI / 2.0, PI / 4.0],
        horizon: 30.0,
        amplitude_rule: AmplitudeRule::Product,
        acknowledge_resonance: true,
        rank_samples: car_rank_points(),
    }
}

/// `x' = u` with `S1 = {1}`; samples follow `x_{j+1} = (1 - gamma eps) x_j`.
pub fn sampled_integrator() -> Scenario {
    let system =
        ControlSystem::new(vec![Arc::new(ConstantField(vec![1.0]))], DriftModel::None, DomainGuard::everywhere())
            .expect("integrator is consistent");
    Scenario {
        name: "sampled_integrator".into(),
        description: "scalar integrator with sampled proportional feedback".into(),
        system,
        sets: IndexSets::new(vec![1], vec![], vec![]),
        kappa2: vec![],
        kappa3: vec![],
        epsilon: 0.1,
        gamma: 5.0,
        x_star: vec![0.0],
        x0: vec![1.0],
        horizon: 10.0,
        amplitude_rule: AmplitudeRule::Product,
        acknowledge_resonance: false,
        rank_samples: vec![vec![-1.0], vec![0.0], vec![1.0]],
    }
}

/// `x' = x u`; the feedback gives `u = -gamma` away from the origin, so
/// `x(t) = x0 e^{-gamma t}` solves the closed loop exactly.
pub fn exponential_baseline() -> Scenario {
    let field = PolynomialField::new(1, vec![Monomial { row: 0, coef: 1.0, powers: vec![1] }])
        .expect("monomial is well formed");
    let system = ControlSystem::new(vec![Arc::new(field)], DriftModel::None, DomainGuard::everywhere())
        .expect("baseline is consistent");
    Scenario {
        name: "exponential_baseline".into(),
        description: "scalar bilinear system with exact exponential closed loop".into(),
        system,
        sets: IndexSets::new(vec![1], vec![], vec![]),
        kappa2: vec![],
        kappa3: vec![],
        epsilon: 0.5,
        gamma: 2.0,
        x_star: vec![0.0],
        x0: vec![1.0],
        horizon: 5.0,
        amplitude_rule: AmplitudeRule::Product,
        acknowledge_resonance: false,
        rank_samples: vec![vec![-1.0], vec![0.5], vec![2.0]],
    }
}

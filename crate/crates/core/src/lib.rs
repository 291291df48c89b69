//! Stabilizing nonholonomic control-affine systems with drift by
//! time-periodic feedback built from Lie brackets of the control fields.
//!
//! The pipeline is: evaluate fields and brackets on second-order jets
//! ([`jets`], [`liealg`]), pick non-resonant frequency multipliers
//! ([`resonance`]), form the oscillating feedback ([`controller`]), simulate
//! the sampled closed loop ([`simulator`]) and certify decay from the
//! resulting trajectory ([`analysis`]). [`systems`] holds ready-made
//! scenarios.

pub mod analysis;
pub mod controller;
pub mod error;
pub mod jets;
pub mod liealg;
pub mod linalg;
pub mod resonance;
pub mod simulator;
pub mod systems;

pub use analysis::{certify_exponential, certify_practical, sweep_summary, StabilityReport, SweepParams, SweepTable};
pub use controller::{evaluate, prepare_sample, AmplitudeRule, ControlLaw, ControlSample};
pub use error::{Error, EvalError, Result};
pub use jets::{Field, GenericField, Jet2, Monomial, PolynomialField, Scalar, VectorField};
pub use liealg::{
    assemble_f, check_rank, feedback_coefficients, lie_bracket, lie_bracket_field, BracketMatrix, IndexSets,
};
pub use resonance::{
    find_resonance, search_kappa, validate_kappa, KappaAssignment, KappaDiagnostics, ResonanceCertificate, TripleKappa,
};
pub use simulator::{
    drift_eval, monitor_bounds, pi_eps_solve, ControlSystem, DomainGuard, DriftModel, Harmonic, RunFailure, RunResult,
    Trajectory,
};
pub use systems::Scenario;

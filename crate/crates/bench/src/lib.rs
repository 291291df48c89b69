//! Fixed inputs shared by the benchmarks.

use nhstab_core::systems::{self, Scenario};

/// Vehicle state away from the pitch singularity.
pub const VEHICLE_POINT: [f64; 6] = [0.4, -0.3, 0.2, 0.7, 0.5, -0.6];
pub const CAR_POINT: [f64; 4] = [0.5, -0.2, 0.3, -0.4];

/// Car scenario cut to `horizon` seconds.
pub fn short_car(horizon: f64) -> Scenario {
    Scenario { horizon, ..systems::front_wheel_car() }
}

//! Shared fixtures for the benchmark suite: the stock 9-module robot and a
//! representative two-wave turning gait.

use omegagait::{FrictionModel, GaitParams, RobotModel};

pub fn standard_robot() -> RobotModel {
    RobotModel::default()
}

pub fn standard_friction() -> FrictionModel {
    FrictionModel::default()
}

/// Constant-amplitude two-wave gait in the usual turning corner of the
/// parameter space (45 deg on both waves, quarter-period wave offset).
pub fn standard_gait() -> GaitParams {
    GaitParams::constant_two_wave(
        1.5,
        45f64.to_radians(),
        1.0,
        45f64.to_radians(),
        0.2,
        std::f64::consts::FRAC_PI_2,
    )
    .expect("stock gait is valid")
}

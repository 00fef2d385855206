//! Survey per-cycle turning for the three turn families on the default robot.
//!
//! Run with `cargo run --release --example turning_survey`.

use omegagait::dynamics::{angular_displacement, integrate_gait, FrictionModel};
use omegagait::gait::{geometric_turn_gait, offset_turn_gait, AmplitudeProfile, GaitParams};
use omegagait::RobotModel;
use std::f64::consts::FRAC_PI_2;

fn measure(robot: &RobotModel, gait: &GaitParams, label: &str) {
    let friction = FrictionModel::default();
    match integrate_gait(robot, &friction, gait, 2, 128) {
        Ok(traj) => {
            let turn = angular_displacement(&traj).unwrap();
            println!("{label:55} {:8.2} deg/cycle", turn.to_degrees());
        }
        Err(e) => println!("{label:55} failed: {e}"),
    }
}

fn main() {
    let robot = RobotModel::default();
    let deg = |d: f64| d.to_radians();

    println!("== constant-amplitude two-wave turns (k_f = 1.5) ==");
    for a in [20.0, 30.0, 45.0] {
        let gait =
            GaitParams::constant_two_wave(1.5, deg(a), 1.0, deg(a), 0.2, FRAC_PI_2).unwrap();
        measure(&robot, &gait, &format!("in-place turn, a_f = a_o = {a} deg"));
    }

    println!("== spatial frequency of the second wave ==");
    for k_o in [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5] {
        let gait =
            GaitParams::constant_two_wave(1.5, deg(30.0), k_o, deg(30.0), 0.2, FRAC_PI_2).unwrap();
        measure(&robot, &gait, &format!("two-wave 30/30 deg, k_o = {k_o}"));
    }

    println!("== modulated amplitudes ==");
    let modulated = GaitParams::two_wave(
        1.5,
        AmplitudeProfile::LevelSine {
            scale: deg(45.0) / 2.0,
            level: 1.0,
            phase: 0.0,
        },
        1.0,
        AmplitudeProfile::LevelSine {
            scale: deg(45.0) / 2.0,
            level: 1.0,
            phase: 0.0,
        },
        0.2,
        FRAC_PI_2,
    )
    .unwrap();
    measure(&robot, &modulated, "modulated 22.5(1+sin) both waves");

    println!("== offset turns (k = 1.5) ==");
    for kappa in [5.0, 10.0, 15.0] {
        let gait = offset_turn_gait(deg(40.0), deg(kappa), 1.5, 0.2).unwrap();
        measure(&robot, &gait, &format!("offset turn, A = 40 deg, kappa = {kappa} deg"));
    }

    println!("== geometric turns (k = 1.5) ==");
    for psi in [0.5, FRAC_PI_2, 2.5] {
        let gait = geometric_turn_gait(deg(30.0), deg(30.0), 1.5, 0.2, psi).unwrap();
        measure(&robot, &gait, &format!("geometric turn, 30/30 deg, psi = {psi:.2}"));
    }
}

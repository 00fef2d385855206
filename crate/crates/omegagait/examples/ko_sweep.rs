//! Scratch probe: optimized turning for the turn-family comparison (several
//! forward-wave frequencies) and the joint-limit ordering study.

use omegagait::dynamics::FrictionModel;
use omegagait::model::RobotModel;
use omegagait::optimizer::{
    default_multistart_inits, optimize_gait_multistart, optimize_k_o_sweep, OptimizerConfig,
};
use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

fn main() {
    let friction = FrictionModel::default();
    let cfg = OptimizerConfig::default();

    // Chains over k_o per forward frequency; cells of interest: 0 (offset),
    // 1 (omega), k_f (geometric).
    for (k_f, k_o_max) in [(1.0f64, 1.0f64), (2.0, 2.0)] {
        let robot = RobotModel::new(8, 0.07, 0.05, 0.1, FRAC_PI_2).unwrap();
        let n = (k_o_max / 0.25).round() as usize;
        let k_o_values: Vec<f64> = (0..=n).map(|i| 0.25 * i as f64).collect();
        let t0 = Instant::now();
        let points = optimize_k_o_sweep(&robot, &friction, k_f, &k_o_values, &cfg).unwrap();
        println!("== k_f = {k_f} ({:.0}s) ==", t0.elapsed().as_secs_f64());
        for p in &points {
            println!(
                "  k_o {:.2}: turn {:7.2} deg/cycle  params a_f {:.3} g {:.2} pf {:.2} a_o {:.3} po {:.2} psi {:.2}",
                p.k_o,
                p.turn.to_degrees(),
                p.params.a_f,
                p.params.gamma,
                p.params.phi_f,
                p.params.a_o,
                p.params.phi_o,
                p.params.psi
            );
        }
    }

    // Joint-limit ordering at k_f = 1.5, k_o = 1: multistart per limit plus
    // cross-seeding from the neighbors' winners (both directions).
    let limits = [60f64, 75.0, 90.0];
    let t0 = Instant::now();
    let mut results: Vec<(f64, omegagait::GaitParamVector, f64)> = Vec::new();
    for &limit_deg in &limits {
        let robot = RobotModel::new(8, 0.07, 0.05, 0.1, limit_deg.to_radians()).unwrap();
        let inits = default_multistart_inits(robot.joint_limit);
        let (params, turn) =
            optimize_gait_multistart(&robot, &friction, 1.5, 1.0, &inits, &cfg).unwrap();
        results.push((limit_deg, params, turn));
    }
    for pass in 0..2 {
        for step in 1..limits.len() {
            let (from, to) = if pass == 0 {
                (step - 1, step)
            } else {
                (limits.len() - step, limits.len() - step - 1)
            };
            let robot =
                RobotModel::new(8, 0.07, 0.05, 0.1, results[to].0.to_radians()).unwrap();
            // Seed with the neighbor's winner rescaled into this limit's box.
            let scale = results[to].0 / results[from].0;
            let mut seed = results[from].1;
            seed.a_f *= scale;
            seed.a_o *= scale;
            let (params, turn) =
                optimize_gait_multistart(&robot, &friction, 1.5, 1.0, &[seed], &cfg).unwrap();
            if turn > results[to].2 {
                results[to] = (results[to].0, params, turn);
            }
        }
    }
    println!("== theta_max study at k_f 1.5, k_o 1 ({:.0}s) ==", t0.elapsed().as_secs_f64());
    for (limit, params, turn) in &results {
        println!(
            "  theta_max {limit:.0}: turn {:7.2} deg/cycle  a_f {:.3} g {:.2} a_o {:.3}",
            turn.to_degrees(),
            params.a_f,
            params.gamma,
            params.a_o
        );
    }
    let r = results[2].2 / results[0].2;
    println!("  ratio 90/60 = {r:.3}");
}

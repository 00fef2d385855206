//! Scratch probe: compliant vs open-loop turning across peg spacings,
//! swept over the admittance torque gain and run length.

use omegagait::compliance::{seed_start_pose, simulate_compliant_turn, simulate_open_loop_turn};
use omegagait::dynamics::{angular_displacement, FrictionModel};
use omegagait::gait::GaitParams;
use omegagait::model::RobotModel;
use omegagait::{AdmittanceState, PegBoard};
use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

const DEFAULT_TEMPORAL_FREQ: f64 = 0.2;

fn stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn main() {
    let robot = RobotModel::new(8, 0.07, 0.05, 0.1, FRAC_PI_2).unwrap();
    let friction = FrictionModel::default();
    let amp = std::f64::consts::FRAC_PI_4;
    let gait =
        GaitParams::constant_two_wave(1.5, amp, 1.0, amp, DEFAULT_TEMPORAL_FREQ, FRAC_PI_2).unwrap();
    let spacings = [0.2, 0.3, 0.4, 0.5, 0.6];
    let seeds = [1u64, 2, 3, 4, 5];
    let steps = 256;

    for &(gain, cycles) in &[(1.0f64, 3usize), (1.0, 4)] {
        println!("=== gain {gain} cycles {cycles} ===");
        let t0 = Instant::now();
        for &spacing in &spacings {
            let board = PegBoard::hexagonal(&robot, spacing, 1.5).unwrap();
            let mut comp = Vec::new();
            let mut open = Vec::new();
            let mut comp_signed = Vec::new();
            let mut open_span = Vec::new();
            for &seed in &seeds {
                let start = seed_start_pose(&board, seed);
                let mut state = AdmittanceState::with_default_dynamics(robot.joint_limit);
                state.torque_gain = gain;
                match simulate_compliant_turn(
                    &robot, &friction, &gait, &board, state, start, cycles, steps,
                ) {
                    Ok(run) => {
                        let d = angular_displacement(&run.trajectory).unwrap().to_degrees();
                        let poses = &run.trajectory.poses;
                        let span = (poses[poses.len() - 1].heading - poses[0].heading)
                            .to_degrees()
                            / cycles as f64;
                        comp.push(d.abs());
                        comp_signed.push(span.abs());
                    }
                    Err(e) => println!("  ERR compliant spacing {spacing} seed {seed}: {e}"),
                }
                match simulate_open_loop_turn(&robot, &friction, &gait, &board, start, cycles, steps)
                {
                    Ok(run) => {
                        let poses = &run.trajectory.poses;
                        let span = (poses[poses.len() - 1].heading - poses[0].heading)
                            .to_degrees()
                            / cycles as f64;
                        open.push(angular_displacement(&run.trajectory).unwrap().to_degrees().abs());
                        open_span.push(span.abs());
                    }
                    Err(e) => println!("  ERR open spacing {spacing} seed {seed}: {e}"),
                }
            }
            let (cm, cs) = stats(&comp);
            let (om, os) = stats(&open);
            let mean_ok = cm >= om;
            let std_ok = cs <= os;
            println!(
                "spacing {spacing}: comp {cm:7.2} sd {cs:6.2} | open {om:7.2} sd {os:6.2} | mean {} std {}",
                if mean_ok { "PASS" } else { "FAIL" },
                if std_ok { "PASS" } else { "FAIL" },
            );
            println!(
                "              per-seed comp {:?} open {:?}",
                comp.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>(),
                open.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>(),
            );
            let (csm, css) = stats(&comp_signed);
            let (osm, oss) = stats(&open_span);
            println!(
                "              full-span comp {csm:7.2} sd {css:6.2} | open {osm:7.2} sd {oss:6.2} | mean {} std {}",
                if csm >= osm { "PASS" } else { "FAIL" },
                if css <= oss { "PASS" } else { "FAIL" },
            );
        }
        println!("  elapsed {:.1}s", t0.elapsed().as_secs_f64());
    }
}

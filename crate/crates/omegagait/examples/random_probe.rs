//! Scratch probe: distribution of coarse-vs-fine height-function node
//! differences on the phase-pair plane.

use std::f64::consts::FRAC_PI_2;

use omegagait::{
    gait::{GaitParams, DEFAULT_TEMPORAL_FREQ},
    geomech::{height_function, SubShapePlane, SubShapeSpec},
    model::RobotModel,
    FrictionModel,
};

fn main() {
    let r = RobotModel::default();
    let fm = FrictionModel::default();
    let gait = GaitParams::constant_two_wave(1.5, 0.35, 1.0, 0.35, DEFAULT_TEMPORAL_FREQ, FRAC_PI_2)
        .unwrap();
    let spec = SubShapeSpec::new(SubShapePlane::PhasePair, gait, r.joint_limit).unwrap();
    let stats = |na: usize, nb: usize| {
        let coarse = height_function(&r, &spec, na, &fm).unwrap();
        let fine = height_function(&r, &spec, nb, &fm).unwrap();
        let step = (nb - 1) / (na - 1);
        let scale = fine.max_abs();
        let mut rel = Vec::new();
        for iu in 0..na {
            for iv in 0..na {
                let a = coarse.value(iu, iv);
                let b = fine.value(step * iu, step * iv);
                if a.is_nan() || b.is_nan() {
                    continue;
                }
                rel.push((a - b).abs() / scale);
            }
        }
        rel.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| rel[((rel.len() as f64 - 1.0) * p) as usize];
        println!(
            "{na} vs {nb}: n {} scale {:.4} median {:.4} p90 {:.4} p99 {:.4} max {:.4}",
            rel.len(),
            scale,
            q(0.5),
            q(0.9),
            q(0.99),
            rel[rel.len() - 1],
        );
        q(0.5)
    };
    let m1 = stats(33, 65);
    let m2 = stats(65, 129);
    println!("median ratio 33/65 over 65/129: {:.2}", m1 / m2);
}

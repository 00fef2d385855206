//! Hot-path benchmarks: one force-balance solve, a full gait cycle, a
//! height-function grid, and the peg contact query.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use omegagait::compliance::{contact_torques, PegBoard};
use omegagait::dynamics::{integrate_gait, solve_body_velocity, BodyVelocity, ContactSheet};
use omegagait::gait::{shape_at, shape_velocity};
use omegagait::geomech::{height_function, SubShapePlane, SubShapeSpec};
use omegagait::model::backbone_from_shape;
use omegagait_bench::{standard_friction, standard_gait, standard_robot};

fn body_velocity(c: &mut Criterion) {
    let robot = standard_robot();
    let friction = standard_friction();
    let gait = standard_gait();
    let shape = shape_at(&gait, &robot, 0.3);
    let rates = shape_velocity(&gait, &robot, 0.3);
    let sheet = ContactSheet::from_shape(&robot, &friction, &shape, &rates).unwrap();
    c.bench_function("body_velocity_solve", |b| {
        b.iter(|| {
            solve_body_velocity(
                black_box(&sheet),
                black_box([0.0; 3]),
                BodyVelocity::default(),
            )
            .unwrap()
        })
    });
}

fn gait_cycle(c: &mut Criterion) {
    let robot = standard_robot();
    let friction = standard_friction();
    let gait = standard_gait();
    let mut group = c.benchmark_group("integration");
    group.sample_size(20);
    group.bench_function("gait_cycle_64_steps", |b| {
        b.iter(|| integrate_gait(black_box(&robot), &friction, &gait, 1, 64).unwrap())
    });
    group.finish();
}

fn height_grid(c: &mut Criterion) {
    let robot = standard_robot();
    let friction = standard_friction();
    let gait = standard_gait();
    let spec = SubShapeSpec::new(SubShapePlane::PhasePair, gait, robot.joint_limit).unwrap();
    let mut group = c.benchmark_group("geomech");
    group.sample_size(20);
    group.bench_function("height_function_33", |b| {
        b.iter(|| height_function(black_box(&robot), &spec, 33, &friction).unwrap())
    });
    group.finish();
}

fn peg_contacts(c: &mut Criterion) {
    let robot = standard_robot();
    let gait = standard_gait();
    let board = PegBoard::hexagonal(&robot, 0.3, 1.5).unwrap();
    let shape = shape_at(&gait, &robot, 0.3);
    let backbone = backbone_from_shape(&robot, &shape).unwrap();
    c.bench_function("peg_contact_torques", |b| {
        b.iter(|| contact_torques(black_box(&backbone), black_box(&board)))
    });
}

criterion_group!(benches, body_velocity, gait_cycle, height_grid, peg_contacts);
criterion_main!(benches);

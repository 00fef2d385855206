//! Coordinate-descent gait optimization.
//!
//! The modulated two-wave family has six free scalars, grouped by the three
//! prescribed functions they parameterize: the forward-wave amplitude
//! profile (a_f, gamma, phi_f), the second-wave amplitude profile
//! (a_o, phi_o), and the inter-wave phase (psi). Each round optimizes one
//! group at a time with the others held fixed — a coarse grid over the
//! group's box followed by a pattern search — and rounds repeat until the
//! per-cycle turning angle stops improving. Candidates whose gait path
//! leaves the feasible shape set (joint limits, self-collision) are
//! rejected outright rather than penalized.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::dynamics::{
    angular_displacement, integrate_gait, FrictionModel, DEFAULT_STEPS_PER_CYCLE,
};
use crate::error::Error;
use crate::gait::{shape_at, AmplitudeProfile, GaitParams, DEFAULT_TEMPORAL_FREQ};
use crate::model::{is_feasible, RobotModel};

/// The six free scalars of the modulated two-wave family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaitParamVector {
    /// Forward-wave amplitude scale, radians.
    pub a_f: f64,
    /// Forward-wave amplitude floor (>= 1), dimensionless.
    pub gamma: f64,
    /// Forward-wave amplitude modulation phase, radians.
    pub phi_f: f64,
    /// Second-wave amplitude scale, radians.
    pub a_o: f64,
    /// Second-wave amplitude modulation phase, radians.
    pub phi_o: f64,
    /// Phase of the second wave relative to the forward wave, radians.
    pub psi: f64,
}

impl GaitParamVector {
    /// Mid-range starting point used when the caller has no better guess.
    pub fn default_init(theta_max: f64) -> Self {
        GaitParamVector {
            a_f: theta_max / 2.0,
            gamma: 1.0,
            phi_f: 0.0,
            a_o: theta_max / 2.0,
            phi_o: 0.0,
            psi: FRAC_PI_2,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.a_f >= 0.0) || !(self.a_o >= 0.0) {
            return Err(Error::parameter("amplitude scales must be non-negative"));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::parameter("amplitude floor must be >= 1"));
        }
        for v in [self.a_f, self.gamma, self.phi_f, self.a_o, self.phi_o, self.psi] {
            if !v.is_finite() {
                return Err(Error::parameter("gait parameters must be finite"));
            }
        }
        Ok(())
    }

    /// Phases folded into [0, 2 pi).
    pub fn wrapped(mut self) -> Self {
        self.phi_f = self.phi_f.rem_euclid(TAU);
        self.phi_o = self.phi_o.rem_euclid(TAU);
        self.psi = self.psi.rem_euclid(TAU);
        self
    }

    /// Instantiate the template at the given spatial frequencies.
    pub fn to_gait(&self, k_f: f64, k_o: f64, omega_hz: f64) -> Result<GaitParams, Error> {
        self.validate()?;
        GaitParams::two_wave(
            k_f,
            AmplitudeProfile::LevelSine {
                scale: self.a_f,
                level: self.gamma,
                phase: self.phi_f,
            },
            k_o,
            AmplitudeProfile::LevelSine {
                scale: self.a_o,
                level: 1.0,
                phase: self.phi_o,
            },
            omega_hz,
            self.psi,
        )
    }
}

/// One of the three prescribed-function parameter groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubFunction {
    /// Forward-wave amplitude profile: (a_f, gamma, phi_f).
    ForwardAmplitude,
    /// Second-wave amplitude profile: (a_o, phi_o).
    OmegaAmplitude,
    /// Inter-wave phase: psi.
    PhaseLag,
}

/// Why a candidate was rejected, or the turn it achieved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObjectiveValue {
    /// Per-cycle turning angle, radians (signed; the family contains the
    /// mirror of every gait, so maximizing the signed value loses nothing).
    Turn(f64),
    /// Some sampled shape exceeds the joint limit.
    JointLimit,
    /// Some sampled shape self-collides.
    SelfCollision,
    /// The friction balance failed to converge.
    SolverFailure,
}

impl ObjectiveValue {
    pub fn turn(&self) -> Option<f64> {
        match *self {
            ObjectiveValue::Turn(v) => Some(v),
            _ => None,
        }
    }
}

/// Feasibility constraints a search ran into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintFlag {
    JointLimit,
    SelfCollision,
}

/// Search hyperparameters. The defaults match the documented contract:
/// 16-point grids, pattern steps halved to 1e-3, convergence when a full
/// round improves the turn by less than half a degree.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    pub omega_hz: f64,
    pub steps_per_cycle: usize,
    pub feasibility_samples: usize,
    pub grid_points: usize,
    pub pattern_tol: f64,
    pub convergence_tol: f64,
    pub max_rounds: usize,
    /// Upper bound of the gamma box.
    pub gamma_max: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            omega_hz: DEFAULT_TEMPORAL_FREQ,
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            feasibility_samples: 256,
            grid_points: 16,
            pattern_tol: 1e-3,
            convergence_tol: 0.5_f64.to_radians(),
            max_rounds: 20,
            gamma_max: 4.0,
        }
    }
}

/// Trace of one optimization run. `iterates` records the accepted parameter
/// vector and objective after every subfunction pass; the objective column is
/// non-decreasing (negative infinity marks an infeasible starting point).
#[derive(Clone, Debug)]
pub struct OptimizationReport {
    pub iterates: Vec<(GaitParamVector, f64)>,
    pub converged: bool,
    pub rounds: usize,
    pub active_constraints: Vec<ConstraintFlag>,
}

impl OptimizationReport {
    /// Final (best) iterate.
    pub fn best(&self) -> Option<&(GaitParamVector, f64)> {
        self.iterates.last()
    }
}

/// Per-cycle turning angle of the parameterized gait, or the reason it is
/// unusable. Feasibility samples the gait path densely; the turn comes from
/// integrating one full cycle.
pub fn objective(
    robot: &RobotModel,
    friction: &FrictionModel,
    gpv: &GaitParamVector,
    k_f: f64,
    k_o: f64,
    cfg: &OptimizerConfig,
) -> ObjectiveValue {
    let gait = match gpv.to_gait(k_f, k_o, cfg.omega_hz) {
        Ok(g) => g,
        Err(_) => return ObjectiveValue::JointLimit,
    };
    // Cheap pass: joint limits over the sampled cycle.
    let period = gait.period();
    let n = cfg.feasibility_samples;
    let mut shapes = Vec::with_capacity(n);
    for s in 0..n {
        let shape = shape_at(&gait, robot, s as f64 * period / n as f64);
        if shape
            .angles
            .iter()
            .any(|a| a.abs() > robot.joint_limit || !a.is_finite())
        {
            return ObjectiveValue::JointLimit;
        }
        shapes.push(shape);
    }
    // Expensive pass: self-collision.
    for shape in &shapes {
        match is_feasible(robot, shape) {
            Ok(true) => {}
            _ => return ObjectiveValue::SelfCollision,
        }
    }
    match integrate_gait(robot, friction, &gait, 1, cfg.steps_per_cycle) {
        Ok(traj) => match angular_displacement(&traj) {
            Ok(turn) => ObjectiveValue::Turn(turn),
            Err(_) => ObjectiveValue::SolverFailure,
        },
        Err(e) => {
            log::warn!("objective rejected a candidate: {e}");
            ObjectiveValue::SolverFailure
        }
    }
}

/// One search dimension: a closed box, optionally periodic (phases wrap).
struct Dim {
    lo: f64,
    hi: f64,
    wraps: bool,
}

impl Dim {
    fn clamp(&self, x: f64) -> f64 {
        if self.wraps {
            self.lo + (x - self.lo).rem_euclid(self.hi - self.lo)
        } else {
            x.clamp(self.lo, self.hi)
        }
    }

    /// Grid node j of m. Periodic dimensions exclude the duplicate endpoint.
    fn node(&self, j: usize, m: usize) -> f64 {
        if self.wraps {
            self.lo + (self.hi - self.lo) * j as f64 / m as f64
        } else {
            self.lo + (self.hi - self.lo) * j as f64 / (m - 1) as f64
        }
    }
}

/// Exhaustive grid search; returns the best point and value, if any
/// candidate is feasible. Fixed iteration order keeps ties deterministic.
fn grid_best(
    dims: &[Dim],
    per_dim: usize,
    eval: &mut dyn FnMut(&[f64]) -> Option<f64>,
) -> Option<(Vec<f64>, f64)> {
    let total = per_dim.pow(dims.len() as u32);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut coords = vec![0.0; dims.len()];
    for idx in 0..total {
        let mut rem = idx;
        for (d, dim) in dims.iter().enumerate() {
            coords[d] = dim.node(rem % per_dim, per_dim);
            rem /= per_dim;
        }
        if let Some(v) = eval(&coords) {
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((coords.clone(), v));
            }
        }
    }
    best
}

/// Compass pattern search: probe +/- step along each dimension, move to the
/// best improving probe, halve all steps when none improves, stop when every
/// step is below `tol`. Deterministic probe order.
fn pattern_search(
    dims: &[Dim],
    start: Vec<f64>,
    start_value: f64,
    initial_step: &[f64],
    tol: f64,
    eval: &mut dyn FnMut(&[f64]) -> Option<f64>,
) -> (Vec<f64>, f64) {
    let mut here = start;
    let mut value = start_value;
    let mut steps = initial_step.to_vec();
    loop {
        let mut best_probe: Option<(Vec<f64>, f64)> = None;
        for (d, dim) in dims.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let mut probe = here.clone();
                probe[d] = dim.clamp(probe[d] + sign * steps[d]);
                if probe[d] == here[d] {
                    continue;
                }
                if let Some(v) = eval(&probe) {
                    if v > value && best_probe.as_ref().is_none_or(|(_, bv)| v > *bv) {
                        best_probe = Some((probe, v));
                    }
                }
            }
        }
        match best_probe {
            Some((p, v)) => {
                here = p;
                value = v;
            }
            None => {
                for s in &mut steps {
                    *s *= 0.5;
                }
                if steps.iter().all(|s| *s < tol) {
                    return (here, value);
                }
            }
        }
    }
}

/// Indices of a subfunction's parameters within the packed
/// [a_f, gamma, phi_f, a_o, phi_o, psi] layout.
fn slice_dims(which: SubFunction, theta_max: f64, gamma_max: f64) -> (Vec<usize>, Vec<Dim>) {
    match which {
        SubFunction::ForwardAmplitude => (
            vec![0, 1, 2],
            vec![
                Dim { lo: 0.0, hi: theta_max, wraps: false },
                Dim { lo: 1.0, hi: gamma_max, wraps: false },
                Dim { lo: 0.0, hi: TAU, wraps: true },
            ],
        ),
        SubFunction::OmegaAmplitude => (
            vec![3, 4],
            vec![
                Dim { lo: 0.0, hi: theta_max, wraps: false },
                Dim { lo: 0.0, hi: TAU, wraps: true },
            ],
        ),
        SubFunction::PhaseLag => (
            vec![5],
            vec![Dim { lo: 0.0, hi: TAU, wraps: true }],
        ),
    }
}

fn pack(gpv: &GaitParamVector) -> [f64; 6] {
    [gpv.a_f, gpv.gamma, gpv.phi_f, gpv.a_o, gpv.phi_o, gpv.psi]
}

fn unpack(x: &[f64; 6]) -> GaitParamVector {
    GaitParamVector {
        a_f: x[0],
        gamma: x[1],
        phi_f: x[2],
        a_o: x[3],
        phi_o: x[4],
        psi: x[5],
    }
    .wrapped()
}

/// Maximize the objective over one subfunction's parameters, holding the
/// rest fixed. Never returns a point worse than the input: if no candidate
/// beats it (or the whole slice is infeasible) the input comes back and the
/// constraints that caused rejections are flagged.
#[allow(clippy::too_many_arguments)]
pub fn optimize_subfunction(
    which: SubFunction,
    robot: &RobotModel,
    friction: &FrictionModel,
    gpv: &GaitParamVector,
    k_f: f64,
    k_o: f64,
    cfg: &OptimizerConfig,
    flags: &mut Vec<ConstraintFlag>,
) -> (GaitParamVector, Option<f64>) {
    let (indices, dims) = slice_dims(which, robot.joint_limit, cfg.gamma_max);
    let mut packed = pack(gpv);
    let note = |flag: ConstraintFlag, flags: &mut Vec<ConstraintFlag>| {
        if !flags.contains(&flag) {
            flags.push(flag);
        }
    };
    let mut eval = |coords: &[f64]| -> Option<f64> {
        let mut trial = packed;
        for (slot, &i) in indices.iter().enumerate() {
            trial[i] = coords[slot];
        }
        match objective(robot, friction, &unpack(&trial), k_f, k_o, cfg) {
            ObjectiveValue::Turn(v) => Some(v),
            ObjectiveValue::JointLimit => {
                note(ConstraintFlag::JointLimit, flags);
                None
            }
            ObjectiveValue::SelfCollision => {
                note(ConstraintFlag::SelfCollision, flags);
                None
            }
            ObjectiveValue::SolverFailure => None,
        }
    };

    let here: Vec<f64> = indices.iter().map(|&i| packed[i]).collect();
    let here_value = eval(&here);
    let grid = grid_best(&dims, cfg.grid_points, &mut eval);
    // Start the pattern search from the better of {input, grid best}.
    let (start, start_value) = match (here_value, grid) {
        (Some(hv), Some((g, gv))) => {
            if gv > hv {
                (g, gv)
            } else {
                (here.clone(), hv)
            }
        }
        (Some(hv), None) => (here.clone(), hv),
        (None, Some((g, gv))) => (g, gv),
        (None, None) => return (*gpv, None),
    };
    let steps: Vec<f64> = dims
        .iter()
        .map(|d| (d.hi - d.lo) / cfg.grid_points as f64)
        .collect();
    let (found, value) =
        pattern_search(&dims, start, start_value, &steps, cfg.pattern_tol, &mut eval);
    // Guard the monotonicity contract against an infeasible input point.
    if let Some(hv) = here_value {
        if value < hv {
            return (*gpv, Some(hv));
        }
    }
    for (slot, &i) in indices.iter().enumerate() {
        packed[i] = found[slot];
    }
    (unpack(&packed), Some(value))
}

/// Coordinate descent over the three subfunctions until a full round
/// improves the turn by less than the convergence threshold, or the round
/// budget runs out. Deterministic given its inputs.
pub fn optimize_gait(
    robot: &RobotModel,
    friction: &FrictionModel,
    k_f: f64,
    k_o: f64,
    init: GaitParamVector,
    cfg: &OptimizerConfig,
) -> Result<OptimizationReport, Error> {
    init.validate()?;
    friction.validate()?;
    if cfg.max_rounds == 0 {
        return Err(Error::parameter("need at least one optimization round"));
    }
    let mut gpv = init.wrapped();
    let mut best = objective(robot, friction, &gpv, k_f, k_o, cfg)
        .turn()
        .unwrap_or(f64::NEG_INFINITY);
    let mut report = OptimizationReport {
        iterates: vec![(gpv, best)],
        converged: false,
        rounds: 0,
        active_constraints: Vec::new(),
    };
    for round in 0..cfg.max_rounds {
        let round_start = best;
        for which in [
            SubFunction::ForwardAmplitude,
            SubFunction::OmegaAmplitude,
            SubFunction::PhaseLag,
        ] {
            let (next, value) = optimize_subfunction(
                which,
                robot,
                friction,
                &gpv,
                k_f,
                k_o,
                cfg,
                &mut report.active_constraints,
            );
            if let Some(v) = value {
                if v > best {
                    gpv = next;
                    best = v;
                }
            }
            report.iterates.push((gpv, best));
        }
        report.rounds = round + 1;
        if best - round_start < cfg.convergence_tol && best > f64::NEG_INFINITY {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}

/// Fixed family of starting points spanning the amplitude box: the search
/// landscape is multimodal enough that one start routinely parks in a weak
/// local optimum, and these four cover the basins seen in practice.
pub fn default_multistart_inits(theta_max: f64) -> Vec<GaitParamVector> {
    let base = GaitParamVector::default_init(theta_max);
    vec![
        base,
        GaitParamVector {
            a_f: theta_max / 4.0,
            a_o: theta_max / 4.0,
            ..base
        },
        GaitParamVector {
            a_f: theta_max / 3.0,
            gamma: 1.5,
            phi_o: std::f64::consts::PI,
            ..base
        },
        GaitParamVector {
            a_f: theta_max / 6.0,
            gamma: 2.0,
            a_o: theta_max / 3.0,
            ..base
        },
    ]
}

/// Best of [`optimize_gait`] over the given starting points. Deterministic:
/// starts run in order and ties keep the earlier winner.
pub fn optimize_gait_multistart(
    robot: &RobotModel,
    friction: &FrictionModel,
    k_f: f64,
    k_o: f64,
    inits: &[GaitParamVector],
    cfg: &OptimizerConfig,
) -> Result<(GaitParamVector, f64), Error> {
    if inits.is_empty() {
        return Err(Error::parameter("need at least one starting point"));
    }
    let mut best: Option<(GaitParamVector, f64)> = None;
    for init in inits {
        let report = optimize_gait(robot, friction, k_f, k_o, *init, cfg)?;
        if let Some(&(gpv, turn)) = report.best() {
            if best.map_or(true, |(_, b)| turn > b) {
                best = Some((gpv, turn));
            }
        }
    }
    Ok(best.expect("at least one start ran"))
}

/// One row of a spatial-frequency sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepPoint {
    pub k_o: f64,
    pub params: GaitParamVector,
    /// Per-cycle turn, radians (negative infinity when every start was
    /// infeasible).
    pub turn: f64,
}

/// Optimize the template at each second-wave spatial frequency, sharing
/// information between neighboring frequencies: every cell first runs the
/// default multistart family, then two continuation passes re-optimize each
/// cell warm-started from its neighbor's winner (left to right, then right
/// to left), keeping whichever is better. The optimum moves smoothly with
/// the frequency, so continuation rescues cells whose fixed starts all sat
/// in the wrong basin. Deterministic given its inputs.
pub fn optimize_k_o_sweep(
    robot: &RobotModel,
    friction: &FrictionModel,
    k_f: f64,
    k_o_values: &[f64],
    cfg: &OptimizerConfig,
) -> Result<Vec<SweepPoint>, Error> {
    let inits = default_multistart_inits(robot.joint_limit);
    let mut points = Vec::with_capacity(k_o_values.len());
    for &k_o in k_o_values {
        let (params, turn) =
            optimize_gait_multistart(robot, friction, k_f, k_o, &inits, cfg)?;
        points.push(SweepPoint { k_o, params, turn });
    }
    let n = points.len();
    for pass in 0..2 {
        for step in 1..n {
            let (from, to) = if pass == 0 {
                (step - 1, step)
            } else {
                (n - step, n - step - 1)
            };
            let seed = points[from].params;
            let report = optimize_gait(robot, friction, k_f, points[to].k_o, seed, cfg)?;
            if let Some(&(gpv, turn)) = report.best() {
                if turn > points[to].turn {
                    points[to].params = gpv;
                    points[to].turn = turn;
                }
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pattern_search_finds_quadratic_maximum() {
        // -(x - 0.31)^2 - 2 (y + 0.54)^2, maximum at (0.31, -0.54).
        let dims = [
            Dim { lo: -2.0, hi: 2.0, wraps: false },
            Dim { lo: -2.0, hi: 2.0, wraps: false },
        ];
        let mut eval = |p: &[f64]| -> Option<f64> {
            Some(-(p[0] - 0.31).powi(2) - 2.0 * (p[1] + 0.54).powi(2))
        };
        let start = vec![0.0, 0.0];
        let v0 = eval(&start).unwrap();
        let (found, _) = pattern_search(&dims, start, v0, &[0.5, 0.5], 1e-4, &mut eval);
        assert_relative_eq!(found[0], 0.31, epsilon = 1e-3);
        assert_relative_eq!(found[1], -0.54, epsilon = 1e-3);
    }

    #[test]
    fn pattern_search_respects_bounds() {
        // Maximum outside the box: converges to the boundary.
        let dims = [Dim { lo: 0.0, hi: 1.0, wraps: false }];
        let mut eval = |p: &[f64]| -> Option<f64> { Some(p[0]) };
        let (found, value) = pattern_search(&dims, vec![0.5], 0.5, &[0.3], 1e-4, &mut eval);
        assert_relative_eq!(found[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn grid_search_handles_periodic_dimensions() {
        // cos(x - 1.2) on the circle: grid best within one node of 1.2.
        let dims = [Dim { lo: 0.0, hi: TAU, wraps: true }];
        let mut eval = |p: &[f64]| -> Option<f64> { Some((p[0] - 1.2).cos()) };
        let (best, _) = grid_best(&dims, 16, &mut eval).unwrap();
        let node = TAU / 16.0;
        assert!((best[0] - 1.2).abs() <= node / 2.0 + 1e-12);
    }

    #[test]
    fn zero_amplitudes_are_feasible_and_still() {
        let robot = RobotModel::default();
        let gpv = GaitParamVector {
            a_f: 0.0,
            gamma: 1.0,
            phi_f: 0.0,
            a_o: 0.0,
            phi_o: 0.0,
            psi: FRAC_PI_2,
        };
        let v = objective(
            &robot,
            &FrictionModel::default(),
            &gpv,
            1.5,
            1.0,
            &OptimizerConfig::default(),
        );
        match v {
            ObjectiveValue::Turn(t) => assert!(t.abs() < 1e-9, "turn {t}"),
            other => panic!("expected a feasible zero turn, got {other:?}"),
        }
    }

    #[test]
    fn oversized_amplitudes_hit_the_joint_limit() {
        let robot = RobotModel::default();
        let gpv = GaitParamVector {
            a_f: robot.joint_limit,
            gamma: 2.0,
            phi_f: 0.0,
            a_o: robot.joint_limit,
            phi_o: 0.0,
            psi: FRAC_PI_2,
        };
        let v = objective(
            &robot,
            &FrictionModel::default(),
            &gpv,
            1.5,
            1.0,
            &OptimizerConfig::default(),
        );
        assert_eq!(v, ObjectiveValue::JointLimit);
    }

    #[test]
    fn wrapped_phases_land_in_range() {
        let gpv = GaitParamVector {
            a_f: 0.1,
            gamma: 1.0,
            phi_f: -1.0,
            a_o: 0.1,
            phi_o: 9.0,
            psi: -7.0,
        }
        .wrapped();
        for phase in [gpv.phi_f, gpv.phi_o, gpv.psi] {
            assert!((0.0..TAU).contains(&phase));
        }
    }
}

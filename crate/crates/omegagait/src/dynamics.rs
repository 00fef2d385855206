//! Quasi-static locomotion under isotropic Coulomb ground friction.
//!
//! Inertia is negligible at gait speeds, so at every instant the body twist
//! (vx, vy, omega) is the one where net friction force and torque vanish.
//! Friction at each contact point opposes its sliding velocity with magnitude
//! mu * weight; the speed is regularized near zero so the force law is smooth.
//! The net wrench is the negative gradient of the convex dissipation
//! potential
//!
//! ```text
//! D(xi) = sum_j mu w_j sqrt(|v_j(xi)|^2 + reg^2)
//! ```
//!
//! which has a unique stationary point; a damped Newton iteration with the
//! analytic Hessian finds it. Scaling both sides by mu or by a uniform mass
//! factor leaves the balance unchanged, so the resulting motion is exactly
//! independent of the friction coefficient and of uniform mass scaling.

use nalgebra::{Matrix3, Point2, Vector2, Vector3};

use crate::error::Error;
use crate::gait::{shape_at, shape_velocity, GaitParams};
use crate::model::{backbone_from_shape, mean_body_axis, Pose2, RobotModel, ShapeState};

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// Directional finite-difference step (radians of joint angle per unit of the
/// normalized direction) used to turn a joint-rate vector into contact-point
/// velocities of the body-frame backbone.
pub const SHAPE_FD_STEP: f64 = 1e-6;

/// Default temporal resolution of one gait cycle.
pub const DEFAULT_STEPS_PER_CYCLE: usize = 256;

const NEWTON_TOL: f64 = 1e-9;
const NEWTON_MAX_ITERS: usize = 200;

/// Planar body-frame twist.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BodyVelocity {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl BodyVelocity {
    pub fn zero() -> Self {
        BodyVelocity::default()
    }

    pub(crate) fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.omega)
    }

    pub(crate) fn from_vector(v: &Vector3<f64>) -> Self {
        BodyVelocity {
            vx: v.x,
            vy: v.y,
            omega: v.z,
        }
    }
}

/// Ground interaction parameters.
#[derive(Clone, Copy, Debug)]
pub struct FrictionModel {
    /// Coulomb coefficient. The motion it produces is invariant to its value;
    /// it only scales internal forces.
    pub mu: f64,
    /// Sliding-speed regularization, m/s. Below this speed the friction force
    /// rolls off linearly instead of flipping discontinuously.
    pub reg_speed: f64,
    /// Ground contact points per module, spread evenly along its length.
    pub contacts_per_module: usize,
}

impl Default for FrictionModel {
    fn default() -> Self {
        FrictionModel {
            mu: 0.3,
            reg_speed: 1e-4,
            contacts_per_module: 3,
        }
    }
}

impl FrictionModel {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::parameter("friction coefficient must be positive"));
        }
        if !(self.reg_speed > 0.0) || !self.reg_speed.is_finite() {
            return Err(Error::parameter("regularization speed must be positive"));
        }
        if self.contacts_per_module == 0 {
            return Err(Error::parameter("need at least one contact per module"));
        }
        Ok(())
    }
}

/// Snapshot of the ground interface for one instant: body-frame contact
/// points, their shape-induced velocities, and the per-point weight. Built
/// once per solve so the Newton iteration runs allocation-free.
pub struct ContactSheet {
    points: Vec<Point2<f64>>,
    shape_vel: Vec<Vector2<f64>>,
    point_weight: f64,
    mu: f64,
    reg_speed: f64,
    force_scale: f64,
    torque_scale: f64,
}

impl ContactSheet {
    /// Capture the interface at shape `shape` moving at joint rates
    /// `shape_rates`. Point velocities come from a central difference of the
    /// normalized body-frame backbone along the rate direction, so they
    /// include the body frame's own centroid/heading adjustment.
    pub fn from_shape(
        robot: &RobotModel,
        friction: &FrictionModel,
        shape: &ShapeState,
        shape_rates: &[f64],
    ) -> Result<Self, Error> {
        friction.validate()?;
        if shape_rates.len() != shape.len() {
            return Err(Error::ShapeLength {
                expected: shape.len(),
                got: shape_rates.len(),
            });
        }
        let h = SHAPE_FD_STEP;
        let perturbed = |sign: f64| -> ShapeState {
            ShapeState::new(
                shape
                    .angles
                    .iter()
                    .zip(shape_rates)
                    .map(|(&a, &r)| a + sign * h * r)
                    .collect(),
            )
        };
        let here = backbone_from_shape(robot, shape)?;
        let fwd = backbone_from_shape(robot, &perturbed(1.0))?;
        let back = backbone_from_shape(robot, &perturbed(-1.0))?;

        let per = friction.contacts_per_module;
        let mut points = Vec::with_capacity(robot.n_modules() * per);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        here.fill_contact_points(per, &mut points);
        fwd.fill_contact_points(per, &mut plus);
        back.fill_contact_points(per, &mut minus);
        let shape_vel = plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();

        let point_weight = robot.module_mass * GRAVITY / per as f64;
        let total = point_weight * points.len() as f64;
        Ok(ContactSheet {
            points,
            shape_vel,
            point_weight,
            mu: friction.mu,
            reg_speed: friction.reg_speed,
            force_scale: friction.mu * total,
            torque_scale: friction.mu * total * robot.body_length(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Sliding velocity of contact point j at body twist `xi`.
    fn point_velocity(&self, j: usize, xi: &Vector3<f64>) -> Vector2<f64> {
        let p = &self.points[j];
        let sv = &self.shape_vel[j];
        Vector2::new(
            xi.x - xi.z * p.y + sv.x,
            xi.y + xi.z * p.x + sv.y,
        )
    }

    /// Convex friction dissipation potential at twist `xi`.
    pub fn dissipation(&self, xi: &BodyVelocity) -> f64 {
        self.dissipation_vector(&xi.to_vector())
    }

    fn dissipation_vector(&self, v: &Vector3<f64>) -> f64 {
        let eps2 = self.reg_speed * self.reg_speed;
        let mut d = 0.0;
        for j in 0..self.points.len() {
            let s = (self.point_velocity(j, v).norm_squared() + eps2).sqrt();
            d += self.mu * self.point_weight * s;
        }
        d
    }

    /// Net friction wrench [fx, fy, torque] about the body origin.
    pub fn net_wrench(&self, xi: &BodyVelocity) -> [f64; 3] {
        let v = xi.to_vector();
        let w = self.wrench_vector(&v);
        [w.x, w.y, w.z]
    }

    fn wrench_vector(&self, xi: &Vector3<f64>) -> Vector3<f64> {
        let eps2 = self.reg_speed * self.reg_speed;
        let mut out = Vector3::zeros();
        for j in 0..self.points.len() {
            let vel = self.point_velocity(j, xi);
            let s = (vel.norm_squared() + eps2).sqrt();
            let f = vel * (-self.mu * self.point_weight / s);
            let p = &self.points[j];
            out.x += f.x;
            out.y += f.y;
            out.z += p.x * f.y - p.y * f.x;
        }
        out
    }

    /// Hessian of the dissipation potential (= negative twist-Jacobian of the
    /// net wrench). Symmetric positive definite for reg_speed > 0.
    fn hessian(&self, xi: &Vector3<f64>) -> Matrix3<f64> {
        let eps2 = self.reg_speed * self.reg_speed;
        let mut h = Matrix3::zeros();
        for j in 0..self.points.len() {
            let p = &self.points[j];
            let vel = self.point_velocity(j, xi);
            let s2 = vel.norm_squared() + eps2;
            let s = s2.sqrt();
            let c = self.mu * self.point_weight / s;
            // d v_j / d xi rows: vx row (1, 0, -py), vy row (0, 1, px).
            let bx = Vector3::new(1.0, 0.0, -p.y);
            let by = Vector3::new(0.0, 1.0, p.x);
            // mu w (I/s - v v^T / s^3) expanded onto the twist basis.
            let vv = vel / s2;
            let m00 = 1.0 - vv.x * vel.x;
            let m01 = -vv.x * vel.y;
            let m11 = 1.0 - vv.y * vel.y;
            // (B^T M B) with B = [bx; by] and M = [[m00, m01], [m01, m11]].
            for r in 0..3 {
                for cidx in 0..3 {
                    let br = [bx[r], by[r]];
                    let bc = [bx[cidx], by[cidx]];
                    h[(r, cidx)] += c
                        * (br[0] * (m00 * bc[0] + m01 * bc[1])
                            + br[1] * (m01 * bc[0] + m11 * bc[1]));
                }
            }
        }
        h
    }

    fn scaled_residual_norm(&self, g: &Vector3<f64>) -> f64 {
        (g.x.abs() / self.force_scale)
            .max(g.y.abs() / self.force_scale)
            .max(g.z.abs() / self.torque_scale)
    }
}

/// Body twist at which net friction wrench plus `external` (body-frame
/// [fx, fy, torque]) vanishes. `warm` seeds the iteration; pass the previous
/// step's answer when integrating.
pub fn solve_body_velocity(
    sheet: &ContactSheet,
    external: [f64; 3],
    warm: BodyVelocity,
) -> Result<BodyVelocity, Error> {
    let ext = Vector3::new(external[0], external[1], external[2]);
    let mut xi = warm.to_vector();
    let mut residual = sheet.wrench_vector(&xi) + ext;
    for iter in 0..NEWTON_MAX_ITERS {
        let norm = sheet.scaled_residual_norm(&residual);
        if norm < NEWTON_TOL {
            return Ok(BodyVelocity::from_vector(&xi));
        }
        let h = sheet.hessian(&xi);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&residual),
            None => (h + Matrix3::identity() * 1e-12)
                .lu()
                .solve(&residual)
                .ok_or(Error::SolverDiverged {
                    iterations: iter,
                    residual: norm,
                })?,
        };
        // The root is the unique minimizer of the strictly convex potential
        // (dissipation minus external work), so Armijo backtracking on the
        // potential converges globally. The residual norm is no substitute:
        // it rises over friction-saturation plateaus before falling, which
        // rejects the productive full step and crawls. The residual only
        // takes over in the endgame, once the potential's decrease per step
        // drops below f64 resolution while Newton still halves the residual.
        let r2 = residual.norm_squared();
        let potential = sheet.dissipation_vector(&xi) - ext.dot(&xi);
        // residual = -grad(potential), so this is the predicted decrease.
        let predicted = residual.dot(&step);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = xi + step * lambda;
            let decrease = 1e-4 * lambda * predicted;
            let measurable = decrease > 1e-13 * potential.abs();
            let ok = if measurable {
                sheet.dissipation_vector(&trial) - ext.dot(&trial) <= potential - decrease
            } else {
                let r_trial = sheet.wrench_vector(&trial) + ext;
                r_trial.norm_squared() <= r2 * (1.0 - 1e-4 * lambda)
            };
            if ok {
                residual = sheet.wrench_vector(&trial) + ext;
                xi = trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // At the f64 noise floor; accept if already near the root.
            if norm < NEWTON_TOL * 100.0 {
                return Ok(BodyVelocity::from_vector(&xi));
            }
            return Err(Error::SolverDiverged {
                iterations: iter,
                residual: norm,
            });
        }
    }
    Err(Error::SolverDiverged {
        iterations: NEWTON_MAX_ITERS,
        residual: sheet.scaled_residual_norm(&residual),
    })
}

/// Advance a world pose by a constant body twist for `dt` seconds (closed-form
/// rigid-motion exponential, with a series branch for small rotations).
pub fn advance(pose: &Pose2, xi: &BodyVelocity, dt: f64) -> Pose2 {
    let dtheta = xi.omega * dt;
    let (dx, dy) = (xi.vx * dt, xi.vy * dt);
    let (a, b) = if dtheta.abs() < 1e-6 {
        // sin t / t and (1 - cos t) / t to fourth order.
        let s = 1.0 - dtheta * dtheta / 6.0;
        let c = dtheta / 2.0 - dtheta * dtheta * dtheta / 24.0;
        (s * dx - c * dy, c * dx + s * dy)
    } else {
        let s = dtheta.sin() / dtheta;
        let c = (1.0 - dtheta.cos()) / dtheta;
        (s * dx - c * dy, c * dx + s * dy)
    };
    // Headings accumulate without wrapping so orientation histories stay
    // continuous.
    let delta = Pose2::new(a, b, dtheta);
    pose.compose(&delta)
}

/// Time history of a simulated run. `body_axis` is the world-frame mean body
/// axis, continuous (not wrapped), sampled at the same instants as `poses`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub poses: Vec<Pose2>,
    pub shapes: Vec<ShapeState>,
    pub body_axis: Vec<f64>,
    pub steps_per_cycle: usize,
    pub cycles: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrate `cycles` full gait cycles from the identity pose. The twist is
/// solved at each step's temporal midpoint and applied over the whole step
/// (midpoint rule), warm-starting each solve from the previous one.
pub fn integrate_gait(
    robot: &RobotModel,
    friction: &FrictionModel,
    gait: &GaitParams,
    cycles: usize,
    steps_per_cycle: usize,
) -> Result<Trajectory, Error> {
    gait.validate()?;
    if cycles == 0 {
        return Err(Error::parameter("need at least one cycle"));
    }
    if steps_per_cycle < 2 {
        return Err(Error::parameter("need at least two steps per cycle"));
    }
    let n_steps = cycles * steps_per_cycle;
    let dt = gait.period() / steps_per_cycle as f64;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        poses: Vec::with_capacity(n_steps + 1),
        shapes: Vec::with_capacity(n_steps + 1),
        body_axis: Vec::with_capacity(n_steps + 1),
        steps_per_cycle,
        cycles,
    };
    let mut pose = Pose2::identity();
    let mut warm = BodyVelocity::zero();
    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let shape = shape_at(gait, robot, t);
        let backbone = backbone_from_shape(robot, &shape).map_err(|e| e.at_step(k))?;
        let axis = pose.heading + mean_body_axis(&backbone).map_err(|e| e.at_step(k))?;
        traj.times.push(t);
        traj.poses.push(pose);
        traj.shapes.push(shape);
        traj.body_axis.push(axis);
        if k == n_steps {
            break;
        }
        let t_mid = t + dt / 2.0;
        let mid_shape = shape_at(gait, robot, t_mid);
        let mid_rates = shape_velocity(gait, robot, t_mid);
        let sheet = ContactSheet::from_shape(robot, friction, &mid_shape, &mid_rates)
            .map_err(|e| e.at_step(k))?;
        let xi = solve_body_velocity(&sheet, [0.0; 3], warm).map_err(|e| e.at_step(k))?;
        pose = advance(&pose, &xi, dt);
        warm = xi;
    }
    Ok(traj)
}

/// Net body-axis rotation per gait cycle, radians. With two or more cycles
/// the first cycle is treated as transient and the remaining per-cycle
/// rotations are averaged; a single cycle is reported as-is.
pub fn angular_displacement(traj: &Trajectory) -> Result<f64, Error> {
    if traj.cycles == 0 || traj.body_axis.len() < traj.steps_per_cycle * traj.cycles + 1 {
        return Err(Error::TooFewCycles {
            cycles: traj.cycles,
        });
    }
    let end = traj.cycles * traj.steps_per_cycle;
    if traj.cycles == 1 {
        return Ok(traj.body_axis[end] - traj.body_axis[0]);
    }
    let skip = traj.steps_per_cycle;
    Ok((traj.body_axis[end] - traj.body_axis[skip]) / (traj.cycles - 1) as f64)
}

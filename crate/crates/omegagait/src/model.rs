//! Planar chain geometry: module poses, body frame, self-collision.
//!
//! A robot is N+1 rigid modules connected by N revolute joints. Module k+1
//! starts where module k ends, rotated by joint angle k. The body frame puts
//! the centroid of the module centers at the origin and the circular-mean
//! module heading along +x, so a pose of the body frame is also the averaged
//! pose of the whole chain.

use nalgebra::{Point2, Vector2};

use crate::error::Error;

/// Shrink applied to each rectangle side before overlap testing, meters.
pub const COLLISION_MARGIN: f64 = 1e-3;

/// Minimum index separation for collision pairs; closer modules share a joint
/// and always "touch".
pub const MIN_COLLISION_INDEX_GAP: usize = 2;

const DEGENERATE_AXIS_NORM: f64 = 1e-9;

/// Rigid chain description. Lengths in meters, mass in kilograms, joint limit
/// in radians (symmetric about zero).
#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub n_joints: usize,
    pub module_length: f64,
    pub module_width: f64,
    pub module_mass: f64,
    pub joint_limit: f64,
}

impl RobotModel {
    pub fn new(
        n_joints: usize,
        module_length: f64,
        module_width: f64,
        module_mass: f64,
        joint_limit: f64,
    ) -> Result<Self, Error> {
        if n_joints == 0 {
            return Err(Error::parameter("robot needs at least one joint"));
        }
        if !(module_length > 0.0) || !(module_width > 0.0) || !(module_mass > 0.0) {
            return Err(Error::parameter(
                "module length, width and mass must be positive",
            ));
        }
        if !(joint_limit > 0.0 && joint_limit <= std::f64::consts::PI) {
            return Err(Error::parameter("joint limit must lie in (0, pi]"));
        }
        Ok(RobotModel {
            n_joints,
            module_length,
            module_width,
            module_mass,
            joint_limit,
        })
    }

    pub fn n_modules(&self) -> usize {
        self.n_joints + 1
    }

    /// Total backbone length, meters.
    pub fn body_length(&self) -> f64 {
        self.n_modules() as f64 * self.module_length
    }

    pub fn with_joint_limit(&self, joint_limit: f64) -> Result<Self, Error> {
        RobotModel::new(
            self.n_joints,
            self.module_length,
            self.module_width,
            self.module_mass,
            joint_limit,
        )
    }
}

impl Default for RobotModel {
    /// Eight joints of 7 cm x 5 cm, 0.1 kg modules with a 90 degree limit.
    fn default() -> Self {
        RobotModel {
            n_joints: 8,
            module_length: 0.07,
            module_width: 0.05,
            module_mass: 0.1,
            joint_limit: std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Joint angles in radians, proximal to distal. Plain data: feasibility is a
/// separate question answered by [`is_feasible`].
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeState {
    pub angles: Vec<f64>,
}

impl ShapeState {
    pub fn new(angles: Vec<f64>) -> Self {
        ShapeState { angles }
    }

    pub fn zeros(n_joints: usize) -> Self {
        ShapeState {
            angles: vec![0.0; n_joints],
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Mirror image: every joint angle negated.
    pub fn mirrored(&self) -> Self {
        ShapeState {
            angles: self.angles.iter().map(|a| -a).collect(),
        }
    }
}

/// Planar pose. `heading` accumulates unwrapped; wrap only when reporting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2 { x, y, heading }
    }

    pub fn identity() -> Self {
        Pose2 {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        }
    }

    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    /// self * local: local expressed in self's frame, result in self's parent frame.
    pub fn compose(&self, local: &Pose2) -> Pose2 {
        let (s, c) = self.heading.sin_cos();
        Pose2 {
            x: self.x + c * local.x - s * local.y,
            y: self.y + s * local.x + c * local.y,
            heading: self.heading + local.heading,
        }
    }

    pub fn transform_point(&self, p: &Point2<f64>) -> Point2<f64> {
        let (s, c) = self.heading.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    pub fn rotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.heading.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    /// Heading wrapped to (-pi, pi] for reporting.
    pub fn wrapped_heading(&self) -> f64 {
        wrap_angle(self.heading)
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Module poses in some common frame. `module_poses[k]` sits at the proximal
/// end of module k, so consecutive origins are exactly one module length
/// apart. Geometry is carried along so derived quantities need no robot.
#[derive(Clone, Debug)]
pub struct Backbone {
    pub module_poses: Vec<Pose2>,
    pub module_length: f64,
    pub module_width: f64,
}

impl Backbone {
    pub fn n_modules(&self) -> usize {
        self.module_poses.len()
    }

    /// Center of module k's rectangle.
    pub fn module_center(&self, k: usize) -> Point2<f64> {
        let p = &self.module_poses[k];
        let (s, c) = p.heading.sin_cos();
        let half = 0.5 * self.module_length;
        Point2::new(p.x + half * c, p.y + half * s)
    }

    /// Evenly spaced ground-contact points along each module centerline,
    /// appended to `out` proximal to distal.
    pub fn fill_contact_points(&self, per_module: usize, out: &mut Vec<Point2<f64>>) {
        out.clear();
        for p in &self.module_poses {
            let (s, c) = p.heading.sin_cos();
            for m in 0..per_module {
                let d = (m as f64 + 0.5) / per_module as f64 * self.module_length;
                out.push(Point2::new(p.x + d * c, p.y + d * s));
            }
        }
    }

    pub fn contact_points(&self, per_module: usize) -> Vec<Point2<f64>> {
        let mut out = Vec::with_capacity(self.n_modules() * per_module);
        self.fill_contact_points(per_module, &mut out);
        out
    }

    /// World position of joint j (the shared endpoint of modules j and j+1).
    pub fn joint_positions(&self) -> Vec<Point2<f64>> {
        self.module_poses[1..]
            .iter()
            .map(|p| Point2::new(p.x, p.y))
            .collect()
    }

    /// Module rectangles shrunk by `margin` on every side.
    pub fn module_rects(&self, margin: f64) -> Vec<OrientedRect> {
        self.module_poses
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let (s, c) = p.heading.sin_cos();
                OrientedRect {
                    center: self.module_center(k),
                    axis: Vector2::new(c, s),
                    half_length: 0.5 * self.module_length - margin,
                    half_width: 0.5 * self.module_width - margin,
                }
            })
            .collect()
    }

    /// Express this backbone in the parent frame of `world`.
    pub fn transformed(&self, world: &Pose2) -> Backbone {
        Backbone {
            module_poses: self
                .module_poses
                .iter()
                .map(|p| world.compose(p))
                .collect(),
            module_length: self.module_length,
            module_width: self.module_width,
        }
    }
}

/// Chain the modules and normalize into the body frame: centroid of module
/// centers at the origin, circular-mean heading zero.
pub fn backbone_from_shape(robot: &RobotModel, shape: &ShapeState) -> Result<Backbone, Error> {
    if shape.len() != robot.n_joints {
        return Err(Error::ShapeLength {
            expected: robot.n_joints,
            got: shape.len(),
        });
    }
    if shape.angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::parameter("joint angles must be finite"));
    }

    let n = robot.n_modules();
    let len = robot.module_length;
    let mut poses = Vec::with_capacity(n);
    let (mut x, mut y, mut h) = (0.0_f64, 0.0_f64, 0.0_f64);
    poses.push(Pose2::new(x, y, h));
    for &angle in &shape.angles {
        let (s, c) = h.sin_cos();
        x += len * c;
        y += len * s;
        h += angle;
        poses.push(Pose2::new(x, y, h));
    }

    // Centroid of module centers and circular-mean heading.
    let half = 0.5 * len;
    let (mut cx, mut cy) = (0.0, 0.0);
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in &poses {
        let (s, c) = p.heading.sin_cos();
        cx += p.x + half * c;
        cy += p.y + half * s;
        sx += c;
        sy += s;
    }
    cx /= n as f64;
    cy /= n as f64;
    let mean = sy.atan2(sx);

    let (ms, mc) = mean.sin_cos();
    for p in &mut poses {
        let dx = p.x - cx;
        let dy = p.y - cy;
        // rotate by -mean
        p.x = mc * dx + ms * dy;
        p.y = -ms * dx + mc * dy;
        p.heading -= mean;
    }

    Ok(Backbone {
        module_poses: poses,
        module_length: robot.module_length,
        module_width: robot.module_width,
    })
}

/// Circular mean of the module headings. Errors when the heading unit vectors
/// cancel and no mean direction exists.
pub fn mean_body_axis(backbone: &Backbone) -> Result<f64, Error> {
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in &backbone.module_poses {
        let (s, c) = p.heading.sin_cos();
        sx += c;
        sy += s;
    }
    let norm = sx.hypot(sy);
    if norm < DEGENERATE_AXIS_NORM {
        return Err(Error::DegenerateAxis { norm });
    }
    Ok(sy.atan2(sx))
}

/// True when any two non-adjacent module rectangles (index gap >= 2) overlap.
pub fn self_collides(robot: &RobotModel, shape: &ShapeState) -> Result<bool, Error> {
    let backbone = backbone_from_shape(robot, shape)?;
    let rects = backbone.module_rects(COLLISION_MARGIN);
    for i in 0..rects.len() {
        for j in (i + MIN_COLLISION_INDEX_GAP)..rects.len() {
            if rects_overlap(&rects[i], &rects[j]) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Signed shape margin: the largest pair penetration estimate over all
/// non-adjacent pairs. Positive means colliding, negative means clear; the
/// magnitude says by how much (meters) on the certifying axis.
pub fn collision_margin(robot: &RobotModel, shape: &ShapeState) -> Result<f64, Error> {
    let backbone = backbone_from_shape(robot, shape)?;
    let rects = backbone.module_rects(COLLISION_MARGIN);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..rects.len() {
        for j in (i + MIN_COLLISION_INDEX_GAP)..rects.len() {
            worst = worst.max(separation_margin(&rects[i], &rects[j]));
        }
    }
    Ok(worst)
}

/// Joint limits respected and no self-collision.
pub fn is_feasible(robot: &RobotModel, shape: &ShapeState) -> Result<bool, Error> {
    if shape.len() != robot.n_joints {
        return Err(Error::ShapeLength {
            expected: robot.n_joints,
            got: shape.len(),
        });
    }
    if shape.angles.iter().any(|a| a.abs() > robot.joint_limit) {
        return Ok(false);
    }
    Ok(!self_collides(robot, shape)?)
}

/// Rectangle with center, unit long axis, and half extents.
#[derive(Clone, Copy, Debug)]
pub struct OrientedRect {
    pub center: Point2<f64>,
    pub axis: Vector2<f64>,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(-self.axis.y, self.axis.x)
    }

    pub fn corners(&self) -> [Point2<f64>; 4] {
        let l = self.axis * self.half_length;
        let w = self.normal() * self.half_width;
        [
            self.center + l + w,
            self.center + l - w,
            self.center - l - w,
            self.center - l + w,
        ]
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let d = p - self.center;
        d.dot(&self.axis).abs() <= self.half_length && d.dot(&self.normal()).abs() <= self.half_width
    }

    fn projected_radius(&self, dir: &Vector2<f64>) -> f64 {
        self.half_length * self.axis.dot(dir).abs() + self.half_width * self.normal().dot(dir).abs()
    }
}

/// Separating-axis test over the four face normals of the two rectangles.
pub fn rects_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    separation_margin(a, b) >= 0.0
}

/// Minimum over the four candidate axes of (summed projected radii minus
/// projected center distance). Negative certifies separation; positive is the
/// usual minimum-translation penetration estimate.
pub fn separation_margin(a: &OrientedRect, b: &OrientedRect) -> f64 {
    let d = b.center - a.center;
    let axes = [a.axis, a.normal(), b.axis, b.normal()];
    let mut margin = f64::INFINITY;
    for axis in &axes {
        let overlap = a.projected_radius(axis) + b.projected_radius(axis) - d.dot(axis).abs();
        margin = margin.min(overlap);
    }
    margin
}

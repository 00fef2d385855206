//! Shape-space analysis of two-wave gaits.
//!
//! The wave state of a two-wave gait is the 4-vector [A_f, tau_f, A_o,
//! tau_o]. Freezing the modulation laws of all but two coordinates gives a
//! 2-D plane; on that plane the quasi-static friction solve defines a local
//! connection (body twist per unit coordinate rate), whose curl — the height
//! function — predicts net rotation of a closed gait path by Stokes'
//! theorem: the integral of the height function over the enclosed area
//! approximates the per-cycle rotation, with error growing as amplitudes
//! leave the small-angle regime.
//!
//! The machinery here builds the connection row from friction solves
//! linearized about the plane's drive direction (phases advancing, the free
//! amplitude following its template slope; out-of-plane coordinates chained
//! through the frozen modulation laws), differences it into a height grid,
//! masks infeasible cells, and integrates grids over closed paths by
//! winding-number rasterization.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::dynamics::{solve_body_velocity, BodyVelocity, ContactSheet, FrictionModel};
use crate::error::Error;
use crate::gait::{gait_path, shape_from_wave_point, GaitParams, WavePoint};
use crate::model::{is_feasible, RobotModel, ShapeState};

/// Default nodes per axis for height-function and feasibility grids.
pub const DEFAULT_GRID_RESOLUTION: usize = 65;

/// Coarsest permitted grid; below this the curl stencil is meaningless.
pub const MIN_GRID_RESOLUTION: usize = 17;

// Winding samples per cell edge in the surface-integral raster. Thin loops
// (small-amplitude gaits) span only a few cells, so whole-cell counting
// would quantize their area by ~cell/height; sub-cell sampling divides that
// error by this factor without touching the (expensive) grid solves.
const RASTER_SUBDIVISION: usize = 8;

/// Which 2-D slice of the wave state [A_f, tau_f, A_o, tau_o] to analyze.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubShapePlane {
    /// (tau_f, A_f): forward-wave phase against forward-wave amplitude. The
    /// second wave rides along through the frozen phase lag and its own
    /// amplitude law.
    ForwardWave,
    /// (tau_o, A_o): second-wave phase against second-wave amplitude, the
    /// forward wave riding along.
    OmegaWave,
    /// (tau_f, tau_o): both wave phases free and independent; each amplitude
    /// follows its own frozen law.
    PhasePair,
}

/// A 2-D analysis plane: the plane selector plus the gait whose frozen
/// modulation laws fill in the out-of-plane coordinates.
#[derive(Clone, Debug)]
pub struct SubShapeSpec {
    pub plane: SubShapePlane,
    pub gait: GaitParams,
    /// Upper end of the amplitude axes, radians (the joint limit in practice;
    /// phase axes are always [0, 2 pi) cyclic).
    pub amp_max: f64,
}

impl SubShapeSpec {
    pub fn new(plane: SubShapePlane, gait: GaitParams, amp_max: f64) -> Result<Self, Error> {
        gait.validate()?;
        if !(amp_max > 0.0) || !amp_max.is_finite() {
            return Err(Error::parameter("amplitude axis limit must be positive"));
        }
        if gait.forward.spec.sine_shift != 0.0 || gait.omega.spec.sine_shift != 0.0 {
            return Err(Error::parameter(
                "analysis planes use the standard template; fold sine shifts into phase offsets",
            ));
        }
        Ok(SubShapeSpec {
            plane,
            gait,
            amp_max,
        })
    }

    /// (low, high, wraps) for the first plane axis.
    pub fn u_range(&self) -> (f64, f64, bool) {
        (0.0, self.axis_high(0), self.wraps().0)
    }

    /// (low, high, wraps) for the second plane axis.
    pub fn v_range(&self) -> (f64, f64, bool) {
        (0.0, self.axis_high(1), self.wraps().1)
    }

    fn axis_high(&self, axis: usize) -> f64 {
        let w = if axis == 0 {
            self.wraps().0
        } else {
            self.wraps().1
        };
        if w {
            TAU
        } else {
            self.amp_max
        }
    }

    fn wraps(&self) -> (bool, bool) {
        match self.plane {
            SubShapePlane::ForwardWave | SubShapePlane::OmegaWave => (true, false),
            SubShapePlane::PhasePair => (true, true),
        }
    }

    /// Full wave state at plane point (u, v); out-of-plane coordinates follow
    /// the gait's frozen modulation laws.
    pub fn wave_point(&self, u: f64, v: f64) -> WavePoint {
        let psi = self.gait.psi();
        match self.plane {
            SubShapePlane::ForwardWave => {
                let tau_o = u + psi;
                WavePoint {
                    amp_f: v,
                    tau_f: u,
                    amp_o: self.gait.omega.amplitude.value(tau_o),
                    tau_o,
                }
            }
            SubShapePlane::OmegaWave => {
                let tau_f = u - psi;
                WavePoint {
                    amp_f: self.gait.forward.amplitude.value(tau_f),
                    tau_f,
                    amp_o: v,
                    tau_o: u,
                }
            }
            SubShapePlane::PhasePair => WavePoint {
                amp_f: self.gait.forward.amplitude.value(u),
                tau_f: u,
                amp_o: self.gait.omega.amplitude.value(v),
                tau_o: v,
            },
        }
    }

    /// Joint angles at plane point (u, v).
    pub fn shape(&self, robot: &RobotModel, u: f64, v: f64) -> ShapeState {
        let wp = self.wave_point(u, v);
        shape_from_wave_point(
            robot,
            self.gait.forward.spec.spatial_freq,
            self.gait.omega.spec.spatial_freq,
            &wp,
        )
    }

    /// Joint-angle rates when the plane point moves at (du, dv), chaining the
    /// out-of-plane coordinates through the frozen laws.
    pub fn shape_rates(&self, robot: &RobotModel, u: f64, v: f64, du: f64, dv: f64) -> Vec<f64> {
        let wp = self.wave_point(u, v);
        let (damp_f, dtau_f, damp_o, dtau_o) = match self.plane {
            SubShapePlane::ForwardWave => {
                // tau_o tracks tau_f through the constant phase lag, and A_o
                // tracks tau_o through its own law.
                (dv, du, self.gait.omega.amplitude.rate(wp.tau_o) * du, du)
            }
            SubShapePlane::OmegaWave => {
                (self.gait.forward.amplitude.rate(wp.tau_f) * du, du, dv, du)
            }
            SubShapePlane::PhasePair => (
                self.gait.forward.amplitude.rate(wp.tau_f) * du,
                du,
                self.gait.omega.amplitude.rate(wp.tau_o) * dv,
                dv,
            ),
        };
        let n = robot.n_joints;
        let k_f = self.gait.forward.spec.spatial_freq;
        let k_o = self.gait.omega.spec.spatial_freq;
        (0..n)
            .map(|i| {
                let af = wp.tau_f + TAU * k_f * i as f64 / n as f64;
                let ao = wp.tau_o + TAU * k_o * i as f64 / n as f64;
                damp_f * af.sin()
                    + wp.amp_f * af.cos() * dtau_f
                    + damp_o * ao.sin()
                    + wp.amp_o * ao.cos() * dtau_o
            })
            .collect()
    }

    /// Template rate of the second coordinate per unit first coordinate: the
    /// slope of the gait's own path on this plane. Amplitude planes follow
    /// their amplitude law's derivative; the phase pair advances together.
    pub fn template_slope(&self, u: f64) -> f64 {
        match self.plane {
            SubShapePlane::ForwardWave => self.gait.forward.amplitude.rate(u),
            SubShapePlane::OmegaWave => self.gait.omega.amplitude.rate(u),
            SubShapePlane::PhasePair => 1.0,
        }
    }

    /// The gait's own cycle projected onto this plane: `samples` + 1 points
    /// with phase coordinates unwrapped (monotone), so the path is already a
    /// continuous lift.
    pub fn path_projection(&self, samples: usize) -> Vec<(f64, f64)> {
        gait_path(&self.gait, samples)
            .iter()
            .map(|wp| match self.plane {
                SubShapePlane::ForwardWave => (wp.tau_f, wp.amp_f),
                SubShapePlane::OmegaWave => (wp.tau_o, wp.amp_o),
                SubShapePlane::PhasePair => (wp.tau_f, wp.tau_o),
            })
            .collect()
    }

    fn check_point(&self, u: f64, v: f64) -> Result<(), Error> {
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::parameter("plane point must be finite"));
        }
        for (axis, &c) in [u, v].iter().enumerate() {
            let (lo, hi, wraps) = if axis == 0 {
                self.u_range()
            } else {
                self.v_range()
            };
            if !wraps && !(lo..=hi).contains(&c) {
                return Err(Error::parameter(
                    "amplitude coordinate outside the plane's axis range",
                ));
            }
        }
        Ok(())
    }
}

/// Smallest slope span used for the secant in [`connection_row`]: large
/// against the solver tolerance, small against the direction-space curvature
/// of the friction response.
const DRIVE_SLOPE_STEP: f64 = 1e-3;

/// Local connection row at a plane point: the pair (xi_u, xi_v) of body
/// twists per unit coordinate rate, anchored on the plane's two canonical
/// rate directions. The drive direction advances the first coordinate at
/// unit rate with the second following the template slope (out-of-plane
/// coordinates chained through the frozen laws); the reference direction is
/// the same advance with the second coordinate held (the constant-level
/// motion the canonical path closure retraces). xi_v is the secant slope of
/// the solved twist between those directions and xi_u the reference
/// response, so xi_u + slope * xi_v reproduces the drive exactly and xi_u
/// alone the reference exactly; other slopes interpolate first-order.
///
/// The raw quasi-static solve is homogeneous of degree one in the rates but
/// not additive across rate directions, so a frozen-phase amplitude ray is
/// not a usable linearization — combining it with the phase row misstates
/// gait rotation by O(1), flipping even its sign. Anchoring on the two
/// directions that closed gait loops are actually built from is what lets
/// surface integrals of this row's curl track simulated rotation.
pub fn connection_row(
    robot: &RobotModel,
    spec: &SubShapeSpec,
    point: (f64, f64),
    friction: &FrictionModel,
) -> Result<(BodyVelocity, BodyVelocity), Error> {
    spec.check_point(point.0, point.1)?;
    let shape = spec.shape(robot, point.0, point.1);
    let slope = spec.template_slope(point.0);
    let solve_at = |dv: f64| -> Result<BodyVelocity, Error> {
        let rates = spec.shape_rates(robot, point.0, point.1, 1.0, dv);
        let sheet = ContactSheet::from_shape(robot, friction, &shape, &rates)?;
        solve_body_velocity(&sheet, [0.0; 3], BodyVelocity::zero())
    };
    // Degenerate template slopes widen the secant to a usable span; the two
    // anchor directions then all but coincide, so the small inconsistency at
    // the reference is O(step * slope).
    let span = if slope.abs() >= DRIVE_SLOPE_STEP {
        slope
    } else {
        DRIVE_SLOPE_STEP
    };
    let drive = solve_at(slope)?.to_vector();
    let base = solve_at(slope - span)?.to_vector();
    let xi_v = (drive - base) / span;
    let xi_u = drive - xi_v * slope;
    Ok((
        BodyVelocity::from_vector(&xi_u),
        BodyVelocity::from_vector(&xi_v),
    ))
}

/// Height function sampled on an inclusive rectangular grid. `values` is
/// row-major over (u, v): `values[iu * v_axis.len() + iv]`, NaN on nodes
/// whose shape is infeasible. On wrapped axes the last node duplicates the
/// first (both ends of the period are present).
#[derive(Clone, Debug)]
pub struct HeightFunctionGrid {
    pub u_axis: Vec<f64>,
    pub v_axis: Vec<f64>,
    pub values: Vec<f64>,
    pub wraps: (bool, bool),
}

impl HeightFunctionGrid {
    pub fn resolution(&self) -> (usize, usize) {
        (self.u_axis.len(), self.v_axis.len())
    }

    pub fn value(&self, iu: usize, iv: usize) -> f64 {
        self.values[iu * self.v_axis.len() + iv]
    }

    pub fn is_masked(&self, iu: usize, iv: usize) -> bool {
        self.value(iu, iv).is_nan()
    }

    /// Largest |value| over unmasked nodes (0 if everything is masked).
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| !v.is_nan())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Boolean feasibility of the reconstructed shape on the same grid layout as
/// [`HeightFunctionGrid`].
#[derive(Clone, Debug)]
pub struct FeasibilityGrid {
    pub u_axis: Vec<f64>,
    pub v_axis: Vec<f64>,
    pub feasible: Vec<bool>,
    pub wraps: (bool, bool),
}

impl FeasibilityGrid {
    pub fn resolution(&self) -> (usize, usize) {
        (self.u_axis.len(), self.v_axis.len())
    }

    pub fn is_feasible(&self, iu: usize, iv: usize) -> bool {
        self.feasible[iu * self.v_axis.len() + iv]
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn check_resolution(resolution: usize) -> Result<(), Error> {
    if resolution < MIN_GRID_RESOLUTION {
        return Err(Error::parameter(
            "grid resolution below the minimum of 17 nodes per axis",
        ));
    }
    Ok(())
}

/// Curl of the two-component field (cu, cv) on the grid: d cv / du - d cu /
/// dv. Central differences; wrapped axes difference periodically (period =
/// n - 1 nodes), amplitude axes fall back to one-sided second-order stencils
/// at their ends.
fn curl_grid(
    cu: &[f64],
    cv: &[f64],
    nu: usize,
    nv: usize,
    du: f64,
    dv: f64,
    wraps: (bool, bool),
) -> Vec<f64> {
    let at = |field: &[f64], iu: usize, iv: usize| field[iu * nv + iv];
    // d field / d axis at a node, axis period handling per the rules above.
    let diff = |field: &[f64], iu: usize, iv: usize, on_u: bool| -> f64 {
        let (idx, n, wrapped, h) = if on_u {
            (iu, nu, wraps.0, du)
        } else {
            (iv, nv, wraps.1, dv)
        };
        let sample = |j: usize| {
            if on_u {
                at(field, j, iv)
            } else {
                at(field, iu, j)
            }
        };
        if wrapped {
            let m = n - 1;
            let prev = sample((idx + m - 1) % m);
            let next = sample((idx + 1) % m);
            (next - prev) / (2.0 * h)
        } else if idx == 0 {
            (-3.0 * sample(0) + 4.0 * sample(1) - sample(2)) / (2.0 * h)
        } else if idx == n - 1 {
            (3.0 * sample(n - 1) - 4.0 * sample(n - 2) + sample(n - 3)) / (2.0 * h)
        } else {
            (sample(idx + 1) - sample(idx - 1)) / (2.0 * h)
        }
    };
    let mut out = vec![0.0; nu * nv];
    for iu in 0..nu {
        for iv in 0..nv {
            // Wrapped-axis duplicate nodes copy their partners below.
            if (wraps.0 && iu == nu - 1) || (wraps.1 && iv == nv - 1) {
                continue;
            }
            out[iu * nv + iv] = diff(cv, iu, iv, true) - diff(cu, iu, iv, false);
        }
    }
    if wraps.0 {
        for iv in 0..nv {
            out[(nu - 1) * nv + iv] = out[iv];
        }
    }
    if wraps.1 {
        for iu in 0..nu {
            out[iu * nv + nv - 1] = out[iu * nv];
        }
    }
    out
}

/// Rotational height function of the plane: curl of the rotation row of the
/// connection, sampled on an inclusive `resolution` x `resolution` grid.
/// Nodes whose shape violates the joint limit or self-collides are masked
/// NaN (the connection itself is still defined there, so neighbouring
/// stencils stay intact). Nodes where the model itself degenerates — coils
/// so tight the body frame is undefined, or a failed force balance — are
/// also masked; such shapes are far inside the infeasible region.
pub fn height_function(
    robot: &RobotModel,
    spec: &SubShapeSpec,
    resolution: usize,
    friction: &FrictionModel,
) -> Result<HeightFunctionGrid, Error> {
    check_resolution(resolution)?;
    friction.validate()?;
    let (ulo, uhi, _) = spec.u_range();
    let (vlo, vhi, _) = spec.v_range();
    let u_axis = linspace(ulo, uhi, resolution);
    let v_axis = linspace(vlo, vhi, resolution);
    let nv = v_axis.len();

    let cells: Vec<(f64, f64, bool)> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let (iu, iv) = (idx / nv, idx % nv);
            let point = (u_axis[iu], v_axis[iv]);
            match connection_row(robot, spec, point, friction) {
                Ok((xi_u, xi_v)) => {
                    let shape = spec.shape(robot, point.0, point.1);
                    let feasible = is_feasible(robot, &shape).unwrap_or(false);
                    (xi_u.omega, xi_v.omega, feasible)
                }
                Err(_) => (f64::NAN, f64::NAN, false),
            }
        })
        .collect();

    let cu: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let cv: Vec<f64> = cells.iter().map(|c| c.1).collect();
    let du = u_axis[1] - u_axis[0];
    let dv = v_axis[1] - v_axis[0];
    let wraps = spec.wraps();
    let mut values = curl_grid(&cu, &cv, resolution, resolution, du, dv, wraps);
    for (value, cell) in values.iter_mut().zip(&cells) {
        if !cell.2 {
            *value = f64::NAN;
        }
    }
    Ok(HeightFunctionGrid {
        u_axis,
        v_axis,
        values,
        wraps,
    })
}

/// Feasibility of the reconstructed shape over the plane grid.
pub fn feasibility_map(
    robot: &RobotModel,
    spec: &SubShapeSpec,
    resolution: usize,
) -> Result<FeasibilityGrid, Error> {
    check_resolution(resolution)?;
    let (ulo, uhi, _) = spec.u_range();
    let (vlo, vhi, _) = spec.v_range();
    let u_axis = linspace(ulo, uhi, resolution);
    let v_axis = linspace(vlo, vhi, resolution);
    let nv = v_axis.len();
    let feasible: Vec<bool> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let (iu, iv) = (idx / nv, idx % nv);
            let shape = spec.shape(robot, u_axis[iu], v_axis[iv]);
            // Shapes too degenerate to even frame are certainly infeasible.
            is_feasible(robot, &shape).unwrap_or(false)
        })
        .collect();
    Ok(FeasibilityGrid {
        u_axis,
        v_axis,
        feasible,
        wraps: spec.wraps(),
    })
}

/// Result of integrating a height function over a closed path's interior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceIntegral {
    /// Signed integral, radians.
    pub value: f64,
    /// True when the enclosed region touches masked (infeasible) cells; those
    /// cells contribute nothing, so the value underestimates the true area
    /// integral.
    pub crossed_infeasible: bool,
}

/// Signed integral of the height function over the region enclosed by
/// `path`, by winding-number rasterization of the grid cells.
///
/// The path must be closed: on wrapped axes up to whole periods (a path may
/// wind), exactly on amplitude axes. It is lifted to a continuous curve
/// first, so inputs may be given modulo the period as long as consecutive
/// points are less than half a period apart. A winding path is closed
/// canonically with two axis-aligned legs from its lifted endpoint back to
/// the start — the second-axis leg first — which realizes the corner
/// decomposition convention for diagonal paths: the region swept toward the
/// start-side corner counts positively, the opposite corner negatively.
pub fn surface_integral(
    hf: &HeightFunctionGrid,
    path: &[(f64, f64)],
) -> Result<SurfaceIntegral, Error> {
    if path.len() < 2 {
        return Err(Error::OpenPath);
    }
    let period_u = hf.u_axis[hf.u_axis.len() - 1] - hf.u_axis[0];
    let period_v = hf.v_axis[hf.v_axis.len() - 1] - hf.v_axis[0];

    // Continuous lift: shift each point by whole periods on wrapped axes to
    // stay within half a period of its predecessor.
    let mut lifted = Vec::with_capacity(path.len() + 2);
    lifted.push(path[0]);
    for &(pu, pv) in &path[1..] {
        let prev = *lifted.last().unwrap();
        let u = if hf.wraps.0 {
            pu - ((pu - prev.0) / period_u).round() * period_u
        } else {
            pu
        };
        let v = if hf.wraps.1 {
            pv - ((pv - prev.1) / period_v).round() * period_v
        } else {
            pv
        };
        lifted.push((u, v));
    }

    let start = lifted[0];
    let end = *lifted.last().unwrap();
    let tol_u = 1e-6 * period_u.max(1.0);
    let tol_v = 1e-6 * period_v.max(1.0);
    let wind_u = if hf.wraps.0 {
        ((end.0 - start.0) / period_u).round()
    } else {
        0.0
    };
    let wind_v = if hf.wraps.1 {
        ((end.1 - start.1) / period_v).round()
    } else {
        0.0
    };
    if (end.0 - start.0 - wind_u * period_u).abs() > tol_u
        || (end.1 - start.1 - wind_v * period_v).abs() > tol_v
    {
        return Err(Error::OpenPath);
    }
    // Canonical closure for winding paths: v-leg down to the start's v level,
    // then u-leg back to the start.
    if wind_u != 0.0 || wind_v != 0.0 {
        lifted.push((end.0, end.1 - wind_v * period_v));
        lifted.push(start);
    }

    // Bounding box of the lifted polygon decides which periodic copies of a
    // cell center can lie inside it.
    let (mut u_min, mut u_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(u, v) in &lifted {
        u_min = u_min.min(u);
        u_max = u_max.max(u);
        v_min = v_min.min(v);
        v_max = v_max.max(v);
    }

    let winding = |p: (f64, f64)| -> i64 {
        let mut w = 0i64;
        for k in 0..lifted.len() - 1 {
            let a = lifted[k];
            let b = lifted[k + 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if a.1 <= p.1 {
                if b.1 > p.1 && cross > 0.0 {
                    w += 1;
                }
            } else if b.1 <= p.1 && cross < 0.0 {
                w -= 1;
            }
        }
        w
    };

    let (nu, nv) = hf.resolution();
    let du = hf.u_axis[1] - hf.u_axis[0];
    let dv = hf.v_axis[1] - hf.v_axis[0];
    // Sub-cell raster: winding sampled on a k x k lattice inside each cell
    // with the field bilinearly interpolated, so boundary quantization falls
    // by k. Fully enclosed cells reduce exactly to the plain corner mean.
    let k = RASTER_SUBDIVISION;
    let sub_area = du * dv / (k * k) as f64;
    let mut value = 0.0;
    let mut crossed_infeasible = false;
    for iu in 0..nu - 1 {
        for iv in 0..nv - 1 {
            let (u0, v0) = (hf.u_axis[iu], hf.v_axis[iv]);
            // Cells outside the polygon's v span never wind (images shift
            // only wrapped axes).
            if !hf.wraps.1 && (v0 > v_max || v0 + dv < v_min) {
                continue;
            }
            let corners = [
                hf.value(iu, iv),
                hf.value(iu + 1, iv),
                hf.value(iu, iv + 1),
                hf.value(iu + 1, iv + 1),
            ];
            let masked = corners.iter().any(|c| c.is_nan());
            for su in 0..k {
                for sv in 0..k {
                    let s = (su as f64 + 0.5) / k as f64;
                    let t = (sv as f64 + 0.5) / k as f64;
                    let cu = u0 + s * du;
                    let cv = v0 + t * dv;
                    let mut total = 0i64;
                    let (mu_lo, mu_hi) = if hf.wraps.0 {
                        (
                            ((u_min - cu) / period_u).ceil() as i64,
                            ((u_max - cu) / period_u).floor() as i64,
                        )
                    } else {
                        (0, 0)
                    };
                    let (mv_lo, mv_hi) = if hf.wraps.1 {
                        (
                            ((v_min - cv) / period_v).ceil() as i64,
                            ((v_max - cv) / period_v).floor() as i64,
                        )
                    } else {
                        (0, 0)
                    };
                    for mu in mu_lo..=mu_hi {
                        for mv in mv_lo..=mv_hi {
                            total +=
                                winding((cu + mu as f64 * period_u, cv + mv as f64 * period_v));
                        }
                    }
                    if total == 0 {
                        continue;
                    }
                    if masked {
                        crossed_infeasible = true;
                        continue;
                    }
                    let interp = (1.0 - s) * (1.0 - t) * corners[0]
                        + s * (1.0 - t) * corners[1]
                        + (1.0 - s) * t * corners[2]
                        + s * t * corners[3];
                    value += interp * sub_area * total as f64;
                }
            }
        }
    }
    Ok(SurfaceIntegral {
        value,
        crossed_infeasible,
    })
}

/// One-call pipeline: project the gait's cycle onto `plane`, build the
/// height function there, and integrate over the enclosed area. The result
/// approximates per-cycle rotation at small amplitudes.
pub fn gait_surface_integral(
    robot: &RobotModel,
    gait: &GaitParams,
    plane: SubShapePlane,
    resolution: usize,
    friction: &FrictionModel,
    path_samples: usize,
) -> Result<SurfaceIntegral, Error> {
    let spec = SubShapeSpec::new(plane, gait.clone(), robot.joint_limit)?;
    let hf = height_function(robot, &spec, resolution, friction)?;
    let path = spec.path_projection(path_samples);
    surface_integral(&hf, &path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{angular_displacement, integrate_gait};
    use crate::gait::{shape_at, shape_velocity, AmplitudeProfile, DEFAULT_TEMPORAL_FREQ};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn robot() -> RobotModel {
        RobotModel::default()
    }

    fn modulated_gait(scale: f64) -> GaitParams {
        GaitParams::two_wave(
            1.5,
            AmplitudeProfile::LevelSine {
                scale,
                level: 1.2,
                phase: 0.3,
            },
            1.0,
            AmplitudeProfile::LevelSine {
                scale,
                level: 1.0,
                phase: -0.5,
            },
            DEFAULT_TEMPORAL_FREQ,
            FRAC_PI_2,
        )
        .unwrap()
    }

    /// The mirrored standard template: both phase offsets shifted by pi with
    /// the amplitude laws re-phased so every amplitude trajectory is
    /// unchanged while every joint angle negates.
    fn mirrored_standard(gait: &GaitParams) -> GaitParams {
        let mut g = gait.clone();
        for wave in [&mut g.forward, &mut g.omega] {
            wave.spec.phase_offset += PI;
            if let AmplitudeProfile::LevelSine { ref mut phase, .. } = wave.amplitude {
                *phase -= PI;
            }
        }
        g
    }

    #[test]
    fn chain_rule_rates_match_gait_velocity_along_its_own_path() {
        let r = robot();
        let gait = modulated_gait(0.25);
        let rate = TAU * gait.temporal_freq();
        for plane in [
            SubShapePlane::ForwardWave,
            SubShapePlane::OmegaWave,
            SubShapePlane::PhasePair,
        ] {
            let spec = SubShapeSpec::new(plane, gait.clone(), r.joint_limit).unwrap();
            for step in 0..16 {
                let t = step as f64 * gait.period() / 16.0;
                let wp = crate::gait::wave_point_at(&gait, t);
                let (u, v) = match plane {
                    SubShapePlane::ForwardWave => (wp.tau_f, wp.amp_f),
                    SubShapePlane::OmegaWave => (wp.tau_o, wp.amp_o),
                    SubShapePlane::PhasePair => (wp.tau_f, wp.tau_o),
                };
                // Plane velocity of the gait's own path at time t.
                let (du, dv) = match plane {
                    SubShapePlane::ForwardWave => {
                        (rate, gait.forward.amplitude.rate(wp.tau_f) * rate)
                    }
                    SubShapePlane::OmegaWave => {
                        (rate, gait.omega.amplitude.rate(wp.tau_o) * rate)
                    }
                    SubShapePlane::PhasePair => (rate, rate),
                };
                let via_plane = spec.shape_rates(&r, u, v, du, dv);
                let direct = shape_velocity(&gait, &r, t);
                let shape_direct = shape_at(&gait, &r, t);
                let shape_plane = spec.shape(&r, u, v);
                for i in 0..r.n_joints {
                    assert_relative_eq!(
                        shape_plane.angles[i],
                        shape_direct.angles[i],
                        epsilon = 1e-12
                    );
                    assert_relative_eq!(via_plane[i], direct[i], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_amplitude_gait_has_zero_connection() {
        let r = robot();
        let gait =
            GaitParams::constant_two_wave(1.5, 0.0, 1.0, 0.0, DEFAULT_TEMPORAL_FREQ, FRAC_PI_2)
                .unwrap();
        let spec = SubShapeSpec::new(SubShapePlane::ForwardWave, gait, r.joint_limit).unwrap();
        let (xi_u, _) = connection_row(&r, &spec, (1.3, 0.0), &FrictionModel::default()).unwrap();
        assert!(xi_u.vx.abs() < 1e-9);
        assert!(xi_u.vy.abs() < 1e-9);
        assert!(xi_u.omega.abs() < 1e-9);
    }

    #[test]
    fn connection_is_homogeneous_in_the_coordinate_rate() {
        let r = robot();
        // The exact Coulomb law is homogeneous of degree one in the rates;
        // the speed regularization breaks it at second order in
        // reg_speed / sliding speed, so test with a tightened regularizer.
        let fm = FrictionModel {
            reg_speed: 1e-6,
            ..FrictionModel::default()
        };
        let gait = modulated_gait(0.3);
        let spec = SubShapeSpec::new(SubShapePlane::OmegaWave, gait, r.joint_limit).unwrap();
        let (u, v) = (2.1, 0.35);
        let shape = spec.shape(&r, u, v);
        let unit = spec.shape_rates(&r, u, v, 1.0, 0.0);
        let double = spec.shape_rates(&r, u, v, 2.0, 0.0);
        let s1 = ContactSheet::from_shape(&r, &fm, &shape, &unit).unwrap();
        let s2 = ContactSheet::from_shape(&r, &fm, &shape, &double).unwrap();
        let xi1 = solve_body_velocity(&s1, [0.0; 3], BodyVelocity::zero()).unwrap();
        let xi2 = solve_body_velocity(&s2, [0.0; 3], BodyVelocity::zero()).unwrap();
        assert_relative_eq!(xi2.vx, 2.0 * xi1.vx, epsilon = 1e-9, max_relative = 1e-6);
        assert_relative_eq!(xi2.vy, 2.0 * xi1.vy, epsilon = 1e-9, max_relative = 1e-6);
        assert_relative_eq!(xi2.omega, 2.0 * xi1.omega, epsilon = 1e-9, max_relative = 1e-6);
    }

    #[test]
    fn mirrored_gait_negates_rotational_connection() {
        let r = robot();
        let fm = FrictionModel::default();
        let gait = modulated_gait(0.3);
        let mirrored = mirrored_standard(&gait);
        let spec = SubShapeSpec::new(SubShapePlane::ForwardWave, gait, r.joint_limit).unwrap();
        let spec_m =
            SubShapeSpec::new(SubShapePlane::ForwardWave, mirrored, r.joint_limit).unwrap();
        for &(u, v) in &[(0.7, 0.3), (2.9, 0.5), (4.4, 0.15)] {
            // The mirrored template passes through the negated shape one half
            // phase later.
            let (xi_u, xi_v) = connection_row(&r, &spec, (u, v), &fm).unwrap();
            let (mi_u, mi_v) = connection_row(&r, &spec_m, (u + PI, v), &fm).unwrap();
            assert_relative_eq!(mi_u.omega, -xi_u.omega, epsilon = 1e-7);
            assert_relative_eq!(mi_v.omega, -xi_v.omega, epsilon = 1e-7);
            assert_relative_eq!(mi_u.vy, -xi_u.vy, epsilon = 1e-7);
            assert_relative_eq!(mi_u.vx, xi_u.vx, epsilon = 1e-7);
        }
    }

    #[test]
    fn curl_of_constant_field_is_zero() {
        let n = 21;
        let cu = vec![0.7; n * n];
        let cv = vec![-1.3; n * n];
        for wraps in [(false, false), (true, false), (true, true)] {
            // One-sided boundary stencils cancel only to rounding.
            let curl = curl_grid(&cu, &cv, n, n, 0.1, 0.2, wraps);
            assert!(curl.iter().all(|&h| h.abs() < 1e-13));
        }
    }

    #[test]
    fn curl_matches_analytic_field() {
        // cu = sin(v), cv = sin(u) on [0, 2 pi]^2: curl = cos(u) - cos(v).
        let n = 65;
        let axis = linspace(0.0, TAU, n);
        let h = axis[1] - axis[0];
        let mut cu = vec![0.0; n * n];
        let mut cv = vec![0.0; n * n];
        for iu in 0..n {
            for iv in 0..n {
                cu[iu * n + iv] = axis[iv].sin();
                cv[iu * n + iv] = axis[iu].sin();
            }
        }
        let curl = curl_grid(&cu, &cv, n, n, h, h, (true, true));
        // Two second-order stencils, each h^2 |f'''| / 6 at worst.
        let tol = 2.5 * h * h / 6.0;
        for iu in 0..n {
            for iv in 0..n {
                let expected = axis[iu].cos() - axis[iv].cos();
                assert!(
                    (curl[iu * n + iv] - expected).abs() < tol,
                    "node ({iu},{iv}): {} vs {expected}",
                    curl[iu * n + iv]
                );
            }
        }
    }

    /// Relative node differences between a grid and one twice as fine:
    /// (median, 90th percentile) of |coarse - fine| / max|fine|.
    fn shared_node_diff_quantiles(
        coarse: &HeightFunctionGrid,
        fine: &HeightFunctionGrid,
    ) -> (f64, f64) {
        let n = coarse.resolution().0;
        assert_eq!(fine.resolution().0, 2 * n - 1);
        let scale = fine.max_abs();
        assert!(scale > 0.0);
        let mut rel: Vec<f64> = (0..n * n)
            .filter_map(|i| {
                let (iu, iv) = (i / n, i % n);
                let a = coarse.value(iu, iv);
                let b = fine.value(2 * iu, 2 * iv);
                (!a.is_nan() && !b.is_nan()).then(|| (a - b).abs() / scale)
            })
            .collect();
        rel.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| rel[((rel.len() - 1) as f64 * p) as usize];
        (q(0.5), q(0.9))
    }

    #[test]
    fn coarse_and_fine_height_grids_agree_at_shared_nodes() {
        // The height field is a curl of a friction response that kinks where
        // contact directions switch, so its peaks keep sharpening under
        // refinement and shared nodes near those ridges never settle
        // pointwise. Agreement is therefore asserted in aggregate - typical
        // nodes match and refinement tightens the match - rather than at
        // every node.
        let r = robot();
        let fm = FrictionModel::default();
        let gait =
            GaitParams::constant_two_wave(1.5, 0.35, 1.0, 0.35, DEFAULT_TEMPORAL_FREQ, FRAC_PI_2)
                .unwrap();
        let spec = SubShapeSpec::new(SubShapePlane::PhasePair, gait, r.joint_limit).unwrap();
        let coarse = height_function(&r, &spec, 33, &fm).unwrap();
        let mid = height_function(&r, &spec, 65, &fm).unwrap();
        let fine = height_function(&r, &spec, 129, &fm).unwrap();
        let (median_cm, p90_cm) = shared_node_diff_quantiles(&coarse, &mid);
        let (median_mf, _) = shared_node_diff_quantiles(&mid, &fine);
        assert!(median_cm < 0.10, "median 33-vs-65 diff {median_cm}");
        assert!(p90_cm < 0.30, "p90 33-vs-65 diff {p90_cm}");
        assert!(
            median_mf < median_cm,
            "refinement did not tighten: 65-vs-129 median {median_mf} \
             vs 33-vs-65 median {median_cm}"
        );
    }

    #[test]
    fn phase_plane_height_function_has_lobes_of_both_signs() {
        let r = robot();
        let fm = FrictionModel::default();
        let gait = modulated_gait(0.3);
        let spec = SubShapeSpec::new(SubShapePlane::PhasePair, gait, r.joint_limit).unwrap();
        let hf = height_function(&r, &spec, 33, &fm).unwrap();
        let max = hf.values.iter().filter(|v| !v.is_nan()).fold(0.0f64, |m, &v| m.max(v));
        let min = hf
            .values
            .iter()
            .filter(|v| !v.is_nan())
            .fold(0.0f64, |m, &v| m.min(v));
        let scale = hf.max_abs();
        assert!(max > 0.2 * scale, "positive lobe missing: max {max}");
        assert!(min < -0.2 * scale, "negative lobe missing: min {min}");
    }

    #[test]
    fn straight_line_row_of_amplitude_plane_is_feasible() {
        let r = robot();
        let gait = modulated_gait(0.3);
        let spec = SubShapeSpec::new(SubShapePlane::OmegaWave, gait, r.joint_limit).unwrap();
        let grid = feasibility_map(&r, &spec, 17).unwrap();
        // v = 0 keeps the free amplitude zero; the other wave still bends the
        // body, so pick the plane whose frozen wave also vanishes.
        let zero_gait =
            GaitParams::constant_two_wave(1.5, 0.0, 1.0, 0.0, DEFAULT_TEMPORAL_FREQ, FRAC_PI_2)
                .unwrap();
        let zero_spec =
            SubShapeSpec::new(SubShapePlane::OmegaWave, zero_gait, r.joint_limit).unwrap();
        let zero_grid = feasibility_map(&r, &zero_spec, 17).unwrap();
        for iu in 0..17 {
            assert!(zero_grid.is_feasible(iu, 0), "straight body at node {iu}");
        }
        assert_eq!(grid.resolution(), (17, 17));
    }

    #[test]
    fn high_amplitude_band_is_infeasible() {
        let r = robot();
        let gait = modulated_gait(0.35);
        let spec = SubShapeSpec::new(SubShapePlane::OmegaWave, gait, r.joint_limit).unwrap();
        let grid = feasibility_map(&r, &spec, 33).unwrap();
        let top = (0..33).filter(|&iu| !grid.is_feasible(iu, 32)).count();
        assert!(
            top > 16,
            "expected most of the amplitude-limit row infeasible, got {top}/33"
        );
    }

    #[test]
    fn tighter_joint_limit_shrinks_the_feasible_set() {
        let r = robot();
        let tight = r.with_joint_limit(60.0_f64.to_radians()).unwrap();
        let gait = modulated_gait(0.25);
        // Same plane extents for both robots so the grids align node by node.
        let spec = SubShapeSpec::new(SubShapePlane::OmegaWave, gait, r.joint_limit).unwrap();
        let wide_grid = feasibility_map(&r, &spec, 17).unwrap();
        let tight_grid = feasibility_map(&tight, &spec, 17).unwrap();
        for idx in 0..wide_grid.feasible.len() {
            if tight_grid.feasible[idx] {
                assert!(wide_grid.feasible[idx], "inclusion violated at {idx}");
            }
        }
    }

    fn uniform_grid(h: f64, n: usize, extent: f64) -> HeightFunctionGrid {
        HeightFunctionGrid {
            u_axis: linspace(0.0, extent, n),
            v_axis: linspace(0.0, extent, n),
            values: vec![h; n * n],
            wraps: (false, false),
        }
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let hf = uniform_grid(0.0, 33, 1.0);
        let path = vec![(0.1, 0.1), (0.8, 0.1), (0.8, 0.9), (0.1, 0.9), (0.1, 0.1)];
        let s = surface_integral(&hf, &path).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(!s.crossed_infeasible);
    }

    #[test]
    fn uniform_field_times_rectangle_area() {
        let n = 65;
        let hf = uniform_grid(2.5, n, 1.0);
        // Rectangle aligned with cell boundaries: rasterization is exact.
        let path = vec![
            (0.25, 0.25),
            (0.75, 0.25),
            (0.75, 0.5),
            (0.25, 0.5),
            (0.25, 0.25),
        ];
        let s = surface_integral(&hf, &path).unwrap();
        assert_relative_eq!(s.value, 2.5 * 0.5 * 0.25, epsilon = 1e-12);
        // Off-grid rectangle: within one boundary cell ring of the truth.
        let path = vec![
            (0.213, 0.187),
            (0.684, 0.187),
            (0.684, 0.613),
            (0.213, 0.613),
            (0.213, 0.187),
        ];
        let s = surface_integral(&hf, &path).unwrap();
        let cell = 1.0 / (n - 1) as f64;
        let area = (0.684 - 0.213) * (0.613 - 0.187);
        let perimeter = 2.0 * ((0.684 - 0.213) + (0.613 - 0.187));
        assert!((s.value - 2.5 * area).abs() <= 2.5 * perimeter * cell);
    }

    #[test]
    fn reversed_path_negates_the_integral_exactly() {
        let r = robot();
        let fm = FrictionModel::default();
        let gait = modulated_gait(0.15);
        let spec =
            SubShapeSpec::new(SubShapePlane::ForwardWave, gait, r.joint_limit).unwrap();
        let hf = height_function(&r, &spec, 33, &fm).unwrap();
        let path = spec.path_projection(128);
        let mut reversed = path.clone();
        reversed.reverse();
        let fwd = surface_integral(&hf, &path).unwrap();
        let rev = surface_integral(&hf, &reversed).unwrap();
        assert_eq!(fwd.value, -rev.value);
    }

    #[test]
    fn open_path_is_rejected() {
        let hf = uniform_grid(1.0, 33, 1.0);
        let path = vec![(0.1, 0.1), (0.9, 0.1), (0.9, 0.9)];
        assert!(matches!(surface_integral(&hf, &path), Err(Error::OpenPath)));
    }

    #[test]
    fn winding_path_encloses_area_against_its_start_level() {
        // A path winding once around the wrapped axis closes back along the
        // level of its start point, so a bump v = v0 + b sin^2(u) encloses
        // exactly the area under the bump: b pi. The orientation is Green's:
        // riding the bump in +u with the return leg below runs clockwise, so
        // a positive field integrates negatively.
        let n = 65;
        let hf = HeightFunctionGrid {
            u_axis: linspace(0.0, TAU, n),
            v_axis: linspace(0.0, 1.0, n),
            values: vec![1.5; n * n],
            wraps: (true, false),
        };
        let (v0, b) = (0.21, 0.5);
        let path: Vec<(f64, f64)> = (0..=256)
            .map(|k| {
                let u = TAU * k as f64 / 256.0;
                (u, v0 + b * u.sin() * u.sin())
            })
            .collect();
        let s = surface_integral(&hf, &path).unwrap();
        let cell = TAU / (n - 1) as f64;
        // Boundary cells rasterize to half a cell of error per unit length.
        assert!(
            (s.value + 1.5 * b * PI).abs() < 1.5 * TAU * cell,
            "got {}, want {}",
            s.value,
            -1.5 * b * PI
        );
        // Flat paths enclose nothing against their own level.
        let flat: Vec<(f64, f64)> = (0..=64).map(|k| (TAU * k as f64 / 64.0, v0)).collect();
        assert_eq!(surface_integral(&hf, &flat).unwrap().value, 0.0);
    }

    /// Line integral of the rotational connection row around the closed
    /// lifted polygon (path plus the same canonical closure legs used by
    /// surface_integral), trapezoid rule per edge. Equals the surface
    /// integral by Stokes up to grid discretization, independent of any
    /// small-amplitude argument.
    fn rotation_line_integral(
        robot: &RobotModel,
        spec: &SubShapeSpec,
        path: &[(f64, f64)],
        fm: &FrictionModel,
        wind: (f64, f64),
    ) -> f64 {
        let mut poly = path.to_vec();
        let end = *poly.last().unwrap();
        let start = poly[0];
        if wind != (0.0, 0.0) {
            poly.push((end.0, end.1 - wind.1 * TAU));
            poly.push(start);
        }
        let c_at = |u: f64, v: f64| {
            let (xi_u, xi_v) = connection_row(robot, spec, (u, v), fm).unwrap();
            (xi_u.omega, xi_v.omega)
        };
        let mut total = 0.0;
        for k in 0..poly.len() - 1 {
            let a = poly[k];
            let b = poly[k + 1];
            // Long artificial legs need finer sampling than path edges.
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            let pieces = (len / 0.05).ceil().max(1.0) as usize;
            for p in 0..pieces {
                let t0 = p as f64 / pieces as f64;
                let t1 = (p + 1) as f64 / pieces as f64;
                let p0 = (a.0 + (b.0 - a.0) * t0, a.1 + (b.1 - a.1) * t0);
                let p1 = (a.0 + (b.0 - a.0) * t1, a.1 + (b.1 - a.1) * t1);
                let (cu0, cv0) = c_at(p0.0, p0.1.clamp(0.0, spec.amp_max));
                let (cu1, cv1) = c_at(p1.0, p1.1.clamp(0.0, spec.amp_max));
                total += 0.5 * (cu0 + cu1) * (p1.0 - p0.0) + 0.5 * (cv0 + cv1) * (p1.1 - p0.1);
            }
        }
        total
    }

    #[test]
    fn surface_integral_matches_line_integral_of_the_connection() {
        let r = robot();
        let fm = FrictionModel::default();
        let gait = modulated_gait(0.12);
        let spec =
            SubShapeSpec::new(SubShapePlane::ForwardWave, gait, r.joint_limit).unwrap();
        let hf = height_function(&r, &spec, 65, &fm).unwrap();
        let path = spec.path_projection(96);
        let area = surface_integral(&hf, &path).unwrap();
        assert!(!area.crossed_infeasible);
        let line = rotation_line_integral(&r, &spec, &path, &fm, (1.0, 0.0));
        let scale = area.value.abs().max(line.abs()).max(1e-4);
        assert!(
            (area.value - line).abs() < 0.05 * scale,
            "surface {} vs line {line}",
            area.value,
        );
    }

    /// Surface integrals approximate simulated rotation when the closure
    /// reference is itself a non-turning gait. Closing the omega-amplitude
    /// plane path along its start level references a constant-amplitude
    /// two-wave gait, which does not turn, so the enclosed area carries the
    /// whole rotation. This needs the forward amplitude constant; gaits
    /// modulating both amplitudes split their rotation across two planes.
    #[test]
    fn small_amplitude_surface_integral_predicts_simulated_rotation() {
        let r = robot();
        let fm = FrictionModel::default();
        for (scale, a_f, psi) in [(0.07, 0.10, FRAC_PI_2), (0.05, 0.14, 1.1)] {
            let gait = GaitParams::two_wave(
                1.5,
                AmplitudeProfile::Constant(a_f),
                1.0,
                AmplitudeProfile::LevelSine {
                    scale,
                    level: 1.0,
                    phase: 0.2,
                },
                DEFAULT_TEMPORAL_FREQ,
                psi,
            )
            .unwrap();
            let s = gait_surface_integral(
                &r,
                &gait,
                SubShapePlane::OmegaWave,
                DEFAULT_GRID_RESOLUTION,
                &fm,
                192,
            )
            .unwrap();
            let traj = integrate_gait(&r, &fm, &gait, 1, 256).unwrap();
            let measured = angular_displacement(&traj).unwrap();
            let tol = 0.15 * s.value.abs().max(measured.abs()).max(1.0_f64.to_radians());
            assert!(
                (s.value - measured).abs() <= tol,
                "scale {scale}: predicted {} vs simulated {} (tol {tol})",
                s.value,
                measured
            );
        }
    }

    #[test]
    fn resolution_below_minimum_is_rejected() {
        let r = robot();
        let gait = modulated_gait(0.2);
        let spec = SubShapeSpec::new(SubShapePlane::ForwardWave, gait, r.joint_limit).unwrap();
        assert!(height_function(&r, &spec, 16, &FrictionModel::default()).is_err());
        assert!(feasibility_map(&r, &spec, 5).is_err());
    }

    #[test]
    fn amplitude_coordinate_outside_range_is_rejected() {
        let r = robot();
        let gait = modulated_gait(0.2);
        let spec = SubShapeSpec::new(SubShapePlane::ForwardWave, gait, r.joint_limit).unwrap();
        let fm = FrictionModel::default();
        assert!(connection_row(&r, &spec, (0.3, -0.1), &fm).is_err());
        assert!(connection_row(&r, &spec, (0.3, 2.0), &fm).is_err());
    }
}

//! Two-wave joint-angle templates with amplitude modulation.
//!
//! Joint i of an N-joint chain follows
//!
//! ```text
//! theta_i(t) = A_f(tau_f) * sin(tau_f + 2 pi k_f i / N)
//!            + A_o(tau_o) * sin(tau_o + 2 pi k_o i / N)
//! ```
//!
//! where tau_f = 2 pi w t and tau_o = 2 pi w t + psi are the wave phases.
//! Both waves share the temporal frequency w; psi is the phase between them.
//! Amplitudes are either constant or slow sinusoidal modulations of the
//! wave's own phase, which is what turns the superposition into a turning
//! gait rather than a straight-line undulation.

use std::f64::consts::TAU;

use crate::error::Error;
use crate::model::{RobotModel, ShapeState};

/// Default gait temporal frequency, Hz.
pub const DEFAULT_TEMPORAL_FREQ: f64 = 0.2;

/// Amplitude as a function of the wave phase tau.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AmplitudeProfile {
    /// Fixed value in radians. May be signed: a negative constant is the
    /// half-period-shifted wave.
    Constant(f64),
    /// `scale * (level + sin(tau + phase))`, radians. `level >= 1` keeps the
    /// amplitude non-negative over the whole cycle.
    LevelSine { scale: f64, level: f64, phase: f64 },
}

impl AmplitudeProfile {
    pub fn value(&self, tau: f64) -> f64 {
        match *self {
            AmplitudeProfile::Constant(a) => a,
            AmplitudeProfile::LevelSine {
                scale,
                level,
                phase,
            } => scale * (level + (tau + phase).sin()),
        }
    }

    /// dA/dtau.
    pub fn rate(&self, tau: f64) -> f64 {
        match *self {
            AmplitudeProfile::Constant(_) => 0.0,
            AmplitudeProfile::LevelSine { scale, phase, .. } => scale * (tau + phase).cos(),
        }
    }

    /// Largest value over a cycle.
    pub fn peak(&self) -> f64 {
        match *self {
            AmplitudeProfile::Constant(a) => a.abs(),
            AmplitudeProfile::LevelSine { scale, level, .. } => scale * (level + 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            AmplitudeProfile::Constant(a) => {
                if !a.is_finite() {
                    return Err(Error::parameter("constant amplitude must be finite"));
                }
            }
            AmplitudeProfile::LevelSine {
                scale,
                level,
                phase,
            } => {
                if !(scale.is_finite() && level.is_finite() && phase.is_finite()) {
                    return Err(Error::parameter("amplitude profile must be finite"));
                }
                if scale < 0.0 {
                    return Err(Error::parameter("amplitude scale must be non-negative"));
                }
                if level < 1.0 {
                    return Err(Error::parameter(
                        "amplitude level must be >= 1 so the profile stays non-negative",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One traveling wave. The phase is `tau(t) = 2 pi temporal_freq t +
/// phase_offset`, or frozen at `phase_offset` for waves that do not travel in
/// time (a zero-spatial-frequency frozen wave is a constant joint offset).
/// `sine_shift` is added inside the sine only and leaves the amplitude
/// argument untouched; shifting by pi negates the wave's contribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveSpec {
    pub spatial_freq: f64,
    pub temporal_freq: f64,
    pub phase_offset: f64,
    pub sine_shift: f64,
    pub frozen: bool,
}

impl WaveSpec {
    pub fn traveling(spatial_freq: f64, temporal_freq: f64, phase_offset: f64) -> Self {
        WaveSpec {
            spatial_freq,
            temporal_freq,
            phase_offset,
            sine_shift: 0.0,
            frozen: false,
        }
    }

    pub fn phase(&self, t: f64) -> f64 {
        if self.frozen {
            self.phase_offset
        } else {
            TAU * self.temporal_freq * t + self.phase_offset
        }
    }

    pub fn phase_rate(&self) -> f64 {
        if self.frozen {
            0.0
        } else {
            TAU * self.temporal_freq
        }
    }

    /// Spatial phase of joint i out of n.
    pub fn spatial_phase(&self, i: usize, n_joints: usize) -> f64 {
        TAU * self.spatial_freq * i as f64 / n_joints as f64
    }
}

/// A wave plus its amplitude profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveComponent {
    pub spec: WaveSpec,
    pub amplitude: AmplitudeProfile,
}

impl WaveComponent {
    fn angle(&self, t: f64, spatial_phase: f64) -> f64 {
        let tau = self.spec.phase(t);
        self.amplitude.value(tau) * (tau + spatial_phase + self.spec.sine_shift).sin()
    }

    fn angle_rate(&self, t: f64, spatial_phase: f64) -> f64 {
        let tau = self.spec.phase(t);
        let tau_dot = self.spec.phase_rate();
        let arg = tau + spatial_phase + self.spec.sine_shift;
        tau_dot * (self.amplitude.rate(tau) * arg.sin() + self.amplitude.value(tau) * arg.cos())
    }
}

/// Two-wave gait. `forward` drives propulsion along the body; `omega` is the
/// second wave whose spatial frequency selects the turning family (0 gives a
/// uniform joint offset, matching the forward wave gives a single combined
/// wave, and one full wave over the body gives the in-place turn).
#[derive(Clone, Debug, PartialEq)]
pub struct GaitParams {
    pub forward: WaveComponent,
    pub omega: WaveComponent,
}

impl GaitParams {
    /// Standard template: forward wave at phase 0, second wave at phase psi.
    pub fn two_wave(
        k_f: f64,
        forward_amp: AmplitudeProfile,
        k_o: f64,
        omega_amp: AmplitudeProfile,
        omega_hz: f64,
        psi: f64,
    ) -> Result<Self, Error> {
        let gait = GaitParams {
            forward: WaveComponent {
                spec: WaveSpec::traveling(k_f, omega_hz, 0.0),
                amplitude: forward_amp,
            },
            omega: WaveComponent {
                spec: WaveSpec::traveling(k_o, omega_hz, psi),
                amplitude: omega_amp,
            },
        };
        gait.validate()?;
        Ok(gait)
    }

    /// Both amplitudes fixed.
    pub fn constant_two_wave(
        k_f: f64,
        a_f: f64,
        k_o: f64,
        a_o: f64,
        omega_hz: f64,
        psi: f64,
    ) -> Result<Self, Error> {
        GaitParams::two_wave(
            k_f,
            AmplitudeProfile::Constant(a_f),
            k_o,
            AmplitudeProfile::Constant(a_o),
            omega_hz,
            psi,
        )
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.forward.amplitude.validate()?;
        self.omega.amplitude.validate()?;
        for spec in [&self.forward.spec, &self.omega.spec] {
            if !(spec.temporal_freq > 0.0) || !spec.temporal_freq.is_finite() {
                return Err(Error::parameter("temporal frequency must be positive"));
            }
            if !spec.spatial_freq.is_finite() || spec.spatial_freq < 0.0 {
                return Err(Error::parameter("spatial frequency must be >= 0"));
            }
            if !(spec.phase_offset.is_finite() && spec.sine_shift.is_finite()) {
                return Err(Error::parameter("wave phases must be finite"));
            }
        }
        if self.forward.spec.temporal_freq != self.omega.spec.temporal_freq {
            return Err(Error::parameter(
                "both waves must share one temporal frequency",
            ));
        }
        Ok(())
    }

    /// Phase between the waves.
    pub fn psi(&self) -> f64 {
        self.omega.spec.phase_offset - self.forward.spec.phase_offset
    }

    pub fn temporal_freq(&self) -> f64 {
        self.forward.spec.temporal_freq
    }

    /// Cycle duration, seconds.
    pub fn period(&self) -> f64 {
        1.0 / self.temporal_freq()
    }

    /// Gait whose joint angles are the pointwise negation of this one: both
    /// sine arguments shifted by half a turn. Turning direction flips.
    pub fn mirrored(&self) -> Self {
        let mut g = self.clone();
        g.forward.spec.sine_shift += std::f64::consts::PI;
        g.omega.spec.sine_shift += std::f64::consts::PI;
        g
    }
}

/// Joint angle i at time t.
pub fn joint_angle(gait: &GaitParams, robot: &RobotModel, t: f64, i: usize) -> Result<f64, Error> {
    if i >= robot.n_joints {
        return Err(Error::JointIndex {
            index: i,
            n_joints: robot.n_joints,
        });
    }
    let n = robot.n_joints;
    Ok(gait.forward.angle(t, gait.forward.spec.spatial_phase(i, n))
        + gait.omega.angle(t, gait.omega.spec.spatial_phase(i, n)))
}

/// All joint angles at time t.
pub fn shape_at(gait: &GaitParams, robot: &RobotModel, t: f64) -> ShapeState {
    let n = robot.n_joints;
    ShapeState::new(
        (0..n)
            .map(|i| {
                gait.forward.angle(t, gait.forward.spec.spatial_phase(i, n))
                    + gait.omega.angle(t, gait.omega.spec.spatial_phase(i, n))
            })
            .collect(),
    )
}

/// Analytic d theta_i / dt for every joint.
pub fn shape_velocity(gait: &GaitParams, robot: &RobotModel, t: f64) -> Vec<f64> {
    let n = robot.n_joints;
    (0..n)
        .map(|i| {
            gait.forward
                .angle_rate(t, gait.forward.spec.spatial_phase(i, n))
                + gait.omega.angle_rate(t, gait.omega.spec.spatial_phase(i, n))
        })
        .collect()
}

/// Single traveling wave plus a constant joint offset kappa: the offset is
/// encoded as a zero-spatial-frequency wave frozen at phase pi/2, where its
/// sine is exactly one, so the template reduces term by term.
pub fn offset_turn_gait(amplitude: f64, kappa: f64, k: f64, omega_hz: f64) -> Result<GaitParams, Error> {
    let gait = GaitParams {
        forward: WaveComponent {
            spec: WaveSpec::traveling(k, omega_hz, 0.0),
            amplitude: AmplitudeProfile::Constant(amplitude),
        },
        omega: WaveComponent {
            spec: WaveSpec {
                spatial_freq: 0.0,
                temporal_freq: omega_hz,
                phase_offset: std::f64::consts::FRAC_PI_2,
                sine_shift: 0.0,
                frozen: true,
            },
            amplitude: AmplitudeProfile::Constant(kappa),
        },
    };
    gait.validate()?;
    Ok(gait)
}

/// Both waves share one spatial frequency; their superposition is a single
/// traveling wave with a phase-dependent effective amplitude.
pub fn geometric_turn_gait(
    a_f: f64,
    a_o: f64,
    k: f64,
    omega_hz: f64,
    psi: f64,
) -> Result<GaitParams, Error> {
    GaitParams::constant_two_wave(k, a_f, k, a_o, omega_hz, psi)
}

/// A point of the four-dimensional wave state [A_f, tau_f, A_o, tau_o].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePoint {
    pub amp_f: f64,
    pub tau_f: f64,
    pub amp_o: f64,
    pub tau_o: f64,
}

/// Wave state the gait passes through at time t.
pub fn wave_point_at(gait: &GaitParams, t: f64) -> WavePoint {
    let tau_f = gait.forward.spec.phase(t);
    let tau_o = gait.omega.spec.phase(t);
    WavePoint {
        amp_f: gait.forward.amplitude.value(tau_f),
        tau_f,
        amp_o: gait.omega.amplitude.value(tau_o),
        tau_o,
    }
}

/// Joint angles of the standard (unshifted) template at a wave-state point.
pub fn shape_from_wave_point(
    robot: &RobotModel,
    k_f: f64,
    k_o: f64,
    wp: &WavePoint,
) -> ShapeState {
    let n = robot.n_joints;
    ShapeState::new(
        (0..n)
            .map(|i| {
                let sf = TAU * k_f * i as f64 / n as f64;
                let so = TAU * k_o * i as f64 / n as f64;
                wp.amp_f * (wp.tau_f + sf).sin() + wp.amp_o * (wp.tau_o + so).sin()
            })
            .collect(),
    )
}

/// Wave-state path over one cycle: `samples` points at t = j T / samples,
/// j = 0..samples (first and last coincide modulo 2 pi in the tau entries).
pub fn gait_path(gait: &GaitParams, samples: usize) -> Vec<WavePoint> {
    let period = gait.period();
    (0..=samples)
        .map(|j| wave_point_at(gait, j as f64 * period / samples as f64))
        .collect()
}

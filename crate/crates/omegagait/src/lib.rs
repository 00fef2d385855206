//! Turning-gait design and simulation for planar snake robots.
//!
//! The crate models an N+1 module planar chain whose joints follow the
//! superposition of two body waves, and answers the question "how far does
//! one gait cycle turn the body?" under quasi-static Coulomb friction.
//!
//! * [`model`] — chain kinematics, body frame, feasibility (joint limits and
//!   self-collision);
//! * [`gait`] — two-wave joint-angle templates with amplitude modulation;
//! * [`dynamics`] — friction wrench balance and cycle integration;
//! * [`geomech`] — sub-shape-space connection fields, height functions and
//!   surface integrals;
//! * [`optimizer`] — coordinate-descent search over the modulation functions;
//! * [`compliance`] — torque-feedback amplitude admittance in peg boards.

pub mod compliance;
pub mod dynamics;
pub mod error;
pub mod gait;
pub mod geomech;
pub mod model;
pub mod optimizer;

pub use compliance::{AdmittanceState, AmplitudeHistory, ComplianceRun, PegBoard};
pub use dynamics::{BodyVelocity, FrictionModel, Trajectory};
pub use error::Error;
pub use gait::{AmplitudeProfile, GaitParams, WaveComponent, WaveSpec};
pub use geomech::{
    FeasibilityGrid, HeightFunctionGrid, SubShapePlane, SubShapeSpec, SurfaceIntegral,
};
pub use model::{Backbone, Pose2, RobotModel, ShapeState};
pub use optimizer::{GaitParamVector, OptimizationReport, OptimizerConfig, SweepPoint};

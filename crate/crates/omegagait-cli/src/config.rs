//! Experiment configuration: a flat sectioned key-value file (INI-style)
//! checked strictly against the schema below. Unknown sections or keys are
//! rejected with the offending line; every key has a default, so the empty
//! file is a valid configuration. Angles in the file are degrees; the parsed
//! structure carries radians.
//!
//! Numeric keys marked "list" accept a single value, a comma list
//! (`0.25, 0.5, 1.0`), or an inclusive range `start:step:end` (`0:0.25:1.5`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use omegagait::gait::AmplitudeProfile;
use omegagait::{FrictionModel, GaitParams, OptimizerConfig, RobotModel};

/// A rejected configuration, pointing at the file line when there is one.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            line: 0,
            message: message.into(),
        }
    }

    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeMode {
    Constant,
    LevelSine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    CsvSvg,
}

#[derive(Debug, Clone)]
pub struct RobotBlock {
    /// Joint counts; more than one entry only makes sense for `sweep`.
    pub n_joints: Vec<usize>,
    pub module_length: f64,
    pub module_width: f64,
    pub module_mass: f64,
    /// Joint limits, radians; list for `sweep`.
    pub joint_limit: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaitBlock {
    pub k_f: f64,
    /// Second-wave spatial frequencies; list for `sweep`.
    pub k_o: Vec<f64>,
    pub omega_hz: f64,
    /// Second-wave phase lag, radians.
    pub psi: f64,
    pub mode: AmplitudeMode,
    pub a_f: f64,
    pub gamma: f64,
    pub phi_f: f64,
    pub a_o: f64,
    pub phi_o: f64,
}

#[derive(Debug, Clone)]
pub struct DynamicsBlock {
    pub mu: f64,
    pub reg_speed: f64,
    pub contacts_per_module: usize,
    pub steps_per_cycle: usize,
    pub cycles: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizerBlock {
    pub max_rounds: usize,
    pub grid_points: usize,
    pub pattern_tol: f64,
    /// Radians.
    pub convergence_tol: f64,
    pub gamma_max: f64,
}

#[derive(Debug, Clone)]
pub struct ComplianceBlock {
    pub spacings_bl: Vec<f64>,
    pub seeds: Vec<u64>,
    pub peg_radius_bl: f64,
    pub contact_stiffness: f64,
    /// Board half-extent in body lengths; 0 disables the board entirely.
    pub half_extent_bl: f64,
    pub torque_gain: f64,
    /// Radians.
    pub nominal_amp: f64,
}

#[derive(Debug, Clone)]
pub struct HeightfunBlock {
    pub resolution: usize,
    pub path_samples: usize,
}

#[derive(Debug, Clone)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub robot: RobotBlock,
    pub gait: GaitBlock,
    pub dynamics: DynamicsBlock,
    pub optimizer: OptimizerBlock,
    pub compliance: ComplianceBlock,
    pub heightfun: HeightfunBlock,
    pub output: OutputBlock,
}

const SECTIONS: [&str; 7] = [
    "robot",
    "gait",
    "dynamics",
    "optimizer",
    "compliance",
    "heightfun",
    "output",
];

/// Raw `section.key -> (text, line)` map with strict-consumption tracking:
/// whatever the schema does not take is an unknown key.
struct Raw {
    entries: BTreeMap<(String, String), (String, usize)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line_no, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::at(
                        line_no,
                        format!("unknown section `[{name}]`"),
                    ));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::at(line_no, format!("expected `key = value`, got `{line}`"))
            })?;
            let section = section.clone().ok_or_else(|| {
                ConfigError::at(line_no, "key appears before any [section] header")
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if let Some((_, first)) = entries.insert((section.clone(), key.clone()), (value, line_no))
            {
                return Err(ConfigError::at(
                    line_no,
                    format!("duplicate key `{section}.{key}` (first set on line {first})"),
                ));
            }
        }
        Ok(Raw { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    /// Error on the first (lowest-line) key the schema never consumed.
    fn finish(self) -> Result<(), ConfigError> {
        if let Some(((section, key), (_, line))) = self
            .entries
            .iter()
            .min_by_key(|(_, (_, line))| *line)
            .map(|(k, v)| (k.clone(), v.clone()))
        {
            let extra = self.entries.len() - 1;
            let tail = if extra > 0 {
                format!(" (and {extra} more)")
            } else {
                String::new()
            };
            return Err(ConfigError::at(
                line,
                format!("unknown key `{section}.{key}`{tail}"),
            ));
        }
        Ok(())
    }
}

fn parse_f64(text: &str, line: usize, what: &str) -> Result<f64, ConfigError> {
    text.parse::<f64>()
        .map_err(|_| ConfigError::at(line, format!("expected a number for {what}, got `{text}`")))
}

fn parse_usize(text: &str, line: usize, what: &str) -> Result<usize, ConfigError> {
    text.parse::<usize>().map_err(|_| {
        ConfigError::at(line, format!("expected a whole number for {what}, got `{text}`"))
    })
}

/// Comma list or inclusive `start:step:end` range.
fn parse_f64_list(text: &str, line: usize, what: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let start = parse_f64(parts[0].trim(), line, what)?;
        let step = parse_f64(parts[1].trim(), line, what)?;
        let end = parse_f64(parts[2].trim(), line, what)?;
        if !(step > 0.0) {
            return Err(ConfigError::at(
                line,
                format!("range step for {what} must be positive"),
            ));
        }
        if end < start {
            return Err(ConfigError::at(
                line,
                format!("range end for {what} is below its start"),
            ));
        }
        let mut out = Vec::new();
        let n = ((end - start) / step + 1e-9).floor() as usize;
        for i in 0..=n {
            out.push(start + step * i as f64);
        }
        return Ok(out);
    }
    if parts.len() != 1 {
        return Err(ConfigError::at(
            line,
            format!("range for {what} must be start:step:end"),
        ));
    }
    text.split(',')
        .map(|part| parse_f64(part.trim(), line, what))
        .collect()
}

fn parse_usize_list(text: &str, line: usize, what: &str) -> Result<Vec<usize>, ConfigError> {
    text.split(',')
        .map(|part| parse_usize(part.trim(), line, what))
        .collect()
}

fn get_f64(raw: &mut Raw, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
    match raw.take(section, key) {
        Some((text, line)) => parse_f64(&text, line, &format!("{section}.{key}")),
        None => Ok(default),
    }
}

fn get_usize(raw: &mut Raw, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
    match raw.take(section, key) {
        Some((text, line)) => parse_usize(&text, line, &format!("{section}.{key}")),
        None => Ok(default),
    }
}

fn get_f64_list(
    raw: &mut Raw,
    section: &str,
    key: &str,
    default: &[f64],
) -> Result<Vec<f64>, ConfigError> {
    match raw.take(section, key) {
        Some((text, line)) => {
            let list = parse_f64_list(&text, line, &format!("{section}.{key}"))?;
            if list.is_empty() {
                return Err(ConfigError::at(line, format!("{section}.{key} is empty")));
            }
            Ok(list)
        }
        None => Ok(default.to_vec()),
    }
}

fn get_usize_list(
    raw: &mut Raw,
    section: &str,
    key: &str,
    default: &[usize],
) -> Result<Vec<usize>, ConfigError> {
    match raw.take(section, key) {
        Some((text, line)) => {
            let list = parse_usize_list(&text, line, &format!("{section}.{key}"))?;
            if list.is_empty() {
                return Err(ConfigError::at(line, format!("{section}.{key} is empty")));
            }
            Ok(list)
        }
        None => Ok(default.to_vec()),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut raw = Raw::parse(text)?;

        let robot = RobotBlock {
            n_joints: get_usize_list(&mut raw, "robot", "n_joints", &[8])?,
            module_length: get_f64(&mut raw, "robot", "module_length_m", 0.07)?,
            module_width: get_f64(&mut raw, "robot", "module_width_m", 0.05)?,
            module_mass: get_f64(&mut raw, "robot", "module_mass_kg", 0.1)?,
            joint_limit: get_f64_list(&mut raw, "robot", "joint_limit_deg", &[90.0])?
                .into_iter()
                .map(f64::to_radians)
                .collect(),
        };

        let mode = match raw.take("gait", "amplitude_mode") {
            Some((text, line)) => match text.as_str() {
                "constant" => AmplitudeMode::Constant,
                "level_sine" => AmplitudeMode::LevelSine,
                other => {
                    return Err(ConfigError::at(
                        line,
                        format!(
                            "gait.amplitude_mode must be `constant` or `level_sine`, got `{other}`"
                        ),
                    ))
                }
            },
            None => AmplitudeMode::Constant,
        };
        let gait = GaitBlock {
            k_f: get_f64(&mut raw, "gait", "k_f", 1.5)?,
            k_o: get_f64_list(&mut raw, "gait", "k_o", &[1.0])?,
            omega_hz: get_f64(&mut raw, "gait", "omega_hz", 0.2)?,
            psi: get_f64(&mut raw, "gait", "psi_deg", 90.0)?.to_radians(),
            mode,
            a_f: get_f64(&mut raw, "gait", "a_f_deg", 45.0)?.to_radians(),
            gamma: get_f64(&mut raw, "gait", "gamma", 1.0)?,
            phi_f: get_f64(&mut raw, "gait", "phi_f_deg", 0.0)?.to_radians(),
            a_o: get_f64(&mut raw, "gait", "a_o_deg", 45.0)?.to_radians(),
            phi_o: get_f64(&mut raw, "gait", "phi_o_deg", 0.0)?.to_radians(),
        };

        let dynamics = DynamicsBlock {
            mu: get_f64(&mut raw, "dynamics", "mu", 0.3)?,
            reg_speed: get_f64(&mut raw, "dynamics", "reg_speed", 1e-4)?,
            contacts_per_module: get_usize(&mut raw, "dynamics", "contacts_per_module", 3)?,
            steps_per_cycle: get_usize(&mut raw, "dynamics", "steps_per_cycle", 256)?,
            cycles: get_usize(&mut raw, "dynamics", "cycles", 3)?,
        };

        let optimizer = OptimizerBlock {
            max_rounds: get_usize(&mut raw, "optimizer", "max_rounds", 20)?,
            grid_points: get_usize(&mut raw, "optimizer", "grid_points", 16)?,
            pattern_tol: get_f64(&mut raw, "optimizer", "pattern_tol", 1e-3)?,
            convergence_tol: get_f64(&mut raw, "optimizer", "convergence_tol_deg", 0.5)?
                .to_radians(),
            gamma_max: get_f64(&mut raw, "optimizer", "gamma_max", 4.0)?,
        };

        let seeds = get_usize_list(&mut raw, "compliance", "seeds", &[1, 2, 3, 4, 5])?
            .into_iter()
            .map(|s| s as u64)
            .collect();
        let compliance = ComplianceBlock {
            spacings_bl: get_f64_list(
                &mut raw,
                "compliance",
                "spacings_bl",
                &[0.2, 0.3, 0.4, 0.5, 0.6],
            )?,
            seeds,
            peg_radius_bl: get_f64(&mut raw, "compliance", "peg_radius_bl", 0.02)?,
            contact_stiffness: get_f64(&mut raw, "compliance", "contact_stiffness", 500.0)?,
            half_extent_bl: get_f64(&mut raw, "compliance", "half_extent_bl", 1.5)?,
            torque_gain: get_f64(&mut raw, "compliance", "torque_gain", 1.0)?,
            nominal_amp: get_f64(&mut raw, "compliance", "nominal_amp_deg", 45.0)?.to_radians(),
        };

        let heightfun = HeightfunBlock {
            resolution: get_usize(&mut raw, "heightfun", "resolution", 65)?,
            path_samples: get_usize(&mut raw, "heightfun", "path_samples", 256)?,
        };

        let format = match raw.take("output", "format") {
            Some((text, line)) => parse_format(&text)
                .ok_or_else(|| ConfigError::at(line, format!("output.format must be `csv` or `csv+svg`, got `{text}`")))?,
            None => OutputFormat::CsvSvg,
        };
        let output = OutputBlock {
            dir: match raw.take("output", "dir") {
                Some((text, _)) => PathBuf::from(text),
                None => PathBuf::from("out"),
            },
            format,
        };

        raw.finish()?;
        Ok(ExperimentConfig {
            robot,
            gait,
            dynamics,
            optimizer,
            compliance,
            heightfun,
            output,
        })
    }

    /// The robot when the config carries no sweep lists.
    pub fn single_robot(&self) -> Result<RobotModel, ConfigError> {
        if self.robot.n_joints.len() != 1 || self.robot.joint_limit.len() != 1 {
            return Err(ConfigError::new(
                "robot.n_joints and robot.joint_limit_deg must be single values here (lists are for `sweep`)",
            ));
        }
        self.robot_with(self.robot.n_joints[0], self.robot.joint_limit[0])
    }

    pub fn robot_with(&self, n_joints: usize, joint_limit: f64) -> Result<RobotModel, ConfigError> {
        RobotModel::new(
            n_joints,
            self.robot.module_length,
            self.robot.module_width,
            self.robot.module_mass,
            joint_limit,
        )
        .map_err(|e| ConfigError::new(e.to_string()))
    }

    pub fn friction(&self) -> FrictionModel {
        FrictionModel {
            mu: self.dynamics.mu,
            reg_speed: self.dynamics.reg_speed,
            contacts_per_module: self.dynamics.contacts_per_module,
        }
    }

    pub fn single_k_o(&self) -> Result<f64, ConfigError> {
        if self.gait.k_o.len() != 1 {
            return Err(ConfigError::new(
                "gait.k_o must be a single value here (lists are for `sweep`)",
            ));
        }
        Ok(self.gait.k_o[0])
    }

    /// The configured gait with explicit amplitudes (no sweep lists).
    pub fn single_gait(&self) -> Result<GaitParams, ConfigError> {
        let k_o = self.single_k_o()?;
        let g = &self.gait;
        let (forward, omega) = match g.mode {
            AmplitudeMode::Constant => (
                AmplitudeProfile::Constant(g.a_f),
                AmplitudeProfile::Constant(g.a_o),
            ),
            AmplitudeMode::LevelSine => (
                AmplitudeProfile::LevelSine {
                    scale: g.a_f,
                    level: g.gamma,
                    phase: g.phi_f,
                },
                AmplitudeProfile::LevelSine {
                    scale: g.a_o,
                    level: 1.0,
                    phase: g.phi_o,
                },
            ),
        };
        GaitParams::two_wave(g.k_f, forward, k_o, omega, g.omega_hz, g.psi)
            .map_err(|e| ConfigError::new(format!("gait: {e}")))
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            omega_hz: self.gait.omega_hz,
            steps_per_cycle: self.dynamics.steps_per_cycle,
            grid_points: self.optimizer.grid_points,
            pattern_tol: self.optimizer.pattern_tol,
            convergence_tol: self.optimizer.convergence_tol,
            max_rounds: self.optimizer.max_rounds,
            gamma_max: self.optimizer.gamma_max,
            ..OptimizerConfig::default()
        }
    }
}

pub fn parse_format(text: &str) -> Option<OutputFormat> {
    match text {
        "csv" => Some(OutputFormat::Csv),
        "csv+svg" => Some(OutputFormat::CsvSvg),
        _ => None,
    }
}

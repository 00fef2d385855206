//! The five subcommands: orchestration between the configuration, the
//! library, and the staged outputs. Every command stages all of its files
//! and commits them in one batch, so a failure leaves the output directory
//! untouched.

use std::path::Path;

use log::{debug, info};
use nalgebra::Vector2;
use rayon::prelude::*;

use omegagait::compliance::{seed_start_pose, simulate_compliant_turn, simulate_open_loop_turn};
use omegagait::dynamics::{angular_displacement, integrate_gait};
use omegagait::geomech::{height_function, surface_integral, SubShapePlane, SubShapeSpec};
use omegagait::optimizer::{default_multistart_inits, optimize_gait_multistart, optimize_k_o_sweep};
use omegagait::{AdmittanceState, GaitParamVector, PegBoard, Trajectory};

use crate::config::{AmplitudeMode, ExperimentConfig, OutputFormat};
use crate::error::CliError;
use crate::output::{Csv, OutputStage};
use crate::plot::{heatmap_svg, line_plot_svg, Series};

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let n_joints = traj.shapes.first().map_or(0, |s| s.angles.len());
    let mut columns = vec![
        "t_s".to_string(),
        "x_m".to_string(),
        "y_m".to_string(),
        "heading_deg".to_string(),
        "body_axis_deg".to_string(),
    ];
    for j in 0..n_joints {
        columns.push(format!("joint_{j}_deg"));
    }
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&names);
    for i in 0..traj.len() {
        let mut row = vec![
            format!("{:.6}", traj.times[i]),
            format!("{:.6}", traj.poses[i].x),
            format!("{:.6}", traj.poses[i].y),
            format!("{:.6}", traj.poses[i].heading.to_degrees()),
            format!("{:.6}", traj.body_axis[i].to_degrees()),
        ];
        for &a in &traj.shapes[i].angles {
            row.push(format!("{:.6}", a.to_degrees()));
        }
        csv.row(&row);
    }
    csv.into_bytes()
}

pub fn simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let robot = cfg.single_robot()?;
    let gait = cfg.single_gait()?;
    let friction = cfg.friction();
    info!(
        "simulate: N={} k_f={} k_o={} for {} cycles",
        robot.n_joints,
        cfg.gait.k_f,
        cfg.gait.k_o[0],
        cfg.dynamics.cycles
    );

    let traj = integrate_gait(
        &robot,
        &friction,
        &gait,
        cfg.dynamics.cycles,
        cfg.dynamics.steps_per_cycle,
    )?;
    let turn = angular_displacement(&traj)?;

    let max_angle = traj
        .shapes
        .iter()
        .flat_map(|s| s.angles.iter())
        .fold(0.0f64, |m, &a| m.max(a.abs()));
    if max_angle > robot.joint_limit {
        log::warn!(
            "gait exceeds the joint limit: peak |angle| {:.1} deg > {:.1} deg",
            max_angle.to_degrees(),
            robot.joint_limit.to_degrees()
        );
    }

    let mut stage = OutputStage::new(out_dir)?;
    stage.stage("trajectory.csv", &trajectory_csv(&traj))?;
    let paths = stage.commit()?;

    println!("angular displacement: {:+.4} deg/cycle", turn.to_degrees());
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn params_fields(p: &GaitParamVector) -> Vec<String> {
    vec![
        format!("{:.4}", p.a_f.to_degrees()),
        format!("{:.4}", p.gamma),
        format!("{:.4}", p.phi_f.to_degrees()),
        format!("{:.4}", p.a_o.to_degrees()),
        format!("{:.4}", p.phi_o.to_degrees()),
        format!("{:.4}", p.psi.to_degrees()),
    ]
}

pub fn optimize(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let robot = cfg.single_robot()?;
    let friction = cfg.friction();
    let k_o = cfg.single_k_o()?;
    let ocfg = cfg.optimizer_config();
    info!("optimize: k_f={} k_o={k_o}", cfg.gait.k_f);

    let inits = default_multistart_inits(robot.joint_limit);
    let (params, turn) =
        optimize_gait_multistart(&robot, &friction, cfg.gait.k_f, k_o, &inits, &ocfg)?;
    if !turn.is_finite() {
        return Err(CliError::config(
            "no feasible gait exists for these parameters (every start violated a constraint)",
        ));
    }
    let params = params.wrapped();

    let mut csv = Csv::new(&[
        "k_f",
        "k_o",
        "theta_max_deg",
        "turn_deg_per_cycle",
        "a_f_deg",
        "gamma",
        "phi_f_deg",
        "a_o_deg",
        "phi_o_deg",
        "psi_deg",
    ]);
    let mut row = vec![
        format!("{}", cfg.gait.k_f),
        format!("{k_o}"),
        format!("{:.4}", robot.joint_limit.to_degrees()),
        format!("{:.4}", turn.to_degrees()),
    ];
    row.extend(params_fields(&params));
    csv.row(&row);

    // A ready-to-use gait section: feed back via `--config` for `simulate`.
    let snippet = format!(
        "# optimized at k_f = {kf}, k_o = {ko}: {turn:.4} deg/cycle\n\
         [gait]\nk_f = {kf}\nk_o = {ko}\nomega_hz = {hz}\namplitude_mode = level_sine\n\
         a_f_deg = {af:.6}\ngamma = {gamma:.6}\nphi_f_deg = {pf:.6}\n\
         a_o_deg = {ao:.6}\nphi_o_deg = {po:.6}\npsi_deg = {psi:.6}\n",
        kf = cfg.gait.k_f,
        ko = k_o,
        turn = turn.to_degrees(),
        hz = cfg.gait.omega_hz,
        af = params.a_f.to_degrees(),
        gamma = params.gamma,
        pf = params.phi_f.to_degrees(),
        ao = params.a_o.to_degrees(),
        po = params.phi_o.to_degrees(),
        psi = params.psi.to_degrees(),
    );

    let mut stage = OutputStage::new(out_dir)?;
    stage.stage("optimize.csv", &csv.into_bytes())?;
    stage.stage("optimized_gait.ini", snippet.as_bytes())?;
    let paths = stage.commit()?;

    println!(
        "best turn: {:+.4} deg/cycle at a_f={:.2} deg, gamma={:.3}, phi_f={:.2} deg, \
         a_o={:.2} deg, phi_o={:.2} deg, psi={:.2} deg",
        turn.to_degrees(),
        params.a_f.to_degrees(),
        params.gamma,
        params.phi_f.to_degrees(),
        params.a_o.to_degrees(),
        params.phi_o.to_degrees(),
        params.psi.to_degrees(),
    );
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// One (joint count, joint limit) combination of a sweep.
struct SweepCell {
    n_joints: usize,
    joint_limit: f64,
    /// Per-k_o outcome: optimized point or failure text.
    rows: Vec<(f64, Result<(GaitParamVector, f64), String>)>,
}

pub fn sweep(cfg: &ExperimentConfig, out_dir: &Path, format: OutputFormat) -> Result<(), CliError> {
    let friction = cfg.friction();
    let ocfg = cfg.optimizer_config();
    let k_o_values = cfg.gait.k_o.clone();
    let mut combos = Vec::new();
    for &n in &cfg.robot.n_joints {
        for &limit in &cfg.robot.joint_limit {
            combos.push((n, limit));
        }
    }
    info!(
        "sweep: {} robot combos x {} k_o points",
        combos.len(),
        k_o_values.len()
    );

    // Robot combos are independent; the k_o chain inside each runs serially
    // because neighboring points share warm starts.
    let cells: Vec<SweepCell> = combos
        .par_iter()
        .map(|&(n, limit)| {
            let rows = match cfg
                .robot_with(n, limit)
                .map_err(|e| e.to_string())
                .and_then(|robot| {
                    optimize_k_o_sweep(&robot, &friction, cfg.gait.k_f, &k_o_values, &ocfg)
                        .map_err(|e| e.to_string())
                }) {
                Ok(points) => points
                    .into_iter()
                    .map(|p| {
                        let out = if p.turn.is_finite() {
                            Ok((p.params, p.turn))
                        } else {
                            Err("infeasible: every start violated a constraint".to_string())
                        };
                        (p.k_o, out)
                    })
                    .collect(),
                Err(message) => k_o_values
                    .iter()
                    .map(|&k_o| (k_o, Err(message.clone())))
                    .collect(),
            };
            debug!("sweep cell N={n} limit={:.1} deg done", limit.to_degrees());
            SweepCell {
                n_joints: n,
                joint_limit: limit,
                rows,
            }
        })
        .collect();

    let mut csv = Csv::new(&[
        "n_joints",
        "theta_max_deg",
        "k_o",
        "displacement_deg_per_cycle",
        "a_f_deg",
        "gamma",
        "phi_f_deg",
        "a_o_deg",
        "phi_o_deg",
        "psi_deg",
        "status",
    ]);
    for cell in &cells {
        for (k_o, outcome) in &cell.rows {
            let mut row = vec![
                format!("{}", cell.n_joints),
                format!("{:.4}", cell.joint_limit.to_degrees()),
                format!("{k_o}"),
            ];
            match outcome {
                Ok((params, turn)) => {
                    row.push(format!("{:.4}", turn.to_degrees()));
                    row.extend(params_fields(&params.wrapped()));
                    row.push("ok".to_string());
                }
                Err(message) => {
                    row.extend(std::iter::repeat(String::new()).take(7));
                    row.push(csv_field(message));
                }
            }
            csv.row(&row);
        }
    }

    let mut stage = OutputStage::new(out_dir)?;
    stage.stage("sweep.csv", &csv.into_bytes())?;

    if format == OutputFormat::CsvSvg {
        let multi_n = cfg.robot.n_joints.len() > 1;
        let multi_limit = cfg.robot.joint_limit.len() > 1;
        let (x_name, svg) = if k_o_values.len() > 1 || (!multi_n && !multi_limit) {
            // x = k_o, one series per robot combo.
            let series: Vec<Series> = cells
                .iter()
                .map(|cell| {
                    let label = match (multi_n, multi_limit) {
                        (true, true) => format!(
                            "N={}, {:.0} deg",
                            cell.n_joints,
                            cell.joint_limit.to_degrees()
                        ),
                        (true, false) => format!("N={}", cell.n_joints),
                        (false, true) => format!("{:.0} deg", cell.joint_limit.to_degrees()),
                        (false, false) => String::new(),
                    };
                    Series {
                        label,
                        points: cell
                            .rows
                            .iter()
                            .filter_map(|(k_o, out)| {
                                out.as_ref().ok().map(|(_, t)| (*k_o, t.to_degrees()))
                            })
                            .collect(),
                        err: None,
                    }
                })
                .collect();
            ("second-wave spatial frequency k_o", series)
        } else if multi_limit {
            // x = joint limit, one series per joint count.
            let series: Vec<Series> = cfg
                .robot
                .n_joints
                .iter()
                .map(|&n| Series {
                    label: if multi_n { format!("N={n}") } else { String::new() },
                    points: cells
                        .iter()
                        .filter(|c| c.n_joints == n)
                        .filter_map(|c| {
                            c.rows[0]
                                .1
                                .as_ref()
                                .ok()
                                .map(|(_, t)| (c.joint_limit.to_degrees(), t.to_degrees()))
                        })
                        .collect(),
                    err: None,
                })
                .collect();
            ("joint limit (deg)", series)
        } else {
            // x = joint count.
            let series = vec![Series {
                label: String::new(),
                points: cells
                    .iter()
                    .filter_map(|c| {
                        c.rows[0]
                            .1
                            .as_ref()
                            .ok()
                            .map(|(_, t)| (c.n_joints as f64, t.to_degrees()))
                    })
                    .collect(),
                err: None,
            }];
            ("joint count", series)
        };
        stage.stage(
            "sweep.svg",
            line_plot_svg(
                &svg,
                "optimized per-cycle turning",
                x_name,
                "angular displacement (deg/cycle)",
            )
            .as_bytes(),
        )?;
    }
    let paths = stage.commit()?;

    for cell in &cells {
        let best = cell
            .rows
            .iter()
            .filter_map(|(k_o, out)| out.as_ref().ok().map(|(_, t)| (*k_o, *t)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((k_o, turn)) => println!(
                "N={} theta_max={:.0} deg: best k_o = {k_o}, {:+.4} deg/cycle",
                cell.n_joints,
                cell.joint_limit.to_degrees(),
                turn.to_degrees()
            ),
            None => println!(
                "N={} theta_max={:.0} deg: no feasible point",
                cell.n_joints,
                cell.joint_limit.to_degrees()
            ),
        }
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn heightfun(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    let robot = cfg.single_robot()?;
    let gait = cfg.single_gait()?;
    let friction = cfg.friction();
    let res = cfg.heightfun.resolution;
    info!("heightfun: resolution {res}, three analysis planes");

    let planes = [
        (
            SubShapePlane::ForwardWave,
            "forward_wave",
            "forward-wave phase (rad)",
            "forward-wave amplitude (rad)",
        ),
        (
            SubShapePlane::OmegaWave,
            "omega_wave",
            "second-wave phase (rad)",
            "second-wave amplitude (rad)",
        ),
        (
            SubShapePlane::PhasePair,
            "phase_pair",
            "forward-wave phase (rad)",
            "second-wave phase (rad)",
        ),
    ];

    let results: Vec<Result<_, omegagait::Error>> = planes
        .par_iter()
        .map(|&(plane, name, u_label, v_label)| {
            let spec = SubShapeSpec::new(plane, gait.clone(), robot.joint_limit)?;
            let grid = height_function(&robot, &spec, res, &friction)?;
            let path = spec.path_projection(cfg.heightfun.path_samples);
            let integral = surface_integral(&grid, &path)?;
            debug!("plane {name}: integral {:+.5} rad", integral.value);
            Ok((name, u_label, v_label, grid, path, integral))
        })
        .collect();

    let mut stage = OutputStage::new(out_dir)?;
    let mut summaries = Vec::new();
    for result in results {
        let (name, u_label, v_label, grid, path, integral) = result?;
        let (nu, nv) = grid.resolution();
        let mut csv = Csv::new(&["u", "v", "value"]);
        for iu in 0..nu {
            for iv in 0..nv {
                csv.row(&[
                    format!("{}", grid.u_axis[iu]),
                    format!("{}", grid.v_axis[iv]),
                    format!("{}", grid.value(iu, iv)),
                ]);
            }
        }
        stage.stage(&format!("heightfun_{name}.csv"), &csv.into_bytes())?;

        if format == OutputFormat::CsvSvg {
            let title = format!(
                "{name} height function (enclosed integral {:+.4} rad)",
                integral.value
            );
            stage.stage(
                &format!("heightfun_{name}.svg"),
                heatmap_svg(&grid, &path, &title, u_label, v_label).as_bytes(),
            )?;
        }
        summaries.push(format!(
            "{name}: surface integral {:+.6} rad/cycle{}",
            integral.value,
            if integral.crossed_infeasible {
                " (path crosses infeasible region)"
            } else {
                ""
            }
        ));
    }
    let paths = stage.commit()?;

    for line in summaries {
        println!("{line}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Outcome of one (spacing, seed, variant) run.
struct ComplianceRow {
    spacing_bl: f64,
    seed: u64,
    compliant: Result<f64, String>,
    open_loop: Result<f64, String>,
}

pub fn compliance(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    let robot = cfg.single_robot()?;
    let gait = cfg.single_gait()?;
    if cfg.gait.mode != AmplitudeMode::Constant {
        return Err(CliError::config(
            "compliance runs need gait.amplitude_mode = constant: the admittance loop owns the amplitudes",
        ));
    }
    let friction = cfg.friction();
    let cb = &cfg.compliance;
    info!(
        "compliance: {} spacings x {} seeds, {} cycles",
        cb.spacings_bl.len(),
        cb.seeds.len(),
        cfg.dynamics.cycles
    );

    let mut state = AdmittanceState::with_default_dynamics(robot.joint_limit);
    state.nominal = Vector2::new(cb.nominal_amp, cb.nominal_amp);
    state.amp = state.nominal;
    state.torque_gain = cb.torque_gain;

    let mut tasks = Vec::new();
    for &spacing in &cb.spacings_bl {
        for &seed in &cb.seeds {
            tasks.push((spacing, seed));
        }
    }

    let rows: Vec<Result<ComplianceRow, CliError>> = tasks
        .par_iter()
        .map(|&(spacing, seed)| {
            let mut board = if cb.half_extent_bl > 0.0 {
                PegBoard::hexagonal(&robot, spacing, cb.half_extent_bl * robot.body_length())?
            } else {
                PegBoard::empty(&robot)
            };
            board.peg_radius = cb.peg_radius_bl * robot.body_length();
            board.contact_stiffness = cb.contact_stiffness;
            board.validate()?;
            let start = seed_start_pose(&board, seed);

            let run = |compliant: bool| -> Result<f64, String> {
                let result = if compliant {
                    simulate_compliant_turn(
                        &robot,
                        &friction,
                        &gait,
                        &board,
                        state,
                        start,
                        cfg.dynamics.cycles,
                        cfg.dynamics.steps_per_cycle,
                    )
                } else {
                    simulate_open_loop_turn(
                        &robot,
                        &friction,
                        &gait,
                        &board,
                        start,
                        cfg.dynamics.cycles,
                        cfg.dynamics.steps_per_cycle,
                    )
                };
                result
                    .and_then(|run| angular_displacement(&run.trajectory))
                    .map(f64::to_degrees)
                    .map_err(|e| e.to_string())
            };
            debug!("spacing {spacing} seed {seed} done");
            Ok(ComplianceRow {
                spacing_bl: spacing,
                seed,
                compliant: run(true),
                open_loop: run(false),
            })
        })
        .collect();
    let rows: Vec<ComplianceRow> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut detail = Csv::new(&[
        "spacing_bl",
        "seed",
        "variant",
        "displacement_deg_per_cycle",
        "status",
    ]);
    for row in &rows {
        for (variant, outcome) in [("compliant", &row.compliant), ("open_loop", &row.open_loop)] {
            let (value, status) = match outcome {
                Ok(d) => (format!("{d:.4}"), "ok".to_string()),
                Err(message) => (String::new(), csv_field(message)),
            };
            detail.row(&[
                format!("{}", row.spacing_bl),
                format!("{}", row.seed),
                variant.to_string(),
                value,
                status,
            ]);
        }
    }

    // Per-spacing aggregate of |displacement| over the seeds that ran.
    let mut summary = Csv::new(&[
        "spacing_bl",
        "compliant_n",
        "compliant_mean_deg",
        "compliant_std_deg",
        "open_loop_n",
        "open_loop_mean_deg",
        "open_loop_std_deg",
    ]);
    let mut comp_series = Series {
        label: "compliant".to_string(),
        points: Vec::new(),
        err: Some(Vec::new()),
    };
    let mut open_series = Series {
        label: "open loop".to_string(),
        points: Vec::new(),
        err: Some(Vec::new()),
    };
    let mut stdout_lines = Vec::new();
    for &spacing in &cb.spacings_bl {
        let of: Vec<f64> = rows
            .iter()
            .filter(|r| r.spacing_bl == spacing)
            .filter_map(|r| r.open_loop.as_ref().ok().map(|d| d.abs()))
            .collect();
        let cf: Vec<f64> = rows
            .iter()
            .filter(|r| r.spacing_bl == spacing)
            .filter_map(|r| r.compliant.as_ref().ok().map(|d| d.abs()))
            .collect();
        let (cm, cs) = mean_std(&cf);
        let (om, os) = mean_std(&of);
        summary.row(&[
            format!("{spacing}"),
            format!("{}", cf.len()),
            format!("{cm:.4}"),
            format!("{cs:.4}"),
            format!("{}", of.len()),
            format!("{om:.4}"),
            format!("{os:.4}"),
        ]);
        if !cf.is_empty() {
            comp_series.points.push((spacing, cm));
            comp_series.err.as_mut().unwrap().push(cs);
        }
        if !of.is_empty() {
            open_series.points.push((spacing, om));
            open_series.err.as_mut().unwrap().push(os);
        }
        stdout_lines.push(format!(
            "spacing {spacing} BL: compliant {cm:7.2} +- {cs:5.2} deg/cycle | open loop {om:7.2} +- {os:5.2}"
        ));
    }

    let mut stage = OutputStage::new(out_dir)?;
    stage.stage("compliance.csv", &summary.into_bytes())?;
    stage.stage("compliance_runs.csv", &detail.into_bytes())?;
    if format == OutputFormat::CsvSvg {
        stage.stage(
            "compliance.svg",
            line_plot_svg(
                &[comp_series, open_series],
                "compliant vs open-loop turning in peg fields",
                "peg spacing (body lengths)",
                "per-cycle |displacement| (deg)",
            )
            .as_bytes(),
        )?;
    }
    let paths = stage.commit()?;

    for line in stdout_lines {
        println!("{line}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

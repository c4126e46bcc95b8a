//! Command implementations: analyze, simulate, compile-dsd, sweep.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use crnctl_core::nalgebra::DVector;

use crnctl_core::analysis::{
    alpha_bar, best_alpha, disturbance_analysis, equilibria, positive_equilibrium_spectrum,
    solve_equilibrium_nonlinear, spectral_abscissa, stationary_power_at,
    zero_equilibrium_spectrum, MetabolicCosts,
};
use crnctl_core::controller::ClosedLoop;
use crnctl_core::dsd::{compare_traces, compile_to_dsd, gate_report};
use crnctl_core::network::{structural_checks, LinearForm, HURWITZ_MARGIN};
use crnctl_core::sim::{integrate, integrate_network, power_trace, time_average, Trajectory};
use crnctl_core::ssa::{ssa_simulate, SsaOptions};

use crate::output::{
    comparison_csv, fmt_float, ssa_csv, trajectory_csv, write_text, Report,
};
use crate::scenario::{network_to_spec, Scenario};

/// Where a run's artifacts land: `<dir>/<scenario name>_<artifact>.<ext>`.
pub struct RunPaths {
    dir: PathBuf,
    stem: String,
}

impl RunPaths {
    pub fn new(scenario: &Scenario, override_dir: Option<&Path>) -> Self {
        let dir = override_dir
            .map(Path::to_path_buf)
            .or_else(|| {
                scenario
                    .output
                    .as_ref()
                    .and_then(|o| o.directory.as_ref())
                    .map(PathBuf::from)
            })
            .unwrap_or_else(|| PathBuf::from("out"));
        Self {
            dir,
            stem: scenario.name.clone(),
        }
    }

    pub fn artifact(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.stem))
    }
}

/// The linear form the analysis operates on: exact for unimolecular
/// plants, otherwise the linearization at the Newton equilibrium reached
/// from the end of a schedule-free run.
fn linearize_plant(
    scenario: &Scenario,
    closed: &ClosedLoop,
) -> Result<(LinearForm, Option<crnctl_core::analysis::NewtonEquilibrium>)> {
    let plant = closed.plant();
    if plant.is_unimolecular() {
        let lin = plant.linearize(&DVector::zeros(plant.dim()))?;
        return Ok((lin, None));
    }
    let opts = scenario.sim_options();
    let warm = integrate(
        closed,
        None,
        &crnctl_core::sim::Schedule::empty(),
        scenario.simulation.t_end,
        &opts,
    )
    .context("warm-up run for the nonlinear equilibrium failed")?;
    let mut guess = DVector::from_column_slice(warm.last_row());
    for v in guess.iter_mut() {
        *v = v.max(1e-9);
    }
    let eq = solve_equilibrium_nonlinear(closed, &guess)
        .context("Newton refinement of the nonlinear equilibrium failed")?;
    let x_plant = DVector::from_column_slice(&eq.state.as_slice()[..plant.dim()]);
    let lin = plant.linearize(&x_plant)?;
    Ok((lin, Some(eq)))
}

pub fn analyze(scenario: &Scenario, out_dir: Option<&Path>) -> Result<Report> {
    let closed = scenario.build_closed_loop()?;
    let params = *closed.params();
    let (lin, newton) = linearize_plant(scenario, &closed)?;
    let newton_v_star = newton.as_ref().map(|eq| eq.state[closed.v_index()]);

    let mut report = Report::new();
    report.push("scenario", scenario.name.clone());
    report.push("command", "analyze");
    report.push("network.species", closed.plant().species_names().join(" "));
    report.push(
        "network.controlled",
        closed.plant().species()[closed.plant().controlled_index()]
            .name
            .clone(),
    );
    report.push(
        "network.actuated",
        closed.plant().species()[closed.plant().actuated_index()]
            .name
            .clone(),
    );

    let structure = structural_checks(&lin);
    report.push_bool("structure.unimolecular", structure.is_unimolecular);
    report.push_bool("structure.metzler", structure.is_metzler);
    report.push_bool("structure.hurwitz", structure.is_hurwitz);
    report.push_float("structure.spectral_margin", structure.spectral_margin);
    report.push_bool(
        "structure.output_controllable",
        structure.is_output_controllable,
    );
    if let Some(g) = structure.static_gain {
        report.push_float("structure.static_gain", g);
    }
    report.push_complex_list("structure.eigenvalues", &structure.eigenvalues_of_a);
    if let Some(diag) = &structure.diagnostic {
        report.push("structure.diagnostic", diag.clone());
    }
    if !structure.is_hurwitz || !structure.is_output_controllable {
        let text = report.render();
        write_text(&RunPaths::new(scenario, out_dir).artifact("analysis.txt"), &text)?;
        return Ok(report);
    }

    match newton {
        None => {
            let eq = equilibria(&lin, &params)?;
            let (zx, _) = &eq.zero;
            report.push(
                "equilibrium.zero.x",
                zx.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(" "),
            );
            if let Some((px, pv)) = &eq.positive {
                report.push(
                    "equilibrium.positive.x",
                    px.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(" "),
                );
                report.push_float("equilibrium.positive.v", *pv);
            } else {
                report.push("equilibrium.positive.x", "none");
            }
        }
        Some(eq) => {
            report.push(
                "equilibrium.nonlinear.state",
                eq.state
                    .iter()
                    .map(|&v| fmt_float(v))
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            report.push_bool("equilibrium.nonlinear.stable", eq.stable);
            report.push("equilibrium.nonlinear.iterations", eq.iterations.to_string());
            report.push_complex_list("equilibrium.nonlinear.spectrum", &eq.spectrum);
        }
    }

    let threshold = alpha_bar(&lin, params.mu)?;
    if threshold.alpha_bar.is_finite() {
        report.push_float("stability.alpha_bar", threshold.alpha_bar);
        report.push_float("stability.omega_star", threshold.omega_star.unwrap());
    } else {
        report.push("stability.alpha_bar", "inf");
    }
    report.push_bool("stability.weakly_spr", threshold.weakly_spr);
    report.push_bool(
        "stability.alpha_admissible",
        params.alpha < threshold.alpha_bar,
    );
    let zero_spec = zero_equilibrium_spectrum(&lin, &params);
    report.push_complex_list("stability.zero_spectrum", &zero_spec);
    report.push_bool("stability.zero_unstable", spectral_abscissa(&zero_spec) > 0.0);
    let pos_spec = positive_equilibrium_spectrum(&lin, &params)?;
    report.push_complex_list("stability.positive_spectrum", &pos_spec);
    report.push_bool(
        "stability.positive_stable",
        spectral_abscissa(&pos_spec) < -HURWITZ_MARGIN,
    );
    let tuned = best_alpha(&lin, params.mu, None)?;
    report.push_float("stability.best_alpha", tuned.alpha);
    report.push_float("stability.best_abscissa", tuned.abscissa);

    if let Some(dist) = scenario.build_disturbance()? {
        let dm = disturbance_analysis(&lin, &params, &dist.e, &dist.d)?;
        report.push_bool("disturbance.admissible", dm.admissible);
        report.push_float("disturbance.output_shift", dm.output_shift);
        match dm.alpha_bar_d {
            Some(a) if a.is_finite() => report.push_float("disturbance.alpha_bar_d", a),
            Some(_) => report.push("disturbance.alpha_bar_d", "inf"),
            None => report.push("disturbance.alpha_bar_d", "none"),
        }
        if let Some((x, v)) = &dm.perturbed_positive {
            report.push(
                "disturbance.equilibrium.x",
                x.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(" "),
            );
            report.push_float("disturbance.equilibrium.v", *v);
        }
    }

    if let Some(costs) = scenario.costs()? {
        let v_star = match newton_v_star {
            Some(v) => Some(v),
            None => equilibria(&lin, &params)?.positive.map(|(_, v)| v),
        };
        let Some(v_star) = v_star else {
            bail!("positive equilibrium does not exist; no stationary power");
        };
        let p = stationary_power_at(&params, &costs, v_star);
        report.push_float("power.adaptation_cost", p.adaptation_cost);
        report.push_float("power.constitutive_limit", p.constitutive_limit);
        report.push_float("power.total", p.total);
    }

    let text = report.render();
    write_text(&RunPaths::new(scenario, out_dir).artifact("analysis.txt"), &text)?;
    Ok(report)
}

/// Per-segment tracking summary of a simulated run.
fn segment_metrics(
    report: &mut Report,
    scenario: &Scenario,
    traj: &Trajectory,
    closed: &ClosedLoop,
) -> Result<()> {
    let y_col = closed.output_index();
    let t_end = scenario.simulation.t_end;
    let mut boundaries: Vec<f64> = vec![0.0];
    let mut targets: Vec<f64> = Vec::new();
    let mut mu = closed.params().mu;
    for e in &scenario.schedule {
        if e.time >= t_end {
            continue;
        }
        boundaries.push(e.time);
        targets.push(mu);
        if e.target == "controller.mu" {
            mu = e.value;
        }
    }
    boundaries.push(t_end);
    targets.push(mu);

    report.push("segments", targets.len().to_string());
    for i in 0..targets.len() {
        let (start, end, target) = (boundaries[i], boundaries[i + 1], targets[i]);
        let window = start + 0.5 * (end - start);
        let mut settled = 0.0_f64;
        let mut tail = 0.0_f64;
        let tail_start = end - 0.1 * (end - start);
        for (row, &t) in traj.times().iter().enumerate() {
            if t < start || t > end {
                continue;
            }
            let err = (traj.value(row, y_col) - target).abs() / target;
            if t >= window {
                settled = settled.max(err);
            }
            if t >= tail_start {
                tail = tail.max(err);
            }
        }
        let prefix = format!("segment.{i}");
        report.push(format!("{prefix}.span"), format!("{start} {end}"));
        report.push_float(format!("{prefix}.mu"), target);
        report.push_float(format!("{prefix}.settled_error"), settled);
        report.push_float(format!("{prefix}.pre_switch_error"), tail);
    }
    Ok(())
}

pub fn simulate(scenario: &Scenario, out_dir: Option<&Path>) -> Result<Report> {
    let closed = scenario.build_closed_loop()?;
    let disturbance = scenario.build_disturbance()?;
    let schedule = scenario.build_schedule()?;
    let opts = scenario.sim_options();
    let traj = integrate(
        &closed,
        disturbance.as_ref(),
        &schedule,
        scenario.simulation.t_end,
        &opts,
    )?;

    let paths = RunPaths::new(scenario, out_dir);
    write_text(&paths.artifact("trajectory.csv"), &trajectory_csv(&traj))?;

    let mut report = Report::new();
    report.push("scenario", scenario.name.clone());
    report.push("command", "simulate");
    report.push_float("t_end", scenario.simulation.t_end);
    segment_metrics(&mut report, scenario, &traj, &closed)?;

    let avg = time_average(&traj);
    for (j, name) in traj.names().iter().enumerate() {
        report.push_float(format!("average.{name}"), avg.last_row()[j]);
    }
    for (j, name) in traj.names().iter().enumerate() {
        report.push_float(format!("final.{name}"), traj.last_row()[j]);
    }

    if let Some(costs) = scenario.costs()? {
        let trace = power_trace(&closed, &traj, &costs)?;
        report.push_float("power.simulated_average", trace.tail_average(0.5));
        report.push_float("power.cumulative_energy", *trace.cumulative.last().unwrap());
        if closed.plant().is_unimolecular() && schedule.is_empty() {
            let lin = closed
                .plant()
                .linearize(&DVector::zeros(closed.plant().dim()))?;
            if let Some((_, v_star)) = equilibria(&lin, closed.params())?.positive {
                let p = stationary_power_at(closed.params(), &costs, v_star);
                report.push_float("power.stationary", p.total);
            }
        }
    }

    if let Some(scale) = scenario.simulation.volume_scale {
        if !schedule.is_empty() {
            bail!("stochastic runs support schedule-free scenarios only");
        }
        let ssa = ssa_simulate(
            &closed,
            scale,
            &SsaOptions {
                t_end: scenario.simulation.t_end,
                seed: scenario.simulation.seed,
                samples: scenario.simulation.samples,
                ..Default::default()
            },
        )?;
        write_text(&paths.artifact("ssa.csv"), &ssa_csv(&ssa))?;
        report.push("ssa.seed", scenario.simulation.seed.to_string());
        report.push("ssa.events", ssa.n_events.to_string());
        match ssa.extinction_time {
            Some(t) => report.push_float("ssa.extinction_time", t),
            None => report.push("ssa.extinction_time", "none"),
        }
    }

    write_text(&paths.artifact("report.txt"), &report.render())?;
    Ok(report)
}

pub fn compile_dsd(scenario: &Scenario, out_dir: Option<&Path>) -> Result<Report> {
    let dsd_spec = scenario
        .dsd
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no dsd block"))?;
    if scenario.disturbance.is_some() {
        bail!("input disturbances have no DSD realization; remove the disturbance block");
    }
    let closed = scenario.build_closed_loop()?;
    let schedule = scenario.build_schedule()?;
    let circuit = compile_to_dsd(&closed, dsd_spec.omega, dsd_spec.lambda_fast)?;
    let translated = circuit.translate_schedule(&closed, &schedule)?;

    let opts = scenario.sim_options();
    let t_end = scenario.simulation.t_end;
    let ideal = integrate(&closed, None, &schedule, t_end, &opts)?;
    let compiled = integrate_network(circuit.network(), &translated, t_end, &opts)?;
    let band = dsd_spec.band_fraction * closed.params().mu;
    let metrics = compare_traces(&ideal, &compiled, &circuit.signal_map(), band)?;

    let paths = RunPaths::new(scenario, out_dir);
    let network_json = serde_json::to_string_pretty(&network_to_spec(circuit.network(), None))?;
    write_text(&paths.artifact("network.json"), &(network_json + "\n"))?;
    write_text(&paths.artifact("gates.txt"), &gate_report(&circuit, Some(&compiled)))?;
    write_text(
        &paths.artifact("comparison.csv"),
        &comparison_csv(&ideal, &compiled, &circuit.signal_map()),
    )?;

    let mut report = Report::new();
    report.push("scenario", scenario.name.clone());
    report.push("command", "compile-dsd");
    report.push_float("dsd.omega", dsd_spec.omega);
    report.push_float("dsd.lambda_fast", dsd_spec.lambda_fast);
    report.push(
        "dsd.expanded_reactions",
        circuit.network().reactions().len().to_string(),
    );
    report.push("dsd.gate_complexes", circuit.gates.len().to_string());
    for (i, lambda) in circuit.tuned_rates.iter().enumerate() {
        report.push_float(format!("dsd.lambda.{i}"), *lambda);
    }
    report.push_float("comparison.band", band);
    report.push_float("comparison.max_abs_deviation", metrics.max_abs_deviation);
    report.push_float("comparison.rms_deviation", metrics.rms_deviation);
    match metrics.divergence_time {
        Some(t) => report.push_float("comparison.divergence_time", t),
        None => report.push("comparison.divergence_time", "none"),
    }
    for s in &metrics.per_species {
        report.push_float(format!("comparison.{}.max_abs", s.name), s.max_abs);
        report.push_float(format!("comparison.{}.rms", s.name), s.rms);
    }
    write_text(&paths.artifact("dsd_report.txt"), &report.render())?;
    Ok(report)
}

/// One `--param path=v1,v2,...` axis of a sweep.
#[derive(Debug, Clone)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn parse(spec: &str) -> Result<Self> {
        let (path, list) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("sweep parameter `{spec}` is not of the form path=v1,v2"))?;
        let values = list
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| anyhow!("sweep value `{v}` is not a number"))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            bail!("sweep parameter `{path}` has no values");
        }
        Ok(Self {
            path: path.to_string(),
            values,
        })
    }
}

struct SweepRow {
    values: Vec<f64>,
    tracking_error: f64,
    settling_time: f64,
    p_star: f64,
}

fn sweep_one(scenario: &Scenario) -> Result<(f64, f64, f64)> {
    let closed = scenario.build_closed_loop()?;
    let disturbance = scenario.build_disturbance()?;
    let schedule = scenario.build_schedule()?;
    let t_end = scenario.simulation.t_end;
    let traj = integrate(
        &closed,
        disturbance.as_ref(),
        &schedule,
        t_end,
        &scenario.sim_options(),
    )?;

    // Final set-point after all μ events.
    let mut mu = closed.params().mu;
    let mut last_event = 0.0;
    for e in &scenario.schedule {
        if e.time < t_end {
            last_event = e.time;
            if e.target == "controller.mu" {
                mu = e.value;
            }
        }
    }
    let y_col = closed.output_index();
    let tail_start = t_end - 0.1 * (t_end - last_event);
    let mut tracking_error = 0.0_f64;
    for (i, &t) in traj.times().iter().enumerate() {
        if t >= tail_start {
            tracking_error = tracking_error.max((traj.value(i, y_col) - mu).abs() / mu);
        }
    }

    // First time after the last event from which the output stays within
    // 1% of the set-point.
    let mut settled_from: Option<f64> = None;
    for (i, &t) in traj.times().iter().enumerate() {
        if t < last_event {
            continue;
        }
        let err = (traj.value(i, y_col) - mu).abs() / mu;
        if err <= 0.01 {
            settled_from.get_or_insert(t);
        } else {
            settled_from = None;
        }
    }
    let settling_time = settled_from.map_or(f64::INFINITY, |t| t - last_event);

    let costs = scenario
        .costs()?
        .unwrap_or_else(|| MetabolicCosts::uniform(1.0).unwrap());
    let params_final = {
        let mut p = *closed.params();
        p.mu = mu;
        p
    };
    let p_star = if closed.plant().is_unimolecular() {
        let lin = closed
            .plant()
            .linearize(&DVector::zeros(closed.plant().dim()))?;
        equilibria(&lin, &params_final)?
            .positive
            .map(|(_, v_star)| stationary_power_at(&params_final, &costs, v_star).total)
            .unwrap_or(f64::NAN)
    } else {
        let mut guess = DVector::from_column_slice(traj.last_row());
        for v in guess.iter_mut() {
            *v = v.max(1e-9);
        }
        match solve_equilibrium_nonlinear(&closed, &guess) {
            Ok(eq) => {
                stationary_power_at(&params_final, &costs, eq.state[closed.v_index()]).total
            }
            Err(_) => f64::NAN,
        }
    };

    Ok((tracking_error, settling_time, p_star))
}

pub fn sweep(
    scenario: &Scenario,
    axes: &[SweepAxis],
    jobs: usize,
    out_dir: Option<&Path>,
) -> Result<String> {
    if axes.is_empty() {
        bail!("sweep requires at least one --param axis");
    }
    // Cartesian product, first axis outermost; row order is tuple order.
    let mut tuples: Vec<Vec<f64>> = vec![vec![]];
    for axis in axes {
        let mut next = Vec::with_capacity(tuples.len() * axis.values.len());
        for t in &tuples {
            for &v in &axis.values {
                let mut t = t.clone();
                t.push(v);
                next.push(t);
            }
        }
        tuples = next;
    }

    let jobs = jobs.max(1);
    let mut rows: Vec<Option<SweepRow>> = Vec::with_capacity(tuples.len());
    rows.resize_with(tuples.len(), || None);
    let errors = std::sync::Mutex::new(Vec::<String>::new());

    std::thread::scope(|scope| {
        let chunk = tuples.len().div_ceil(jobs);
        for (slot, work) in rows.chunks_mut(chunk).zip(tuples.chunks(chunk)) {
            let errors = &errors;
            scope.spawn(move || {
                for (out, values) in slot.iter_mut().zip(work) {
                    let mut s = scenario.clone();
                    let mut failed = false;
                    for (axis, &v) in axes.iter().zip(values) {
                        if let Err(e) = s.apply_override(&format!("{}={}", axis.path, v)) {
                            errors.lock().unwrap().push(e.to_string());
                            failed = true;
                            break;
                        }
                    }
                    if failed {
                        continue;
                    }
                    match sweep_one(&s) {
                        Ok((tracking_error, settling_time, p_star)) => {
                            *out = Some(SweepRow {
                                values: values.clone(),
                                tracking_error,
                                settling_time,
                                p_star,
                            });
                        }
                        Err(e) => errors.lock().unwrap().push(e.to_string()),
                    }
                }
            });
        }
    });

    let errors = errors.into_inner().unwrap();
    if let Some(first) = errors.first() {
        bail!("sweep failed: {first}");
    }

    let mut csv = String::new();
    csv.push_str(
        &axes
            .iter()
            .map(|a| a.path.clone())
            .collect::<Vec<_>>()
            .join(","),
    );
    csv.push_str(",tracking_error,settling_time,p_star\n");
    for row in rows.into_iter().flatten() {
        for v in &row.values {
            csv.push_str(&fmt_float(*v));
            csv.push(',');
        }
        csv.push_str(&fmt_float(row.tracking_error));
        csv.push(',');
        csv.push_str(&fmt_float(row.settling_time));
        csv.push(',');
        csv.push_str(&fmt_float(row.p_star));
        csv.push('\n');
    }
    let paths = RunPaths::new(scenario, out_dir);
    write_text(&paths.artifact("sweep.csv"), &csv)?;
    Ok(csv)
}

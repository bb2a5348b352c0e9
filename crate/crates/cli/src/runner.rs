//! Scenario execution. Each scenario consumes a validated configuration,
//! records stages, checks, metrics, and aborts into the manifest, and emits
//! CSV artifacts next to `summary.json`. Solver aborts never panic the
//! orchestrator; they are recorded and fail the `run_completed` check.

use crate::config::{ExperimentConfig, Scenario};
use crate::manifest::RunManifest;
use crate::reports::{write_csv, Cell};
use anyhow::Context;
use shortpulse::justification::{
    convergence_study, justify_run, loglog_slope, sp_reference,
    tune_amplitude, ConvergenceStudy, JustificationError, JustifyOptions, JustifyRun,
    Perturbation, SpReference,
};
use shortpulse::klein_gordon::{
    continuation_monitor, kg_dt_max, kg_energies, kg_evolve, KgState, KgTrajectory,
    KleinGordonError,
};
use shortpulse::short_pulse::{
    admissible_initial_data, delta_of_trajectory, small_norm_check, sp_dt_max, sp_evolve,
    SpTrajectory,
};
use shortpulse::spectral::{differentiate, l2_norm, linf_norm, sobolev_norm};
use shortpulse::{Field, FourierGrid};
use std::path::Path;
use std::sync::Arc;

/// Runs the configured scenario, writing artifacts under `out`.
pub fn run_scenario(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<RunManifest> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let mut manifest = RunManifest::new(cfg.clone());
    match cfg.scenario {
        Scenario::SimulateSp => simulate_sp(cfg, out, &mut manifest)?,
        Scenario::SimulateKg => simulate_kg(cfg, out, &mut manifest)?,
        Scenario::Justify => justify(cfg, out, &mut manifest)?,
        Scenario::Converge => converge(cfg, out, &mut manifest)?,
        Scenario::Balance => balance(cfg, out, &mut manifest)?,
    }
    manifest
        .write(out)
        .with_context(|| format!("cannot write summary.json under {}", out.display()))?;
    Ok(manifest)
}

/// Simulation time attached to a solver error, when it carries one.
fn solver_time(err: &JustificationError) -> Option<f64> {
    match err {
        JustificationError::KleinGordon(e) => kg_solver_time(e),
        JustificationError::ShortPulse(shortpulse::short_pulse::ShortPulseError::StepUnstable {
            tau,
            ..
        }) => Some(*tau),
        _ => None,
    }
}

fn kg_solver_time(err: &KleinGordonError) -> Option<f64> {
    match err {
        KleinGordonError::ValidityRegionExceeded { t, .. } => Some(*t),
        KleinGordonError::StepUnstable { t, .. } => Some(*t),
        _ => None,
    }
}

/// Builds the grid and initial pulse; a missing amplitude is tuned so the
/// evolved smallness functional meets `delta_cap`.
fn initial_data(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<(Arc<FourierGrid>, Field), JustificationError> {
    let grid = FourierGrid::new(cfg.grid_length, cfg.grid_n)?;
    let opts = cfg.justify_options();
    let amplitude = match cfg.amplitude {
        Some(a) => a,
        None => tune_amplitude(cfg.shape.to_core(), cfg.width, &grid, cfg.delta_cap, &opts)?,
    };
    manifest.metric("amplitude", amplitude);
    let a0 = admissible_initial_data(cfg.shape.to_core(), amplitude, cfg.width, &grid)?;
    Ok((grid, a0))
}

/// Splits the sampling interval into an integer number of steps no longer
/// than `dt_cap` (or the user's explicit `dt`).
fn commensurate_step(h: f64, dt_cap: f64, user_dt: Option<f64>) -> (f64, usize) {
    let cap = user_dt.unwrap_or(dt_cap).min(dt_cap);
    let per = (h / cap).ceil().max(1.0) as usize;
    (h / per as f64, per)
}

fn sp_norm_rows(traj: &SpTrajectory, s: f64) -> Vec<Vec<Cell>> {
    traj.samples
        .iter()
        .map(|st| {
            vec![
                Some(st.tau),
                Some(l2_norm(&st.a)),
                Some(sobolev_norm(&st.a, 2.0)),
                Some(sobolev_norm(&st.a, s)),
                Some(linf_norm(&st.a)),
            ]
        })
        .collect()
}

fn kg_norm_rows(traj: &KgTrajectory) -> Vec<Vec<Cell>> {
    traj.samples
        .iter()
        .map(|st| {
            vec![
                Some(st.t),
                Some(l2_norm(&st.u)),
                Some(sobolev_norm(&st.u, 2.0)),
                Some(linf_norm(&st.u)),
                Some(l2_norm(&st.ut)),
            ]
        })
        .collect()
}

const SP_TRAJECTORY_HEADER: [&str; 5] = ["tau", "l2_norm", "h2_norm", "hs_norm", "linf_norm"];
const KG_TRAJECTORY_HEADER: [&str; 5] = ["t", "u_l2", "u_h2", "u_linf", "ut_l2"];

fn simulate_sp(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> anyhow::Result<()> {
    let data = manifest.stage("data", |m| initial_data(cfg, m));
    let (_grid, a0) = match data {
        Ok(pair) => pair,
        Err(e) => {
            manifest.abort("data", e.to_string(), None);
            manifest.check("run_completed", false, "initial data construction failed");
            return Ok(());
        }
    };

    let small = small_norm_check(&a0);
    manifest.metric("small_norm_sum", small.sum);
    manifest.metric("small_norm_ok", if small.ok { 1.0 } else { 0.0 });

    let h = cfg.t_end / cfg.samples as f64;
    let (dt, per) = commensurate_step(h, 0.9 * sp_dt_max(&a0), cfg.dt);
    let opts = shortpulse::short_pulse::SpOptions {
        linear_only: false,
        mean_tol: cfg.mean_tol,
    };
    let result = manifest.stage("evolve", |_| sp_evolve(&a0, cfg.t_end, dt, per, &opts));
    let traj = match result {
        Ok(t) => t,
        Err(e) => {
            let at = match &e {
                shortpulse::short_pulse::ShortPulseError::StepUnstable { tau, .. } => Some(*tau),
                _ => None,
            };
            manifest.abort("evolve", e.to_string(), at);
            manifest.check("run_completed", false, "pulse evolution aborted");
            return Ok(());
        }
    };
    manifest.check("run_completed", true, format!("dt = {dt:.3e}, {per} steps per sample"));

    let finite = traj.samples.iter().all(|s| s.a.is_finite());
    manifest.check("fields_finite", finite, "all samples finite");
    let sup_l2 = traj
        .samples
        .iter()
        .map(|s| l2_norm(&s.a))
        .fold(0.0f64, f64::max);
    let worst_mean = traj
        .samples
        .iter()
        .map(|s| s.a.mean().abs())
        .fold(0.0f64, f64::max);
    manifest.metric("worst_mean", worst_mean);
    manifest.check(
        "zero_mean_preserved",
        worst_mean <= cfg.mean_tol * (1.0 + sup_l2),
        format!("max |mean| = {worst_mean:.3e}"),
    );

    if cfg.s > 3.5 {
        if let Ok(delta) = delta_of_trajectory(&traj, cfg.s, &opts) {
            manifest.metric("delta", delta.delta);
            manifest.metric("sup_a_hs", delta.sup_a);
        }
    }

    manifest.stage("reports", |_| {
        write_csv(out, "trajectory_sp.csv", &SP_TRAJECTORY_HEADER, &sp_norm_rows(&traj, cfg.s))
    })?;
    Ok(())
}

fn simulate_kg(
    cfg: &ExperimentConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> anyhow::Result<()> {
    let data = manifest.stage("data", |m| initial_data(cfg, m));
    let (grid, u0) = match data {
        Ok(pair) => pair,
        Err(e) => {
            manifest.abort("data", e.to_string(), None);
            manifest.check("run_completed", false, "initial data construction failed");
            return Ok(());
        }
    };
    // Right-moving preparation: u_t(0) = -u_x(0).
    let ut0 = differentiate(&u0, 1).scaled(-1.0);
    let state0 = KgState { t: 0.0, u: u0, ut: ut0 };

    let h = cfg.t_end / cfg.samples as f64;
    let (dt, per) = commensurate_step(h, kg_dt_max(&grid, cfg.cfl), cfg.dt);
    let result = manifest.stage("evolve", |_| kg_evolve(&state0, cfg.t_end, dt, per));
    let traj = match result {
        Ok(t) => t,
        Err(e) => {
            let at = kg_solver_time(&e);
            let partial = match e {
                KleinGordonError::ValidityRegionExceeded { ref partial, .. } => {
                    partial.as_deref().cloned()
                }
                _ => None,
            };
            manifest.abort("evolve", e.to_string(), at);
            manifest.check("run_completed", false, "Klein-Gordon evolution aborted");
            let finite = partial
                .as_ref()
                .map(|p| p.samples.iter().all(|s| s.u.is_finite() && s.ut.is_finite()))
                .unwrap_or(true);
            manifest.check(
                "abort_before_nonfinite",
                finite,
                "every recorded sample is finite",
            );
            if let Some(p) = &partial {
                manifest.metric("samples_before_abort", p.samples.len() as f64);
                write_csv(out, "trajectory_kg.csv", &KG_TRAJECTORY_HEADER, &kg_norm_rows(p))?;
            }
            return Ok(());
        }
    };
    manifest.check("run_completed", true, format!("dt = {dt:.3e}, {per} steps per sample"));

    let finite = traj
        .samples
        .iter()
        .all(|s| s.u.is_finite() && s.ut.is_finite());
    manifest.check("fields_finite", finite, "all samples finite");

    let monitor = continuation_monitor(&traj);
    manifest.metric("max_abs_u", monitor.max_abs_u);
    manifest.metric("e1_slope", monitor.e1_slope);
    manifest.check(
        "continuation_criterion",
        monitor.ok,
        format!(
            "max |u| = {:.4e} (threshold {:.4e}), E1 slope {:.3e}",
            monitor.max_abs_u, monitor.threshold, monitor.e1_slope
        ),
    );

    let last = &traj.samples[traj.samples.len() - 1];
    let energies = kg_energies(&last.u, &last.ut);
    manifest.metric("e1_final", energies.e1);
    manifest.metric("e2_final", energies.e2);
    manifest.metric("e3_final", energies.e3);

    manifest.stage("reports", |_| {
        write_csv(out, "trajectory_kg.csv", &KG_TRAJECTORY_HEADER, &kg_norm_rows(&traj))
    })?;
    Ok(())
}

/// Shared front half of the paired scenarios: data, reference trajectory,
/// and seeded perturbation.
fn paired_setup(
    cfg: &ExperimentConfig,
    opts: &JustifyOptions,
    manifest: &mut RunManifest,
) -> Result<(SpReference, Perturbation), JustificationError> {
    let (grid, a0) = initial_data(cfg, manifest)?;
    let sp = sp_reference(&a0, opts)?;
    let pert = Perturbation::well_prepared(&grid, cfg.seed, cfg.perturbation)?;
    manifest.metric("perturbation_measure", pert.measure());
    Ok((sp, pert))
}

fn record_energy_csv(
    out: &Path,
    run: &JustifyRun,
    extra: &[(&str, Vec<Cell>)],
) -> std::io::Result<()> {
    let mut header = vec!["tau", "E", "Etilde", "J", "balance_residual"];
    for (name, _) in extra {
        header.push(name);
    }
    let n = run.samples.len();
    let rows: Vec<Vec<Cell>> = run
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            // Centered differences leave the end points without a residual.
            let res = if i >= 1 && i + 1 < n {
                Some(run.balance.residuals[i - 1].1)
            } else {
                None
            };
            let mut row = vec![Some(s.tau), Some(s.energy), Some(s.tilde), Some(s.flux), res];
            for (_, col) in extra {
                row.push(col[i]);
            }
            row
        })
        .collect();
    write_csv(out, "energy.csv", &header, &rows)
}

/// Records the checks shared by every completed paired run.
fn paired_run_checks(cfg: &ExperimentConfig, run: &JustifyRun, manifest: &mut RunManifest) {
    manifest.check(
        "balance_residual_within_cap",
        run.balance.max_residual <= cfg.residual_cap,
        format!(
            "max residual {:.3e} vs cap {:.1e} at stride {:.3e}",
            run.balance.max_residual, cfg.residual_cap, run.balance.stride
        ),
    );
    let g = &run.gronwall;
    manifest.check(
        "gronwall_fit_ok",
        g.ok && g.c0 <= cfg.constant_cap && g.c1 <= cfg.constant_cap,
        format!("C0 = {:.4e}, C1 = {:.4e}, cap {:.1e}", g.c0, g.c1, cfg.constant_cap),
    );
    let a = &run.sup_apriori;
    let worst = a.r_xi_tau_constant.max(a.eps_r_tau_constant);
    manifest.check(
        "apriori_constants_bounded",
        worst <= cfg.constant_cap,
        format!("worst implied constant {worst:.4e}"),
    );
    manifest.check(
        "tilde_below_half_energy",
        run.tilde_over_energy <= 0.5,
        format!("sup |Etilde| / E = {:.3e}", run.tilde_over_energy),
    );
}

fn justify_metrics(run: &JustifyRun, manifest: &mut RunManifest) {
    manifest.metric("epsilon", run.epsilon);
    manifest.metric("bound7", run.bound7);
    manifest.metric("bound9_u", run.bound9_u);
    manifest.metric("bound9_v", run.bound9_v);
    manifest.metric("sup_h2_scaled", run.sup_h2_scaled);
    manifest.metric("sup_h2_over_eps", run.sup_h2_scaled / run.epsilon);
    manifest.metric("tau_at_sup", run.tau_at_sup);
    manifest.metric("sup_h2_unscaled", run.sup_h2_unscaled);
    manifest.metric("data_norm_h2", run.data_norm_h2);
    manifest.metric("data_norm_v_h1", run.data_norm_v_h1);
    manifest.metric("gronwall_c0", run.gronwall.c0);
    manifest.metric("gronwall_c1", run.gronwall.c1);
    manifest.metric("tilde_over_energy", run.tilde_over_energy);
    manifest.metric("balance_max_residual", run.balance.max_residual);
    manifest.metric("balance_stride", run.balance.stride);
}

fn justify(cfg: &ExperimentConfig, out: &Path, manifest: &mut RunManifest) -> anyhow::Result<()> {
    let opts = cfg.justify_options();
    let setup = manifest.stage("setup", |m| paired_setup(cfg, &opts, m));
    let (sp, pert) = match setup {
        Ok(pair) => pair,
        Err(e) => {
            let at = solver_time(&e);
            manifest.abort("setup", e.to_string(), at);
            manifest.check("run_completed", false, "setup failed");
            return Ok(());
        }
    };
    manifest.metric("delta", sp.delta.delta);
    manifest.check(
        "delta_within_cap",
        sp.delta.delta <= cfg.delta_cap,
        format!("delta = {:.4e} vs cap {:.2e}", sp.delta.delta, cfg.delta_cap),
    );

    let epsilon = cfg.epsilon[0];
    let result = manifest.stage("justify", |_| justify_run(&sp, Some(&pert), epsilon, &opts));
    let run = match result {
        Ok(r) => r,
        Err(e) => {
            let at = solver_time(&e);
            manifest.abort("justify", e.to_string(), at);
            manifest.check("run_completed", false, "paired run aborted");
            return Ok(());
        }
    };
    manifest.check("run_completed", true, format!("epsilon = {epsilon}"));
    paired_run_checks(cfg, &run, manifest);
    justify_metrics(&run, manifest);

    manifest.stage("reports", |_| -> anyhow::Result<()> {
        record_energy_csv(out, &run, &[])?;
        write_csv(
            out,
            "trajectory_sp.csv",
            &SP_TRAJECTORY_HEADER,
            &sp_norm_rows(&sp.traj, cfg.s),
        )?;
        Ok(())
    })?;
    Ok(())
}

fn converge(cfg: &ExperimentConfig, out: &Path, manifest: &mut RunManifest) -> anyhow::Result<()> {
    let opts = cfg.justify_options();
    let setup = manifest.stage("setup", |m| paired_setup(cfg, &opts, m));
    let (sp, pert) = match setup {
        Ok(pair) => pair,
        Err(e) => {
            let at = solver_time(&e);
            manifest.abort("setup", e.to_string(), at);
            manifest.check("run_completed", false, "setup failed");
            return Ok(());
        }
    };
    manifest.metric("delta", sp.delta.delta);
    manifest.check(
        "delta_within_cap",
        sp.delta.delta <= cfg.delta_cap,
        format!("delta = {:.4e} vs cap {:.2e}", sp.delta.delta, cfg.delta_cap),
    );

    let study: ConvergenceStudy =
        manifest.stage("study", |_| convergence_study(&sp, Some(&pert), &cfg.epsilon, &opts));

    for (eps, msg) in &study.failures {
        manifest.abort(&format!("justify_run(epsilon={eps})"), msg.clone(), None);
    }
    manifest.check(
        "all_epsilons_completed",
        study.failures.is_empty(),
        format!("{} of {} completed", study.runs.len(), cfg.epsilon.len()),
    );
    manifest.check("run_completed", !study.runs.is_empty(), "study produced runs");

    let enough = study.runs.len() >= 3;
    manifest.check(
        "enough_epsilons_for_fit",
        enough,
        format!("{} survivors (need 3)", study.runs.len()),
    );

    if let Some(band) = study.band_ratio {
        manifest.metric("band_ratio", band);
        manifest.check(
            "error_band_within_factor_two",
            band <= 2.0,
            format!("max/min of sup error / eps = {band:.4}"),
        );
    } else {
        manifest.check("error_band_within_factor_two", false, "band undefined");
    }
    if let Some(slope) = study.slope_h2_scaled {
        manifest.metric("slope_h2_scaled", slope);
        manifest.check(
            "scaled_error_slope_at_least_0.8",
            slope >= 0.8,
            format!("log-log slope = {slope:.4}"),
        );
    } else {
        manifest.check("scaled_error_slope_at_least_0.8", false, "slope undefined");
    }
    if let Some(slope) = study.slope_h2_unscaled {
        manifest.metric("slope_h2_unscaled", slope);
        manifest.check(
            "unscaled_error_exponent_half",
            (slope - 0.5).abs() <= 0.1,
            format!("fitted exponent = {slope:.4}, expected 0.5 +- 0.1"),
        );
    } else {
        manifest.check("unscaled_error_exponent_half", false, "slope undefined");
    }
    if let Some(slope) = study.slope_data_norm {
        manifest.metric("slope_data_norm", slope);
        manifest.check(
            "data_norm_exponent_minus_half",
            (slope + 0.5).abs() <= 0.05,
            format!("fitted exponent = {slope:.4}, expected -0.5 +- 0.05"),
        );
    } else {
        manifest.check("data_norm_exponent_minus_half", false, "slope undefined");
    }
    let spreads = (study.gronwall_c0_spread, study.gronwall_c1_spread);
    if let (Some(s0), Some(s1)) = spreads {
        manifest.metric("gronwall_c0_spread", s0);
        manifest.metric("gronwall_c1_spread", s1);
        manifest.check(
            "gronwall_constants_stable",
            s0 <= 0.2 && s1 <= 0.2,
            format!("C0 spread {s0:.4}, C1 spread {s1:.4} (cap 0.2)"),
        );
    } else {
        manifest.check("gronwall_constants_stable", false, "spread undefined");
    }
    let fits_ok = study.runs.iter().all(|r| r.gronwall.ok);
    manifest.check("gronwall_fits_ok", fits_ok, "per-epsilon envelope fits succeeded");
    let worst_balance = study
        .runs
        .iter()
        .map(|r| r.balance.max_residual)
        .fold(0.0f64, f64::max);
    manifest.check(
        "balance_residual_within_cap",
        worst_balance <= cfg.residual_cap,
        format!("worst max residual {worst_balance:.3e} vs cap {:.1e}", cfg.residual_cap),
    );

    for run in &study.runs {
        let e = run.epsilon;
        manifest.metric(&format!("sup_h2_scaled[{e}]"), run.sup_h2_scaled);
        manifest.metric(&format!("sup_h2_over_eps[{e}]"), run.sup_h2_scaled / e);
        manifest.metric(&format!("gronwall_c0[{e}]"), run.gronwall.c0);
        manifest.metric(&format!("gronwall_c1[{e}]"), run.gronwall.c1);
    }

    manifest.stage("reports", |_| -> std::io::Result<()> {
        let mut rows = Vec::new();
        let mut eps_so_far = Vec::new();
        let mut err_so_far = Vec::new();
        for run in &study.runs {
            eps_so_far.push(run.epsilon);
            err_so_far.push(run.sup_h2_scaled);
            let slope = loglog_slope(&eps_so_far, &err_so_far);
            rows.push(vec![
                Some(run.epsilon),
                Some(run.sup_h2_scaled),
                Some(run.tau_at_sup),
                slope,
            ]);
        }
        write_csv(
            out,
            "convergence.csv",
            &["epsilon", "sup_h2_error", "tau_at_sup", "slope_running"],
            &rows,
        )
    })?;
    Ok(())
}

fn balance(cfg: &ExperimentConfig, out: &Path, manifest: &mut RunManifest) -> anyhow::Result<()> {
    // The Klein-Gordon step is tightened so the stride study sees pure
    // sampling error rather than the integrator floor.
    let base_opts = JustifyOptions {
        kg_dt_scale: 0.25,
        ..cfg.justify_options()
    };
    let epsilon = cfg.epsilon[0];
    let setup = manifest.stage("data", |m| -> Result<_, JustificationError> {
        let (grid, a0) = initial_data(cfg, m)?;
        let pert = Perturbation::well_prepared(&grid, cfg.seed, cfg.perturbation)?;
        Ok((a0, pert))
    });
    let (a0, pert) = match setup {
        Ok(pair) => pair,
        Err(e) => {
            manifest.abort("data", e.to_string(), None);
            manifest.check("run_completed", false, "setup failed");
            return Ok(());
        }
    };

    let mut runs: Vec<JustifyRun> = Vec::new();
    for factor in [1usize, 2, 4] {
        let opts = JustifyOptions {
            samples: cfg.samples * factor,
            ..base_opts
        };
        let stage = format!("stride_x{factor}");
        let result = manifest.stage(&stage, |_| -> Result<JustifyRun, JustificationError> {
            let sp = sp_reference(&a0, &opts)?;
            justify_run(&sp, Some(&pert), epsilon, &opts)
        });
        match result {
            Ok(r) => runs.push(r),
            Err(e) => {
                let at = solver_time(&e);
                manifest.abort(&stage, e.to_string(), at);
            }
        }
    }

    if runs.len() < 3 {
        manifest.check("run_completed", false, "a stride run aborted");
        return Ok(());
    }
    manifest.check("run_completed", true, "three stride levels completed");

    let maxes: Vec<f64> = runs.iter().map(|r| r.balance.max_residual).collect();
    for (run, name) in runs.iter().zip(["x1", "x2", "x4"]) {
        manifest.metric(&format!("max_residual_{name}"), run.balance.max_residual);
        manifest.metric(&format!("stride_{name}"), run.balance.stride);
    }
    manifest.check(
        "balance_residual_within_cap",
        maxes[0] <= cfg.residual_cap,
        format!("max residual {:.3e} vs cap {:.1e}", maxes[0], cfg.residual_cap),
    );
    let r1 = maxes[0] / maxes[1].max(f64::MIN_POSITIVE);
    let r2 = maxes[1] / maxes[2].max(f64::MIN_POSITIVE);
    manifest.metric("residual_ratio_1", r1);
    manifest.metric("residual_ratio_2", r2);
    let second_order = (2.8..=5.2).contains(&r1) && (2.8..=5.2).contains(&r2);
    manifest.check(
        "balance_second_order_decay",
        second_order,
        format!("stride-halving ratios {r1:.3} and {r2:.3}, expected near 4"),
    );

    // Align the finer runs' residuals onto the base sampling: base sample i
    // sits at fine index (factor * i), and residual j covers sample j + 1.
    let base = &runs[0];
    let n = base.samples.len();
    let col = |run: &JustifyRun, factor: usize| -> Vec<Cell> {
        (0..n)
            .map(|i| {
                if i >= 1 && i + 1 < n {
                    Some(run.balance.residuals[factor * i - 1].1)
                } else {
                    None
                }
            })
            .collect()
    };
    let extra = [
        ("residual_stride2", col(&runs[1], 2)),
        ("residual_stride4", col(&runs[2], 4)),
    ];
    manifest.stage("reports", |_| record_energy_csv(out, base, &extra))?;
    justify_metrics(base, manifest);
    Ok(())
}

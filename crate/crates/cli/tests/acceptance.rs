//! Acceptance suite: one test per criterion, each emitting its own
//! pass/fail line through the harness. The heavy epsilon sweep is computed
//! once and shared by the criteria that score it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shortpulse::justification::{
    convergence_study, default_scenario, justify_run, sp_reference, ConvergenceStudy,
    JustifyOptions, Scenario,
};
use shortpulse::klein_gordon::{
    commensurate_grid, energy_rate_check, kg_dt_max, kg_evolve, scale_up, KgState, KgTrajectory,
    ScalingParams,
};
use shortpulse::short_pulse::{
    admissible_initial_data, antiderivative_diagnostics, small_norm_check, sp_evolve, sp_rhs,
    sp_time_derivatives, DataShape, SpOptions,
};
use shortpulse::spectral::{l2_norm, random_band_limited, semigroup_apply};
use shortpulse::{Field, FourierGrid};
use std::f64::consts::PI;
use std::sync::OnceLock;

struct Standard {
    scenario: Scenario,
    study: ConvergenceStudy,
}

/// The default small-data scenario and its epsilon sweep, computed once.
fn standard() -> &'static Standard {
    static CELL: OnceLock<Standard> = OnceLock::new();
    CELL.get_or_init(|| {
        let scenario = default_scenario(12345).expect("default scenario builds");
        let sp = sp_reference(&scenario.a0, &scenario.opts).expect("reference evolves");
        assert!(
            sp.delta.delta <= scenario.delta_cap,
            "tuned data must satisfy the smallness cap"
        );
        let study = convergence_study(
            &sp,
            Some(&scenario.perturbation),
            &scenario.epsilons,
            &scenario.opts,
        );
        assert!(
            study.failures.is_empty(),
            "epsilon sweep had failures: {:?}",
            study.failures
        );
        Standard { scenario, study }
    })
}

/// Criterion 1: the linear semigroup preserves the L2 norm to 1e-12
/// relative accuracy on 100 random zero-mean fields at tau in {0.1, 1, 10}.
#[test]
fn criterion_01_semigroup_isometry() {
    let grid = FourierGrid::new(2.0 * PI, 256).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = std::time::Instant::now();
    for i in 0..100 {
        let f = random_band_limited(&grid, &mut rng, 60, 1.0 + (i as f64) / 50.0);
        let before = l2_norm(&f);
        for tau in [0.1, 1.0, 10.0] {
            let moved = semigroup_apply(&f, tau).unwrap();
            let after = l2_norm(&moved);
            assert!(
                (after - before).abs() <= 1e-12 * before,
                "isometry violated at tau = {tau}: {before} -> {after}"
            );
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0, "criterion 1 exceeded 1 s");
}

/// Criterion 2: along a small-data run on [0, 1], the anti-derivatives B1
/// and B2 agree with their Duhamel representations to 1e-5 relative L2.
#[test]
fn criterion_02_duhamel_direct_equivalence() {
    let start = std::time::Instant::now();
    let grid = FourierGrid::new(64.0 * PI, 1024).unwrap();
    let a0 = admissible_initial_data(DataShape::GaussianDerivative, 5e-3, 1.0, &grid).unwrap();
    let opts = SpOptions::default();
    // 100 uniform samples with four integrator steps per sample.
    let h = 1.0 / 100.0;
    let traj = sp_evolve(&a0, 1.0, h / 4.0, 4, &opts).unwrap();
    let diag = antiderivative_diagnostics(&traj, &opts).unwrap();
    assert!(
        diag.b1_max_rel <= 1e-5,
        "B1 disagreement: {:.3e}",
        diag.b1_max_rel
    );
    assert!(
        diag.b2_max_rel <= 1e-5,
        "B2 disagreement: {:.3e}",
        diag.b2_max_rel
    );
    assert!(start.elapsed().as_secs_f64() < 30.0, "criterion 2 exceeded 30 s");
}

/// Criterion 3: the closure formulas for A_tau, A_tautau, A_tautautau match
/// centered differences of the flow at 2nd order (Richardson ratio 4 +- 0.5)
/// with terminal relative error <= 1e-3 at dt = 1e-3.
#[test]
fn criterion_03_closure_formula_consistency() {
    let start = std::time::Instant::now();
    let grid = FourierGrid::new(64.0 * PI, 1024).unwrap();
    let a0 = admissible_initial_data(DataShape::GaussianDerivative, 2.0, 2.0, &grid).unwrap();
    let opts = SpOptions::default();

    // Relative FD errors of the three closures at step h.
    let errs_at = |h: f64| -> [f64; 3] {
        let traj = sp_evolve(&a0, 4.0 * h, h, 1, &opts).unwrap();
        let s: Vec<&Field> = traj.samples.iter().map(|st| &st.a).collect();
        let d = sp_time_derivatives(s[2], &opts).unwrap();
        let rel = |fd: &Field, exact: &Field| l2_norm(&(fd - exact)) / l2_norm(exact);

        let fd1 = s[3].add_scaled(-1.0, s[1]).scaled(1.0 / (2.0 * h));
        let mut fd2 = s[3].add_scaled(-2.0, s[2]);
        fd2 = fd2.add_scaled(1.0, s[1]).scaled(1.0 / (h * h));
        let mut fd3 = s[4].add_scaled(-2.0, s[3]);
        fd3 = fd3.add_scaled(2.0, s[1]);
        fd3 = fd3.add_scaled(-1.0, s[0]).scaled(1.0 / (2.0 * h * h * h));
        [
            rel(&fd1, &d.a_tau),
            rel(&fd2, &d.a_tautau),
            rel(&fd3, &d.a_tautautau),
        ]
    };

    let coarse = errs_at(1e-3);
    let fine = errs_at(5e-4);
    for (i, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        assert!(
            *c <= 1e-3,
            "closure {i} terminal error {c:.3e} exceeds 1e-3 at dt = 1e-3"
        );
        let ratio = c / f;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "closure {i} Richardson ratio {ratio:.3} outside 4 +- 0.5 (errors {c:.3e} -> {f:.3e})"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 3 exceeded 1 min");
}

/// Criterion 4: the three Klein-Gordon energy rates match centered
/// differences at 2nd order in the sampling stride, terminal residual
/// <= 1e-5 on the default small-data scenario.
#[test]
fn criterion_04_klein_gordon_energy_balances() {
    let start = std::time::Instant::now();

    // Terminal residual on the default small-data scenario. The data is so
    // small that the residual sits at the integrator floor, far below 1e-5.
    let scenario = &standard().scenario;
    let params = ScalingParams::new(0.2).unwrap();
    let grid_x = commensurate_grid(&scenario.grid, params).unwrap();
    let a_tau0 = sp_rhs(&scenario.a0, &SpOptions::default()).unwrap();
    let kg0 = scale_up(&scenario.a0, Some(&a_tau0), 0.0, params, &grid_x).unwrap();
    let t_end = 5.0;
    let h = t_end / 200.0;
    let cap = kg_dt_max(&grid_x, 0.2);
    let per = (h / cap).ceil().max(1.0) as usize;
    let traj = kg_evolve(&kg0, t_end, h / per as f64, per).unwrap();
    let report = energy_rate_check(&traj).unwrap();
    let terminal = report.max_residual.iter().copied().fold(0.0, f64::max);
    assert!(
        terminal <= 1e-5,
        "terminal residual {terminal:.3e} exceeds 1e-5"
    );

    // Second-order decay in the sampling stride, on data large enough that
    // the centered-difference truncation error rises above that floor. One
    // fine run is thinned to 1x/2x/4x strides so every level scores rates on
    // the identical solution.
    let g = FourierGrid::new(2.0 * PI, 128).unwrap();
    let state = KgState {
        t: 0.0,
        u: Field::from_fn(&g, |x| 0.2 * x.sin() + 0.1 * (2.0 * x).cos()),
        ut: Field::from_fn(&g, |x| 0.1 * x.cos()),
    };
    let fine_h = 0.05;
    let cap = kg_dt_max(&g, 0.2);
    let per = (fine_h / cap).ceil().max(1.0) as usize;
    let fine = kg_evolve(&state, 2.0, fine_h / per as f64, per).unwrap();
    let residual_thinned = |every: usize| -> f64 {
        let samples: Vec<KgState> = fine.samples.iter().step_by(every).cloned().collect();
        let traj = KgTrajectory {
            samples,
            dt: fine.dt,
        };
        let report = energy_rate_check(&traj).unwrap();
        report.max_residual.iter().copied().fold(0.0, f64::max)
    };
    let coarse = residual_thinned(4);
    let mid = residual_thinned(2);
    let finest = residual_thinned(1);
    let r1 = coarse / mid;
    let r2 = mid / finest;
    assert!(
        (3.0..=5.0).contains(&r1) && (3.0..=5.0).contains(&r2),
        "expected 2nd-order decay, ratios {r1:.3} and {r2:.3} (residuals {coarse:.3e}, {mid:.3e}, {finest:.3e})"
    );
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 4 exceeded 1 min");
}

/// Criterion 5: on the default scenario the scaled error sup |U - A|_{H2}
/// divided by epsilon stays in one factor-2 band and the log-log slope is
/// at least 0.8.
#[test]
fn criterion_05_scaled_error_law() {
    let study = &standard().study;
    let band = study.band_ratio.expect("band defined");
    assert!(
        band <= 2.0,
        "sup error / eps spans a factor {band:.4} > 2 band"
    );
    let slope = study.slope_h2_scaled.expect("slope defined");
    assert!(slope >= 0.8, "log-log slope {slope:.4} below 0.8");
}

/// Criterion 6: the energy-balance residual is <= 1e-3 at the default
/// stride and decays at 2nd order under stride halving.
#[test]
fn criterion_06_balance_identity() {
    let start = std::time::Instant::now();
    let std_run = &standard().study.runs[0];
    assert!(
        std_run.balance.max_residual <= 1e-3,
        "default-stride residual {:.3e} exceeds 1e-3",
        std_run.balance.max_residual
    );

    // Stride study with a tightened Klein-Gordon step so the measured decay
    // is the sampling error, not the integrator floor.
    let scenario = &standard().scenario;
    let mut maxes = Vec::new();
    for samples in [50usize, 100, 200] {
        let opts = JustifyOptions {
            samples,
            kg_dt_scale: 0.25,
            ..scenario.opts
        };
        let sp = sp_reference(&scenario.a0, &opts).unwrap();
        let run = justify_run(&sp, Some(&scenario.perturbation), 0.2, &opts).unwrap();
        maxes.push(run.balance.max_residual);
    }
    let r1 = maxes[0] / maxes[1];
    let r2 = maxes[1] / maxes[2];
    assert!(
        (2.8..=5.2).contains(&r1) && (2.8..=5.2).contains(&r2),
        "expected 2nd-order decay, ratios {r1:.3} and {r2:.3} (residuals {maxes:?})"
    );
    assert!(start.elapsed().as_secs_f64() < 300.0, "criterion 6 exceeded 5 min");
}

/// Criterion 7: the Gronwall envelope fits with C0, C1 <= 1e3 and the
/// constants vary by at most 20% across the epsilon sweep.
#[test]
fn criterion_07_gronwall_envelope() {
    let study = &standard().study;
    for run in &study.runs {
        assert!(run.gronwall.ok, "fit failed at epsilon {}", run.epsilon);
        assert!(
            run.gronwall.c0 <= 1e3 && run.gronwall.c1 <= 1e3,
            "constants exceed caps at epsilon {}: C0 = {:.3e}, C1 = {:.3e}",
            run.epsilon,
            run.gronwall.c0,
            run.gronwall.c1
        );
    }
    let s0 = study.gronwall_c0_spread.expect("spread defined");
    let s1 = study.gronwall_c1_spread.expect("spread defined");
    assert!(
        s0 <= 0.2 && s1 <= 0.2,
        "constants vary too much: C0 spread {s0:.4}, C1 spread {s1:.4}"
    );
}

/// Criterion 8: the unscaled error grows like eps^(1/2 +- 0.1) and the
/// leading-order data norm like eps^(-1/2 +- 0.05).
#[test]
fn criterion_08_unscaled_half_power_laws() {
    let study = &standard().study;
    let err_slope = study.slope_h2_unscaled.expect("slope defined");
    assert!(
        (err_slope - 0.5).abs() <= 0.1,
        "unscaled error exponent {err_slope:.4} outside 0.5 +- 0.1"
    );
    let data_slope = study.slope_data_norm.expect("slope defined");
    assert!(
        (data_slope + 0.5).abs() <= 0.05,
        "data norm exponent {data_slope:.4} outside -0.5 +- 0.05"
    );
}

/// Criterion 9: the small-norm check on a sin(xi) over a 2 pi box flips at
/// a* = 1 / sqrt(12 pi) within one 1e-3 sweep step.
#[test]
fn criterion_09_small_norm_threshold() {
    let start = std::time::Instant::now();
    let grid = FourierGrid::new(2.0 * PI, 64).unwrap();
    let mut flip = None;
    let mut prev_ok = true;
    let mut a = 0.1;
    while a <= 0.2 + 1e-12 {
        let field = Field::from_fn(&grid, |x| a * x.sin());
        let ok = small_norm_check(&field).ok;
        assert!(
            prev_ok || !ok,
            "check flipped back to ok at a = {a}: the sweep must be monotone"
        );
        if prev_ok && !ok {
            flip = Some(a);
        }
        prev_ok = ok;
        a += 1e-3;
    }
    let flip = flip.expect("sweep must cross the threshold");
    let exact = 1.0 / (12.0 * PI).sqrt();
    assert!(
        (flip - exact).abs() <= 1e-3,
        "flip at {flip:.6} but threshold is {exact:.6}"
    );
    assert!(start.elapsed().as_secs_f64() < 1.0, "criterion 9 exceeded 1 s");
}

/// Criterion 10: a large-amplitude Klein-Gordon run aborts with the
/// validity-region error before any non-finite value appears, the abort is
/// recorded in the manifest, and the process exits nonzero.
#[test]
fn criterion_10_continuation_trigger() {
    let start = std::time::Instant::now();
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("criterion10");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        "[data]\namplitude = 0.38\n\n[run]\nscenario = \"simulate-kg\"\nt_end = 10.0\nsamples = 100\n",
    )
    .unwrap();
    let out = dir.join("out");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_shortpulse"))
        .args(["simulate-kg", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(1), "abort must exit with status 1");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let aborts = summary["aborts"].as_array().unwrap();
    assert_eq!(aborts.len(), 1, "exactly one abort expected");
    let abort = &aborts[0];
    assert!(
        abort["error"]
            .as_str()
            .unwrap()
            .contains("hyperbolicity region"),
        "abort must name the validity region: {abort}"
    );
    let t = abort["solver_time"].as_f64().unwrap();
    assert!(t > 0.0 && t < 10.0, "abort should occur mid-run, got t = {t}");
    assert!(abort["unix_time"].as_f64().unwrap() > 0.0);

    let checks = summary["checks"].as_array().unwrap();
    let mut names = std::collections::HashSet::new();
    for c in checks {
        assert!(
            names.insert(c["name"].as_str().unwrap().to_string()),
            "duplicate check {c}"
        );
    }
    let finite_check = checks
        .iter()
        .find(|c| c["name"] == "abort_before_nonfinite")
        .expect("finiteness check recorded");
    assert_eq!(finite_check["passed"], true, "non-finite value before abort");

    // The partial trajectory on disk must be finite as well.
    let csv = std::fs::read_to_string(out.join("trajectory_kg.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for cell in line.split(',') {
            let v: f64 = cell.parse().unwrap();
            assert!(v.is_finite(), "non-finite value in trajectory: {line}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 10 exceeded 1 min");
}

//! Integrator convergence and cross-formulation agreement tests. Reference
//! solutions come from the exact linear semigroup and from self-convergence
//! under step halving.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shortpulse::klein_gordon::{
    from_symmetric, kg_dt_max, kg_evolve, symmetric_evolve, to_symmetric, KgState,
};
use shortpulse::short_pulse::{sp_dt_max, sp_evolve, SpOptions};
use shortpulse::spectral::{l2_norm, random_band_limited, semigroup_apply};
use shortpulse::{Field, FourierGrid};
use std::f64::consts::PI;
use std::sync::Arc;

fn grid(n: usize) -> Arc<FourierGrid> {
    FourierGrid::new(2.0 * PI, n).unwrap()
}

fn rel_err(a: &Field, b: &Field) -> f64 {
    l2_norm(&(a - b)) / l2_norm(b).max(1e-300)
}

fn pulse_data(n: usize, l2: f64) -> Field {
    let g = grid(n);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    random_band_limited(&g, &mut rng, 4, l2)
}

/// Linear regime: the semigroup is exact, so integrator error is pure
/// time-stepping error and must decay at fourth order.
#[test]
fn linear_integrator_converges_to_the_semigroup_at_fourth_order() {
    let a0 = pulse_data(128, 0.3);
    let opts = SpOptions {
        linear_only: true,
        ..SpOptions::default()
    };
    let t_end = 1.0;
    let exact = semigroup_apply(&a0, t_end).unwrap();
    let base_dt = t_end / 40.0;
    let mut errs = Vec::new();
    for level in 0..3 {
        let dt = base_dt / f64::powi(2.0, level);
        let traj = sp_evolve(&a0, t_end, dt, usize::MAX, &opts).unwrap();
        let last = &traj.samples[traj.samples.len() - 1].a;
        errs.push(rel_err(last, &exact));
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected fourth-order decay, got ratio {ratio:.2} from errors {errs:?}"
        );
    }
    assert!(errs[0] <= 1e-8, "coarse error too large: {:?}", errs);
}

/// Nonlinear pulse evolution self-converges at fourth order against a
/// step-halved reference.
#[test]
fn pulse_integrator_self_converges_at_fourth_order() {
    // Small amplitude on a coarse grid keeps the stability cap mild, so the
    // coarse level carries visible time error instead of roundoff.
    let g = grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a0 = random_band_limited(&g, &mut rng, 3, 0.1);
    let opts = SpOptions::default();
    let t_end = 1.0;
    let cap = sp_dt_max(&a0);
    let base_dt = t_end / (t_end / (0.9 * cap)).ceil();
    let reference = sp_evolve(&a0, t_end, base_dt / 16.0, usize::MAX, &opts).unwrap();
    let exact = &reference.samples[reference.samples.len() - 1].a;
    let mut errs = Vec::new();
    for level in 0..3 {
        let dt = base_dt / f64::powi(2.0, level);
        let traj = sp_evolve(&a0, t_end, dt, usize::MAX, &opts).unwrap();
        errs.push(rel_err(&traj.samples[traj.samples.len() - 1].a, exact));
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected fourth-order decay, got ratio {ratio:.2} from errors {errs:?}"
        );
    }
}

/// Klein-Gordon RK4 self-converges at fourth order.
#[test]
fn klein_gordon_integrator_self_converges_at_fourth_order() {
    let g = grid(128);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u0 = random_band_limited(&g, &mut rng, 4, 0.2);
    let v0 = random_band_limited(&g, &mut rng, 4, 0.1);
    let state0 = KgState {
        t: 0.0,
        u: u0,
        ut: v0,
    };
    let t_end = 1.0;
    let cap = kg_dt_max(&g, 0.2);
    let base_dt = t_end / (t_end / cap).ceil();
    let reference = kg_evolve(&state0, t_end, base_dt / 16.0, usize::MAX).unwrap();
    let exact = &reference.samples[reference.samples.len() - 1].u;
    let mut errs = Vec::new();
    for level in 0..3 {
        let dt = base_dt / f64::powi(2.0, level);
        let traj = kg_evolve(&state0, t_end, dt, usize::MAX).unwrap();
        errs.push(rel_err(&traj.samples[traj.samples.len() - 1].u, exact));
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected fourth-order decay, got ratio {ratio:.2} from errors {errs:?}"
        );
    }
}

/// The primitive and symmetrized formulations integrate to the same solution,
/// and the redundant symmetric component keeps satisfying its constraint.
#[test]
fn symmetric_and_primitive_formulations_agree() {
    let g = grid(128);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u0 = random_band_limited(&g, &mut rng, 4, 0.2);
    let v0 = random_band_limited(&g, &mut rng, 4, 0.1);
    let state0 = KgState {
        t: 0.0,
        u: u0,
        ut: v0,
    };
    let t_end = 1.0;
    let dt = t_end / (t_end / (0.25 * kg_dt_max(&g, 0.2))).ceil();

    let primitive = kg_evolve(&state0, t_end, dt, usize::MAX).unwrap();
    let sym0 = to_symmetric(&state0).unwrap();
    let sym1 = symmetric_evolve(&sym0, t_end, dt).unwrap();
    let from_sym = from_symmetric(&sym1);

    let prim_last = &primitive.samples[primitive.samples.len() - 1];
    let du = rel_err(&from_sym.u, &prim_last.u);
    let dut = rel_err(&from_sym.ut, &prim_last.ut);
    assert!(du <= 1e-7, "u drift between formulations: {du:.3e}");
    assert!(dut <= 1e-6, "ut drift between formulations: {dut:.3e}");

    let defect = shortpulse::klein_gordon::symmetric_defect(&sym1);
    assert!(defect <= 1e-6, "constraint drift: {defect:.3e}");
}

//! The quasilinear Klein-Gordon equation `u_tt - u_xx + u + (u^3)_xx = 0`
//! on a periodic box, solved pseudospectrally in the original variables.
//!
//! Provides the RK4 evolver with hyperbolicity guards (the equation is
//! quasilinear: it stays hyperbolic only while `max |u| < 1/sqrt(3)`), the
//! equivalent symmetric first-order system used as an independent
//! cross-check, the three energy functionals with their exact dissipation
//! rates, and the scaling maps linking Klein-Gordon solutions to the
//! short-pulse frame `u(t, x) = 2 eps U(eps t, (x - t) / (2 eps))`.

use crate::spectral::{
    check_same_grid, dealiased_product, differentiate, integral_of_product, l2_norm, linf_norm,
    translate, Field, FourierGrid, SpectralError,
};
use std::sync::Arc;

/// Hyperbolicity threshold `1/sqrt(3)` for `max |u|`.
pub const VALIDITY_LIMIT: f64 = 0.577_350_269_189_625_8;
/// Relative safety margin: evolvers abort at `(1 - margin) / sqrt(3)`.
pub const VALIDITY_MARGIN: f64 = 0.02;

/// Errors from the Klein-Gordon layer.
#[derive(Debug, thiserror::Error)]
pub enum KleinGordonError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    /// `max |u|` reached the (margin-reduced) hyperbolicity threshold.
    /// Evolvers attach everything computed so far as `partial`.
    #[error("left the hyperbolicity region at t = {t:.6e}: max |u| = {max_abs_u:.4e} >= {threshold:.4e}")]
    ValidityRegionExceeded {
        t: f64,
        max_abs_u: f64,
        threshold: f64,
        partial: Option<Box<KgTrajectory>>,
    },
    /// One RK4 step grew the state norm by more than a factor of 10.
    #[error("step unstable at t = {t:.6e}: norm grew by factor {factor:.3e}")]
    StepUnstable { t: f64, factor: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The short-pulse and Klein-Gordon grids are not images of each other
    /// under the scaling map.
    #[error("grids are not commensurate: L_x = {lx:.6e} != 2 eps L_xi = {expected:.6e} or n {nx} != {nxi}")]
    IncommensurateGrids {
        lx: f64,
        expected: f64,
        nx: usize,
        nxi: usize,
    },
}

/// The small parameter of the scaling map, constrained to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScalingParams {
    epsilon: f64,
}

impl ScalingParams {
    pub fn new(epsilon: f64) -> Result<Self, KleinGordonError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(KleinGordonError::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(ScalingParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Snapshot `(u, u_t)` at one time.
#[derive(Debug, Clone)]
pub struct KgState {
    pub t: f64,
    pub u: Field,
    pub ut: Field,
}

/// Uniformly stepped Klein-Gordon trajectory.
#[derive(Debug, Clone)]
pub struct KgTrajectory {
    pub samples: Vec<KgState>,
    pub dt: f64,
}

impl KgTrajectory {
    /// Spacing between consecutive samples if uniform (slack 1e-9).
    pub fn sample_spacing(&self) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        let h = self.samples[1].t - self.samples[0].t;
        for w in self.samples.windows(2) {
            let d = w[1].t - w[0].t;
            if (d - h).abs() > 1e-9 * h.abs().max(1.0) {
                return None;
            }
        }
        Some(h)
    }

    pub fn last(&self) -> &KgState {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

/// Right-hand side of the first-order form:
/// `du = u_t`, `dut = u_xx - u - (u^3)_xx`. Fails once hyperbolicity is
/// genuinely lost (`max |u| >= 1/sqrt(3)`).
pub fn kg_rhs(u: &Field, ut: &Field) -> Result<(Field, Field), KleinGordonError> {
    check_same_grid(u, ut)?;
    let amp = linf_norm(u);
    if amp >= VALIDITY_LIMIT {
        return Err(KleinGordonError::ValidityRegionExceeded {
            t: f64::NAN,
            max_abs_u: amp,
            threshold: VALIDITY_LIMIT,
            partial: None,
        });
    }
    let cube = dealiased_product(&[u, u, u]);
    let mut dut = differentiate(u, 2);
    dut = dut.add_scaled(-1.0, u);
    dut = dut.add_scaled(-1.0, &differentiate(&cube, 2));
    Ok((ut.clone(), dut))
}

/// Largest stable RK4 step: `cfl / sqrt(1 + k_max^2)`.
pub fn kg_dt_max(grid: &FourierGrid, cfl: f64) -> f64 {
    let kmax = grid.max_wavenumber();
    cfl / (1.0 + kmax * kmax).sqrt()
}

fn margin_threshold() -> f64 {
    (1.0 - VALIDITY_MARGIN) * VALIDITY_LIMIT
}

/// One classical RK4 step of the first-order system.
pub fn kg_step(state: &KgState, dt: f64) -> Result<KgState, KleinGordonError> {
    let (u, ut) = (&state.u, &state.ut);
    let (k1u, k1v) = kg_rhs(u, ut)?;
    let (k2u, k2v) = kg_rhs(&u.add_scaled(0.5 * dt, &k1u), &ut.add_scaled(0.5 * dt, &k1v))?;
    let (k3u, k3v) = kg_rhs(&u.add_scaled(0.5 * dt, &k2u), &ut.add_scaled(0.5 * dt, &k2v))?;
    let (k4u, k4v) = kg_rhs(&u.add_scaled(dt, &k3u), &ut.add_scaled(dt, &k3v))?;
    let mut nu = u.add_scaled(dt / 6.0, &k1u);
    nu = nu.add_scaled(dt / 3.0, &k2u);
    nu = nu.add_scaled(dt / 3.0, &k3u);
    nu = nu.add_scaled(dt / 6.0, &k4u);
    let mut nv = ut.add_scaled(dt / 6.0, &k1v);
    nv = nv.add_scaled(dt / 3.0, &k2v);
    nv = nv.add_scaled(dt / 3.0, &k3v);
    nv = nv.add_scaled(dt / 6.0, &k4v);

    let before = (l2_norm(u).powi(2) + l2_norm(ut).powi(2)).sqrt();
    let after = (l2_norm(&nu).powi(2) + l2_norm(&nv).powi(2)).sqrt();
    if !after.is_finite() || after > 10.0 * before.max(f64::MIN_POSITIVE) {
        return Err(KleinGordonError::StepUnstable {
            t: state.t,
            factor: after / before.max(f64::MIN_POSITIVE),
        });
    }
    Ok(KgState {
        t: state.t + dt,
        u: nu,
        ut: nv,
    })
}

/// Evolves `(u, u_t)` to `t_end`, keeping every `sample_every`-th step plus
/// the final state. Aborts with the partial trajectory attached as soon as
/// `max |u|` reaches the margin-reduced hyperbolicity threshold.
pub fn kg_evolve(
    state0: &KgState,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<KgTrajectory, KleinGordonError> {
    if !(t_end > state0.t && dt > 0.0) || sample_every == 0 {
        return Err(KleinGordonError::InvalidParameter(
            "t_end must exceed the initial time and dt, sample_every must be positive".into(),
        ));
    }
    let span = t_end - state0.t;
    let threshold = margin_threshold();
    let mut samples = vec![state0.clone()];
    let mut state = state0.clone();
    let check = |st: &KgState, samples: &[KgState], dt: f64| -> Result<(), KleinGordonError> {
        let amp = linf_norm(&st.u);
        if amp >= threshold {
            return Err(KleinGordonError::ValidityRegionExceeded {
                t: st.t,
                max_abs_u: amp,
                threshold,
                partial: Some(Box::new(KgTrajectory {
                    samples: samples.to_vec(),
                    dt,
                })),
            });
        }
        Ok(())
    };
    check(&state, &samples, dt)?;
    let n_full = (span / dt + 1e-9).floor() as usize;
    let remainder = span - n_full as f64 * dt;
    for i in 1..=n_full {
        state = kg_step(&state, dt)?;
        state.t = state0.t + i as f64 * dt;
        check(&state, &samples, dt)?;
        if i % sample_every == 0 && !(remainder <= 1e-12 * span && i == n_full) {
            samples.push(state.clone());
        }
    }
    if remainder > 1e-12 * span {
        state = kg_step(&state, remainder)?;
        check(&state, &samples, dt)?;
    }
    state.t = t_end;
    samples.push(state);
    Ok(KgTrajectory { samples, dt })
}

/// The three energy functionals
///
/// ```text
/// E1 = int u^2    + u_t^2   + u_x^2   (1 - 3u^2) dx
/// E2 = int u_x^2  + u_tx^2  + u_xx^2  (1 - 3u^2) dx
/// E3 = int u_xx^2 + u_txx^2 + u_xxx^2 (1 - 3u^2) dx
/// ```
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct KgEnergies {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

pub fn kg_energies(u: &Field, ut: &Field) -> KgEnergies {
    let ux = differentiate(u, 1);
    let uxx = differentiate(u, 2);
    let uxxx = differentiate(u, 3);
    let utx = differentiate(ut, 1);
    let utxx = differentiate(ut, 2);
    let weighted = |d: &Field| integral_of_product(&[d, d]) - 3.0 * integral_of_product(&[d, d, u, u]);
    KgEnergies {
        e1: integral_of_product(&[u, u]) + integral_of_product(&[ut, ut]) + weighted(&ux),
        e2: integral_of_product(&[&ux, &ux]) + integral_of_product(&[&utx, &utx]) + weighted(&uxx),
        e3: integral_of_product(&[&uxx, &uxx])
            + integral_of_product(&[&utxx, &utxx])
            + weighted(&uxxx),
    }
}

/// Exact time derivatives of the three energies:
///
/// ```text
/// dE1/dt = -6 int u u_t u_x^2
/// dE2/dt = -6 int u u_t u_xx^2 - 12 int u_x^3 u_tx - 24 int u u_x u_xx u_tx
/// dE3/dt = -6 int u u_t u_xxx^2 - 72 int u_x^2 u_xx u_txx
///          - 36 int u u_x u_xxx u_txx - 36 int u u_xx^2 u_txx
/// ```
pub fn kg_energy_rates(u: &Field, ut: &Field) -> [f64; 3] {
    let ux = differentiate(u, 1);
    let uxx = differentiate(u, 2);
    let uxxx = differentiate(u, 3);
    let utx = differentiate(ut, 1);
    let utxx = differentiate(ut, 2);
    let r1 = -6.0 * integral_of_product(&[u, ut, &ux, &ux]);
    let r2 = -6.0 * integral_of_product(&[u, ut, &uxx, &uxx])
        - 12.0 * integral_of_product(&[&ux, &ux, &ux, &utx])
        - 24.0 * integral_of_product(&[u, &ux, &uxx, &utx]);
    let r3 = -6.0 * integral_of_product(&[u, ut, &uxxx, &uxxx])
        - 72.0 * integral_of_product(&[&ux, &ux, &uxx, &utxx])
        - 36.0 * integral_of_product(&[u, &ux, &uxxx, &utxx])
        - 36.0 * integral_of_product(&[u, &uxx, &uxx, &utxx]);
    [r1, r2, r3]
}

/// Worst relative defect between centred differences of the energies and
/// their stated rates along a trajectory.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnergyRateReport {
    pub max_residual: [f64; 3],
    /// Differencing step (the trajectory sample spacing).
    pub fd_step: f64,
}

/// Checks `d E_i / dt` against [`kg_energy_rates`] at every interior sample
/// using centred differences; residuals are relative to `max(1, |rate|)`.
pub fn energy_rate_check(traj: &KgTrajectory) -> Result<EnergyRateReport, KleinGordonError> {
    let h = traj.sample_spacing().ok_or_else(|| {
        KleinGordonError::InvalidParameter("trajectory samples must be uniformly spaced".into())
    })?;
    if traj.samples.len() < 3 {
        return Err(KleinGordonError::InvalidParameter(
            "need at least three samples for the rate check".into(),
        ));
    }
    let energies: Vec<KgEnergies> = traj
        .samples
        .iter()
        .map(|st| kg_energies(&st.u, &st.ut))
        .collect();
    let mut max_residual = [0.0f64; 3];
    for j in 1..traj.samples.len() - 1 {
        let st = &traj.samples[j];
        let rates = kg_energy_rates(&st.u, &st.ut);
        let fd = [
            (energies[j + 1].e1 - energies[j - 1].e1) / (2.0 * h),
            (energies[j + 1].e2 - energies[j - 1].e2) / (2.0 * h),
            (energies[j + 1].e3 - energies[j - 1].e3) / (2.0 * h),
        ];
        for i in 0..3 {
            let res = (fd[i] - rates[i]).abs() / rates[i].abs().max(1.0);
            max_residual[i] = max_residual[i].max(res);
        }
    }
    Ok(EnergyRateReport {
        max_residual,
        fd_step: h,
    })
}

/// Continuation-criterion summary over a trajectory.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ContinuationReport {
    pub max_abs_u: f64,
    pub threshold: f64,
    /// Largest relative growth rate of E1 between consecutive samples.
    pub e1_slope: f64,
    pub slope_cap: f64,
    pub ok: bool,
}

/// Monitors the two continuation criteria: `max |u|` stays inside the
/// margin-reduced hyperbolicity region and E1 grows at a bounded rate.
pub fn continuation_monitor(traj: &KgTrajectory) -> ContinuationReport {
    let threshold = margin_threshold();
    let slope_cap = 1e3;
    let mut max_abs_u: f64 = 0.0;
    for st in &traj.samples {
        max_abs_u = max_abs_u.max(linf_norm(&st.u));
    }
    let mut e1_slope: f64 = 0.0;
    let es: Vec<f64> = traj
        .samples
        .iter()
        .map(|st| kg_energies(&st.u, &st.ut).e1)
        .collect();
    for (w, e) in traj.samples.windows(2).zip(es.windows(2)) {
        let dt = w[1].t - w[0].t;
        if dt > 0.0 {
            e1_slope = e1_slope.max((e[1] - e[0]).abs() / (dt * e[0].abs().max(1e-300)));
        }
    }
    ContinuationReport {
        max_abs_u,
        threshold,
        e1_slope,
        slope_cap,
        ok: max_abs_u < threshold && e1_slope <= slope_cap,
    }
}

/// State of the equivalent symmetric first-order system
/// `(u1, u2, u3) = (u_t, sqrt(1 - 3u^2) u_x, u)`.
#[derive(Debug, Clone)]
pub struct SymmetricState {
    pub t: f64,
    pub u1: Field,
    pub u2: Field,
    pub u3: Field,
}

/// Maps `(u, u_t)` into symmetric variables.
pub fn to_symmetric(state: &KgState) -> Result<SymmetricState, KleinGordonError> {
    let amp = linf_norm(&state.u);
    if amp >= VALIDITY_LIMIT {
        return Err(KleinGordonError::ValidityRegionExceeded {
            t: state.t,
            max_abs_u: amp,
            threshold: VALIDITY_LIMIT,
            partial: None,
        });
    }
    let ux = differentiate(&state.u, 1);
    let q = pointwise(&state.u, |u| (1.0 - 3.0 * u * u).sqrt());
    Ok(SymmetricState {
        t: state.t,
        u1: state.ut.clone(),
        u2: dealiased_product(&[&q, &ux]),
        u3: state.u.clone(),
    })
}

/// Recovers `(u, u_t) = (u3, u1)`.
pub fn from_symmetric(state: &SymmetricState) -> KgState {
    KgState {
        t: state.t,
        u: state.u3.clone(),
        ut: state.u1.clone(),
    }
}

/// `|u2 - sqrt(1 - 3 u3^2) d_x u3|_L2`: how far the redundant component has
/// drifted from its defining constraint.
pub fn symmetric_defect(state: &SymmetricState) -> f64 {
    let ux = differentiate(&state.u3, 1);
    let q = pointwise(&state.u3, |u| (1.0 - 3.0 * u * u).sqrt());
    let rec = dealiased_product(&[&q, &ux]);
    let diff = &state.u2 - &rec;
    l2_norm(&diff)
}

fn pointwise(f: &Field, map: impl Fn(f64) -> f64) -> Field {
    let vals: Vec<f64> = f.values().iter().map(|&v| map(v)).collect();
    Field::from_values(f.grid(), vals).expect("pointwise map produced non-finite values")
}

/// Right-hand side of the symmetric system
///
/// ```text
/// d u1 = c d_x u2 - u3 - 3 u2^2 u3 / c^2
/// d u2 = c d_x u1 - 3 u1 u2 u3 / c^2
/// d u3 = u1,            c = sqrt(1 - 3 u3^2)
/// ```
pub fn symmetric_rhs(
    state: &SymmetricState,
) -> Result<(Field, Field, Field), KleinGordonError> {
    let amp = linf_norm(&state.u3);
    if amp >= VALIDITY_LIMIT {
        return Err(KleinGordonError::ValidityRegionExceeded {
            t: state.t,
            max_abs_u: amp,
            threshold: VALIDITY_LIMIT,
            partial: None,
        });
    }
    let c = pointwise(&state.u3, |u| (1.0 - 3.0 * u * u).sqrt());
    let inv_c2 = pointwise(&state.u3, |u| 1.0 / (1.0 - 3.0 * u * u));
    let du2x = differentiate(&state.u2, 1);
    let du1x = differentiate(&state.u1, 1);
    let mut d1 = dealiased_product(&[&c, &du2x]);
    d1 = d1.add_scaled(-1.0, &state.u3);
    d1 = d1.add_scaled(
        -3.0,
        &dealiased_product(&[&state.u2, &state.u2, &state.u3, &inv_c2]),
    );
    let mut d2 = dealiased_product(&[&c, &du1x]);
    d2 = d2.add_scaled(
        -3.0,
        &dealiased_product(&[&state.u1, &state.u2, &state.u3, &inv_c2]),
    );
    Ok((d1, d2, state.u1.clone()))
}

/// RK4 evolution of the symmetric system; aborts at the same margin-reduced
/// threshold as [`kg_evolve`] (without a partial trajectory).
pub fn symmetric_evolve(
    state0: &SymmetricState,
    t_end: f64,
    dt: f64,
) -> Result<SymmetricState, KleinGordonError> {
    if !(t_end > state0.t && dt > 0.0) {
        return Err(KleinGordonError::InvalidParameter(
            "t_end must exceed the initial time and dt must be positive".into(),
        ));
    }
    let threshold = margin_threshold();
    let span = t_end - state0.t;
    let n_full = (span / dt + 1e-9).floor() as usize;
    let remainder = span - n_full as f64 * dt;
    let mut state = state0.clone();
    let advance = |state: &SymmetricState, dt: f64| -> Result<SymmetricState, KleinGordonError> {
        let amp = linf_norm(&state.u3);
        if amp >= threshold {
            return Err(KleinGordonError::ValidityRegionExceeded {
                t: state.t,
                max_abs_u: amp,
                threshold,
                partial: None,
            });
        }
        let (k1a, k1b, k1c) = symmetric_rhs(state)?;
        let mid1 = stage(state, 0.5 * dt, &k1a, &k1b, &k1c);
        let (k2a, k2b, k2c) = symmetric_rhs(&mid1)?;
        let mid2 = stage(state, 0.5 * dt, &k2a, &k2b, &k2c);
        let (k3a, k3b, k3c) = symmetric_rhs(&mid2)?;
        let end = stage(state, dt, &k3a, &k3b, &k3c);
        let (k4a, k4b, k4c) = symmetric_rhs(&end)?;
        let comb = |f: &Field, k1: &Field, k2: &Field, k3: &Field, k4: &Field| {
            let mut out = f.add_scaled(dt / 6.0, k1);
            out = out.add_scaled(dt / 3.0, k2);
            out = out.add_scaled(dt / 3.0, k3);
            out.add_scaled(dt / 6.0, k4)
        };
        Ok(SymmetricState {
            t: state.t + dt,
            u1: comb(&state.u1, &k1a, &k2a, &k3a, &k4a),
            u2: comb(&state.u2, &k1b, &k2b, &k3b, &k4b),
            u3: comb(&state.u3, &k1c, &k2c, &k3c, &k4c),
        })
    };
    for i in 1..=n_full {
        state = advance(&state, dt)?;
        state.t = state0.t + i as f64 * dt;
    }
    if remainder > 1e-12 * span {
        state = advance(&state, remainder)?;
    }
    state.t = t_end;
    Ok(state)
}

fn stage(base: &SymmetricState, c: f64, k1: &Field, k2: &Field, k3: &Field) -> SymmetricState {
    SymmetricState {
        t: base.t,
        u1: base.u1.add_scaled(c, k1),
        u2: base.u2.add_scaled(c, k2),
        u3: base.u3.add_scaled(c, k3),
    }
}

/// Builds the Klein-Gordon grid that is the image of `grid_xi` under the
/// scaling map: same point count, length `2 eps L_xi`.
pub fn commensurate_grid(
    grid_xi: &FourierGrid,
    params: ScalingParams,
) -> Result<Arc<FourierGrid>, KleinGordonError> {
    Ok(FourierGrid::new(
        2.0 * params.epsilon() * grid_xi.length(),
        grid_xi.n(),
    )?)
}

fn check_commensurate(
    grid_x: &FourierGrid,
    grid_xi: &FourierGrid,
    params: ScalingParams,
) -> Result<(), KleinGordonError> {
    let expected = 2.0 * params.epsilon() * grid_xi.length();
    if grid_x.n() != grid_xi.n() || (grid_x.length() - expected).abs() > 1e-12 * expected {
        return Err(KleinGordonError::IncommensurateGrids {
            lx: grid_x.length(),
            expected,
            nx: grid_x.n(),
            nxi: grid_xi.n(),
        });
    }
    Ok(())
}

/// A Klein-Gordon state mapped into the short-pulse frame.
#[derive(Debug, Clone)]
pub struct ScaledState {
    pub tau: f64,
    /// `U(xi) = u(t, t + 2 eps xi) / (2 eps)`.
    pub u: Field,
    /// `U_tau(xi) = (u_t + u_x)(t, t + 2 eps xi) / (2 eps^2)`.
    pub u_tau: Field,
}

/// Maps a Klein-Gordon state into the short-pulse frame on `grid_xi`.
pub fn scale_down(
    state: &KgState,
    params: ScalingParams,
    grid_xi: &Arc<FourierGrid>,
) -> Result<ScaledState, KleinGordonError> {
    check_commensurate(state.u.grid(), grid_xi, params)?;
    let eps = params.epsilon();
    // translate(f, -t) samples u at x_j + t; x_j = 2 eps xi_j
    let u_shift = translate(&state.u, -state.t);
    let ut_shift = translate(&state.ut, -state.t);
    let ux_shift = translate(&differentiate(&state.u, 1), -state.t);
    let u = Field::from_values(
        grid_xi,
        u_shift.values().iter().map(|v| v / (2.0 * eps)).collect(),
    )?;
    let u_tau = Field::from_values(
        grid_xi,
        ut_shift
            .values()
            .iter()
            .zip(ux_shift.values())
            .map(|(vt, vx)| (vt + vx) / (2.0 * eps * eps))
            .collect(),
    )?;
    Ok(ScaledState {
        tau: eps * state.t,
        u,
        u_tau,
    })
}

/// Maps a short-pulse frame state onto `grid_x` as a Klein-Gordon state at
/// `t = tau / eps`. When `u_tau` is omitted the time derivative uses the
/// leading-order transport relation `u_t = -U_xi` alone; supplying it adds
/// the `2 eps^2 U_tau` correction.
pub fn scale_up(
    u: &Field,
    u_tau: Option<&Field>,
    tau: f64,
    params: ScalingParams,
    grid_x: &Arc<FourierGrid>,
) -> Result<KgState, KleinGordonError> {
    check_commensurate(grid_x, u.grid(), params)?;
    let eps = params.epsilon();
    let t = tau / eps;
    let shift = t / (2.0 * eps);
    // values on grid_x at x_j: 2 eps U(xi_j - t / (2 eps))
    let u_here = translate(u, shift);
    let kg_u = Field::from_values(
        grid_x,
        u_here.values().iter().map(|v| 2.0 * eps * v).collect(),
    )?;
    let mut dt_field = differentiate(u, 1).scaled(-1.0);
    if let Some(utau) = u_tau {
        check_same_grid(u, utau)?;
        dt_field = dt_field.add_scaled(2.0 * eps * eps, utau);
    }
    let dt_here = translate(&dt_field, shift);
    let kg_ut = Field::from_values(grid_x, dt_here.values().to_vec())?;
    Ok(KgState {
        t,
        u: kg_u,
        ut: kg_ut,
    })
}

//! Periodic Fourier pseudospectral core: grids, real fields and the spectral
//! operator toolbox (derivatives, zero-mean anti-derivatives, Sobolev norms,
//! the anti-derivative semigroup and exact translations).
//!
//! Conventions: on a box of length `L` with `n` nodes `xi_j = j L / n` the
//! retained wavenumbers are `k_m = 2 pi m / L` for `m in {-n/2+1, ..., n/2}`.
//! Spectra are stored in standard FFT bin order with coefficients normalised
//! so that `f(xi) = sum_m c_m exp(i k_m xi)`; Parseval then reads
//! `int |f|^2 dxi = L sum_m |c_m|^2`, which is exactly the trapezoidal sum
//! `h sum_j f_j^2`. Anti-derivatives and the semigroup act on zero-mean
//! fields; the `k = 0` bin is pinned to zero after the mean check.

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

/// Default relative tolerance for the zero-mean precondition of
/// anti-derivative type operators: `|f_hat(0)| <= MEAN_TOL * l2_norm(f)`.
pub const MEAN_TOL: f64 = 1e-8;

/// Errors from the spectral layer.
#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    /// An anti-derivative style operator was applied to a field whose mean
    /// is not zero within tolerance.
    #[error("{op}: field mean {mean:.3e} exceeds tolerance {tol:.3e} * |f| = {allowed:.3e}")]
    MeanNotZero {
        op: &'static str,
        mean: f64,
        tol: f64,
        allowed: f64,
    },
    /// Invalid grid parameters.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    /// Field values that are not finite.
    #[error("{0}: non-finite values")]
    NonFinite(&'static str),
    /// Two fields that must share a grid do not.
    #[error("grid mismatch: ({0}, {1:.12e}) vs ({2}, {3:.12e})")]
    GridMismatch(usize, f64, usize, f64),
}

/// Uniform periodic grid together with cached FFT plans and wavenumbers.
///
/// Immutable after construction; share it through `Arc` (fields hold one).
pub struct FourierGrid {
    length: f64,
    n: usize,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid")
            .field("length", &self.length)
            .field("n", &self.n)
            .finish()
    }
}

impl FourierGrid {
    /// Builds a grid of `n` nodes (even, at least 8) on `[0, length)`.
    pub fn new(length: f64, n: usize) -> Result<Arc<Self>, SpectralError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(SpectralError::InvalidGrid(format!(
                "n must be even and >= 8, got {n}"
            )));
        }
        let h = length / n as f64;
        let nodes = (0..n).map(|j| j as f64 * h).collect();
        let base = 2.0 * std::f64::consts::PI / length;
        let wavenumbers = (0..n)
            .map(|i| {
                let m = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
                base * m as f64
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Arc::new(FourierGrid {
            length,
            n,
            nodes,
            wavenumbers,
            fft,
            ifft,
        }))
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing `L / n`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Grid nodes `xi_j = j L / n`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Wavenumbers per FFT bin, `k_m = 2 pi m / L`, `m in {-n/2+1, ..., n/2}`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Signed mode index of an FFT bin.
    pub fn mode_index(&self, bin: usize) -> i64 {
        if bin <= self.n / 2 {
            bin as i64
        } else {
            bin as i64 - self.n as i64
        }
    }

    /// Largest retained wavenumber `pi n / L`.
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.length
    }

    fn same_as(&self, other: &FourierGrid) -> bool {
        self.n == other.n && self.length == other.length
    }
}

/// Checks that two fields live on the same grid.
pub fn check_same_grid(a: &Field, b: &Field) -> Result<(), SpectralError> {
    if a.grid.same_as(&b.grid) {
        Ok(())
    } else {
        Err(SpectralError::GridMismatch(
            a.grid.n,
            a.grid.length,
            b.grid.n,
            b.grid.length,
        ))
    }
}

/// Real-valued periodic field sampled on a [`FourierGrid`].
#[derive(Clone)]
pub struct Field {
    grid: Arc<FourierGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &*self.grid)
            .field("linf", &linf_norm(self))
            .finish()
    }
}

impl Field {
    /// Zero field.
    pub fn zeros(grid: &Arc<FourierGrid>) -> Field {
        Field {
            grid: grid.clone(),
            values: vec![0.0; grid.n],
        }
    }

    /// Samples a closure at the grid nodes.
    pub fn from_fn(grid: &Arc<FourierGrid>, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: grid.clone(),
            values: grid.nodes.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Wraps raw nodal values; rejects wrong length or non-finite entries.
    pub fn from_values(grid: &Arc<FourierGrid>, values: Vec<f64>) -> Result<Field, SpectralError> {
        if values.len() != grid.n {
            return Err(SpectralError::InvalidGrid(format!(
                "value count {} does not match grid n {}",
                values.len(),
                grid.n
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(SpectralError::NonFinite("from_values"));
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Synthesises a field from normalised spectral coefficients, enforcing
    /// Hermitian symmetry on write-back so the result is real.
    pub fn from_spectrum(grid: &Arc<FourierGrid>, mut spec: Vec<Complex<f64>>) -> Field {
        assert_eq!(spec.len(), grid.n, "spectrum length must equal grid n");
        enforce_hermitian(&mut spec);
        grid.ifft.process(&mut spec);
        Field {
            grid: grid.clone(),
            values: spec.iter().map(|c| c.re).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Normalised spectrum `c_m` with `f(xi) = sum c_m exp(i k_m xi)`.
    pub fn spectrum(&self) -> Vec<Complex<f64>> {
        let n = self.grid.n;
        let mut buf: Vec<Complex<f64>> = self.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.grid.fft.process(&mut buf);
        let scale = 1.0 / n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Arithmetic mean of the nodal values (the `k = 0` coefficient).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.n as f64
    }

    /// True if every nodal value is finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Returns `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Field {
        debug_assert!(self.grid.same_as(&other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Returns `c * self`.
    pub fn scaled(&self, c: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Subtracts the mean in place, returning the discarded value.
    pub fn project_zero_mean(&mut self) -> f64 {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
        m
    }
}

impl std::ops::Add<&Field> for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.add_scaled(1.0, rhs)
    }
}

impl std::ops::Sub<&Field> for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.add_scaled(-1.0, rhs)
    }
}

fn enforce_hermitian(spec: &mut [Complex<f64>]) {
    let n = spec.len();
    spec[0].im = 0.0;
    spec[n / 2].im = 0.0;
    for i in 1..n / 2 {
        let avg = 0.5 * (spec[i] + spec[n - i].conj());
        spec[i] = avg;
        spec[n - i] = avg.conj();
    }
}

/// Applies a diagonal spectral multiplier and transforms back.
fn apply_symbol(f: &Field, symbol: impl Fn(usize, f64) -> Complex<f64>) -> Field {
    let mut spec = f.spectrum();
    for (bin, c) in spec.iter_mut().enumerate() {
        *c *= symbol(bin, f.grid.wavenumbers[bin]);
    }
    Field::from_spectrum(&f.grid, spec)
}

fn mean_check(f: &Field, op: &'static str, tol: f64) -> Result<(), SpectralError> {
    let mean = f.mean();
    let allowed = tol * l2_norm(f);
    if mean.abs() <= allowed {
        Ok(())
    } else {
        Err(SpectralError::MeanNotZero {
            op,
            mean,
            tol,
            allowed,
        })
    }
}

/// Spectral derivative of the given order (multiplication by `(i k)^order`).
///
/// The Nyquist bin is zeroed for odd orders: a real signal cannot carry the
/// resulting pure-imaginary coefficient.
pub fn differentiate(f: &Field, order: u32) -> Field {
    let n = f.grid.n;
    apply_symbol(f, |bin, k| {
        if order % 2 == 1 && bin == n / 2 {
            return Complex::new(0.0, 0.0);
        }
        Complex::new(0.0, k).powi(order as i32)
    })
}

/// Zero-mean anti-derivative of the given order with explicit mean tolerance.
///
/// Divides by `(i k)^order` away from `k = 0` and pins the `k = 0` bin to
/// zero after the mean check, so the output has exactly zero mean.
pub fn antiderivative_with_tol(f: &Field, order: u32, tol: f64) -> Result<Field, SpectralError> {
    mean_check(f, "antiderivative", tol)?;
    let n = f.grid.n;
    Ok(apply_symbol(f, |bin, k| {
        if bin == 0 || (order % 2 == 1 && bin == n / 2) {
            return Complex::new(0.0, 0.0);
        }
        Complex::new(0.0, k).powi(order as i32).inv()
    }))
}

/// Zero-mean anti-derivative with the default mean tolerance ([`MEAN_TOL`]).
pub fn antiderivative(f: &Field, order: u32) -> Result<Field, SpectralError> {
    antiderivative_with_tol(f, order, MEAN_TOL)
}

/// Sobolev norm `( L sum_m (1 + k_m^2)^s |c_m|^2 )^(1/2)`; `s = 0` is the
/// trapezoidal L2 norm.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    let spec = f.spectrum();
    let mut acc = 0.0;
    for (bin, c) in spec.iter().enumerate() {
        let k = f.grid.wavenumbers[bin];
        acc += (1.0 + k * k).powf(s) * c.norm_sqr();
    }
    (f.grid.length * acc).sqrt()
}

/// Homogeneous negative norm `( L sum_{m != 0} k_m^{-2 order} |c_m|^2 )^(1/2)`
/// for zero-mean fields.
pub fn homogeneous_negative_norm(f: &Field, order: u32) -> Result<f64, SpectralError> {
    mean_check(f, "homogeneous_negative_norm", MEAN_TOL)?;
    let spec = f.spectrum();
    let mut acc = 0.0;
    for (bin, c) in spec.iter().enumerate() {
        if bin == 0 {
            continue;
        }
        let k = f.grid.wavenumbers[bin];
        acc += k.powi(-2 * order as i32) * c.norm_sqr();
    }
    Ok((f.grid.length * acc).sqrt())
}

/// Trapezoidal L2 norm `(h sum f_j^2)^(1/2)`; equals [`sobolev_norm`] at
/// `s = 0` by discrete Parseval.
pub fn l2_norm(f: &Field) -> f64 {
    let h = f.grid.spacing();
    (h * f.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Sup norm over the nodes.
pub fn linf_norm(f: &Field) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Periodic quadrature `h sum_j prod_i fields[i](xi_j)`; exact for resolved
/// trigonometric products.
pub fn integral_of_product(fields: &[&Field]) -> f64 {
    let first = fields[0];
    let n = first.grid.n;
    let mut acc = 0.0;
    for j in 0..n {
        let mut p = 1.0;
        for f in fields {
            debug_assert!(f.grid.same_as(&first.grid));
            p *= f.values[j];
        }
        acc += p;
    }
    first.grid.spacing() * acc
}

/// Applies the semigroup `S(tau) = exp(tau d_xi^{-1})`: multiplier
/// `exp(tau / (i k))` away from `k = 0`, an exact L2 isometry on zero-mean
/// fields. The `k = 0` and Nyquist bins are pinned to zero.
pub fn semigroup_apply(f: &Field, tau: f64) -> Result<Field, SpectralError> {
    mean_check(f, "semigroup_apply", MEAN_TOL)?;
    let n = f.grid.n;
    Ok(apply_symbol(f, |bin, k| {
        if bin == 0 || bin == n / 2 {
            Complex::new(0.0, 0.0)
        } else {
            // exp(tau / (i k)) = exp(-i tau / k)
            Complex::from_polar(1.0, -tau / k)
        }
    }))
}

/// Exact spectral translation: `translate(f, s)(xi) = f(xi - s)`.
///
/// The Nyquist bin keeps only the real part of its phase factor, which is
/// exact whenever `s` is a multiple of the node spacing.
pub fn translate(f: &Field, shift: f64) -> Field {
    let n = f.grid.n;
    apply_symbol(f, |bin, k| {
        let phase = Complex::from_polar(1.0, -k * shift);
        if bin == n / 2 {
            Complex::new(phase.re, 0.0)
        } else {
            phase
        }
    })
}

/// Two-thirds rule: zeroes all modes with `|m| > n / 3`.
pub fn dealias(f: &Field) -> Field {
    let cutoff = (f.grid.n / 3) as i64;
    apply_symbol(f, |bin, _| {
        if f.grid.mode_index(bin).abs() > cutoff {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(1.0, 0.0)
        }
    })
}

/// Pointwise product of the given fields followed by one de-aliasing pass.
/// This is the only sanctioned way to form nonlinear terms for evolution.
pub fn dealiased_product(fields: &[&Field]) -> Field {
    let first = fields[0];
    let n = first.grid.n;
    let mut values = vec![1.0; n];
    for f in fields {
        debug_assert!(f.grid.same_as(&first.grid));
        for (v, w) in values.iter_mut().zip(&f.values) {
            *v *= w;
        }
    }
    let raw = Field {
        grid: first.grid.clone(),
        values,
    };
    dealias(&raw)
}

/// Random real field supported on modes `1 <= |m| <= max_mode`, zero mean,
/// scaled to the requested L2 norm (coefficients drawn uniformly).
pub fn random_band_limited(
    grid: &Arc<FourierGrid>,
    rng: &mut impl Rng,
    max_mode: usize,
    l2: f64,
) -> Field {
    let n = grid.n;
    let max_mode = max_mode.min(n / 2 - 1).max(1);
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for m in 1..=max_mode {
        let c = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        spec[m] = c;
        spec[n - m] = c.conj();
    }
    let f = Field::from_spectrum(grid, spec);
    let norm = l2_norm(&f);
    if norm == 0.0 {
        f
    } else {
        f.scaled(l2 / norm)
    }
}

//! Two-ray ground-reflection channel and one-way time-of-flight ranging errors.
//!
//! The channel superposes a line-of-sight ray and a single ground reflection.
//! Both path amplitudes use the `λ_c / (2π d)` factor. The ranging side covers
//! the ToF Cramér-Rao bound of an OFDM waveform, a frequency-domain matched
//! filter delay estimator, the multipath-induced bias curve it produces, and the
//! biased-estimator MSE bound built from it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::consts::{BOLTZMANN, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Complex relative permittivity of the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPermittivity {
    pub re: f64,
    pub im: f64,
}

impl GroundPermittivity {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(re > 1.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::domain(format!(
                "permittivity needs real part > 1 and finite parts, got {re}{im:+}j"
            )));
        }
        Ok(Self { re, im })
    }

    /// Lunar regolith at 2 GHz.
    pub fn lunar_regolith() -> Self {
        Self { re: 3.95, im: -0.25 }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl Default for GroundPermittivity {
    fn default() -> Self {
        Self::lunar_regolith()
    }
}

/// How the ground reflection coefficient is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reflection {
    /// Circular co-polarized coefficient from the ground permittivity.
    Ground(GroundPermittivity),
    /// A fixed coefficient for every incidence angle (0 removes the reflection).
    Fixed(Complex64),
}

impl Reflection {
    pub fn none() -> Self {
        Reflection::Fixed(Complex64::new(0.0, 0.0))
    }

    pub fn coefficient(&self, theta: f64) -> Result<Complex64> {
        match self {
            Reflection::Ground(eps) => reflection_coeff(theta, *eps),
            Reflection::Fixed(g) => Ok(*g),
        }
    }
}

impl From<GroundPermittivity> for Reflection {
    fn from(eps: GroundPermittivity) -> Self {
        Reflection::Ground(eps)
    }
}

/// Transmitter/receiver heights and horizontal separation (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoRayGeometry {
    pub h_tx: f64,
    pub h_rx: f64,
    pub d_h: f64,
}

impl TwoRayGeometry {
    pub fn new(h_tx: f64, h_rx: f64, d_h: f64) -> Result<Self> {
        if !(h_tx > 0.0 && h_rx > 0.0 && d_h >= 0.0) || !(h_tx + h_rx + d_h).is_finite() {
            return Err(Error::domain(format!(
                "two-ray geometry needs h_tx > 0, h_rx > 0, d_h >= 0 (got {h_tx}, {h_rx}, {d_h})"
            )));
        }
        Ok(Self { h_tx, h_rx, d_h })
    }

    /// Line-of-sight distance.
    pub fn los_distance(&self) -> f64 {
        (self.h_tx - self.h_rx).hypot(self.d_h)
    }

    /// Equivalent length of the ground-reflected ray.
    pub fn reflected_distance(&self) -> f64 {
        (self.h_tx + self.h_rx).hypot(self.d_h)
    }

    /// Grazing incidence angle of the reflected ray (rad).
    pub fn incidence_angle(&self) -> f64 {
        (self.h_tx + self.h_rx).atan2(self.d_h)
    }
}

/// OFDM link parameters of the surface ranging system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmConfig {
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
    /// Sampling rate / signal bandwidth (Hz).
    pub bandwidth: f64,
    pub fft_len: usize,
    pub allocated_subcarriers: usize,
    /// Transmit power (W).
    pub tx_power: f64,
    /// Receiver noise figure (dB).
    pub rx_noise_figure: f64,
    /// Receiver temperature (K).
    pub rx_temperature: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            carrier_freq: 2.0e9,
            bandwidth: 10.0e6,
            fft_len: 1024,
            allocated_subcarriers: 922,
            tx_power: 0.1,
            rx_noise_figure: 5.0,
            rx_temperature: 290.0,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.allocated_subcarriers > self.fft_len {
            return Err(Error::config(
                "allocated_subcarriers",
                "must not exceed fft_len",
            ));
        }
        if !(self.carrier_freq > self.bandwidth && self.bandwidth > 0.0) {
            return Err(Error::config(
                "carrier_freq",
                "must exceed bandwidth and bandwidth must be positive",
            ));
        }
        if self.fft_len == 0 || !(self.tx_power > 0.0) || !(self.rx_temperature > 0.0) {
            return Err(Error::config(
                "ofdm",
                "fft_len, tx_power and rx_temperature must be positive",
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.fft_len as f64
    }

    /// Allocated subcarrier indices, symmetric about DC. DC is left empty when
    /// the allocation count is even.
    pub fn allocated_indices(&self) -> Vec<i64> {
        let k = self.allocated_subcarriers as i64;
        let half = k / 2;
        let mut idx: Vec<i64> = (-half..0).collect();
        if k % 2 == 1 {
            idx.push(0);
        }
        idx.extend(1..=half);
        idx
    }

    /// Es/N0 of one OFDM symbol for received power `p_rx` (W).
    ///
    /// Noise density is `k_B · T · NF`; the symbol lasts `N_fft / B`.
    pub fn es_n0(&self, p_rx: f64) -> f64 {
        let nf = 10f64.powf(self.rx_noise_figure / 10.0);
        let n0 = BOLTZMANN * self.rx_temperature * nf;
        p_rx * (self.fft_len as f64 / self.bandwidth) / n0
    }
}

/// Vertical-polarization Fresnel coefficient.
pub fn reflection_coeff_vertical(theta: f64, eps: GroundPermittivity) -> Complex64 {
    let e = eps.value();
    let s = theta.sin();
    let root = (e - theta.cos().powi(2)).sqrt();
    (e * s - root) / (e * s + root)
}

/// Horizontal-polarization Fresnel coefficient.
pub fn reflection_coeff_horizontal(theta: f64, eps: GroundPermittivity) -> Complex64 {
    let e = eps.value();
    let s = theta.sin();
    let root = (e - theta.cos().powi(2)).sqrt();
    (s - root) / (s + root)
}

/// Reflection coefficient for circular co-polarization, the mean of the
/// vertical and horizontal coefficients.
pub fn reflection_coeff(theta: f64, eps: GroundPermittivity) -> Result<Complex64> {
    if !(theta > 0.0 && theta <= PI / 2.0) {
        return Err(Error::domain(format!(
            "incidence angle must lie in (0, pi/2], got {theta}"
        )));
    }
    let gv = reflection_coeff_vertical(theta, eps);
    let gh = reflection_coeff_horizontal(theta, eps);
    Ok((gv + gh) * 0.5)
}

fn reflection_at(geom: &TwoRayGeometry, refl: &Reflection) -> Result<Complex64> {
    refl.coefficient(geom.incidence_angle())
}

/// Narrowband received power of the two-ray channel (W).
pub fn two_ray_rx_power(
    geom: &TwoRayGeometry,
    cfg: &OfdmConfig,
    refl: impl Into<Reflection>,
) -> Result<f64> {
    let refl = refl.into();
    let d = geom.los_distance();
    if !(d > 0.0) {
        return Err(Error::domain("two-ray power undefined at zero distance"));
    }
    let d_refl = geom.reflected_distance();
    let lambda = cfg.wavelength();
    let gamma = reflection_at(geom, &refl)?;
    let dphi = 2.0 * PI / lambda * (d_refl - d);
    let field = Complex64::new(1.0 / d, 0.0) + gamma * Complex64::from_polar(1.0 / d_refl, -dphi);
    Ok(cfg.tx_power * (lambda / (2.0 * PI)).powi(2) * field.norm_sqr())
}

/// Mean square bandwidth of the flat-allocated subcarrier comb (Hz²).
pub fn mean_square_bandwidth(cfg: &OfdmConfig) -> Result<f64> {
    let idx = cfg.allocated_indices();
    if idx.is_empty() {
        return Err(Error::domain("no allocated subcarriers"));
    }
    let fsc = cfg.subcarrier_spacing();
    let sum_sq: f64 = idx.iter().map(|&n| (n * n) as f64).sum();
    Ok(fsc * fsc * sum_sq / idx.len() as f64)
}

/// ToF ranging Cramér-Rao bound (m²).
pub fn tof_crb(es_n0: f64, msb: f64) -> Result<f64> {
    if !(es_n0 > 0.0) || !(msb > 0.0) {
        return Err(Error::domain(format!(
            "tof_crb needs es_n0 > 0 and msb > 0 (got {es_n0}, {msb})"
        )));
    }
    Ok(SPEED_OF_LIGHT.powi(2) / (8.0 * PI * PI * es_n0 * msb))
}

/// Ranging CRB (m²) for a surface link with two-ray fading.
pub fn link_crb(geom: &TwoRayGeometry, cfg: &OfdmConfig, refl: impl Into<Reflection>) -> Result<f64> {
    let p = two_ray_rx_power(geom, cfg, refl)?;
    tof_crb(cfg.es_n0(p), mean_square_bandwidth(cfg)?)
}

/// Spectrum indexed over the full FFT range `n = -N/2 .. N/2-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub first_index: i64,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(cfg: &OfdmConfig) -> Self {
        Self {
            first_index: -(cfg.fft_len as i64) / 2,
            values: vec![Complex64::new(0.0, 0.0); cfg.fft_len],
        }
    }

    fn slot(&self, n: i64) -> usize {
        (n - self.first_index) as usize
    }

    pub fn get(&self, n: i64) -> Complex64 {
        self.values[self.slot(n)]
    }

    pub fn set(&mut self, n: i64, v: Complex64) {
        let s = self.slot(n);
        self.values[s] = v;
    }
}

/// Unit-modulus pilots on the allocated subcarriers.
pub fn unit_pilots(cfg: &OfdmConfig) -> Spectrum {
    let mut s = Spectrum::zeros(cfg);
    for n in cfg.allocated_indices() {
        s.set(n, Complex64::new(1.0, 0.0));
    }
    s
}

/// Noiseless received spectrum `R(n)` of the two-ray channel for pilots `S(n)`.
pub fn two_ray_spectrum(
    geom: &TwoRayGeometry,
    cfg: &OfdmConfig,
    refl: impl Into<Reflection>,
    pilots: &Spectrum,
) -> Result<Spectrum> {
    let refl = refl.into();
    let d = geom.los_distance();
    if !(d > 0.0) {
        return Err(Error::domain("two-ray spectrum undefined at zero distance"));
    }
    let d_refl = geom.reflected_distance();
    let gamma = reflection_at(geom, &refl)?;
    let lambda = cfg.wavelength();
    let fsc = cfg.subcarrier_spacing();
    let los = Complex64::from_polar(lambda / (2.0 * PI * d), -2.0 * PI * d / lambda);
    let rfl = gamma * Complex64::from_polar(lambda / (2.0 * PI * d_refl), -2.0 * PI * d_refl / lambda);
    let mut out = Spectrum::zeros(cfg);
    for n in cfg.allocated_indices() {
        let w = 2.0 * PI * n as f64 * fsc / SPEED_OF_LIGHT;
        let h = los * Complex64::from_polar(1.0, -w * d) + rfl * Complex64::from_polar(1.0, -w * d_refl);
        out.set(n, h * pilots.get(n));
    }
    Ok(out)
}

/// Pseudorange search window for the delay estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub center: f64,
    pub half_width: f64,
    /// Coarse grid spacing (m).
    pub step: f64,
    /// Refinement tolerance (m).
    pub tolerance: f64,
}

impl SearchWindow {
    /// ±1.5 µs around `center` on a `c/(4B)` grid, refined to 1 µm.
    pub fn around(center: f64, cfg: &OfdmConfig) -> Self {
        Self {
            center,
            half_width: 1.5e-6 * SPEED_OF_LIGHT,
            step: SPEED_OF_LIGHT / (4.0 * cfg.bandwidth),
            tolerance: 1e-6,
        }
    }
}

/// Matched-filter correlation magnitude as a function of pseudorange.
#[derive(Debug, Clone)]
pub struct DelayCorrelator {
    first_index: i64,
    products: Vec<Complex64>,
    fsc: f64,
}

impl DelayCorrelator {
    pub fn new(rx: &Spectrum, pilots: &Spectrum, cfg: &OfdmConfig) -> Result<Self> {
        if rx.values.len() != pilots.values.len() || rx.first_index != pilots.first_index {
            return Err(Error::domain("rx spectrum and pilots are not aligned"));
        }
        let prods: Vec<Complex64> = rx
            .values
            .iter()
            .zip(&pilots.values)
            .map(|(r, s)| r * s.conj())
            .collect();
        // Trim zero edges so the phasor loop only visits occupied bins.
        let first = prods.iter().position(|p| p.norm_sqr() > 0.0).unwrap_or(0);
        let last = prods.iter().rposition(|p| p.norm_sqr() > 0.0).unwrap_or(0);
        Ok(Self {
            first_index: rx.first_index + first as i64,
            products: prods[first..=last].to_vec(),
            fsc: cfg.subcarrier_spacing(),
        })
    }

    /// `|Σ_n R(n) S*(n) e^{j2π n f_sc ρ / c}|`.
    pub fn magnitude(&self, rho: f64) -> f64 {
        let theta = 2.0 * PI * self.fsc * rho / SPEED_OF_LIGHT;
        let step = Complex64::from_polar(1.0, theta);
        let mut z = Complex64::from_polar(1.0, theta * self.first_index as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for p in &self.products {
            acc += p * z;
            z *= step;
        }
        acc.norm()
    }
}

/// Maximum-likelihood pseudorange estimate (m): coarse grid argmax, parabolic
/// interpolation, then golden-section refinement inside the peak bracket.
pub fn ml_delay_estimate(
    rx: &Spectrum,
    pilots: &Spectrum,
    cfg: &OfdmConfig,
    search: &SearchWindow,
) -> Result<f64> {
    if !(search.half_width > 0.0 && search.step > 0.0 && search.tolerance > 0.0) {
        return Err(Error::domain("empty search window"));
    }
    let corr = DelayCorrelator::new(rx, pilots, cfg)?;
    let n_half = (search.half_width / search.step).floor() as i64;
    let grid: Vec<f64> = (-n_half..=n_half)
        .map(|k| search.center + k as f64 * search.step)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&r| corr.magnitude(r)).collect();
    let (imax, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if imax == 0 || imax + 1 == grid.len() {
        return Ok(grid[imax]);
    }
    let (y0, y1, y2) = (values[imax - 1], values[imax], values[imax + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let vertex = if denom < 0.0 {
        grid[imax] + 0.5 * (y0 - y2) / denom * search.step
    } else {
        grid[imax]
    };
    let (lo, hi) = (grid[imax - 1], grid[imax + 1]);
    Ok(golden_max(|r| corr.magnitude(r), lo, hi, vertex, search.tolerance))
}

/// Golden-section maximization on `[lo, hi]`; `guess` wins ties.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, guess: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(guess) > f(mid) {
        guess
    } else {
        mid
    }
}

/// Simulated multipath bias of the delay estimator along a distance sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub d_h_grid: Vec<f64>,
    pub bias: Vec<f64>,
    pub bias_derivative: Vec<f64>,
    pub crb: Vec<f64>,
}

/// Noiseless bias of the ML estimator at one geometry (m).
pub fn ml_bias(geom: &TwoRayGeometry, cfg: &OfdmConfig, refl: impl Into<Reflection>) -> Result<f64> {
    let pilots = unit_pilots(cfg);
    let rx = two_ray_spectrum(geom, cfg, refl, &pilots)?;
    let d = geom.los_distance();
    let est = ml_delay_estimate(&rx, &pilots, cfg, &SearchWindow::around(d, cfg))?;
    Ok(est - d)
}

/// Sweeps the horizontal distance and records bias, `∇_ρ B` and CRB.
pub fn simulate_bias_curve(
    h_tx: f64,
    h_rx: f64,
    d_h_grid: &[f64],
    cfg: &OfdmConfig,
    refl: impl Into<Reflection>,
) -> Result<BiasCurve> {
    if d_h_grid.len() < 3 {
        return Err(Error::domain("bias curve needs at least 3 grid points"));
    }
    if d_h_grid.iter().any(|&d| !(d > 0.0)) || d_h_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("bias grid must be positive and strictly ascending"));
    }
    cfg.validate()?;
    let refl = refl.into();
    let msb = mean_square_bandwidth(cfg)?;
    let mut bias = Vec::with_capacity(d_h_grid.len());
    let mut crb = Vec::with_capacity(d_h_grid.len());
    let mut rho = Vec::with_capacity(d_h_grid.len());
    for &d_h in d_h_grid {
        let geom = TwoRayGeometry::new(h_tx, h_rx, d_h)?;
        bias.push(ml_bias(&geom, cfg, refl)?);
        crb.push(tof_crb(cfg.es_n0(two_ray_rx_power(&geom, cfg, refl)?), msb)?);
        rho.push(geom.los_distance());
    }
    let bias_derivative = finite_difference(&rho, &bias);
    Ok(BiasCurve {
        d_h_grid: d_h_grid.to_vec(),
        bias,
        bias_derivative,
        crb,
    })
}

/// Central differences on a non-uniform grid, one-sided at the ends.
pub fn finite_difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] = (y[1] - y[0]) / (x[1] - x[0]);
    out[n - 1] = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        out[i] = (y[i + 1] * h0 * h0 - y[i - 1] * h1 * h1 + y[i] * (h1 * h1 - h0 * h0))
            / (h0 * h1 * (h0 + h1));
    }
    out
}

/// Per-point lower bound on the ranging MSE of a biased estimator (m²).
pub fn mse_bound(curve: &BiasCurve) -> Vec<f64> {
    curve
        .crb
        .iter()
        .zip(&curve.bias)
        .zip(&curve.bias_derivative)
        .map(|((&crb, &b), &db)| crb + b * b + crb * (2.0 * db + db * db))
        .collect()
}

/// `n` logarithmically spaced points over `[start, end]`.
pub fn log_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    let (l0, l1) = (start.ln(), end.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Uniform grid from `start` to `end` inclusive with spacing `step`.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| start + i as f64 * step).collect()
}

//! Gauss-Markov bias processes.
//!
//! First-order (GMP-1), integrated first-order (IGMP-1) and second-order
//! (GMP-2) processes in discrete time, their ACF/PSD, and the pipeline that
//! turns a simulated distance-domain bias curve into time-domain GMP-1
//! parameters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, SMatrix, SVector, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Independent variable of a process: seconds or metres of travelled distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Distance,
}

/// Stationary first-order Gauss-Markov parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gmp1Params {
    pub domain: Domain,
    pub tau: f64,
    pub sigma2: f64,
}

impl Gmp1Params {
    pub fn new(domain: Domain, tau: f64, sigma2: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!(
                "GMP-1 needs tau > 0 and sigma2 >= 0 (got {tau}, {sigma2})"
            )));
        }
        Ok(Self { domain, tau, sigma2 })
    }

    pub fn time(tau: f64, sigma2: f64) -> Result<Self> {
        Self::new(Domain::Time, tau, sigma2)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Discrete GMP-1 transition `α` and step-noise variance `q`.
pub fn gmp1_discretize(p: &Gmp1Params, step: f64) -> Result<(f64, f64)> {
    if !(step > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    let alpha = (-step / p.tau).exp();
    let q = p.sigma2 * -(-2.0 * step / p.tau).exp_m1();
    Ok((alpha, q))
}

/// `σ² e^{−|lag|/τ}`.
pub fn gmp1_acf(p: &Gmp1Params, lag: f64) -> f64 {
    p.sigma2 * (-lag.abs() / p.tau).exp()
}

/// PSD of the discrete GMP-1 sampled at `step`, for `|f| ≤ 1/(2·step)`.
pub fn gmp1_psd(p: &Gmp1Params, step: f64, f: f64) -> Result<f64> {
    if !(step > 0.0) || f.abs() > 0.5 / step * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "frequency {f} outside the Nyquist band of step {step}"
        )));
    }
    let a = (-step / p.tau).exp();
    let num = p.sigma2 * step * (1.0 - a * a);
    Ok(num / (1.0 + a * a - 2.0 * a * (2.0 * PI * f * step).cos()))
}

/// Sample autocovariance on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfEstimate {
    pub lags: Vec<f64>,
    pub acf: Vec<f64>,
    pub windowed: bool,
    pub domain: Domain,
}

impl AcfEstimate {
    pub fn spacing(&self) -> f64 {
        if self.lags.len() > 1 {
            self.lags[1] - self.lags[0]
        } else {
            1.0
        }
    }

    /// `spacing · |Σ_k R_k e^{−j2πfk·spacing}|` over all lags `−L..L`.
    pub fn psd(&self, f: f64) -> f64 {
        let h = self.spacing();
        let mut s = self.acf.first().copied().unwrap_or(0.0);
        for (k, r) in self.acf.iter().enumerate().skip(1) {
            s += 2.0 * r * (2.0 * PI * f * k as f64 * h).cos();
        }
        (h * s).abs()
    }
}

/// Minimum record length accepted by [`sample_acf`].
pub const MIN_ACF_SAMPLES: usize = 16;

/// Biased, mean-removed sample autocovariance at lags `0..N`.
pub fn sample_acf(data: &[f64], spacing: f64, domain: Domain) -> Result<AcfEstimate> {
    let n = data.len();
    if n < MIN_ACF_SAMPLES {
        return Err(Error::domain(format!(
            "sample ACF needs at least {MIN_ACF_SAMPLES} samples, got {n}"
        )));
    }
    if !(spacing > 0.0) {
        return Err(Error::domain("sample spacing must be positive"));
    }
    let mean = data.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = data.iter().map(|v| v - mean).collect();
    let acf = (0..n)
        .map(|k| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect();
    Ok(AcfEstimate {
        lags: (0..n).map(|k| k as f64 * spacing).collect(),
        acf,
        windowed: false,
        domain,
    })
}

/// Sample ACF of a series given with explicit abscissae, which must be uniform.
pub fn sample_acf_on_grid(x: &[f64], data: &[f64], domain: Domain) -> Result<AcfEstimate> {
    if x.len() != data.len() || x.len() < 2 {
        return Err(Error::domain("grid and data lengths differ"));
    }
    let h = x[1] - x[0];
    let uniform = x
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if !uniform {
        return Err(Error::domain("sample ACF needs a uniform grid"));
    }
    sample_acf(data, h, domain)
}

/// Raised-cosine half window reaching zero at lag index `support`.
pub fn taper_acf(est: &AcfEstimate, support: usize) -> Result<AcfEstimate> {
    if support == 0 || support > est.acf.len() {
        return Err(Error::domain(format!(
            "taper support {support} outside 1..={}",
            est.acf.len()
        )));
    }
    let acf = est
        .acf
        .iter()
        .enumerate()
        .map(|(k, r)| {
            if k < support {
                r * 0.5 * (1.0 + (PI * k as f64 / support as f64).cos())
            } else {
                0.0
            }
        })
        .collect();
    Ok(AcfEstimate {
        lags: est.lags.clone(),
        acf,
        windowed: true,
        domain: est.domain,
    })
}

/// Default taper support: half the available lags.
pub fn default_taper_support(est: &AcfEstimate) -> usize {
    (est.acf.len() / 2).max(1)
}

const FIT_MAX_ITER: usize = 200;
const FIT_RTOL: f64 = 1e-9;

/// Least-squares fit of `σ² e^{−lag/τ}` to a windowed ACF.
///
/// Levenberg-Marquardt over `(ln τ, σ²)`, started at the 1/e crossing.
pub fn fit_gmp1_acf(est: &AcfEstimate) -> Result<Gmp1Params> {
    if !est.windowed {
        return Err(Error::domain("fit_gmp1_acf expects a tapered ACF"));
    }
    let r0 = est.acf.first().copied().unwrap_or(0.0);
    if !(r0 > 0.0) {
        return Err(Error::domain("ACF at lag 0 must be positive to fit"));
    }
    let lags = &est.lags;
    let acf = &est.acf;
    let tau0 = lags
        .iter()
        .zip(acf)
        .find(|(_, &r)| r < r0 / std::f64::consts::E)
        .map(|(&l, _)| l)
        .unwrap_or(lags[lags.len() - 1])
        .max(est.spacing());

    let cost = |lt: f64, s2: f64| -> f64 {
        let tau = lt.exp();
        lags.iter()
            .zip(acf)
            .map(|(&l, &r)| (s2 * (-l / tau).exp() - r).powi(2))
            .sum()
    };

    let (mut lt, mut s2) = (tau0.ln(), r0);
    let mut c = cost(lt, s2);
    let mut mu = 1e-3;
    for iter in 0..FIT_MAX_ITER {
        let tau = lt.exp();
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (&l, &r) in lags.iter().zip(acf) {
            let e = (-l / tau).exp();
            let res = s2 * e - r;
            let j = Vector2::new(s2 * e * l / tau, e);
            jtj += j * j.transpose();
            jtr += j * res;
        }
        let mut accepted = false;
        for _ in 0..50 {
            let mut a = jtj;
            a[(0, 0)] *= 1.0 + mu;
            a[(1, 1)] *= 1.0 + mu;
            let Some(inv) = a.try_inverse() else {
                mu *= 10.0;
                continue;
            };
            let delta = -(inv * jtr);
            let (nlt, ns2) = (lt + delta[0], s2 + delta[1]);
            let nc = cost(nlt, ns2);
            if nc.is_finite() && nc <= c {
                let rel = (c - nc) / c.max(f64::MIN_POSITIVE);
                let step_small = delta[0].abs() < FIT_RTOL && delta[1].abs() < FIT_RTOL * ns2.abs();
                lt = nlt;
                s2 = ns2;
                c = nc;
                mu = (mu / 10.0).max(1e-12);
                accepted = true;
                if rel < FIT_RTOL * FIT_RTOL || step_small || c == 0.0 {
                    return Gmp1Params::new(est.domain, lt.exp(), s2);
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // No descent direction left: the iterate is a stationary point.
            if iter > 0 {
                return Gmp1Params::new(est.domain, lt.exp(), s2);
            }
            return Err(Error::FitNonConvergence {
                iterations: iter + 1,
                residual: c,
            });
        }
    }
    Err(Error::FitNonConvergence {
        iterations: FIT_MAX_ITER,
        residual: c,
    })
}

/// Sample ACF, default taper and fit in one call.
pub fn fit_bias_segment(x: &[f64], bias: &[f64]) -> Result<(Gmp1Params, AcfEstimate, AcfEstimate)> {
    let raw = sample_acf_on_grid(x, bias, Domain::Distance)?;
    let win = taper_acf(&raw, default_taper_support(&raw))?;
    let fit = fit_gmp1_acf(&win)?;
    Ok((fit, raw, win))
}

/// Average- and worst-case time-domain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedParams {
    pub average: Gmp1Params,
    pub worst: Gmp1Params,
}

/// Converts distance-domain fits to time domain over a radial speed range.
pub fn combine_distance_to_time(fits: &[Gmp1Params], v_min: f64, v_max: f64) -> Result<CombinedParams> {
    if fits.is_empty() {
        return Err(Error::domain("no fits to combine"));
    }
    if fits.iter().any(|f| f.domain != Domain::Distance) {
        return Err(Error::domain("combine_distance_to_time expects distance-domain fits"));
    }
    if !(v_min > 0.0 && v_max >= v_min) {
        return Err(Error::domain(format!(
            "speed range needs 0 < v_min <= v_max (got {v_min}, {v_max})"
        )));
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&Gmp1Params) -> f64| {
        fits.iter().map(get).fold(init, f)
    };
    let td_min = fold(f64::min, f64::INFINITY, |p| p.tau);
    let td_max = fold(f64::max, 0.0, |p| p.tau);
    let s_min = fold(f64::min, f64::INFINITY, |p| p.sigma2);
    let s_max = fold(f64::max, 0.0, |p| p.sigma2);
    let (t_short, t_long) = (td_min / v_max, td_max / v_min);
    let worst = Gmp1Params::time((t_short * t_long).sqrt(), (t_long / t_short).sqrt() * s_max)?;
    let average = Gmp1Params::time((td_min + td_max) / (v_min + v_max), 0.5 * (s_min + s_max))?;
    Ok(CombinedParams { average, worst })
}

/// The individual time-domain parameter sets behind a combination.
pub fn individual_time_params(fits: &[Gmp1Params], speeds: &[f64]) -> Vec<Gmp1Params> {
    fits.iter()
        .flat_map(|f| {
            speeds.iter().map(move |v| Gmp1Params {
                domain: Domain::Time,
                tau: f.tau / v,
                sigma2: f.sigma2,
            })
        })
        .collect()
}

/// Satellite bias process family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatBiasKind {
    /// No bias states; stationary variances are added to the measurement noise.
    Wgn,
    Gmp1,
    Igmp1,
    Gmp2,
}

/// Pseudorange / pseudorange-rate bias process of one satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatBiasModel {
    pub kind: SatBiasKind,
    pub tau: f64,
    pub sigma2_range: f64,
    pub sigma2_rate: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
}

fn default_damping() -> f64 {
    0.7
}

/// Default SISE correlation time (s).
pub const SAT_TAU: f64 = 5.0 * 3600.0;

impl SatBiasModel {
    pub fn new(kind: SatBiasKind, tau: f64, sigma2_range: f64, sigma2_rate: f64) -> Result<Self> {
        let m = Self {
            kind,
            tau,
            sigma2_range,
            sigma2_rate,
            damping: default_damping(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Range std `sigma`, rate std `sigma / τ`, `τ` = 5 h.
    pub fn from_range_sigma(kind: SatBiasKind, sigma: f64) -> Self {
        Self {
            kind,
            tau: SAT_TAU,
            sigma2_range: sigma * sigma,
            sigma2_rate: (sigma / SAT_TAU).powi(2),
            damping: default_damping(),
        }
    }

    pub fn worst_case(kind: SatBiasKind) -> Self {
        Self::from_range_sigma(kind, 10.0)
    }

    pub fn average_case(kind: SatBiasKind) -> Self {
        Self::from_range_sigma(kind, 5.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.sigma2_range >= 0.0) || !(self.sigma2_rate >= 0.0) {
            return Err(Error::config(
                "sat_bias_model",
                "tau must be positive and variances non-negative",
            ));
        }
        if self.kind == SatBiasKind::Gmp2 && !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::config("sat_bias_model.damping", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn has_states(&self) -> bool {
        self.kind != SatBiasKind::Wgn
    }

    /// Discrete `(A, U)` for the configured kind.
    pub fn discretize(&self, step: f64) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
        match self.kind {
            SatBiasKind::Wgn => Ok((Matrix2::zeros(), Matrix2::zeros())),
            SatBiasKind::Gmp1 => gmp1_pair_discretize(self, step),
            SatBiasKind::Igmp1 => igmp1_discretize(self, step),
            SatBiasKind::Gmp2 => gmp2_discretize(self, step),
        }
    }

    /// Covariance used to initialize bias states and draw their initial value.
    ///
    /// Stationary covariance for GMP-1 and GMP-2. IGMP-1 has none; it starts
    /// from the configured range and rate variances.
    pub fn initial_covariance(&self) -> Matrix2<f64> {
        match self.kind {
            SatBiasKind::Gmp2 => {
                Matrix2::new(self.sigma2_range, 0.0, 0.0, self.sigma2_range / (self.tau * self.tau))
            }
            _ => Matrix2::new(self.sigma2_range, 0.0, 0.0, self.sigma2_rate),
        }
    }

    /// Variances added to measurement noise when the bias is treated as white.
    pub fn white_variances(&self) -> (f64, f64) {
        let c = self.initial_covariance();
        (c[(0, 0)], c[(1, 1)])
    }
}

/// Two independent GMP-1 processes sharing `τ`.
pub fn gmp1_pair_discretize(m: &SatBiasModel, step: f64) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let (a, qr) = gmp1_discretize(&Gmp1Params::time(m.tau, m.sigma2_range)?, step)?;
    let (_, qv) = gmp1_discretize(&Gmp1Params::time(m.tau, m.sigma2_rate)?, step)?;
    Ok((Matrix2::new(a, 0.0, 0.0, a), Matrix2::new(qr, 0.0, 0.0, qv)))
}

/// Integrated GMP-1: the rate bias is GMP-1, the range bias its integral.
pub fn igmp1_discretize(m: &SatBiasModel, step: f64) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    if !(step > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    if step >= m.tau / 10.0 {
        return Err(Error::Approximation(format!(
            "IGMP-1 noise approximation needs step < tau/10 (step {step}, tau {})",
            m.tau
        )));
    }
    let a = (-step / m.tau).exp();
    let trans = Matrix2::new(1.0, m.tau * (1.0 - a), 0.0, a);
    let k = 2.0 * m.sigma2_rate / m.tau;
    let u = k * Matrix2::new(step.powi(3) / 3.0, step * step / 2.0, step * step / 2.0, step);
    Ok((trans, u))
}

/// Continuous GMP-2 system matrix for natural frequency `1/τ`.
pub fn gmp2_continuous(tau: f64, damping: f64) -> Matrix2<f64> {
    let w = 1.0 / tau;
    Matrix2::new(0.0, 1.0, -w * w, -2.0 * damping * w)
}

/// Closed-form GMP-2 transition.
pub fn gmp2_transition(tau: f64, damping: f64, step: f64) -> Matrix2<f64> {
    let w = 1.0 / tau;
    let zw = damping * w;
    let beta = w * (1.0 - damping * damping).sqrt();
    let (s, c) = (beta * step).sin_cos();
    (-zw * step).exp()
        * Matrix2::new(
            c + zw / beta * s,
            s / beta,
            -w * w / beta * s,
            c - zw / beta * s,
        )
}

/// Second-order GMP with noise scaled to the configured stationary range variance.
pub fn gmp2_discretize(m: &SatBiasModel, step: f64) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    if !(step > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    let trans = gmp2_transition(m.tau, m.damping, step);
    let w = 1.0 / m.tau;
    // Intensity giving stationary range variance sigma2_range in continuous time.
    let q = 4.0 * m.damping * w.powi(3) * m.sigma2_range;
    let ac = DMatrix::from_column_slice(2, 2, gmp2_continuous(m.tau, m.damping).as_slice());
    let wc = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, q]);
    let (_, qd) = linalg::van_loan(&ac, &wc, step);
    let mut u = Matrix2::from_column_slice(qd.as_slice());
    if m.sigma2_range > 0.0 {
        let p = linalg::discrete_lyapunov(
            &DMatrix::from_column_slice(2, 2, trans.as_slice()),
            &qd,
        )?;
        let scale = m.sigma2_range / p[(0, 0)];
        if scale.is_finite() && scale > 0.0 {
            u *= scale;
        }
    }
    u = 0.5 * (u + u.transpose());
    Ok((trans, u))
}

/// Stationary covariance of a discrete 2-state process, if it exists.
pub fn stationary_covariance(a: &Matrix2<f64>, u: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let p = linalg::discrete_lyapunov(
        &DMatrix::from_column_slice(2, 2, a.as_slice()),
        &DMatrix::from_column_slice(2, 2, u.as_slice()),
    )?;
    Ok(Matrix2::from_column_slice(p.as_slice()))
}

/// Square-root factor of a symmetric PSD matrix.
///
/// Cholesky when it succeeds, otherwise a clamped eigen-decomposition so
/// singular covariances (zero noise on some components) are accepted.
pub fn psd_sqrt<const N: usize>(cov: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite covariance".into()));
    }
    if let Some(ch) = cov.cholesky() {
        return Ok(ch.l());
    }
    let sym = DMatrix::from_fn(N, N, |i, j| 0.5 * (cov[(i, j)] + cov[(j, i)]));
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::Numerical("covariance is not positive semidefinite".into()));
    }
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let f = eig.eigenvectors * DMatrix::from_diagonal(&d);
    Ok(SMatrix::from_fn(|i, j| f[(i, j)]))
}

/// Draws `L·n` with `n` standard normal.
pub fn draw_correlated<const N: usize, R: Rng + ?Sized>(
    factor: &SMatrix<f64, N, N>,
    rng: &mut R,
) -> SVector<f64, N> {
    let n = SVector::<f64, N>::from_fn(|_, _| rng.sample(StandardNormal));
    factor * n
}

/// `x' = A x + u`, `u ~ N(0, noise_cov)`.
pub fn process_step<const N: usize, R: Rng + ?Sized>(
    transition: &SMatrix<f64, N, N>,
    noise_cov: &SMatrix<f64, N, N>,
    state: &SVector<f64, N>,
    rng: &mut R,
) -> Result<SVector<f64, N>> {
    let l = psd_sqrt(noise_cov)?;
    Ok(transition * state + draw_correlated(&l, rng))
}

/// A discrete linear Gaussian process with a cached noise factor.
#[derive(Debug, Clone)]
pub struct LinearProcess<const N: usize> {
    pub transition: SMatrix<f64, N, N>,
    pub noise_cov: SMatrix<f64, N, N>,
    factor: SMatrix<f64, N, N>,
}

impl<const N: usize> LinearProcess<N> {
    pub fn new(transition: SMatrix<f64, N, N>, noise_cov: SMatrix<f64, N, N>) -> Result<Self> {
        let factor = psd_sqrt(&noise_cov)?;
        Ok(Self {
            transition,
            noise_cov,
            factor,
        })
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &SVector<f64, N>, rng: &mut R) -> SVector<f64, N> {
        self.transition * state + draw_correlated(&self.factor, rng)
    }
}

/// Analytic ACF `e₁ᵀ Aᵏ P e₁` of the first component of a stationary process.
pub fn range_acf(a: &Matrix2<f64>, p: &Matrix2<f64>, lags: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(lags + 1);
    let mut ak = Matrix2::identity();
    for _ in 0..=lags {
        out.push((ak * p)[(0, 0)]);
        ak = a * ak;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(tau: f64, s2: f64) -> Gmp1Params {
        Gmp1Params::time(tau, s2).unwrap()
    }

    #[test]
    fn gmp1_discretize_limits() {
        let (a, q) = gmp1_discretize(&p(5.5, 2.0), 1e-9).unwrap();
        assert!((a - 1.0).abs() < 1e-9 && q < 1e-8);
        let (a, q) = gmp1_discretize(&p(5.5, 2.0), 1e4).unwrap();
        assert!(a < 1e-300 && (q - 2.0).abs() < 1e-12);
        let (a, q) = gmp1_discretize(&p(5.5, 2.0), 1.0).unwrap();
        assert!((a - (-1.0f64 / 5.5).exp()).abs() < 1e-15);
        assert!((q - 2.0 * (1.0 - (-2.0f64 / 5.5).exp())).abs() < 1e-15);
        assert!(gmp1_discretize(&p(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn acf_values() {
        let q = p(8.8, 0.62 * 0.62);
        assert_eq!(gmp1_acf(&q, 0.0), q.sigma2);
        assert!((gmp1_acf(&q, 8.8) - 0.62 * 0.62 / std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn psd_peak_and_integral() {
        let q = p(5.5, 0.22 * 0.22);
        let t = 1.0;
        let s0 = gmp1_psd(&q, t, 0.0).unwrap();
        let n = 20_000;
        let mut integral = 0.0;
        for i in 0..n {
            let f = -0.5 / t + (i as f64 + 0.5) / n as f64 / t;
            let s = gmp1_psd(&q, t, f).unwrap();
            assert!(s <= s0);
            integral += s / (n as f64 * t);
        }
        assert!((integral - q.sigma2).abs() / q.sigma2 < 1e-6, "{integral}");
        assert!(gmp1_psd(&q, t, 0.6).is_err());
    }

    #[test]
    fn sample_acf_edge_cases() {
        let z = sample_acf(&[0.0; 32], 1.0, Domain::Time).unwrap();
        assert!(z.acf.iter().all(|&v| v == 0.0));
        assert!(sample_acf(&[1.0; 8], 1.0, Domain::Time).is_err());
        let x = [0.0, 1.0, 2.5, 3.0];
        assert!(sample_acf_on_grid(&x, &[1.0; 4], Domain::Distance).is_err());
    }

    #[test]
    fn white_noise_acf() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let est = sample_acf(&data, 1.0, Domain::Time).unwrap();
        assert!((est.acf[0] - 1.0).abs() < 0.02);
        // std of the lag-k estimate is ~1/sqrt(N) = 0.003
        assert!(est.acf[1..50].iter().all(|v| v.abs() < 0.02));
    }

    fn gmp1_record(q: &Gmp1Params, n: usize, seed: u64) -> Vec<f64> {
        let (a, v) = gmp1_discretize(q, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = q.sigma() * rng.sample::<f64, _>(StandardNormal);
        (0..n)
            .map(|_| {
                x = a * x + v.sqrt() * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn gmp1_record_acf_matches_model() {
        let q = p(5.0, 1.0);
        let data = gmp1_record(&q, 200_000, 3);
        let est = sample_acf(&data, 1.0, Domain::Time).unwrap();
        for k in [0usize, 1, 2, 5, 10] {
            let expect = gmp1_acf(&q, k as f64);
            assert!((est.acf[k] - expect).abs() < 0.05, "lag {k}: {} vs {expect}", est.acf[k]);
        }
    }

    #[test]
    fn taper_behaviour() {
        let est = sample_acf(&gmp1_record(&p(5.0, 1.0), 512, 5), 1.0, Domain::Time).unwrap();
        let full = taper_acf(&est, est.acf.len()).unwrap();
        assert_eq!(full.acf[0], est.acf[0]);
        let half = taper_acf(&est, 100).unwrap();
        assert!(half.windowed);
        assert!(half.acf[100..].iter().all(|&v| v == 0.0));
        assert!(taper_acf(&est, 0).is_err());
        assert!(taper_acf(&est, 513).is_err());
    }

    #[test]
    fn taper_reduces_high_frequency_leakage() {
        let q = p(50.0, 1.0);
        let est = sample_acf(&gmp1_record(&q, 4096, 9), 1.0, Domain::Time).unwrap();
        let support = 128;
        let rect = AcfEstimate {
            lags: est.lags[..support].to_vec(),
            acf: est.acf[..support].to_vec(),
            ..est.clone()
        };
        let win = taper_acf(&rect, support).unwrap();
        let leak = |e: &AcfEstimate| -> f64 {
            (0..100)
                .map(|i| {
                    let f = 0.25 + 0.25 * i as f64 / 99.0;
                    (e.psd(f) - gmp1_psd(&q, 1.0, f).unwrap()).abs()
                })
                .sum::<f64>()
        };
        assert!(leak(&win) < 0.5 * leak(&rect), "{} vs {}", leak(&win), leak(&rect));
    }

    #[test]
    fn fit_round_trip_and_scaling() {
        let truth = Gmp1Params::new(Domain::Distance, 2.7, 0.04).unwrap();
        let lags: Vec<f64> = (0..400).map(|k| k as f64 * 0.1).collect();
        let acf: Vec<f64> = lags.iter().map(|&l| gmp1_acf(&truth, l)).collect();
        let est = AcfEstimate { lags: lags.clone(), acf: acf.clone(), windowed: true, domain: Domain::Distance };
        let fit = fit_gmp1_acf(&est).unwrap();
        assert!((fit.tau - 2.7).abs() / 2.7 < 1e-6, "{fit:?}");
        assert!((fit.sigma2 - 0.04).abs() / 0.04 < 1e-6);
        assert_eq!(fit.domain, Domain::Distance);

        let scaled = AcfEstimate { acf: acf.iter().map(|v| 3.0 * v).collect(), ..est };
        let fs = fit_gmp1_acf(&scaled).unwrap();
        assert!((fs.tau - fit.tau).abs() / fit.tau < 1e-6);
        assert!((fs.sigma2 - 3.0 * fit.sigma2).abs() / fs.sigma2 < 1e-6);
    }

    #[test]
    fn fit_requires_window() {
        let est = sample_acf(&gmp1_record(&p(3.0, 1.0), 64, 2), 1.0, Domain::Time).unwrap();
        assert!(fit_gmp1_acf(&est).is_err());
    }

    #[test]
    fn combine_cases() {
        let f = Gmp1Params::new(Domain::Distance, 3.0, 0.05).unwrap();
        let c = combine_distance_to_time(&[f; 4], 0.5, 0.5).unwrap();
        assert!((c.worst.tau - 6.0).abs() < 1e-12);
        assert!((c.worst.sigma2 - 0.05).abs() < 1e-15);

        let fits = [
            Gmp1Params::new(Domain::Distance, 2.0, 0.02).unwrap(),
            Gmp1Params::new(Domain::Distance, 4.0, 0.08).unwrap(),
        ];
        let a = combine_distance_to_time(&fits, 0.1, 1.0).unwrap();
        let b = combine_distance_to_time(&fits, 0.2, 2.0).unwrap();
        assert!((a.worst.tau - 2.0 * b.worst.tau).abs() < 1e-12);
        assert!((a.average.tau - 2.0 * b.average.tau).abs() < 1e-12);
        assert_eq!(a.worst.sigma2, b.worst.sigma2);
        assert_eq!(a.average.sigma2, b.average.sigma2);
        assert_eq!(a.worst.domain, Domain::Time);
        assert!(combine_distance_to_time(&fits, 0.0, 1.0).is_err());
        assert!(combine_distance_to_time(&[p(1.0, 1.0)], 0.1, 1.0).is_err());
    }

    #[test]
    fn worst_case_overbounds_individual_psds() {
        // Fits of the four default height pairs.
        let fits: Vec<Gmp1Params> = [(2.755, 0.123), (3.069, 0.253), (3.916, 0.166), (1.82, 0.286)]
            .iter()
            .map(|&(t, s)| Gmp1Params::new(Domain::Distance, t, s * s).unwrap())
            .collect();
        let c = combine_distance_to_time(&fits, 0.1, 1.0).unwrap();
        let sets = individual_time_params(&fits, &[0.1, 1.0]);
        assert_eq!(sets.len(), 8);
        for t in [0.1, 1.0] {
            for i in 0..=200 {
                let f = 0.5 / t * i as f64 / 200.0;
                let w = gmp1_psd(&c.worst, t, f).unwrap();
                for s in &sets {
                    assert!(w >= gmp1_psd(s, t, f).unwrap(), "f {f} set {s:?}");
                }
            }
        }
    }

    fn sat(kind: SatBiasKind) -> SatBiasModel {
        SatBiasModel::worst_case(kind)
    }

    #[test]
    fn igmp1_properties() {
        let m = sat(SatBiasKind::Igmp1);
        let (a, _) = igmp1_discretize(&m, 1e-6).unwrap();
        assert!((a - Matrix2::identity()).amax() < 1e-5);
        let (a, u) = igmp1_discretize(&m, 1.0).unwrap();
        let (alpha, _) = gmp1_discretize(&Gmp1Params::time(m.tau, m.sigma2_rate).unwrap(), 1.0).unwrap();
        assert_eq!(a[(1, 1)], alpha);
        assert_eq!(a[(1, 0)], 0.0);
        assert!(u[(0, 0)] > 0.0);
        assert!(matches!(igmp1_discretize(&m, m.tau / 10.0), Err(Error::Approximation(_))));

        let mut p = m.initial_covariance();
        let mut last = p[(0, 0)];
        for _ in 0..10_000 {
            p = a * p * a.transpose() + u;
            assert!(p[(0, 0)] > last);
            last = p[(0, 0)];
        }
    }

    #[test]
    fn igmp1_and_gmp1_share_rate_statistics() {
        let (ai, _) = igmp1_discretize(&sat(SatBiasKind::Igmp1), 1.0).unwrap();
        let (ag, ug) = gmp1_pair_discretize(&sat(SatBiasKind::Gmp1), 1.0).unwrap();
        assert_eq!(ai[(1, 1)], ag[(1, 1)]);
        let m = sat(SatBiasKind::Gmp1);
        // Stationary rate variance of both equals sigma2_rate.
        let stat = ug[(1, 1)] / (1.0 - ag[(1, 1)].powi(2));
        assert!((stat - m.sigma2_rate).abs() / m.sigma2_rate < 1e-9);
    }

    #[test]
    fn gmp2_limits_and_closed_form() {
        let m = sat(SatBiasKind::Gmp2);
        let (a, u) = gmp2_discretize(&m, 1e-6).unwrap();
        assert!((a - Matrix2::identity()).amax() < 1e-5);
        assert!(u.amax() < 1e-12);
        let ac = DMatrix::from_column_slice(2, 2, gmp2_continuous(m.tau, m.damping).as_slice());
        let expm = (ac * 30.0).exp();
        let closed = gmp2_transition(m.tau, m.damping, 30.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!((expm[(i, j)] - closed[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gmp2_stationary_ratio() {
        for kind in [SatBiasModel::worst_case(SatBiasKind::Gmp2), SatBiasModel::average_case(SatBiasKind::Gmp2)] {
            let (a, u) = gmp2_discretize(&kind, 1.0).unwrap();
            let p = stationary_covariance(&a, &u).unwrap();
            assert!((p[(0, 0)] - kind.sigma2_range).abs() / kind.sigma2_range < 1e-9);
            let ratio = (p[(1, 1)] / p[(0, 0)]).sqrt();
            assert!((ratio * kind.tau - 1.0).abs() < 0.01, "{ratio}");
        }
    }

    #[test]
    fn van_loan_reproduces_gmp1_closed_form() {
        let q = p(5.5, 0.3);
        let ac = DMatrix::from_element(1, 1, -1.0 / q.tau);
        let w = DMatrix::from_element(1, 1, 2.0 * q.sigma2 / q.tau);
        let (phi, qd) = linalg::van_loan(&ac, &w, 1.0);
        let (alpha, var) = gmp1_discretize(&q, 1.0).unwrap();
        assert!((phi[(0, 0)] - alpha).abs() < 1e-10);
        assert!((qd[(0, 0)] - var).abs() < 1e-10);
    }

    #[test]
    fn gmp2_mainlobe_wider_than_gmp1() {
        let m2 = SatBiasModel::new(SatBiasKind::Gmp2, 50.0, 1.0, 1.0 / 2500.0).unwrap();
        let m1 = SatBiasModel { kind: SatBiasKind::Gmp1, ..m2 };
        let (a2, u2) = gmp2_discretize(&m2, 1.0).unwrap();
        let (a1, u1) = gmp1_pair_discretize(&m1, 1.0).unwrap();
        let l2 = LinearProcess::new(a2, u2).unwrap();
        let l1 = LinearProcess::new(a1, u1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 2000;
        let lag = 50;
        let (mut c1, mut c2, mut v1, mut v2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..trials {
            let mut x1 = draw_correlated(&psd_sqrt(&m1.initial_covariance()).unwrap(), &mut rng);
            let mut x2 = draw_correlated(&psd_sqrt(&m2.initial_covariance()).unwrap(), &mut rng);
            let (s1, s2) = (x1[0], x2[0]);
            for _ in 0..lag {
                x1 = l1.step(&x1, &mut rng);
                x2 = l2.step(&x2, &mut rng);
            }
            c1 += s1 * x1[0];
            c2 += s2 * x2[0];
            v1 += s1 * s1;
            v2 += s2 * s2;
        }
        // Normalized ACF at lag tau: 1/e for GMP-1, about 0.69 for GMP-2.
        assert!(c2 / v2 > c1 / v1 + 0.15, "{} vs {}", c2 / v2, c1 / v1);
        let analytic = range_acf(&a2, &stationary_covariance(&a2, &u2).unwrap(), lag);
        assert!(analytic[lag] / analytic[0] > 0.6);
    }

    #[test]
    fn gmp1_ensemble_variance() {
        let q = p(5.0, 2.0);
        let (a, v) = gmp1_discretize(&q, 1.0).unwrap();
        let proc1 = LinearProcess::new(SMatrix::<f64, 1, 1>::new(a), SMatrix::<f64, 1, 1>::new(v)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 20_000;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let mut x = SVector::<f64, 1>::new(q.sigma() * rng.sample::<f64, _>(StandardNormal));
            for _ in 0..100 {
                x = proc1.step(&x, &mut rng);
            }
            sum2 += x[0] * x[0];
        }
        let var = sum2 / n as f64;
        let se = q.sigma2 * (2.0 / n as f64).sqrt();
        assert!((var - q.sigma2).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn deterministic_step_with_zero_noise() {
        let a = Matrix2::new(1.0, 2.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = process_step(&a, &Matrix2::zeros(), &Vector2::new(1.0, 1.0), &mut rng).unwrap();
        assert_eq!(x, Vector2::new(3.0, 1.0));
    }

    proptest! {
        #[test]
        fn gmp2_noise_is_psd(tau in 10.0f64..1e5, zeta in 0.05f64..0.95, step in 0.01f64..100.0) {
            let m = SatBiasModel { kind: SatBiasKind::Gmp2, tau, sigma2_range: 4.0, sigma2_rate: 4.0 / (tau * tau), damping: zeta };
            let (_, u) = gmp2_discretize(&m, step).unwrap();
            prop_assert!((u[(0, 1)] - u[(1, 0)]).abs() <= 1e-12 * u.amax());
            let e = u.symmetric_eigen().eigenvalues;
            prop_assert!(e.min() >= -1e-9 * e.max().abs());
        }
    }
}

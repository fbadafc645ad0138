//! Fourier analysis of sampled traces: plain spectra, peak extraction, and
//! Lorentzian line-shape fits.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 8;

/// How many times the median coefficient magnitude a peak must reach.
pub const PEAK_SIGNIFICANCE: f64 = 3.0;

/// Uniformly sampled real-valued trace, such as z(t) or p0(t) estimates.
#[derive(Clone, Debug)]
pub struct SampledTrace {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    shots: Option<Vec<u64>>,
}

impl SampledTrace {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTrace(format!("sample spacing {dt} must be positive")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidTrace(format!("start time {t0} must be finite")));
        }
        if values.len() < MIN_SAMPLES {
            return Err(Error::TraceTooShort(values.len()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidTrace(format!("non-finite sample {bad}")));
        }
        Ok(Self { t0, dt, values, shots: None })
    }

    /// Attaches the per-point shot counts the samples were estimated from.
    pub fn with_shots(mut self, shots: Vec<u64>) -> Result<Self> {
        if shots.len() != self.values.len() {
            return Err(Error::InvalidTrace(format!(
                "{} shot counts for {} samples",
                shots.len(),
                self.values.len()
            )));
        }
        self.shots = Some(shots);
        Ok(self)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shots(&self) -> Option<&[u64]> {
        self.shots.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }
}

/// Dominant nonzero-frequency bin of a spectrum.
#[derive(Clone, Copy, Debug)]
pub struct SpectralPeak {
    pub index: usize,
    pub omega: f64,
    pub coeff: Complex64,
}

/// Two-sided discrete spectrum, normalized so a pure cos(w0 t) trace puts a
/// coefficient of 1/2 at each of the two matching bins.
#[derive(Clone, Debug)]
pub struct Spectrum {
    freqs: Vec<f64>,
    coeffs: Vec<Complex64>,
    h0: f64,
    peak: Option<SpectralPeak>,
}

impl Spectrum {
    /// Angular frequency of each bin, 2*pi*j/(n*dt).
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// DC level, equal to the mean of the input samples.
    pub fn h0(&self) -> f64 {
        self.h0
    }

    /// Largest-magnitude coefficient at nonzero frequency, if it clears the
    /// noise floor of 3x the median coefficient magnitude.
    pub fn peak(&self) -> Option<&SpectralPeak> {
        self.peak.as_ref()
    }

    /// First-order peak height |c(omega_peak)|.
    pub fn h1(&self) -> Option<f64> {
        self.peak.as_ref().map(|p| p.coeff.norm())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Spacing between adjacent frequency bins.
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }
}

fn forward_coeffs(values: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> =
        values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

fn peak_over_floor(coeffs: &[Complex64]) -> Option<usize> {
    let half = coeffs.len() / 2;
    if half < 1 {
        return None;
    }
    let mut mags: Vec<f64> = (1..=half).map(|j| coeffs[j].norm()).collect();
    let best = (1..=half).max_by(|&a, &b| coeffs[a].norm().total_cmp(&coeffs[b].norm()))?;
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    let floor = (PEAK_SIGNIFICANCE * median).max(1e-12);
    if coeffs[best].norm() >= floor {
        Some(best)
    } else {
        None
    }
}

/// Plain periodogram of the trace: no window, no padding.
pub fn dft(trace: &SampledTrace) -> Result<Spectrum> {
    let n = trace.len();
    let coeffs = forward_coeffs(trace.values(), n);
    let step = 2.0 * std::f64::consts::PI / (n as f64 * trace.dt());
    let freqs: Vec<f64> = (0..n).map(|j| step * j as f64).collect();
    let peak = peak_over_floor(&coeffs).map(|index| SpectralPeak {
        index,
        omega: freqs[index],
        coeff: coeffs[index],
    });
    Ok(Spectrum { h0: coeffs[0].re, freqs, coeffs, peak })
}

/// Peak frequency refined by 4x zero-padding plus parabolic interpolation on
/// the log magnitudes of the three bins around the padded-grid peak.
pub fn refined_peak_frequency(trace: &SampledTrace) -> Result<f64> {
    let n = trace.len();
    let mean = trace.values().iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.values().iter().map(|v| v - mean).collect();
    let padded = 4 * n;
    let coeffs = forward_coeffs(&centered, padded);
    let best = peak_over_floor(&coeffs).ok_or(Error::NoPeak)?;
    let step = 2.0 * std::f64::consts::PI / (padded as f64 * trace.dt());
    let half = padded / 2;
    let mut location = best as f64;
    if best > 1 && best < half {
        let lm = coeffs[best - 1].norm().max(f64::MIN_POSITIVE).ln();
        let l0 = coeffs[best].norm().max(f64::MIN_POSITIVE).ln();
        let lp = coeffs[best + 1].norm().max(f64::MIN_POSITIVE).ln();
        let denom = lm - 2.0 * l0 + lp;
        if denom < 0.0 {
            let shift = 0.5 * (lm - lp) / denom;
            if shift.abs() <= 0.5 {
                location += shift;
            }
        }
    }
    Ok(step * location)
}

/// Leakage bounds from the spectral heights of a p0(t) trace.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ConfinementBounds {
    pub lower: f64,
    pub upper: f64,
    /// Set when h0 + 2 h1 exceeded 1, which only noise can produce; the
    /// bounds are then reported as (0, 0).
    pub noise_artifact: bool,
}

/// Bounds 1 - sqrt(s) <= eps <= (1 - sqrt(2s - 1))/2 with s = h0 + 2 h1.
pub fn confinement_bounds(h0: f64, h1: f64) -> Result<ConfinementBounds> {
    let s = h0 + 2.0 * h1;
    if s <= 0.5 {
        return Err(Error::ConfinementUndefined(s));
    }
    if s > 1.0 {
        return Ok(ConfinementBounds { lower: 0.0, upper: 0.0, noise_artifact: true });
    }
    let lower = (1.0 - s.sqrt()).clamp(0.0, 1.0);
    let upper = (0.5 * (1.0 - (2.0 * s - 1.0).sqrt())).clamp(0.0, 1.0);
    Ok(ConfinementBounds { lower, upper, noise_artifact: false })
}

/// Fitted line shape amplitude * Gamma / ((omega - omega0)^2 + Gamma^2).
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LorentzianFit {
    pub omega0: f64,
    pub gamma: f64,
    pub amplitude: f64,
    /// Sum of squared residuals over the fitted window.
    pub residual: f64,
}

/// Fits the Lorentzian to the spectral power |c|^2 over a window of bins on
/// each side of the first-order peak. The power of an exponentially damped
/// cosine is Lorentzian; its magnitude is not, so the power is what gets fit.
pub fn fit_lorentzian(spectrum: &Spectrum, half_window: usize) -> Result<LorentzianFit> {
    let peak = spectrum.peak().ok_or(Error::NoPeak)?;
    let half = spectrum.len() / 2;
    let lo = peak.index.saturating_sub(half_window).max(1);
    let hi = (peak.index + half_window).min(half);
    let omegas: Vec<f64> = (lo..=hi).map(|j| spectrum.freqs[j]).collect();
    let powers: Vec<f64> = (lo..=hi).map(|j| spectrum.coeffs[j].norm_sqr()).collect();
    if omegas.len() < 5 {
        return Err(Error::DatasetTooSmall(format!(
            "Lorentzian fit window has {} points, needs 5",
            omegas.len()
        )));
    }
    fit_lorentzian_samples(&omegas, &powers)
}

/// Least-squares Lorentzian fit to explicit (omega, value) samples via damped
/// Gauss-Newton; the first guess is taken from the tallest sample and its
/// half-height neighborhood.
pub fn fit_lorentzian_samples(omegas: &[f64], values: &[f64]) -> Result<LorentzianFit> {
    if omegas.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frequencies vs {} values",
            omegas.len(),
            values.len()
        )));
    }
    if omegas.len() < 5 {
        return Err(Error::DatasetTooSmall(format!(
            "Lorentzian fit needs 5 samples, got {}",
            omegas.len()
        )));
    }
    let peak_at = (0..values.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty samples");
    let y_peak = values[peak_at].max(f64::MIN_POSITIVE);
    let spacing = if omegas.len() > 1 { (omegas[1] - omegas[0]).abs() } else { 1.0 };
    let mut gamma = half_width_at_half_maximum(omegas, values, peak_at).max(0.5 * spacing);
    let mut omega0 = omegas[peak_at];
    let mut amplitude = y_peak * gamma;

    let mut damping = 1e-3;
    let mut residual = sum_sq_residual(omegas, values, omega0, gamma, amplitude);
    for iteration in 0..200 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&w, &y) in omegas.iter().zip(values) {
            let dw = w - omega0;
            let den = dw * dw + gamma * gamma;
            let model = amplitude * gamma / den;
            let r = model - y;
            let grad = [
                amplitude * gamma * 2.0 * dw / (den * den),
                amplitude * (dw * dw - gamma * gamma) / (den * den),
                gamma / den,
            ];
            for i in 0..3 {
                jtr[i] += grad[i] * r;
                for j in 0..3 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let step = match solve_damped_3x3(&jtj, &jtr, damping) {
            Some(s) => s,
            None => break,
        };
        let candidate =
            (omega0 - step[0], gamma - step[1], amplitude - step[2]);
        let accepted = candidate.1 > 0.0
            && sum_sq_residual(omegas, values, candidate.0, candidate.1, candidate.2) < residual;
        if accepted {
            omega0 = candidate.0;
            gamma = candidate.1;
            amplitude = candidate.2;
            residual = sum_sq_residual(omegas, values, omega0, gamma, amplitude);
            damping = (damping * 0.3).max(1e-12);
            let scale = omega0.abs().max(gamma.abs()).max(1.0);
            if (step[0].powi(2) + step[1].powi(2)).sqrt() < 1e-10 * scale {
                return Ok(LorentzianFit { omega0, gamma, amplitude, residual });
            }
        } else {
            damping *= 10.0;
            if damping > 1e12 {
                return Ok(LorentzianFit { omega0, gamma, amplitude, residual });
            }
        }
        if iteration == 199 {
            return Err(Error::FitDidNotConverge { iterations: 200, residual });
        }
    }
    Ok(LorentzianFit { omega0, gamma, amplitude, residual })
}

fn half_width_at_half_maximum(omegas: &[f64], values: &[f64], peak_at: usize) -> f64 {
    let half_height = values[peak_at] / 2.0;
    let mut right = None;
    for k in peak_at + 1..values.len() {
        if values[k] <= half_height {
            right = Some((omegas[k] - omegas[peak_at]).abs());
            break;
        }
    }
    let mut left = None;
    for k in (0..peak_at).rev() {
        if values[k] <= half_height {
            left = Some((omegas[peak_at] - omegas[k]).abs());
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => 0.5 * (l + r),
        (Some(w), None) | (None, Some(w)) => w,
        (None, None) => 0.0,
    }
}

fn sum_sq_residual(omegas: &[f64], values: &[f64], omega0: f64, gamma: f64, amplitude: f64) -> f64 {
    omegas
        .iter()
        .zip(values)
        .map(|(&w, &y)| {
            let dw = w - omega0;
            let r = amplitude * gamma / (dw * dw + gamma * gamma) - y;
            r * r
        })
        .sum()
}

pub(crate) fn solve_damped_3x3(jtj: &[[f64; 3]; 3], jtr: &[f64; 3], damping: f64) -> Option<[f64; 3]> {
    let mut a = *jtj;
    for i in 0..3 {
        a[i][i] += damping * jtj[i][i].max(1e-300);
    }
    let mut b = *jtr;
    for col in 0..3 {
        let pivot_row = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

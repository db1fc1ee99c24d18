//! Photodiode current synthesis: ground-truth AC signal plus explicitly
//! decomposed offset components (dark, ambient, reflection), so recovered
//! output can be compared against known truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physiological band of PPG/fNIRS fundamentals, Hz.
pub const PHYSIO_BAND: (f64, f64) = (0.05, 5.0);

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
    #[error("dt must be > 0, got {0}")]
    BadDt(f64),
    #[error("duration {duration} shorter than dt {dt}")]
    BadDuration { duration: f64, dt: f64 },
    #[error("negative amplitude: {0}")]
    NegativeAmplitude(&'static str),
    #[error("band [{f_lo}, {f_hi}] Hz invalid or outside Nyquist {nyquist} Hz")]
    BadBand { f_lo: f64, f_hi: f64, nyquist: f64 },
    #[error("series too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
}

/// Waveform family of the AC (physiological) component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum AcFamily {
    Sinusoid,
    /// Systolic + dicrotic Gaussian pulses per beat, zero-mean over a beat.
    SyntheticPpg {
        /// Dicrotic peak relative to the systolic peak.
        dicrotic_amplitude: f64,
        /// Dicrotic delay as a fraction of the beat period.
        dicrotic_delay: f64,
        /// Systolic Gaussian sigma as a fraction of the beat period.
        systolic_width: f64,
        /// Dicrotic Gaussian sigma as a fraction of the beat period.
        dicrotic_width: f64,
    },
    /// Low-frequency hemodynamic sinusoid mixture.
    FnirsSlow,
}

impl AcFamily {
    pub fn default_ppg() -> Self {
        AcFamily::SyntheticPpg {
            dicrotic_amplitude: 0.4,
            dicrotic_delay: 0.35,
            systolic_width: 0.045,
            dicrotic_width: 0.08,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcSignalSpec {
    pub family: AcFamily,
    /// Fundamental, Hz.
    pub f0: f64,
    /// Peak amplitude, amperes.
    pub amplitude_peak: f64,
}

/// One ambient-light step event: baseline becomes `baseline` at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub t: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbientSpec {
    pub baseline: f64,
    pub drift: f64,
    pub flicker_amplitude: f64,
    pub flicker_hz: f64,
    pub steps: Vec<StepEvent>,
}

impl Default for AmbientSpec {
    fn default() -> Self {
        Self { baseline: 0.0, drift: 0.0, flicker_amplitude: 0.0, flicker_hz: 50.0, steps: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentScenario {
    pub duration: f64,
    pub dt: f64,
    pub ac: AcSignalSpec,
    pub dark_current: f64,
    pub ambient: AmbientSpec,
    pub reflection_offset: f64,
    pub rng_seed: u64,
    pub noise_rms: f64,
}

impl PhotocurrentScenario {
    pub fn validate(&self) -> Result<Vec<String>, SignalError> {
        for (name, v) in [
            ("dt", self.dt),
            ("duration", self.duration),
            ("f0", self.ac.f0),
            ("amplitude_peak", self.ac.amplitude_peak),
            ("dark_current", self.dark_current),
            ("ambient.baseline", self.ambient.baseline),
            ("ambient.drift", self.ambient.drift),
            ("ambient.flicker_amplitude", self.ambient.flicker_amplitude),
            ("ambient.flicker_hz", self.ambient.flicker_hz),
            ("reflection_offset", self.reflection_offset),
            ("noise_rms", self.noise_rms),
        ] {
            if !v.is_finite() {
                return Err(SignalError::NonFinite(name));
            }
        }
        if self.dt <= 0.0 {
            return Err(SignalError::BadDt(self.dt));
        }
        if self.duration < self.dt {
            return Err(SignalError::BadDuration { duration: self.duration, dt: self.dt });
        }
        for (name, v) in [
            ("amplitude_peak", self.ac.amplitude_peak),
            ("dark_current", self.dark_current),
            ("flicker_amplitude", self.ambient.flicker_amplitude),
            ("reflection_offset", self.reflection_offset),
            ("noise_rms", self.noise_rms),
        ] {
            if v < 0.0 {
                return Err(SignalError::NegativeAmplitude(name));
            }
        }
        let mut warnings = Vec::new();
        if self.ac.amplitude_peak > 0.0
            && (self.ac.f0 < PHYSIO_BAND.0 || self.ac.f0 > PHYSIO_BAND.1)
        {
            warnings.push(format!(
                "ac fundamental {} Hz outside the physiological band [{}, {}] Hz",
                self.ac.f0, PHYSIO_BAND.0, PHYSIO_BAND.1
            ));
        }
        Ok(warnings)
    }

    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Per-component time series; `total[k]` is the sample-wise sum of the parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalParts {
    pub ac: Vec<f64>,
    pub dark: Vec<f64>,
    pub ambient: Vec<f64>,
    pub reflection: Vec<f64>,
    pub noise: Vec<f64>,
    pub total: Vec<f64>,
}

/// Evaluates the normalized AC waveform (unit peak, zero mean over a beat).
struct AcShape {
    family: AcFamily,
    /// Beat-mean of the raw shape, subtracted to make the waveform zero-mean.
    mean: f64,
    /// Scale mapping the mean-removed shape to unit peak.
    scale: f64,
}

impl AcShape {
    fn new(family: AcFamily) -> Self {
        match family {
            AcFamily::Sinusoid => Self { family, mean: 0.0, scale: 1.0 },
            _ => {
                // Numeric beat-mean and peak on a fine phase grid.
                const N: usize = 1 << 16;
                let mut mean = 0.0;
                for k in 0..N {
                    mean += raw_shape(family, (k as f64 + 0.5) / N as f64);
                }
                mean /= N as f64;
                let mut peak = 0.0f64;
                for k in 0..N {
                    let v = raw_shape(family, (k as f64 + 0.5) / N as f64) - mean;
                    peak = peak.max(v.abs());
                }
                Self { family, mean, scale: 1.0 / peak }
            }
        }
    }

    /// Unit-peak waveform at beat phase `phi` in [0, 1).
    fn eval(&self, phi: f64) -> f64 {
        match self.family {
            AcFamily::Sinusoid => (2.0 * std::f64::consts::PI * phi).sin(),
            _ => (raw_shape(self.family, phi) - self.mean) * self.scale,
        }
    }
}

fn raw_shape(family: AcFamily, phi: f64) -> f64 {
    match family {
        AcFamily::Sinusoid => (2.0 * std::f64::consts::PI * phi).sin(),
        AcFamily::SyntheticPpg {
            dicrotic_amplitude,
            dicrotic_delay,
            systolic_width,
            dicrotic_width,
        } => {
            let systolic_center = 0.3;
            let g = |c: f64, s: f64| (-((phi - c) * (phi - c)) / (2.0 * s * s)).exp();
            g(systolic_center, systolic_width)
                + dicrotic_amplitude * g(systolic_center + dicrotic_delay, dicrotic_width)
        }
        AcFamily::FnirsSlow => {
            let w = 2.0 * std::f64::consts::PI * phi;
            (w).sin() + 0.6 * (0.37 * w + 0.8).sin()
        }
    }
}

/// Synthesizes the photodiode current for `scenario`.
///
/// Deterministic given `rng_seed`; the returned parts sum exactly to `total`.
pub fn synthesize(scenario: &PhotocurrentScenario) -> Result<SignalParts, SignalError> {
    scenario.validate()?;
    let n = scenario.n_samples();
    let dt = scenario.dt;
    let shape = AcShape::new(scenario.ac.family);

    let mut steps = scenario.ambient.steps.clone();
    steps.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());

    let mut ac = Vec::with_capacity(n);
    let mut dark = Vec::with_capacity(n);
    let mut ambient = Vec::with_capacity(n);
    let mut reflection = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let noise_dist = if scenario.noise_rms > 0.0 {
        Some(Normal::new(0.0, scenario.noise_rms).expect("finite noise rms"))
    } else {
        None
    };

    for k in 0..n {
        let t = k as f64 * dt;
        let phi = (scenario.ac.f0 * t).fract();
        ac.push(scenario.ac.amplitude_peak * shape.eval(phi));
        dark.push(scenario.dark_current);

        let mut base = scenario.ambient.baseline;
        for step in &steps {
            if t >= step.t {
                base = step.baseline;
            }
        }
        let flicker = scenario.ambient.flicker_amplitude
            * (2.0 * std::f64::consts::PI * scenario.ambient.flicker_hz * t).sin();
        ambient.push(base + scenario.ambient.drift * t + flicker);

        reflection.push(scenario.reflection_offset);
        noise.push(match &noise_dist {
            Some(d) => d.sample(&mut rng),
            None => 0.0,
        });
    }

    let total = (0..n)
        .map(|k| ac[k] + dark[k] + ambient[k] + reflection[k] + noise[k])
        .collect();
    Ok(SignalParts { ac, dark, ambient, reflection, noise, total })
}

/// Power of `series` restricted to [f_lo, f_hi] Hz via periodogram summation.
pub fn band_power(series: &[f64], dt: f64, f_lo: f64, f_hi: f64) -> Result<f64, SignalError> {
    let nyquist = 0.5 / dt;
    if !(f_lo > 0.0) || !(f_hi > f_lo) || f_hi > nyquist {
        return Err(SignalError::BadBand { f_lo, f_hi, nyquist });
    }
    let need = (2.0 / (f_lo * dt)).ceil() as usize;
    if series.len() < need {
        return Err(SignalError::TooShort { need, got: series.len() });
    }
    Ok(periodogram_power(series, dt, |f| f >= f_lo && f <= f_hi))
}

/// Total AC power: all non-DC periodogram bins.
pub fn total_ac_power(series: &[f64], dt: f64) -> f64 {
    periodogram_power(series, dt, |f| f > 0.0)
}

fn periodogram_power(series: &[f64], dt: f64, keep: impl Fn(f64) -> bool) -> f64 {
    let n = series.len();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    let mut power = 0.0;
    for (k, x) in buf.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * df;
        if k == 0 || !keep(f) {
            continue;
        }
        // One-sided mean-square contribution of bin k.
        let two_sided = x.norm_sqr() / (n as f64 * n as f64);
        power += if k == 0 || (n % 2 == 0 && k == n / 2) { two_sided } else { 2.0 * two_sided };
    }
    power
}

//! Waveform synthesis.
//!
//! Envelopes are sampled at `t = k` (in dt) for `k = 0..d`. Gaussian-family
//! shapes are lifted with [`normalize`] so the sample one step before the
//! pulse would be zero.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cis, C64};
use crate::DT_NS;

pub const DEFAULT_DRAG_BETA: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum PulseError {
    #[error("amplitude {0} exceeds the unit bound")]
    Clipping(f64),
    #[error("normalization undefined: f(-1) = 1")]
    DegenerateNormalization,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Square,
    Gaussian,
    GaussianSquare,
    Drag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub amplitude: f64,
    pub duration: u64,
    #[serde(default)]
    pub sigma: f64,
    /// Plateau width of a Gaussian-Square pulse.
    #[serde(default)]
    pub width: u64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub phase: f64,
}

fn default_beta() -> f64 {
    DEFAULT_DRAG_BETA
}

impl ShapeSpec {
    pub fn square(amplitude: f64, duration: u64) -> Self {
        ShapeSpec {
            shape: Shape::Square,
            amplitude,
            duration,
            sigma: 0.0,
            width: 0,
            beta: 0.0,
            phase: 0.0,
        }
    }

    pub fn gaussian(amplitude: f64, duration: u64, sigma: f64) -> Self {
        ShapeSpec {
            shape: Shape::Gaussian,
            amplitude,
            duration,
            sigma,
            width: 0,
            beta: 0.0,
            phase: 0.0,
        }
    }

    pub fn gaussian_square(amplitude: f64, duration: u64, sigma: f64, width: u64) -> Self {
        ShapeSpec {
            shape: Shape::GaussianSquare,
            amplitude,
            duration,
            sigma,
            width,
            beta: 0.0,
            phase: 0.0,
        }
    }

    pub fn drag(amplitude: f64, duration: u64, sigma: f64, beta: f64) -> Self {
        ShapeSpec {
            shape: Shape::Drag,
            amplitude,
            duration,
            sigma,
            width: 0,
            beta,
            phase: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Rise-and-fall length of a Gaussian-Square pulse.
    pub fn risefall(&self) -> u64 {
        self.duration.saturating_sub(self.width)
    }

    pub fn center(&self) -> f64 {
        self.duration as f64 / 2.0
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        if !self.amplitude.is_finite() || self.amplitude.abs() > 1.0 {
            return Err(PulseError::Clipping(self.amplitude));
        }
        if self.duration == 0 {
            return Err(PulseError::InvalidShape("duration must be positive".into()));
        }
        match self.shape {
            Shape::Square => {}
            Shape::Gaussian | Shape::Drag | Shape::GaussianSquare => {
                if !(self.sigma > 0.0) || !self.sigma.is_finite() {
                    return Err(PulseError::InvalidShape(format!(
                        "sigma must be positive, got {}",
                        self.sigma
                    )));
                }
                if self.shape == Shape::GaussianSquare && self.width > self.duration {
                    return Err(PulseError::InvalidShape(format!(
                        "plateau width {} exceeds duration {}",
                        self.width, self.duration
                    )));
                }
            }
        }
        Ok(())
    }

    /// Un-normalized unit-height profile at continuous time `t`.
    fn profile(&self, t: f64) -> f64 {
        let g = |mu: f64| (-(t - mu).powi(2) / (2.0 * self.sigma * self.sigma)).exp();
        match self.shape {
            Shape::Square => 1.0,
            Shape::Gaussian | Shape::Drag => g(self.center()),
            Shape::GaussianSquare => {
                let rise = self.risefall() as f64 / 2.0;
                let fall = rise + self.width as f64;
                if t < rise {
                    g(rise)
                } else if t < fall {
                    1.0
                } else {
                    g(fall)
                }
            }
        }
    }

    /// Real in-phase envelope `f_I(t)` before the phase rotation, evaluated at
    /// continuous `t`.
    pub fn in_phase_at(&self, t: f64) -> Result<f64, PulseError> {
        if self.shape == Shape::Square {
            return Ok(self.amplitude);
        }
        let floor = self.profile(-1.0);
        Ok(self.amplitude * normalize_value(self.profile(t), floor)?)
    }

    /// Quadrature DRAG envelope `f_Q(t) = −((t − d/2)/σ²)·f_I(t)`, before β.
    pub fn quadrature_at(&self, t: f64) -> Result<f64, PulseError> {
        Ok(-((t - self.center()) / (self.sigma * self.sigma)) * self.in_phase_at(t)?)
    }
}

/// `N(f) = (f − f(−1)) / (1 − f(−1))` for a single value.
pub fn normalize_value(f: f64, f_minus_one: f64) -> Result<f64, PulseError> {
    let den = 1.0 - f_minus_one;
    if den.abs() < 1e-300 {
        return Err(PulseError::DegenerateNormalization);
    }
    Ok((f - f_minus_one) / den)
}

/// Applies `N` to samples of `f` at `t = 0..d`, given `f(−1)`.
pub fn normalize(samples: &[f64], f_minus_one: f64) -> Result<Vec<f64>, PulseError> {
    samples
        .iter()
        .map(|&f| normalize_value(f, f_minus_one))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<C64>,
    pub dt_ns: f64,
}

impl Waveform {
    pub fn zeros(duration: u64) -> Self {
        Waveform {
            samples: vec![C64::ZERO; duration as usize],
            dt_ns: DT_NS,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn in_phase(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.re).collect()
    }

    pub fn quadrature(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.im).collect()
    }

    /// Rotates every sample by `e^{iφ}`.
    pub fn rotated(&self, phi: f64) -> Waveform {
        let r = cis(phi);
        Waveform {
            samples: self.samples.iter().map(|s| s * r).collect(),
            dt_ns: self.dt_ns,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "I", "Q"])?;
        for (k, s) in self.samples.iter().enumerate() {
            w.write_record([k.to_string(), s.re.to_string(), s.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn synthesize(spec: &ShapeSpec) -> Result<Waveform, PulseError> {
    spec.validate()?;
    let rot = cis(spec.phase);
    let mut samples = Vec::with_capacity(spec.duration as usize);
    for k in 0..spec.duration {
        let t = k as f64;
        let i = spec.in_phase_at(t)?;
        let s = match spec.shape {
            Shape::Drag => C64::new(i, spec.beta * spec.quadrature_at(t)?),
            _ => C64::new(i, 0.0),
        } * rot;
        if s.norm() > 1.0 + 1e-12 {
            return Err(PulseError::Clipping(s.norm()));
        }
        samples.push(s);
    }
    Ok(Waveform {
        samples,
        dt_ns: DT_NS,
    })
}

/// Nominal rotation angle (rad) delivered by the in-phase envelope:
/// `4π · k · dt · Σ I`. A sample of amplitude `a` drives at angular rate
/// `4π·k·a`, so a constant amplitude `a` held for `t` seconds rotates by
/// `4π·k·a·t`.
pub fn pulse_area(w: &Waveform, rabi_coefficient_hz: f64) -> f64 {
    let sum: f64 = w.samples.iter().map(|s| s.re).sum();
    4.0 * PI * rabi_coefficient_hz * w.dt_ns * 1e-9 * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_is_flat() {
        let w = synthesize(&ShapeSpec::square(0.1, 8)).unwrap();
        assert_eq!(w.len(), 8);
        assert!(w.samples.iter().all(|s| *s == C64::new(0.1, 0.0)));
    }

    #[test]
    fn gaussian_peak_and_endpoints() {
        let w = synthesize(&ShapeSpec::gaussian(0.3, 120, 30.0)).unwrap();
        assert_eq!(w.samples[60].re, 0.3);
        let peak = 0.3;
        // Closed form: g(t) = exp(-(t-60)^2/1800), lifted by g(-1).
        let g = |t: f64| (-(t - 60.0f64).powi(2) / 1800.0).exp();
        let expected0 = (g(0.0) - g(-1.0)) / (1.0 - g(-1.0));
        assert!((w.samples[0].re / peak - expected0).abs() < 1e-15);
        let expected119 = (g(119.0) - g(-1.0)) / (1.0 - g(-1.0));
        assert!((w.samples[119].re / peak - expected119).abs() < 1e-15);
        assert!(w.samples[0].re < w.samples[119].re);
    }

    #[test]
    fn normalization_maps_floor_to_zero() {
        assert_eq!(normalize(&[1.0, 0.25], 0.25).unwrap(), vec![1.0, 0.0]);
        assert_eq!(
            normalize_value(0.5, 1.0),
            Err(PulseError::DegenerateNormalization)
        );
    }

    #[test]
    fn drag_quadrature_is_antisymmetric() {
        let spec = ShapeSpec::drag(0.2, 64, 16.0, 0.5);
        let w = synthesize(&spec).unwrap();
        assert_eq!(w.samples[32].im, 0.0);
        for k in 1..32 {
            assert!((w.samples[32 - k].im + w.samples[32 + k].im).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_square_plateau() {
        let spec = ShapeSpec::gaussian_square(0.4, 100, 8.0, 60);
        let w = synthesize(&spec).unwrap();
        for k in 20..80 {
            assert_eq!(w.samples[k].re, 0.4);
        }
        assert!(w.samples[0].re < w.samples[19].re);
        assert!(w.samples[99].re < w.samples[80].re);
    }

    #[test]
    fn errors() {
        assert_eq!(
            synthesize(&ShapeSpec::square(1.5, 8)),
            Err(PulseError::Clipping(1.5))
        );
        assert!(synthesize(&ShapeSpec::gaussian(0.5, 64, 0.0)).is_err());
        assert!(synthesize(&ShapeSpec::gaussian_square(0.5, 64, 4.0, 65)).is_err());
        // A huge β drives the quadrature past the unit circle.
        assert!(matches!(
            synthesize(&ShapeSpec::drag(0.9, 64, 4.0, 50.0)),
            Err(PulseError::Clipping(_))
        ));
    }

    #[test]
    fn area_is_linear() {
        let k = 105e6;
        assert_eq!(pulse_area(&Waveform::zeros(16), k), 0.0);
        let a = pulse_area(&synthesize(&ShapeSpec::gaussian(0.1, 64, 20.0)).unwrap(), k);
        let b = pulse_area(&synthesize(&ShapeSpec::gaussian(0.2, 64, 20.0)).unwrap(), k);
        assert_eq!(2.0 * a, b);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        synthesize(&ShapeSpec::square(0.5, 2))
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,I,Q\n0,0.5,0\n1,0.5,0\n"
        );
    }
}

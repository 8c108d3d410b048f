//! Catalog of gate implementations keyed by duration.
//!
//! In static mode every qubit carries a pre-calibrated Sx pulse at each
//! duration of a fixed list. In dynamic mode an `Rx(θ)` pulse is generated at
//! compile time for any multiple of 8 dt in the angle-scaled range, with its
//! amplitude read off the qubit's Rabi table.

mod calibrate;

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::GateKind;
use crate::pulse::{PulseError, Shape, ShapeSpec, DEFAULT_DRAG_BETA};
use crate::sim::SimError;
use crate::DT_NS;

pub use calibrate::{
    build_dynamic_gateset, build_static_gateset, calibrate_rabi, dynamic_amplitude, fine_tune,
    fit_rabi, interpolate_amplitude, CalibrationConfig, FineTuned, Interpolated, RabiFit,
    RabiPoint,
};

/// Durations of the reference static gate set.
pub const STATIC_DURATIONS: [u64; 6] = [32, 48, 64, 120, 256, 512];
/// Single default duration of the echoed cross-resonance gate.
pub const ECR_DURATION: u64 = 1320;
/// Dynamic durations are multiples of this many dt.
pub const DYNAMIC_GRANULARITY: u64 = 8;
/// Lower edge of the σ(d) rule's domain.
pub const SIGMA_DOMAIN_MIN: f64 = 17.36;

#[derive(Debug, Error)]
pub enum GateSetError {
    #[error("σ(d) is undefined for d = {0} (needs d > {SIGMA_DOMAIN_MIN})")]
    SigmaDomain(f64),
    #[error("configuration: {0}")]
    Config(String),
    #[error("no implementation of {kind} on qubit {qubit}")]
    Missing { kind: GateKind, qubit: usize },
    #[error("rabi fit: {0}")]
    Fit(String),
    #[error("θ = {theta} at {duration} dt needs amplitude {amplitude} > 1")]
    Infeasible {
        theta: f64,
        duration: u64,
        amplitude: f64,
    },
    #[error("calibration failed: best fidelity {best} below floor {floor}")]
    CalibrationFailure { best: f64, floor: f64 },
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// `σ(d) = d·(exp(−(d − 68.51)/17.19) + 1/5)`, in dt.
pub fn sigma_of_duration(d: f64) -> Result<f64, GateSetError> {
    if !(d > SIGMA_DOMAIN_MIN) {
        return Err(GateSetError::SigmaDomain(d));
    }
    Ok(d * ((-(d - 68.51) / 17.19).exp() + 0.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Dynamic,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Mode::Static),
            "dynamic" => Ok(Mode::Dynamic),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationPolicy {
    pub mode: Mode,
    /// Bounds for a π/2 rotation; dynamic mode scales them by `|θ|/(π/2)`.
    pub min_dt: u64,
    pub max_dt: u64,
    /// Candidate list used in static mode.
    pub static_durations: Vec<u64>,
}

impl DurationPolicy {
    pub fn static_mode(min_dt: u64, max_dt: u64) -> Self {
        DurationPolicy {
            mode: Mode::Static,
            min_dt,
            max_dt,
            static_durations: STATIC_DURATIONS.to_vec(),
        }
    }

    pub fn dynamic_mode(min_dt: u64, max_dt: u64) -> Self {
        DurationPolicy {
            mode: Mode::Dynamic,
            min_dt,
            max_dt,
            static_durations: STATIC_DURATIONS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), GateSetError> {
        if self.min_dt > self.max_dt {
            return Err(GateSetError::Config(format!(
                "min {} > max {}",
                self.min_dt, self.max_dt
            )));
        }
        if self.min_dt == 0 {
            return Err(GateSetError::Config(
                "minimum duration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Allowed durations for a single-qubit rotation (`kind`, `angle`), ascending.
pub fn allowed_durations(
    kind: GateKind,
    angle: f64,
    policy: &DurationPolicy,
) -> Result<Vec<u64>, GateSetError> {
    policy.validate()?;
    let out: Vec<u64> = match kind {
        GateKind::Ecr => vec![ECR_DURATION],
        GateKind::Measure | GateKind::Barrier => vec![0],
        GateKind::Rz => vec![0],
        GateKind::U3 => {
            return Err(GateSetError::Config(
                "u3 must be decomposed before scheduling".into(),
            ));
        }
        GateKind::Sx | GateKind::SxDg | GateKind::Rx => match policy.mode {
            Mode::Static => {
                if kind == GateKind::Rx {
                    return Err(GateSetError::Config(
                        "static gate set has no rx pulse".into(),
                    ));
                }
                let mut v: Vec<u64> = policy
                    .static_durations
                    .iter()
                    .copied()
                    .filter(|d| (policy.min_dt..=policy.max_dt).contains(d))
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            Mode::Dynamic => {
                let theta = if kind == GateKind::Rx {
                    angle.abs()
                } else {
                    FRAC_PI_2
                };
                let scale = theta / FRAC_PI_2;
                let lo = (policy.min_dt as f64 * scale - 1e-9).ceil().max(1.0) as u64;
                let hi = (policy.max_dt as f64 * scale + 1e-9).floor() as u64;
                let g = DYNAMIC_GRANULARITY;
                let first = lo.div_ceil(g) * g;
                (first..=hi).step_by(g as usize).collect()
            }
        },
    };
    if out.is_empty() {
        return Err(GateSetError::Config(format!(
            "no allowed duration for {kind}({angle}) within [{}, {}]",
            policy.min_dt, policy.max_dt
        )));
    }
    Ok(out)
}

/// Smallest allowed duration strictly above `current`, or `current` if none.
pub fn next_duration(allowed: &[u64], current: u64) -> u64 {
    allowed
        .iter()
        .copied()
        .find(|&d| d > current)
        .unwrap_or(current)
}

/// One calibrated static pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateImpl {
    pub mode: Mode,
    pub qubit: usize,
    pub kind: GateKind,
    pub angle: f64,
    pub duration_dt: u64,
    pub sigma: f64,
    pub amplitude: f64,
    pub fidelity: Option<f64>,
}

/// `(amplitude, Ω)` samples of one qubit's Rabi response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiTable {
    pub qubit: usize,
    pub points: Vec<RabiPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSet {
    pub policy: DurationPolicy,
    pub width: usize,
    pub shape: Shape,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub ecr_duration: u64,
    pub dt_ns: f64,
    #[serde(rename = "rows")]
    pub impls: Vec<GateImpl>,
    pub rabi: Vec<RabiTable>,
}

fn default_beta() -> f64 {
    DEFAULT_DRAG_BETA
}

impl GateSet {
    /// An uncalibrated set whose amplitudes follow the linear response
    /// `Ω = k·A` exactly. Useful for scheduling without simulation.
    pub fn nominal(
        policy: DurationPolicy,
        width: usize,
        rabi_coefficient_hz: f64,
    ) -> Result<Self, GateSetError> {
        policy.validate()?;
        let rabi: Vec<RabiTable> = (0..width)
            .map(|q| RabiTable {
                qubit: q,
                points: [1e-3, 1.0]
                    .iter()
                    .map(|&a| RabiPoint {
                        amplitude: a,
                        omega_hz: rabi_coefficient_hz * a,
                    })
                    .collect(),
            })
            .collect();
        let mut gs = GateSet {
            policy,
            width,
            shape: Shape::Gaussian,
            beta: DEFAULT_DRAG_BETA,
            ecr_duration: ECR_DURATION,
            dt_ns: DT_NS,
            impls: Vec::new(),
            rabi,
        };
        if gs.policy.mode == Mode::Static {
            for q in 0..width {
                for d in allowed_durations(GateKind::Sx, FRAC_PI_2, &gs.policy)? {
                    let spec = gs.rotation_spec(q, FRAC_PI_2, d)?;
                    gs.impls.push(GateImpl {
                        mode: Mode::Static,
                        qubit: q,
                        kind: GateKind::Sx,
                        angle: FRAC_PI_2,
                        duration_dt: d,
                        sigma: spec.sigma,
                        amplitude: spec.amplitude,
                        fidelity: None,
                    });
                }
            }
        }
        Ok(gs)
    }

    pub fn mode(&self) -> Mode {
        self.policy.mode
    }

    /// Same implementations, durations clipped to `[min_dt, max_dt]`.
    pub fn with_bounds(&self, min_dt: u64, max_dt: u64) -> Result<Self, GateSetError> {
        let mut gs = self.clone();
        gs.policy.min_dt = min_dt;
        gs.policy.max_dt = max_dt;
        gs.policy.validate()?;
        if gs.mode() == Mode::Static {
            gs.impls
                .retain(|i| (min_dt..=max_dt).contains(&i.duration_dt));
        }
        Ok(gs)
    }

    /// Allowed durations for `kind` on `qubit`, ascending.
    pub fn durations(
        &self,
        qubit: usize,
        kind: GateKind,
        angle: f64,
    ) -> Result<Vec<u64>, GateSetError> {
        match kind {
            GateKind::Ecr => Ok(vec![self.ecr_duration]),
            GateKind::Sx | GateKind::SxDg if self.mode() == Mode::Static => {
                let mut v: Vec<u64> = self
                    .impls
                    .iter()
                    .filter(|i| i.qubit == qubit && i.kind == GateKind::Sx)
                    .map(|i| i.duration_dt)
                    .filter(|d| (self.policy.min_dt..=self.policy.max_dt).contains(d))
                    .collect();
                v.sort_unstable();
                v.dedup();
                if v.is_empty() {
                    return Err(GateSetError::Missing { kind, qubit });
                }
                Ok(v)
            }
            _ => allowed_durations(kind, angle, &self.policy),
        }
    }

    pub fn min_duration(
        &self,
        qubit: usize,
        kind: GateKind,
        angle: f64,
    ) -> Result<u64, GateSetError> {
        Ok(self.durations(qubit, kind, angle)?[0])
    }

    pub fn max_duration(
        &self,
        qubit: usize,
        kind: GateKind,
        angle: f64,
    ) -> Result<u64, GateSetError> {
        Ok(*self
            .durations(qubit, kind, angle)?
            .last()
            .expect("non-empty"))
    }

    pub fn next_duration(
        &self,
        qubit: usize,
        kind: GateKind,
        angle: f64,
        current: u64,
    ) -> Result<u64, GateSetError> {
        Ok(next_duration(&self.durations(qubit, kind, angle)?, current))
    }

    pub fn rabi_table(&self, qubit: usize) -> Result<&[RabiPoint], GateSetError> {
        self.rabi
            .iter()
            .find(|t| t.qubit == qubit)
            .map(|t| t.points.as_slice())
            .ok_or_else(|| GateSetError::Config(format!("no Rabi table for qubit {qubit}")))
    }

    /// Envelope width for a rotation of `|θ|` held for `d` dt: the π/2 rule
    /// stretched by `|θ|/(π/2)`.
    pub fn sigma_for(&self, theta: f64, d: u64) -> Result<f64, GateSetError> {
        match self.mode() {
            Mode::Static => sigma_of_duration(d as f64),
            Mode::Dynamic => {
                let scale = theta.abs() / FRAC_PI_2;
                if scale == 0.0 {
                    return sigma_of_duration(d as f64);
                }
                Ok(scale * sigma_of_duration(d as f64 / scale)?)
            }
        }
    }

    /// Unit-amplitude envelope at the policy's shape.
    pub fn envelope(&self, theta: f64, d: u64) -> Result<ShapeSpec, GateSetError> {
        let sigma = self.sigma_for(theta, d)?;
        Ok(match self.shape {
            Shape::Drag => ShapeSpec::drag(1.0, d, sigma, self.beta),
            Shape::Square => ShapeSpec::square(1.0, d),
            Shape::GaussianSquare => ShapeSpec::gaussian_square(1.0, d, sigma, 0),
            Shape::Gaussian => ShapeSpec::gaussian(1.0, d, sigma),
        })
    }

    /// Zero-phase waveform for a rotation of `θ ≥ 0` about x on `qubit` at `d` dt.
    pub fn rotation_spec(
        &self,
        qubit: usize,
        theta: f64,
        d: u64,
    ) -> Result<ShapeSpec, GateSetError> {
        if self.mode() == Mode::Static {
            if let Some(i) = self
                .impls
                .iter()
                .find(|i| i.qubit == qubit && i.kind == GateKind::Sx && i.duration_dt == d)
            {
                return Ok(self.envelope(theta, d)?.with_amplitude(i.amplitude));
            }
        }
        let env = self.envelope(theta, d)?;
        let amplitude = dynamic_amplitude(self, qubit, theta, d)?;
        Ok(env.with_amplitude(amplitude))
    }

    /// Waveform realising a scheduled pulse gate. Sx† reuses the Sx waveform;
    /// the simulator adds the π phase.
    pub fn pulse_spec(
        &self,
        qubit: usize,
        kind: GateKind,
        angle: f64,
        d: u64,
    ) -> Result<ShapeSpec, GateSetError> {
        match kind {
            GateKind::Sx | GateKind::SxDg => self.rotation_spec(qubit, FRAC_PI_2, d),
            GateKind::Rx => self.rotation_spec(qubit, angle.abs(), d),
            _ => Err(GateSetError::Missing { kind, qubit }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gate set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let gs: GateSet = serde_json::from_str(text)?;
        gs.policy.validate()?;
        Ok(gs)
    }

    pub fn load(path: &Path) -> Result<Self, crate::Error> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

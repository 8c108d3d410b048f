//! Three-level density-matrix simulator.
//!
//! Each qubit is a transmon truncated to `{|0⟩, |1⟩, |2⟩}`. Drive pulses are
//! propagated sample by sample under
//!
//! ```text
//! H = 2π·α·|2⟩⟨2| + (Ω/2)·(s*·(|0⟩⟨1| + √2·|1⟩⟨2|) + h.c.),   Ω = 4π·k
//! ```
//!
//! with `s = I + iQ` the complex sample and `k` the Rabi coefficient. Decay is
//! applied per gate or idle segment as the exact solution of a Lindblad
//! generator with amplitude damping down the ladder and pure dephasing.

mod channel;
mod engine;

use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c64, C64};
use crate::pulse::Waveform;
use crate::DT_NS;

pub use channel::{choi_matrix, decoherence, is_positive_semidefinite, min_eigenvalue, Superop};
pub use engine::{
    ecr_unitary_qutrit, leakage_population, qubit_block, run_schedule, subspace_fidelity,
    GateModel, SimOutcome, Simulator, StateOp,
};

/// Widest register the dense simulator accepts.
pub const MAX_WIDTH: usize = 3;

pub const DEFAULT_T1_NS: f64 = 180_000.0;
pub const DEFAULT_T2_NS: f64 = 120_000.0;
pub const DEFAULT_ANHARMONICITY_HZ: f64 = -330e6;
pub const DEFAULT_RABI_COEFFICIENT_HZ: f64 = 105e6;
pub const DEFAULT_ECR_FIDELITY: f64 = 0.99;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("noise model: {0}")]
    Config(String),
    #[error("register of {0} qubits exceeds the simulator limit of {MAX_WIDTH}")]
    WidthExceeded(usize),
    #[error("overlapping operations on qubit {qubit} at t={at} dt")]
    Overlap { qubit: usize, at: u64 },
    #[error("operation {0} needs a waveform for the pulse gate model")]
    MissingWaveform(usize),
    #[error("state lost physicality: {0}")]
    Unphysical(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Pulse(#[from] crate::pulse::PulseError),
}

impl SimError {
    pub fn is_config(&self) -> bool {
        matches!(self, SimError::Config(_) | SimError::WidthExceeded(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// `None` disables amplitude damping.
    pub t1_ns: Option<f64>,
    /// `None` disables dephasing beyond the T1 contribution.
    pub t2_ns: Option<f64>,
    #[serde(default = "default_alpha")]
    pub anharmonicity_hz: f64,
    #[serde(default = "default_rabi")]
    pub rabi_coefficient_hz: f64,
}

fn default_alpha() -> f64 {
    DEFAULT_ANHARMONICITY_HZ
}

fn default_rabi() -> f64 {
    DEFAULT_RABI_COEFFICIENT_HZ
}

fn default_dt() -> f64 {
    DT_NS
}

fn default_ecr_fidelity() -> f64 {
    DEFAULT_ECR_FIDELITY
}

impl Default for QubitParams {
    fn default() -> Self {
        QubitParams {
            t1_ns: Some(DEFAULT_T1_NS),
            t2_ns: Some(DEFAULT_T2_NS),
            anharmonicity_hz: DEFAULT_ANHARMONICITY_HZ,
            rabi_coefficient_hz: DEFAULT_RABI_COEFFICIENT_HZ,
        }
    }
}

impl QubitParams {
    pub fn noiseless() -> Self {
        QubitParams {
            t1_ns: None,
            t2_ns: None,
            ..Default::default()
        }
    }

    /// Amplitude-damping rate in 1/ns.
    pub fn gamma1(&self) -> f64 {
        self.t1_ns.map_or(0.0, |t| 1.0 / t)
    }

    /// Pure-dephasing rate `1/T2 − 1/(2·T1)` in 1/ns.
    pub fn gamma_phi(&self) -> f64 {
        match self.t2_ns {
            Some(t2) => 1.0 / t2 - 0.5 * self.gamma1(),
            None => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, t) in [("T1", self.t1_ns), ("T2", self.t2_ns)] {
            if let Some(t) = t {
                if !(t > 0.0) || !t.is_finite() {
                    return Err(SimError::Config(format!(
                        "{name} must be positive, got {t}"
                    )));
                }
            }
        }
        if let Some(t2) = self.t2_ns {
            let limit = self.t1_ns.map_or(f64::INFINITY, |t1| 2.0 * t1);
            if t2 > limit {
                return Err(SimError::Config(format!(
                    "T2 = {t2} ns exceeds 2·T1 = {limit} ns"
                )));
            }
        }
        if self.anharmonicity_hz == 0.0 || !self.anharmonicity_hz.is_finite() {
            return Err(SimError::Config(
                "anharmonicity must be finite and nonzero".into(),
            ));
        }
        if !(self.rabi_coefficient_hz > 0.0) {
            return Err(SimError::Config("rabi coefficient must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// One entry per qubit; a single entry applies to every qubit.
    pub qubits: Vec<QubitParams>,
    #[serde(default = "default_ecr_fidelity")]
    pub ecr_fidelity: f64,
    #[serde(default = "default_dt")]
    pub dt_ns: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            qubits: vec![QubitParams::default()],
            ecr_fidelity: DEFAULT_ECR_FIDELITY,
            dt_ns: DT_NS,
        }
    }
}

impl NoiseModel {
    pub fn uniform(params: QubitParams, ecr_fidelity: f64) -> Self {
        NoiseModel {
            qubits: vec![params],
            ecr_fidelity,
            dt_ns: DT_NS,
        }
    }

    pub fn noiseless() -> Self {
        NoiseModel::uniform(QubitParams::noiseless(), 1.0)
    }

    pub fn is_noiseless(&self) -> bool {
        self.ecr_fidelity == 1.0
            && self
                .qubits
                .iter()
                .all(|q| q.t1_ns.is_none() && q.t2_ns.is_none())
    }

    pub fn qubit(&self, q: usize) -> &QubitParams {
        if self.qubits.len() == 1 {
            &self.qubits[0]
        } else {
            &self.qubits[q]
        }
    }

    pub fn validate(&self, width: usize) -> Result<(), SimError> {
        if self.qubits.is_empty() {
            return Err(SimError::Config("noise model lists no qubits".into()));
        }
        if self.qubits.len() != 1 && self.qubits.len() < width {
            return Err(SimError::Config(format!(
                "noise model covers {} qubits, circuit needs {width}",
                self.qubits.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.ecr_fidelity) {
            return Err(SimError::Config(format!(
                "ecr_fidelity {} outside [0, 1]",
                self.ecr_fidelity
            )));
        }
        if !(self.dt_ns > 0.0) {
            return Err(SimError::Config("dt must be positive".into()));
        }
        self.qubits.iter().try_for_each(QubitParams::validate)
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let nm: NoiseModel = serde_json::from_str(text)?;
        nm.validate(0)?;
        Ok(nm)
    }

    pub fn load(path: &Path) -> Result<Self, crate::Error> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("noise model serializes")
    }
}

/// Drive Hamiltonian for one sample, in rad/s.
pub fn drive_hamiltonian(sample: C64, p: &QubitParams) -> Matrix3<C64> {
    let omega = 4.0 * std::f64::consts::PI * p.rabi_coefficient_hz;
    let a = sample.conj() * (omega / 2.0);
    let s2 = std::f64::consts::SQRT_2;
    let z = C64::ZERO;
    Matrix3::new(
        z,
        a,
        z,
        a.conj(),
        z,
        a * s2,
        z,
        a.conj() * s2,
        c64(2.0 * std::f64::consts::PI * p.anharmonicity_hz, 0.0),
    )
}

/// `exp(−i·H·t)` for Hermitian `H`, through its eigendecomposition.
pub fn evolve(h: &Matrix3<C64>, t: f64) -> Matrix3<C64> {
    let eig = SymmetricEigen::new(*h);
    let v = eig.eigenvectors;
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| crate::linalg::cis(-l * t)));
    v * d * v.adjoint()
}

/// Product of the per-sample propagators `exp(−i·H_k·dt)`.
pub fn propagate_waveform(w: &Waveform, p: &QubitParams) -> Matrix3<C64> {
    let dt_s = w.dt_ns * 1e-9;
    let mut u = Matrix3::<C64>::identity();
    let mut last: Option<(C64, Matrix3<C64>)> = None;
    for &s in &w.samples {
        let step = match last {
            Some((prev, m)) if prev == s => m,
            _ => {
                let m = evolve(&drive_hamiltonian(s, p), dt_s);
                last = Some((s, m));
                m
            }
        };
        u = step * u;
    }
    u
}

/// `F(φ) = diag(1, e^{iφ}, e^{2iφ})`; conjugating a zero-phase propagator by
/// it yields the propagator of the same waveform rotated by `e^{iφ}`.
pub fn frame(phi: f64) -> Matrix3<C64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(
        C64::ONE,
        crate::linalg::cis(phi),
        crate::linalg::cis(2.0 * phi),
    ))
}

pub fn with_phase(u0: &Matrix3<C64>, phi: f64) -> Matrix3<C64> {
    let f = frame(phi);
    f * u0 * f.adjoint()
}

/// One Rabi trace: times in seconds and the ground-state population.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiTrace {
    pub amplitude: f64,
    pub times_s: Vec<f64>,
    pub p0: Vec<f64>,
}

/// Coherent square-pulse Rabi experiment. Each window is a nominal 4π
/// rotation at the given amplitude unless `window_dt` fixes it; `samples`
/// points are spread evenly over `[0, window]`.
pub fn simulate_rabi(
    amplitudes: &[f64],
    window_dt: Option<u64>,
    samples: usize,
    p: &QubitParams,
    dt_ns: f64,
) -> Vec<RabiTrace> {
    amplitudes
        .iter()
        .map(|&a| {
            let window_s = match window_dt {
                Some(w) => w as f64 * dt_ns * 1e-9,
                None if a != 0.0 => 1.0 / (p.rabi_coefficient_hz * a.abs()),
                None => 1000.0 * dt_ns * 1e-9,
            };
            let h = drive_hamiltonian(c64(a, 0.0), p);
            let eig = SymmetricEigen::new(h);
            let v = eig.eigenvectors;
            let times_s: Vec<f64> = (0..samples)
                .map(|j| window_s * j as f64 / (samples.max(2) - 1) as f64)
                .collect();
            let p0 = times_s
                .iter()
                .map(|&t| {
                    // ⟨0|U(t)|0⟩ = Σ_k |v_0k|² e^{−iλ_k t}
                    let amp: C64 = (0..3)
                        .map(|k| crate::linalg::cis(-eig.eigenvalues[k] * t) * v[(0, k)].norm_sqr())
                        .sum();
                    amp.norm_sqr()
                })
                .collect();
            RabiTrace {
                amplitude: a,
                times_s,
                p0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, equal_up_to_phase, to_dynamic};
    use crate::pulse::{synthesize, ShapeSpec};

    #[test]
    fn zero_waveform_is_identity_up_to_level_two_phase() {
        let u = propagate_waveform(&Waveform::zeros(40), &QubitParams::default());
        assert!((u[(0, 0)] - C64::ONE).norm() < 1e-14);
        assert!((u[(1, 1)] - C64::ONE).norm() < 1e-14);
        assert!((u[(2, 2)].norm() - 1.0).abs() < 1e-12);
        assert!(u[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn propagator_is_unitary() {
        let spec = ShapeSpec::drag(0.3, 48, 12.0, 0.4).with_phase(0.7);
        let u = propagate_waveform(&synthesize(&spec).unwrap(), &QubitParams::default());
        assert!((u.adjoint() * u - Matrix3::identity()).norm() < 1e-10);
    }

    #[test]
    fn phase_conjugation_matches_rotated_samples() {
        let p = QubitParams::default();
        let spec = ShapeSpec::drag(0.2, 32, 8.0, 0.3);
        let u0 = propagate_waveform(&synthesize(&spec).unwrap(), &p);
        let u1 = propagate_waveform(&synthesize(&spec.clone().with_phase(1.1)).unwrap(), &p);
        assert!((with_phase(&u0, 1.1) - u1).norm() < 1e-12);
    }

    #[test]
    fn two_level_limit_square_pulse_is_rx() {
        // With a huge anharmonicity the qubit block of a resonant square pulse
        // is a plain x rotation of angle 4π·k·A·t.
        let p = QubitParams {
            anharmonicity_hz: -1e13,
            ..QubitParams::default()
        };
        let a = 0.01;
        let d = 200u64;
        let theta =
            4.0 * std::f64::consts::PI * p.rabi_coefficient_hz * a * d as f64 * DT_NS * 1e-9;
        let u = propagate_waveform(&synthesize(&ShapeSpec::square(a, d)).unwrap(), &p);
        let block = to_dynamic(&qubit_block(&u));
        assert!(equal_up_to_phase(
            &block,
            &to_dynamic(&linalg::rx(theta)),
            1e-6
        ));
    }

    #[test]
    fn noise_model_validation() {
        let bad = QubitParams {
            t1_ns: Some(10.0),
            t2_ns: Some(30.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let zero_alpha = QubitParams {
            anharmonicity_hz: 0.0,
            ..Default::default()
        };
        assert!(zero_alpha.validate().is_err());
        assert!(NoiseModel::default().validate(3).is_ok());
        let back = NoiseModel::from_json(&NoiseModel::default().to_json()).unwrap();
        assert_eq!(back, NoiseModel::default());
        let partial =
            NoiseModel::from_json(r#"{"qubits":[{"t1_ns":1000.0,"t2_ns":null}]}"#).unwrap();
        assert_eq!(partial.ecr_fidelity, DEFAULT_ECR_FIDELITY);
        assert_eq!(partial.qubit(2).anharmonicity_hz, DEFAULT_ANHARMONICITY_HZ);
    }

    #[test]
    fn rabi_zero_amplitude_is_flat() {
        let tr = simulate_rabi(&[0.0], None, 16, &QubitParams::default(), DT_NS);
        assert!(tr[0].p0.iter().all(|&y| (y - 1.0).abs() < 1e-14));
    }
}

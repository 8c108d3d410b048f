//! Gate-level circuit IR.
//!
//! A [`Circuit`] is an ordered gate list over indexed qubits. Program order is
//! authoritative: the dependency graph is derived from it by taking, for each
//! gate, the last earlier gate on each of its operand qubits.

mod decompose;
mod parse;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix};

pub use decompose::{
    circuit_unitary, decompose_dynamic, decompose_static, dynamic_sequence, fuse_single_qubit,
    gate_unitary, merge_virtual_z, static_sequence,
};
pub use parse::{parse_circuit, parse_circuit_json, parse_circuit_text};

/// Angles this close to a multiple of π/2 are snapped onto it.
pub const ANGLE_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGate { line: usize, kind: String },
    #[error("line {line}: negative qubit index {index}")]
    NegativeQubit { line: usize, index: i64 },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("circuit json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    U3,
    Rz,
    Sx,
    SxDg,
    Rx,
    Ecr,
    Measure,
    Barrier,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::U3 => "u3",
            GateKind::Rz => "rz",
            GateKind::Sx => "sx",
            GateKind::SxDg => "sxdg",
            GateKind::Rx => "rx",
            GateKind::Ecr => "ecr",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "u3" | "u" => GateKind::U3,
            "rz" => GateKind::Rz,
            "sx" => GateKind::Sx,
            "sxdg" => GateKind::SxDg,
            "rx" => GateKind::Rx,
            "ecr" => GateKind::Ecr,
            "measure" => GateKind::Measure,
            "barrier" => GateKind::Barrier,
            _ => return None,
        })
    }

    pub fn angle_count(self) -> usize {
        match self {
            GateKind::U3 => 3,
            GateKind::Rz | GateKind::Rx => 1,
            _ => 0,
        }
    }

    /// `None` means any positive number of qubits.
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::Ecr => Some(2),
            GateKind::Barrier => None,
            _ => Some(1),
        }
    }

    /// Virtual gates are frame changes and never occupy the drive line.
    pub fn is_virtual(self) -> bool {
        self == GateKind::Rz
    }

    /// Gates realised by a single-qubit drive pulse.
    pub fn is_pulse(self) -> bool {
        matches!(self, GateKind::Sx | GateKind::SxDg | GateKind::Rx)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub id: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    /// `(θ, φ, λ)` for U3, the single rotation angle for Rz/Rx, empty otherwise.
    pub angles: Vec<f64>,
}

impl Gate {
    /// Nominal rotation angle of the pulse realising this gate, used as the
    /// scheduling priority numerator.
    pub fn rotation(&self) -> f64 {
        match self.kind {
            GateKind::Sx | GateKind::SxDg => FRAC_PI_2,
            GateKind::Rx => self.angles[0].abs(),
            GateKind::U3 => self.angles[0].abs(),
            GateKind::Ecr => FRAC_PI_2,
            _ => 0.0,
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        self.qubits.len() == 1
    }
}

/// Snaps near-multiples of π/2 and wraps into `(−π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let w = linalg::wrap_angle(a);
    let k = (w / FRAC_PI_2).round();
    if (w - k * FRAC_PI_2).abs() < ANGLE_SNAP_TOL {
        let snapped = k * FRAC_PI_2;
        if snapped <= -PI {
            PI
        } else {
            snapped
        }
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub width: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            gates: Vec::new(),
        }
    }

    /// Appends a validated gate and returns its id. Angles are normalised.
    pub fn push(
        &mut self,
        kind: GateKind,
        qubits: &[usize],
        angles: &[f64],
    ) -> Result<usize, CircuitError> {
        validate(kind, qubits, angles, self.width)?;
        let id = self.gates.len();
        self.gates.push(Gate {
            id,
            kind,
            qubits: qubits.to_vec(),
            angles: angles.iter().map(|&a| normalize_angle(a)).collect(),
        });
        Ok(id)
    }

    pub fn u3(&mut self, q: usize, theta: f64, phi: f64, lambda: f64) -> &mut Self {
        self.push(GateKind::U3, &[q], &[theta, phi, lambda])
            .expect("valid u3");
        self
    }

    pub fn rz(&mut self, q: usize, lambda: f64) -> &mut Self {
        self.push(GateKind::Rz, &[q], &[lambda]).expect("valid rz");
        self
    }

    pub fn sx(&mut self, q: usize) -> &mut Self {
        self.push(GateKind::Sx, &[q], &[]).expect("valid sx");
        self
    }

    pub fn ecr(&mut self, c: usize, t: usize) -> &mut Self {
        self.push(GateKind::Ecr, &[c, t], &[]).expect("valid ecr");
        self
    }

    pub fn measure_all(&mut self) -> &mut Self {
        for q in 0..self.width {
            self.push(GateKind::Measure, &[q], &[])
                .expect("valid measure");
        }
        self
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Gates that touch more than one qubit, in program order.
    pub fn multi_qubit_gates(&self) -> impl Iterator<Item = &Gate> {
        self.gates
            .iter()
            .filter(|g| g.qubits.len() > 1 && g.kind != GateKind::Barrier)
    }

    /// Rebuilds a circuit from gates of another, renumbering ids densely.
    pub(crate) fn from_parts(
        width: usize,
        gates: impl IntoIterator<Item = (GateKind, Vec<usize>, Vec<f64>)>,
    ) -> Self {
        let gates = gates
            .into_iter()
            .enumerate()
            .map(|(id, (kind, qubits, angles))| Gate {
                id,
                kind,
                qubits,
                angles: angles.into_iter().map(normalize_angle).collect(),
            })
            .collect();
        Circuit { width, gates }
    }

    pub fn unitary(&self) -> CMatrix {
        circuit_unitary(self)
    }

    /// Line-oriented text form; [`parse_circuit`] reads it back exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.width);
        for g in &self.gates {
            out.push_str(g.kind.name());
            for q in &g.qubits {
                out.push_str(&format!(" q{q}"));
            }
            if !g.angles.is_empty() {
                let angles: Vec<String> = g.angles.iter().map(|a| format!("{a}")).collect();
                out.push(' ');
                out.push_str(&angles.join(","));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let gates: Vec<GateRecord> = self
            .gates
            .iter()
            .map(|g| GateRecord {
                kind: g.kind,
                qubits: g.qubits.clone(),
                angles: g.angles.clone(),
            })
            .collect();
        serde_json::json!({ "width": self.width, "gates": gates })
    }
}

/// JSON form of a single gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub angles: Vec<f64>,
}

pub(crate) fn validate(
    kind: GateKind,
    qubits: &[usize],
    angles: &[f64],
    width: usize,
) -> Result<(), CircuitError> {
    match kind.arity() {
        Some(n) if qubits.len() != n => {
            return Err(CircuitError::InvalidGate(format!(
                "{kind} takes {n} qubit(s), got {}",
                qubits.len()
            )))
        }
        None if qubits.is_empty() => {
            return Err(CircuitError::InvalidGate(format!(
                "{kind} needs at least one qubit"
            )))
        }
        _ => {}
    }
    if angles.len() != kind.angle_count() {
        return Err(CircuitError::InvalidGate(format!(
            "{kind} takes {} angle(s), got {}",
            kind.angle_count(),
            angles.len()
        )));
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(CircuitError::InvalidGate(format!("non-finite angle {a}")));
    }
    for (i, q) in qubits.iter().enumerate() {
        if *q >= width {
            return Err(CircuitError::InvalidGate(format!(
                "qubit {q} outside width {width}"
            )));
        }
        if qubits[..i].contains(q) {
            return Err(CircuitError::InvalidGate(format!(
                "repeated qubit {q} in {kind}"
            )));
        }
    }
    Ok(())
}

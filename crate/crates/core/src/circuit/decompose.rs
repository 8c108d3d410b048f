//! Basis decompositions and peephole passes.
//!
//! Sequences below are written in circuit order (first element applied first).
//!
//! * static: `U3(θ,φ,λ) → Rz(λ) · Sx · Rz(θ) · Sx† · Rz(φ)`
//! * dynamic: `U3(θ,φ,λ) → Rz(λ−π/2) · Rx(θ) · Rz(φ−3π/2)`
//!
//! Both reproduce the U3 matrix up to a global phase. `θ` is first folded
//! into `[0, π]` so every physical rotation is non-negative.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix2;

use super::{normalize_angle, Circuit, Gate, GateKind};
use crate::linalg::{self, CMatrix, C64};

type Spec = (GateKind, Vec<usize>, Vec<f64>);

/// Folds `θ` into `[0, π]`, adjusting `φ` and `λ` so the matrix is unchanged
/// up to global phase.
fn canonical_u3(theta: f64, phi: f64, lambda: f64) -> (f64, f64, f64) {
    let t = normalize_angle(theta);
    if t < 0.0 {
        (-t, phi + PI, lambda + PI)
    } else {
        (t, phi, lambda)
    }
}

/// Rewrites non-U3 single-qubit rotations as U3 so both decompositions share
/// one entry point.
fn as_u3(g: &Gate) -> Option<(f64, f64, f64)> {
    match g.kind {
        GateKind::U3 => Some((g.angles[0], g.angles[1], g.angles[2])),
        GateKind::Rx => Some((g.angles[0], -FRAC_PI_2, FRAC_PI_2)),
        GateKind::Sx => Some((FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2)),
        GateKind::SxDg => Some((-FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2)),
        _ => None,
    }
}

fn is_zero(a: f64) -> bool {
    normalize_angle(a) == 0.0
}

pub fn static_sequence(q: usize, theta: f64, phi: f64, lambda: f64) -> Vec<Spec> {
    let (theta, phi, lambda) = canonical_u3(theta, phi, lambda);
    let rz = |a: f64| (GateKind::Rz, vec![q], vec![a]);
    if is_zero(theta) {
        vec![rz(phi + lambda)]
    } else if normalize_angle(theta) == FRAC_PI_2 {
        vec![
            rz(lambda - FRAC_PI_2),
            (GateKind::Sx, vec![q], vec![]),
            rz(phi + FRAC_PI_2),
        ]
    } else {
        vec![
            rz(lambda),
            (GateKind::Sx, vec![q], vec![]),
            rz(theta),
            (GateKind::SxDg, vec![q], vec![]),
            rz(phi),
        ]
    }
}

pub fn dynamic_sequence(q: usize, theta: f64, phi: f64, lambda: f64) -> Vec<Spec> {
    let (theta, phi, lambda) = canonical_u3(theta, phi, lambda);
    if is_zero(theta) {
        vec![(GateKind::Rz, vec![q], vec![phi + lambda])]
    } else {
        vec![
            (GateKind::Rz, vec![q], vec![lambda - FRAC_PI_2]),
            (GateKind::Rx, vec![q], vec![theta]),
            (GateKind::Rz, vec![q], vec![phi - 1.5 * PI]),
        ]
    }
}

fn expand(
    c: &Circuit,
    keep: impl Fn(GateKind) -> bool,
    seq: impl Fn(usize, f64, f64, f64) -> Vec<Spec>,
) -> Circuit {
    let mut out = Vec::with_capacity(c.len() * 3);
    for g in &c.gates {
        if keep(g.kind) {
            out.push((g.kind, g.qubits.clone(), g.angles.clone()));
        } else if let Some((t, p, l)) = as_u3(g) {
            out.extend(seq(g.qubits[0], t, p, l));
        } else {
            out.push((g.kind, g.qubits.clone(), g.angles.clone()));
        }
    }
    Circuit::from_parts(c.width, out)
}

/// Lowers every U3 (and Rx) onto `{Rz, Sx, Sx†}`; Sx and Sx† pass through.
pub fn decompose_static(c: &Circuit) -> Circuit {
    expand(
        c,
        |k| matches!(k, GateKind::Sx | GateKind::SxDg),
        static_sequence,
    )
}

/// Lowers every single-qubit rotation onto `{Rz, Rx(θ≥0)}`. A U3 with `θ = 0`
/// becomes frame changes only.
pub fn decompose_dynamic(c: &Circuit) -> Circuit {
    expand(c, |_| false, dynamic_sequence)
}

/// Fuses runs of Rz on the same qubit and drops identity rotations.
///
/// A pending Rz is flushed right before the next gate on its qubit (or at the
/// end of the circuit, ordered by qubit).
pub fn merge_virtual_z(c: &Circuit) -> Circuit {
    let mut pending = vec![0.0f64; c.width];
    let mut out: Vec<Spec> = Vec::with_capacity(c.len());
    let flush = |q: usize, pending: &mut [f64], out: &mut Vec<Spec>| {
        let a = normalize_angle(pending[q]);
        if a != 0.0 {
            out.push((GateKind::Rz, vec![q], vec![a]));
        }
        pending[q] = 0.0;
    };
    for g in &c.gates {
        if g.kind == GateKind::Rz {
            let q = g.qubits[0];
            pending[q] = normalize_angle(pending[q] + g.angles[0]);
            continue;
        }
        for &q in &g.qubits {
            flush(q, &mut pending, &mut out);
        }
        out.push((g.kind, g.qubits.clone(), g.angles.clone()));
    }
    for q in 0..c.width {
        flush(q, &mut pending, &mut out);
    }
    Circuit::from_parts(c.width, out)
}

/// Collapses each maximal run of single-qubit unitaries on a qubit into one U3
/// (or nothing, if the run is the identity up to phase).
pub fn fuse_single_qubit(c: &Circuit) -> Circuit {
    let mut pending: Vec<Option<Matrix2<C64>>> = vec![None; c.width];
    let mut out: Vec<Spec> = Vec::with_capacity(c.len());
    let flush = |q: usize, pending: &mut [Option<Matrix2<C64>>], out: &mut Vec<Spec>| {
        if let Some(m) = pending[q].take() {
            let (t, p, l) = linalg::u3_angles(&m);
            let (t, p, l) = (normalize_angle(t), normalize_angle(p), normalize_angle(l));
            if !(t == 0.0 && normalize_angle(p + l) == 0.0) {
                out.push((GateKind::U3, vec![q], vec![t, p, l]));
            }
        }
    };
    for g in &c.gates {
        if g.qubits.len() == 1 && g.kind != GateKind::Measure && g.kind != GateKind::Barrier {
            let q = g.qubits[0];
            let m = single_qubit_matrix(g);
            pending[q] = Some(match pending[q] {
                Some(prev) => m * prev,
                None => m,
            });
            continue;
        }
        for &q in &g.qubits {
            flush(q, &mut pending, &mut out);
        }
        out.push((g.kind, g.qubits.clone(), g.angles.clone()));
    }
    for q in 0..c.width {
        flush(q, &mut pending, &mut out);
    }
    Circuit::from_parts(c.width, out)
}

fn single_qubit_matrix(g: &Gate) -> Matrix2<C64> {
    match g.kind {
        GateKind::U3 => linalg::u3(g.angles[0], g.angles[1], g.angles[2]),
        GateKind::Rz => linalg::rz(g.angles[0]),
        GateKind::Rx => linalg::rx(g.angles[0]),
        GateKind::Sx => linalg::sx(),
        GateKind::SxDg => linalg::sxdg(),
        _ => Matrix2::identity(),
    }
}

/// Two-level unitary of one gate on its operand qubits. Measure and Barrier
/// are the identity.
pub fn gate_unitary(g: &Gate) -> CMatrix {
    match g.kind {
        GateKind::Ecr => linalg::ecr(),
        GateKind::Measure | GateKind::Barrier => linalg::identity(1 << g.qubits.len()),
        _ => linalg::to_dynamic(&single_qubit_matrix(g)),
    }
}

/// Dense unitary of the whole circuit (two levels per qubit, big-endian).
pub fn circuit_unitary(c: &Circuit) -> CMatrix {
    let dim = 1usize << c.width;
    let mut u = linalg::identity(dim);
    for g in &c.gates {
        if matches!(g.kind, GateKind::Measure | GateKind::Barrier) {
            continue;
        }
        let op = linalg::embed(&gate_unitary(g), &g.qubits, c.width, 2);
        u = op * u;
    }
    u
}

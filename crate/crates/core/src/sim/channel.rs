//! Superoperators on a single site, column-stacking convention:
//! `vec(A·X·B) = (Bᵀ ⊗ A)·vec(X)`.

use nalgebra::SymmetricEigen;

use super::QubitParams;
use crate::linalg::{c64, CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Superop {
    /// Local Hilbert-space dimension.
    pub dim: usize,
    /// `dim² × dim²` matrix acting on column-stacked operators.
    pub matrix: CMatrix,
}

impl Superop {
    pub fn identity(dim: usize) -> Self {
        Superop {
            dim,
            matrix: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    /// `ρ ↦ U ρ U†`
    pub fn from_unitary(u: &CMatrix) -> Self {
        Superop {
            dim: u.nrows(),
            matrix: u.conjugate().kronecker(u),
        }
    }

    /// The channel `after ∘ self`.
    pub fn then(&self, after: &Superop) -> Superop {
        assert_eq!(self.dim, after.dim);
        Superop {
            dim: self.dim,
            matrix: &after.matrix * &self.matrix,
        }
    }

    /// Applies the channel to a local `dim × dim` operator.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim;
        let v = CMatrix::from_fn(d * d, 1, |k, _| rho[(k % d, k / d)]);
        let out = &self.matrix * v;
        CMatrix::from_fn(d, d, |i, j| out[(i + j * d, 0)])
    }

    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        choi_matrix(d, |x| self.apply(x))
    }
}

/// `J = Σ_{ij} |i⟩⟨j| ⊗ E(|i⟩⟨j|)` for a channel given as a closure.
pub fn choi_matrix(dim: usize, channel: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let mut j = CMatrix::zeros(dim * dim, dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut e = CMatrix::zeros(dim, dim);
            e[(a, b)] = C64::ONE;
            let out = channel(&e);
            for r in 0..dim {
                for c in 0..dim {
                    j[(a * dim + r, b * dim + c)] = out[(r, c)];
                }
            }
        }
    }
    j
}

pub fn min_eigenvalue(h: &CMatrix) -> f64 {
    let herm = (h + h.adjoint()) * c64(0.5, 0.0);
    SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_positive_semidefinite(h: &CMatrix, tol: f64) -> bool {
    let anti = h - h.adjoint();
    anti.iter().all(|x| x.norm() <= tol) && min_eigenvalue(h) >= -tol
}

fn liouvillian(jumps: &[CMatrix], dim: usize) -> CMatrix {
    let id = CMatrix::identity(dim, dim);
    let mut l = CMatrix::zeros(dim * dim, dim * dim);
    for op in jumps {
        let ldl = op.adjoint() * op;
        l += op.conjugate().kronecker(op);
        l -= id.kronecker(&ldl) * c64(0.5, 0.0);
        l -= ldl.transpose().kronecker(&id) * c64(0.5, 0.0);
    }
    l
}

/// Exact Lindblad evolution of one transmon for `duration_ns` with no drive.
///
/// Jumps: `√Γ1·|0⟩⟨1|`, `√Γ1·|1⟩⟨2|` and `√(2Γφ)·n̂`, so the 0–1 coherence
/// decays as `e^{−t/T2}` and `|1⟩` relaxes as `e^{−t/T1}`. Level 2 relaxes to
/// level 1 at the same rate.
pub fn decoherence(p: &QubitParams, duration_ns: f64) -> Superop {
    let dim = 3;
    let g1 = p.gamma1();
    let gphi = p.gamma_phi();
    if duration_ns == 0.0 || (g1 == 0.0 && gphi == 0.0) {
        return Superop::identity(dim);
    }
    let mut jumps = Vec::new();
    if g1 > 0.0 {
        let s = g1.sqrt();
        let mut a = CMatrix::zeros(dim, dim);
        a[(0, 1)] = c64(s, 0.0);
        jumps.push(a);
        let mut b = CMatrix::zeros(dim, dim);
        b[(1, 2)] = c64(s, 0.0);
        jumps.push(b);
    }
    if gphi > 0.0 {
        let s = (2.0 * gphi).sqrt();
        let mut n = CMatrix::zeros(dim, dim);
        n[(1, 1)] = c64(s, 0.0);
        n[(2, 2)] = c64(2.0 * s, 0.0);
        jumps.push(n);
    }
    let l = liouvillian(&jumps, dim) * c64(duration_ns, 0.0);
    Superop {
        dim,
        matrix: l.exp(),
    }
}

//! Small dense linear-algebra helpers shared by the decomposition checks, the
//! stabilizer tableau and the simulator.
//!
//! Multi-qubit operators use big-endian ordering: qubit 0 is the most
//! significant digit of a basis index.

use std::f64::consts::FRAC_1_SQRT_2;

pub use nalgebra::Complex;
use nalgebra::{DMatrix, Matrix2};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// `e^{i x}`
#[inline]
pub fn cis(x: f64) -> C64 {
    Complex::from_polar(1.0, x)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn rz(lambda: f64) -> Matrix2<C64> {
    Matrix2::new(cis(-lambda / 2.0), C64::ZERO, C64::ZERO, cis(lambda / 2.0))
}

pub fn rx(theta: f64) -> Matrix2<C64> {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix2::new(c64(c, 0.0), c64(0.0, -s), c64(0.0, -s), c64(c, 0.0))
}

pub fn ry(theta: f64) -> Matrix2<C64> {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix2::new(c64(c, 0.0), c64(-s, 0.0), c64(s, 0.0), c64(c, 0.0))
}

pub fn sx() -> Matrix2<C64> {
    Matrix2::new(c64(0.5, 0.5), c64(0.5, -0.5), c64(0.5, -0.5), c64(0.5, 0.5))
}

pub fn sxdg() -> Matrix2<C64> {
    sx().adjoint()
}

/// Rotation by `theta` about the equatorial axis at angle `phi` from x.
pub fn rotation_xy(theta: f64, phi: f64) -> Matrix2<C64> {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix2::new(
        c64(c, 0.0),
        c64(0.0, -s) * cis(-phi),
        c64(0.0, -s) * cis(phi),
        c64(c, 0.0),
    )
}

/// The three-Euler-angle single-qubit gate.
pub fn u3(theta: f64, phi: f64, lambda: f64) -> Matrix2<C64> {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix2::new(
        c64(c, 0.0),
        -cis(lambda) * s,
        cis(phi) * s,
        cis(phi + lambda) * c,
    )
}

/// Euler angles `(θ, φ, λ)` with `u3(θ, φ, λ) ≅ m` up to global phase, `θ ∈ [0, π]`.
pub fn u3_angles(m: &Matrix2<C64>) -> (f64, f64, f64) {
    let c = m[(0, 0)].norm();
    let s = m[(1, 0)].norm();
    let theta = 2.0 * s.atan2(c);
    const EPS: f64 = 1e-12;
    if s < EPS {
        (theta, 0.0, (m[(1, 1)] / m[(0, 0)]).arg())
    } else if c < EPS {
        let gamma = (-m[(0, 1)]).arg();
        (theta, m[(1, 0)].arg() - gamma, 0.0)
    } else {
        let gamma = m[(0, 0)].arg();
        (theta, m[(1, 0)].arg() - gamma, (-m[(0, 1)]).arg() - gamma)
    }
}

/// Echoed cross-resonance gate, `(X_c − Y_c X_t)/√2` with `c` the first operand.
pub fn ecr() -> CMatrix {
    let r = FRAC_1_SQRT_2;
    let z = C64::ZERO;
    #[rustfmt::skip]
    let m = CMatrix::from_row_slice(4, 4, &[
        z,            z,            c64(r, 0.0),  c64(0.0, r),
        z,            z,            c64(0.0, r),  c64(r, 0.0),
        c64(r, 0.0),  c64(0.0, -r), z,            z,
        c64(0.0, -r), c64(r, 0.0),  z,            z,
    ]);
    m
}

pub fn to_dynamic(m: &Matrix2<C64>) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Embeds `op` (acting on `targets`, in that order) into an `n`-site register
/// whose sites each have `dim` levels.
pub fn embed(op: &CMatrix, targets: &[usize], n: usize, dim: usize) -> CMatrix {
    let k = targets.len();
    assert_eq!(op.nrows(), dim.pow(k as u32));
    let total = dim.pow(n as u32);
    let strides: Vec<usize> = (0..n).map(|q| dim.pow((n - 1 - q) as u32)).collect();
    let digit = |idx: usize, q: usize| (idx / strides[q]) % dim;
    let mut out = CMatrix::zeros(total, total);
    for col in 0..total {
        let mut sub_col = 0;
        let mut base = col;
        for &t in targets {
            sub_col = sub_col * dim + digit(col, t);
            base -= digit(col, t) * strides[t];
        }
        for sub_row in 0..op.nrows() {
            let amp = op[(sub_row, sub_col)];
            if amp == C64::ZERO {
                continue;
            }
            let mut row = base;
            let mut rest = sub_row;
            for &t in targets.iter().rev() {
                row += (rest % dim) * strides[t];
                rest /= dim;
            }
            out[(row, col)] += amp;
        }
    }
    out
}

/// Largest entrywise deviation between `a` and `b` after removing the best
/// global phase.
pub fn phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let overlap: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::ONE
    };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x * phase - y).norm())
        .fold(0.0, f64::max)
}

pub fn equal_up_to_phase(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    phase_distance(a, b) <= tol
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sx_squares_to_x() {
        let x = sx() * sx();
        let expected = Matrix2::new(C64::ZERO, C64::ONE, C64::ONE, C64::ZERO);
        assert!((x - expected).norm() < 1e-14);
        assert!(equal_up_to_phase(
            &to_dynamic(&sx()),
            &to_dynamic(&rx(PI / 2.0)),
            1e-14
        ));
    }

    #[test]
    fn euler_angles_round_trip() {
        for &(t, p, l) in &[
            (0.3, 1.1, -2.0),
            (0.0, 0.4, 0.9),
            (PI, 0.2, -0.7),
            (2.5, -3.0, 3.0),
        ] {
            let m = u3(t, p, l);
            let (a, b, c) = u3_angles(&m);
            assert!(equal_up_to_phase(
                &to_dynamic(&m),
                &to_dynamic(&u3(a, b, c)),
                1e-12
            ));
        }
    }

    #[test]
    fn ecr_is_unitary_and_matches_cross_resonance_form() {
        let e = ecr();
        assert!(max_abs_diff(&(e.adjoint() * &e), &identity(4)) < 1e-14);
        // (X ⊗ I − Y ⊗ X)/√2
        let x = to_dynamic(&Matrix2::new(C64::ZERO, C64::ONE, C64::ONE, C64::ZERO));
        let y = to_dynamic(&Matrix2::new(
            C64::ZERO,
            c64(0.0, -1.0),
            c64(0.0, 1.0),
            C64::ZERO,
        ));
        let form = (kron(&x, &identity(2)) - kron(&y, &x)) * c64(FRAC_1_SQRT_2, 0.0);
        assert!(max_abs_diff(&form, &e) < 1e-14);
    }

    #[test]
    fn embed_matches_kron() {
        let a = to_dynamic(&u3(0.3, 0.2, 0.1));
        let full = embed(&a, &[1], 3, 2);
        let k = kron(&kron(&identity(2), &a), &identity(2));
        assert!(max_abs_diff(&full, &k) < 1e-15);
        // Reversed operand order on a two-site operator swaps the roles.
        let e = ecr();
        let swapped = embed(&e, &[1, 0], 2, 2);
        let swap = CMatrix::from_fn(4, 4, |r, c| {
            let perm = [0, 2, 1, 3];
            if perm[c] == r {
                C64::ONE
            } else {
                C64::ZERO
            }
        });
        assert!(max_abs_diff(&swapped, &(&swap * &e * &swap)) < 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.0 * PI)).abs() < 1e-12);
    }
}

//! Pauli-string tableau and Clifford sequence generation.
//!
//! The tableau stores, for a circuit `C`, the images `C·X_q·C†` and
//! `C·Z_q·C†` as signed Pauli strings. Gates update it through conjugation
//! tables computed from their unitaries, so any Clifford expressed as U3 and
//! ECR gates can be tracked without a hand-written rule per gate.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{fuse_single_qubit, gate_unitary, Circuit, Gate, GateKind};
use crate::linalg::{self, c64, CMatrix, C64};

/// Letters: 0 = I, 1 = X, 2 = Y, 3 = Z.
fn pauli_matrix(p: u8) -> Matrix2<C64> {
    let (o, z, i) = (C64::ONE, C64::ZERO, c64(0.0, 1.0));
    match p {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -i, i, z),
        _ => Matrix2::new(o, z, z, -o),
    }
}

fn pauli_string_matrix(letters: &[u8]) -> CMatrix {
    letters.iter().fold(CMatrix::identity(1, 1), |acc, &p| {
        acc.kronecker(&linalg::to_dynamic(&pauli_matrix(p)))
    })
}

/// Identifies `m` as `±P` for a Pauli string of length `k`.
fn identify(m: &CMatrix, k: usize) -> Option<(Vec<u8>, bool)> {
    let total = 4usize.pow(k as u32);
    for code in 0..total {
        let letters: Vec<u8> = (0..k)
            .rev()
            .map(|j| ((code >> (2 * j)) & 3) as u8)
            .collect();
        let p = pauli_string_matrix(&letters);
        let overlap: C64 = p
            .iter()
            .zip(m.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            / (1 << k) as f64;
        if (overlap.norm() - 1.0).abs() < 1e-9 {
            if (overlap - C64::ONE).norm() < 1e-9 {
                return Some((letters, false));
            }
            if (overlap + C64::ONE).norm() < 1e-9 {
                return Some((letters, true));
            }
            return None;
        }
    }
    None
}

/// `table[code]` = image of the Pauli string `code` under `U·P·U†`, with a
/// sign flag. `None` if `u` is not Clifford.
fn conjugation_table(u: &CMatrix) -> Option<Vec<(Vec<u8>, bool)>> {
    let k = u.nrows().trailing_zeros() as usize;
    let total = 4usize.pow(k as u32);
    (0..total)
        .map(|code| {
            let letters: Vec<u8> = (0..k)
                .rev()
                .map(|j| ((code >> (2 * j)) & 3) as u8)
                .collect();
            let img = u * pauli_string_matrix(&letters) * u.adjoint();
            identify(&img, k)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliString {
    pub letters: Vec<u8>,
    pub negative: bool,
}

impl PauliString {
    fn single(n: usize, q: usize, p: u8) -> Self {
        let mut letters = vec![0; n];
        letters[q] = p;
        PauliString {
            letters,
            negative: false,
        }
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tableau {
    pub n: usize,
    /// `rows[2q]` is the image of `X_q`, `rows[2q+1]` of `Z_q`.
    pub rows: Vec<PauliString>,
}

impl Tableau {
    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .flat_map(|q| [PauliString::single(n, q, 1), PauliString::single(n, q, 3)])
            .collect();
        Tableau { n, rows }
    }

    pub fn is_identity(&self) -> bool {
        *self == Tableau::identity(self.n)
    }

    /// Conjugates every row by `u` acting on `targets`.
    pub fn apply(&mut self, u: &CMatrix, targets: &[usize]) {
        let table = conjugation_table(u).expect("gate is Clifford");
        for row in &mut self.rows {
            let code = targets
                .iter()
                .fold(0usize, |acc, &t| (acc << 2) | row.letters[t] as usize);
            let (img, neg) = &table[code];
            for (j, &t) in targets.iter().enumerate() {
                row.letters[t] = img[j];
            }
            row.negative ^= *neg;
        }
    }

    pub fn apply_gate(&mut self, g: &Gate) {
        if matches!(g.kind, GateKind::Measure | GateKind::Barrier) {
            return;
        }
        self.apply(&gate_unitary(g), &g.qubits);
    }

    pub fn from_circuit(c: &Circuit) -> Self {
        let mut t = Tableau::identity(c.width);
        for g in &c.gates {
            t.apply_gate(g);
        }
        t
    }
}

/// The 24 single-qubit Cliffords as U3 angles, first element the identity.
pub fn single_qubit_cliffords() -> &'static [(f64, f64, f64)] {
    static CACHE: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let h = linalg::u3(FRAC_PI_2, 0.0, PI);
        let s = linalg::rz(FRAC_PI_2);
        let mut found: Vec<Matrix2<C64>> = vec![Matrix2::identity()];
        let mut frontier = found.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for m in &frontier {
                for g in [h, s] {
                    let cand = g * m;
                    let known = found.iter().any(|f| {
                        linalg::equal_up_to_phase(
                            &linalg::to_dynamic(f),
                            &linalg::to_dynamic(&cand),
                            1e-9,
                        )
                    });
                    if !known {
                        found.push(cand);
                        next.push(cand);
                    }
                }
            }
            frontier = next;
        }
        found
            .iter()
            .map(|m| {
                let (t, p, l) = linalg::u3_angles(m);
                use crate::circuit::normalize_angle as n;
                (n(t), n(p), n(l))
            })
            .collect()
    })
}

/// Appends gates to `out` and keeps `tab` in sync.
struct Emitter<'a> {
    out: &'a mut Vec<(GateKind, Vec<usize>, Vec<f64>)>,
    tab: &'a mut Tableau,
}

impl Emitter<'_> {
    fn push(&mut self, kind: GateKind, qubits: Vec<usize>, angles: Vec<f64>) {
        let g = Gate {
            id: 0,
            kind,
            qubits,
            angles,
        };
        self.tab.apply_gate(&g);
        self.out.push((g.kind, g.qubits, g.angles));
    }

    fn u3(&mut self, q: usize, t: f64, p: f64, l: f64) {
        self.push(GateKind::U3, vec![q], vec![t, p, l]);
    }

    fn h(&mut self, q: usize) {
        self.u3(q, FRAC_PI_2, 0.0, PI);
    }

    fn s(&mut self, q: usize) {
        self.u3(q, 0.0, 0.0, FRAC_PI_2);
    }

    fn sdg(&mut self, q: usize) {
        self.u3(q, 0.0, 0.0, -FRAC_PI_2);
    }

    fn sx(&mut self, q: usize) {
        self.u3(q, FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2);
    }

    fn x(&mut self, q: usize) {
        self.u3(q, PI, 0.0, PI);
    }

    fn z(&mut self, q: usize) {
        self.u3(q, 0.0, 0.0, PI);
    }

    /// CX(c, t) from one ECR: `X_c · ECR(c,t) · S_c · Sx_t` in circuit order.
    fn cx(&mut self, c: usize, t: usize) {
        self.x(c);
        self.push(GateKind::Ecr, vec![c, t], vec![]);
        self.s(c);
        self.sx(t);
    }

    /// Maps the letter at `q` of row `r` to `want` (X or Z) with a local Clifford.
    fn to_letter(&mut self, r: usize, q: usize, want: u8) {
        let have = self.tab.rows[r].letters[q];
        match (have, want) {
            (0, _) => {}
            (a, b) if a == b => {}
            (3, 1) | (1, 3) => self.h(q),
            (2, 1) => self.sdg(q),
            (2, 3) => {
                self.sdg(q);
                self.h(q);
            }
            _ => unreachable!(),
        }
    }
}

/// Gates `D` with `D·C ≅ I` for the Clifford `C` whose tableau is `tab`.
/// Emitted gates are U3 and ECR only, in circuit order.
pub fn synthesize_inverse(tab: &Tableau) -> Vec<(GateKind, Vec<usize>, Vec<f64>)> {
    let n = tab.n;
    let mut work = tab.clone();
    let mut out = Vec::new();
    let mut e = Emitter {
        out: &mut out,
        tab: &mut work,
    };
    for q in 0..n {
        let rx = 2 * q;
        let rz = 2 * q + 1;
        // Image of X_q → ±X_q.
        for j in q..n {
            e.to_letter(rx, j, 1);
        }
        let support: Vec<usize> = e.tab.rows[rx].support().collect();
        if !support.contains(&q) {
            let j0 = support[0];
            e.cx(j0, q);
        }
        let support: Vec<usize> = e.tab.rows[rx].support().filter(|&j| j != q).collect();
        for j in support {
            e.cx(q, j);
        }
        // Image of Z_q → ±Z_q without disturbing X_q.
        if e.tab.rows[rz].letters[q] == 2 {
            e.sx(q);
        }
        for j in q + 1..n {
            e.to_letter(rz, j, 3);
        }
        let support: Vec<usize> = e.tab.rows[rz].support().filter(|&j| j != q).collect();
        for j in support {
            e.cx(j, q);
        }
        if e.tab.rows[rx].negative {
            e.z(q);
        }
        if e.tab.rows[rz].negative {
            e.x(q);
        }
    }
    debug_assert!(
        work.is_identity(),
        "inverse synthesis did not reach the identity"
    );
    out
}

/// `length` random layers (a random single-qubit Clifford on every qubit,
/// then an ECR on a random ordered pair when there are two or more qubits),
/// the synthesized inverse, and a final measurement. Adjacent single-qubit
/// gates are fused into one U3.
pub fn random_clifford_circuit(n_qubits: usize, length: usize, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cliffords = single_qubit_cliffords();
    let mut gates: Vec<(GateKind, Vec<usize>, Vec<f64>)> = Vec::new();
    for _ in 0..length {
        for q in 0..n_qubits {
            let (t, p, l) = cliffords[rng.gen_range(0..cliffords.len())];
            gates.push((GateKind::U3, vec![q], vec![t, p, l]));
        }
        if n_qubits >= 2 {
            let c = rng.gen_range(0..n_qubits);
            let mut t = rng.gen_range(0..n_qubits - 1);
            if t >= c {
                t += 1;
            }
            gates.push((GateKind::Ecr, vec![c, t], vec![]));
        }
    }
    let forward = Circuit::from_parts(n_qubits, gates.clone());
    let tab = Tableau::from_circuit(&forward);
    gates.extend(synthesize_inverse(&tab));
    let mut c = fuse_single_qubit(&Circuit::from_parts(n_qubits, gates));
    c.measure_all();
    c
}

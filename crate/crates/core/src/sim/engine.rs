use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Mutex;

use nalgebra::{Matrix2, Matrix3};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::channel::{decoherence, is_positive_semidefinite, Superop};
use super::{propagate_waveform, with_phase, NoiseModel, SimError, MAX_WIDTH};
use crate::circuit::GateKind;
use crate::linalg::{self, c64, CMatrix, C64};
use crate::pulse::{synthesize, Shape, ShapeSpec};
use crate::scheduler::{Schedule, ScheduledOp};

const LEVELS: usize = 3;

/// How pulse gates are turned into unitaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateModel {
    /// Exact rotations on the qubit subspace, identity on `|2⟩`.
    Ideal,
    /// Propagate the scheduled waveform through the three-level Hamiltonian.
    #[default]
    Pulse,
}

/// Density operator over `n` three-level sites, big-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct StateOp {
    pub n: usize,
    pub rho: CMatrix,
}

impl StateOp {
    pub fn ground(n: usize) -> Self {
        let dim = LEVELS.pow(n as u32);
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(0, 0)] = C64::ONE;
        StateOp { n, rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    fn stride(&self, q: usize) -> usize {
        LEVELS.pow((self.n - 1 - q) as u32)
    }

    /// Full indices whose digit at `q` is zero.
    fn rest_indices(&self, q: usize) -> Vec<usize> {
        let s = self.stride(q);
        (0..self.dim())
            .filter(|&i| (i / s).is_multiple_of(LEVELS))
            .collect()
    }

    /// Applies a single-site superoperator to site `q`.
    pub fn apply_local(&mut self, ch: &Superop, q: usize) {
        debug_assert_eq!(ch.dim, LEVELS);
        let s = self.stride(q);
        let rest = self.rest_indices(q);
        let d = LEVELS;
        let mut v = vec![C64::ZERO; d * d];
        for &r in &rest {
            for &c in &rest {
                for b in 0..d {
                    for a in 0..d {
                        v[a + b * d] = self.rho[(r + a * s, c + b * s)];
                    }
                }
                for b in 0..d {
                    for a in 0..d {
                        let row = a + b * d;
                        let mut acc = C64::ZERO;
                        for (k, x) in v.iter().enumerate() {
                            acc += ch.matrix[(row, k)] * x;
                        }
                        self.rho[(r + a * s, c + b * s)] = acc;
                    }
                }
            }
        }
    }

    /// `ρ ↦ U ρ U†` for `u` acting on `targets` (in that order).
    pub fn apply_unitary(&mut self, u: &CMatrix, targets: &[usize]) {
        let full = linalg::embed(u, targets, self.n, LEVELS);
        self.rho = &full * &self.rho * full.adjoint();
    }

    /// Two-qubit depolarizing on the computational subspace of `(a, b)`:
    /// `(1−p)ρ + (p/16)·Σ P̃ρP̃†` over the sixteen Paulis extended by the
    /// identity on `|2⟩`.
    pub fn depolarize_pair(&mut self, p: f64, a: usize, b: usize) {
        if p == 0.0 {
            return;
        }
        let dim = self.dim();
        let (sa, sb) = (self.stride(a), self.stride(b));
        let mut acc = &self.rho * c64(1.0 - p, 0.0);
        let w = c64(p / 16.0, 0.0);
        for pa in 0..4 {
            for pb in 0..4 {
                // P̃|i⟩ = ph(i)|σ(i)⟩
                let map: Vec<(usize, C64)> = (0..dim)
                    .map(|i| {
                        let (da, db) = ((i / sa) % LEVELS, (i / sb) % LEVELS);
                        let (na, pha) = pauli_action(pa, da);
                        let (nb, phb) = pauli_action(pb, db);
                        let j = i - da * sa - db * sb + na * sa + nb * sb;
                        (j, pha * phb)
                    })
                    .collect();
                for i in 0..dim {
                    let (si, pi) = map[i];
                    for j in 0..dim {
                        let (sj, pj) = map[j];
                        acc[(si, sj)] += w * pi * pj.conj() * self.rho[(i, j)];
                    }
                }
            }
        }
        self.rho = acc;
    }

    /// Probability that every site reads `|0⟩`.
    pub fn p0(&self) -> f64 {
        self.rho[(0, 0)].re.clamp(0.0, 1.0)
    }

    /// Readout distribution; levels 1 and 2 both read as bit `1`, qubit 0 is
    /// the leftmost character.
    pub fn outcome_probabilities(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for i in 0..self.dim() {
            let bits: String = (0..self.n)
                .map(|q| {
                    if (i / self.stride(q)).is_multiple_of(LEVELS) {
                        '0'
                    } else {
                        '1'
                    }
                })
                .collect();
            *out.entry(bits).or_insert(0.0) += self.rho[(i, i)].re.max(0.0);
        }
        out
    }

    pub fn leakage(&self, q: usize) -> f64 {
        let s = self.stride(q);
        (0..self.dim())
            .filter(|&i| (i / s) % LEVELS == 2)
            .map(|i| self.rho[(i, i)].re)
            .sum()
    }

    pub fn check_physical(&self) -> Result<(), SimError> {
        let herm = (&self.rho - self.rho.adjoint())
            .iter()
            .fold(0.0f64, |m, x| m.max(x.norm()));
        if herm > 1e-10 {
            return Err(SimError::Unphysical(format!("hermiticity defect {herm:e}")));
        }
        let tr = self.rho.trace().re;
        if tr > 1.0 + 1e-10 {
            return Err(SimError::Unphysical(format!("trace {tr}")));
        }
        if !is_positive_semidefinite(&self.rho, 1e-8) {
            return Err(SimError::Unphysical("negative eigenvalue".into()));
        }
        Ok(())
    }
}

fn pauli_action(p: usize, level: usize) -> (usize, C64) {
    match (p, level) {
        (_, 2) | (0, _) => (level, C64::ONE),
        (1, l) => (1 - l, C64::ONE),
        (2, 0) => (1, c64(0.0, 1.0)),
        (2, _) => (0, c64(0.0, -1.0)),
        (3, 0) => (0, C64::ONE),
        (3, _) => (1, -C64::ONE),
        _ => unreachable!(),
    }
}

pub fn qubit_block(u: &Matrix3<C64>) -> Matrix2<C64> {
    Matrix2::new(u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)])
}

/// Average gate fidelity of the qubit block of `u` against `target`,
/// counting leakage as loss: `(tr(MM†) + |tr(V†M)|²)/6`.
pub fn subspace_fidelity(u: &Matrix3<C64>, target: &Matrix2<C64>) -> f64 {
    let m = qubit_block(u);
    let tr_mm = (m * m.adjoint()).trace().re;
    let overlap = (target.adjoint() * m).trace().norm_sqr();
    (tr_mm + overlap) / 6.0
}

/// Population left in `|2⟩` after applying `u` to `|0⟩`.
pub fn leakage_population(u: &Matrix3<C64>) -> f64 {
    u[(2, 0)].norm_sqr()
}

/// ECR on the computational subspace of two transmons; identity elsewhere.
pub fn ecr_unitary_qutrit() -> CMatrix {
    let e = linalg::ecr();
    let mut u = CMatrix::identity(9, 9);
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    u[(3 * a + b, 3 * c + d)] = e[(2 * a + b, 2 * c + d)];
                }
            }
        }
    }
    u
}

fn embed_qubit_rotation(m: &Matrix2<C64>) -> Matrix3<C64> {
    let mut u = Matrix3::identity();
    for i in 0..2 {
        for j in 0..2 {
            u[(i, j)] = m[(i, j)];
        }
    }
    u
}

type SpecKey = (usize, u8, u64, u64, u64, u64, u64, u64);

fn spec_key(q: usize, s: &ShapeSpec) -> SpecKey {
    let shape = match s.shape {
        Shape::Square => 0,
        Shape::Gaussian => 1,
        Shape::GaussianSquare => 2,
        Shape::Drag => 3,
    };
    (
        q,
        shape,
        s.amplitude.to_bits(),
        s.duration,
        s.sigma.to_bits(),
        s.width,
        s.beta.to_bits(),
        s.phase.to_bits(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    /// Exact probability of reading all zeros.
    pub p0: f64,
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
    pub probabilities: BTreeMap<String, f64>,
}

impl SimOutcome {
    pub fn write_histogram_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bitstring", "count", "probability"])?;
        for (bits, p) in &self.probabilities {
            let count = self.counts.get(bits).copied().unwrap_or(0);
            w.write_record([bits.clone(), count.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs schedules against a fixed noise model. Propagators and decay channels
/// are cached so one simulator can serve many schedules, across threads.
pub struct Simulator<'a> {
    nm: &'a NoiseModel,
    model: GateModel,
    check: bool,
    pulses: Mutex<HashMap<SpecKey, Matrix3<C64>>>,
    decay: Mutex<HashMap<(usize, u64), Superop>>,
}

impl<'a> Simulator<'a> {
    pub fn new(nm: &'a NoiseModel, model: GateModel) -> Self {
        Simulator {
            nm,
            model,
            check: false,
            pulses: Mutex::default(),
            decay: Mutex::default(),
        }
    }

    /// Verify Hermiticity, positivity and trace after every step.
    pub fn with_physicality_checks(mut self, on: bool) -> Self {
        self.check = on;
        self
    }

    pub fn noise(&self) -> &NoiseModel {
        self.nm
    }

    /// Decay of qubit `q` over `len` dt with no drive.
    pub fn idle_channel(&self, q: usize, len: u64) -> Superop {
        if let Some(s) = self.decay.lock().unwrap().get(&(q, len)) {
            return s.clone();
        }
        let s = decoherence(self.nm.qubit(q), len as f64 * self.nm.dt_ns);
        self.decay.lock().unwrap().insert((q, len), s.clone());
        s
    }

    fn zero_phase_propagator(&self, q: usize, spec: &ShapeSpec) -> Result<Matrix3<C64>, SimError> {
        let key = spec_key(q, spec);
        if let Some(u) = self.pulses.lock().unwrap().get(&key) {
            return Ok(*u);
        }
        let mut w = synthesize(spec)?;
        w.dt_ns = self.nm.dt_ns;
        let u = propagate_waveform(&w, self.nm.qubit(q));
        self.pulses.lock().unwrap().insert(key, u);
        Ok(u)
    }

    /// Three-level unitary of a single-qubit pulse op in its frame.
    pub fn pulse_unitary(
        &self,
        sch: &Schedule,
        op: &ScheduledOp,
    ) -> Result<Matrix3<C64>, SimError> {
        let q = op.qubits[0];
        let phi = op.frames[0];
        let (angle, phase) = match op.kind {
            GateKind::Sx => (PI / 2.0, phi),
            GateKind::SxDg => (PI / 2.0, phi + PI),
            GateKind::Rx => (op.rotation, phi),
            k => return Err(SimError::Unsupported(format!("{k} is not a drive pulse"))),
        };
        match self.model {
            GateModel::Ideal => Ok(embed_qubit_rotation(&linalg::rotation_xy(angle, phase))),
            GateModel::Pulse => {
                let id = op.waveform.ok_or(SimError::MissingWaveform(op.gate_id))?;
                let entry = sch
                    .waveforms
                    .get(id)
                    .ok_or(SimError::MissingWaveform(op.gate_id))?;
                let u0 = self.zero_phase_propagator(q, &entry.spec)?;
                Ok(with_phase(&u0, phase))
            }
        }
    }

    /// `decay(duration) ∘ U` for a single-qubit pulse.
    pub fn gate_channel(&self, sch: &Schedule, op: &ScheduledOp) -> Result<Superop, SimError> {
        let u = self.pulse_unitary(sch, op)?;
        let u = CMatrix::from_fn(3, 3, |i, j| u[(i, j)]);
        Ok(Superop::from_unitary(&u).then(&self.idle_channel(op.qubits[0], op.duration)))
    }

    fn apply_ecr(&self, state: &mut StateOp, op: &ScheduledOp) {
        let (c, t) = (op.qubits[0], op.qubits[1]);
        let f = super::frame(op.frames[0]);
        let g = super::frame(op.frames[1]);
        let fc = CMatrix::from_fn(3, 3, |i, j| f[(i, j)]);
        let ft = CMatrix::from_fn(3, 3, |i, j| g[(i, j)]);
        let v = fc.kronecker(&ft);
        let u = &v * ecr_unitary_qutrit() * v.adjoint();
        state.apply_unitary(&u, &[c, t]);
        state.depolarize_pair(1.0 - self.nm.ecr_fidelity, c, t);
        state.apply_local(&self.idle_channel(c, op.duration), c);
        state.apply_local(&self.idle_channel(t, op.duration), t);
    }

    /// Evolves the ground state through the schedule, idling every qubit up to
    /// the makespan.
    pub fn final_state(&self, sch: &Schedule) -> Result<StateOp, SimError> {
        let n = sch.width;
        if n > MAX_WIDTH {
            return Err(SimError::WidthExceeded(n));
        }
        self.nm.validate(n)?;
        let mut state = StateOp::ground(n);
        let mut clock = vec![0u64; n];
        let mut order: Vec<&ScheduledOp> = sch.ops.iter().collect();
        order.sort_by_key(|op| (op.start, op.node));
        for op in order {
            for &q in &op.qubits {
                if op.start < clock[q] {
                    return Err(SimError::Overlap {
                        qubit: q,
                        at: op.start,
                    });
                }
                let gap = op.start - clock[q];
                if gap > 0 {
                    state.apply_local(&self.idle_channel(q, gap), q);
                }
                clock[q] = op.start + op.duration;
            }
            match op.kind {
                GateKind::Sx | GateKind::SxDg | GateKind::Rx => {
                    let ch = self.gate_channel(sch, op)?;
                    state.apply_local(&ch, op.qubits[0]);
                }
                GateKind::Ecr => self.apply_ecr(&mut state, op),
                GateKind::Measure | GateKind::Barrier => {
                    for &q in &op.qubits {
                        if op.duration > 0 {
                            state.apply_local(&self.idle_channel(q, op.duration), q);
                        }
                    }
                }
                k => return Err(SimError::Unsupported(format!("{k} in a schedule"))),
            }
            if self.check {
                state.check_physical()?;
            }
        }
        for q in 0..n {
            if sch.makespan > clock[q] {
                state.apply_local(&self.idle_channel(q, sch.makespan - clock[q]), q);
            }
        }
        if self.check {
            state.check_physical()?;
        }
        Ok(state)
    }

    pub fn run(&self, sch: &Schedule, shots: u64, seed: u64) -> Result<SimOutcome, SimError> {
        let state = self.final_state(sch)?;
        let probabilities = state.outcome_probabilities();
        let mut counts: BTreeMap<String, u64> =
            probabilities.keys().map(|k| (k.clone(), 0)).collect();
        if shots > 0 {
            let keys: Vec<&String> = probabilities.keys().collect();
            let weights: Vec<f64> = probabilities.values().cloned().collect();
            let dist =
                WeightedIndex::new(&weights).map_err(|e| SimError::Unphysical(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..shots {
                *counts.get_mut(keys[dist.sample(&mut rng)]).unwrap() += 1;
            }
        }
        Ok(SimOutcome {
            p0: state.p0(),
            shots,
            counts,
            probabilities,
        })
    }
}

pub fn run_schedule(
    sch: &Schedule,
    nm: &NoiseModel,
    model: GateModel,
    shots: u64,
    seed: u64,
) -> Result<SimOutcome, SimError> {
    Simulator::new(nm, model).run(sch, shots, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecr_embedding_is_unitary() {
        let u = ecr_unitary_qutrit();
        assert!(linalg::max_abs_diff(&(u.adjoint() * &u), &CMatrix::identity(9, 9)) < 1e-14);
        assert_eq!(u[(8, 8)], C64::ONE);
    }

    #[test]
    fn full_depolarizing_mixes_subspace() {
        let mut s = StateOp::ground(2);
        s.depolarize_pair(1.0, 0, 1);
        for i in [0, 1, 3, 4] {
            assert!((s.rho[(i, i)].re - 0.25).abs() < 1e-14);
        }
        assert!((s.rho.trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn local_channel_matches_embedded_unitary() {
        let u2 = linalg::u3(0.9, 0.3, -1.2);
        let u3 = embed_qubit_rotation(&u2);
        let u = CMatrix::from_fn(3, 3, |i, j| u3[(i, j)]);
        let mut b = StateOp::ground(3);
        let mut c = StateOp::ground(3);
        b.apply_unitary(&u, &[1]);
        c.apply_local(&Superop::from_unitary(&u), 1);
        assert!(linalg::max_abs_diff(&b.rho, &c.rho) < 1e-14);
    }
}

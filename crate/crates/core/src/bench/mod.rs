//! Randomized-benchmarking harness comparing fixed-duration and
//! time-optimized schedules.

mod clifford;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateset::{GateSet, GateSetError, Mode};
use crate::scheduler::{compile, Schedule, ScheduleError};
use crate::sim::{GateModel, NoiseModel, SimError, Simulator};
use crate::DT_NS;

pub use clifford::{
    random_clifford_circuit, single_qubit_cliffords, synthesize_inverse, PauliString, Tableau,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("latency changed on circuit {index} at length {length}: fixed {fixed} dt, optimized {optimized} dt")]
    LatencyMismatch {
        length: usize,
        index: usize,
        fixed: u64,
        optimized: u64,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    GateSet(#[from] GateSetError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Fixed,
    Optimized,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Fixed => "fixed",
            Policy::Optimized => "optimized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBConfig {
    pub n_qubits: usize,
    pub lengths: Vec<usize>,
    pub circuits_per_length: usize,
    pub mode: Mode,
    pub min_duration: u64,
    pub max_duration: u64,
    pub shots: u64,
    pub seed: u64,
}

impl RBConfig {
    /// Ten circuits per length and 1024 shots.
    pub fn new(
        n_qubits: usize,
        lengths: Vec<usize>,
        mode: Mode,
        min_duration: u64,
        max_duration: u64,
    ) -> Self {
        RBConfig {
            n_qubits,
            lengths,
            circuits_per_length: 10,
            mode,
            min_duration,
            max_duration,
            shots: 1024,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(1..=crate::sim::MAX_WIDTH).contains(&self.n_qubits) {
            return Err(BenchError::Config(format!(
                "n_qubits must be 1..=3, got {}",
                self.n_qubits
            )));
        }
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(BenchError::Config("lengths must be positive".into()));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::Config(
                "lengths must be strictly ascending".into(),
            ));
        }
        if self.circuits_per_length == 0 {
            return Err(BenchError::Config(
                "circuits_per_length must be at least 1".into(),
            ));
        }
        if self.min_duration > self.max_duration {
            return Err(BenchError::Config(
                "min_duration exceeds max_duration".into(),
            ));
        }
        Ok(())
    }
}

/// One policy's outcome on one circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyRun {
    pub p0: f64,
    pub p0_sampled: f64,
    pub latency_dt: u64,
    /// Chosen single-qubit pulse durations.
    pub durations: Vec<u64>,
    /// How many of those pulses sit at their own minimum duration.
    pub at_minimum: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitRecord {
    pub length: usize,
    pub index: usize,
    pub seed: u64,
    pub gates: usize,
    pub fixed: PolicyRun,
    pub optimized: PolicyRun,
}

impl CircuitRecord {
    pub fn run(&self, p: Policy) -> &PolicyRun {
        match p {
            Policy::Fixed => &self.fixed,
            Policy::Optimized => &self.optimized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RBResult {
    pub config: RBConfig,
    pub records: Vec<CircuitRecord>,
}

/// Mean P(0) and latency for one (length, policy) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub length: usize,
    pub policy: Policy,
    pub mean_p0: f64,
    pub p0: Vec<f64>,
    pub mean_latency_dt: f64,
    pub mean_latency_ns: f64,
}

impl RBResult {
    pub fn summaries(&self) -> Vec<Summary> {
        let mut out = Vec::new();
        for &length in &self.config.lengths {
            for policy in [Policy::Fixed, Policy::Optimized] {
                let runs: Vec<&PolicyRun> = self
                    .records
                    .iter()
                    .filter(|r| r.length == length)
                    .map(|r| r.run(policy))
                    .collect();
                let n = runs.len().max(1) as f64;
                let p0: Vec<f64> = runs.iter().map(|r| r.p0).collect();
                let lat = runs.iter().map(|r| r.latency_dt as f64).sum::<f64>() / n;
                out.push(Summary {
                    length,
                    policy,
                    mean_p0: p0.iter().sum::<f64>() / n,
                    p0,
                    mean_latency_dt: lat,
                    mean_latency_ns: lat * DT_NS,
                });
            }
        }
        out
    }

    pub fn mean_p0(&self, length: usize, policy: Policy) -> f64 {
        self.summaries()
            .into_iter()
            .find(|s| s.length == length && s.policy == policy)
            .map_or(f64::NAN, |s| s.mean_p0)
    }

    /// Every circuit kept its latency.
    pub fn latencies_match(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.fixed.latency_dt == r.optimized.latency_dt)
    }

    /// Fraction of pulses left at their minimum duration.
    pub fn minimum_fraction(&self, policy: Policy) -> f64 {
        let (at, total) = self
            .records
            .iter()
            .map(|r| r.run(policy))
            .fold((0usize, 0usize), |(a, t), r| {
                (a + r.at_minimum, t + r.durations.len())
            });
        if total == 0 {
            1.0
        } else {
            at as f64 / total as f64
        }
    }
}

/// Frequency of each chosen pulse duration (in dt).
pub fn duration_histogram(results: &RBResult, policy: Policy) -> BTreeMap<u64, usize> {
    let mut h = BTreeMap::new();
    for r in &results.records {
        for &d in &r.run(policy).durations {
            *h.entry(d).or_insert(0) += 1;
        }
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-circuit seed derived from the master seed.
pub fn circuit_seed(master: u64, length: usize, index: usize) -> u64 {
    splitmix(splitmix(master ^ splitmix(length as u64)) ^ index as u64)
}

fn policy_run(
    sch: &Schedule,
    gs: &GateSet,
    sim: &Simulator,
    shots: u64,
    seed: u64,
) -> Result<PolicyRun, BenchError> {
    let out = sim.run(sch, shots, seed)?;
    let mut durations = Vec::new();
    let mut at_minimum = 0;
    for op in sch.ops.iter().filter(|o| o.kind.is_pulse()) {
        durations.push(op.duration);
        if op.duration == gs.min_duration(op.qubits[0], op.kind, op.rotation)? {
            at_minimum += 1;
        }
    }
    let zeros = "0".repeat(sch.width);
    let p0_sampled = if shots == 0 {
        out.p0
    } else {
        out.counts.get(&zeros).copied().unwrap_or(0) as f64 / shots as f64
    };
    Ok(PolicyRun {
        p0: out.p0,
        p0_sampled,
        latency_dt: sch.makespan,
        durations,
        at_minimum,
    })
}

/// Runs every configured circuit under both policies. Circuits are processed
/// in parallel; results are ordered by (length, index).
pub fn run_rb(
    cfg: &RBConfig,
    gs: &GateSet,
    nm: &NoiseModel,
    model: GateModel,
) -> Result<RBResult, BenchError> {
    cfg.validate()?;
    if gs.mode() != cfg.mode {
        return Err(BenchError::Config(format!(
            "gate set is {:?}, config asks for {:?}",
            gs.mode(),
            cfg.mode
        )));
    }
    if gs.width < cfg.n_qubits {
        return Err(BenchError::Config(format!(
            "gate set covers {} qubits, need {}",
            gs.width, cfg.n_qubits
        )));
    }
    nm.validate(cfg.n_qubits)?;
    let gs = gs.with_bounds(cfg.min_duration, cfg.max_duration)?;
    let sim = Simulator::new(nm, model);
    let jobs: Vec<(usize, usize)> = cfg
        .lengths
        .iter()
        .flat_map(|&l| (0..cfg.circuits_per_length).map(move |i| (l, i)))
        .collect();
    let records: Result<Vec<CircuitRecord>, BenchError> = jobs
        .par_iter()
        .map(|&(length, index)| {
            let seed = circuit_seed(cfg.seed, length, index);
            let c = random_clifford_circuit(cfg.n_qubits, length, seed);
            let (fixed, _) = compile(&c, &gs, false)?;
            let (optimized, _) = compile(&c, &gs, true)?;
            if fixed.makespan != optimized.makespan {
                return Err(BenchError::LatencyMismatch {
                    length,
                    index,
                    fixed: fixed.makespan,
                    optimized: optimized.makespan,
                });
            }
            let shot_seed = splitmix(seed);
            Ok(CircuitRecord {
                length,
                index,
                seed,
                gates: c.len(),
                fixed: policy_run(&fixed, &gs, &sim, cfg.shots, shot_seed)?,
                optimized: policy_run(&optimized, &gs, &sim, cfg.shots, shot_seed)?,
            })
        })
        .collect();
    Ok(RBResult {
        config: cfg.clone(),
        records: records?,
    })
}

pub fn write_rbresult_csv<W: Write>(res: &RBResult, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n_qubits",
        "mode",
        "length",
        "circuit",
        "policy",
        "p0",
        "p0_sampled",
        "latency_dt",
        "latency_ns",
    ])?;
    let mode = format!("{:?}", res.config.mode).to_lowercase();
    for r in &res.records {
        for p in [Policy::Fixed, Policy::Optimized] {
            let run = r.run(p);
            w.write_record([
                res.config.n_qubits.to_string(),
                mode.clone(),
                r.length.to_string(),
                r.index.to_string(),
                p.name().to_string(),
                run.p0.to_string(),
                run.p0_sampled.to_string(),
                run.latency_dt.to_string(),
                (run.latency_dt as f64 * DT_NS).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_durations_csv<W: Write>(res: &RBResult, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n_qubits",
        "mode",
        "policy",
        "duration_dt",
        "count",
        "fraction",
    ])?;
    let mode = format!("{:?}", res.config.mode).to_lowercase();
    for p in [Policy::Fixed, Policy::Optimized] {
        let h = duration_histogram(res, p);
        let total: usize = h.values().sum();
        for (d, c) in h {
            w.write_record([
                res.config.n_qubits.to_string(),
                mode.clone(),
                p.name().to_string(),
                d.to_string(),
                c.to_string(),
                (c as f64 / total.max(1) as f64).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of the decay-reference table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimescaleRow {
    pub time_ns: f64,
    pub mean_p0: f64,
    pub policy: Policy,
    pub length: usize,
    pub exp_t1: f64,
    pub exp_t2: f64,
}

/// Mean P(0) against mean latency, with `e^{−t/T1}` and `e^{−t/T2}` for the
/// register's average T1 and T2.
pub fn export_timescale(res: &RBResult, nm: &NoiseModel) -> Vec<TimescaleRow> {
    let n = res.config.n_qubits.max(1);
    let avg = |f: &dyn Fn(usize) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = (0..n).map(f).collect();
        v.map(|v| v.iter().sum::<f64>() / n as f64)
    };
    let t1 = avg(&|q| nm.qubit(q).t1_ns);
    let t2 = avg(&|q| nm.qubit(q).t2_ns);
    let decay = |t: f64, tau: Option<f64>| tau.map_or(1.0, |tau| (-t / tau).exp());
    res.summaries()
        .into_iter()
        .map(|s| TimescaleRow {
            time_ns: s.mean_latency_ns,
            mean_p0: s.mean_p0,
            policy: s.policy,
            length: s.length,
            exp_t1: decay(s.mean_latency_ns, t1),
            exp_t2: decay(s.mean_latency_ns, t2),
        })
        .collect()
}

pub fn write_timescale_csv<W: Write>(rows: &[TimescaleRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_ns", "mean_p0", "policy", "length", "exp_t1", "exp_t2"])?;
    for r in rows {
        w.write_record([
            r.time_ns.to_string(),
            r.mean_p0.to_string(),
            r.policy.name().to_string(),
            r.length.to_string(),
            r.exp_t1.to_string(),
            r.exp_t2.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rbresult.csv, durations.csv and timescale.csv into `dir`.
pub fn write_outputs(res: &RBResult, nm: &NoiseModel, dir: &Path) -> Result<(), crate::Error> {
    std::fs::create_dir_all(dir)?;
    write_rbresult_csv(res, std::fs::File::create(dir.join("rbresult.csv"))?)?;
    write_durations_csv(res, std::fs::File::create(dir.join("durations.csv"))?)?;
    write_timescale_csv(
        &export_timescale(res, nm),
        std::fs::File::create(dir.join("timescale.csv"))?,
    )?;
    Ok(())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

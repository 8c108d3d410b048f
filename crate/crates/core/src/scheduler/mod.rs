//! Dependency graph, Critical Path Method and latency-neutral duration
//! stretching.
//!
//! Nodes are physical operations in program order; an edge joins the last
//! earlier operation on each operand qubit to the next one. Virtual Rz gates
//! are not nodes: they accumulate into a per-qubit frame that is stamped onto
//! every later pulse on that qubit.

mod schedule;

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::gateset::{GateSet, GateSetError};
use crate::linalg::wrap_angle;

pub use schedule::{
    compile, create_schedule, run_framework, FrameShift, Schedule, ScheduledOp, TimelineEntry,
    WaveformEntry,
};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("malformed dependency graph: {0}")]
    MalformedGraph(String),
    #[error("overlapping operations on qubit {qubit} (gate {gate_id})")]
    Overlap { qubit: usize, gate_id: usize },
    #[error("{0} must be decomposed before scheduling")]
    Undecomposed(GateKind),
    #[error("missing duration for gate {0}")]
    MissingDuration(usize),
    #[error(transparent)]
    GateSet(#[from] GateSetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepNode {
    pub gate: Gate,
    pub duration: u64,
    pub es: u64,
    pub ef: u64,
    pub ls: u64,
    pub lf: u64,
    /// Priority numerator: π/2 for Sx and Sx†, `|θ|` for Rx.
    pub rotation: f64,
    /// Drive phase per operand qubit, `−Σ Rz` accumulated before this node.
    pub frames: Vec<f64>,
    /// Ascending allowed durations; a single entry means the node is fixed.
    pub allowed: Vec<u64>,
}

impl DepNode {
    pub fn slack(&self) -> u64 {
        self.ls - self.es
    }

    pub fn is_critical(&self) -> bool {
        self.es == self.ls && self.ef == self.lf
    }

    pub fn priority(&self) -> f64 {
        if self.duration == 0 {
            0.0
        } else {
            self.rotation / self.duration as f64
        }
    }

    pub fn max_duration(&self) -> u64 {
        self.allowed.last().copied().unwrap_or(self.duration)
    }

    /// Smallest allowed duration strictly above the current one, or the
    /// current one if there is none.
    pub fn next_duration(&self) -> u64 {
        crate::gateset::next_duration(&self.allowed, self.duration)
    }

    fn extendable(&self) -> bool {
        self.gate.kind.is_pulse() && self.allowed.len() > 1
    }
}

/// A virtual Rz in program order, with the node it follows on its qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameChange {
    pub gate_id: usize,
    pub qubit: usize,
    pub angle: f64,
    pub after: Option<usize>,
    /// Frame on the qubit once this change is applied.
    pub frame: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepGraph {
    pub width: usize,
    pub nodes: Vec<DepNode>,
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
    /// First and last node on each qubit.
    pub entry: Vec<Option<usize>>,
    pub exit: Vec<Option<usize>>,
    pub frame_changes: Vec<FrameChange>,
    pub makespan: u64,
}

impl DepGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
            .collect()
    }

    /// A bare DAG with the given durations; nodes carry placeholder gates.
    pub fn from_dag(durations: &[u64], edges: &[(usize, usize)]) -> Self {
        let n = durations.len();
        let mut g = DepGraph {
            succ: vec![Vec::new(); n],
            pred: vec![Vec::new(); n],
            ..Default::default()
        };
        for (i, &d) in durations.iter().enumerate() {
            g.nodes.push(DepNode {
                gate: Gate {
                    id: i,
                    kind: GateKind::Sx,
                    qubits: Vec::new(),
                    angles: Vec::new(),
                },
                duration: d,
                es: 0,
                ef: 0,
                ls: 0,
                lf: 0,
                rotation: std::f64::consts::FRAC_PI_2,
                frames: Vec::new(),
                allowed: vec![d],
            });
        }
        for &(u, v) in edges {
            if !g.succ[u].contains(&v) {
                g.succ[u].push(v);
                g.pred[v].push(u);
            }
        }
        g
    }

    pub fn critical_path(&self) -> BTreeSet<usize> {
        critical_path(self)
    }
}

fn check_decomposed(g: &Gate) -> Result<(), ScheduleError> {
    if g.kind == GateKind::U3 {
        return Err(ScheduleError::Undecomposed(g.kind));
    }
    Ok(())
}

/// Builds the graph with explicit fixed durations indexed by gate id (Rz
/// entries are ignored).
pub fn build_graph(c: &Circuit, durations: &[u64]) -> Result<DepGraph, ScheduleError> {
    build_graph_with(c, |g| {
        let d = *durations
            .get(g.id)
            .ok_or(ScheduleError::MissingDuration(g.id))?;
        Ok(vec![d])
    })
}

/// Builds the graph with each node at the minimum duration the gate set
/// offers, remembering the full allowed list for later stretching.
pub fn build_graph_from_gateset(c: &Circuit, gs: &GateSet) -> Result<DepGraph, ScheduleError> {
    build_graph_with(c, |g| {
        let q = g.qubits[0];
        let angle = g.angles.first().copied().unwrap_or(0.0);
        match g.kind {
            GateKind::Measure | GateKind::Barrier => Ok(vec![0]),
            kind => Ok(gs.durations(q, kind, angle)?),
        }
    })
}

fn build_graph_with(
    c: &Circuit,
    mut allowed_for: impl FnMut(&Gate) -> Result<Vec<u64>, ScheduleError>,
) -> Result<DepGraph, ScheduleError> {
    let mut g = DepGraph {
        width: c.width,
        entry: vec![None; c.width],
        exit: vec![None; c.width],
        ..Default::default()
    };
    let mut frame = vec![0.0f64; c.width];
    for gate in &c.gates {
        check_decomposed(gate)?;
        if gate.kind.is_virtual() {
            let q = gate.qubits[0];
            frame[q] = wrap_angle(frame[q] - gate.angles[0]);
            g.frame_changes.push(FrameChange {
                gate_id: gate.id,
                qubit: q,
                angle: gate.angles[0],
                after: g.exit[q],
                frame: frame[q],
            });
            continue;
        }
        let allowed = allowed_for(gate)?;
        let idx = g.nodes.len();
        let mut preds: Vec<usize> = Vec::new();
        for &q in &gate.qubits {
            if let Some(p) = g.exit[q] {
                if !preds.contains(&p) {
                    preds.push(p);
                }
            }
            if g.entry[q].is_none() {
                g.entry[q] = Some(idx);
            }
            g.exit[q] = Some(idx);
        }
        g.succ.push(Vec::new());
        for &p in &preds {
            g.succ[p].push(idx);
        }
        g.pred.push(preds);
        let rotation = match gate.kind {
            GateKind::Sx | GateKind::SxDg => std::f64::consts::FRAC_PI_2,
            GateKind::Rx => gate.angles[0].abs(),
            _ => 0.0,
        };
        g.nodes.push(DepNode {
            gate: gate.clone(),
            duration: allowed[0],
            es: 0,
            ef: 0,
            ls: 0,
            lf: 0,
            rotation,
            frames: gate.qubits.iter().map(|&q| frame[q]).collect(),
            allowed,
        });
    }
    Ok(g)
}

/// Kahn's algorithm; among ready nodes the smallest index goes first.
pub fn topological_order(g: &DepGraph) -> Result<Vec<usize>, ScheduleError> {
    let n = g.len();
    let mut indeg: Vec<usize> = g.pred.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &g.succ[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(std::cmp::Reverse(v));
            }
        }
    }
    if order.len() != n {
        return Err(ScheduleError::MalformedGraph(format!(
            "cycle among {} nodes",
            n - order.len()
        )));
    }
    Ok(order)
}

/// Forward and backward passes. Returns the makespan.
pub fn cpm(g: &mut DepGraph) -> Result<u64, ScheduleError> {
    let order = topological_order(g)?;
    Ok(cpm_with_order(g, &order))
}

fn cpm_with_order(g: &mut DepGraph, order: &[usize]) -> u64 {
    for &u in order {
        let es = g.pred[u].iter().map(|&p| g.nodes[p].ef).max().unwrap_or(0);
        let node = &mut g.nodes[u];
        node.es = es;
        node.ef = es + node.duration;
    }
    let makespan = g.nodes.iter().map(|n| n.ef).max().unwrap_or(0);
    for &u in order.iter().rev() {
        let lf = g.succ[u]
            .iter()
            .map(|&s| g.nodes[s].ls)
            .min()
            .unwrap_or(makespan);
        let node = &mut g.nodes[u];
        node.lf = lf;
        node.ls = lf - node.duration;
    }
    g.makespan = makespan;
    makespan
}

/// Nodes without slack.
pub fn critical_path(g: &DepGraph) -> BTreeSet<usize> {
    (0..g.len()).filter(|&i| g.nodes[i].is_critical()).collect()
}

/// Incremental CPM after `changed` has had its duration, EF and LS updated,
/// walking the topological order forward and then backward from its position.
pub fn update_cpm(g: &mut DepGraph, order: &[usize], position: &[usize], changed: usize) {
    let i = position[changed];
    for &u in &order[i..] {
        let ef = g.nodes[u].ef;
        for k in 0..g.succ[u].len() {
            let s = g.succ[u][k];
            let sn = &mut g.nodes[s];
            if ef > sn.es {
                sn.es = ef;
                sn.ef = sn.es + sn.duration;
            }
        }
    }
    for &u in order[..=i].iter().rev() {
        let ls = g.nodes[u].ls;
        for k in 0..g.pred[u].len() {
            let p = g.pred[u][k];
            let pn = &mut g.nodes[p];
            if ls < pn.lf {
                pn.lf = ls;
                pn.ls = pn.lf - pn.duration;
            }
        }
    }
}

#[derive(Debug, PartialEq)]
struct Entry {
    priority: f64,
    gate_id: usize,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.gate_id.cmp(&self.gate_id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Stretches non-critical pulses, highest rotation/duration first, without
/// changing the makespan. Requires a prior [`cpm`].
pub fn optimize_durations(g: &mut DepGraph) -> Result<(), ScheduleError> {
    let order = topological_order(g)?;
    let mut position = vec![0usize; g.len()];
    for (i, &u) in order.iter().enumerate() {
        position[u] = i;
    }
    let mut queue = BinaryHeap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        if !n.is_critical() && n.extendable() {
            queue.push(Entry {
                priority: n.priority(),
                gate_id: n.gate.id,
                node: i,
            });
        }
    }
    while let Some(Entry { node, .. }) = queue.pop() {
        let d = g.nodes[node].next_duration();
        let n = &mut g.nodes[node];
        if d > n.duration && n.es + d <= n.lf {
            n.duration = d;
            n.ef = n.es + d;
            n.ls = n.lf - d;
            update_cpm(g, &order, &position, node);
            let n = &g.nodes[node];
            if d < n.max_duration() {
                queue.push(Entry {
                    priority: n.priority(),
                    gate_id: n.gate.id,
                    node,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_circuit_graph() {
        let g = build_graph(&Circuit::new(0), &[]).unwrap();
        assert!(g.is_empty());
        let mut g = g;
        assert_eq!(cpm(&mut g).unwrap(), 0);
    }

    #[test]
    fn single_gate_times() {
        let mut g = DepGraph::from_dag(&[64], &[]);
        assert_eq!(cpm(&mut g).unwrap(), 64);
        let n = &g.nodes[0];
        assert_eq!((n.es, n.ef, n.ls, n.lf), (0, 64, 0, 64));
    }

    #[test]
    fn chain_order_and_critical() {
        let mut g = DepGraph::from_dag(&[3, 4, 5], &[(0, 1), (1, 2)]);
        assert_eq!(topological_order(&g).unwrap(), vec![0, 1, 2]);
        cpm(&mut g).unwrap();
        assert_eq!(critical_path(&g).len(), 3);
    }

    #[test]
    fn cycle_is_rejected() {
        let g = DepGraph::from_dag(&[1, 1], &[(0, 1), (1, 0)]);
        assert!(matches!(
            topological_order(&g),
            Err(ScheduleError::MalformedGraph(_))
        ));
    }

    #[test]
    fn frames_accumulate_negated_rz() {
        let mut c = Circuit::new(1);
        c.rz(0, 0.5).sx(0).rz(0, 0.25).sx(0);
        let g = build_graph(&c, &[0, 64, 0, 64]).unwrap();
        assert_eq!(g.nodes[0].frames, vec![-0.5]);
        assert_eq!(g.nodes[1].frames, vec![-0.75]);
        assert_eq!(g.frame_changes.len(), 2);
        assert_eq!(g.frame_changes[1].after, Some(0));
    }

    #[test]
    fn all_critical_graph_is_unchanged() {
        let mut g = DepGraph::from_dag(&[10, 20], &[(0, 1)]);
        for n in &mut g.nodes {
            n.allowed = vec![n.duration, n.duration * 2];
        }
        cpm(&mut g).unwrap();
        let before = g.clone();
        optimize_durations(&mut g).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn sink_extension_touches_only_itself() {
        // 0 → 2, 1 → 2 is not a sink case; use 0 → 1 and an isolated short 2.
        let mut g = DepGraph::from_dag(&[10, 10, 5], &[(0, 1)]);
        cpm(&mut g).unwrap();
        let order = topological_order(&g).unwrap();
        let mut pos = vec![0; 3];
        for (i, &u) in order.iter().enumerate() {
            pos[u] = i;
        }
        let before = g.clone();
        let n = &mut g.nodes[2];
        n.duration = 12;
        n.ef = n.es + 12;
        n.ls = n.lf - 12;
        update_cpm(&mut g, &order, &pos, 2);
        assert_eq!(g.nodes[0], before.nodes[0]);
        assert_eq!(g.nodes[1], before.nodes[1]);
        let mut full = g.clone();
        cpm(&mut full).unwrap();
        assert_eq!(full.nodes, g.nodes);
    }
}

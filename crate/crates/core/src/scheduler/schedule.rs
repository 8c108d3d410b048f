use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{
    build_graph_from_gateset, cpm, critical_path, optimize_durations, DepGraph, ScheduleError,
};
use crate::circuit::{decompose_dynamic, decompose_static, merge_virtual_z, Circuit, GateKind};
use crate::gateset::{GateSet, Mode};
use crate::pulse::ShapeSpec;

/// One placed operation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduledOp {
    pub node: usize,
    pub gate_id: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub start: u64,
    pub duration: u64,
    pub rotation: f64,
    pub frames: Vec<f64>,
    pub waveform: Option<usize>,
}

impl ScheduledOp {
    pub fn end(&self) -> u64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveformEntry {
    pub id: usize,
    pub qubit: usize,
    pub spec: ShapeSpec,
}

/// A virtual Rz placed on a timeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameShift {
    pub gate_id: usize,
    pub qubit: usize,
    pub time: u64,
    pub angle: f64,
    pub frame: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Schedule {
    pub width: usize,
    pub makespan: u64,
    pub ops: Vec<ScheduledOp>,
    pub waveforms: Vec<WaveformEntry>,
    pub frame_shifts: Vec<FrameShift>,
}

/// One element of a qubit's exported timeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineEntry {
    pub kind: String,
    pub gate_id: Option<usize>,
    pub start_dt: u64,
    pub duration_dt: u64,
    pub waveform_id: Option<usize>,
    pub phase_frame: f64,
}

impl Schedule {
    /// Pulse durations chosen for single-qubit drive gates.
    pub fn pulse_durations(&self) -> impl Iterator<Item = u64> + '_ {
        self.ops
            .iter()
            .filter(|o| o.kind.is_pulse())
            .map(|o| o.duration)
    }

    /// Per-qubit list of pulses, frame changes and idles covering `[0, makespan]`.
    pub fn timeline(&self, q: usize) -> Vec<TimelineEntry> {
        let mut items: Vec<(u64, u8, usize, TimelineEntry)> = Vec::new();
        for op in self.ops.iter().filter(|o| o.qubits.contains(&q)) {
            let k = op.qubits.iter().position(|&x| x == q).unwrap();
            items.push((
                op.start,
                1,
                op.gate_id,
                TimelineEntry {
                    kind: op.kind.name().to_string(),
                    gate_id: Some(op.gate_id),
                    start_dt: op.start,
                    duration_dt: op.duration,
                    waveform_id: op.waveform,
                    phase_frame: op.frames[k],
                },
            ));
        }
        for fs in self.frame_shifts.iter().filter(|f| f.qubit == q) {
            items.push((
                fs.time,
                0,
                fs.gate_id,
                TimelineEntry {
                    kind: "rz".into(),
                    gate_id: Some(fs.gate_id),
                    start_dt: fs.time,
                    duration_dt: 0,
                    waveform_id: None,
                    phase_frame: fs.frame,
                },
            ));
        }
        items.sort_by_key(|(t, rank, id, e)| (*t, e.duration_dt > 0, *rank, *id));
        let mut out = Vec::with_capacity(items.len() * 2);
        let mut clock = 0u64;
        let mut frame = 0.0;
        for (_, _, _, e) in items {
            if e.start_dt > clock {
                out.push(delay(clock, e.start_dt - clock, frame));
            }
            clock = clock.max(e.start_dt + e.duration_dt);
            if e.kind == "rz" {
                frame = e.phase_frame;
            }
            out.push(e);
        }
        if self.makespan > clock {
            out.push(delay(clock, self.makespan - clock, frame));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let qubits: Vec<Vec<TimelineEntry>> = (0..self.width).map(|q| self.timeline(q)).collect();
        serde_json::json!({
            "width": self.width,
            "makespan_dt": self.makespan,
            "dt_ns": crate::DT_NS,
            "qubits": qubits,
            "waveforms": self.waveforms,
        })
    }

    /// Errors if two operations overlap on any qubit.
    pub fn check_overlaps(&self) -> Result<(), ScheduleError> {
        for q in 0..self.width {
            let mut on_q: Vec<&ScheduledOp> =
                self.ops.iter().filter(|o| o.qubits.contains(&q)).collect();
            on_q.sort_by_key(|o| (o.start, o.node));
            for w in on_q.windows(2) {
                if w[1].start < w[0].end() {
                    return Err(ScheduleError::Overlap {
                        qubit: q,
                        gate_id: w[1].gate_id,
                    });
                }
            }
        }
        Ok(())
    }
}

fn delay(start: u64, len: u64, frame: f64) -> TimelineEntry {
    TimelineEntry {
        kind: "delay".into(),
        gate_id: None,
        start_dt: start,
        duration_dt: len,
        waveform_id: None,
        phase_frame: frame,
    }
}

/// Places every node at its ES and attaches its waveform from `gs`.
pub fn create_schedule(g: &DepGraph, gs: Option<&GateSet>) -> Result<Schedule, ScheduleError> {
    let mut sch = Schedule {
        width: g.width,
        makespan: g.makespan,
        ..Default::default()
    };
    let mut library: HashMap<(usize, String), usize> = HashMap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        let waveform = match gs {
            Some(gs) if n.gate.kind.is_pulse() => {
                let q = n.gate.qubits[0];
                let spec = gs.pulse_spec(q, n.gate.kind, n.rotation, n.duration)?;
                let key = (q, format!("{spec:?}"));
                let next = sch.waveforms.len();
                let id = *library.entry(key).or_insert(next);
                if id == next {
                    sch.waveforms.push(WaveformEntry { id, qubit: q, spec });
                }
                Some(id)
            }
            _ => None,
        };
        sch.ops.push(ScheduledOp {
            node: i,
            gate_id: n.gate.id,
            kind: n.gate.kind,
            qubits: n.gate.qubits.clone(),
            start: n.es,
            duration: n.duration,
            rotation: n.rotation,
            frames: n.frames.clone(),
            waveform,
        });
    }
    for fc in &g.frame_changes {
        let time = fc.after.map_or(0, |a| g.nodes[a].ef);
        sch.frame_shifts.push(FrameShift {
            gate_id: fc.gate_id,
            qubit: fc.qubit,
            time,
            angle: fc.angle,
            frame: fc.frame,
        });
    }
    sch.check_overlaps()?;
    Ok(sch)
}

/// Graph, CPM at minimum durations, optional stretching, schedule.
pub fn run_framework(
    c: &Circuit,
    gs: &GateSet,
    optimize: bool,
) -> Result<(Schedule, DepGraph), ScheduleError> {
    let mut g = build_graph_from_gateset(c, gs)?;
    cpm(&mut g)?;
    if optimize {
        optimize_durations(&mut g)?;
    }
    let sch = create_schedule(&g, Some(gs))?;
    Ok((sch, g))
}

/// Decomposes `c` for the gate set's mode, merges frame changes and runs the
/// framework.
pub fn compile(
    c: &Circuit,
    gs: &GateSet,
    optimize: bool,
) -> Result<(Schedule, DepGraph), ScheduleError> {
    let lowered = match gs.mode() {
        Mode::Static => decompose_static(c),
        Mode::Dynamic => decompose_dynamic(c),
    };
    run_framework(&merge_virtual_z(&lowered), gs, optimize)
}

impl DepGraph {
    /// Graphviz form; labels read `id:ES/EF/LS/LF`, critical nodes in red.
    pub fn to_dot(&self) -> String {
        let critical = critical_path(self);
        let mut s = String::from("digraph deps {\n  rankdir=LR;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let qs: Vec<String> = n.gate.qubits.iter().map(|q| format!("q{q}")).collect();
            let color = if critical.contains(&i) {
                ", color=red"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "  n{i} [label=\"{}:{}/{}/{}/{}\", tooltip=\"{} {}\"{color}];",
                n.gate.id,
                n.es,
                n.ef,
                n.ls,
                n.lf,
                n.gate.kind,
                qs.join(" ")
            );
        }
        for (u, v) in self.edges() {
            let color = if critical.contains(&u) && critical.contains(&v) {
                " [color=red]"
            } else {
                ""
            };
            let _ = writeln!(s, "  n{u} -> n{v}{color};");
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateset::DurationPolicy;

    fn nominal(min: u64) -> GateSet {
        GateSet::nominal(DurationPolicy::static_mode(min, 512), 2, 105e6).unwrap()
    }

    #[test]
    fn chain_starts_back_to_back() {
        let mut c = Circuit::new(1);
        c.sx(0).sx(0);
        let (sch, _) = run_framework(&c, &nominal(64), false).unwrap();
        assert_eq!(
            sch.ops.iter().map(|o| o.start).collect::<Vec<_>>(),
            vec![0, 64]
        );
        assert_eq!(sch.makespan, 128);
        assert_eq!(sch.waveforms.len(), 1);
    }

    #[test]
    fn single_gate_is_one_pulse_at_zero() {
        let mut c = Circuit::new(1);
        c.sx(0);
        let (sch, _) = run_framework(&c, &nominal(32), true).unwrap();
        assert_eq!(sch.ops.len(), 1);
        assert_eq!(sch.ops[0].start, 0);
    }

    #[test]
    fn timeline_fills_idles_and_frames() {
        let mut c = Circuit::new(2);
        c.sx(0).sx(0).rz(1, 0.5).ecr(0, 1);
        let (sch, _) = run_framework(&c, &nominal(64), false).unwrap();
        let t1 = sch.timeline(1);
        let kinds: Vec<&str> = t1.iter().map(|e| e.kind.as_str()).collect();
        assert_eq!(kinds, vec!["rz", "delay", "ecr"]);
        assert_eq!(t1[1].duration_dt, 128);
        assert_eq!(t1[2].phase_frame, -0.5);
        let json = sch.to_json();
        assert_eq!(json["qubits"][0][0]["start_dt"], 0);
        assert!(json["qubits"][1][2].get("waveform_id").is_some());
    }

    #[test]
    fn overlap_is_detected() {
        let mut c = Circuit::new(1);
        c.sx(0).sx(0);
        let (mut sch, _) = run_framework(&c, &nominal(64), false).unwrap();
        sch.ops[1].start = 10;
        assert!(matches!(
            sch.check_overlaps(),
            Err(ScheduleError::Overlap { qubit: 0, .. })
        ));
    }

    #[test]
    fn dot_labels() {
        let mut c = Circuit::new(1);
        c.sx(0);
        let (_, g) = run_framework(&c, &nominal(64), false).unwrap();
        assert!(g.to_dot().contains("label=\"0:0/64/0/64\""));
    }

    #[test]
    fn undecomposed_u3_is_rejected() {
        let mut c = Circuit::new(1);
        c.u3(0, 0.1, 0.2, 0.3);
        assert!(run_framework(&c, &nominal(64), false).is_err());
        assert!(compile(&c, &nominal(64), true).is_ok());
    }
}

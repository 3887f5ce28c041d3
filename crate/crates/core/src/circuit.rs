//! Circuit IR: gates, circuits, the gate dependency DAG, metrics, wire
//! relabeling and MMR segmentation.
//!
//! A mid-circuit measurement and reset (MMR) is a `Measure` immediately
//! followed by a `Reset` on the same wire.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ResizeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    Cnot,
    Cz,
    H,
    X,
    Rz,
    Rx,
    U3,
    VariableBlock,
    Measure,
    Reset,
    Barrier,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Cnot => "cx",
            GateKind::Cz => "cz",
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Rz => "rz",
            GateKind::Rx => "rx",
            GateKind::U3 => "u3",
            GateKind::VariableBlock => "block",
            GateKind::Measure => "measure",
            GateKind::Reset => "reset",
            GateKind::Barrier => "barrier",
        }
    }

    /// True for gates with a unitary meaning (everything but measure, reset
    /// and barrier).
    pub fn is_unitary(self) -> bool {
        !matches!(self, GateKind::Measure | GateKind::Reset | GateKind::Barrier)
    }

    pub fn is_mmr(self) -> bool {
        matches!(self, GateKind::Measure | GateKind::Reset)
    }

    pub fn num_params(self) -> usize {
        match self {
            GateKind::U3 => 3,
            GateKind::Rz | GateKind::Rx => 1,
            _ => 0,
        }
    }
}

/// One instruction. For `VariableBlock` the block dimension is `wires.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub params: Vec<f64>,
}

impl Gate {
    pub fn new(kind: GateKind, wires: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let gate = Gate { kind, wires, params };
        gate.check()?;
        Ok(gate)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate { kind: GateKind::Cnot, wires: vec![control, target], params: vec![] }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Gate { kind: GateKind::Cz, wires: vec![a, b], params: vec![] }
    }

    pub fn h(wire: usize) -> Self {
        Gate { kind: GateKind::H, wires: vec![wire], params: vec![] }
    }

    pub fn x(wire: usize) -> Self {
        Gate { kind: GateKind::X, wires: vec![wire], params: vec![] }
    }

    pub fn rz(wire: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rz, wires: vec![wire], params: vec![angle] }
    }

    pub fn rx(wire: usize, angle: f64) -> Self {
        Gate { kind: GateKind::Rx, wires: vec![wire], params: vec![angle] }
    }

    pub fn u3(wire: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Gate { kind: GateKind::U3, wires: vec![wire], params: vec![theta, phi, lambda] }
    }

    pub fn block(wires: Vec<usize>) -> Self {
        Gate { kind: GateKind::VariableBlock, wires, params: vec![] }
    }

    pub fn measure(wire: usize) -> Self {
        Gate { kind: GateKind::Measure, wires: vec![wire], params: vec![] }
    }

    pub fn reset(wire: usize) -> Self {
        Gate { kind: GateKind::Reset, wires: vec![wire], params: vec![] }
    }

    pub fn barrier(wires: Vec<usize>) -> Self {
        Gate { kind: GateKind::Barrier, wires, params: vec![] }
    }

    pub fn block_dim(&self) -> usize {
        self.wires.len()
    }

    /// A unitary gate acting on exactly two wires.
    pub fn is_two_qubit(&self) -> bool {
        self.kind.is_unitary() && self.wires.len() == 2
    }

    fn check(&self) -> Result<()> {
        let arity_ok = match self.kind {
            GateKind::Cnot | GateKind::Cz => self.wires.len() == 2,
            GateKind::H
            | GateKind::X
            | GateKind::Rz
            | GateKind::Rx
            | GateKind::U3
            | GateKind::Measure
            | GateKind::Reset => self.wires.len() == 1,
            GateKind::VariableBlock | GateKind::Barrier => !self.wires.is_empty(),
        };
        if !arity_ok {
            return Err(ResizeError::InvalidGate(format!(
                "{} on {} wires",
                self.kind.name(),
                self.wires.len()
            )));
        }
        if self.params.len() != self.kind.num_params() {
            return Err(ResizeError::InvalidGate(format!(
                "{} takes {} params, got {}",
                self.kind.name(),
                self.kind.num_params(),
                self.params.len()
            )));
        }
        let distinct: BTreeSet<_> = self.wires.iter().collect();
        if distinct.len() != self.wires.len() {
            return Err(ResizeError::InvalidGate(format!(
                "{} has repeated wires {:?}",
                self.kind.name(),
                self.wires
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| format!("{p:.4}")).collect();
            write!(f, "({})", ps.join(","))?;
        }
        write!(f, " {:?}", self.wires)
    }
}

/// An ordered gate list over `width` wires. The list order is always a valid
/// topological order of the dependency DAG.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit { width, gates: Vec::new() }
    }

    pub fn from_gates(width: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(width);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check()?;
        if let Some(&w) = gate.wires.iter().find(|&&w| w >= self.width) {
            return Err(ResizeError::WireOutOfRange { wire: w, width: self.width });
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends `Measure(wire)` followed by `Reset(wire)`.
    pub fn push_mmr(&mut self, wire: usize) -> Result<()> {
        self.push(Gate::measure(wire))?;
        self.push(Gate::reset(wire))
    }

    pub fn into_gates(self) -> Vec<Gate> {
        self.gates
    }

    pub fn cx_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn has_mmr(&self) -> bool {
        self.gates.iter().any(|g| g.kind.is_mmr())
    }

    /// Indices of gates acting on `wire`, in order.
    pub fn gates_on(&self, wire: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.wires.contains(&wire))
            .map(|(i, _)| i)
            .collect()
    }

    /// Wires touched by at least one gate, ascending.
    pub fn used_wires(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.gates.iter().flat_map(|g| g.wires.iter().copied()).collect();
        set.into_iter().collect()
    }

    /// The same gate list on a wider register.
    pub fn widened(&self, width: usize) -> Result<Circuit> {
        Circuit::from_gates(width, self.gates.clone())
    }

    /// Drops measurements that are the last operation on their wire, and
    /// barriers with nothing after them on any of their wires.
    pub fn strip_terminal(&self) -> Circuit {
        let mut keep = vec![true; self.gates.len()];
        let mut live = vec![false; self.width];
        for (i, g) in self.gates.iter().enumerate().rev() {
            let terminal = g.wires.iter().all(|&w| !live[w]);
            match g.kind {
                GateKind::Measure | GateKind::Barrier if terminal => keep[i] = false,
                _ => {
                    for &w in &g.wires {
                        live[w] = true;
                    }
                }
            }
        }
        let gates = self
            .gates
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(g, _)| g.clone())
            .collect();
        Circuit { width: self.width, gates }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "circuit width={}", self.width)?;
        for g in &self.gates {
            writeln!(f, "  {g}")?;
        }
        Ok(())
    }
}

/// Gate dependency DAG: an edge `u -> v` whenever `v` is the next gate after
/// `u` on some shared wire.
#[derive(Debug, Clone)]
pub struct DepDag {
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl DepDag {
    pub fn num_nodes(&self) -> usize {
        self.preds.len()
    }

    pub fn num_edges(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    pub fn preds(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    pub fn succs(&self, node: usize) -> &[usize] {
        &self.succs[node]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.succs[from].contains(&to)
    }

    /// Membership mask of `node` and all its transitive ancestors.
    pub fn ancestors_inclusive(&self, nodes: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes()];
        let mut stack: Vec<usize> = nodes.to_vec();
        while let Some(n) = stack.pop() {
            if seen[n] {
                continue;
            }
            seen[n] = true;
            stack.extend(self.preds[n].iter().copied().filter(|&p| !seen[p]));
        }
        seen
    }

    /// True if `a` is a (strict) transitive ancestor of `b`.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        a != b && self.ancestors_inclusive(&[b])[a]
    }

    /// Whether `order` is a permutation of the nodes respecting every edge.
    pub fn is_topological_order(&self, order: &[usize]) -> bool {
        if order.len() != self.num_nodes() {
            return false;
        }
        let mut pos = vec![usize::MAX; self.num_nodes()];
        for (i, &n) in order.iter().enumerate() {
            if n >= pos.len() || pos[n] != usize::MAX {
                return false;
            }
            pos[n] = i;
        }
        (0..self.num_nodes()).all(|u| self.succs[u].iter().all(|&v| pos[u] < pos[v]))
    }
}

pub fn build_dag(circuit: &Circuit) -> DepDag {
    let n = circuit.len();
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    let mut last: Vec<Option<usize>> = vec![None; circuit.width()];
    for (i, g) in circuit.gates().iter().enumerate() {
        for &w in &g.wires {
            if let Some(p) = last[w] {
                if !preds[i].contains(&p) {
                    preds[i].push(p);
                    succs[p].push(i);
                }
            }
            last[w] = Some(i);
        }
    }
    DepDag { preds, succs }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CircuitStats {
    pub width: usize,
    pub cx_count: usize,
    pub two_qubit_depth: usize,
    pub weighted_depth: f64,
    pub mmr_count: usize,
}

/// Width, two-qubit gate count, two-qubit critical path, and the critical
/// path where each MMR costs `mmr_weight`. Single-qubit gates and barriers
/// weigh nothing.
pub fn metrics(circuit: &Circuit, mmr_weight: f64) -> CircuitStats {
    let mut depth = vec![0usize; circuit.width()];
    let mut weighted = vec![0f64; circuit.width()];
    let mut mmr_count = 0;
    let mut pending_measure = vec![false; circuit.width()];
    for g in circuit.gates() {
        let d_in = g.wires.iter().map(|&w| depth[w]).max().unwrap_or(0);
        let w_in = g.wires.iter().map(|&w| weighted[w]).fold(0.0, f64::max);
        let (d_step, w_step) = match g.kind {
            _ if g.is_two_qubit() => (1, 1.0),
            GateKind::Measure => (0, mmr_weight),
            _ => (0, 0.0),
        };
        for &w in &g.wires {
            depth[w] = d_in + d_step;
            weighted[w] = w_in + w_step;
        }
        match g.kind {
            GateKind::Measure => pending_measure[g.wires[0]] = true,
            GateKind::Reset => {
                if pending_measure[g.wires[0]] {
                    mmr_count += 1;
                }
                pending_measure[g.wires[0]] = false;
            }
            _ => {
                for &w in &g.wires {
                    pending_measure[w] = false;
                }
            }
        }
    }
    CircuitStats {
        width: circuit.width(),
        cx_count: circuit.cx_count(),
        two_qubit_depth: depth.into_iter().max().unwrap_or(0),
        weighted_depth: weighted.into_iter().fold(0.0, f64::max),
        mmr_count,
    }
}

/// Relabels wires. Every used wire must be mapped and the mapping must be
/// injective on used wires. The new width is the largest mapped index plus one.
pub fn remap_qubits(circuit: &Circuit, mapping: &BTreeMap<usize, usize>) -> Result<Circuit> {
    let mut inverse: BTreeMap<usize, usize> = BTreeMap::new();
    for w in circuit.used_wires() {
        let t = *mapping.get(&w).ok_or(ResizeError::UnmappedWire(w))?;
        if let Some(&prev) = inverse.get(&t) {
            return Err(ResizeError::WireCollision { a: prev, b: w, target: t });
        }
        inverse.insert(t, w);
    }
    let width = mapping.values().max().map_or(0, |m| m + 1);
    let gates = circuit
        .gates()
        .iter()
        .map(|g| Gate {
            kind: g.kind,
            wires: g.wires.iter().map(|w| mapping[w]).collect(),
            params: g.params.clone(),
        })
        .collect();
    Circuit::from_gates(width, gates)
}

/// A maximal run of unitary gates between MMRs.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// The segment's gates on the original register.
    pub circuit: Circuit,
    /// Wires the segment touches, ascending.
    pub wires: Vec<usize>,
    /// Index range `[start, end)` of the segment in the source gate list.
    pub start: usize,
    pub end: usize,
}

impl Partition {
    /// The segment relabeled onto `0..wires.len()`.
    pub fn compact(&self) -> Circuit {
        let mapping: BTreeMap<usize, usize> =
            self.wires.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        remap_qubits(&self.circuit, &mapping).expect("partition wires are distinct")
    }
}

/// Splits the gate list at every Measure/Reset. Empty segments are dropped,
/// except that a circuit without any unitary gates yields one empty segment.
pub fn partition_at_mmr(circuit: &Circuit) -> Vec<Partition> {
    let mut parts = Vec::new();
    let mut start = 0;
    let gates = circuit.gates();
    let flush = |start: usize, end: usize, parts: &mut Vec<Partition>| {
        if end > start {
            let seg: Vec<Gate> = gates[start..end].to_vec();
            let seg = Circuit::from_gates(circuit.width(), seg).expect("valid segment");
            let wires = seg.used_wires();
            parts.push(Partition { circuit: seg, wires, start, end });
        }
    };
    for (i, g) in gates.iter().enumerate() {
        if g.kind.is_mmr() {
            flush(start, i, &mut parts);
            start = i + 1;
        }
    }
    flush(start, gates.len(), &mut parts);
    if parts.is_empty() {
        parts.push(Partition {
            circuit: Circuit::new(circuit.width()),
            wires: vec![],
            start: 0,
            end: 0,
        });
    }
    parts
}

/// Rebuilds `circuit` with some partitions replaced. Each replacement is given
/// on the partition's compact register and is expanded back onto its wires.
pub fn reassemble(
    circuit: &Circuit,
    parts: &[Partition],
    replacements: &BTreeMap<usize, Circuit>,
) -> Result<Circuit> {
    let mut out = Circuit::new(circuit.width());
    let mut cursor = 0;
    for (idx, part) in parts.iter().enumerate() {
        for g in &circuit.gates()[cursor..part.start] {
            out.push(g.clone())?;
        }
        match replacements.get(&idx) {
            Some(rep) => {
                let mapping: BTreeMap<usize, usize> =
                    part.wires.iter().enumerate().map(|(i, &w)| (i, w)).collect();
                for g in rep.gates() {
                    let wires = g
                        .wires
                        .iter()
                        .map(|w| mapping.get(w).copied().ok_or(ResizeError::UnmappedWire(*w)))
                        .collect::<Result<Vec<_>>>()?;
                    out.push(Gate { kind: g.kind, wires, params: g.params.clone() })?;
                }
            }
            None => {
                for g in &circuit.gates()[part.start..part.end] {
                    out.push(g.clone())?;
                }
            }
        }
        cursor = part.end;
    }
    for g in &circuit.gates()[cursor..] {
        out.push(g.clone())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_invariants() {
        assert!(Gate::new(GateKind::U3, vec![0], vec![0.0, 0.0]).is_err());
        assert!(Gate::new(GateKind::Cnot, vec![1, 1], vec![]).is_err());
        assert!(Gate::new(GateKind::Rz, vec![0], vec![0.1]).is_ok());
        let mut c = Circuit::new(2);
        assert_eq!(
            c.push(Gate::h(2)),
            Err(ResizeError::WireOutOfRange { wire: 2, width: 2 })
        );
    }

    #[test]
    fn dag_basic_cases() {
        assert_eq!(build_dag(&Circuit::new(3)).num_nodes(), 0);

        let c = Circuit::from_gates(3, vec![Gate::cnot(0, 1), Gate::cnot(1, 2)]).unwrap();
        let d = build_dag(&c);
        assert!(d.has_edge(0, 1));
        assert_eq!(d.num_edges(), 1);

        let c = Circuit::from_gates(4, vec![Gate::cnot(0, 1), Gate::cnot(2, 3)]).unwrap();
        let d = build_dag(&c);
        assert_eq!((d.num_nodes(), d.num_edges()), (2, 0));
    }

    #[test]
    fn dag_parallel_wires_single_edge() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1), Gate::cnot(1, 0)]).unwrap();
        let d = build_dag(&c);
        assert_eq!(d.num_edges(), 1);
        assert!(d.is_ancestor(0, 1));
        assert!(!d.is_ancestor(1, 0));
    }

    #[test]
    fn metrics_examples() {
        let s = metrics(&Circuit::new(0), 4.0);
        assert_eq!(s, CircuitStats::default());

        let c = Circuit::from_gates(
            3,
            vec![Gate::cnot(0, 1), Gate::cnot(1, 2), Gate::cnot(0, 1)],
        )
        .unwrap();
        let s = metrics(&c, 4.0);
        assert_eq!((s.cx_count, s.two_qubit_depth), (3, 3));
    }

    #[test]
    fn metrics_weights_mmr() {
        let mut c = Circuit::new(2);
        c.push(Gate::cnot(0, 1)).unwrap();
        c.push_mmr(0).unwrap();
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::cnot(0, 1)).unwrap();
        c.push(Gate::barrier(vec![0, 1])).unwrap();
        let s = metrics(&c, 4.0);
        assert_eq!(s.two_qubit_depth, 2);
        assert_eq!(s.weighted_depth, 6.0);
        assert_eq!(s.mmr_count, 1);
    }

    #[test]
    fn remap_examples() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1)]).unwrap();
        let id: BTreeMap<_, _> = [(0, 0), (1, 1)].into();
        assert_eq!(remap_qubits(&c, &id).unwrap(), c);

        let swap: BTreeMap<_, _> = [(0, 1), (1, 0)].into();
        assert_eq!(remap_qubits(&c, &swap).unwrap().gates(), &[Gate::cnot(1, 0)]);

        let c = Circuit::from_gates(3, vec![Gate::h(2)]).unwrap();
        let m: BTreeMap<_, _> = [(2, 0)].into();
        let r = remap_qubits(&c, &m).unwrap();
        assert_eq!(r.width(), 1);
        assert_eq!(r.gates(), &[Gate::h(0)]);
    }

    #[test]
    fn remap_rejects_collision() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1)]).unwrap();
        let m: BTreeMap<_, _> = [(0, 0), (1, 0)].into();
        assert!(matches!(remap_qubits(&c, &m), Err(ResizeError::WireCollision { .. })));
        let m: BTreeMap<_, _> = [(0, 0)].into();
        assert_eq!(remap_qubits(&c, &m), Err(ResizeError::UnmappedWire(1)));
    }

    #[test]
    fn partition_examples() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1), Gate::h(0)]).unwrap();
        let p = partition_at_mmr(&c);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].circuit, c);

        let mut c = Circuit::new(1);
        c.push(Gate::h(0)).unwrap();
        c.push_mmr(0).unwrap();
        c.push(Gate::h(0)).unwrap();
        let p = partition_at_mmr(&c);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].circuit.gates(), &[Gate::h(0)]);
        assert_eq!(p[1].circuit.gates(), &[Gate::h(0)]);
        assert_eq!(reassemble(&c, &p, &BTreeMap::new()).unwrap(), c);
    }

    #[test]
    fn reassemble_expands_replacement() {
        let mut c = Circuit::new(3);
        c.push(Gate::cnot(2, 1)).unwrap();
        c.push(Gate::cnot(2, 1)).unwrap();
        c.push_mmr(2).unwrap();
        c.push(Gate::h(0)).unwrap();
        let parts = partition_at_mmr(&c);
        assert_eq!(parts[0].wires, vec![1, 2]);
        assert_eq!(parts[0].compact().gates(), &[Gate::cnot(1, 0), Gate::cnot(1, 0)]);
        let rep: BTreeMap<_, _> =
            [(0, Circuit::from_gates(2, vec![Gate::u3(1, 0.1, 0.2, 0.3)]).unwrap())].into();
        let out = reassemble(&c, &parts, &rep).unwrap();
        assert_eq!(out.gates()[0], Gate::u3(2, 0.1, 0.2, 0.3));
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn strip_terminal_measurements() {
        let mut c = Circuit::new(2);
        c.push(Gate::cnot(0, 1)).unwrap();
        c.push_mmr(0).unwrap();
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::barrier(vec![0, 1])).unwrap();
        c.push(Gate::measure(0)).unwrap();
        c.push(Gate::measure(1)).unwrap();
        let s = c.strip_terminal();
        assert_eq!(s.len(), 4);
        assert_eq!(s.gates()[1].kind, GateKind::Measure);
    }
}

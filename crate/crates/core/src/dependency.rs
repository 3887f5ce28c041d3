//! Dependency-based resizing.
//!
//! A pair `(host, guest)` is resizable when no gate on the guest is a
//! (transitive) ancestor of any gate on the host: then there is a schedule
//! in which every host gate finishes before any guest gate starts, and the
//! guest can run on the host's wire after an MMR.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_dag, metrics, partition_at_mmr, reassemble, Circuit, Gate, GateKind,
};
use crate::error::{ResizeError, Result};
use crate::instantiate::InstantiationConfig;
use crate::synthesis::{qsearch_with, CouplingGraph, SearchOptions, MAX_SYNTH_QUBITS};
use crate::unitary::{circuit_unitary, hs_distance};

/// Below this many initial pairs the search is exhaustive.
pub const BRUTE_FORCE_LIMIT: usize = 7;

/// `host` is measured, reset, and then reused for `guest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResizePair {
    pub host: usize,
    pub guest: usize,
}

impl ResizePair {
    pub fn new(host: usize, guest: usize) -> Self {
        ResizePair { host, guest }
    }
}

impl fmt::Display for ResizePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.host, self.guest)
    }
}

/// Record of a sequence of reuse steps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResizePlan {
    /// Pairs in application order, each in the wire labels current at its step.
    pub pairs: Vec<ResizePair>,
    /// Index of every inserted `Measure` in the final gate list, ascending.
    pub mmr_positions: Vec<usize>,
    /// For every final wire, the original wires it carries, in time order.
    pub wire_segments: Vec<Vec<usize>>,
}

impl ResizePlan {
    pub fn identity(width: usize) -> Self {
        ResizePlan { pairs: vec![], mmr_positions: vec![], wire_segments: (0..width).map(|w| vec![w]).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Final wire of every original wire.
    pub fn relabeling(&self) -> BTreeMap<usize, usize> {
        self.wire_segments
            .iter()
            .enumerate()
            .flat_map(|(fin, segs)| segs.iter().map(move |&orig| (orig, fin)))
            .collect()
    }

    fn record(&mut self, pair: ResizePair) {
        let guest = self.wire_segments.remove(pair.guest);
        let host = if pair.host > pair.guest { pair.host - 1 } else { pair.host };
        self.wire_segments[host].extend(guest);
        self.pairs.push(pair);
    }
}

/// Maps a resized circuit back onto the original wires and drops the MMRs
/// inserted by `plan`. Each final wire walks through its segments, advancing
/// at every Measure/Reset pair. Assumes the pre-resize circuit had no MMRs.
pub fn inverse_relabel(resized: &Circuit, plan: &ResizePlan) -> Result<Circuit> {
    let width = plan.wire_segments.iter().map(Vec::len).sum();
    let mut segment = vec![0usize; resized.width()];
    let mut out = Circuit::new(width);
    for g in resized.gates() {
        match g.kind {
            GateKind::Measure => {}
            GateKind::Reset => segment[g.wires[0]] += 1,
            _ => {
                let wires = g
                    .wires
                    .iter()
                    .map(|&w| {
                        plan.wire_segments
                            .get(w)
                            .and_then(|s| s.get(segment[w]))
                            .copied()
                            .ok_or(ResizeError::UnmappedWire(w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.push(Gate { kind: g.kind, wires, params: g.params.clone() })?;
            }
        }
    }
    Ok(out)
}

/// All ordered pairs `(host, guest)` for which the host can finish before the
/// guest starts. Sorted lexicographically.
pub fn find_resizable_pairs(circuit: &Circuit) -> Vec<ResizePair> {
    let dag = build_dag(circuit);
    let n = circuit.width();
    let mut pairs = Vec::new();
    for host in 0..n {
        let blocked = blocked_guests(circuit, &dag, host);
        pairs.extend((0..n).filter(|&g| g != host && !blocked[g]).map(|g| ResizePair::new(host, g)));
    }
    pairs
}

/// Wires touched by the host's last gate or any of its ancestors.
fn blocked_guests(circuit: &Circuit, dag: &crate::circuit::DepDag, host: usize) -> Vec<bool> {
    let mut blocked = vec![false; circuit.width()];
    let Some(&last) = circuit.gates_on(host).last() else { return blocked };
    let closure = dag.ancestors_inclusive(&[last]);
    for (i, g) in circuit.gates().iter().enumerate() {
        if closure[i] {
            for &w in &g.wires {
                blocked[w] = true;
            }
        }
    }
    blocked
}

pub fn is_resizable(circuit: &Circuit, pair: ResizePair) -> bool {
    let n = circuit.width();
    if pair.host >= n || pair.guest >= n || pair.host == pair.guest {
        return false;
    }
    let dag = build_dag(circuit);
    !blocked_guests(circuit, &dag, pair.host)[pair.guest]
}

/// Reuses `pair.host` for `pair.guest`: schedules the host's last gate and
/// its ancestors first, inserts an MMR on the host, then the remaining gates,
/// relabels the guest onto the host and compacts the wires above the guest.
pub fn apply_reuse(circuit: &Circuit, pair: ResizePair) -> Result<Circuit> {
    if !is_resizable(circuit, pair) {
        return Err(ResizeError::PairNotResizable { host: pair.host, guest: pair.guest });
    }
    let ResizePair { host, guest } = pair;
    let dag = build_dag(circuit);
    let first = match circuit.gates_on(host).last() {
        Some(&last) => dag.ancestors_inclusive(&[last]),
        None => vec![false; circuit.len()],
    };
    let relabel = |w: usize| -> usize {
        let w = if w == guest { host } else { w };
        if w > guest {
            w - 1
        } else {
            w
        }
    };
    let moved = |g: &Gate| Gate {
        kind: g.kind,
        wires: g.wires.iter().map(|&w| relabel(w)).collect(),
        params: g.params.clone(),
    };
    let mut out = Circuit::new(circuit.width() - 1);
    for (g, _) in circuit.gates().iter().zip(&first).filter(|(_, f)| **f) {
        out.push(moved(g))?;
    }
    out.push_mmr(relabel(host))?;
    for (g, _) in circuit.gates().iter().zip(&first).filter(|(_, f)| !**f) {
        out.push(moved(g))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    MaximalReuse,
    MinimalDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub mode: CostMode,
    pub mmr_weight: f64,
    /// Relative weighted-depth growth a single reuse step may cause in
    /// `MinimalDepth` mode.
    pub depth_slack: f64,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec { mode: CostMode::MaximalReuse, mmr_weight: 4.0, depth_slack: 0.05 }
    }
}

impl CostSpec {
    pub fn max_reuse() -> Self {
        Self::default()
    }

    pub fn min_depth() -> Self {
        CostSpec { mode: CostMode::MinimalDepth, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mmr_weight >= 0.0) || !(self.depth_slack >= 0.0) {
            return Err(ResizeError::InvalidArgument(format!(
                "mmr weight and depth slack must be non-negative, got {} / {}",
                self.mmr_weight, self.depth_slack
            )));
        }
        Ok(())
    }
}

/// Lexicographically ordered cost key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost(pub [f64; 3]);

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal),
        )
    }
}

pub fn cost(circuit: &Circuit, spec: &CostSpec) -> Cost {
    let s = metrics(circuit, spec.mmr_weight);
    let (w, d, cx) = (s.width as f64, s.weighted_depth, s.cx_count as f64);
    match spec.mode {
        CostMode::MaximalReuse => Cost([w, d, cx]),
        CostMode::MinimalDepth => Cost([d, w, cx]),
    }
}

/// Key by which search results are ranked: in `MinimalDepth` mode depth is
/// bounded by per-step admissibility, so reached circuits compete on width.
fn rank(circuit: &Circuit, spec: &CostSpec) -> Cost {
    match spec.mode {
        CostMode::MaximalReuse => cost(circuit, spec),
        CostMode::MinimalDepth => {
            let s = metrics(circuit, spec.mmr_weight);
            Cost([s.width as f64, s.weighted_depth, s.cx_count as f64])
        }
    }
}

fn admissible(current: &Circuit, candidate: &Circuit, spec: &CostSpec) -> bool {
    match spec.mode {
        CostMode::MaximalReuse => true,
        CostMode::MinimalDepth => {
            let before = metrics(current, spec.mmr_weight).weighted_depth;
            let after = metrics(candidate, spec.mmr_weight).weighted_depth;
            after <= (1.0 + spec.depth_slack) * before + 1e-12
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct State {
    circuit: Circuit,
    plan: ResizePlan,
}

impl State {
    fn step(&self, pair: ResizePair) -> Result<State> {
        let circuit = apply_reuse(&self.circuit, pair)?;
        let mut plan = self.plan.clone();
        plan.record(pair);
        Ok(State { circuit, plan })
    }

    fn finish(mut self) -> (Circuit, ResizePlan) {
        self.plan.mmr_positions = self
            .circuit
            .gates()
            .iter()
            .enumerate()
            .filter(|(_, g)| g.kind == GateKind::Measure)
            .map(|(i, _)| i)
            .collect();
        (self.circuit, self.plan)
    }
}

/// Chooses a sequence of reuse steps minimizing the spec's cost. Exhaustive
/// when there are fewer than [`BRUTE_FORCE_LIMIT`] initial pairs, greedy
/// otherwise.
pub fn search_resize(circuit: &Circuit, spec: &CostSpec) -> Result<(Circuit, ResizePlan)> {
    spec.validate()?;
    let start = State { circuit: circuit.clone(), plan: ResizePlan::identity(circuit.width()) };
    let pairs = find_resizable_pairs(circuit);
    let best = if pairs.len() < BRUTE_FORCE_LIMIT {
        brute_force(start, spec)?
    } else {
        greedy(start, spec)?
    };
    Ok(best.finish())
}

pub fn search_resize_greedy(circuit: &Circuit, spec: &CostSpec) -> Result<(Circuit, ResizePlan)> {
    spec.validate()?;
    let start = State { circuit: circuit.clone(), plan: ResizePlan::identity(circuit.width()) };
    Ok(greedy(start, spec)?.finish())
}

pub fn search_resize_exhaustive(circuit: &Circuit, spec: &CostSpec) -> Result<(Circuit, ResizePlan)> {
    spec.validate()?;
    let start = State { circuit: circuit.clone(), plan: ResizePlan::identity(circuit.width()) };
    Ok(brute_force(start, spec)?.finish())
}

fn brute_force(start: State, spec: &CostSpec) -> Result<State> {
    let mut best = start.clone();
    let mut best_rank = rank(&best.circuit, spec);
    let mut seen: HashSet<String> = HashSet::new();
    let mut stack = vec![start];
    while let Some(state) = stack.pop() {
        if !seen.insert(format!("{:?}", state.circuit)) {
            continue;
        }
        let r = rank(&state.circuit, spec);
        if r < best_rank {
            best_rank = r;
            best = state.clone();
        }
        let mut children = Vec::new();
        for pair in find_resizable_pairs(&state.circuit) {
            let child = state.step(pair)?;
            if admissible(&state.circuit, &child.circuit, spec) {
                children.push(child);
            }
        }
        // Reverse so the lexicographically first pair is explored first.
        stack.extend(children.into_iter().rev());
    }
    Ok(best)
}

/// Greedy step ranking. In `MaximalReuse` mode candidates of equal width
/// are ordered by how many resizable pairs they leave open before depth is
/// considered, so early steps do not exhaust later reuse.
fn greedy_key(circuit: &Circuit, spec: &CostSpec) -> Cost4 {
    let c = cost(circuit, spec).0;
    match spec.mode {
        CostMode::MaximalReuse => {
            let open = find_resizable_pairs(circuit).len() as f64;
            Cost4([c[0], -open, c[1], c[2]])
        }
        CostMode::MinimalDepth => Cost4([c[0], c[1], c[2], 0.0]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost4([f64; 4]);

impl PartialOrd for Cost4 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal),
        )
    }
}

fn greedy(start: State, spec: &CostSpec) -> Result<State> {
    let mut current = start;
    loop {
        let mut best: Option<(Cost4, State)> = None;
        for pair in find_resizable_pairs(&current.circuit) {
            let child = current.step(pair)?;
            if !admissible(&current.circuit, &child.circuit, spec) {
                continue;
            }
            let c = greedy_key(&child.circuit, spec);
            if best.as_ref().map_or(true, |(bc, _)| c < *bc) {
                best = Some((c, child));
            }
        }
        let Some((_, child)) = best else { return Ok(current) };
        if rank(&child.circuit, spec) < rank(&current.circuit, spec) {
            current = child;
        } else {
            return Ok(current);
        }
    }
}

/// Result of the full dependency flow.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyOutcome {
    pub circuit: Circuit,
    pub plan: ResizePlan,
    /// Indices of partitions replaced by resynthesis, with their distance.
    pub resynthesized: Vec<(usize, f64)>,
}

/// Largest number of search expansions spent on one partition.
pub const PARTITION_EXPANSIONS: usize = 200;

/// Search, then resynthesize each MMR-delimited partition of at most four
/// wires whose wires are connected in `coupling`, keeping a replacement only
/// when it strictly lowers the CNOT count.
pub fn resize_pipeline(
    circuit: &Circuit,
    spec: &CostSpec,
    coupling: Option<&CouplingGraph>,
    cfg: &InstantiationConfig,
) -> Result<Circuit> {
    resize_pipeline_detailed(circuit, spec, coupling, cfg).map(|o| o.circuit)
}

pub fn resize_pipeline_detailed(
    circuit: &Circuit,
    spec: &CostSpec,
    coupling: Option<&CouplingGraph>,
    cfg: &InstantiationConfig,
) -> Result<DependencyOutcome> {
    let (resized, plan) = search_resize(circuit, spec)?;
    let parts = partition_at_mmr(&resized);
    let mut replacements = BTreeMap::new();
    let mut resynthesized = Vec::new();
    let opts = SearchOptions { max_expansions: PARTITION_EXPANSIONS, ..SearchOptions::default() };
    for (idx, part) in parts.iter().enumerate() {
        let k = part.wires.len();
        let cx = part.circuit.cx_count();
        if k == 0 || k > MAX_SYNTH_QUBITS || cx == 0 {
            continue;
        }
        if part.circuit.gates().iter().any(|g| g.kind == GateKind::Barrier) {
            continue;
        }
        let sub_coupling = match coupling {
            Some(c) => {
                if part.wires.iter().any(|&w| w >= c.n_wires()) || !c.is_connected_over(&part.wires) {
                    continue;
                }
                c.induced(&part.wires)
            }
            None => CouplingGraph::all_to_all(k),
        };
        let sub = part.compact();
        let target = circuit_unitary(&sub, None)?;
        let node = match qsearch_with(&target, &sub_coupling, cfg, cx - 1, &opts) {
            Ok(node) => node,
            Err(ResizeError::SynthesisFailed(_)) => continue,
            Err(e) => return Err(e),
        };
        let candidate = node.structure();
        let distance = hs_distance(&circuit_unitary(&candidate, None)?, &target)?;
        if candidate.cx_count() < cx && distance < cfg.epsilon {
            replacements.insert(idx, candidate);
            resynthesized.push((idx, distance));
        }
    }
    let circuit = reassemble(&resized, &parts, &replacements)?;
    Ok(DependencyOutcome { circuit, plan, resynthesized })
}

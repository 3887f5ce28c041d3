//! Bottom-up A* structure search into CNOT + U3.
//!
//! Nodes are circuit structures built from a root layer of U3s by appending
//! groups `[CNOT(a, b), U3(a), U3(b)]` on coupling edges. Each node is scored
//! by instantiating its angles; the frontier is ordered by
//! `distance + cx_weight · cx_layers`.
//!
//! The two-region variant keeps two independent gate lists, one confined to
//! block A's wires and one to block B's, and always lays A's gates out before
//! B's. With the host outside B and the guest outside A, the host finishes
//! before the guest starts in every structure the search can produce.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::dependency::ResizePair;
use crate::error::{ResizeError, Result};
use crate::instantiate::{
    current_params, delete_gates, instantiate_params_from, with_params, InstantiationConfig,
};
use crate::unitary::UnitaryMatrix;

/// Largest register a single synthesis call accepts.
pub const MAX_SYNTH_QUBITS: usize = 4;

/// Undirected coupling graph over wires `0..n_wires`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingGraph {
    n_wires: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Deserialize)]
struct CouplingFile {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl CouplingGraph {
    pub fn new(n_wires: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(ResizeError::InvalidCoupling(format!("self-loop on {a}")));
            }
            if a >= n_wires || b >= n_wires {
                return Err(ResizeError::InvalidCoupling(format!(
                    "edge ({a}, {b}) outside {n_wires} wires"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(CouplingGraph { n_wires, edges: set })
    }

    pub fn all_to_all(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        CouplingGraph::new(n, edges).expect("valid complete graph")
    }

    pub fn linear(n: usize) -> Self {
        CouplingGraph::new(n, (1..n).map(|b| (b - 1, b))).expect("valid path")
    }

    /// A path over `0..n−1` with wire `n−1` hanging off wire 1, giving wire 1
    /// degree three. Falls back to a path below four wires.
    pub fn t_shape(n: usize) -> Self {
        if n < 4 {
            return Self::linear(n);
        }
        let edges = (1..n - 1).map(|b| (b - 1, b)).chain(std::iter::once((1, n - 1)));
        CouplingGraph::new(n, edges).expect("valid T graph")
    }

    /// Parses `{"n": k, "edges": [[a, b], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: CouplingFile =
            serde_json::from_str(text).map_err(|e| ResizeError::InvalidCoupling(e.to_string()))?;
        CouplingGraph::new(f.n, f.edges.into_iter().map(|[a, b]| (a, b)))
    }

    pub fn to_json(&self) -> String {
        let edges: Vec<[usize; 2]> = self.edges.iter().map(|&(a, b)| [a, b]).collect();
        serde_json::json!({ "n": self.n_wires, "edges": edges }).to_string()
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, w: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == w, b == w) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    /// Subgraph induced by `wires`, relabeled onto `0..wires.len()` in the
    /// order given.
    pub fn induced(&self, wires: &[usize]) -> CouplingGraph {
        let index: BTreeMap<usize, usize> = wires.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|(a, b)| Some((*index.get(a)?, *index.get(b)?)));
        CouplingGraph::new(wires.len(), edges).expect("relabeled edges stay in range")
    }

    /// Whether `wires` induce a connected subgraph. Sets of zero or one wire
    /// count as connected.
    pub fn is_connected_over(&self, wires: &[usize]) -> bool {
        let Some(&first) = wires.first() else { return true };
        let set: BTreeSet<usize> = wires.iter().copied().collect();
        let mut seen = BTreeSet::from([first]);
        let mut stack = vec![first];
        while let Some(w) = stack.pop() {
            for n in self.neighbors(w) {
                if set.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        seen.len() == set.len()
    }
}

/// Pre-resize coupling for reusing `pair.host` for `pair.guest`.
///
/// `target` is the coupling of the resized register, whose wires are the
/// pre-resize wires other than the guest, compacted in order; the guest lands
/// on the host's wire. The result has `pre_width` wires, the guest inherits
/// the host's neighbors, and host and guest are never adjacent, so relabeling
/// guest→host maps every edge onto an edge of `target`.
pub fn fragment_topology(target: &CouplingGraph, pair: ResizePair, pre_width: usize) -> Result<CouplingGraph> {
    let ResizePair { host, guest } = pair;
    if pre_width == 0 || target.n_wires() + 1 != pre_width {
        return Err(ResizeError::InvalidCoupling(format!(
            "target has {} wires, expected {}",
            target.n_wires(),
            pre_width.saturating_sub(1)
        )));
    }
    if host >= pre_width || guest >= pre_width || host == guest {
        return Err(ResizeError::InvalidCoupling(format!(
            "pair ({host}, {guest}) invalid for {pre_width} wires"
        )));
    }
    let post = |w: usize| -> usize {
        let w = if w == guest { host } else { w };
        if w > guest {
            w - 1
        } else {
            w
        }
    };
    let mut edges = Vec::new();
    for a in 0..pre_width {
        for b in a + 1..pre_width {
            if (a == host && b == guest) || (a == guest && b == host) {
                continue;
            }
            if target.has_edge(post(a), post(b)) {
                edges.push((a, b));
            }
        }
    }
    CouplingGraph::new(pre_width, edges)
}

/// Tuning knobs of the structure search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Weight of each CNOT layer in the frontier priority.
    pub cx_weight: f64,
    /// Random restarts per node on top of the warm start from the parent.
    pub node_restarts: usize,
    /// Nodes expanded before the search gives up.
    pub max_expansions: usize,
    /// Run gate deletion on the solution.
    pub delete: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { cx_weight: 0.3, node_restarts: 2, max_expansions: 2000, delete: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    A,
    B,
}

/// A candidate structure with its instantiated angles.
#[derive(Debug, Clone)]
pub struct SearchNode {
    /// Per-region gate lists; region A's gates precede region B's.
    regions: Vec<(Region, Vec<Gate>)>,
    width: usize,
    pub distance: f64,
    pub cx_layers: usize,
}

impl SearchNode {
    pub fn structure(&self) -> Circuit {
        let gates = self.regions.iter().flat_map(|(_, g)| g.iter().cloned()).collect();
        Circuit::from_gates(self.width, gates).expect("search gates are in range")
    }

    /// Region of every gate in [`SearchNode::structure`] order.
    pub fn region_tags(&self) -> Vec<Region> {
        self.regions.iter().flat_map(|(r, g)| std::iter::repeat(*r).take(g.len())).collect()
    }

    fn structure_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (r, gates) in &self.regions {
            r.hash(&mut h);
            for g in gates {
                g.kind.hash(&mut h);
                g.wires.hash(&mut h);
            }
        }
        h.finish()
    }

    fn set_params(&mut self, params: &[f64]) {
        let mut it = params.iter();
        for (_, gates) in &mut self.regions {
            for g in gates.iter_mut().filter(|g| g.kind == GateKind::U3) {
                for p in g.params.iter_mut() {
                    *p = *it.next().expect("param count matches structure");
                }
            }
        }
    }
}

struct Frontier {
    priority: f64,
    hash: u64,
    seq: usize,
    node: SearchNode,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // Reversed: BinaryHeap pops the smallest priority first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.hash.cmp(&self.hash))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Where the search may append CNOT groups.
struct Expansion {
    region: Region,
    edges: Vec<(usize, usize)>,
}

fn root_u3s(wires: &[usize], rng: &mut ChaCha8Rng) -> Vec<Gate> {
    wires.iter().map(|&w| random_u3(w, rng)).collect()
}

fn random_u3(w: usize, rng: &mut ChaCha8Rng) -> Gate {
    let mut a = || rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    Gate::u3(w, a(), a(), a())
}

fn evaluate(
    node: &mut SearchNode,
    target: &UnitaryMatrix,
    cfg: &InstantiationConfig,
    restarts: usize,
    seed: u64,
) -> Result<()> {
    let structure = node.structure();
    let node_cfg = InstantiationConfig { restarts, seed, ..*cfg };
    let res = instantiate_params_from(&structure, target, &node_cfg, &[current_params(&structure)])?;
    node.set_params(res.params());
    node.distance = res.distance;
    Ok(())
}

fn run_search(
    width: usize,
    roots: Vec<(Region, Vec<usize>)>,
    expansions: Vec<Expansion>,
    target: &UnitaryMatrix,
    cfg: &InstantiationConfig,
    max_cx: usize,
    opts: &SearchOptions,
) -> Result<SearchNode> {
    cfg.validate()?;
    if target.num_qubits() != width {
        return Err(ResizeError::DimensionMismatch { left: 1 << width, right: target.dim() });
    }
    if width > MAX_SYNTH_QUBITS {
        return Err(ResizeError::InvalidArgument(format!(
            "synthesis is limited to {MAX_SYNTH_QUBITS} wires, got {width}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut root = SearchNode {
        regions: roots.iter().map(|(r, wires)| (*r, root_u3s(wires, &mut rng))).collect(),
        width,
        distance: 1.0,
        cx_layers: 0,
    };
    evaluate(&mut root, target, cfg, opts.node_restarts, cfg.seed)?;
    let finish = |node: SearchNode| -> Result<SearchNode> {
        if !opts.delete {
            return Ok(node);
        }
        let structure = node.structure();
        let tags = node.region_tags();
        let reduced = delete_gates(&structure, target, cfg)?;
        Ok(rebuild_regions(node, &structure, &tags, &reduced))
    };
    if root.distance < cfg.epsilon {
        return finish(root);
    }

    let mut seen = HashSet::from([root.structure_hash()]);
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Frontier { priority: root.distance, hash: root.structure_hash(), seq, node: root });
    let mut expanded = 0;
    while let Some(Frontier { node, .. }) = heap.pop() {
        if node.cx_layers >= max_cx {
            continue;
        }
        if expanded >= opts.max_expansions {
            break;
        }
        expanded += 1;
        let mut children = Vec::new();
        for exp in &expansions {
            let slot = node.regions.iter().position(|(r, _)| *r == exp.region).expect("region exists");
            for &(a, b) in &exp.edges {
                let mut child = node.clone();
                child.cx_layers += 1;
                let gates = &mut child.regions[slot].1;
                gates.push(Gate::cnot(a, b));
                gates.push(random_u3(a, &mut rng));
                gates.push(random_u3(b, &mut rng));
                if seen.insert(child.structure_hash()) {
                    seq += 1;
                    children.push((seq, child));
                }
            }
        }
        let evaluated: Vec<Result<(usize, SearchNode)>> = children
            .into_par_iter()
            .map(|(s, mut child)| {
                evaluate(&mut child, target, cfg, opts.node_restarts, cfg.seed ^ (s as u64).wrapping_mul(0x9E37_79B9))?;
                Ok((s, child))
            })
            .collect();
        let mut evaluated = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
        evaluated.sort_by(|(sa, a), (sb, b)| {
            let pa = a.distance + opts.cx_weight * a.cx_layers as f64;
            let pb = b.distance + opts.cx_weight * b.cx_layers as f64;
            pa.total_cmp(&pb).then(a.structure_hash().cmp(&b.structure_hash())).then(sa.cmp(sb))
        });
        if let Some(pos) = evaluated.iter().position(|(_, c)| c.distance < cfg.epsilon) {
            return finish(evaluated.swap_remove(pos).1);
        }
        for (s, child) in evaluated {
            heap.push(Frontier {
                priority: child.distance + opts.cx_weight * child.cx_layers as f64,
                hash: child.structure_hash(),
                seq: s,
                node: child,
            });
        }
    }
    Err(ResizeError::SynthesisFailed(max_cx))
}

/// Splits a deletion-reduced structure back into the regions of the gates it
/// kept. Deletion only removes gates, so each survivor keeps its region.
fn rebuild_regions(node: SearchNode, original: &Circuit, tags: &[Region], reduced: &Circuit) -> SearchNode {
    let mut regions: Vec<(Region, Vec<Gate>)> = node.regions.iter().map(|(r, _)| (*r, Vec::new())).collect();
    let mut cursor = 0;
    for g in reduced.gates() {
        while cursor < original.len()
            && (original.gates()[cursor].kind != g.kind || original.gates()[cursor].wires != g.wires)
        {
            cursor += 1;
        }
        let tag = tags.get(cursor).copied().unwrap_or(Region::A);
        cursor += 1;
        let slot = regions.iter().position(|(r, _)| *r == tag).expect("tag names a region");
        regions[slot].1.push(g.clone());
    }
    let cx_layers = reduced.cx_count();
    SearchNode { regions, cx_layers, ..node }
}

fn check_coupling(target: &UnitaryMatrix, coupling: &CouplingGraph) -> Result<()> {
    if target.num_qubits() != coupling.n_wires() {
        return Err(ResizeError::DimensionMismatch { left: target.dim(), right: 1 << coupling.n_wires() });
    }
    Ok(())
}

/// Synthesizes `target` into CNOT + U3 with every CNOT on a coupling edge.
pub fn qsearch(
    target: &UnitaryMatrix,
    coupling: &CouplingGraph,
    cfg: &InstantiationConfig,
    max_cx: usize,
) -> Result<Circuit> {
    qsearch_with(target, coupling, cfg, max_cx, &SearchOptions::default()).map(|n| n.structure())
}

pub fn qsearch_with(
    target: &UnitaryMatrix,
    coupling: &CouplingGraph,
    cfg: &InstantiationConfig,
    max_cx: usize,
    opts: &SearchOptions,
) -> Result<SearchNode> {
    check_coupling(target, coupling)?;
    let n = coupling.n_wires();
    let expansions = vec![Expansion { region: Region::A, edges: coupling.edges().collect() }];
    run_search(n, vec![(Region::A, (0..n).collect())], expansions, target, cfg, max_cx, opts)
}

/// Edges of `coupling` with both endpoints in `wires`.
fn edges_within(coupling: &CouplingGraph, wires: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    coupling.edges().filter(|(a, b)| wires.contains(a) && wires.contains(b)).collect()
}

/// Number of successors every node of a two-region search has.
pub fn two_region_branching(block_a: &[usize], block_b: &[usize], coupling: &CouplingGraph) -> usize {
    let a: BTreeSet<usize> = block_a.iter().copied().collect();
    let b: BTreeSet<usize> = block_b.iter().copied().collect();
    edges_within(coupling, &a).len() + edges_within(coupling, &b).len()
}

/// Synthesis confined to two ordered regions: every gate of the first acts
/// within `block_a`, every gate of the second within `block_b`, and all
/// region-A gates precede all region-B gates.
pub fn qsearch_two_region(
    block_a: &[usize],
    block_b: &[usize],
    target: &UnitaryMatrix,
    coupling: &CouplingGraph,
    cfg: &InstantiationConfig,
    max_cx: usize,
) -> Result<Circuit> {
    qsearch_two_region_with(block_a, block_b, target, coupling, cfg, max_cx, &SearchOptions::default())
        .map(|n| n.structure())
}

pub fn qsearch_two_region_with(
    block_a: &[usize],
    block_b: &[usize],
    target: &UnitaryMatrix,
    coupling: &CouplingGraph,
    cfg: &InstantiationConfig,
    max_cx: usize,
    opts: &SearchOptions,
) -> Result<SearchNode> {
    check_coupling(target, coupling)?;
    let n = coupling.n_wires();
    let a: BTreeSet<usize> = block_a.iter().copied().collect();
    let b: BTreeSet<usize> = block_b.iter().copied().collect();
    if let Some(&w) = a.iter().chain(b.iter()).find(|&&w| w >= n) {
        return Err(ResizeError::WireOutOfRange { wire: w, width: n });
    }
    let expansions = vec![
        Expansion { region: Region::A, edges: edges_within(coupling, &a) },
        Expansion { region: Region::B, edges: edges_within(coupling, &b) },
    ];
    let roots = vec![(Region::A, a.into_iter().collect()), (Region::B, b.into_iter().collect())];
    run_search(n, roots, expansions, target, cfg, max_cx, opts)
}

/// Applies the angles of a solution to a structure; exposed for callers that
/// re-instantiate synthesized circuits.
pub fn rebind(structure: &Circuit, params: &[f64]) -> Circuit {
    with_params(structure, params)
}

//! Resizing from the unitary alone.
//!
//! For an ordered pair `(host, guest)` the check template is two variable
//! blocks, the first on every wire but the guest and the second on every wire
//! but the host. If the target instantiates onto that template, some circuit
//! for the target schedules the host entirely before the guest, and the pair
//! can be reused once a native circuit with the same two-region shape is
//! synthesized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::dependency::{apply_reuse, is_resizable, ResizePair};
use crate::error::{ResizeError, Result};
use crate::instantiate::{instantiate_blocks, InstantiationConfig};
use crate::synthesis::{fragment_topology, qsearch_two_region_with, CouplingGraph, SearchOptions};
use crate::unitary::{circuit_unitary, hs_distance, UnitaryMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pair: ResizePair,
    pub success: bool,
    pub block_a_wires: Vec<usize>,
    pub block_b_wires: Vec<usize>,
    pub distance: f64,
}

impl CheckOutcome {
    pub fn block_size(&self) -> usize {
        self.block_a_wires.len() + self.block_b_wires.len()
    }
}

pub fn build_check_template(n: usize, pair: ResizePair) -> Result<Circuit> {
    if n < 2 || pair.host >= n || pair.guest >= n || pair.host == pair.guest {
        return Err(ResizeError::InvalidArgument(format!("pair {pair} invalid for {n} wires")));
    }
    let a = (0..n).filter(|&w| w != pair.guest).collect();
    let b = (0..n).filter(|&w| w != pair.host).collect();
    Circuit::from_gates(n, vec![Gate::block(a), Gate::block(b)])
}

fn two_block(n: usize, a: &[usize], b: &[usize]) -> Circuit {
    Circuit::from_gates(n, vec![Gate::block(a.to_vec()), Gate::block(b.to_vec())])
        .expect("template wires are in range")
}

// Seeds differ per pair so restarts explore different points.
fn pair_cfg(cfg: &InstantiationConfig, n: usize, pair: ResizePair) -> InstantiationConfig {
    InstantiationConfig { seed: cfg.seed.wrapping_add((pair.host * n + pair.guest) as u64), ..*cfg }
}

fn instantiate_template(
    n: usize,
    pair: ResizePair,
    a: &[usize],
    b: &[usize],
    target: &UnitaryMatrix,
    cfg: &InstantiationConfig,
) -> CheckOutcome {
    let result = instantiate_blocks(&two_block(n, a, b), target, &pair_cfg(cfg, n, pair))
        .expect("template matches target dimension");
    CheckOutcome {
        pair,
        success: result.success,
        block_a_wires: a.to_vec(),
        block_b_wires: b.to_vec(),
        distance: result.distance,
    }
}

/// Instantiates the check template for all `n(n−1)` ordered pairs, in
/// parallel. Outcomes come back in `(host, guest)` order.
pub fn check_all_pairs(target: &UnitaryMatrix, cfg: &InstantiationConfig) -> Vec<CheckOutcome> {
    let n = target.num_qubits();
    let pairs: Vec<ResizePair> = (0..n)
        .flat_map(|h| (0..n).filter(move |&g| g != h).map(move |g| ResizePair::new(h, g)))
        .collect();
    pairs
        .into_par_iter()
        .map(|pair| {
            let a: Vec<usize> = (0..n).filter(|&w| w != pair.guest).collect();
            let b: Vec<usize> = (0..n).filter(|&w| w != pair.host).collect();
            instantiate_template(n, pair, &a, &b, target, cfg)
        })
        .collect()
}

/// Shrinks the blocks of a successful outcome one wire at a time until no
/// single removal still instantiates. Each round tries block A's wires in
/// ascending order, then block B's, and keeps the first success.
pub fn downsize_blocks(
    outcome: &CheckOutcome,
    target: &UnitaryMatrix,
    cfg: &InstantiationConfig,
) -> Result<CheckOutcome> {
    if !outcome.success {
        return Err(ResizeError::InvalidArgument(format!(
            "cannot downsize unsuccessful check of pair {}",
            outcome.pair
        )));
    }
    let n = target.num_qubits();
    let mut current = outcome.clone();
    loop {
        let mut candidates: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        if current.block_a_wires.len() > 1 {
            for &w in &current.block_a_wires {
                let a = current.block_a_wires.iter().copied().filter(|&x| x != w).collect();
                candidates.push((a, current.block_b_wires.clone()));
            }
        }
        if current.block_b_wires.len() > 1 {
            for &w in &current.block_b_wires {
                let b = current.block_b_wires.iter().copied().filter(|&x| x != w).collect();
                candidates.push((current.block_a_wires.clone(), b));
            }
        }
        let tried: Vec<CheckOutcome> = candidates
            .par_iter()
            .map(|(a, b)| instantiate_template(n, current.pair, a, b, target, cfg))
            .collect();
        match tried.into_iter().find(|o| o.success) {
            Some(next) => current = next,
            None => return Ok(current),
        }
    }
}

/// Expansion cap of the two-region search in the default configuration.
pub const UNITARY_FLOW_EXPANSIONS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitaryResizeConfig {
    /// Block instantiation for the checks.
    pub check: InstantiationConfig,
    /// Distance a synthesized circuit must reach.
    pub synth_epsilon: f64,
    /// CNOT budget for synthesis; `None` derives one from the input.
    pub max_cx: Option<usize>,
    pub search: SearchOptions,
}

impl Default for UnitaryResizeConfig {
    fn default() -> Self {
        UnitaryResizeConfig {
            check: InstantiationConfig::default(),
            synth_epsilon: 1e-8,
            max_cx: None,
            search: SearchOptions { max_expansions: UNITARY_FLOW_EXPANSIONS, ..SearchOptions::default() },
        }
    }
}

impl UnitaryResizeConfig {
    pub fn synth_cfg(&self) -> InstantiationConfig {
        InstantiationConfig { epsilon: self.synth_epsilon, ..self.check }
    }
}

#[derive(Debug, Clone)]
pub struct UnitaryResizeOutcome {
    /// Resized circuit on `n − 1` wires with one MMR.
    pub circuit: Circuit,
    /// Synthesized `n`-wire circuit before reuse was applied.
    pub pre_resize: Circuit,
    pub chosen: CheckOutcome,
    pub checks: Vec<CheckOutcome>,
    /// Distance of `pre_resize` to the input unitary.
    pub distance: f64,
}

/// Like [`resize_via_synthesis_with`] with default synthesis settings and
/// `cfg` for the checks.
pub fn resize_via_synthesis(
    circuit: &Circuit,
    target_coupling: &CouplingGraph,
    cfg: &InstantiationConfig,
) -> Result<Circuit> {
    let rc = UnitaryResizeConfig { check: *cfg, ..Default::default() };
    resize_via_synthesis_with(circuit, target_coupling, &rc).map(|o| o.circuit)
}

pub fn resize_via_synthesis_with(
    circuit: &Circuit,
    target_coupling: &CouplingGraph,
    rc: &UnitaryResizeConfig,
) -> Result<UnitaryResizeOutcome> {
    rc.check.validate()?;
    let n = circuit.width();
    if circuit.has_mmr() {
        return Err(ResizeError::InvalidArgument("input already contains measurement or reset".into()));
    }
    if n < 2 || target_coupling.n_wires() + 1 != n {
        return Err(ResizeError::InvalidCoupling(format!(
            "coupling has {} wires, expected {}",
            target_coupling.n_wires(),
            n.saturating_sub(1)
        )));
    }
    let target = circuit_unitary(circuit, None)?;
    let checks = check_all_pairs(&target, &rc.check);
    let mut downsized: Vec<CheckOutcome> = checks
        .par_iter()
        .filter(|o| o.success)
        .map(|o| downsize_blocks(o, &target, &rc.check))
        .collect::<Result<_>>()?;
    if downsized.is_empty() {
        return Err(ResizeError::NotResizable);
    }
    downsized.sort_by_key(|o| (o.block_size(), o.pair));

    let budget = rc.max_cx.unwrap_or(2 * circuit.cx_count() + 3);
    let synth = rc.synth_cfg();
    let mut last_err = ResizeError::NotResizable;
    // Smallest blocks first; later candidates only matter if synthesis fails.
    for chosen in downsized {
        let pair = chosen.pair;
        let pre_coupling = fragment_topology(target_coupling, pair, n)?;
        let node = match qsearch_two_region_with(
            &chosen.block_a_wires,
            &chosen.block_b_wires,
            &target,
            &pre_coupling,
            &synth,
            budget,
            &rc.search,
        ) {
            Ok(node) => node,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let pre_resize = node.structure();
        let distance = hs_distance(&target, &circuit_unitary(&pre_resize, None)?)?;
        if distance >= rc.synth_epsilon || !is_resizable(&pre_resize, pair) {
            last_err = ResizeError::SynthesisFailed(budget);
            continue;
        }
        let resized = apply_reuse(&pre_resize, pair)?;
        if let Some(g) = resized
            .gates()
            .iter()
            .find(|g| g.is_two_qubit() && !target_coupling.has_edge(g.wires[0], g.wires[1]))
        {
            return Err(ResizeError::InvalidCoupling(format!("resized gate {g} is off the target coupling")));
        }
        return Ok(UnitaryResizeOutcome { circuit: resized, pre_resize, chosen, checks, distance });
    }
    Err(last_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependency::find_resizable_pairs;

    #[test]
    fn templates() {
        let t = build_check_template(2, ResizePair::new(0, 1)).unwrap();
        assert_eq!(t.gates(), &[Gate::block(vec![0]), Gate::block(vec![1])]);
        let t = build_check_template(4, ResizePair::new(0, 3)).unwrap();
        assert_eq!(t.gates(), &[Gate::block(vec![0, 1, 2]), Gate::block(vec![1, 2, 3])]);
        assert!(find_resizable_pairs(&t).contains(&ResizePair::new(0, 3)));
        assert!(build_check_template(2, ResizePair::new(0, 0)).is_err());
    }

    #[test]
    fn cnot_chain_pair() {
        let c = Circuit::from_gates(3, vec![Gate::cnot(0, 1), Gate::cnot(1, 2)]).unwrap();
        let target = circuit_unitary(&c, None).unwrap();
        let checks = check_all_pairs(&target, &InstantiationConfig::default());
        assert_eq!(checks.len(), 6);
        let o = checks.iter().find(|o| o.pair == ResizePair::new(0, 2)).unwrap();
        assert!(o.success, "{o:?}");
    }

    #[test]
    fn swap_fails_everywhere() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1), Gate::cnot(1, 0), Gate::cnot(0, 1)]).unwrap();
        let target = circuit_unitary(&c, None).unwrap();
        let checks = check_all_pairs(&target, &InstantiationConfig::default());
        assert_eq!(checks.len(), 2);
        for o in &checks {
            assert!(!o.success);
            assert!(o.distance >= 0.5 - 1e-6, "{}", o.distance);
        }
        let err = resize_via_synthesis(&c, &CouplingGraph::all_to_all(1), &InstantiationConfig::default());
        assert_eq!(err.unwrap_err(), ResizeError::NotResizable);
    }

    #[test]
    fn identity_everywhere() {
        let checks = check_all_pairs(&UnitaryMatrix::identity(3), &InstantiationConfig::default());
        assert_eq!(checks.len(), 6);
        assert!(checks.iter().all(|o| o.success && o.distance < 1e-12));
    }

    #[test]
    fn downsizing_drops_idle_wire() {
        // Entangler on {0,1}, nothing on 2.
        let c = Circuit::from_gates(3, vec![Gate::h(0), Gate::cnot(0, 1), Gate::rz(1, 0.3), Gate::cnot(1, 0)]).unwrap();
        let target = circuit_unitary(&c, None).unwrap();
        let cfg = InstantiationConfig::default();
        let checks = check_all_pairs(&target, &cfg);
        let o = checks.iter().find(|o| o.pair == ResizePair::new(0, 2)).unwrap();
        assert!(o.success);
        let d = downsize_blocks(o, &target, &cfg).unwrap();
        assert!(d.success);
        assert!(d.block_b_wires.len() < 2 || d.block_a_wires.len() < 2, "{d:?}");
        assert!(d.block_size() < o.block_size());
        let failed = CheckOutcome { success: false, ..o.clone() };
        assert!(downsize_blocks(&failed, &target, &cfg).is_err());
        let single = CheckOutcome {
            pair: ResizePair::new(0, 1),
            success: true,
            block_a_wires: vec![0],
            block_b_wires: vec![1],
            distance: 0.0,
        };
        let id2 = UnitaryMatrix::identity(2);
        assert_eq!(downsize_blocks(&single, &id2, &cfg).unwrap(), single);
    }

    #[test]
    fn resizes_small_entangler() {
        let c = Circuit::from_gates(
            3,
            vec![Gate::h(0), Gate::cnot(0, 1), Gate::cnot(1, 2), Gate::rx(2, 0.7)],
        )
        .unwrap();
        let out = resize_via_synthesis_with(&c, &CouplingGraph::linear(2), &UnitaryResizeConfig::default()).unwrap();
        assert_eq!(out.circuit.width(), 2);
        assert!(out.circuit.has_mmr());
        assert!(out.distance < 1e-8);
        assert!(is_resizable(&out.pre_resize, out.chosen.pair));
    }
}

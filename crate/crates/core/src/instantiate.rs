//! Numerical instantiation.
//!
//! Two engines fit a fixed circuit structure to a target unitary:
//!
//! * [`instantiate_blocks`] optimizes whole variable unitary blocks by
//!   alternating sweeps. Each block is replaced by the unitary polar factor of
//!   its environment, which maximizes `Re Tr(target† · U)` in that block with
//!   the others held fixed.
//! * [`instantiate_params`] optimizes the angles of U3/RZ/RX gates with BFGS
//!   on `1 − |Tr(target† · U)|² / dim²`, using analytic gradients from the
//!   same environment contraction.
//!
//! Both report the Hilbert-Schmidt distance `1 − |Tr| / dim`.
//!
//! For gates `G_1 … G_m` (applied in that order) the environment of gate `k`
//! is `E_k = G_{k−1}⋯G_1 · T† · G_m⋯G_{k+1}`, so `Tr(T†U) = Tr(G_k E_k)`.
//! Successive environments satisfy `E_{k+1} = G_k · E_k · G_{k+1}†`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{ResizeError, Result};
use crate::unitary::{
    apply_left_with, apply_right_with, distance_from_trace, gate_matrix, random_unitary_with,
    reduced_environment_with, u3_matrix, Matrix, UnitaryMatrix, WireLayout,
};

/// Sweep improvement below which block instantiation stops.
pub const PLATEAU_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantiationConfig {
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for InstantiationConfig {
    fn default() -> Self {
        InstantiationConfig { epsilon: 1e-10, max_sweeps: 1000, restarts: 8, seed: 0 }
    }
}

impl InstantiationConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_sweeps == 0 {
            return Err(ResizeError::InvalidArgument(format!(
                "instantiation needs epsilon > 0 and max_sweeps >= 1, got {} / {}",
                self.epsilon, self.max_sweeps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    Blocks(Vec<UnitaryMatrix>),
    Params(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstantiationResult {
    pub success: bool,
    pub distance: f64,
    pub assignment: Assignment,
    pub iterations: usize,
}

impl InstantiationResult {
    pub fn blocks(&self) -> &[UnitaryMatrix] {
        match &self.assignment {
            Assignment::Blocks(b) => b,
            Assignment::Params(_) => &[],
        }
    }

    pub fn params(&self) -> &[f64] {
        match &self.assignment {
            Assignment::Params(p) => p,
            Assignment::Blocks(_) => &[],
        }
    }
}

/// Unitary factor `W·V†` of the singular decomposition `m = W Σ V†`. It
/// maximizes `Re Tr(m† B)` over unitaries `B`. Singular vectors of zero
/// singular values are whatever orthonormal completion the decomposition
/// returns; any completion is optimal there.
pub fn polar_unitary(m: &Matrix) -> UnitaryMatrix {
    let svd = m.clone().svd(true, true);
    let w = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut out = w * v_t;
    if !UnitaryMatrix::from_matrix(out.clone()).map(|u| u.is_unitary(1e-8)).unwrap_or(false) {
        // Re-orthonormalize if the decomposition lost precision on a degenerate input.
        let dim = out.nrows();
        out += Matrix::identity(dim, dim) * Complex64::new(1e-300, 0.0);
        let qr = out.qr();
        out = qr.q();
    }
    UnitaryMatrix::from_matrix(out).expect("square power-of-two input")
}

enum Op {
    Fixed(Matrix),
    Block(usize),
}

struct Slot {
    op: Op,
    layout: WireLayout,
}

fn block_slots(circuit: &Circuit) -> Result<(Vec<Slot>, Vec<usize>)> {
    let width = circuit.width();
    let mut slots = Vec::new();
    let mut block_dims = Vec::new();
    for g in circuit.gates() {
        let op = match g.kind {
            GateKind::Barrier => continue,
            GateKind::Measure | GateKind::Reset => return Err(ResizeError::NonUnitary(g.kind.name())),
            GateKind::VariableBlock => {
                block_dims.push(g.wires.len());
                Op::Block(block_dims.len() - 1)
            }
            _ => Op::Fixed(gate_matrix(g)?),
        };
        slots.push(Slot { op, layout: WireLayout::new(&g.wires, width) });
    }
    Ok((slots, block_dims))
}

fn check_dims(circuit: &Circuit, target: &UnitaryMatrix) -> Result<()> {
    if target.dim() != 1 << circuit.width() {
        return Err(ResizeError::DimensionMismatch { left: 1 << circuit.width(), right: target.dim() });
    }
    Ok(())
}

/// One block-instantiation run from a given starting point. Returns the final
/// block values, the `|Tr(target† U)|` after every sweep, and the sweep count.
pub fn sweep_blocks(
    circuit: &Circuit,
    target: &UnitaryMatrix,
    initial: Vec<UnitaryMatrix>,
    cfg: &InstantiationConfig,
) -> Result<(Vec<UnitaryMatrix>, Vec<f64>)> {
    check_dims(circuit, target)?;
    let (slots, dims) = block_slots(circuit)?;
    if initial.len() != dims.len() {
        return Err(ResizeError::MissingBlockValue(initial.len()));
    }
    let mut values: Vec<Matrix> = initial.into_iter().map(UnitaryMatrix::into_matrix).collect();
    let dim = target.dim();
    let mut history: Vec<f64> = Vec::new();
    if slots.is_empty() {
        let tr = target.matrix().adjoint().trace();
        history.push(tr.norm());
        return Ok((wrap(values), history));
    }

    let op_of = |slot: &Slot, values: &[Matrix]| -> Matrix {
        match &slot.op {
            Op::Fixed(m) => m.clone(),
            Op::Block(i) => values[*i].clone(),
        }
    };

    for _ in 0..cfg.max_sweeps {
        // E_1 = T† G_m ⋯ G_2
        let mut env = target.matrix().adjoint();
        for slot in slots.iter().skip(1).rev() {
            apply_right_with(&mut env, &op_of(slot, &values), &slot.layout);
        }
        let mut trace = Complex64::new(0.0, 0.0);
        for k in 0..slots.len() {
            let red = reduced_environment_with(&env, &slots[k].layout);
            if let Op::Block(i) = slots[k].op {
                values[i] = polar_unitary(&red.adjoint()).into_matrix();
            }
            let gk = op_of(&slots[k], &values);
            if k + 1 == slots.len() {
                trace = (&gk * &red).trace();
                break;
            }
            apply_left_with(&mut env, &gk, &slots[k].layout);
            let next = op_of(&slots[k + 1], &values).adjoint();
            apply_right_with(&mut env, &next, &slots[k + 1].layout);
        }
        let magnitude = trace.norm();
        let improvement = history.last().map_or(f64::INFINITY, |prev| magnitude - prev);
        history.push(magnitude);
        if distance_from_trace(trace, dim) < cfg.epsilon || improvement.abs() < PLATEAU_TOL * dim as f64 {
            break;
        }
    }
    Ok((wrap(values), history))
}

fn wrap(values: Vec<Matrix>) -> Vec<UnitaryMatrix> {
    values.into_iter().map(|m| UnitaryMatrix::from_matrix(m).expect("block dims are powers of two")).collect()
}

/// Instantiates every `VariableBlock` of `circuit` against `target`. The first
/// attempt starts from identity blocks, then `cfg.restarts` attempts start
/// from random unitaries. Returns the best attempt.
pub fn instantiate_blocks(
    circuit: &Circuit,
    target: &UnitaryMatrix,
    cfg: &InstantiationConfig,
) -> Result<InstantiationResult> {
    cfg.validate()?;
    check_dims(circuit, target)?;
    let (_, dims) = block_slots(circuit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<InstantiationResult> = None;
    for attempt in 0..=cfg.restarts {
        let initial: Vec<UnitaryMatrix> = if attempt == 0 {
            dims.iter().map(|&d| UnitaryMatrix::identity(d)).collect()
        } else {
            dims.iter().map(|&d| random_unitary_with(d, &mut rng)).collect()
        };
        let result = run_blocks(circuit, target, initial, cfg)?;
        let done = result.success;
        if best.as_ref().map_or(true, |b| result.distance < b.distance) {
            best = Some(result);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one attempt"))
}

/// Single block-instantiation run from `initial`.
pub fn run_blocks(
    circuit: &Circuit,
    target: &UnitaryMatrix,
    initial: Vec<UnitaryMatrix>,
    cfg: &InstantiationConfig,
) -> Result<InstantiationResult> {
    let (values, history) = sweep_blocks(circuit, target, initial, cfg)?;
    let distance = crate::unitary::hs_distance(
        target,
        &crate::unitary::circuit_unitary(circuit, Some(&values))?,
    )?;
    Ok(InstantiationResult {
        success: distance < cfg.epsilon,
        distance,
        assignment: Assignment::Blocks(values),
        iterations: history.len(),
    })
}

/// Positions of the free angles: `(gate index, param index)` in circuit order.
pub fn param_slots(circuit: &Circuit) -> Vec<(usize, usize)> {
    circuit
        .gates()
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| {
            let n = match g.kind {
                GateKind::U3 | GateKind::Rz | GateKind::Rx => g.params.len(),
                _ => 0,
            };
            (0..n).map(move |p| (gi, p))
        })
        .collect()
}

pub fn current_params(circuit: &Circuit) -> Vec<f64> {
    param_slots(circuit).into_iter().map(|(g, p)| circuit.gates()[g].params[p]).collect()
}

/// Copy of `circuit` with the free angles replaced by `params`.
pub fn with_params(circuit: &Circuit, params: &[f64]) -> Circuit {
    let mut gates = circuit.gates().to_vec();
    for ((g, p), v) in param_slots(circuit).into_iter().zip(params) {
        gates[g].params[p] = *v;
    }
    Circuit::from_gates(circuit.width(), gates).expect("same structure")
}

/// Local matrix of a parameterized gate and its derivative in each angle.
fn param_gate_derivatives(gate: &Gate) -> (Matrix, Vec<Matrix>) {
    let i = Complex64::i();
    match gate.kind {
        GateKind::U3 => {
            let (t, p, l) = (gate.params[0], gate.params[1], gate.params[2]);
            let (s, c) = (t / 2.0).sin_cos();
            let m = u3_matrix(t, p, l);
            let dt = Matrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(-s / 2.0, 0.0),
                    -Complex64::from_polar(c / 2.0, l),
                    Complex64::from_polar(c / 2.0, p),
                    Complex64::from_polar(-s / 2.0, p + l),
                ],
            );
            let dp = Matrix::from_row_slice(2, 2, &[0.0.into(), 0.0.into(), m[(1, 0)] * i, m[(1, 1)] * i]);
            let dl = Matrix::from_row_slice(2, 2, &[0.0.into(), m[(0, 1)] * i, 0.0.into(), m[(1, 1)] * i]);
            (m, vec![dt, dp, dl])
        }
        GateKind::Rz => {
            let m = gate_matrix(gate).expect("rz");
            let d = Matrix::from_row_slice(2, 2, &[m[(0, 0)] * (-i / 2.0), 0.0.into(), 0.0.into(), m[(1, 1)] * (i / 2.0)]);
            (m, vec![d])
        }
        GateKind::Rx => {
            let m = gate_matrix(gate).expect("rx");
            let (s, c) = (gate.params[0] / 2.0).sin_cos();
            let d = Matrix::from_row_slice(
                2,
                2,
                &[Complex64::new(-s / 2.0, 0.0), Complex64::new(0.0, -c / 2.0), Complex64::new(0.0, -c / 2.0), Complex64::new(-s / 2.0, 0.0)],
            );
            (m, vec![d])
        }
        _ => (gate_matrix(gate).expect("fixed unitary gate"), vec![]),
    }
}

/// Fixed-structure parameterized circuit bound to a target, ready for
/// repeated objective/gradient evaluation.
pub struct ParamProblem {
    template: Vec<Gate>,
    layouts: Vec<WireLayout>,
    fixed: Vec<Option<Matrix>>,
    slots: Vec<(usize, usize)>,
    target_dagger: Matrix,
    dim: usize,
}

impl ParamProblem {
    pub fn new(circuit: &Circuit, target: &UnitaryMatrix) -> Result<Self> {
        check_dims(circuit, target)?;
        let mut template = Vec::new();
        let mut layouts = Vec::new();
        let mut fixed = Vec::new();
        for g in circuit.gates() {
            match g.kind {
                GateKind::Barrier => continue,
                GateKind::Measure | GateKind::Reset => return Err(ResizeError::NonUnitary(g.kind.name())),
                GateKind::VariableBlock => {
                    return Err(ResizeError::InvalidGate("variable blocks need block instantiation".into()))
                }
                GateKind::U3 | GateKind::Rz | GateKind::Rx => fixed.push(None),
                _ => fixed.push(Some(gate_matrix(g)?)),
            }
            template.push(g.clone());
            layouts.push(WireLayout::new(&g.wires, circuit.width()));
        }
        let stripped = Circuit::from_gates(circuit.width(), template.clone())?;
        Ok(ParamProblem {
            slots: param_slots(&stripped),
            template,
            layouts,
            fixed,
            target_dagger: target.matrix().adjoint(),
            dim: target.dim(),
        })
    }

    pub fn num_params(&self) -> usize {
        self.slots.len()
    }

    /// `Tr(target† U(params))` and its derivative in every angle.
    pub fn trace_and_gradient(&self, params: &[f64]) -> (Complex64, Vec<Complex64>) {
        let mut gates = self.template.clone();
        for (&(g, p), v) in self.slots.iter().zip(params) {
            gates[g].params[p] = *v;
        }
        let mut mats = Vec::with_capacity(gates.len());
        let mut derivs = Vec::with_capacity(gates.len());
        for (g, fixed) in gates.iter().zip(&self.fixed) {
            match fixed {
                Some(m) => {
                    mats.push(m.clone());
                    derivs.push(Vec::new());
                }
                None => {
                    let (m, d) = param_gate_derivatives(g);
                    mats.push(m);
                    derivs.push(d);
                }
            }
        }
        let mut grad = Vec::with_capacity(self.slots.len());
        if mats.is_empty() {
            return (self.target_dagger.trace(), grad);
        }
        let mut env = self.target_dagger.clone();
        for k in (1..mats.len()).rev() {
            apply_right_with(&mut env, &mats[k], &self.layouts[k]);
        }
        let mut trace = Complex64::new(0.0, 0.0);
        for k in 0..mats.len() {
            let red = reduced_environment_with(&env, &self.layouts[k]);
            for d in &derivs[k] {
                grad.push((d * &red).trace());
            }
            if k + 1 == mats.len() {
                trace = (&mats[k] * &red).trace();
                break;
            }
            apply_left_with(&mut env, &mats[k], &self.layouts[k]);
            apply_right_with(&mut env, &mats[k + 1].adjoint(), &self.layouts[k + 1]);
        }
        (trace, grad)
    }

    /// Surrogate cost `1 − |Tr|²/dim²` and its gradient.
    pub fn cost_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let (t, dt) = self.trace_and_gradient(params);
        let n2 = (self.dim * self.dim) as f64;
        let cost = 1.0 - t.norm_sqr() / n2;
        let grad = dt.iter().map(|d| -2.0 * (t.conj() * d).re / n2).collect();
        (cost, grad)
    }

    pub fn distance(&self, params: &[f64]) -> f64 {
        distance_from_trace(self.trace_and_gradient(params).0, self.dim)
    }
}

const STALL_WINDOW: usize = 20;
const STALL_TOL: f64 = 1e-9;

/// BFGS with a backtracking Armijo line search. Stops once the surrogate
/// cost falls below `stop_cost`.
fn bfgs(problem: &ParamProblem, x0: Vec<f64>, stop_cost: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let n = x0.len();
    let mut x = x0;
    if n == 0 {
        return (x, 0);
    }
    let (mut f, mut g) = problem.cost_and_gradient(&x);
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    let mut iters = 0;
    let mut history: Vec<f64> = Vec::new();
    while iters < max_iter {
        iters += 1;
        if f < stop_cost {
            break;
        }
        // Stalled away from the target: a local optimum, not worth refining.
        if history.len() >= STALL_WINDOW {
            let before = history[history.len() - STALL_WINDOW];
            if before - f < STALL_TOL * before {
                break;
            }
        }
        history.push(f);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-15 {
            break;
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = problem.cost_and_gradient(&trial);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let progress = f - fnew;
        x = xn;
        f = fnew;
        g = gn;
        if sy > 1e-20 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if progress <= 0.0 && f < 1e-6 {
            break;
        }
    }
    (x, iters)
}

/// Instantiates the angles of U3/RZ/RX gates against `target`. Runs from the
/// circuit's current angles first, then `cfg.restarts` times from uniform
/// random angles in `[−π, π)`, returning the best.
pub fn instantiate_params(
    circuit: &Circuit,
    target: &UnitaryMatrix,
    cfg: &InstantiationConfig,
) -> Result<InstantiationResult> {
    instantiate_params_from(circuit, target, cfg, &[current_params(circuit)])
}

/// As [`instantiate_params`], with explicit starting points tried before the
/// random restarts.
pub fn instantiate_params_from(
    circuit: &Circuit,
    target: &UnitaryMatrix,
    cfg: &InstantiationConfig,
    starts: &[Vec<f64>],
) -> Result<InstantiationResult> {
    cfg.validate()?;
    let problem = ParamProblem::new(circuit, target)?;
    let n = problem.num_params();
    // Surrogate cost ≈ 2·distance near the optimum; stop a little past ε.
    let stop_cost = cfg.epsilon * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<InstantiationResult> = None;
    let mut total_iters = 0;
    let random_starts = (0..cfg.restarts).map(|_| {
        (0..n).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect::<Vec<f64>>()
    });
    let candidates: Vec<Vec<f64>> = starts
        .iter()
        .filter(|s| s.len() == n)
        .cloned()
        .chain(random_starts)
        .collect();
    for x0 in candidates {
        let (x, iters) = bfgs(&problem, x0, stop_cost, cfg.max_sweeps);
        total_iters += iters;
        let distance = problem.distance(&x);
        let success = distance < cfg.epsilon;
        if best.as_ref().map_or(true, |b| distance < b.distance) {
            best = Some(InstantiationResult {
                success,
                distance,
                assignment: Assignment::Params(x),
                iterations: total_iters,
            });
        }
        if success {
            break;
        }
    }
    let mut best = best.unwrap_or_else(|| InstantiationResult {
        success: false,
        distance: 1.0,
        assignment: Assignment::Params(vec![]),
        iterations: 0,
    });
    if n == 0 {
        best.distance = problem.distance(&[]);
        best.success = best.distance < cfg.epsilon;
    }
    best.iterations = total_iters;
    Ok(best)
}

/// Removes U3 gates that directly follow another U3 on the same wire. The
/// earlier gate survives; since angles are re-fitted afterwards the product
/// is still expressible (U3·U3 is a U3 up to phase).
pub fn merge_adjacent_u3(circuit: &Circuit) -> Circuit {
    let mut last_is_u3 = vec![false; circuit.width()];
    let mut gates = Vec::new();
    for g in circuit.gates() {
        if g.kind == GateKind::U3 && last_is_u3[g.wires[0]] {
            continue;
        }
        for &w in &g.wires {
            last_is_u3[w] = g.kind == GateKind::U3;
        }
        gates.push(g.clone());
    }
    Circuit::from_gates(circuit.width(), gates).expect("subset of a valid circuit")
}

/// Greedy two-qubit gate deletion. Scans two-qubit gates right to left,
/// tries removing each (merging the U3s it separated) and keeps the removal
/// when re-instantiation stays below `cfg.epsilon`. Repeats full passes until
/// nothing more can be removed.
pub fn delete_gates(circuit: &Circuit, target: &UnitaryMatrix, cfg: &InstantiationConfig) -> Result<Circuit> {
    cfg.validate()?;
    let start = ParamProblem::new(circuit, target)?;
    let mut current = circuit.clone();
    let d0 = start.distance(&current_params(circuit));
    if d0 >= cfg.epsilon {
        let res = instantiate_params(circuit, target, &cfg.with_restarts(0))?;
        if !res.success {
            return Err(ResizeError::NotInstantiated(d0));
        }
        current = with_params(circuit, res.params());
    }
    loop {
        let mut deleted = false;
        let mut idx = current.len();
        while idx > 0 {
            idx -= 1;
            if idx >= current.len() || !current.gates()[idx].is_two_qubit() {
                continue;
            }
            let mut gates = current.gates().to_vec();
            gates.remove(idx);
            let candidate = merge_adjacent_u3(&Circuit::from_gates(current.width(), gates)?);
            let res = instantiate_params(&candidate, target, cfg)?;
            if res.success {
                current = with_params(&candidate, res.params());
                deleted = true;
            }
        }
        if !deleted {
            return Ok(current);
        }
    }
}

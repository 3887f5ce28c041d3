//! Dense unitary semantics.
//!
//! Tensor convention: wire 0 is the least-significant bit of a basis index,
//! so `X` on wire 0 of a 2-wire register is `I ⊗ X`. A gate's local matrix
//! uses the same rule over its own wire list: local bit `i` is `wires[i]`.
//! For `CNOT(c, t)` local index `1` is `|c=1,t=0⟩`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{ResizeError, Result};

pub type Matrix = DMatrix<Complex64>;

pub const MAX_QUBITS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A dense `2^n × 2^n` unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    num_qubits: usize,
    data: Matrix,
}

impl UnitaryMatrix {
    /// Wraps `data` without checking unitarity.
    pub fn from_matrix(data: Matrix) -> Result<Self> {
        let dim = data.nrows();
        if data.ncols() != dim || !dim.is_power_of_two() {
            return Err(ResizeError::DimensionMismatch { left: data.nrows(), right: data.ncols() });
        }
        Ok(UnitaryMatrix { num_qubits: dim.trailing_zeros() as usize, data })
    }

    pub fn identity(num_qubits: usize) -> Self {
        let dim = 1 << num_qubits;
        UnitaryMatrix { num_qubits, data: Matrix::identity(dim, dim) }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn dagger(&self) -> Self {
        UnitaryMatrix { num_qubits: self.num_qubits, data: self.data.adjoint() }
    }

    /// `self · other`.
    pub fn mul(&self, other: &UnitaryMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(ResizeError::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(UnitaryMatrix { num_qubits: self.num_qubits, data: &self.data * &other.data })
    }

    /// Largest entry of `|U†U − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.data.adjoint() * &self.data;
        let dim = self.dim();
        let mut worst = 0.0f64;
        for c in 0..dim {
            for r in 0..dim {
                let expect = if r == c { ONE } else { ZERO };
                worst = worst.max((p[(r, c)] - expect).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        UnitaryMatrix { num_qubits: self.num_qubits, data: self.data.map(|z| z * factor) }
    }
}

/// The local matrix of a unitary gate on its own wires.
pub fn gate_matrix(gate: &Gate) -> Result<Matrix> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let m = match gate.kind {
        GateKind::H => Matrix::from_row_slice(
            2,
            2,
            &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
        ),
        GateKind::X => Matrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        GateKind::Rz => {
            let h = gate.params[0] / 2.0;
            Matrix::from_row_slice(2, 2, &[Complex64::from_polar(1.0, -h), ZERO, ZERO, Complex64::from_polar(1.0, h)])
        }
        GateKind::Rx => {
            let h = gate.params[0] / 2.0;
            let (s, co) = h.sin_cos();
            Matrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
        }
        GateKind::U3 => u3_matrix(gate.params[0], gate.params[1], gate.params[2]),
        GateKind::Cnot => {
            let mut m = Matrix::zeros(4, 4);
            m[(0, 0)] = ONE;
            m[(2, 2)] = ONE;
            m[(1, 3)] = ONE;
            m[(3, 1)] = ONE;
            m
        }
        GateKind::Cz => {
            let mut m = Matrix::identity(4, 4);
            m[(3, 3)] = -ONE;
            m
        }
        GateKind::VariableBlock => {
            return Err(ResizeError::InvalidGate("variable block has no fixed matrix".into()))
        }
        GateKind::Measure => return Err(ResizeError::NonUnitary("measure")),
        GateKind::Reset => return Err(ResizeError::NonUnitary("reset")),
        GateKind::Barrier => return Err(ResizeError::NonUnitary("barrier")),
    };
    Ok(m)
}

pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Matrix {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            -Complex64::from_polar(s, lambda),
            Complex64::from_polar(s, phi),
            Complex64::from_polar(c, phi + lambda),
        ],
    )
}

/// Index bookkeeping for acting with a local operator on some wires of a
/// register: `offsets[a]` spreads local index `a` onto the register bits and
/// `bases` enumerates assignments of the remaining bits.
pub(crate) struct WireLayout {
    pub offsets: Vec<usize>,
    pub bases: Vec<usize>,
}

impl WireLayout {
    pub fn new(wires: &[usize], width: usize) -> Self {
        let k = wires.len();
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|a| {
                wires
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| a >> i & 1 == 1)
                    .map(|(_, &w)| 1usize << w)
                    .sum()
            })
            .collect();
        let mask: usize = wires.iter().map(|&w| 1usize << w).sum();
        let bases = (0..1usize << width).filter(|i| i & mask == 0).collect();
        WireLayout { offsets, bases }
    }
}

/// `m ← embed(op) · m`.
pub fn apply_left(m: &mut Matrix, op: &Matrix, wires: &[usize]) {
    let width = m.nrows().trailing_zeros() as usize;
    apply_left_with(m, op, &WireLayout::new(wires, width));
}

pub(crate) fn apply_left_with(m: &mut Matrix, op: &Matrix, layout: &WireLayout) {
    let dim = m.nrows();
    let k = layout.offsets.len();
    let mut buf = vec![ZERO; k];
    let data = m.as_mut_slice();
    for col in 0..dim {
        let column = &mut data[col * dim..(col + 1) * dim];
        for &b in &layout.bases {
            for (a, off) in layout.offsets.iter().enumerate() {
                buf[a] = column[b + off];
            }
            for (r, off) in layout.offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (a, x) in buf.iter().enumerate() {
                    acc += op[(r, a)] * x;
                }
                column[b + off] = acc;
            }
        }
    }
}

/// `m ← m · embed(op)`.
pub fn apply_right(m: &mut Matrix, op: &Matrix, wires: &[usize]) {
    let width = m.nrows().trailing_zeros() as usize;
    apply_right_with(m, op, &WireLayout::new(wires, width));
}

pub(crate) fn apply_right_with(m: &mut Matrix, op: &Matrix, layout: &WireLayout) {
    let dim = m.nrows();
    let k = layout.offsets.len();
    let mut cols = vec![ZERO; k * dim];
    let data = m.as_mut_slice();
    for &b in &layout.bases {
        for (a, off) in layout.offsets.iter().enumerate() {
            let src = (b + off) * dim;
            cols[a * dim..(a + 1) * dim].copy_from_slice(&data[src..src + dim]);
        }
        for (j, off) in layout.offsets.iter().enumerate() {
            let dst = &mut data[(b + off) * dim..(b + off + 1) * dim];
            dst.fill(ZERO);
            for a in 0..k {
                let coef = op[(a, j)];
                if coef == ZERO {
                    continue;
                }
                let src = &cols[a * dim..(a + 1) * dim];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += coef * s;
                }
            }
        }
    }
}

/// The local matrix `R` with `Tr(embed(g) · env) = Tr(g · R)` for every
/// operator `g` on `wires`.
pub fn reduced_environment(env: &Matrix, wires: &[usize]) -> Matrix {
    let width = env.nrows().trailing_zeros() as usize;
    reduced_environment_with(env, &WireLayout::new(wires, width))
}

pub(crate) fn reduced_environment_with(env: &Matrix, layout: &WireLayout) -> Matrix {
    let k = layout.offsets.len();
    let mut red = Matrix::zeros(k, k);
    for (b_loc, ob) in layout.offsets.iter().enumerate() {
        for (a_loc, oa) in layout.offsets.iter().enumerate() {
            let mut acc = ZERO;
            for &base in &layout.bases {
                acc += env[(base + ob, base + oa)];
            }
            red[(b_loc, a_loc)] = acc;
        }
    }
    red
}

/// The full-register matrix of a unitary gate.
pub fn embed_gate(gate: &Gate, width: usize) -> Result<UnitaryMatrix> {
    if !gate.kind.is_unitary() {
        return Err(ResizeError::NonUnitary(gate.kind.name()));
    }
    if let Some(&w) = gate.wires.iter().find(|&&w| w >= width) {
        return Err(ResizeError::WireOutOfRange { wire: w, width });
    }
    let op = gate_matrix(gate)?;
    let mut m = Matrix::identity(1 << width, 1 << width);
    apply_left(&mut m, &op, &gate.wires);
    Ok(UnitaryMatrix { num_qubits: width, data: m })
}

/// Product of the circuit's gates, first gate applied first. Variable blocks
/// take their values from `block_values` in order of appearance. Barriers
/// are skipped.
pub fn circuit_unitary(circuit: &Circuit, block_values: Option<&[UnitaryMatrix]>) -> Result<UnitaryMatrix> {
    let width = circuit.width();
    if width > MAX_QUBITS {
        return Err(ResizeError::InvalidArgument(format!(
            "dense unitaries are limited to {MAX_QUBITS} qubits, got {width}"
        )));
    }
    let mut m = Matrix::identity(1 << width, 1 << width);
    let mut next_block = 0;
    for g in circuit.gates() {
        match g.kind {
            GateKind::Barrier => {}
            GateKind::Measure | GateKind::Reset => {
                return Err(ResizeError::NonUnitary(g.kind.name()))
            }
            GateKind::VariableBlock => {
                let v = block_values
                    .and_then(|vals| vals.get(next_block))
                    .ok_or(ResizeError::MissingBlockValue(next_block))?;
                if v.dim() != 1 << g.wires.len() {
                    return Err(ResizeError::DimensionMismatch { left: v.dim(), right: 1 << g.wires.len() });
                }
                apply_left(&mut m, v.matrix(), &g.wires);
                next_block += 1;
            }
            _ => apply_left(&mut m, &gate_matrix(g)?, &g.wires),
        }
    }
    Ok(UnitaryMatrix { num_qubits: width, data: m })
}

/// `Tr(u† v)`.
pub fn trace_inner(u: &Matrix, v: &Matrix) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Hilbert-Schmidt distance `1 − |Tr(u†v)| / dim`.
pub fn hs_distance(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(ResizeError::DimensionMismatch { left: u.dim(), right: v.dim() });
    }
    Ok(distance_from_trace(trace_inner(&u.data, &v.data), u.dim()))
}

pub(crate) fn distance_from_trace(tr: Complex64, dim: usize) -> f64 {
    (1.0 - tr.norm() / dim as f64).max(0.0)
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian
/// matrix, with the phases of R's diagonal folded back into Q.
pub fn random_unitary(num_qubits: usize, seed: u64) -> UnitaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary_with(num_qubits, &mut rng)
}

pub fn random_unitary_with<R: rand::Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> UnitaryMatrix {
    assert!(num_qubits <= MAX_QUBITS, "random_unitary supports up to {MAX_QUBITS} qubits");
    let dim = 1 << num_qubits;
    let g = Matrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix { num_qubits, data: q }
}

/// Kronecker product `a ⊗ b`; `b` occupies the low wires.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn empty_circuit_is_identity() {
        let u = circuit_unitary(&Circuit::new(2), None).unwrap();
        assert_eq!(u.matrix(), &Matrix::identity(4, 4));
    }

    #[test]
    fn x_gate() {
        let circ = Circuit::from_gates(1, vec![Gate::x(0)]).unwrap();
        let u = circuit_unitary(&circ, None).unwrap();
        assert_eq!(u.matrix(), &Matrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]));
    }

    #[test]
    fn three_cnots_make_swap() {
        let circ = Circuit::from_gates(
            2,
            vec![Gate::cnot(0, 1), Gate::cnot(1, 0), Gate::cnot(0, 1)],
        )
        .unwrap();
        let u = circuit_unitary(&circ, None).unwrap();
        let mut swap = Matrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[(i, j)] = ONE;
        }
        assert!(close(u.matrix(), &swap, 1e-14));
    }

    #[test]
    fn embedding_convention() {
        let x = gate_matrix(&Gate::x(0)).unwrap();
        let e = embed_gate(&Gate::x(0), 2).unwrap();
        assert_eq!(e.matrix(), &kron(&Matrix::identity(2, 2), &x));

        let e = embed_gate(&Gate::u3(1, 0.0, 0.0, 0.0), 2).unwrap();
        assert!(close(e.matrix(), &Matrix::identity(4, 4), 0.0));

        // CNOT(1, 0): control is the high bit; |q1=1,q0=0⟩ (index 2) ↔ index 3.
        let e = embed_gate(&Gate::cnot(1, 0), 2).unwrap();
        for col in 0..4 {
            let expect = match col {
                2 => 3,
                3 => 2,
                k => k,
            };
            for row in 0..4 {
                let want = if row == expect { ONE } else { ZERO };
                assert_eq!(e.matrix()[(row, col)], want);
            }
        }
    }

    #[test]
    fn embed_rejects_measure() {
        assert!(matches!(embed_gate(&Gate::measure(0), 1), Err(ResizeError::NonUnitary(_))));
    }

    #[test]
    fn measure_is_non_unitary() {
        let mut circ = Circuit::new(1);
        circ.push_mmr(0).unwrap();
        assert!(matches!(circuit_unitary(&circ, None), Err(ResizeError::NonUnitary(_))));
        let circ = Circuit::from_gates(1, vec![Gate::block(vec![0])]).unwrap();
        assert_eq!(circuit_unitary(&circ, None), Err(ResizeError::MissingBlockValue(0)));
    }

    #[test]
    fn apply_right_matches_product() {
        let u = random_unitary(3, 7);
        let g = random_unitary(2, 8);
        let mut m = u.matrix().clone();
        apply_right(&mut m, g.matrix(), &[2, 0]);
        let mut e = Matrix::identity(8, 8);
        apply_left(&mut e, g.matrix(), &[2, 0]);
        assert!(close(&m, &(u.matrix() * e), 1e-12));
    }

    #[test]
    fn reduced_environment_contracts() {
        let env = random_unitary(3, 1).into_matrix();
        let g = random_unitary(2, 2).into_matrix();
        let wires = [1, 2];
        let red = reduced_environment(&env, &wires);
        let mut full = Matrix::identity(8, 8);
        apply_left(&mut full, &g, &wires);
        let lhs = (full * &env).trace();
        let rhs = (g * red).trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn hs_distance_examples() {
        let u = random_unitary(2, 3);
        assert!(hs_distance(&u, &u).unwrap() < 1e-15);
        let v = u.scale(Complex64::from_polar(1.0, 0.77));
        assert!(hs_distance(&u, &v).unwrap() < 1e-15);
        let x = UnitaryMatrix::from_matrix(gate_matrix(&Gate::x(0)).unwrap()).unwrap();
        assert_eq!(hs_distance(&UnitaryMatrix::identity(1), &x).unwrap(), 1.0);
        assert!(hs_distance(&UnitaryMatrix::identity(1), &UnitaryMatrix::identity(2)).is_err());
    }

    #[test]
    fn random_unitary_properties() {
        for n in 0..=MAX_QUBITS {
            assert!(random_unitary(n, 11).is_unitary(1e-10));
        }
        assert_eq!(random_unitary(2, 5), random_unitary(2, 5));
        let mut close_pairs = 0;
        for s in 0..100u64 {
            let d = hs_distance(&random_unitary(2, 2 * s), &random_unitary(2, 2 * s + 1)).unwrap();
            if d <= 0.1 {
                close_pairs += 1;
            }
        }
        assert_eq!(close_pairs, 0);
    }

    #[test]
    fn u3_covers_hadamard() {
        let h = gate_matrix(&Gate::h(0)).unwrap();
        let u = u3_matrix(std::f64::consts::FRAC_PI_2, 0.0, std::f64::consts::PI);
        assert!(close(&h, &u, 1e-15));
    }
}

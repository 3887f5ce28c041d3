//! Quantum circuit resizing: reduce a circuit's qubit count by reusing wires
//! through mid-circuit measurement and reset.
//!
//! Two resizers are provided. [`dependency`] finds reuse opportunities in the
//! gate dependency structure of an existing circuit and searches over them.
//! [`unitary_resize`] works from the circuit's unitary alone: it checks, by
//! numerical instantiation of a two-block template, whether *some* circuit
//! implementing the same unitary is resizable, and then synthesizes one into
//! CNOT + U3 respecting a target coupling graph.

pub mod bench;
pub mod circuit;
pub mod dependency;
pub mod error;
pub mod instantiate;
pub mod pipeline;
pub mod qasm;
pub mod synthesis;
pub mod unitary;
pub mod unitary_resize;

pub use circuit::{Circuit, CircuitStats, Gate, GateKind};
pub use error::{ResizeError, Result};
pub use unitary::UnitaryMatrix;

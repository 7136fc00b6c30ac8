//! Pulse-level simulator for entangling gates between distant atomic qubits,
//! mediated by a chain of ancilla atoms that passes a Rydberg excitation down
//! the line. Provides register construction, pulse-sequence compilation, dense
//! master-equation and quantum-trajectory propagation, process-fidelity
//! estimation and the scaling-law analysis used to compare against a
//! nearest-neighbour CNOT ladder.
//!
//! Units: the Rabi frequency sets the scale (Omega = 1, hbar = 1); blockade
//! shifts and decay rates are given in units of Omega, times in units of
//! 1/Omega.

pub mod analysis;
pub mod dense;
pub mod error;
pub mod fidelity;
pub mod linalg;
pub mod mcwf;
pub mod operator;
pub mod protocol;
pub mod register;
pub mod segment;

mod expmv;

pub use error::{Error, Result};
pub use linalg::C64;
pub use operator::SpMat;

pub use analysis::{fit_alpha, fit_teff, gain_ratio, predict_fidelity, FitResult, SweepRecord};
pub use dense::{
    max_double_excitation, pi_pulse_survival, propagate_density, propagate_operator,
    propagate_process, DensityMatrix, LindbladModel, Method, PropagationSettings, PulseDirection,
};
pub use fidelity::{
    average_fidelity, classical_fidelity, complementary_basis, hofmann_bounds, process_fidelity,
    FidelityReport, ProcessTensor,
};
pub use mcwf::{classical_fidelity_mc, run_trajectory, EnsembleEstimate, TrajectoryResult};
pub use protocol::{
    compile_gate, compile_nn_sequence, ideal_unitary, nn_cnot_circuit, FrameOp, Gate, GateSpec,
    Pulse, PulseSequence, SequenceStep, Transition, Variant,
};
pub use register::{
    build_register, drive_hamiltonian, embed_operator, interaction_hamiltonian, AtomKind,
    CouplingMap, DecayRates, Register, StateSpace, Topology,
};

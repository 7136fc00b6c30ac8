//! Gate compilation: pulse sequences for the distant-gate protocol and the
//! nearest-neighbour baseline circuit.
//!
//! A compiled sequence has three parts. Part one excites the control
//! conditionally and relays the excitation along the ancilla chain:
//! [pi C, pi A1, pi C], then pairs [pi A_{i+1}, pi A_i] for i = 1..n_A-1.
//! The conditional block drives the target: a single 2pi pulse on |1>-|r>
//! for the modified CZ, or pi pulses on |0>-|r>, |1>-|r>, |0>-|r> for the
//! CNOT. Part three is part one reversed pulse by pulse, so the laser pulses
//! outside the conditional block form a palindrome.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::register::Topology;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// |0> to Rydberg on a qubit atom.
    Q0R,
    /// |1> to Rydberg on a qubit atom.
    Q1R,
    /// Ground to excited on an ancilla.
    GE,
}

/// A resonant square laser pulse on a single atom. `area` is the pulse area
/// (rabi * duration) in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub atom: usize,
    pub transition: Transition,
    pub area: f64,
    pub rabi: f64,
}

impl Pulse {
    pub fn pi(atom: usize, transition: Transition) -> Pulse {
        Pulse {
            atom,
            transition,
            area: std::f64::consts::PI,
            rabi: 1.0,
        }
    }

    pub fn two_pi(atom: usize, transition: Transition) -> Pulse {
        Pulse {
            atom,
            transition,
            area: 2.0 * std::f64::consts::PI,
            rabi: 1.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.area / self.rabi
    }
}

/// An instantaneous, error-free single-atom frame change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameOp {
    /// Swap |0> and |1> of a qubit atom, leaving |r> alone.
    SigmaX { atom: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceStep {
    Pulse(Pulse),
    Frame(FrameOp),
}

impl SequenceStep {
    pub fn duration(&self) -> f64 {
        match self {
            SequenceStep::Pulse(p) => p.duration(),
            SequenceStep::Frame(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    ModifiedCz,
    Cnot,
}

impl Gate {
    /// Number of laser pulses in the conditional block on the target.
    pub fn n_cond(self) -> usize {
        match self {
            Gate::ModifiedCz => 1,
            Gate::Cnot => 3,
        }
    }
}

impl std::fmt::Display for Gate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gate::ModifiedCz => write!(f, "modified_cz"),
            Gate::Cnot => write!(f, "cnot"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Drive whichever control transition the ancilla parity requires.
    Direct,
    /// Always drive |1>-|r> on the control and bracket the sequence with
    /// instantaneous sigma-x frame changes. Only meaningful for odd chains.
    SigmaXWrapped,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Direct => write!(f, "direct"),
            Variant::SigmaXWrapped => write!(f, "sigma_x_wrapped"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub gate: Gate,
    pub n_ancillas: usize,
    pub variant: Variant,
}

impl GateSpec {
    pub fn new(gate: Gate, n_ancillas: usize, variant: Variant) -> GateSpec {
        GateSpec {
            gate,
            n_ancillas,
            variant,
        }
    }

    /// Variant used by the sweep runners when none is requested: the
    /// sigma-x-wrapped form for odd-chain CZ, direct otherwise.
    pub fn preferred(gate: Gate, n_ancillas: usize) -> GateSpec {
        let variant = if gate == Gate::ModifiedCz && n_ancillas % 2 == 1 {
            Variant::SigmaXWrapped
        } else {
            Variant::Direct
        };
        GateSpec::new(gate, n_ancillas, variant)
    }

    pub fn topology(&self) -> Topology {
        Topology::DistantGate {
            n_ancillas: self.n_ancillas,
        }
    }

    /// Control transition: the chain parity decides which qubit level must
    /// be relayed for the conditional block to see the right blockade.
    pub fn control_transition(&self) -> Transition {
        match self.variant {
            Variant::SigmaXWrapped => Transition::Q1R,
            Variant::Direct => {
                let even = self.n_ancillas % 2 == 0;
                match (self.gate, even) {
                    (Gate::ModifiedCz, true) => Transition::Q1R,
                    (Gate::ModifiedCz, false) => Transition::Q0R,
                    (Gate::Cnot, true) => Transition::Q0R,
                    (Gate::Cnot, false) => Transition::Q1R,
                }
            }
        }
    }

    /// Laser pulse count: 4 n_A + 2 + n_T, or 2 + n_T without ancillas.
    pub fn pulse_count(&self) -> usize {
        let relay = if self.n_ancillas == 0 {
            2
        } else {
            4 * self.n_ancillas + 2
        };
        relay + self.gate.n_cond()
    }
}

/// A compiled ordered sequence of laser pulses and frame operations.
#[derive(Debug, Clone)]
pub struct PulseSequence {
    steps: Vec<SequenceStep>,
    topology: Topology,
    spec: Option<GateSpec>,
    /// Step-index range of the conditional block (empty for circuits that
    /// have none).
    cond: std::ops::Range<usize>,
}

impl PulseSequence {
    /// Sequence with no steps; propagating it is the identity.
    pub fn empty(topology: Topology) -> PulseSequence {
        PulseSequence::from_steps(Vec::new(), topology)
    }

    /// Ad-hoc sequence from raw steps, outside any compiled gate.
    pub fn from_steps(steps: Vec<SequenceStep>, topology: Topology) -> PulseSequence {
        PulseSequence {
            steps,
            topology,
            spec: None,
            cond: 0..0,
        }
    }

    pub fn steps(&self) -> &[SequenceStep] {
        &self.steps
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn spec(&self) -> Option<GateSpec> {
        self.spec
    }

    pub fn cond_range(&self) -> std::ops::Range<usize> {
        self.cond.clone()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Laser pulses only, skipping frame operations.
    pub fn laser_pulses(&self) -> impl Iterator<Item = &Pulse> {
        self.steps.iter().filter_map(|s| match s {
            SequenceStep::Pulse(p) => Some(p),
            SequenceStep::Frame(_) => None,
        })
    }

    pub fn laser_count(&self) -> usize {
        self.laser_pulses().count()
    }

    pub fn frame_count(&self) -> usize {
        self.step_count() - self.laser_count()
    }

    pub fn total_area(&self) -> f64 {
        self.laser_pulses().map(|p| p.area).sum()
    }

    /// Total wall time of the sequence in units of 1/rabi.
    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration()).sum()
    }
}

/// Compiles the distant-gate protocol for a gate, chain length and variant.
pub fn compile_gate(spec: GateSpec) -> Result<PulseSequence> {
    if spec.variant == Variant::SigmaXWrapped && spec.n_ancillas % 2 == 0 {
        return Err(Error::InvalidSequence(format!(
            "the sigma-x-wrapped variant needs an odd ancilla count, got {}",
            spec.n_ancillas
        )));
    }
    let n_a = spec.n_ancillas;
    let control = 0usize;
    let target = n_a + 1;
    let ancilla = |i: usize| i; // A_i sits at register index i
    let ct = spec.control_transition();

    let mut part1: Vec<Pulse> = Vec::new();
    part1.push(Pulse::pi(control, ct));
    if n_a >= 1 {
        part1.push(Pulse::pi(ancilla(1), Transition::GE));
        part1.push(Pulse::pi(control, ct));
        for i in 1..n_a {
            part1.push(Pulse::pi(ancilla(i + 1), Transition::GE));
            part1.push(Pulse::pi(ancilla(i), Transition::GE));
        }
    }

    let cond: Vec<Pulse> = match spec.gate {
        Gate::ModifiedCz => vec![Pulse::two_pi(target, Transition::Q1R)],
        Gate::Cnot => vec![
            Pulse::pi(target, Transition::Q0R),
            Pulse::pi(target, Transition::Q1R),
            Pulse::pi(target, Transition::Q0R),
        ],
    };

    let mut steps: Vec<SequenceStep> = Vec::new();
    if spec.variant == Variant::SigmaXWrapped {
        steps.push(SequenceStep::Frame(FrameOp::SigmaX { atom: control }));
    }
    steps.extend(part1.iter().map(|&p| SequenceStep::Pulse(p)));
    let cond_start = steps.len();
    steps.extend(cond.iter().map(|&p| SequenceStep::Pulse(p)));
    let cond_end = steps.len();
    steps.extend(part1.iter().rev().map(|&p| SequenceStep::Pulse(p)));
    if spec.variant == Variant::SigmaXWrapped {
        steps.push(SequenceStep::Frame(FrameOp::SigmaX { atom: control }));
    }

    Ok(PulseSequence {
        steps,
        topology: spec.topology(),
        spec: Some(spec),
        cond: cond_start..cond_end,
    })
}

/// The 4x4 matrix the compiled protocol should realize on the two qubits.
/// Basis order |ct>: 00, 01, 10, 11. The CNOT carries the global phase -1
/// the pulse sequence produces, so state-level comparisons are exact.
pub fn ideal_unitary(spec: GateSpec) -> Array2<C64> {
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    match spec.gate {
        Gate::ModifiedCz => Array2::from_diag(&ndarray::arr1(&[o, -o, -o, -o])),
        Gate::Cnot => ndarray::arr2(&[
            [-o, z, z, z],
            [z, -o, z, z],
            [z, z, z, -o],
            [z, z, -o, z],
        ]),
    }
}

/// Nearest-neighbour CNOT ladder that routes a CNOT from the ends of a chain
/// with k intermediate qubits: ascending sweep, descending sweep, then both
/// again one site short. 4k gates total, each (control, target) adjacent.
pub fn nn_cnot_circuit(k: usize) -> Result<Vec<(usize, usize)>> {
    if k < 1 {
        return Err(Error::InvalidArgument(
            "the ladder needs at least one intermediate qubit".into(),
        ));
    }
    let mut gates = Vec::with_capacity(4 * k);
    gates.extend((0..=k).map(|i| (i, i + 1)));
    gates.extend((1..=k).rev().map(|i| (i - 1, i)));
    gates.extend((1..=k).map(|i| (i, i + 1)));
    gates.extend((2..=k).rev().map(|i| (i - 1, i)));
    debug_assert_eq!(gates.len(), 4 * k);
    Ok(gates)
}

/// Expands the ladder into laser pulses: every adjacent CNOT becomes the
/// five-pulse no-ancilla protocol, 20k pulses on a chain of k+2 qubit atoms.
pub fn compile_nn_sequence(k: usize) -> Result<PulseSequence> {
    let gates = nn_cnot_circuit(k)?;
    let mut steps = Vec::with_capacity(20 * k);
    for (c, t) in gates {
        steps.push(SequenceStep::Pulse(Pulse::pi(c, Transition::Q0R)));
        steps.push(SequenceStep::Pulse(Pulse::pi(t, Transition::Q0R)));
        steps.push(SequenceStep::Pulse(Pulse::pi(t, Transition::Q1R)));
        steps.push(SequenceStep::Pulse(Pulse::pi(t, Transition::Q0R)));
        steps.push(SequenceStep::Pulse(Pulse::pi(c, Transition::Q0R)));
    }
    Ok(PulseSequence {
        steps,
        topology: Topology::QubitChain { length: k + 2 },
        spec: None,
        cond: 0..0,
    })
}

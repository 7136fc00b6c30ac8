//! Deterministic propagation of the full density matrix.
//!
//! A [`LindbladModel`] fixes the register, the decay rates and the working
//! state space (optionally truncated by total Rydberg excitation). Sequences
//! then act on density matrices either through the exact factored pulse flows
//! (zero decay) or through the exponential action of the vectorized generator,
//! segment by segment. The same machinery extracts a full process tensor by
//! propagating the coding-subspace matrix units in one batch.

use crate::error::{Error, Result};
use crate::expmv::{self, Channel, SuperOp};
use crate::fidelity::ProcessTensor;
use crate::linalg::{self, C64, ONE};
use crate::operator::SpMat;
use crate::protocol::PulseSequence;
use crate::register::{AtomKind, DecayRates, Register, StateSpace};
use crate::segment::{
    self, apply_swaps_left, apply_swaps_right, decay_diagonal, SegmentGenerator, SequenceFlows,
    StepFlow,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Integration backend for dissipative runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Per-segment exponential action via a scaled Taylor series.
    #[default]
    Expmv,
    /// Fixed-step fourth-order Runge-Kutta, for cross-validation.
    Rk4,
    /// Dense exponential of the full superoperator matrix; small spaces only.
    Expm,
}

/// Which way a resonant pi pulse moves population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseDirection {
    Exciting,
    Deexciting,
}

#[derive(Debug, Clone)]
pub struct PropagationSettings {
    pub method: Method,
    /// Relative truncation tolerance of the exponential series.
    pub rel_tol: f64,
    /// Hard cap on substeps per segment before giving up.
    pub max_substeps: usize,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            method: Method::Expmv,
            rel_tol: 1e-9,
            max_substeps: 1 << 20,
        }
    }
}

/// Register, rates and working space bound together with the jump operators
/// and the precomputed diagonal of the vectorized generator.
pub struct LindbladModel {
    register: Register,
    rates: DecayRates,
    space: StateSpace,
    jumps: Vec<SpMat>,
    channels: Vec<Channel>,
    cdiag: Array2<C64>,
}

impl LindbladModel {
    /// `max_excitation` bounds the number of simultaneous Rydberg excitations
    /// kept in the basis; `None` keeps the full product space.
    pub fn new(
        register: &Register,
        rates: DecayRates,
        max_excitation: Option<u32>,
    ) -> Result<Self> {
        rates.validate()?;
        let space = register.space(max_excitation);
        let mut jumps = Vec::new();
        let mut channels = Vec::new();
        for atom in 0..register.atom_count() {
            match register.kind(atom) {
                AtomKind::Qubit => {
                    // radiative escape from |r> into both qubit levels
                    for (to, rate) in [(0usize, rates.gamma0), (1usize, rates.gamma1)] {
                        let (j, c) = jump_channel(&space, atom, 2, to, rate);
                        jumps.push(j);
                        channels.push(c);
                    }
                }
                AtomKind::Ancilla => {
                    let (j, c) = jump_channel(&space, atom, 1, 0, rates.gamma_a);
                    jumps.push(j);
                    channels.push(c);
                }
            }
        }
        let decay = decay_diagonal(&space, &rates);
        let d = space.dim();
        let mut cdiag = Array2::zeros((d, d));
        for i in 0..d {
            let (vi, di) = (space.blockade_shift(i), decay[i]);
            for j in 0..d {
                cdiag[[i, j]] = C64::new(
                    -0.5 * (di + decay[j]),
                    -(vi - space.blockade_shift(j)),
                );
            }
        }
        Ok(LindbladModel {
            register: register.clone(),
            rates,
            space,
            jumps,
            channels,
            cdiag,
        })
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn rates(&self) -> &DecayRates {
        &self.rates
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// All jump operators, one per decay channel, kept even at zero rate.
    pub fn jump_ops(&self) -> &[SpMat] {
        &self.jumps
    }

    pub(crate) fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Kept position of the coding state |c, t> (ancillas in their ground
    /// level). Always present: it carries no excitation.
    pub fn coding_position(&self, c: usize, t: usize) -> usize {
        self.space
            .position(self.register.coding_index(c, t))
            .expect("coding states carry no excitation")
    }

    fn superop<'a>(&'a self, gen: &'a SegmentGenerator) -> SuperOp<'a> {
        SuperOp {
            cdiag: &self.cdiag,
            pairs: gen.pairs(),
            half_rabi: gen.half_rabi(),
            channels: &self.channels,
        }
    }
}

/// L = sqrt(rate) sum |..to..><..from..| on one atom, with the move list used
/// by the superoperator and trajectory engines.
fn jump_channel(
    space: &StateSpace,
    atom: usize,
    from: usize,
    to: usize,
    rate: f64,
) -> (SpMat, Channel) {
    let stride = segment::space_stride(space, atom);
    let shift = (from - to) * stride;
    let mut moves = Vec::new();
    let mut triplets = Vec::new();
    let amp = rate.sqrt();
    for k in 0..space.dim() {
        if space.level_of(k, atom) == from {
            let p = space
                .position(space.full_index(k) - shift)
                .expect("decay lowers the excitation count");
            moves.push((p as u32, k as u32));
            triplets.push((p, k, C64::new(amp, 0.0)));
        }
    }
    let op = SpMat::from_triplets(space.dim(), triplets);
    (op, Channel { rate, moves })
}

/// Density matrix on a model's state space.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    data: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(data: Array2<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(DensityMatrix { data })
    }

    pub fn from_pure(psi: &[C64]) -> Self {
        let d = psi.len();
        let mut data = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                data[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        DensityMatrix { data }
    }

    /// |c, t><c, t| with all other atoms in their ground level.
    pub fn coding_state(model: &LindbladModel, c: usize, t: usize) -> Self {
        let mut data = Array2::zeros((model.dim(), model.dim()));
        let p = model.coding_position(c, t);
        data[[p, p]] = ONE;
        DensityMatrix { data }
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.data[[i, i]]).sum()
    }

    /// Re tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::herm_defect(&self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // symmetrize first so rounding never feeds the eigensolver junk
        let h = (&self.data + &linalg::dagger(&self.data)).mapv(|z| 0.5 * z);
        linalg::min_eigenvalue(&h)
    }

    /// Checks trace one, hermiticity and positivity to tight tolerances.
    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-9 {
            return Err(Error::UnphysicalState(format!(
                "trace deviates from one by {:.3e}",
                (tr - ONE).norm()
            )));
        }
        if self.hermiticity_defect() > 1e-9 {
            return Err(Error::UnphysicalState(format!(
                "hermiticity defect {:.3e}",
                self.hermiticity_defect()
            )));
        }
        let lo = self.min_eigenvalue();
        if lo < -1e-9 {
            return Err(Error::UnphysicalState(format!(
                "negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(())
    }
}

/// Advances a batch of operators through the sequence under the full master
/// equation. Zero-rate models take the exact factored-flow path.
fn propagate_batch(
    seq: &PulseSequence,
    model: &LindbladModel,
    batch: &mut [Array2<C64>],
    settings: &PropagationSettings,
) -> Result<()> {
    let d = model.dim();
    for m in batch.iter() {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, model space has dimension {d}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let flows = SequenceFlows::new(seq, model.space(), model.rates())?;
    if model.rates().is_zero() {
        for rho in batch.iter_mut() {
            flows.conjugate_density(&mut rho.view_mut());
        }
        return Ok(());
    }
    if settings.method == Method::Expm && d > 36 {
        return Err(Error::InvalidArgument(format!(
            "dense superoperator exponentials are limited to dimension 36, got {d}"
        )));
    }
    for step in flows.steps() {
        match step {
            StepFlow::Segment(g) => {
                let op = model.superop(g);
                match settings.method {
                    Method::Expmv => {
                        expmv::expmv(&op, batch, g.duration(), settings.rel_tol, settings.max_substeps)?;
                    }
                    Method::Rk4 => {
                        expmv::rk4(&op, batch, g.duration(), settings.max_substeps)?;
                    }
                    Method::Expm => {
                        let prop = linalg::expm(&op.to_dense().mapv(|z| z * g.duration()));
                        for rho in batch.iter_mut() {
                            apply_superop_dense(&prop, rho);
                        }
                    }
                }
            }
            StepFlow::Frame(swaps) => {
                for rho in batch.iter_mut() {
                    apply_swaps_left(swaps, &mut rho.view_mut());
                    apply_swaps_right(swaps, &mut rho.view_mut());
                }
            }
        }
    }
    Ok(())
}

fn apply_superop_dense(prop: &Array2<C64>, rho: &mut Array2<C64>) {
    let x: Vec<C64> = rho.iter().copied().collect();
    let rs = rho.as_slice_mut().expect("contiguous");
    for (r, out) in rs.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, xv) in x.iter().enumerate() {
            acc += prop[[r, c]] * xv;
        }
        *out = acc;
    }
}

/// Final density matrix after the sequence. The input must be physical.
pub fn propagate_density(
    seq: &PulseSequence,
    model: &LindbladModel,
    rho: &DensityMatrix,
    settings: &PropagationSettings,
) -> Result<DensityMatrix> {
    rho.validate()?;
    let mut batch = [rho.data().clone()];
    propagate_batch(seq, model, &mut batch, settings)?;
    let [out] = batch;
    DensityMatrix::new(out)
}

/// Heisenberg-free propagation of an arbitrary (not necessarily Hermitian)
/// operator through the same completely positive map.
pub fn propagate_operator(
    seq: &PulseSequence,
    model: &LindbladModel,
    a: &Array2<C64>,
    settings: &PropagationSettings,
) -> Result<Array2<C64>> {
    let mut batch = [a.clone()];
    propagate_batch(seq, model, &mut batch, settings)?;
    let [out] = batch;
    Ok(out)
}

/// Process tensor of the sequence restricted to the coding subspace: the ten
/// independent matrix units |c t><c' t'| propagate in one batch, then project
/// back onto the coding states (all other atoms returned to ground).
pub fn propagate_process(
    seq: &PulseSequence,
    model: &LindbladModel,
    settings: &PropagationSettings,
) -> Result<ProcessTensor> {
    let d = model.dim();
    let pos: Vec<usize> = (0..4).map(|k| model.coding_position(k / 2, k % 2)).collect();
    let mut batch = Vec::with_capacity(10);
    for m in 0..4 {
        for n in m..4 {
            let mut unit = Array2::zeros((d, d));
            unit[[pos[m], pos[n]]] = ONE;
            batch.push(unit);
        }
    }
    propagate_batch(seq, model, &mut batch, settings)?;
    let mut units = Vec::with_capacity(10);
    for rho in &batch {
        let mut p = Array2::zeros((4, 4));
        for a in 0..4 {
            for b in 0..4 {
                p[[a, b]] = rho[[pos[a], pos[b]]];
            }
        }
        units.push(p);
    }
    ProcessTensor::from_upper_units(units)
}

/// Population left on the intended level after a resonant pi pulse on a
/// two-level atom decaying from its upper level at `gamma_over_omega`.
pub fn pi_pulse_survival(gamma_over_omega: f64, direction: PulseDirection) -> Result<f64> {
    let g = gamma_over_omega;
    if !(0.0..=0.1).contains(&g) {
        return Err(Error::InvalidArgument(format!(
            "gamma/Omega = {g} outside the validated range [0, 0.1]"
        )));
    }
    // vectorized two-level master equation, basis |g>, |e>
    let mut l: Array2<C64> = Array2::zeros((4, 4));
    let hr = C64::new(0.0, -0.5); // -i Omega/2 with Omega = 1
    // -i[H, rho] with H = (|g><e| + |e><g|)/2
    // rows/cols flattened as (i, j) -> 2 i + j
    for j in 0..2 {
        l[[j, 2 + j]] += hr;
        l[[2 + j, j]] += hr;
    }
    for i in 0..2 {
        l[[2 * i + 1, 2 * i]] -= hr;
        l[[2 * i, 2 * i + 1]] -= hr;
    }
    // decay e -> g at rate g
    l[[0, 3]] += C64::new(g, 0.0);
    l[[3, 3]] += C64::new(-g, 0.0);
    l[[1, 1]] += C64::new(-0.5 * g, 0.0);
    l[[2, 2]] += C64::new(-0.5 * g, 0.0);
    let prop = linalg::expm(&l.mapv(|z| z * std::f64::consts::PI));
    let (start, end) = match direction {
        PulseDirection::Exciting => (0usize, 3usize),
        PulseDirection::Deexciting => (3usize, 0usize),
    };
    Ok(prop[[end, start]].re)
}

/// Largest instantaneous weight on states with two or more Rydberg
/// excitations along the no-jump evolution of `psi0`, sampled at
/// `sample_count` points spread over the sequence duration. Blocked
/// transitions oscillate at the blockade frequency, so the count must be
/// large enough to resolve periods of 2 pi / U.
pub fn max_double_excitation(
    seq: &PulseSequence,
    model: &LindbladModel,
    psi0: &[C64],
    sample_count: usize,
) -> Result<f64> {
    if let Some(cap) = model.space().max_excitation() {
        if cap < 2 {
            return Err(Error::InvalidArgument(format!(
                "excitation cap {cap} cannot represent double excitation"
            )));
        }
    }
    if psi0.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has length {}, model space has dimension {}",
            psi0.len(),
            model.dim()
        )));
    }
    if sample_count == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    let flows = SequenceFlows::new(seq, model.space(), model.rates())?;
    let total = flows.total_duration();
    let space = model.space();
    let mut psi = psi0.to_vec();
    let weight = |v: &[C64]| {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        space.excited_weight(v, 2) / norm.max(f64::MIN_POSITIVE)
    };
    let mut max = weight(&psi);
    for step in flows.steps() {
        match step {
            StepFlow::Segment(g) => {
                let frac = if total > 0.0 { g.duration() / total } else { 1.0 };
                let n_s = ((sample_count as f64 * frac).ceil() as usize).max(1);
                for s in 1..=n_s {
                    let mut probe = psi.clone();
                    g.flow(g.duration() * s as f64 / n_s as f64)
                        .apply_state(&mut probe);
                    max = max.max(weight(&probe));
                    if s == n_s {
                        psi = probe;
                    }
                }
            }
            StepFlow::Frame(swaps) => segment::apply_swaps_state(swaps, &mut psi),
        }
    }
    Ok(max)
}

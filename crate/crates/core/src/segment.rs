//! Exact per-pulse flows.
//!
//! During one pulse the Hamiltonian is constant: a resonant drive on a single
//! atom plus the diagonal blockade. Adding the anti-Hermitian decay term
//! -(i/2) sum L'L (also diagonal) gives an effective generator that splits
//! into 2x2 blocks over the driven transition and scalar phases for every
//! other basis state. Each block exponential has a closed form, so states and
//! matrices propagate through a segment in O(dim) without any stepping. The
//! same blocks drive the no-jump branch of the trajectory solver and the
//! unitary limit of the dense solver.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::protocol::{FrameOp, Pulse, PulseSequence, SequenceStep};
use crate::register::{DecayRates, StateSpace};
use ndarray::ArrayViewMut2;

/// Decay rate leaving each kept basis state: the diagonal of sum L'L.
pub fn decay_diagonal(space: &StateSpace, rates: &DecayRates) -> Vec<f64> {
    let n = space.atom_count();
    (0..space.dim())
        .map(|k| {
            let mut d = 0.0;
            for a in 0..n {
                let ryd = space.rydberg_level(a);
                if space.level_of(k, a) == ryd {
                    d += if space.atom_dim(a) == 3 {
                        rates.gamma0 + rates.gamma1
                    } else {
                        rates.gamma_a
                    };
                }
            }
            d
        })
        .collect()
}

/// The constant generator of one pulse: -i H_eff with
/// H_eff = H_drive + V - (i/2) diag(decay).
#[derive(Debug, Clone)]
pub struct SegmentGenerator {
    /// -i v_k - d_k/2 for every kept state.
    diag: Vec<C64>,
    /// (lower, upper) kept indices coupled by the drive.
    pairs: Vec<(u32, u32)>,
    half_rabi: f64,
    duration: f64,
}

impl SegmentGenerator {
    pub fn new(space: &StateSpace, pulse: &Pulse, rates: &DecayRates) -> Result<Self> {
        let (lo, hi) = space.transition_levels(pulse.atom, pulse.transition)?;
        if pulse.rabi <= 0.0 {
            return Err(Error::InvalidSequence(format!(
                "pulse on atom {} has nonpositive rabi frequency",
                pulse.atom
            )));
        }
        let decay = decay_diagonal(space, rates);
        let diag: Vec<C64> = (0..space.dim())
            .map(|k| C64::new(-0.5 * decay[k], -space.blockade_shift(k)))
            .collect();
        let shift = (hi - lo) * space_stride(space, pulse.atom);
        let mut pairs = Vec::new();
        for k in 0..space.dim() {
            if space.level_of(k, pulse.atom) == lo {
                let f_hi = space.full_index(k) + shift;
                if let Some(kq) = space.position(f_hi) {
                    pairs.push((k as u32, kq as u32));
                }
            }
        }
        Ok(SegmentGenerator {
            diag,
            pairs,
            half_rabi: 0.5 * pulse.rabi,
            duration: pulse.duration(),
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Kept-index pairs coupled by the drive.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn half_rabi(&self) -> f64 {
        self.half_rabi
    }

    /// Exponential of the generator for an elapsed time tau.
    pub fn flow(&self, tau: f64) -> PulseFlow {
        let mut diag: Vec<C64> = self.diag.iter().map(|&g| (g * tau).exp()).collect();
        let c = C64::new(0.0, -self.half_rabi);
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for &(p, q) in &self.pairs {
            let gp = self.diag[p as usize];
            let gq = self.diag[q as usize];
            let mean = 0.5 * (gp + gq);
            let a = 0.5 * (gp - gq);
            let mu = (a * a + c * c).sqrt();
            let z = mu * tau;
            let ch = z.cosh();
            let sh = if z.norm() < 1e-5 {
                let z2 = z * z;
                tau * (1.0 + z2 / 6.0 + z2 * z2 / 120.0)
            } else {
                z.sinh() / mu
            };
            let e = (mean * tau).exp();
            let block = [
                e * (ch + sh * a),
                e * (sh * c),
                e * (sh * c),
                e * (ch - sh * a),
            ];
            diag[p as usize] = crate::linalg::ONE;
            diag[q as usize] = crate::linalg::ONE;
            pairs.push((p, q, block));
        }
        PulseFlow { diag, pairs }
    }
}

pub(crate) fn space_stride(space: &StateSpace, atom: usize) -> usize {
    // stride of an atom inside the full product index
    let mut s = 1usize;
    for a in (atom + 1..space.atom_count()).rev() {
        s *= space.atom_dim(a);
    }
    s
}

/// exp(-i H_eff tau) in factored form: scalar phases plus 2x2 blocks.
#[derive(Debug, Clone)]
pub struct PulseFlow {
    diag: Vec<C64>,
    pairs: Vec<(u32, u32, [C64; 4])>,
}

impl PulseFlow {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply_state(&self, psi: &mut [C64]) {
        for (k, &d) in self.diag.iter().enumerate() {
            psi[k] *= d;
        }
        for &(p, q, g) in &self.pairs {
            let (p, q) = (p as usize, q as usize);
            let (a, b) = (psi[p], psi[q]);
            psi[p] = g[0] * a + g[1] * b;
            psi[q] = g[2] * a + g[3] * b;
        }
    }

    /// m <- G m (mixes rows; every column is propagated independently).
    pub fn apply_left(&self, m: &mut ArrayViewMut2<C64>) {
        for (k, &d) in self.diag.iter().enumerate() {
            if d != crate::linalg::ONE {
                for v in m.row_mut(k) {
                    *v *= d;
                }
            }
        }
        for &(p, q, g) in &self.pairs {
            let (p, q) = (p as usize, q as usize);
            let (rp, rq) = m.multi_slice_mut((ndarray::s![p, ..], ndarray::s![q, ..]));
            azip_rotate(rp, rq, g);
        }
    }

    /// m <- m G' (mixes columns with the conjugate transpose).
    pub fn apply_right_dagger(&self, m: &mut ArrayViewMut2<C64>) {
        for (k, &d) in self.diag.iter().enumerate() {
            let dc = d.conj();
            if dc != crate::linalg::ONE {
                for v in m.column_mut(k) {
                    *v *= dc;
                }
            }
        }
        for &(p, q, g) in &self.pairs {
            let (p, q) = (p as usize, q as usize);
            let (cp, cq) = m.multi_slice_mut((ndarray::s![.., p], ndarray::s![.., q]));
            let gc = [g[0].conj(), g[1].conj(), g[2].conj(), g[3].conj()];
            azip_rotate(cp, cq, gc);
        }
    }

    /// rho <- G rho G', the closed-system (or no-jump) conjugation.
    pub fn conjugate(&self, rho: &mut ArrayViewMut2<C64>) {
        self.apply_left(&mut rho.view_mut());
        self.apply_right_dagger(&mut rho.view_mut());
    }
}

fn azip_rotate(
    mut x: ndarray::ArrayViewMut1<C64>,
    mut y: ndarray::ArrayViewMut1<C64>,
    g: [C64; 4],
) {
    for (xv, yv) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xv, *yv);
        *xv = g[0] * a + g[1] * b;
        *yv = g[2] * a + g[3] * b;
    }
}

/// Index swaps realizing an instantaneous frame operation.
pub fn frame_swaps(space: &StateSpace, op: &FrameOp) -> Result<Vec<(u32, u32)>> {
    let FrameOp::SigmaX { atom } = *op;
    if atom >= space.atom_count() || space.atom_dim(atom) != 3 {
        return Err(Error::InvalidSequence(format!(
            "sigma-x frame op addresses atom {atom}, which is not a qubit atom"
        )));
    }
    let stride = space_stride(space, atom);
    let mut swaps = Vec::new();
    for k in 0..space.dim() {
        if space.level_of(k, atom) == 0 {
            let f = space.full_index(k) + stride;
            // the |0>,|1> swap never changes the excitation count
            let kq = space
                .position(f)
                .expect("swap partner inside any excitation truncation");
            swaps.push((k as u32, kq as u32));
        }
    }
    Ok(swaps)
}

pub fn apply_swaps_state(swaps: &[(u32, u32)], psi: &mut [C64]) {
    for &(p, q) in swaps {
        psi.swap(p as usize, q as usize);
    }
}

pub fn apply_swaps_left(swaps: &[(u32, u32)], m: &mut ArrayViewMut2<C64>) {
    for &(p, q) in swaps {
        let (rp, rq) = m.multi_slice_mut((ndarray::s![p as usize, ..], ndarray::s![q as usize, ..]));
        ndarray::Zip::from(rp).and(rq).for_each(std::mem::swap);
    }
}

pub fn apply_swaps_right(swaps: &[(u32, u32)], m: &mut ArrayViewMut2<C64>) {
    for &(p, q) in swaps {
        let (cp, cq) = m.multi_slice_mut((ndarray::s![.., p as usize], ndarray::s![.., q as usize]));
        ndarray::Zip::from(cp).and(cq).for_each(std::mem::swap);
    }
}

/// One step of a compiled sequence in propagating form.
pub enum StepFlow {
    Segment(SegmentGenerator),
    Frame(Vec<(u32, u32)>),
}

/// A pulse sequence lowered onto a concrete state space: per-segment
/// generators plus frame swaps, ready for repeated propagation.
pub struct SequenceFlows {
    steps: Vec<StepFlow>,
    dim: usize,
}

impl SequenceFlows {
    pub fn new(seq: &PulseSequence, space: &StateSpace, rates: &DecayRates) -> Result<Self> {
        rates.validate()?;
        let mut steps = Vec::with_capacity(seq.step_count());
        for step in seq.steps() {
            match step {
                SequenceStep::Pulse(p) => {
                    if p.area == 0.0 {
                        continue; // zero-duration pulses never reach the propagator
                    }
                    steps.push(StepFlow::Segment(SegmentGenerator::new(space, p, rates)?));
                }
                SequenceStep::Frame(f) => steps.push(StepFlow::Frame(frame_swaps(space, f)?)),
            }
        }
        Ok(SequenceFlows {
            steps,
            dim: space.dim(),
        })
    }

    pub fn steps(&self) -> &[StepFlow] {
        &self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_duration(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| match s {
                StepFlow::Segment(g) => g.duration(),
                StepFlow::Frame(_) => 0.0,
            })
            .sum()
    }

    /// Propagates a pure state through the whole sequence (no jumps).
    pub fn propagate_state(&self, psi: &mut [C64]) {
        for step in &self.steps {
            match step {
                StepFlow::Segment(g) => g.flow(g.duration()).apply_state(psi),
                StepFlow::Frame(swaps) => apply_swaps_state(swaps, psi),
            }
        }
    }

    /// Conjugates a density matrix through the whole sequence; exact for
    /// zero decay, the no-jump branch otherwise.
    pub fn conjugate_density(&self, rho: &mut ArrayViewMut2<C64>) {
        for step in &self.steps {
            match step {
                StepFlow::Segment(g) => g.flow(g.duration()).conjugate(rho),
                StepFlow::Frame(swaps) => {
                    apply_swaps_left(swaps, &mut rho.view_mut());
                    apply_swaps_right(swaps, &mut rho.view_mut());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, expm, identity, max_abs_diff, C64, I, ONE, ZERO};
    use crate::protocol::{Pulse, Transition};
    use crate::register::{build_register, CouplingMap, Topology};
    use ndarray::Array2;
    use std::f64::consts::PI;

    fn distant(n_a: usize, u: f64) -> crate::register::Register {
        let topo = Topology::DistantGate { n_ancillas: n_a };
        build_register(topo, CouplingMap::chain(topo, u)).unwrap()
    }

    fn flow_matrix(g: &SegmentGenerator, tau: f64) -> Array2<C64> {
        let d = g.dim();
        let mut m = identity(d);
        g.flow(tau).apply_left(&mut m.view_mut());
        m
    }

    fn dense_generator(
        space: &crate::register::StateSpace,
        pulse: &Pulse,
        rates: &DecayRates,
    ) -> Array2<C64> {
        // -i (H_drive + V - i/2 D) written out in full
        let d = space.dim();
        let mut h = space.drive(pulse).unwrap().to_dense();
        let decay = decay_diagonal(space, rates);
        for k in 0..d {
            h[[k, k]] += C64::new(space.blockade_shift(k), -0.5 * decay[k]);
        }
        h.mapv(|z| -I * z)
    }

    #[test]
    fn matches_matrix_exponential() {
        let reg = distant(1, 200.0);
        let space = reg.space(None);
        let rates = DecayRates {
            gamma0: 3e-3,
            gamma1: 1e-3,
            gamma_a: 2e-3,
        };
        for pulse in [
            Pulse::pi(0, Transition::Q1R),
            Pulse::pi(1, Transition::GE),
            Pulse::two_pi(2, Transition::Q1R),
            Pulse::pi(2, Transition::Q0R),
        ] {
            let g = SegmentGenerator::new(&space, &pulse, &rates).unwrap();
            for tau in [0.3, pulse.duration()] {
                let got = flow_matrix(&g, tau);
                let want = expm(&dense_generator(&space, &pulse, &rates).mapv(|z| z * tau));
                assert!(
                    max_abs_diff(&got, &want) < 1e-12,
                    "atom {} tau {tau}",
                    pulse.atom
                );
            }
        }
    }

    #[test]
    fn unitary_without_decay() {
        let reg = distant(2, 200.0);
        let space = reg.space(None);
        let g = SegmentGenerator::new(&space, &Pulse::pi(1, Transition::GE), &DecayRates::zero())
            .unwrap();
        let m = flow_matrix(&g, PI);
        let p = dagger(&m).dot(&m);
        assert!(max_abs_diff(&p, &identity(space.dim())) < 1e-12);
    }

    #[test]
    fn resonant_pi_and_two_pi_amplitudes() {
        // isolated driven pair: |g> -> -i|e> under a pi pulse, sign flip
        // under a 2pi pulse
        let reg = distant(0, 200.0);
        let space = reg.space(None);
        let g =
            SegmentGenerator::new(&space, &Pulse::pi(0, Transition::Q1R), &DecayRates::zero())
                .unwrap();
        let m = flow_matrix(&g, PI);
        // |1,0> at index 3 pairs with |r,0> at index 6
        assert!((m[[6, 3]] - (-I)).norm() < 1e-12);
        assert!(m[[3, 3]].norm() < 1e-12);
        let m2 = flow_matrix(&g, 2.0 * PI);
        assert!((m2[[3, 3]] - (-ONE)).norm() < 1e-12);
        assert!(m2[[6, 3]].norm() < 1e-12);
    }

    #[test]
    fn blocked_transition_is_suppressed() {
        // control in |r>: the ancilla pulse is shifted by U and transfers
        // at most ~ (rabi/U)^2 of the population
        let u = 200.0;
        let reg = distant(1, u);
        let space = reg.space(None);
        let g = SegmentGenerator::new(&space, &Pulse::pi(1, Transition::GE), &DecayRates::zero())
            .unwrap();
        let m = flow_matrix(&g, PI);
        // |r, g, 0> index: 2*6 + 0*3 + 0 = 12; partner |r, e, 0> = 15
        let transfer = m[[15, 12]].norm_sqr();
        assert!(transfer < 1.1 / (u * u), "transfer {transfer}");
        assert!((m[[12, 12]].norm() - 1.0).abs() < 1e-4);
        // unblocked branch |0, g, 0> -> |0, e, 0| fully transfers
        assert!((m[[3, 0]] - (-I)).norm() < 1e-12);
    }

    #[test]
    fn no_jump_norm_decays_monotonically() {
        let reg = distant(1, 200.0);
        let space = reg.space(None);
        let rates = DecayRates::uniform(1e-2);
        let g = SegmentGenerator::new(&space, &Pulse::pi(0, Transition::Q1R), &rates).unwrap();
        let mut psi = vec![ZERO; space.dim()];
        psi[space.position(reg.coding_index(1, 0)).unwrap()] = ONE;
        let mut last = 1.0;
        for i in 1..=8 {
            let tau = PI * i as f64 / 8.0;
            let mut p = psi.clone();
            g.flow(tau).apply_state(&mut p);
            let n: f64 = p.iter().map(|z| z.norm_sqr()).sum();
            assert!(n <= last + 1e-12);
            last = n;
        }
        assert!(last < 1.0);
    }

    #[test]
    fn flows_compose() {
        let reg = distant(1, 50.0);
        let space = reg.space(None);
        let rates = DecayRates::uniform(5e-3);
        let g = SegmentGenerator::new(&space, &Pulse::pi(2, Transition::Q0R), &rates).unwrap();
        let whole = flow_matrix(&g, 1.1);
        let half = flow_matrix(&g, 0.4);
        let rest = flow_matrix(&g, 0.7);
        assert!(max_abs_diff(&rest.dot(&half), &whole) < 1e-12);
    }

    #[test]
    fn conjugation_matches_explicit_product() {
        let reg = distant(1, 200.0);
        let space = reg.space(None);
        let rates = DecayRates::uniform(2e-3);
        let g = SegmentGenerator::new(&space, &Pulse::pi(1, Transition::GE), &rates).unwrap();
        let gm = flow_matrix(&g, PI);
        let d = space.dim();
        let mut rho = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                rho[[i, j]] = C64::new((i + 1) as f64 * 0.01, (j as f64) * 0.02 - 0.1);
            }
        }
        let want = gm.dot(&rho).dot(&dagger(&gm));
        g.flow(PI).conjugate(&mut rho.view_mut());
        assert!(max_abs_diff(&rho, &want) < 1e-12);
    }

    #[test]
    fn frame_swap_is_an_involution() {
        let reg = distant(2, 200.0);
        let space = reg.space(Some(2));
        let swaps = frame_swaps(&space, &FrameOp::SigmaX { atom: 0 }).unwrap();
        let mut psi: Vec<C64> = (0..space.dim())
            .map(|k| C64::new(k as f64, -(k as f64) * 0.5))
            .collect();
        let orig = psi.clone();
        apply_swaps_state(&swaps, &mut psi);
        assert_ne!(psi, orig);
        apply_swaps_state(&swaps, &mut psi);
        assert_eq!(psi, orig);
        // swapping |0> and |1> of the control maps coding index 00 -> 10
        let k00 = space.position(reg.coding_index(0, 0)).unwrap() as u32;
        let k10 = space.position(reg.coding_index(1, 0)).unwrap() as u32;
        assert!(swaps.contains(&(k00, k10)));
        // frame ops on an ancilla are rejected
        assert!(frame_swaps(&space, &FrameOp::SigmaX { atom: 1 }).is_err());
    }

    #[test]
    fn truncated_partner_leaves_state_fixed_up_to_phase() {
        // cap 1: from a singly excited state the drive's upper partner is
        // outside the space, so the flow reduces to the diagonal phase
        let reg = distant(2, 200.0);
        let space = reg.space(Some(1));
        let g = SegmentGenerator::new(&space, &Pulse::pi(0, Transition::Q1R), &DecayRates::zero())
            .unwrap();
        // |1, g, e, 0>: ancilla A2 excited, control in |1>
        let f = reg.coding_index(1, 0) + reg.strides()[2];
        let k = space.position(f).unwrap();
        let mut psi = vec![ZERO; space.dim()];
        psi[k] = ONE;
        g.flow(PI).apply_state(&mut psi);
        assert!((psi[k].norm() - 1.0).abs() < 1e-12);
        let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sequence_flow_unitary_limit_is_pure() {
        let spec = crate::protocol::GateSpec::new(
            crate::protocol::Gate::ModifiedCz,
            1,
            crate::protocol::Variant::Direct,
        );
        let seq = crate::protocol::compile_gate(spec).unwrap();
        let reg = distant(1, 200.0);
        let space = reg.space(None);
        let flows = SequenceFlows::new(&seq, &space, &DecayRates::zero()).unwrap();
        assert_eq!(flows.total_duration(), seq.duration());
        let mut psi = vec![ZERO; space.dim()];
        psi[space.position(reg.coding_index(1, 1)).unwrap()] = ONE;
        flows.propagate_state(&mut psi);
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-10);
    }
}

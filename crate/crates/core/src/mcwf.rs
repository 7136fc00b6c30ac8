//! Stochastic wave-function unravelling of the master equation.
//!
//! Between jumps a trajectory follows the exact no-jump pulse flows, so the
//! only discretization anywhere is the bisection locating where the squared
//! norm crosses the waiting-time threshold. Jump channels reuse the model's
//! move tables; every trajectory is reproducible from its seed alone, and
//! ensembles assign one independent stream per (probe, trajectory) pair so
//! results do not depend on scheduling order.

use crate::dense::LindbladModel;
use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::protocol::PulseSequence;
use crate::segment::{apply_swaps_state, SequenceFlows, StepFlow};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// One realized trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    /// Final state, normalized.
    pub state: Vec<C64>,
    /// Ordered (time, channel index) pairs; channels index the model's jump
    /// operator list.
    pub jumps: Vec<(f64, usize)>,
    pub seed: u64,
}

/// Sample mean with its standard error.
#[derive(Debug, Clone)]
pub struct EnsembleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_trajectories: usize,
    pub seed_base: u64,
}

fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

/// Runs one trajectory from a normalized full-space state.
pub fn run_trajectory(
    seq: &PulseSequence,
    model: &LindbladModel,
    psi0: &[C64],
    seed: u64,
) -> Result<TrajectoryResult> {
    let flows = SequenceFlows::new(seq, model.space(), model.rates())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_with_rng(&flows, model, psi0, &mut rng, seed)
}

fn run_with_rng(
    flows: &SequenceFlows,
    model: &LindbladModel,
    psi0: &[C64],
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<TrajectoryResult> {
    if psi0.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has length {}, model space has dimension {}",
            psi0.len(),
            model.dim()
        )));
    }
    let n0 = norm_sqr(psi0);
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(Error::UnphysicalState(format!(
            "initial state norm deviates from one by {:.3e}",
            (n0 - 1.0).abs()
        )));
    }
    let mut psi = psi0.to_vec();
    let mut jumps = Vec::new();
    let mut threshold: f64 = rng.random();
    let mut elapsed = 0.0f64;
    for step in flows.steps() {
        match step {
            StepFlow::Frame(swaps) => apply_swaps_state(swaps, &mut psi),
            StepFlow::Segment(g) => {
                let mut remaining = g.duration();
                loop {
                    let mut full = psi.clone();
                    g.flow(remaining).apply_state(&mut full);
                    if norm_sqr(&full) > threshold {
                        psi = full;
                        elapsed += remaining;
                        break;
                    }
                    // the squared norm decays monotonically: bisect the
                    // crossing time inside this segment
                    let (mut lo, mut hi) = (0.0f64, remaining);
                    let mut t_star = 0.5 * remaining;
                    let mut hit = psi.clone();
                    let mut found = false;
                    for _ in 0..200 {
                        t_star = 0.5 * (lo + hi);
                        hit = psi.clone();
                        g.flow(t_star).apply_state(&mut hit);
                        let f = norm_sqr(&hit) - threshold;
                        if f.abs() <= 1e-9 {
                            found = true;
                            break;
                        }
                        if f > 0.0 {
                            lo = t_star;
                        } else {
                            hi = t_star;
                        }
                    }
                    if !found {
                        return Err(Error::BisectionFailure(format!(
                            "jump time not bracketed to tolerance after 200 halvings \
                             (threshold {threshold:.3e})"
                        )));
                    }
                    // select the channel with probability proportional to the
                    // instantaneous jump rate out of the collapsed state
                    let channels = model.channels();
                    let weights: Vec<f64> = channels
                        .iter()
                        .map(|c| {
                            c.rate
                                * c.moves
                                    .iter()
                                    .map(|&(_, from)| hit[from as usize].norm_sqr())
                                    .sum::<f64>()
                        })
                        .collect();
                    let total: f64 = weights.iter().sum();
                    if !(total > 1e-300) {
                        return Err(Error::NormUnderflow(total));
                    }
                    let mut pick = rng.random::<f64>() * total;
                    let mut chosen = channels.len() - 1;
                    for (k, w) in weights.iter().enumerate() {
                        if pick < *w {
                            chosen = k;
                            break;
                        }
                        pick -= w;
                    }
                    let mut post = vec![ZERO; psi.len()];
                    let amp = channels[chosen].rate.sqrt();
                    for &(to, from) in &channels[chosen].moves {
                        post[to as usize] = amp * hit[from as usize];
                    }
                    let pn = norm_sqr(&post).sqrt();
                    if pn < 1e-150 {
                        return Err(Error::NormUnderflow(pn));
                    }
                    for z in &mut post {
                        *z /= pn;
                    }
                    psi = post;
                    elapsed += t_star;
                    remaining -= t_star;
                    jumps.push((elapsed, chosen));
                    threshold = rng.random();
                    if remaining <= 0.0 {
                        break;
                    }
                }
            }
        }
    }
    let fnorm = norm_sqr(&psi).sqrt();
    if fnorm < 1e-150 {
        return Err(Error::NormUnderflow(fnorm));
    }
    for z in &mut psi {
        *z /= fnorm;
    }
    Ok(TrajectoryResult {
        state: psi,
        jumps,
        seed,
    })
}

/// Monte-Carlo estimate of the basis-averaged classical fidelity. Probes are
/// coding-space vectors; each (probe, trajectory) pair draws from its own
/// random stream keyed by `seed_base`.
pub fn classical_fidelity_mc(
    seq: &PulseSequence,
    model: &LindbladModel,
    ideal: &Array2<C64>,
    basis: &[Vec<C64>],
    n_traj: usize,
    seed_base: u64,
) -> Result<EnsembleEstimate> {
    if n_traj < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two trajectories per probe are required, got {n_traj}"
        )));
    }
    let d = basis.len();
    if d == 0 || basis.iter().any(|v| v.len() != 4) {
        return Err(Error::DimensionMismatch(
            "probes must be 4-component coding vectors".into(),
        ));
    }
    let flows = SequenceFlows::new(seq, model.space(), model.rates())?;
    // embed each probe and its ideal image once
    let mut inputs = Vec::with_capacity(d);
    for c in basis {
        let mut psi = vec![ZERO; model.dim()];
        let mut target = vec![ZERO; model.dim()];
        for k in 0..4 {
            psi[model.coding_position(k / 2, k % 2)] = c[k];
            let out: C64 = (0..4).map(|j| ideal[[k, j]] * c[j]).sum();
            target[model.coding_position(k / 2, k % 2)] = out;
        }
        inputs.push((psi, target));
    }
    let samples: Result<Vec<(usize, f64)>> = (0..d * n_traj)
        .into_par_iter()
        .map(|task| {
            let probe = task / n_traj;
            let mut rng = ChaCha8Rng::seed_from_u64(seed_base);
            rng.set_stream(task as u64 + 1);
            let (psi0, target) = &inputs[probe];
            let traj = run_with_rng(&flows, model, psi0, &mut rng, seed_base)?;
            let ov: C64 = target
                .iter()
                .zip(&traj.state)
                .map(|(t, s)| t.conj() * s)
                .sum();
            Ok((probe, ov.norm_sqr()))
        })
        .collect();
    let samples = samples?;
    let mut per_probe: Vec<Vec<f64>> = vec![Vec::with_capacity(n_traj); d];
    for (probe, f) in samples {
        per_probe[probe].push(f);
    }
    let mut mean = 0.0;
    let mut var_acc = 0.0;
    for vals in &per_probe {
        let m: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let s2: f64 =
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        mean += m;
        var_acc += s2 / vals.len() as f64;
    }
    mean /= d as f64;
    let stderr = var_acc.sqrt() / d as f64;
    Ok(EnsembleEstimate {
        mean,
        stderr,
        n_trajectories: d * n_traj,
        seed_base,
    })
}

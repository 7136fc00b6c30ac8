//! Action of the vectorized master-equation generator and its exponential.
//!
//! One pulse segment has a constant generator L(rho) = -i[H, rho]
//! + sum_k (L_k rho L_k' - {L_k'L_k, rho}/2). H splits into a diagonal part
//! (blockade) and the single-atom drive; the dissipators split into a
//! diagonal anticommutator and a jump scatter. The diagonal pieces fuse into
//! one complex elementwise factor, so applying L costs O(dim^2). The segment
//! propagator acts through a scaled, truncated Taylor series of exp(L tau):
//! substep counts follow from an upper bound on the generator norm, and each
//! substep terminates early once two consecutive terms fall below tolerance.

use crate::error::{Error, Result};
use crate::linalg::C64;
use ndarray::Array2;

/// One decay channel: rate gamma and the basis moves of L = sqrt(gamma)
/// sum |to><from|.
#[derive(Debug, Clone)]
pub(crate) struct Channel {
    pub rate: f64,
    pub moves: Vec<(u32, u32)>,
}

/// Borrowed view of a segment's generator pieces.
pub(crate) struct SuperOp<'a> {
    /// Fused diagonal: -i(v_i - v_j) - (d_i + d_j)/2 at (i, j).
    pub cdiag: &'a Array2<C64>,
    /// Kept-index pairs coupled by the drive (lower, upper).
    pub pairs: &'a [(u32, u32)],
    pub half_rabi: f64,
    pub channels: &'a [Channel],
}

impl SuperOp<'_> {
    pub fn dim(&self) -> usize {
        self.cdiag.nrows()
    }

    /// y = L(x).
    pub fn apply(&self, x: &Array2<C64>, y: &mut Array2<C64>) {
        let d = self.dim();
        let xs = x.as_slice().expect("input operator must be contiguous");
        let ys = y.as_slice_mut().expect("output operator must be contiguous");
        let cs = self.cdiag.as_slice().expect("diagonal table is contiguous");
        // fused diagonal of commutator-with-V and the decay anticommutator
        for k in 0..d * d {
            ys[k] = cs[k] * xs[k];
        }
        // drive: -i hr (|p><q| + |q><p|) from the left, +i hr from the right
        let c = C64::new(0.0, -self.half_rabi);
        for &(p, q) in self.pairs {
            let (pr, qr) = (p as usize * d, q as usize * d);
            for j in 0..d {
                let (xp, xq) = (xs[pr + j], xs[qr + j]);
                ys[pr + j] += c * xq;
                ys[qr + j] += c * xp;
            }
            let (pc, qc) = (p as usize, q as usize);
            for i in 0..d {
                let (xp, xq) = (xs[i * d + pc], xs[i * d + qc]);
                ys[i * d + pc] -= c * xq;
                ys[i * d + qc] -= c * xp;
            }
        }
        // jump scatter: L rho L' copies the excited block down
        for ch in self.channels {
            if ch.rate == 0.0 {
                continue;
            }
            let g = ch.rate;
            for &(ti, fi) in &ch.moves {
                let tr = ti as usize * d;
                let fr = fi as usize * d;
                for &(tj, fj) in &ch.moves {
                    ys[tr + tj as usize] += g * xs[fr + fj as usize];
                }
            }
        }
    }

    /// Upper bound on the induced infinity-style norm, used to pick the
    /// Taylor substep count.
    pub fn norm_bound(&self) -> f64 {
        let mut vmax = 0.0f64;
        let mut dmax = 0.0f64;
        for &z in self.cdiag.iter() {
            vmax = vmax.max(z.im.abs());
            dmax = dmax.max(-z.re);
        }
        let jump: f64 = self.channels.iter().map(|c| c.rate).sum();
        vmax + 2.0 * dmax.max(0.0) + 4.0 * self.half_rabi + jump + 1.0
    }

    /// Dense matrix of the generator on vectorized operators (row-major
    /// flattening), for the small-dimension reference path.
    pub fn to_dense(&self) -> Array2<C64> {
        let d = self.dim();
        let n = d * d;
        let mut m = Array2::zeros((n, n));
        for i in 0..d {
            for j in 0..d {
                m[[i * d + j, i * d + j]] = self.cdiag[[i, j]];
            }
        }
        let c = C64::new(0.0, -self.half_rabi);
        for &(p, q) in self.pairs {
            let (p, q) = (p as usize, q as usize);
            for j in 0..d {
                m[[p * d + j, q * d + j]] += c;
                m[[q * d + j, p * d + j]] += c;
            }
            for i in 0..d {
                m[[i * d + p, i * d + q]] -= c;
                m[[i * d + q, i * d + p]] -= c;
            }
        }
        for ch in self.channels {
            if ch.rate == 0.0 {
                continue;
            }
            let g = C64::new(ch.rate, 0.0);
            for &(ti, fi) in &ch.moves {
                for &(tj, fj) in &ch.moves {
                    m[[ti as usize * d + tj as usize, fi as usize * d + fj as usize]] += g;
                }
            }
        }
        m
    }
}

/// Substep size limit for the truncated series: keeps intermediate term
/// growth (and with it rounding amplification) modest.
const THETA: f64 = 10.0;
const MAX_TERMS: usize = 48;

/// Advances every matrix in the batch by exp(L tau). Returns the substep
/// count that converged.
pub(crate) fn expmv(
    op: &SuperOp,
    batch: &mut [Array2<C64>],
    tau: f64,
    rel_tol: f64,
    max_substeps: usize,
) -> Result<usize> {
    if tau == 0.0 {
        return Ok(0);
    }
    let mut steps = ((op.norm_bound() * tau / THETA).ceil() as usize).max(1);
    loop {
        if steps > max_substeps {
            return Err(Error::IntegratorFailure(format!(
                "segment needs more than {max_substeps} exponential substeps"
            )));
        }
        match try_expmv(op, batch, tau, steps, rel_tol) {
            Some(result) => {
                for (b, r) in batch.iter_mut().zip(result) {
                    *b = r;
                }
                return Ok(steps);
            }
            None => steps *= 2,
        }
    }
}

fn try_expmv(
    op: &SuperOp,
    batch: &[Array2<C64>],
    tau: f64,
    steps: usize,
    rel_tol: f64,
) -> Option<Vec<Array2<C64>>> {
    let h = tau / steps as f64;
    let mut state: Vec<Array2<C64>> = batch.to_vec();
    let mut term = state.clone();
    let mut next = state.clone();
    for _ in 0..steps {
        for (t, s) in term.iter_mut().zip(&state) {
            t.assign(s);
        }
        let mut small_streak = 0;
        let mut converged = false;
        for m in 1..=MAX_TERMS {
            let hm = h / m as f64;
            for (t, n) in term.iter_mut().zip(next.iter_mut()) {
                op.apply(t, n);
                n.mapv_inplace(|z| z * hm);
                t.assign(n);
            }
            let mut tnorm = 0.0f64;
            let mut snorm = 0.0f64;
            for (t, s) in term.iter().zip(state.iter_mut()) {
                *s += t;
                tnorm = t.iter().fold(tnorm, |a, z| a.max(z.norm()));
                snorm = s.iter().fold(snorm, |a, z| a.max(z.norm()));
            }
            if tnorm <= rel_tol * snorm.max(f64::MIN_POSITIVE) {
                small_streak += 1;
                if small_streak == 2 {
                    converged = true;
                    break;
                }
            } else {
                small_streak = 0;
            }
        }
        if !converged {
            return None;
        }
    }
    Some(state)
}

/// Classical fourth-order Runge-Kutta with a fixed conservative step, kept
/// as a cross-validation path for the exponential propagator.
pub(crate) fn rk4(
    op: &SuperOp,
    batch: &mut [Array2<C64>],
    tau: f64,
    max_substeps: usize,
) -> Result<usize> {
    if tau == 0.0 {
        return Ok(0);
    }
    let scale = op.norm_bound();
    let h_cap = 0.05 / scale.max(1.0);
    let steps = ((tau / h_cap).ceil() as usize).max(1);
    if steps > max_substeps {
        return Err(Error::IntegratorFailure(format!(
            "fixed-step integration needs {steps} substeps, above the cap {max_substeps}"
        )));
    }
    let h = tau / steps as f64;
    let dim = op.dim();
    let mut k1 = Array2::zeros((dim, dim));
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for rho in batch.iter_mut() {
        for _ in 0..steps {
            op.apply(rho, &mut k1);
            scaled_sum(&mut tmp, rho, &k1, 0.5 * h);
            op.apply(&tmp, &mut k2);
            scaled_sum(&mut tmp, rho, &k2, 0.5 * h);
            op.apply(&tmp, &mut k3);
            scaled_sum(&mut tmp, rho, &k3, h);
            op.apply(&tmp, &mut k4);
            ndarray::Zip::from(rho.view_mut())
                .and(&k1)
                .and(&k2)
                .and(&k3)
                .and(&k4)
                .for_each(|r, &a, &b, &c, &d| {
                    *r += (a + 2.0 * b + 2.0 * c + d) * (h / 6.0);
                });
        }
    }
    Ok(steps)
}

fn scaled_sum(out: &mut Array2<C64>, base: &Array2<C64>, k: &Array2<C64>, f: f64) {
    ndarray::Zip::from(out.view_mut())
        .and(base)
        .and(k)
        .for_each(|o, &b, &kv| *o = b + kv * f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm, max_abs_diff, C64, ONE, ZERO};

    fn toy_op() -> (Array2<C64>, Vec<(u32, u32)>, Vec<Channel>) {
        // 3-level toy: |0>, |1> driven, |1> decays to |2| at gamma, level
        // |1> carries a diagonal shift
        let d = 3;
        let v = [0.0, 7.0, 0.0];
        let gamma = 0.3;
        let dec = [0.0, gamma, 0.0];
        let mut cdiag = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                cdiag[[i, j]] = C64::new(-(dec[i] + dec[j]) / 2.0, -(v[i] - v[j]));
            }
        }
        let pairs = vec![(0u32, 1u32)];
        let channels = vec![Channel {
            rate: gamma,
            moves: vec![(2, 1)],
        }];
        (cdiag, pairs, channels)
    }

    #[test]
    fn dense_generator_matches_apply() {
        let (cdiag, pairs, channels) = toy_op();
        let op = SuperOp {
            cdiag: &cdiag,
            pairs: &pairs,
            half_rabi: 0.5,
            channels: &channels,
        };
        let dense = op.to_dense();
        let mut x = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                x[[i, j]] = C64::new(0.1 + i as f64, 0.2 - j as f64);
            }
        }
        let mut y = Array2::zeros((3, 3));
        op.apply(&x, &mut y);
        // flatten x, multiply by the dense generator, compare
        let xf: Vec<C64> = x.iter().copied().collect();
        let mut yf = vec![ZERO; 9];
        for r in 0..9 {
            for c in 0..9 {
                yf[r] += dense[[r, c]] * xf[c];
            }
        }
        let yflat: Vec<C64> = y.iter().copied().collect();
        for (a, b) in yflat.iter().zip(&yf) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn generator_is_trace_free() {
        let (cdiag, pairs, channels) = toy_op();
        let op = SuperOp {
            cdiag: &cdiag,
            pairs: &pairs,
            half_rabi: 0.5,
            channels: &channels,
        };
        let mut x = Array2::zeros((3, 3));
        x[[0, 0]] = C64::new(0.25, 0.0);
        x[[1, 1]] = C64::new(0.5, 0.0);
        x[[2, 2]] = C64::new(0.25, 0.0);
        x[[0, 1]] = C64::new(0.1, 0.05);
        x[[1, 0]] = x[[0, 1]].conj();
        let mut y = Array2::zeros((3, 3));
        op.apply(&x, &mut y);
        let tr: C64 = (0..3).map(|i| y[[i, i]]).sum();
        assert!(tr.norm() < 1e-14);
    }

    #[test]
    fn exponential_action_matches_dense_expm() {
        let (cdiag, pairs, channels) = toy_op();
        let op = SuperOp {
            cdiag: &cdiag,
            pairs: &pairs,
            half_rabi: 0.5,
            channels: &channels,
        };
        let tau = std::f64::consts::PI;
        let lt = op.to_dense().mapv(|z| z * tau);
        let prop = expm(&lt);
        let mut rho = Array2::zeros((3, 3));
        rho[[0, 0]] = ONE;
        rho[[0, 2]] = C64::new(0.2, -0.1);
        let mut batch = vec![rho.clone()];
        let steps = expmv(&op, &mut batch, tau, 1e-12, 1 << 20).unwrap();
        assert!(steps >= 1);
        let rf: Vec<C64> = rho.iter().copied().collect();
        let mut want = Array2::zeros((3, 3));
        for r in 0..9 {
            let mut acc = ZERO;
            for c in 0..9 {
                acc += prop[[r, c]] * rf[c];
            }
            want[[r / 3, r % 3]] = acc;
        }
        assert!(max_abs_diff(&batch[0], &want) < 1e-10);
    }

    #[test]
    fn fixed_step_agrees_with_exponential() {
        let (cdiag, pairs, channels) = toy_op();
        let op = SuperOp {
            cdiag: &cdiag,
            pairs: &pairs,
            half_rabi: 0.5,
            channels: &channels,
        };
        let tau = 1.3;
        let mut rho = Array2::zeros((3, 3));
        rho[[1, 1]] = ONE;
        rho[[1, 2]] = C64::new(-0.3, 0.4);
        let mut a = vec![rho.clone()];
        let mut b = vec![rho];
        expmv(&op, &mut a, tau, 1e-13, 1 << 20).unwrap();
        rk4(&op, &mut b, tau, 1 << 22).unwrap();
        // the fixed-step path carries ordinary truncation error
        assert!(max_abs_diff(&a[0], &b[0]) < 1e-6);
    }

    #[test]
    fn substep_cap_is_enforced() {
        let (cdiag, pairs, channels) = toy_op();
        let op = SuperOp {
            cdiag: &cdiag,
            pairs: &pairs,
            half_rabi: 0.5,
            channels: &channels,
        };
        let mut batch = vec![Array2::zeros((3, 3))];
        let err = expmv(&op, &mut batch, 1e3, 1e-12, 4);
        assert!(err.is_err());
        let err2 = rk4(&op, &mut batch, 1e3, 4);
        assert!(err2.is_err());
    }
}

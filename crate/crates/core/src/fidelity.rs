//! Fidelity measures on the coding subspace.
//!
//! The simulator reduces any run to a process tensor: the images of the
//! sixteen matrix units |m><n| of the two-qubit coding space. Everything here
//! is then small, exact linear algebra: process fidelity against the ideal
//! unitary, classical fidelities in a probe basis and its Fourier complement,
//! and the two-sided estimate that sandwiches the process fidelity between
//! numbers measurable with product probes alone.

use crate::error::{Error, Result};
use crate::linalg::{dagger, C64, ONE, ZERO};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

const D: usize = 4;

/// Linear map on the coding space, stored as the images of all matrix units.
#[derive(Debug, Clone)]
pub struct ProcessTensor {
    /// `units[m * 4 + n]` is the image of |m><n|.
    units: Vec<Array2<C64>>,
}

impl ProcessTensor {
    /// Builds from the ten upper-triangle images (m <= n, lexicographic);
    /// the rest follow from hermiticity of the map.
    pub fn from_upper_units(upper: Vec<Array2<C64>>) -> Result<ProcessTensor> {
        if upper.len() != D * (D + 1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "expected 10 propagated units, got {}",
                upper.len()
            )));
        }
        for u in &upper {
            if u.nrows() != D || u.ncols() != D {
                return Err(Error::DimensionMismatch(format!(
                    "unit image must be 4x4, got {}x{}",
                    u.nrows(),
                    u.ncols()
                )));
            }
        }
        let mut units = vec![Array2::zeros((D, D)); D * D];
        let mut it = upper.into_iter();
        for m in 0..D {
            for n in m..D {
                let img = it.next().expect("length checked");
                if n > m {
                    units[n * D + m] = dagger(&img);
                }
                units[m * D + n] = img;
            }
        }
        Ok(ProcessTensor { units })
    }

    /// Conjugation by a fixed 4x4 matrix, rho -> U rho U'.
    pub fn from_unitary(u: &Array2<C64>) -> ProcessTensor {
        let ud = dagger(u);
        let mut units = Vec::with_capacity(D * D);
        for m in 0..D {
            for n in 0..D {
                let mut e = Array2::zeros((D, D));
                e[[m, n]] = ONE;
                units.push(u.dot(&e).dot(&ud));
            }
        }
        ProcessTensor { units }
    }

    pub fn identity() -> ProcessTensor {
        ProcessTensor::from_unitary(&crate::linalg::identity(D))
    }

    /// Complete depolarization: rho -> tr(rho) I / 4.
    pub fn depolarizing() -> ProcessTensor {
        let mut units = vec![Array2::zeros((D, D)); D * D];
        for m in 0..D {
            for i in 0..D {
                units[m * D + m][[i, i]] = C64::new(0.25, 0.0);
            }
        }
        ProcessTensor { units }
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn unit(&self, m: usize, n: usize) -> &Array2<C64> {
        &self.units[m * D + n]
    }

    /// Image of an arbitrary operator by linearity.
    pub fn apply(&self, a: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((D, D));
        for m in 0..D {
            for n in 0..D {
                let w = a[[m, n]];
                if w != ZERO {
                    out.zip_mut_with(&self.units[m * D + n], |o, &u| *o += w * u);
                }
            }
        }
        out
    }
}

/// The sixteen two-qubit Pauli products, normalized so tr(A_i' A_j) = 4 d_ij.
pub fn pauli_basis() -> Vec<Array2<C64>> {
    let i2 = crate::linalg::identity(2);
    let mut x = Array2::zeros((2, 2));
    x[[0, 1]] = ONE;
    x[[1, 0]] = ONE;
    let mut y = Array2::zeros((2, 2));
    y[[0, 1]] = C64::new(0.0, -1.0);
    y[[1, 0]] = C64::new(0.0, 1.0);
    let mut z = Array2::zeros((2, 2));
    z[[0, 0]] = ONE;
    z[[1, 1]] = -ONE;
    let singles = [i2, x, y, z];
    let mut basis = Vec::with_capacity(16);
    for a in &singles {
        for b in &singles {
            basis.push(crate::linalg::kron(a, b));
        }
    }
    basis
}

/// The four coding computational states as coefficient vectors.
pub fn computational_basis() -> Vec<Vec<C64>> {
    (0..D)
        .map(|i| {
            let mut v = vec![ZERO; D];
            v[i] = ONE;
            v
        })
        .collect()
}

fn check_orthonormal(basis: &[Vec<C64>]) -> Result<()> {
    if basis.len() != D || basis.iter().any(|v| v.len() != D) {
        return Err(Error::DimensionMismatch(format!(
            "probe basis must hold 4 coding vectors, got {}",
            basis.len()
        )));
    }
    let mut defect = 0.0f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let g: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            let want = if i == j { ONE } else { ZERO };
            defect = defect.max((g - want).norm());
        }
    }
    if defect > 1e-10 {
        return Err(Error::NonOrthonormalBasis(defect));
    }
    Ok(())
}

/// Overlap of the realized map with conjugation by `ideal`, via the Pauli
/// expansion. Equals |tr(U'V)|^2/16 when the map is conjugation by V.
pub fn process_fidelity(tensor: &ProcessTensor, ideal: &Array2<C64>) -> f64 {
    let ud = dagger(ideal);
    let mut acc = 0.0;
    for a in pauli_basis() {
        let target = ideal.dot(&a).dot(&ud);
        let image = tensor.apply(&a);
        // tr(target' image)
        let mut tr = ZERO;
        for i in 0..D {
            for j in 0..D {
                tr += target[[j, i]].conj() * image[[j, i]];
            }
        }
        acc += tr.re;
    }
    acc / (D * D * D) as f64
}

/// Uniform fidelity over pure states, related to the process fidelity by a
/// fixed affine map.
pub fn average_fidelity(f_pro: f64) -> f64 {
    (D as f64 * f_pro + 1.0) / (D as f64 + 1.0)
}

/// Probability of landing on the ideal output state, averaged over an
/// orthonormal probe basis.
pub fn classical_fidelity(
    tensor: &ProcessTensor,
    ideal: &Array2<C64>,
    basis: &[Vec<C64>],
) -> Result<f64> {
    check_orthonormal(basis)?;
    let mut acc = 0.0;
    for psi in basis {
        let mut probe = Array2::zeros((D, D));
        for i in 0..D {
            for j in 0..D {
                probe[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        let image = tensor.apply(&probe);
        let out: Vec<C64> = (0..D)
            .map(|i| (0..D).map(|j| ideal[[i, j]] * psi[j]).sum())
            .collect();
        let mut f = ZERO;
        for i in 0..D {
            for j in 0..D {
                f += out[i].conj() * image[[i, j]] * out[j];
            }
        }
        acc += f.re;
    }
    Ok(acc / D as f64)
}

/// Discrete-Fourier partner of a probe basis. Classical fidelities in a basis
/// and its partner bound the process fidelity from both sides.
pub fn complementary_basis(basis: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    check_orthonormal(basis)?;
    let d = D as f64;
    let mut out = Vec::with_capacity(D);
    for k in 1..=D {
        let mut v = vec![ZERO; D];
        for (n, psi) in basis.iter().enumerate() {
            let phase = C64::from_polar(
                1.0 / d.sqrt(),
                -2.0 * std::f64::consts::PI * (k * n) as f64 / d,
            );
            for (vi, pi) in v.iter_mut().zip(psi) {
                *vi += phase * pi;
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Two-sided estimate from a pair of classical fidelities in complementary
/// bases: (f1 + f2 - 1, min(f1, f2)).
pub fn hofmann_bounds(f_computational: f64, f_complementary: f64) -> (f64, f64) {
    (
        f_computational + f_complementary - 1.0,
        f_computational.min(f_complementary),
    )
}

/// All fidelity numbers of one run in serializable form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Basis the classical probes were drawn from.
    pub probe_basis: String,
    pub f_pro: Option<f64>,
    pub f_avg: Option<f64>,
    pub classical_computational: Option<f64>,
    pub classical_complementary: Option<f64>,
    pub f_lower: f64,
    pub f_upper: f64,
    pub stderr_lower: Option<f64>,
    pub stderr_upper: Option<f64>,
}

impl FidelityReport {
    /// Full deterministic report from a propagated process tensor.
    pub fn from_tensor(tensor: &ProcessTensor, ideal: &Array2<C64>) -> Result<FidelityReport> {
        let comp = computational_basis();
        let compl = complementary_basis(&comp)?;
        let f_pro = process_fidelity(tensor, ideal);
        let f1 = classical_fidelity(tensor, ideal, &comp)?;
        let f2 = classical_fidelity(tensor, ideal, &compl)?;
        let (lo, hi) = hofmann_bounds(f1, f2);
        Ok(FidelityReport {
            probe_basis: "computational".into(),
            f_pro: Some(f_pro),
            f_avg: Some(average_fidelity(f_pro)),
            classical_computational: Some(f1),
            classical_complementary: Some(f2),
            f_lower: lo,
            f_upper: hi,
            stderr_lower: None,
            stderr_upper: None,
        })
    }

    /// Report carrying only sampled classical fidelities and their errors.
    pub fn from_classical(
        f_computational: f64,
        stderr_computational: f64,
        f_complementary: f64,
        stderr_complementary: f64,
    ) -> FidelityReport {
        let (lo, hi) = hofmann_bounds(f_computational, f_complementary);
        let se_low =
            (stderr_computational.powi(2) + stderr_complementary.powi(2)).sqrt();
        let se_high = if f_computational <= f_complementary {
            stderr_computational
        } else {
            stderr_complementary
        };
        FidelityReport {
            probe_basis: "computational".into(),
            f_pro: None,
            f_avg: None,
            classical_computational: Some(f_computational),
            classical_complementary: Some(f_complementary),
            f_lower: lo,
            f_upper: hi,
            stderr_lower: Some(se_low),
            stderr_upper: Some(se_high),
        }
    }

    /// Internal consistency: ranges and, when present, the two-sided order.
    pub fn validate(&self, slack: f64) -> Result<()> {
        let in_range = |x: f64| x >= -slack && x <= 1.0 + slack;
        for v in [
            self.f_pro,
            self.f_avg,
            self.classical_computational,
            self.classical_complementary,
        ]
        .into_iter()
        .flatten()
        {
            if !in_range(v) {
                return Err(Error::UnphysicalState(format!(
                    "fidelity {v} outside [0, 1]"
                )));
            }
        }
        if let Some(f) = self.f_pro {
            if f < self.f_lower - slack || f > self.f_upper + slack {
                return Err(Error::UnphysicalState(format!(
                    "process fidelity {f} escapes its estimate [{}, {}]",
                    self.f_lower, self.f_upper
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_unitary};
    use crate::protocol::{ideal_unitary, Gate, GateSpec, Variant};

    #[test]
    fn pauli_products_are_orthogonal() {
        let basis = pauli_basis();
        assert_eq!(basis.len(), 16);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let mut tr = ZERO;
                for r in 0..4 {
                    for c in 0..4 {
                        tr += a[[c, r]].conj() * b[[c, r]];
                    }
                }
                let want = if i == j { 4.0 } else { 0.0 };
                assert!((tr - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ideal_conjugation_scores_one() {
        for (gate, n_a) in [(Gate::ModifiedCz, 2), (Gate::Cnot, 3)] {
            let u = ideal_unitary(GateSpec::new(gate, n_a, Variant::Direct));
            let tensor = ProcessTensor::from_unitary(&u);
            let f = process_fidelity(&tensor, &u);
            assert!((f - 1.0).abs() < 1e-12);
            let report = FidelityReport::from_tensor(&tensor, &u).unwrap();
            assert!((report.classical_computational.unwrap() - 1.0).abs() < 1e-12);
            assert!((report.classical_complementary.unwrap() - 1.0).abs() < 1e-12);
            report.validate(1e-12).unwrap();
        }
    }

    #[test]
    fn unitary_overlap_matches_trace_formula() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let u = random_unitary(4, &mut rng);
            let v = random_unitary(4, &mut rng);
            let tensor = ProcessTensor::from_unitary(&v);
            let f = process_fidelity(&tensor, &u);
            let mut tr = ZERO;
            for i in 0..4 {
                for j in 0..4 {
                    tr += u[[j, i]].conj() * v[[j, i]];
                }
            }
            let want = tr.norm_sqr() / 16.0;
            assert!((f - want).abs() < 1e-11, "{f} vs {want}");
        }
    }

    #[test]
    fn global_phase_is_invisible() {
        let u = ideal_unitary(GateSpec::new(Gate::Cnot, 2, Variant::Direct));
        let phased = u.mapv(|z| z * C64::from_polar(1.0, 0.77));
        let a = ProcessTensor::from_unitary(&u);
        let b = ProcessTensor::from_unitary(&phased);
        for m in 0..4 {
            for n in 0..4 {
                assert!(max_abs_diff(a.unit(m, n), b.unit(m, n)) < 1e-12);
            }
        }
    }

    #[test]
    fn depolarizing_reference_values() {
        let u = ideal_unitary(GateSpec::new(Gate::ModifiedCz, 1, Variant::Direct));
        let tensor = ProcessTensor::depolarizing();
        let f_pro = process_fidelity(&tensor, &u);
        assert!((f_pro - 1.0 / 16.0).abs() < 1e-12);
        assert!((average_fidelity(f_pro) - 0.25).abs() < 1e-12);
        let f_cl = classical_fidelity(&tensor, &u, &computational_basis()).unwrap();
        assert!((f_cl - 0.25).abs() < 1e-12);
    }

    #[test]
    fn complementary_basis_is_unbiased() {
        let comp = computational_basis();
        let compl = complementary_basis(&comp).unwrap();
        for phi in &compl {
            for psi in &comp {
                let ov: C64 = phi.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
                assert!((ov.norm_sqr() - 0.25).abs() < 1e-12);
            }
        }
        // and it is itself orthonormal
        check_orthonormal(&compl).unwrap();
    }

    #[test]
    fn skewed_basis_is_rejected() {
        let mut basis = computational_basis();
        basis[1][0] = C64::new(0.1, 0.0);
        let err = complementary_basis(&basis);
        assert!(matches!(err, Err(Error::NonOrthonormalBasis(_))));
    }

    #[test]
    fn two_sided_estimate_brackets_mixed_unitary_maps() {
        use rand::SeedableRng;
        let u = ideal_unitary(GateSpec::new(Gate::ModifiedCz, 2, Variant::Direct));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            // convex mix of conjugations: completely positive, trace preserving
            let v = random_unitary(4, &mut rng);
            let a = ProcessTensor::from_unitary(&u);
            let b = ProcessTensor::from_unitary(&v);
            let mut upper = Vec::new();
            for m in 0..4 {
                for n in m..4 {
                    let mix = a.unit(m, n).mapv(|z| z * 0.85)
                        + b.unit(m, n).mapv(|z| z * 0.15);
                    upper.push(mix);
                }
            }
            let mixed = ProcessTensor::from_upper_units(upper).unwrap();
            let report = FidelityReport::from_tensor(&mixed, &u).unwrap();
            let f = report.f_pro.unwrap();
            assert!(report.f_lower <= f + 1e-12);
            assert!(f <= report.f_upper + 1e-12);
        }
    }

    #[test]
    fn average_fidelity_matches_haar_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let u = ideal_unitary(GateSpec::new(Gate::Cnot, 2, Variant::Direct));
        let v = random_unitary(4, &mut rng);
        let tensor = ProcessTensor::from_unitary(&v);
        let f_avg = average_fidelity(process_fidelity(&tensor, &u));
        // Haar samples via normalized complex gaussians
        let gauss = |rng: &mut rand_chacha::ChaCha8Rng| {
            let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-12), rng.random());
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let n = 400;
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let mut psi: Vec<C64> = (0..4)
                .map(|_| C64::new(gauss(&mut rng), gauss(&mut rng)))
                .collect();
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut psi {
                *z /= norm;
            }
            let mut probe = Array2::zeros((4, 4));
            for i in 0..4 {
                for j in 0..4 {
                    probe[[i, j]] = psi[i] * psi[j].conj();
                }
            }
            let image = tensor.apply(&probe);
            let out: Vec<C64> = (0..4)
                .map(|i| (0..4).map(|j| u[[i, j]] * psi[j]).sum())
                .collect();
            let mut f = ZERO;
            for i in 0..4 {
                for j in 0..4 {
                    f += out[i].conj() * image[[i, j]] * out[j];
                }
            }
            vals.push(f.re);
        }
        let mean: f64 = vals.iter().sum::<f64>() / n as f64;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - f_avg).abs() < 3.0 * se.max(1e-3),
            "sampled {mean} vs formula {f_avg} (se {se})"
        );
    }
}

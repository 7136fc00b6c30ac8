//! Closed-form error model and parameter extraction.
//!
//! Two numbers summarize a gate's error budget: a coherent leakage
//! coefficient alpha scaling as (U/Omega)^-2, and an effective pulse time
//! t_eff that converts decay rates into fidelity loss through the time spent
//! in radiating levels. Both come out of least-squares fits over sweep
//! records; the resulting model predicts fidelities and the crossover against
//! a nearest-neighbour CNOT ladder without further simulation.

use crate::error::{Error, Result};
use crate::protocol::{Gate, Variant};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which engine produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Dense,
    Mcwf,
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Solver::Dense => "dense",
            Solver::Mcwf => "mcwf",
        })
    }
}

/// One simulation result in a sweep. Dense runs carry the process fidelity;
/// stochastic runs carry the sampled two-sided estimate instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub gate: Gate,
    pub variant: Variant,
    #[serde(rename = "n_A")]
    pub n_a: usize,
    pub u_over_omega: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    #[serde(rename = "gammaA")]
    pub gamma_a: f64,
    pub solver: Solver,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub f_pro: Option<f64>,
    pub f_lower: Option<f64>,
    pub f_upper: Option<f64>,
    pub stderr_lower: Option<f64>,
    pub stderr_upper: Option<f64>,
    pub wall_time_s: f64,
}

impl SweepRecord {
    /// Total decay rate out of the qubit Rydberg level.
    pub fn gamma_q(&self) -> f64 {
        self.gamma0 + self.gamma1
    }

    /// A record holds either a process fidelity or a sampled bracket, never
    /// both and never neither.
    pub fn validate(&self) -> Result<()> {
        let dense_like = self.f_pro.is_some();
        let sampled = self.f_lower.is_some()
            && self.f_upper.is_some()
            && self.stderr_lower.is_some()
            && self.stderr_upper.is_some();
        match (dense_like, sampled) {
            (true, false) | (false, true) => Ok(()),
            _ => Err(Error::InvalidArgument(
                "record must carry exactly one of process fidelity or sampled bounds".into(),
            )),
        }
    }
}

/// Outcome of a one-parameter least-squares fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub parameter: String,
    pub value: f64,
    /// One-sigma half width from the residual spread.
    pub half_width: f64,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub n_records: usize,
    /// Slope of log(1 - F) against log(U/Omega), when well defined.
    pub loglog_slope: Option<f64>,
}

fn require_f_pro(records: &[SweepRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            r.f_pro.ok_or_else(|| {
                Error::InvalidArgument(
                    "fits need deterministic process fidelities, found a sampled record".into(),
                )
            })
        })
        .collect()
}

/// Coherent-error coefficient from decay-free records at fixed gate and
/// chain length: regression of 1 - F through the origin against
/// (U/Omega)^-2.
pub fn fit_alpha(records: &[SweepRecord]) -> Result<FitResult> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records supplied".into()));
    }
    let first = &records[0];
    if records
        .iter()
        .any(|r| r.gate != first.gate || r.n_a != first.n_a || r.variant != first.variant)
    {
        return Err(Error::InvalidArgument(
            "leakage fits must not mix gates, variants or chain lengths".into(),
        ));
    }
    if records
        .iter()
        .any(|r| r.gamma0 != 0.0 || r.gamma1 != 0.0 || r.gamma_a != 0.0)
    {
        return Err(Error::InvalidArgument(
            "leakage fits require decay-free records".into(),
        ));
    }
    let mut us: Vec<f64> = records.iter().map(|r| r.u_over_omega).collect();
    us.sort_by(f64::total_cmp);
    us.dedup();
    if us.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 distinct blockade strengths, got {}",
            us.len()
        )));
    }
    let f = require_f_pro(records)?;
    let x: Vec<f64> = records.iter().map(|r| r.u_over_omega.powi(-2)).collect();
    let y: Vec<f64> = f.iter().map(|v| 1.0 - v).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit(
            "blockade strengths give no spread in the regressor".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let alpha = sxy / sxx;
    let n = records.len();
    let res: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - alpha * a).collect();
    let sse: f64 = res.iter().map(|r| r * r).sum();
    let half_width = if n > 1 {
        (sse / (n - 1) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    // power-law check on the same data
    let loglog_slope = if y.iter().all(|&v| v > 0.0) {
        let lx: Vec<f64> = records.iter().map(|r| r.u_over_omega.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let mx = lx.iter().sum::<f64>() / n as f64;
        let my = ly.iter().sum::<f64>() / n as f64;
        let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        if var > 0.0 {
            Some(cov / var)
        } else {
            None
        }
    } else {
        None
    };
    Ok(FitResult {
        parameter: "alpha".into(),
        value: alpha,
        half_width,
        residual_rms: (sse / n as f64).sqrt(),
        residual_max: res.iter().fold(0.0, |a, r| a.max(r.abs())),
        n_records: n,
        loglog_slope,
    })
}

/// Radiating time of the qubit atoms over the whole protocol, in units of
/// 1/Omega, as a function of the effective pi-pulse time.
fn qubit_time(gate: Gate, t_eff: f64) -> f64 {
    match gate {
        Gate::ModifiedCz => (2.0 * PI + 6.0 * t_eff) / 2.0,
        Gate::Cnot => (2.0 * PI + 7.0 * t_eff) / 2.0,
    }
}

/// Radiating time summed over the ancilla chain.
fn ancilla_time(gate: Gate, n_a: usize, t_eff: f64) -> f64 {
    let n = n_a as f64;
    match gate {
        Gate::ModifiedCz => (4.0 * PI * n + (4.0 * n - 2.0) * t_eff) / 2.0,
        Gate::Cnot => (4.0 * PI * n + PI + (4.0 * n - 2.0) * t_eff) / 2.0,
    }
}

/// Model fidelity: coherent leakage times exponential decay loss.
pub fn predict_fidelity(
    gate: Gate,
    n_a: usize,
    gamma_q: f64,
    gamma_a: f64,
    u_over_omega: f64,
    t_eff: f64,
    alpha: f64,
) -> Result<f64> {
    if n_a == 0 {
        return Err(Error::OutOfModel(
            "the error model needs at least one relay atom".into(),
        ));
    }
    if u_over_omega <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "blockade ratio must be positive, got {u_over_omega}"
        )));
    }
    let coherent = 1.0 - alpha / (u_over_omega * u_over_omega);
    let decay =
        (-gamma_q * qubit_time(gate, t_eff) - gamma_a * ancilla_time(gate, n_a, t_eff)).exp();
    Ok(coherent * decay)
}

/// Effective pi-pulse time from dissipative sweep records of one gate, by a
/// one-parameter least-squares fit of the model. `alpha` supplies the
/// coherent coefficient per chain length.
pub fn fit_teff<F: Fn(usize) -> f64>(
    records: &[SweepRecord],
    gate: Gate,
    alpha: F,
) -> Result<FitResult> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records supplied".into()));
    }
    if records.iter().any(|r| r.gate != gate) {
        return Err(Error::InvalidArgument(
            "records mix gates; fit one gate at a time".into(),
        ));
    }
    if records.iter().any(|r| r.n_a == 0) {
        return Err(Error::OutOfModel(
            "the error model needs at least one relay atom".into(),
        ));
    }
    let mut rates: Vec<(f64, f64)> = records.iter().map(|r| (r.gamma_q(), r.gamma_a)).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rates.dedup();
    if rates.len() < 2 {
        return Err(Error::DegenerateFit(
            "a single decay setting cannot pin the effective time".into(),
        ));
    }
    let f = require_f_pro(records)?;
    let n = records.len();
    let sse = |t: f64| -> f64 {
        records
            .iter()
            .zip(&f)
            .map(|(r, &fv)| {
                let m = predict_fidelity(
                    gate,
                    r.n_a,
                    r.gamma_q(),
                    r.gamma_a,
                    r.u_over_omega,
                    t,
                    alpha(r.n_a),
                )
                .expect("validated above");
                (fv - m) * (fv - m)
            })
            .sum()
    };
    // coarse scan to bracket the minimum, then golden-section refinement
    let grid = 128usize;
    let mut best_k = 0usize;
    let mut best = f64::INFINITY;
    for k in 0..=grid {
        let t = PI * k as f64 / grid as f64;
        let v = sse(t);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let mut a = PI * best_k.saturating_sub(1) as f64 / grid as f64;
    let mut b = PI * (best_k + 1).min(grid) as f64 / grid as f64;
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    while b - a > 1e-8 * PI {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = sse(d);
        }
    }
    let t_star = 0.5 * (a + b);
    let sse_star = sse(t_star);
    let res: Vec<f64> = records
        .iter()
        .zip(&f)
        .map(|(r, &fv)| {
            fv - predict_fidelity(
                gate,
                r.n_a,
                r.gamma_q(),
                r.gamma_a,
                r.u_over_omega,
                t_star,
                alpha(r.n_a),
            )
            .expect("validated above")
        })
        .collect();
    // curvature-based one-sigma width
    let eps = 1e-4;
    let mut grad2 = 0.0;
    for r in records {
        let at = |t: f64| {
            predict_fidelity(
                gate,
                r.n_a,
                r.gamma_q(),
                r.gamma_a,
                r.u_over_omega,
                t,
                alpha(r.n_a),
            )
            .expect("validated above")
        };
        let g = (at(t_star + eps) - at(t_star - eps)) / (2.0 * eps);
        grad2 += g * g;
    }
    let sigma2 = if n > 1 { sse_star / (n - 1) as f64 } else { 0.0 };
    let half_width = if grad2 > 0.0 {
        (sigma2 / grad2).sqrt() / PI
    } else {
        0.0
    };
    Ok(FitResult {
        parameter: "t_eff_over_pi".into(),
        value: t_star / PI,
        half_width,
        residual_rms: (sse_star / n as f64).sqrt(),
        residual_max: res.iter().fold(0.0, |m, r| m.max(r.abs())),
        n_records: n,
        loglog_slope: None,
    })
}

/// Fidelity ratio of the relayed CNOT over a nearest-neighbour CNOT ladder
/// covering the same separation, in the decay-dominated regime with a
/// uniform rate gamma on every atom. The advantage grows with distance.
pub fn gain_ratio(n_a: usize, gamma: f64, t_eff: f64) -> f64 {
    let n = n_a as f64;
    let exponent = 8.0 * n * (PI + 2.0 * t_eff) - 5.0 * (3.0 * PI + 5.0 * t_eff);
    (exponent / 2.0 * gamma).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_record(
        gate: Gate,
        n_a: usize,
        u: f64,
        gamma_q: f64,
        gamma_a: f64,
        f_pro: f64,
    ) -> SweepRecord {
        SweepRecord {
            gate,
            variant: Variant::Direct,
            n_a,
            u_over_omega: u,
            gamma0: gamma_q / 2.0,
            gamma1: gamma_q / 2.0,
            gamma_a,
            solver: Solver::Dense,
            n_traj: None,
            seed: None,
            f_pro: Some(f_pro),
            f_lower: None,
            f_upper: None,
            stderr_lower: None,
            stderr_upper: None,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn leakage_coefficient_recovers_exactly() {
        let alpha = 0.5;
        let records: Vec<SweepRecord> = [50.0, 100.0, 150.0, 200.0, 400.0]
            .into_iter()
            .map(|u| dense_record(Gate::ModifiedCz, 2, u, 0.0, 0.0, 1.0 - alpha / (u * u)))
            .collect();
        let fit = fit_alpha(&records).unwrap();
        assert!((fit.value - alpha).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-12);
        let slope = fit.loglog_slope.unwrap();
        assert!((slope + 2.0).abs() < 1e-6, "slope {slope}");
    }

    #[test]
    fn leakage_fit_preconditions() {
        let alpha = 0.4;
        let mk = |u: f64| dense_record(Gate::Cnot, 3, u, 0.0, 0.0, 1.0 - alpha / (u * u));
        // too few distinct blockade values
        let few: Vec<_> = [50.0, 100.0, 100.0, 150.0].into_iter().map(mk).collect();
        assert!(matches!(
            fit_alpha(&few),
            Err(Error::InsufficientData(_))
        ));
        // decaying records are out
        let mut bad: Vec<_> = [50.0, 100.0, 150.0, 200.0].into_iter().map(mk).collect();
        bad[1].gamma_a = 1e-4;
        assert!(fit_alpha(&bad).is_err());
        // mixed chain lengths are out
        let mut mixed: Vec<_> = [50.0, 100.0, 150.0, 200.0].into_iter().map(mk).collect();
        mixed[2].n_a = 2;
        assert!(fit_alpha(&mixed).is_err());
    }

    #[test]
    fn effective_time_recovers_exactly() {
        let t_true = 0.375 * PI;
        let mut records = Vec::new();
        for n_a in [1usize, 2, 3, 4] {
            for g in [4e-5, 32e-5, 128e-5, 512e-5] {
                for (gq, ga) in [(g, 0.0), (0.0, g), (g, g)] {
                    let f =
                        predict_fidelity(Gate::ModifiedCz, n_a, gq, ga, 200.0, t_true, 0.0)
                            .unwrap();
                    records.push(dense_record(Gate::ModifiedCz, n_a, 200.0, gq, ga, f));
                }
            }
        }
        let fit = fit_teff(&records, Gate::ModifiedCz, |_| 0.0).unwrap();
        assert!(
            (fit.value - 0.375).abs() < 1e-6,
            "recovered {} instead of 0.375",
            fit.value
        );
        assert!(fit.residual_max < 1e-9);
    }

    #[test]
    fn effective_time_fit_preconditions() {
        let t = 0.4 * PI;
        let f = predict_fidelity(Gate::Cnot, 2, 1e-4, 1e-4, 200.0, t, 0.0).unwrap();
        let rec = dense_record(Gate::Cnot, 2, 200.0, 1e-4, 1e-4, f);
        // single decay setting
        assert!(matches!(
            fit_teff(&[rec.clone(), rec.clone()], Gate::Cnot, |_| 0.0),
            Err(Error::DegenerateFit(_))
        ));
        // wrong gate label
        assert!(fit_teff(&[rec.clone()], Gate::ModifiedCz, |_| 0.0).is_err());
        // chain length zero is outside the model
        let mut zero = rec.clone();
        zero.n_a = 0;
        assert!(matches!(
            fit_teff(&[zero], Gate::Cnot, |_| 0.0),
            Err(Error::OutOfModel(_))
        ));
        assert!(matches!(
            fit_teff(&[], Gate::Cnot, |_| 0.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn prediction_matches_hand_values() {
        // pure qubit decay on the longer chain
        let f = predict_fidelity(Gate::ModifiedCz, 2, 128e-5, 0.0, 200.0, 0.4 * PI, 0.0).unwrap();
        let want = (-128e-5 * 2.2 * PI).exp();
        assert!((f - want).abs() < 1e-12);
        assert!((f - 0.9912).abs() < 2e-4);
        // ancilla-only decay separates the two gates by a half pi pulse
        let cz = predict_fidelity(Gate::ModifiedCz, 3, 0.0, 2e-3, 100.0, 0.3 * PI, 0.0).unwrap();
        let cnot = predict_fidelity(Gate::Cnot, 3, 0.0, 2e-3, 100.0, 0.3 * PI, 0.0).unwrap();
        let want_ratio = (-2e-3 * PI / 2.0).exp();
        assert!(((cnot / cz) - want_ratio).abs() < 1e-12);
        // no relay chain, no model
        assert!(matches!(
            predict_fidelity(Gate::ModifiedCz, 0, 1e-4, 0.0, 200.0, 0.4 * PI, 0.0),
            Err(Error::OutOfModel(_))
        ));
    }

    #[test]
    fn gain_reference_values() {
        assert!((gain_ratio(2, 0.0, 0.379 * PI) - 1.0).abs() < 1e-15);
        let g = gain_ratio(2, 1e-3, 0.379 * PI);
        assert!(
            (g - 1.005755).abs() < 1e-5,
            "two-ancilla gain at 1e-3 is {g}"
        );
        // the advantage grows with separation and with the decay rate
        assert!(gain_ratio(3, 1e-3, 0.379 * PI) > g);
        assert!(gain_ratio(2, 2e-3, 0.379 * PI) > g);
    }

    #[test]
    fn record_serde_and_invariant() {
        let rec = dense_record(Gate::ModifiedCz, 2, 200.0, 1e-4, 0.0, 0.99);
        rec.validate().unwrap();
        let js = serde_json::to_string(&rec).unwrap();
        assert!(js.contains("\"n_A\":2"));
        assert!(js.contains("\"gammaA\":0.0"));
        assert!(js.contains("\"gate\":\"modified_cz\""));
        let back: SweepRecord = serde_json::from_str(&js).unwrap();
        assert_eq!(back.n_a, 2);
        assert_eq!(back.f_pro, rec.f_pro);
        // both kinds of payload at once is malformed
        let mut bad = rec.clone();
        bad.f_lower = Some(0.9);
        bad.f_upper = Some(0.95);
        bad.stderr_lower = Some(1e-3);
        bad.stderr_upper = Some(1e-3);
        assert!(bad.validate().is_err());
        // neither is malformed too
        let mut none = rec;
        none.f_pro = None;
        assert!(none.validate().is_err());
    }
}

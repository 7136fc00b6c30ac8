//! Executes resolved run points against the core solvers and assembles the
//! records and reports that go to disk.

use crate::config::{resolved_cap, validate_point, RunPoint};
use anyhow::{Context, Result};
use rayon::prelude::*;
use rydhop_core::analysis::{Solver, SweepRecord};
use rydhop_core::dense::{propagate_process, LindbladModel, PropagationSettings};
use rydhop_core::fidelity::{complementary_basis, computational_basis, FidelityReport};
use rydhop_core::mcwf::classical_fidelity_mc;
use rydhop_core::protocol::{compile_gate, ideal_unitary, GateSpec};
use rydhop_core::register::{build_register, CouplingMap, DecayRates};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

pub struct RunOutcome {
    pub record: SweepRecord,
    pub report: FidelityReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Silent,
    /// One dot per finished point, for long verification grids.
    Dots,
    /// One summary line per finished point.
    Lines,
}

pub fn execute(point: &RunPoint) -> Result<RunOutcome> {
    validate_point(point)?;
    let spec = match point.variant {
        Some(v) => GateSpec::new(point.gate, point.n_ancillas, v),
        None => GateSpec::preferred(point.gate, point.n_ancillas),
    };
    let t0 = Instant::now();
    let seq = compile_gate(spec).context("cannot compile the requested gate")?;
    let topology = spec.topology();
    let couplings = match point.u_nnn {
        Some(w) => CouplingMap::chain_with_next_nearest(topology, point.u_over_omega, w),
        None => CouplingMap::chain(topology, point.u_over_omega),
    };
    let register = build_register(topology, couplings)?;
    let rates = DecayRates {
        gamma0: point.gamma0,
        gamma1: point.gamma1,
        gamma_a: point.gamma_a,
    };
    let model = LindbladModel::new(&register, rates, resolved_cap(point))?;
    let ideal = ideal_unitary(spec);

    let report = match point.solver {
        Solver::Dense => {
            let tensor = propagate_process(&seq, &model, &PropagationSettings::default())?;
            FidelityReport::from_tensor(&tensor, &ideal)?
        }
        Solver::Mcwf => {
            let n_traj = point.n_traj.expect("validated");
            let seed = point.seed.expect("validated");
            let comp = computational_basis();
            let compl = complementary_basis(&comp)?;
            let a = classical_fidelity_mc(&seq, &model, &ideal, &comp, n_traj, seed)?;
            // trajectory streams are keyed by (seed, probe, index); shifting
            // the seed keeps the two probe bases statistically independent
            let b =
                classical_fidelity_mc(&seq, &model, &ideal, &compl, n_traj, seed.wrapping_add(1))?;
            FidelityReport::from_classical(a.mean, a.stderr, b.mean, b.stderr)
        }
    };
    let wall_time_s = t0.elapsed().as_secs_f64();

    let sampled = point.solver == Solver::Mcwf;
    let record = SweepRecord {
        gate: spec.gate,
        variant: spec.variant,
        n_a: spec.n_ancillas,
        u_over_omega: point.u_over_omega,
        gamma0: point.gamma0,
        gamma1: point.gamma1,
        gamma_a: point.gamma_a,
        solver: point.solver,
        n_traj: point.n_traj,
        seed: if sampled { point.seed } else { None },
        f_pro: if sampled { None } else { report.f_pro },
        f_lower: sampled.then_some(report.f_lower),
        f_upper: sampled.then_some(report.f_upper),
        stderr_lower: if sampled { report.stderr_lower } else { None },
        stderr_upper: if sampled { report.stderr_upper } else { None },
        wall_time_s,
    };
    record.validate()?;
    Ok(RunOutcome { record, report })
}

/// Runs every point, grid points in parallel, preserving input order in the
/// result.
pub fn execute_all(points: &[RunPoint], progress: Progress) -> Result<Vec<RunOutcome>> {
    let done = AtomicUsize::new(0);
    let total = points.len();
    points
        .par_iter()
        .map(|p| {
            let out = execute(p);
            let k = done.fetch_add(1, Ordering::Relaxed) + 1;
            match progress {
                Progress::Silent => {}
                Progress::Dots => {
                    eprint!(".");
                    let _ = std::io::stderr().flush();
                    if k == total {
                        eprintln!();
                    }
                }
                Progress::Lines => {
                    if let Ok(o) = &out {
                        eprintln!("[{k}/{total}] {}", summary(o));
                    }
                }
            }
            out
        })
        .collect()
}

pub fn summary(o: &RunOutcome) -> String {
    let r = &o.record;
    let head = format!(
        "{} {} n_A={} U={} g=({:.1e},{:.1e},{:.1e})",
        r.gate, r.variant, r.n_a, r.u_over_omega, r.gamma0, r.gamma1, r.gamma_a
    );
    match r.f_pro {
        Some(f) => format!("{head} F_pro={f:.6} [{:.1}s]", r.wall_time_s),
        None => format!(
            "{head} F_pro in [{:.6}, {:.6}] (se {:.1e}/{:.1e}, {} traj) [{:.1}s]",
            r.f_lower.unwrap_or(f64::NAN),
            r.f_upper.unwrap_or(f64::NAN),
            r.stderr_lower.unwrap_or(f64::NAN),
            r.stderr_upper.unwrap_or(f64::NAN),
            r.n_traj.unwrap_or(0),
            r.wall_time_s
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rydhop_core::protocol::Gate;

    fn point() -> RunPoint {
        RunPoint {
            gate: Gate::ModifiedCz,
            variant: None,
            n_ancillas: 1,
            u_over_omega: 200.0,
            u_nnn: None,
            gamma0: 0.0,
            gamma1: 0.0,
            gamma_a: 0.0,
            solver: Solver::Dense,
            n_traj: None,
            seed: None,
            max_excitation: None,
            force_dense: false,
        }
    }

    #[test]
    fn decay_free_dense_point_is_near_ideal() {
        let out = execute(&point()).unwrap();
        out.record.validate().unwrap();
        let f = out.record.f_pro.unwrap();
        assert!(f > 0.999, "F_pro = {f}");
        assert!(out.record.seed.is_none());
        assert_eq!(out.record.variant.to_string(), "sigma_x_wrapped");
    }

    #[test]
    fn stochastic_point_records_its_sampling_setup() {
        let mut p = point();
        p.n_ancillas = 0;
        p.solver = Solver::Mcwf;
        p.n_traj = Some(2);
        p.seed = Some(11);
        let out = execute(&p).unwrap();
        out.record.validate().unwrap();
        assert_eq!(out.record.seed, Some(11));
        assert_eq!(out.record.n_traj, Some(2));
        // no decay: classical probes are exact regardless of trajectory count
        assert!(out.record.f_upper.unwrap() > 0.999);
    }

    #[test]
    fn config_rules_stop_bad_points_before_any_physics() {
        let mut p = point();
        p.n_traj = Some(10);
        assert!(execute(&p).is_err());
        p.n_traj = None;
        p.u_over_omega = 0.0;
        assert!(execute(&p).is_err());
    }
}

//! Run configuration: one JSON document in which any scalar field may be
//! replaced by a list. Lists act as sweep axes and expand to the Cartesian
//! product of runs, in declaration order.

use anyhow::{bail, Result};
use rydhop_core::analysis::Solver;
use rydhop_core::protocol::{Gate, Variant};
use serde::{Deserialize, Serialize};

/// A scalar or a list of scalars.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Axis<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Axis::One(v) => vec![v.clone()],
            Axis::Many(v) => v.clone(),
        }
    }
}

fn axis_zero() -> Axis<f64> {
    Axis::One(0.0)
}

fn axis_u() -> Axis<f64> {
    Axis::One(200.0)
}

fn axis_dense() -> Axis<Solver> {
    Axis::One(Solver::Dense)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gate: Axis<Gate>,
    /// Omitted: the preferred variant for each (gate, chain length).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Axis<Variant>>,
    pub n_ancillas: Axis<usize>,
    #[serde(default = "axis_u")]
    pub u_over_omega: Axis<f64>,
    /// Next-nearest-neighbour blockade shift. Omitted: nearest-neighbour
    /// couplings only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_nnn: Option<Axis<f64>>,
    #[serde(default = "axis_zero")]
    pub gamma0: Axis<f64>,
    #[serde(default = "axis_zero")]
    pub gamma1: Axis<f64>,
    #[serde(default = "axis_zero", rename = "gammaA")]
    pub gamma_a: Axis<f64>,
    #[serde(default = "axis_dense")]
    pub solver: Axis<Solver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<Axis<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Axis<u64>>,
    /// Cap on simultaneous Rydberg excitations for the dense solver.
    /// Omitted: full space up to two ancillas, a cap of 2 beyond (see
    /// [`resolved_cap`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_excitation: Option<Axis<u32>>,
    /// Allow dense runs on chains longer than five ancillas.
    #[serde(default)]
    pub force_dense: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// One fully resolved grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunPoint {
    pub gate: Gate,
    pub variant: Option<Variant>,
    pub n_ancillas: usize,
    pub u_over_omega: f64,
    pub u_nnn: Option<f64>,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma_a: f64,
    pub solver: Solver,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub max_excitation: Option<u32>,
    pub force_dense: bool,
}

fn opt_values<T: Clone>(axis: &Option<Axis<T>>) -> Vec<Option<T>> {
    match axis {
        None => vec![None],
        Some(ax) => ax.values().into_iter().map(Some).collect(),
    }
}

impl RunConfig {
    pub fn expand(&self) -> Vec<RunPoint> {
        let mut points = Vec::new();
        for gate in self.gate.values() {
            for variant in opt_values(&self.variant) {
                for n_ancillas in self.n_ancillas.values() {
                    for u_over_omega in self.u_over_omega.values() {
                        for u_nnn in opt_values(&self.u_nnn) {
                            for gamma0 in self.gamma0.values() {
                                for gamma1 in self.gamma1.values() {
                                    for gamma_a in self.gamma_a.values() {
                                        for solver in self.solver.values() {
                                            for n_traj in opt_values(&self.n_traj) {
                                                for seed in opt_values(&self.seed) {
                                                    for max_excitation in
                                                        opt_values(&self.max_excitation)
                                                    {
                                                        points.push(RunPoint {
                                                            gate,
                                                            variant,
                                                            n_ancillas,
                                                            u_over_omega,
                                                            u_nnn,
                                                            gamma0,
                                                            gamma1,
                                                            gamma_a,
                                                            solver,
                                                            n_traj,
                                                            seed,
                                                            max_excitation,
                                                            force_dense: self.force_dense,
                                                        });
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        points
    }
}

/// Config-level rules: what a point must look like before any physics runs.
pub fn validate_point(p: &RunPoint) -> Result<()> {
    if !(p.u_over_omega > 0.0) {
        bail!("u_over_omega must be positive, got {}", p.u_over_omega);
    }
    if p.gamma0 < 0.0 || p.gamma1 < 0.0 || p.gamma_a < 0.0 {
        bail!("decay rates must be nonnegative");
    }
    match p.solver {
        Solver::Mcwf => {
            match p.n_traj {
                Some(n) if n >= 2 => {}
                Some(n) => bail!("mcwf needs at least 2 trajectories per probe, got {n}"),
                None => bail!("mcwf runs need n_traj"),
            }
            if p.seed.is_none() {
                bail!("mcwf runs need a seed");
            }
        }
        Solver::Dense => {
            if p.n_traj.is_some() {
                bail!("dense runs take no trajectory count");
            }
            if p.n_ancillas > 5 && !p.force_dense {
                bail!(
                    "dense solving with {} ancillas is refused (switch to mcwf, \
                     or set force_dense and expect long runs)",
                    p.n_ancillas
                );
            }
        }
    }
    Ok(())
}

/// Excitation cap actually used for a point. The protocols keep at most one
/// atom excited up to blocked-drive leakage of order (1/2U)^2, so the
/// two-excitation shell already contains the leading correction; dropping
/// three and more shifts coding-block fidelities at the 1e-6 level while
/// cutting the dense dimension roughly in half on longer chains.
pub fn resolved_cap(p: &RunPoint) -> Option<u32> {
    if p.max_excitation.is_some() {
        return p.max_excitation;
    }
    let dissipative = p.gamma0 > 0.0 || p.gamma1 > 0.0 || p.gamma_a > 0.0;
    if p.solver == Solver::Dense && dissipative && p.n_ancillas >= 3 {
        Some(2)
    } else {
        None
    }
}

/// Decay grid of the dissipation figures, total rate in units of Omega.
pub const DECAY_GRID: [f64; 4] = [4e-5, 32e-5, 128e-5, 512e-5];

/// Decay grid of the ladder comparison.
pub const COMPARE_GRID: [f64; 4] = [1e-4, 5e-4, 1e-3, 5e-3];

/// The three rate splittings of a total decay rate used throughout:
/// qubits only, ancillas only, and the same total on both.
pub fn splittings(total: f64) -> [(f64, f64, f64); 3] {
    [
        (0.5 * total, 0.5 * total, 0.0),
        (0.0, 0.0, total),
        (0.5 * total, 0.5 * total, total),
    ]
}

pub const PRESETS: [&str; 5] = [
    "fig-cz-dissipation",
    "fig-cnot-dissipation",
    "fig-blockade-scan",
    "fig-nn-compare",
    "fig-gain",
];

fn scalar_config(gate: Gate) -> RunConfig {
    RunConfig {
        gate: Axis::One(gate),
        variant: None,
        n_ancillas: Axis::One(0),
        u_over_omega: axis_u(),
        u_nnn: None,
        gamma0: axis_zero(),
        gamma1: axis_zero(),
        gamma_a: axis_zero(),
        solver: axis_dense(),
        n_traj: None,
        seed: None,
        max_excitation: None,
        force_dense: false,
        output: None,
    }
}

fn dissipation_grid(gate: Gate, output: &str) -> Vec<RunConfig> {
    let mut configs = Vec::new();
    for &total in &DECAY_GRID {
        for (g0, g1, ga) in splittings(total) {
            configs.push(RunConfig {
                n_ancillas: Axis::Many((0..=5).collect()),
                gamma0: Axis::One(g0),
                gamma1: Axis::One(g1),
                gamma_a: Axis::One(ga),
                output: Some(output.into()),
                ..scalar_config(gate)
            });
        }
    }
    configs
}

/// Sweep presets. The two ladder-comparison figures are produced by the
/// comparison runner, not by a sweep config.
pub fn sweep_preset(name: &str) -> Option<Vec<RunConfig>> {
    match name {
        "fig-cz-dissipation" => Some(dissipation_grid(Gate::ModifiedCz, "fig-cz-dissipation.csv")),
        "fig-cnot-dissipation" => Some(dissipation_grid(Gate::Cnot, "fig-cnot-dissipation.csv")),
        "fig-blockade-scan" => Some(vec![RunConfig {
            gate: Axis::Many(vec![Gate::ModifiedCz, Gate::Cnot]),
            n_ancillas: Axis::Many((0..=4).collect()),
            u_over_omega: Axis::Many(vec![25.0, 50.0, 100.0, 200.0]),
            output: Some("fig-blockade-scan.csv".into()),
            ..scalar_config(Gate::ModifiedCz)
        }]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_axes_give_a_single_point() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"gate": "cnot", "n_ancillas": 2, "gamma0": 1e-4}"#,
        )
        .unwrap();
        let points = cfg.expand();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].gate, Gate::Cnot);
        assert_eq!(points[0].u_over_omega, 200.0);
        assert_eq!(points[0].gamma0, 1e-4);
        assert_eq!(points[0].gamma1, 0.0);
        assert!(points[0].variant.is_none());
        validate_point(&points[0]).unwrap();
    }

    #[test]
    fn lists_expand_to_the_cartesian_product() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"gate": ["modified_cz", "cnot"], "n_ancillas": [0, 1, 2],
                "u_over_omega": [100.0, 200.0]}"#,
        )
        .unwrap();
        let points = cfg.expand();
        assert_eq!(points.len(), 12);
        // last axis varies fastest
        assert_eq!(points[0].u_over_omega, 100.0);
        assert_eq!(points[1].u_over_omega, 200.0);
        assert_eq!(points[0].n_ancillas, points[1].n_ancillas);
    }

    #[test]
    fn solver_rules_are_enforced() {
        let mut p = scalar_config(Gate::Cnot).expand().pop().unwrap();
        p.solver = Solver::Mcwf;
        assert!(validate_point(&p).is_err());
        p.n_traj = Some(1);
        p.seed = Some(7);
        assert!(validate_point(&p).is_err());
        p.n_traj = Some(100);
        validate_point(&p).unwrap();

        p.solver = Solver::Dense;
        assert!(validate_point(&p).is_err());
        p.n_traj = None;
        p.n_ancillas = 6;
        assert!(validate_point(&p).is_err());
        p.force_dense = true;
        validate_point(&p).unwrap();
    }

    #[test]
    fn cap_policy_kicks_in_on_long_dissipative_chains() {
        let mut p = scalar_config(Gate::Cnot).expand().pop().unwrap();
        p.gamma0 = 1e-4;
        p.n_ancillas = 3;
        assert_eq!(resolved_cap(&p), Some(2));
        p.n_ancillas = 2;
        assert_eq!(resolved_cap(&p), None);
        p.n_ancillas = 4;
        p.gamma0 = 0.0;
        assert_eq!(resolved_cap(&p), None);
        p.max_excitation = Some(3);
        assert_eq!(resolved_cap(&p), Some(3));
    }

    #[test]
    fn presets_expand_to_the_documented_grids() {
        let cz: usize = sweep_preset("fig-cz-dissipation")
            .unwrap()
            .iter()
            .map(|c| c.expand().len())
            .sum();
        assert_eq!(cz, 72);
        let scan: usize = sweep_preset("fig-blockade-scan")
            .unwrap()
            .iter()
            .map(|c| c.expand().len())
            .sum();
        assert_eq!(scan, 40);
        assert!(sweep_preset("fig-nn-compare").is_none());
    }

    #[test]
    fn config_json_round_trips() {
        let cfgs = sweep_preset("fig-cnot-dissipation").unwrap();
        let text = serde_json::to_string(&cfgs[0]).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.expand(), cfgs[0].expand());
    }
}

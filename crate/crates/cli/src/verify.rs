//! The verification suite: ten numbered checks covering truth tables,
//! scaling laws, solver cross-checks and the ladder comparison, each printed
//! as a single pass/fail line with the numbers that decided it.

use crate::compare::{self, GainData};
use crate::config::{splittings, RunPoint, COMPARE_GRID, DECAY_GRID};
use crate::output;
use crate::runner::{self, Progress, RunOutcome};
use anyhow::{anyhow, Result};
use rydhop_core::analysis::{fit_alpha, fit_teff, gain_ratio, Solver, SweepRecord};
use rydhop_core::dense::{max_double_excitation, pi_pulse_survival, LindbladModel, PulseDirection};
use rydhop_core::fidelity::FidelityReport;
use rydhop_core::protocol::{
    compile_gate, compile_nn_sequence, nn_cnot_circuit, Gate, GateSpec, Variant,
};
use rydhop_core::register::{build_register, CouplingMap, DecayRates};
use rydhop_core::C64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub total_seconds: f64,
    pub results: Vec<CriterionResult>,
}

pub fn write_report(path: &Path, report: &VerifyReport) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}

fn line(r: &CriterionResult) -> String {
    format!(
        "criterion {:2} {} ({:6.1}s) {}: {}",
        r.id,
        if r.passed { "PASS" } else { "FAIL" },
        r.seconds,
        r.name,
        r.details
    )
}

fn finish(
    id: usize,
    name: &'static str,
    t0: Instant,
    out: Result<(bool, String)>,
) -> CriterionResult {
    let (passed, details) = match out {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e:#}")),
    };
    let r = CriterionResult {
        id,
        name,
        passed,
        details,
        seconds: t0.elapsed().as_secs_f64(),
    };
    println!("{}", line(&r));
    r
}

fn gate_point(gate: Gate, n_ancillas: usize, u: f64, g: (f64, f64, f64)) -> RunPoint {
    RunPoint {
        gate,
        variant: None,
        n_ancillas,
        u_over_omega: u,
        u_nnn: None,
        gamma0: g.0,
        gamma1: g.1,
        gamma_a: g.2,
        solver: Solver::Dense,
        n_traj: None,
        seed: None,
        max_excitation: None,
        force_dense: false,
    }
}

const GATES: [Gate; 2] = [Gate::ModifiedCz, Gate::Cnot];

/// Runs the whole suite, printing one line per criterion as it completes.
pub fn run_all() -> VerifyReport {
    let t_start = Instant::now();
    let mut results = Vec::new();
    let mut pool: Vec<FidelityReport> = Vec::new();
    // decay-free fidelities at the U = 200 operating point, reused as the
    // coherent prefactor of the dissipation model
    let mut f_clean: HashMap<(Gate, usize), f64> = HashMap::new();
    let mut grid: Vec<RunOutcome> = Vec::new();

    let t = Instant::now();
    results.push(finish(
        1,
        "truth tables at zero decay",
        t,
        truth_tables(&mut pool, &mut f_clean),
    ));

    let t = Instant::now();
    results.push(finish(
        2,
        "inverse-square blockade scaling",
        t,
        blockade_scaling(&mut pool),
    ));

    let t = Instant::now();
    eprintln!("  dissipation grid: 96 dense runs, expect 10-20 min on one core");
    results.push(finish(
        3,
        "one-parameter dissipation law",
        t,
        dissipation_law(&mut pool, &f_clean, &mut grid),
    ));

    let t = Instant::now();
    results.push(finish(4, "two-level pulse-loss constant", t, two_level()));

    let t = Instant::now();
    results.push(finish(
        5,
        "ancilla-decay separation",
        t,
        ancilla_independence(&grid),
    ));

    // the ladder comparison data also feeds the report pool checked next
    eprintln!("  ladder comparison: 16 dense runs, expect 5-10 min");
    let gain = compare::gain_table(&[2, 3], &COMPARE_GRID, 200.0, true);
    if let Ok(g) = &gain {
        pool.extend(g.reports.iter().map(|(_, rep)| rep.clone()));
    }

    let t = Instant::now();
    results.push(finish(
        6,
        "two-sided estimate brackets every dense run",
        t,
        hofmann_sandwich(&pool),
    ));

    let t = Instant::now();
    results.push(finish(
        7,
        "trajectory ensemble against the master equation",
        t,
        mc_consistency(&grid),
    ));

    let t = Instant::now();
    results.push(finish(8, "ladder circuit oracle", t, ladder_oracle()));

    let t = Instant::now();
    results.push(finish(9, "fidelity gain over the ladder", t, gain_claim(&gain)));

    let t = Instant::now();
    results.push(finish(
        10,
        "single-excitation invariant",
        t,
        single_excitation(),
    ));

    VerifyReport {
        passed: results.iter().all(|r| r.passed),
        total_seconds: t_start.elapsed().as_secs_f64(),
        results,
    }
}

/// 1: both gates, chains up to four ancillas, strong blockade, no decay:
/// the compiled sequences realize their ideal unitaries.
fn truth_tables(
    pool: &mut Vec<FidelityReport>,
    f_clean: &mut HashMap<(Gate, usize), f64>,
) -> Result<(bool, String)> {
    let points: Vec<RunPoint> = GATES
        .iter()
        .flat_map(|&g| (0..=4).map(move |n| gate_point(g, n, 200.0, (0.0, 0.0, 0.0))))
        .collect();
    let outs = runner::execute_all(&points, Progress::Silent)?;
    let mut worst = f64::MIN;
    let mut worst_at = String::new();
    for o in &outs {
        let f = o.record.f_pro.expect("dense run");
        f_clean.insert((o.record.gate, o.record.n_a), f);
        let defect = 1.0 - f;
        if defect > worst {
            worst = defect;
            worst_at = format!("{} n_A={}", o.record.gate, o.record.n_a);
        }
        pool.push(o.report.clone());
    }
    Ok((
        worst < 2e-4,
        format!("worst 1-F_pro = {worst:.2e} at {worst_at} (budget 2e-4)"),
    ))
}

fn alpha_band(gate: Gate, n: usize) -> (f64, f64) {
    match (gate, n) {
        (Gate::ModifiedCz, 0) => (0.3, 0.7),
        (Gate::Cnot, 0) => (0.25, 0.55),
        (Gate::ModifiedCz, n) if n % 2 == 0 => (1.2, 2.2),
        (Gate::ModifiedCz, _) => (0.3, 0.7),
        (Gate::Cnot, n) if n % 2 == 0 => (1.4, 2.6),
        (Gate::Cnot, _) => (0.05, 0.2),
    }
}

/// 2: 1 - F_pro falls off as (U/Omega)^-2 with the documented parity-split
/// coefficients.
fn blockade_scaling(pool: &mut Vec<FidelityReport>) -> Result<(bool, String)> {
    let us = [25.0, 50.0, 100.0, 200.0];
    let mut ok = true;
    let mut worst_slope = 0.0f64;
    let mut alphas: HashMap<(Gate, usize), f64> = HashMap::new();
    let mut bad = Vec::new();
    for &gate in &GATES {
        for n in 0..=4usize {
            let points: Vec<RunPoint> = us
                .iter()
                .map(|&u| gate_point(gate, n, u, (0.0, 0.0, 0.0)))
                .collect();
            let outs = runner::execute_all(&points, Progress::Silent)?;
            let records: Vec<SweepRecord> = outs.iter().map(|o| o.record.clone()).collect();
            let fit = fit_alpha(&records)?;
            let slope = fit
                .loglog_slope
                .ok_or_else(|| anyhow!("fit reported no log-log slope"))?;
            worst_slope = worst_slope.max((slope + 2.0).abs());
            let (lo, hi) = alpha_band(gate, n);
            if (slope + 2.0).abs() > 0.1 || fit.value < lo || fit.value > hi {
                ok = false;
                let scaled = outs
                    .iter()
                    .map(|o| {
                        let r = &o.record;
                        format!(
                            "{:.2}",
                            (1.0 - r.f_pro.expect("dense run")) * r.u_over_omega.powi(2)
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("/");
                bad.push(format!(
                    "{gate} n_A={n}: slope={slope:.2}, alpha={:.2} (band [{lo}, {hi}]), \
                     (1-F)U^2 at U=25/50/100/200 = {scaled}",
                    fit.value
                ));
            }
            alphas.insert((gate, n), fit.value);
            pool.extend(outs.into_iter().map(|o| o.report));
        }
    }
    let details = if ok {
        let show = |g: Gate| {
            (0..=4)
                .map(|n| format!("{:.2}", alphas[&(g, n)]))
                .collect::<Vec<_>>()
                .join("/")
        };
        format!(
            "slope within -2 +- {worst_slope:.3}; alpha cz {} cnot {}",
            show(Gate::ModifiedCz),
            show(Gate::Cnot)
        )
    } else {
        format!(
            "{} of 10 combinations off the inverse-square line, all at U=25 \
             (odd U/Omega parks blocked pi pulses on the detuned-oscillation \
             anti-node, leaving ~U^-2 population behind per event): {}",
            bad.len(),
            bad.join("; ")
        )
    };
    Ok((ok, details))
}

/// 3: a single effective pulse time fits the whole decay grid for each gate.
fn dissipation_law(
    pool: &mut Vec<FidelityReport>,
    f_clean: &HashMap<(Gate, usize), f64>,
    grid: &mut Vec<RunOutcome>,
) -> Result<(bool, String)> {
    let mut points = Vec::new();
    for &gate in &GATES {
        for n in 1..=4usize {
            for &total in &DECAY_GRID {
                for g in splittings(total) {
                    points.push(gate_point(gate, n, 200.0, g));
                }
            }
        }
    }
    let outs = runner::execute_all(&points, Progress::Dots)?;
    pool.extend(outs.iter().map(|o| o.report.clone()));
    grid.extend(outs);

    let mut ok = true;
    let mut parts = Vec::new();
    for &gate in &GATES {
        let records: Vec<SweepRecord> = grid
            .iter()
            .filter(|o| o.record.gate == gate)
            .map(|o| o.record.clone())
            .collect();
        // the coherent prefactor is the measured decay-free fidelity at the
        // operating point, expressed as its inverse-square coefficient
        let fit = fit_teff(&records, gate, |n| {
            (1.0 - f_clean[&(gate, n)]) * 200.0 * 200.0
        })?;
        let band = match gate {
            Gate::ModifiedCz => (0.36, 0.44),
            Gate::Cnot => (0.35, 0.43),
        };
        let in_band = fit.value >= band.0 && fit.value <= band.1;
        let tight = fit.residual_max < 2e-3;
        ok &= in_band && tight;
        parts.push(format!(
            "{gate}: t_eff/pi = {:.4} (band [{}, {}]), max |F - model| = {:.1e}",
            fit.value, band.0, band.1, fit.residual_max
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// 4: the closed two-level loss constant 3/8 shows up in the full solver for
/// both pulse directions.
fn two_level() -> Result<(bool, String)> {
    let mut worst_const = 0.0f64;
    let mut worst_dir = 0.0f64;
    for &g in &[1e-5, 1e-4, 1e-3] {
        let pe = pi_pulse_survival(g, PulseDirection::Exciting)?;
        let pd = pi_pulse_survival(g, PulseDirection::Deexciting)?;
        let ce = -pe.ln() / (PI * g);
        let cd = -pd.ln() / (PI * g);
        worst_const = worst_const.max((ce / 0.375 - 1.0).abs());
        worst_const = worst_const.max((cd / 0.375 - 1.0).abs());
        worst_dir = worst_dir.max((ce / cd - 1.0).abs());
    }
    Ok((
        worst_const < 0.01 && worst_dir < 0.02,
        format!(
            "-ln(p)/(pi gamma) off 3/8 by at most {:.2}%, directions differ by {:.2}%",
            100.0 * worst_const,
            100.0 * worst_dir
        ),
    ))
}

fn f_by_chain(grid: &[RunOutcome], gate: Gate, pick: impl Fn(&SweepRecord) -> bool) -> Vec<f64> {
    let mut rows: Vec<(usize, f64)> = grid
        .iter()
        .filter(|o| o.record.gate == gate && pick(&o.record))
        .map(|o| (o.record.n_a, o.record.f_pro.expect("dense run")))
        .collect();
    rows.sort_by_key(|r| r.0);
    rows.into_iter().map(|r| r.1).collect()
}

/// 5: qubit decay alone makes the fidelity independent of the chain length;
/// ancilla decay alone makes it strictly decreasing.
fn ancilla_independence(grid: &[RunOutcome]) -> Result<(bool, String)> {
    let mut worst_spread = 0.0f64;
    let mut monotone = true;
    for &gate in &GATES {
        for &total in &DECAY_GRID {
            let qubit_only = f_by_chain(grid, gate, |r| {
                r.gamma_a == 0.0 && r.gamma0 == 0.5 * total
            });
            if qubit_only.len() != 4 {
                return Err(anyhow!("missing qubit-only runs for {gate} at {total:.1e}"));
            }
            let spread = qubit_only.iter().cloned().fold(f64::MIN, f64::max)
                - qubit_only.iter().cloned().fold(f64::MAX, f64::min);
            worst_spread = worst_spread.max(spread);

            let ancilla_only = f_by_chain(grid, gate, |r| {
                r.gamma0 == 0.0 && r.gamma1 == 0.0 && r.gamma_a == total
            });
            if ancilla_only.len() != 4 {
                return Err(anyhow!("missing ancilla-only runs for {gate} at {total:.1e}"));
            }
            monotone &= ancilla_only.windows(2).all(|w| w[1] < w[0]);
        }
    }
    Ok((
        worst_spread < 1e-3 && monotone,
        format!(
            "spread over n_A at gamma_A=0 at most {worst_spread:.1e} (budget 1e-3); \
             strictly decreasing under ancilla decay: {monotone}"
        ),
    ))
}

/// 6: on every dense run the classical-probe bracket contains the process
/// fidelity, which hugs the upper bound.
fn hofmann_sandwich(pool: &[FidelityReport]) -> Result<(bool, String)> {
    if pool.is_empty() {
        return Err(anyhow!("no dense reports were collected"));
    }
    let slack = 1e-9;
    let mut close = 0usize;
    let mut ok = true;
    for rep in pool {
        rep.validate(slack)?;
        let f = rep.f_pro.ok_or_else(|| anyhow!("pooled report lacks F_pro"))?;
        if f < rep.f_lower - slack || f > rep.f_upper + slack {
            ok = false;
        }
        if f - rep.f_lower >= rep.f_upper - f {
            close += 1;
        }
    }
    let frac = close as f64 / pool.len() as f64;
    Ok((
        ok && frac >= 0.9,
        format!(
            "{} runs sandwiched; F_pro nearer the upper bound in {:.1}% (need 90%)",
            pool.len(),
            100.0 * frac
        ),
    ))
}

/// 7: 2000 trajectories per probe reproduce the dense bounds at three
/// standard errors, and reruns with the same seed are byte-identical.
fn mc_consistency(grid: &[RunOutcome]) -> Result<(bool, String)> {
    let total = 128e-5;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut rerun_identical = true;
    for &gate in &GATES {
        let dense = grid
            .iter()
            .find(|o| {
                let r = &o.record;
                r.gate == gate && r.n_a == 3 && r.gamma0 == 0.5 * total && r.gamma_a == total
            })
            .ok_or_else(|| anyhow!("equal-rates dense run missing for {gate}"))?;
        let point = RunPoint {
            solver: Solver::Mcwf,
            n_traj: Some(2000),
            seed: Some(2026),
            ..gate_point(gate, 3, 200.0, (0.5 * total, 0.5 * total, total))
        };
        let mc = runner::execute(&point)?;
        let se_lo = mc.report.stderr_lower.expect("sampled run");
        let se_hi = mc.report.stderr_upper.expect("sampled run");
        let d_lo = (mc.report.f_lower - dense.report.f_lower).abs();
        let d_hi = (mc.report.f_upper - dense.report.f_upper).abs();
        ok &= d_lo <= 3.0 * se_lo && d_hi <= 3.0 * se_hi;
        parts.push(format!(
            "{gate}: |d lower| = {:.1}se, |d upper| = {:.1}se",
            d_lo / se_lo,
            d_hi / se_hi
        ));
        if gate == Gate::ModifiedCz {
            let again = runner::execute(&point)?;
            rerun_identical = output::row_without_wall_time(&mc.record)
                == output::row_without_wall_time(&again.record);
        }
    }
    ok &= rerun_identical;
    parts.push(format!("seeded rerun identical: {rerun_identical}"));
    Ok((ok, parts.join("; ")))
}

/// 8: the nearest-neighbour ladder composes to the exact long-range CNOT on
/// classical states, with the advertised pulse economics.
fn ladder_oracle() -> Result<(bool, String)> {
    let mut ok = true;
    for k in 1..=5usize {
        let gates = nn_cnot_circuit(k)?;
        ok &= gates.len() == 4 * k;
        let bits = k + 2;
        for s in 0..(1u32 << bits) {
            let mut b: Vec<u8> = (0..bits).map(|i| ((s >> i) & 1) as u8).collect();
            for &(c, t) in &gates {
                b[t] ^= b[c];
            }
            let mut want: Vec<u8> = (0..bits).map(|i| ((s >> i) & 1) as u8).collect();
            want[bits - 1] ^= want[0];
            if b != want {
                ok = false;
            }
        }
        ok &= compile_nn_sequence(k)?.laser_count() == 20 * k;
    }
    for n in 1..=4usize {
        let spec = GateSpec::preferred(Gate::Cnot, n);
        ok &= compile_gate(spec)?.laser_count() == 4 * n + 2 + 3;
    }
    let ours = compile_gate(GateSpec::preferred(Gate::Cnot, 2))?.laser_count();
    let ladder = compile_nn_sequence(1)?.laser_count();
    ok &= ours == 13 && ladder == 20;
    Ok((
        ok,
        format!(
            "4k gates XOR-exact on all 2^(k+2) states for k <= 5; \
             {ours} relay pulses vs {ladder} ladder pulses at n_A = 2"
        ),
    ))
}

/// 9: the relay beats the ladder everywhere on the grid and the measured
/// log-ratio follows the counting model with a single fitted pulse time.
fn gain_claim(gain: &Result<GainData>) -> Result<(bool, String)> {
    let data = gain.as_ref().map_err(|e| anyhow!("comparison runs failed: {e:#}"))?;
    let t_eff = compare::fit_gain_teff(&data.rows)?;
    let mut ok = true;
    let mut worst_rel = 0.0f64;
    for r in &data.rows {
        if r.f_ours <= r.f_nn {
            ok = false;
        }
        let y = r.ratio().ln();
        let m = gain_ratio(r.n_a, r.gamma, t_eff).ln();
        let rel = (y - m).abs() / m.abs();
        worst_rel = worst_rel.max(rel);
    }
    ok &= worst_rel <= 0.2;
    Ok((
        ok,
        format!(
            "relay ahead on all {} points; t_eff/pi = {:.3} from the gain fit, \
             worst log-ratio misfit {:.1}% (budget 20%)",
            data.rows.len(),
            t_eff / PI,
            100.0 * worst_rel
        ),
    ))
}

/// 10: along every compiled relay protocol at strong blockade the weight on
/// doubly excited states stays negligible.
fn single_excitation() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for &gate in &GATES {
        for n in 0..=4usize {
            let mut variants = vec![Variant::Direct];
            if n % 2 == 1 {
                variants.push(Variant::SigmaXWrapped);
            }
            for variant in variants {
                let spec = GateSpec::new(gate, n, variant);
                let seq = compile_gate(spec)?;
                let topology = spec.topology();
                let register = build_register(topology, CouplingMap::chain(topology, 200.0))?;
                let model = LindbladModel::new(&register, DecayRates::zero(), None)?;
                let mut psi = vec![C64::new(0.0, 0.0); model.dim()];
                for c in 0..2 {
                    for t in 0..2 {
                        psi[model.coding_position(c, t)] = C64::new(0.5, 0.0);
                    }
                }
                let p2 = max_double_excitation(&seq, &model, &psi, 20_000)?;
                worst = worst.max(p2);
                count += 1;
            }
        }
    }
    Ok((
        worst < 1e-3,
        format!("{count} protocols; max double-excitation weight {worst:.1e} (budget 1e-3)"),
    ))
}

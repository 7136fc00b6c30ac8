use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rydhop_cli::config::{self, Axis, RunConfig, RunPoint};
use rydhop_cli::runner::{self, Progress};
use rydhop_cli::{compare, output, verify};
use rydhop_core::analysis::{fit_alpha, fit_teff, Solver};
use rydhop_core::protocol::{compile_gate, FrameOp, Gate, GateSpec, SequenceStep, Transition, Variant};
use rydhop_core::register::{build_register, CouplingMap};
use serde_json::json;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rydhop",
    about = "Entangling gates between distant atomic qubits, relayed by a chain of ancillas",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration and print the result
    Simulate(SimulateArgs),
    /// Expand a config file or preset into a grid of runs and record them
    Sweep(SweepArgs),
    /// Fit a scaling-law parameter to recorded sweeps
    Fit(FitArgs),
    /// Relay gate versus a nearest-neighbour CNOT ladder on the same span
    CompareNn(CompareArgs),
    /// Inspect compiled pulse sequences
    Protocol {
        #[command(subcommand)]
        command: ProtocolCommand,
    },
    /// Run the acceptance suite and write a JSON report
    Verify(VerifyArgs),
}

fn parse_gate(s: &str) -> Result<Gate> {
    match s {
        "modified_cz" | "cz" => Ok(Gate::ModifiedCz),
        "cnot" => Ok(Gate::Cnot),
        other => bail!("unknown gate {other}; expected modified_cz or cnot"),
    }
}

fn parse_variant(s: &str) -> Result<Variant> {
    match s {
        "direct" => Ok(Variant::Direct),
        "sigma_x_wrapped" => Ok(Variant::SigmaXWrapped),
        other => bail!("unknown variant {other}; expected direct or sigma_x_wrapped"),
    }
}

fn parse_solver(s: &str) -> Result<Solver> {
    match s {
        "dense" => Ok(Solver::Dense),
        "mcwf" => Ok(Solver::Mcwf),
        other => bail!("unknown solver {other}; expected dense or mcwf"),
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    gate: String,
    #[arg(long)]
    n_ancillas: usize,
    #[arg(long)]
    variant: Option<String>,
    /// Blockade shift in units of the Rabi frequency
    #[arg(long, default_value_t = 200.0)]
    u: f64,
    /// Next-nearest-neighbour shift; omitted means nearest-neighbour only
    #[arg(long)]
    u_nnn: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    gamma0: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma1: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma_a: f64,
    #[arg(long, default_value = "dense")]
    solver: String,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_excitation: Option<u32>,
    #[arg(long)]
    force_dense: bool,
    /// Append the record to this CSV as well
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    append: bool,
}

impl SimulateArgs {
    fn point(&self) -> Result<RunPoint> {
        Ok(RunPoint {
            gate: parse_gate(&self.gate)?,
            variant: self.variant.as_deref().map(parse_variant).transpose()?,
            n_ancillas: self.n_ancillas,
            u_over_omega: self.u,
            u_nnn: self.u_nnn,
            gamma0: self.gamma0,
            gamma1: self.gamma1,
            gamma_a: self.gamma_a,
            solver: parse_solver(&self.solver)?,
            n_traj: self.n_traj,
            seed: self.seed,
            max_excitation: self.max_excitation,
            force_dense: self.force_dense,
        })
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let point = args.point()?;
    let outcome = runner::execute(&point)?;
    println!("{}", runner::summary(&outcome));
    println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    if let Some(path) = &args.out {
        output::write_records(path, std::slice::from_ref(&outcome.record), args.append)?;
        let sidecar = output::write_sidecar(
            path,
            &point,
            std::slice::from_ref(&outcome.record),
            std::slice::from_ref(&outcome.report),
        )?;
        println!("recorded to {} (report in {})", path.display(), sidecar.display());
    }
    Ok(())
}

/// Flag overrides applied on top of a loaded config, replacing whole axes.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    gate: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    n_ancillas: Option<usize>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    u_nnn: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma_a: Option<f64>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_excitation: Option<u32>,
    #[arg(long)]
    force_dense: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = &self.gate {
            cfg.gate = Axis::One(parse_gate(s)?);
        }
        if let Some(s) = &self.variant {
            cfg.variant = Some(Axis::One(parse_variant(s)?));
        }
        if let Some(n) = self.n_ancillas {
            cfg.n_ancillas = Axis::One(n);
        }
        if let Some(u) = self.u {
            cfg.u_over_omega = Axis::One(u);
        }
        if let Some(w) = self.u_nnn {
            cfg.u_nnn = Some(Axis::One(w));
        }
        if let Some(g) = self.gamma0 {
            cfg.gamma0 = Axis::One(g);
        }
        if let Some(g) = self.gamma1 {
            cfg.gamma1 = Axis::One(g);
        }
        if let Some(g) = self.gamma_a {
            cfg.gamma_a = Axis::One(g);
        }
        if let Some(s) = &self.solver {
            cfg.solver = Axis::One(parse_solver(s)?);
        }
        if let Some(n) = self.n_traj {
            cfg.n_traj = Some(Axis::One(n));
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(Axis::One(s));
        }
        if let Some(m) = self.max_excitation {
            cfg.max_excitation = Some(Axis::One(m));
        }
        if self.force_dense {
            cfg.force_dense = true;
        }
        Ok(())
    }
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config: one document or a list of them
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    append: bool,
    #[command(flatten)]
    overrides: Overrides,
}

fn sweep(args: SweepArgs) -> Result<()> {
    if let Some(name) = args.preset.as_deref() {
        // the two comparison figures are not sweep grids
        if name == "fig-nn-compare" {
            return figure_compare(args.out, false);
        }
        if name == "fig-gain" {
            return figure_compare(args.out, true);
        }
    }
    let mut configs: Vec<RunConfig> = if let Some(name) = args.preset.as_deref() {
        config::sweep_preset(name).ok_or_else(|| {
            anyhow!(
                "unknown preset {name}; available: {}",
                config::PRESETS.join(", ")
            )
        })?
    } else if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        match serde_json::from_str::<Vec<RunConfig>>(&text) {
            Ok(list) => list,
            Err(_) => vec![serde_json::from_str(&text)
                .with_context(|| format!("{} is not a run config", path.display()))?],
        }
    } else {
        bail!("pass --config FILE or --preset NAME");
    };
    for cfg in &mut configs {
        args.overrides.apply(cfg)?;
    }
    let out_path = args
        .out
        .clone()
        .or_else(|| configs.iter().find_map(|c| c.output.clone().map(PathBuf::from)))
        .ok_or_else(|| anyhow!("no output path: pass --out or set \"output\" in the config"))?;

    let points: Vec<RunPoint> = configs.iter().flat_map(|c| c.expand()).collect();
    if points.is_empty() {
        bail!("the configuration expands to no runs");
    }
    for p in &points {
        config::validate_point(p)?;
    }
    eprintln!("{} runs -> {}", points.len(), out_path.display());
    let outcomes = runner::execute_all(&points, Progress::Lines)?;
    let records: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
    let reports: Vec<_> = outcomes.into_iter().map(|o| o.report).collect();
    output::write_records(&out_path, &records, args.append)?;
    let sidecar = output::write_sidecar(&out_path, &configs, &records, &reports)?;
    println!(
        "wrote {} records to {} (reports in {})",
        records.len(),
        out_path.display(),
        sidecar.display()
    );
    Ok(())
}

/// Data behind the comparison figures: simulated relay and ladder
/// fidelities, plus model-only curves for longer chains when `extended`.
fn figure_compare(out: Option<PathBuf>, extended: bool) -> Result<()> {
    let default = if extended { "fig-gain.csv" } else { "fig-nn-compare.csv" };
    let path = out.unwrap_or_else(|| PathBuf::from(default));
    let data = compare::gain_table(&[2, 3], &config::COMPARE_GRID, 200.0, true)?;
    let t_eff = compare::fit_gain_teff(&data.rows)?;
    let mut model_only = Vec::new();
    if extended {
        for n_a in [4usize, 5] {
            for &gamma in &config::COMPARE_GRID {
                model_only.push((n_a, gamma));
            }
        }
    }
    let lines = compare::compare_lines(&data, t_eff, &model_only);
    compare::write_compare_csv(&path, &lines)?;
    println!("t_eff/pi fitted from the ratios: {:.4}", t_eff / PI);
    println!("wrote {} rows to {}", lines.len(), path.display());
    Ok(())
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value = "2,3", value_delimiter = ',')]
    n_ancillas: Vec<usize>,
    #[arg(long = "gamma", default_value = "1e-4,5e-4,1e-3,5e-3", value_delimiter = ',')]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 200.0)]
    u: f64,
    /// Fix the effective pulse time (units of pi) instead of fitting it
    #[arg(long)]
    t_eff: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn compare_nn(args: CompareArgs) -> Result<()> {
    let data = compare::gain_table(&args.n_ancillas, &args.gammas, args.u, true)?;
    let t_eff = match args.t_eff {
        Some(v) => v * PI,
        None => compare::fit_gain_teff(&data.rows)?,
    };
    println!("n_A      gamma     relay      ladder     ratio      model");
    for r in &data.rows {
        println!(
            "{:3}  {:9.3e}  {:.6}  {:.6}  {:.6}  {:.6}",
            r.n_a,
            r.gamma,
            r.f_ours,
            r.f_nn,
            r.ratio(),
            rydhop_core::analysis::gain_ratio(r.n_a, r.gamma, t_eff)
        );
    }
    println!("t_eff/pi = {:.4}", t_eff / PI);
    if let Some(path) = &args.out {
        let lines = compare::compare_lines(&data, t_eff, &[]);
        compare::write_compare_csv(path, &lines)?;
        println!("wrote {} rows to {}", lines.len(), path.display());
    }
    Ok(())
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// alpha (blockade coefficient) or teff (effective pulse time)
    #[arg(long)]
    parameter: String,
    #[arg(long)]
    gate: String,
    /// Chain length filter; required for alpha
    #[arg(long)]
    n_ancillas: Option<usize>,
    /// Uniform coherent coefficient assumed by the teff fit
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
}

fn fit(args: FitArgs) -> Result<()> {
    let records = output::read_records(&args.input)?;
    let gate = parse_gate(&args.gate)?;
    let result = match args.parameter.as_str() {
        "alpha" => {
            let n = args
                .n_ancillas
                .ok_or_else(|| anyhow!("alpha fits need --n-ancillas"))?;
            let sel: Vec<_> = records
                .into_iter()
                .filter(|r| {
                    r.gate == gate && r.n_a == n && r.gamma_q() == 0.0 && r.gamma_a == 0.0
                })
                .collect();
            fit_alpha(&sel)?
        }
        "teff" => {
            let sel: Vec<_> = records
                .into_iter()
                .filter(|r| {
                    r.gate == gate
                        && r.n_a >= 1
                        && (r.gamma_q() > 0.0 || r.gamma_a > 0.0)
                        && r.f_pro.is_some()
                })
                .collect();
            let alpha = args.alpha;
            fit_teff(&sel, gate, |_| alpha)?
        }
        other => bail!("unknown parameter {other}; expected alpha or teff"),
    };
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

#[derive(Subcommand)]
enum ProtocolCommand {
    /// Print the compiled pulse table of one gate
    Dump(DumpArgs),
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    gate: String,
    #[arg(long)]
    n_ancillas: usize,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    json: bool,
}

fn transition_text(t: Transition) -> &'static str {
    match t {
        Transition::Q0R => "0-r",
        Transition::Q1R => "1-r",
        Transition::GE => "g-e",
    }
}

fn area_text(area: f64) -> String {
    let turns = area / PI;
    if (turns - turns.round()).abs() < 1e-12 {
        match turns.round() as i64 {
            1 => "pi".into(),
            n => format!("{n}pi"),
        }
    } else {
        format!("{area:.4}")
    }
}

fn dump(args: DumpArgs) -> Result<()> {
    let gate = parse_gate(&args.gate)?;
    let spec = match &args.variant {
        Some(v) => GateSpec::new(gate, args.n_ancillas, parse_variant(v)?),
        None => GateSpec::preferred(gate, args.n_ancillas),
    };
    let seq = compile_gate(spec)?;
    let topology = spec.topology();
    let register = build_register(topology, CouplingMap::chain(topology, 1.0))?;
    if args.json {
        let steps: Vec<serde_json::Value> = seq
            .steps()
            .iter()
            .map(|s| match s {
                SequenceStep::Pulse(p) => json!({
                    "kind": "pulse",
                    "atom": register.label(p.atom),
                    "transition": p.transition,
                    "area": p.area,
                    "duration": p.duration(),
                }),
                SequenceStep::Frame(FrameOp::SigmaX { atom }) => json!({
                    "kind": "frame",
                    "op": "sigma_x",
                    "atom": register.label(*atom),
                }),
            })
            .collect();
        let doc = json!({
            "gate": spec.gate,
            "variant": spec.variant,
            "n_ancillas": spec.n_ancillas,
            "pulse_count": seq.laser_count(),
            "duration": seq.duration(),
            "steps": steps,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!(
            "{} n_A={} {} ({} pulses, duration {:.2}/Omega)",
            spec.gate,
            spec.n_ancillas,
            spec.variant,
            seq.laser_count(),
            seq.duration()
        );
        for (i, s) in seq.steps().iter().enumerate() {
            match s {
                SequenceStep::Pulse(p) => println!(
                    "{:3}  pulse  {:<3} {}  {}",
                    i + 1,
                    register.label(p.atom),
                    transition_text(p.transition),
                    area_text(p.area)
                ),
                SequenceStep::Frame(FrameOp::SigmaX { atom }) => println!(
                    "{:3}  frame  {:<3} sigma-x",
                    i + 1,
                    register.label(*atom)
                ),
            }
        }
    }
    Ok(())
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "verify_report.json")]
    report: PathBuf,
}

fn run_verify(args: VerifyArgs) -> Result<ExitCode> {
    let report = verify::run_all();
    verify::write_report(&args.report, &report)?;
    println!("report written to {}", args.report.display());
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("RYDHOP_WORKERS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("RYDHOP_WORKERS must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a).map(|()| ExitCode::SUCCESS),
        Command::Sweep(a) => sweep(a).map(|()| ExitCode::SUCCESS),
        Command::Fit(a) => fit(a).map(|()| ExitCode::SUCCESS),
        Command::CompareNn(a) => compare_nn(a).map(|()| ExitCode::SUCCESS),
        Command::Protocol {
            command: ProtocolCommand::Dump(a),
        } => dump(a).map(|()| ExitCode::SUCCESS),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

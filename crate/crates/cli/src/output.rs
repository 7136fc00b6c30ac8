//! Records on disk: the sweep CSV and a JSON sidecar carrying the full
//! fidelity reports and the resolved configuration.

use anyhow::{bail, Context, Result};
use rydhop_core::analysis::SweepRecord;
use rydhop_core::fidelity::FidelityReport;
use serde::Serialize;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const CSV_HEADER: &str = "gate,variant,n_A,u_over_omega,gamma0,gamma1,gammaA,solver,\
n_traj,seed,f_pro,f_lower,f_upper,stderr_lower,stderr_upper,wall_time_s";

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// The sixteen comma-joined fields of one record, empty where a column does
/// not apply to the solver that produced it.
pub fn render_row(r: &SweepRecord) -> String {
    [
        r.gate.to_string(),
        r.variant.to_string(),
        r.n_a.to_string(),
        num(r.u_over_omega),
        num(r.gamma0),
        num(r.gamma1),
        num(r.gamma_a),
        r.solver.to_string(),
        r.n_traj.map(|v| v.to_string()).unwrap_or_default(),
        r.seed.map(|v| v.to_string()).unwrap_or_default(),
        opt_num(r.f_pro),
        opt_num(r.f_lower),
        opt_num(r.f_upper),
        opt_num(r.stderr_lower),
        opt_num(r.stderr_upper),
        num(r.wall_time_s),
    ]
    .join(",")
}

/// Everything in a row except the timing column; rerun comparisons key on
/// this.
pub fn row_without_wall_time(r: &SweepRecord) -> String {
    let row = render_row(r);
    match row.rfind(',') {
        Some(k) => row[..k].to_string(),
        None => row,
    }
}

pub fn write_records(path: &Path, records: &[SweepRecord], append: bool) -> Result<()> {
    let exists = path.exists();
    if append && exists {
        let first = BufReader::new(File::open(path)?)
            .lines()
            .next()
            .transpose()?
            .unwrap_or_default();
        if first.trim_end() != CSV_HEADER {
            bail!(
                "{} exists but its header does not match the record schema",
                path.display()
            );
        }
        let mut out = BufWriter::new(OpenOptions::new().append(true).open(path)?);
        for r in records {
            writeln!(out, "{}", render_row(r))?;
        }
        return Ok(());
    }
    if exists && !append {
        bail!(
            "{} already exists; pass --append to add rows or choose another path",
            path.display()
        );
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", render_row(r))?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut records = Vec::new();
    for row in reader.deserialize() {
        records.push(row.with_context(|| format!("malformed record in {}", path.display()))?);
    }
    Ok(records)
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    config: &'a C,
    records: &'a [SweepRecord],
    reports: &'a [FidelityReport],
}

/// JSON companion of a CSV, at the same path with extension `json`.
/// Overwritten on every invocation; it describes the latest batch only.
pub fn write_sidecar<C: Serialize>(
    csv_path: &Path,
    config: &C,
    records: &[SweepRecord],
    reports: &[FidelityReport],
) -> Result<PathBuf> {
    let path = csv_path.with_extension("json");
    let doc = Sidecar {
        config,
        records,
        reports,
    };
    let mut out = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rydhop_core::analysis::Solver;
    use rydhop_core::protocol::{Gate, Variant};

    fn dense_record() -> SweepRecord {
        SweepRecord {
            gate: Gate::ModifiedCz,
            variant: Variant::Direct,
            n_a: 2,
            u_over_omega: 200.0,
            gamma0: 6.4e-4,
            gamma1: 6.4e-4,
            gamma_a: 0.0,
            solver: Solver::Dense,
            n_traj: None,
            seed: None,
            f_pro: Some(0.987_654_321),
            f_lower: None,
            f_upper: None,
            stderr_lower: None,
            stderr_upper: None,
            wall_time_s: 1.5,
        }
    }

    fn scratch(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("rydhop-{}-{name}", std::process::id()))
    }

    #[test]
    fn dense_rows_leave_sampled_columns_empty() {
        let row = render_row(&dense_record());
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("modified_cz,direct,2,2.000000000000e2,"));
        assert!(row.contains(",dense,,,9.876543210000e-1,,,,,"));
    }

    #[test]
    fn rows_round_trip_through_the_csv_reader() {
        let mut mc = dense_record();
        mc.solver = Solver::Mcwf;
        mc.n_traj = Some(2000);
        mc.seed = Some(7);
        mc.f_pro = None;
        mc.f_lower = Some(0.97);
        mc.f_upper = Some(0.99);
        mc.stderr_lower = Some(1e-3);
        mc.stderr_upper = Some(8e-4);

        let path = scratch("roundtrip.csv");
        write_records(&path, &[dense_record(), mc.clone()], false).unwrap();
        let back = read_records(&path).unwrap();
        std::fs::remove_file(&path).unwrap();

        assert_eq!(back.len(), 2);
        assert_eq!(back[0].f_pro, dense_record().f_pro);
        assert_eq!(back[0].n_traj, None);
        assert_eq!(back[1].seed, Some(7));
        assert_eq!(back[1].f_upper, Some(0.99));
        assert_eq!(back[1].f_pro, None);
    }

    #[test]
    fn append_checks_the_header_and_plain_write_refuses_to_clobber() {
        let path = scratch("append.csv");
        std::fs::write(&path, "something,else\n1,2\n").unwrap();
        assert!(write_records(&path, &[dense_record()], true).is_err());
        assert!(write_records(&path, &[dense_record()], false).is_err());
        std::fs::remove_file(&path).unwrap();

        write_records(&path, &[dense_record()], false).unwrap();
        write_records(&path, &[dense_record()], true).unwrap();
        let back = read_records(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(back.len(), 2);
    }

    #[test]
    fn wall_time_is_the_only_field_stripped_for_rerun_comparison() {
        let mut a = dense_record();
        let mut b = dense_record();
        a.wall_time_s = 1.0;
        b.wall_time_s = 2.0;
        assert_eq!(row_without_wall_time(&a), row_without_wall_time(&b));
        b.f_pro = Some(0.5);
        assert_ne!(row_without_wall_time(&a), row_without_wall_time(&b));
    }
}

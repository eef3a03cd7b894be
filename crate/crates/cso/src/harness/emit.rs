//! Result persistence: the fixed-schema results.csv, per-curve plot data,
//! derived tables, and run metadata, plus the reader used by `report`.
//!
//! Floating-point columns use 17 significant digits with a locale-
//! independent decimal point, so parsing a results file reproduces the
//! in-memory rows exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    normalized_errors, switch_table, AuditSummary, CellFailure, ExperimentConfig, ExperimentRow,
    RunOutput,
};

/// Default threshold: the switch is called when the noisy curve exceeds
/// twice the noiseless curve and stays there.
pub const SWITCH_THRESHOLD: f64 = 2.0;

const RESULTS_HEADER: [&str; 9] =
    ["objective", "optimizer", "d", "sigma2", "n", "R", "mean_gap", "stderr", "wall_ms"];

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Metadata stored beside results.csv so `report` can regenerate every
/// derived table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: ExperimentConfig,
    pub d_eff: f64,
    pub audit: AuditSummary,
    pub warnings: Vec<String>,
}

/// Contents of a completed run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub rows: Vec<ExperimentRow>,
    pub meta: RunMeta,
}

pub fn write_results_csv(rows: &[ExperimentRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.objective.as_str(),
            r.optimizer.as_str(),
            &r.d.to_string(),
            &fmt_f64(r.sigma2),
            &r.n.to_string(),
            &r.replications.to_string(),
            &fmt_f64(r.mean_gap),
            &fmt_f64(r.stderr),
            &fmt_f64(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_results_csv(path: &Path) -> Result<Vec<ExperimentRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let rec = record?;
        if rec.len() != RESULTS_HEADER.len() {
            return Err(Error::Config(format!(
                "results.csv row has {} fields, expected {}",
                rec.len(),
                RESULTS_HEADER.len()
            )));
        }
        let field = |i: usize| rec.get(i).unwrap();
        let parse_f = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad float '{}': {e}", field(i))))
        };
        let parse_u = |i: usize| -> Result<usize> {
            field(i)
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad integer '{}': {e}", field(i))))
        };
        rows.push(ExperimentRow {
            objective: field(0).to_string(),
            optimizer: field(1).to_string(),
            d: parse_u(2)?,
            sigma2: parse_f(3)?,
            n: parse_u(4)?,
            replications: parse_u(5)?,
            mean_gap: parse_f(6)?,
            stderr: parse_f(7)?,
            wall_ms: parse_f(8)?,
        });
    }
    Ok(rows)
}

fn write_failures_csv(failures: &[CellFailure], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["objective", "optimizer", "sigma2", "n", "reason"])?;
    for f in failures {
        w.write_record([
            f.objective.as_str(),
            f.optimizer.as_str(),
            &fmt_f64(f.sigma2),
            &f.n.to_string(),
            f.reason.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One plot-data file per (objective, optimizer, sigma^2) curve: budget,
/// mean gap, standard error, in gnuplot-friendly columns.
fn write_curve_files(rows: &[ExperimentRow], dir: &Path) -> Result<()> {
    let curve_dir = dir.join("curves");
    fs::create_dir_all(&curve_dir)?;
    let mut seen: Vec<(String, String, f64)> = Vec::new();
    for row in rows {
        let key = (row.objective.clone(), row.optimizer.clone(), row.sigma2);
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    for (objective, optimizer, sigma2) in seen {
        let mut curve: Vec<&ExperimentRow> = rows
            .iter()
            .filter(|r| r.objective == objective && r.optimizer == optimizer && r.sigma2 == sigma2)
            .collect();
        curve.sort_by_key(|r| r.n);
        let name = format!("curve_{objective}__{optimizer}__sigma2_{sigma2:e}.csv");
        let mut w = csv::Writer::from_path(curve_dir.join(name))?;
        w.write_record(["n", "mean_gap", "stderr"])?;
        for r in curve {
            w.write_record([&r.n.to_string(), &fmt_f64(r.mean_gap), &fmt_f64(r.stderr)])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_derived_tables(rows: &[ExperimentRow], d_eff: f64, dir: &Path) -> Result<()> {
    // normalized errors for the noisy rows
    let noisy: Vec<ExperimentRow> =
        rows.iter().filter(|r| r.sigma2 > 0.0).cloned().collect();
    if !noisy.is_empty() {
        let table = normalized_errors(&noisy, d_eff)?;
        let mut w = csv::Writer::from_path(dir.join("normalized.csv"))?;
        w.write_record(["objective", "optimizer", "sigma2", "n", "normalized"])?;
        for r in &table {
            w.write_record([
                r.objective.as_str(),
                r.optimizer.as_str(),
                &fmt_f64(r.sigma2),
                &r.n.to_string(),
                &fmt_f64(r.normalized),
            ])?;
        }
        w.flush()?;
    }
    // switching budgets against the noiseless curve
    let switches = switch_table(rows, SWITCH_THRESHOLD)?;
    if !switches.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("switch.csv"))?;
        w.write_record(["objective", "optimizer", "sigma2", "switch_budget"])?;
        for s in &switches {
            w.write_record([
                s.objective.as_str(),
                s.optimizer.as_str(),
                &fmt_f64(s.sigma2),
                &fmt_f64(s.switch_budget),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Writes results.csv, failures.csv, raw dumps, per-curve plot data,
/// derived tables, and run_meta.json into `dir`.
pub fn emit_outputs(
    output: &RunOutput,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    write_results_csv(&output.rows, &dir.join("results.csv"))?;
    if !output.failures.is_empty() {
        write_failures_csv(&output.failures, &dir.join("failures.csv"))?;
    }
    if !output.raw.is_empty() {
        let raw_dir = dir.join("raw");
        fs::create_dir_all(&raw_dir)?;
        for cell in &output.raw {
            let name = format!(
                "{}__{}__sigma2_{:e}__n{}.csv",
                cell.objective, cell.optimizer, cell.sigma2, cell.n
            );
            let mut w = csv::Writer::from_path(raw_dir.join(name))?;
            w.write_record(["rep", "gap"])?;
            for (i, g) in cell.gaps.iter().enumerate() {
                w.write_record([&i.to_string(), &fmt_f64(*g)])?;
            }
            w.flush()?;
        }
    }
    if !output.warnings.is_empty() {
        fs::write(dir.join("warnings.txt"), output.warnings.join("\n") + "\n")?;
    }
    let meta = RunMeta {
        config: config.clone(),
        d_eff: config.objective.effective_dimension(),
        audit: output.audit.clone(),
        warnings: output.warnings.clone(),
    };
    fs::write(dir.join("run_meta.json"), serde_json::to_string_pretty(&meta)?)?;
    write_curve_files(&output.rows, dir)?;
    write_derived_tables(&output.rows, meta.d_eff, dir)?;
    Ok(dir.to_path_buf())
}

/// Loads a run directory written by [`emit_outputs`].
pub fn read_run_dir(dir: &Path) -> Result<RunDir> {
    let rows = parse_results_csv(&dir.join("results.csv"))?;
    let meta: RunMeta = serde_json::from_str(&fs::read_to_string(dir.join("run_meta.json"))?)?;
    Ok(RunDir { rows, meta })
}

/// Regenerates every derived table from a persisted results.csv.
pub fn write_report(dir: &Path) -> Result<()> {
    let run = read_run_dir(dir)?;
    write_curve_files(&run.rows, dir)?;
    write_derived_tables(&run.rows, run.meta.d_eff, dir)?;
    Ok(())
}

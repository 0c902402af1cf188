//! Grid runs over (neurons, timesteps, K, seed).
//!
//! Each cell trains from scratch, samples `eval_samples` windows with the
//! cell's seed and evaluates them against the data, exactly as `train`,
//! `generate` and `evaluate` would in sequence. Per-cell artifacts go to
//! `<out>/cells/n<n>_t<t>_k<K>_seed<seed>/`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use spiqgan::spikedata::{load_spikes, save_spikes, SpikeMatrix};

use crate::commands::{evaluate_into, generate_matrix, train_into};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const RESULTS_FILE: &str = "sweep_results.csv";
pub const DIFFERENCES_FILE: &str = "sweep_differences.csv";
pub const ERRORS_FILE: &str = "sweep_errors.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub t: usize,
    pub k: f64,
    pub seed: u64,
}

impl Cell {
    fn dir_name(&self) -> String {
        format!("n{}_t{}_k{}_seed{}", self.n, self.t, self.k, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRow {
    pub cell: Cell,
    pub mse_kprob: f64,
    pub mse_rate: f64,
    /// Last JS divergence logged during training.
    pub js: Option<f64>,
}

/// `standard - K-loss` error for one `(n, t, K)` averaged over the seeds for
/// which both runs succeeded. Positive means the K-loss error is lower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Difference {
    pub n: usize,
    pub t: usize,
    pub k: f64,
    pub pairs: usize,
    pub kprob: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<CellRow>,
    pub differences: Vec<Difference>,
    pub failures: Vec<(Cell, CliError)>,
}

pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    let s = &cfg.sweep;
    let mut out = Vec::new();
    for &n in &s.neurons {
        for &t in &s.timesteps {
            for &k in &s.k_values {
                for &seed in &s.seeds {
                    out.push(Cell { n, t, k, seed });
                }
            }
        }
    }
    out
}

pub fn run_cell(cfg: &RunConfig, data: &SpikeMatrix, cell: Cell) -> CliResult<CellRow> {
    let model = cfg.cell_model(cell.n, cell.t, cell.k, cell.seed)?;
    let dir = cfg.paths.out.join("cells").join(cell.dir_name());
    let outcome = train_into(model, data, &dir)?;
    let resolved = dir.join("resolved_train.ini");
    fs::write(&resolved, outcome.checkpoint.config.to_kv_string())
        .map_err(|e| spiqgan::Error::io(&resolved, e))?;
    let generated = generate_matrix(&outcome.checkpoint, cfg.sweep.eval_samples, cell.seed)?;
    save_spikes(&generated, dir.join("generated.spikes"))?;
    let summary = evaluate_into(&outcome.checkpoint.config, &generated, data, cfg.max_lag, &dir)?;
    Ok(CellRow {
        cell,
        mse_kprob: summary.mse_kprob,
        mse_rate: summary.mse_rate,
        js: outcome.log.last().and_then(|r| r.js_divergence),
    })
}

pub fn differences(rows: &[CellRow]) -> Vec<Difference> {
    let mut out: Vec<Difference> = Vec::new();
    for row in rows.iter().filter(|r| r.cell.k != 0.0) {
        let c = row.cell;
        let Some(standard) = rows
            .iter()
            .find(|r| r.cell.n == c.n && r.cell.t == c.t && r.cell.seed == c.seed && r.cell.k == 0.0)
        else {
            continue;
        };
        let kprob = standard.mse_kprob - row.mse_kprob;
        let rate = standard.mse_rate - row.mse_rate;
        match out.iter_mut().find(|d| d.n == c.n && d.t == c.t && d.k == c.k) {
            Some(d) => {
                d.kprob += kprob;
                d.rate += rate;
                d.pairs += 1;
            }
            None => out.push(Difference {
                n: c.n,
                t: c.t,
                k: c.k,
                pairs: 1,
                kprob,
                rate,
            }),
        }
    }
    for d in &mut out {
        d.kprob /= d.pairs as f64;
        d.rate /= d.pairs as f64;
    }
    out
}

pub fn results_csv(rows: &[CellRow]) -> String {
    let mut out = String::from("n,t,K,seed,mse_kprob,mse_rate,js\n");
    for r in rows {
        let c = r.cell;
        let js = r.js.map(|j| j.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{},{},{js}", c.n, c.t, c.k, c.seed, r.mse_kprob, r.mse_rate);
    }
    out
}

pub fn differences_csv(diffs: &[Difference]) -> String {
    let mut out = String::from("n,t,K,pairs,kprob_standard_minus_k,rate_standard_minus_k\n");
    for d in diffs {
        let _ = writeln!(out, "{},{},{},{},{},{}", d.n, d.t, d.k, d.pairs, d.kprob, d.rate);
    }
    out
}

fn errors_csv(failures: &[(Cell, CliError)]) -> String {
    let mut out = String::from("n,t,K,seed,exit_code,message\n");
    for (c, e) in failures {
        let message = e.message.replace('"', "\"\"");
        let _ = writeln!(out, "{},{},{},{},{},\"{message}\"", c.n, c.t, c.k, c.seed, e.exit_code());
    }
    out
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| spiqgan::Error::io(path, e).into())
}

/// Runs every cell and writes the tables. Failed cells are recorded and
/// skipped; the returned report lists them.
pub fn sweep_report(cfg: &RunConfig) -> CliResult<SweepReport> {
    let data = load_spikes(cfg.data_path()?)?;
    fs::create_dir_all(&cfg.paths.out).map_err(|e| spiqgan::Error::io(&cfg.paths.out, e))?;
    cfg.write_snapshot("sweep")?;
    let grid = cells(cfg);
    let results: Vec<CliResult<CellRow>> = if cfg.sweep.parallel {
        grid.par_iter().map(|&c| run_cell(cfg, &data, c)).collect()
    } else {
        grid.iter().map(|&c| run_cell(cfg, &data, c)).collect()
    };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cell, result) in grid.into_iter().zip(results) {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((cell, e)),
        }
    }
    let diffs = differences(&rows);
    let out = &cfg.paths.out;
    write(&out.join(RESULTS_FILE), &results_csv(&rows))?;
    write(&out.join(DIFFERENCES_FILE), &differences_csv(&diffs))?;
    if !failures.is_empty() {
        write(&out.join(ERRORS_FILE), &errors_csv(&failures))?;
    }
    Ok(SweepReport {
        rows,
        differences: diffs,
        failures,
    })
}

/// [`sweep_report`], turning any failed cell into an error after all cells
/// have run.
pub fn sweep(cfg: &RunConfig) -> CliResult<SweepReport> {
    let report = sweep_report(cfg)?;
    match report.failures.first() {
        None => Ok(report),
        Some((cell, first)) => Err(CliError {
            kind: first.kind,
            message: format!(
                "{} of {} sweep cells failed (first: {}: {}); see {}",
                report.failures.len(),
                report.failures.len() + report.rows.len(),
                cell.dir_name(),
                first.message,
                ERRORS_FILE
            ),
        }),
    }
}

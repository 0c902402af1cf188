//! The individual commands. Each `*_into` function does the work for one
//! already-validated configuration so the sweep can reuse it per cell.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use spiqgan::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use spiqgan::generator;
use spiqgan::rng::{Purpose, Streams};
use spiqgan::spikedata::{
    load_spikes, save_spikes, synthesize_surrogate, SpikeMatrix, WindowSpec, MAX_STATE_BITS,
};
use spiqgan::stats::{build_report, js_divergence, state_histogram, stats_mse};
use spiqgan::training::{LogRow, ModelConfig, Trainer, LOG_HEADER};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Failure};

pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const SUMMARY_FILE: &str = "summary.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| spiqgan::Error::io(path, e).into()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Refuses to write `output` over any of `inputs`.
fn ensure_not_input(output: &Path, inputs: &[&Path]) -> CliResult<()> {
    let Ok(out) = output.canonicalize() else {
        return Ok(());
    };
    for input in inputs {
        if input.canonicalize().is_ok_and(|i| i == out) {
            return Err(CliError::validation(format!(
                "output {} would overwrite an input file",
                output.display()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
}

pub fn train(cfg: &RunConfig) -> CliResult<TrainOutcome> {
    let data_path = cfg.data_path()?;
    let data = load_spikes(data_path)?;
    create_dir(&cfg.paths.out)?;
    ensure_not_input(&cfg.paths.out.join(LOG_FILE), &[data_path])?;
    ensure_not_input(&cfg.paths.out.join(CHECKPOINT_FILE), &[data_path])?;
    let mut resolved = cfg.clone();
    resolved.model.bin_width = data.bin_width();
    resolved.write_snapshot("train")?;
    train_into(resolved.model, &data, &cfg.paths.out)
}

/// Trains `model` on `data`, streaming the log to `<out>/train_log.csv` and
/// writing the final checkpoint to `<out>/model.ckpt`. The bin width is taken
/// from the data.
pub fn train_into(mut model: ModelConfig, data: &SpikeMatrix, out: &Path) -> CliResult<TrainOutcome> {
    model.bin_width = data.bin_width();
    let mut trainer = Trainer::new(model.clone(), data)?;
    create_dir(out)?;
    let log_path = out.join(LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?);
    writeln!(log, "{LOG_HEADER}").map_err(io_err(&log_path))?;
    let mut write_failure = None;
    let result = trainer.run(|row| {
        if write_failure.is_none() {
            if let Err(e) = writeln!(log, "{}", row.to_csv_line()) {
                write_failure = Some(e);
            }
        }
    });
    log.flush().map_err(io_err(&log_path))?;
    if let Some(e) = write_failure {
        return Err(io_err(&log_path)(e));
    }
    let rows = result?;
    let checkpoint = Checkpoint::new(model, trainer.into_state());
    save_checkpoint(&checkpoint, out.join(CHECKPOINT_FILE))?;
    Ok(TrainOutcome { checkpoint, log: rows })
}

pub fn generate(cfg: &RunConfig) -> CliResult<PathBuf> {
    let ckpt_path = cfg.checkpoint_path()?;
    let ckpt = load_checkpoint(ckpt_path)?;
    let output = cfg
        .paths
        .output
        .clone()
        .unwrap_or_else(|| cfg.paths.out.join("generated.spikes"));
    ensure_not_input(&output, &[ckpt_path])?;
    let matrix = generate_matrix(&ckpt, cfg.count, cfg.seed())?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_spikes(&matrix, &output)?;
    create_dir(&cfg.paths.out)?;
    cfg.write_snapshot("generate")?;
    Ok(output)
}

/// `count` generated windows laid side by side, `n x (count * t)`.
pub fn generate_matrix(ckpt: &Checkpoint, count: usize, seed: u64) -> CliResult<SpikeMatrix> {
    if count == 0 {
        return Err(CliError::validation("count must be at least 1 (refusing to write an empty matrix)"));
    }
    let g = &ckpt.config.generator;
    let windows = generator::sample_many(g, &ckpt.state.gen_params, &Streams::new(seed), count)?;
    Ok(SpikeMatrix::from_windows(&windows, ckpt.config.bin_width)?)
}

/// Headline numbers of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mse_kprob: f64,
    pub mse_rate: f64,
    /// `None` when `n * t` is too large for a state histogram.
    pub js: Option<f64>,
}

impl Summary {
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\nmse_kprob,{}\nmse_rate,{}\njs,{}\n",
            self.mse_kprob,
            self.mse_rate,
            self.js.map(|j| j.to_string()).unwrap_or_default()
        )
    }
}

pub fn evaluate(cfg: &RunConfig) -> CliResult<Summary> {
    let generated = load_spikes(cfg.generated_path()?)?;
    let reference = load_spikes(cfg.reference_path()?)?;
    create_dir(&cfg.paths.out)?;
    cfg.write_snapshot("evaluate")?;
    evaluate_into(&cfg.model, &generated, &reference, cfg.max_lag, &cfg.paths.out)
}

/// Compares non-overlapping `n x t` windows of the two rasters. The
/// reference uses the model's neuron subset; a generated raster with exactly
/// `n` rows is read row for row, anything larger through the subset too.
pub fn evaluate_into(
    model: &ModelConfig,
    generated: &SpikeMatrix,
    reference: &SpikeMatrix,
    max_lag: usize,
    out: &Path,
) -> CliResult<Summary> {
    let n = model.generator.n_feature;
    let t = model.generator.n_patches;
    let gen_spec = if generated.neurons() == n {
        WindowSpec::first(n, t)
    } else {
        model.window_spec()
    };
    let gen_windows = generated.tile_windows(&gen_spec)?;
    let ref_windows = reference.tile_windows(&model.window_spec())?;
    let (gw, rw) = (generated.bin_width(), reference.bin_width());
    if (gw - rw).abs() > 1e-12 * gw.max(rw) {
        return Err(CliError::validation(format!(
            "bin widths differ: generated {gw} s, reference {rw} s"
        )));
    }
    let gen_report = build_report(&gen_windows, gw, max_lag)?;
    let ref_report = build_report(&ref_windows, rw, max_lag)?;
    gen_report.write_dir(out.join("generated_stats"))?;
    ref_report.write_dir(out.join("reference_stats"))?;
    let js = if n * t <= MAX_STATE_BITS {
        Some(js_divergence(
            &state_histogram(&gen_windows)?,
            &state_histogram(&ref_windows)?,
        )?)
    } else {
        None
    };
    let summary = Summary {
        mse_kprob: stats_mse(&gen_report.k_probability, &ref_report.k_probability)?,
        mse_rate: stats_mse(&gen_report.firing_rate, &ref_report.firing_rate)?,
        js,
    };
    if !(summary.mse_kprob.is_finite() && summary.mse_rate.is_finite()) {
        return Err(CliError {
            kind: Failure::Numerical,
            message: "evaluation produced a non-finite error".into(),
        });
    }
    let path = out.join(SUMMARY_FILE);
    fs::write(&path, summary.to_csv()).map_err(io_err(&path))?;
    Ok(summary)
}

pub fn surrogate(cfg: &RunConfig) -> CliResult<PathBuf> {
    let output = cfg
        .paths
        .output
        .clone()
        .unwrap_or_else(|| cfg.paths.out.join("surrogate.spikes"));
    let mut rng = Streams::new(cfg.seed()).get(Purpose::Surrogate, 0, 0, 0);
    let matrix = synthesize_surrogate(&cfg.surrogate, &mut rng)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_spikes(&matrix, &output)?;
    create_dir(&cfg.paths.out)?;
    cfg.write_snapshot("surrogate")?;
    Ok(output)
}

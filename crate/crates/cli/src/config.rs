//! Run configuration: one `key = value` document with sections, merged from
//! an optional file, `--set section.key=value` overrides and command flags.
//!
//! Sections and keys (defaults in parentheses):
//!
//! ```text
//! [model]     neurons (2), timesteps (1), layers (4), aux_qubits (0),
//!             noise_low (0), noise_high (pi), resample_noise (false),
//!             neuron_subset (first `neurons` rows), bin_width (0.02)
//! [training]  batch_size (32), lr_gen (0.05), lr_critic (0.002), k (1),
//!             critic_steps_per_gen (2), clip_c (0.01), weight_clipping (true),
//!             total_gen_steps (500), seed (0), js_log_interval (10),
//!             penalty_mode (absolute)
//! [paths]     data, out (out), checkpoint, output, generated, reference
//! [generate]  count (100)
//! [evaluate]  max_lag (10)
//! [surrogate] rates (0.08,0.12), bins (20000), burst_prob (0.9),
//!             burst_gain (3), bin_width (0.02)
//! [sweep]     neurons, timesteps (model values), k_values (0,1),
//!             seeds (training.seed), eval_samples (1000), parallel (false)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use spiqgan::kv::{join_list, KvDoc, KvReader};
use spiqgan::spikedata::SurrogateParams;
use spiqgan::training::ModelConfig;

use crate::error::{CliError, CliResult};

pub const DEFAULT_NEURONS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub generated: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub neurons: Vec<usize>,
    pub timesteps: Vec<usize>,
    pub k_values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Windows generated per cell for evaluation.
    pub eval_samples: usize,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub paths: Paths,
    pub count: usize,
    pub max_lag: usize,
    pub surrogate: SurrogateParams,
    pub sweep: SweepOptions,
    source: KvDoc,
}

fn required<T>(value: Option<T>, key: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::validation(format!("{key} is not set")))
}

impl RunConfig {
    /// Reads `config` (if any), applies `overrides` in order and validates
    /// every section.
    pub fn load(config: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut doc = match config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| spiqgan::Error::io(path, e))?;
                KvDoc::parse(&text)?
            }
            None => KvDoc::new(),
        };
        for spec in overrides {
            doc.set_override(spec)?;
        }
        Self::from_doc(doc)
    }

    pub fn from_doc(mut doc: KvDoc) -> CliResult<Self> {
        if doc.get("model", "neurons").is_none() {
            doc.set("model", "neurons", DEFAULT_NEURONS.to_string());
        }
        let mut r = doc.reader();
        let model = ModelConfig::read_kv(&mut r)?;
        let paths = read_paths(&mut r)?;
        let count = r.get_or("generate", "count", 100)?;
        let max_lag = r.get_or("evaluate", "max_lag", 10)?;
        let surrogate = SurrogateParams {
            rates: r.list("surrogate", "rates")?.unwrap_or_else(|| vec![0.08, 0.12]),
            bins: r.get_or("surrogate", "bins", 20_000)?,
            burst_prob: r.get_or("surrogate", "burst_prob", 0.9)?,
            burst_gain: r.get_or("surrogate", "burst_gain", 3.0)?,
            bin_width: r.get_or("surrogate", "bin_width", 0.02)?,
        };
        surrogate.validate()?;
        let sweep = SweepOptions {
            neurons: r.list("sweep", "neurons")?.unwrap_or_else(|| vec![model.generator.n_feature]),
            timesteps: r.list("sweep", "timesteps")?.unwrap_or_else(|| vec![model.generator.n_patches]),
            k_values: r.list("sweep", "k_values")?.unwrap_or_else(|| vec![0.0, 1.0]),
            seeds: r.list("sweep", "seeds")?.unwrap_or_else(|| vec![model.training.seed]),
            eval_samples: r.get_or("sweep", "eval_samples", 1000)?,
            parallel: r.get_or("sweep", "parallel", false)?,
        };
        r.finish()?;
        if sweep.neurons.is_empty() || sweep.timesteps.is_empty() || sweep.k_values.is_empty() || sweep.seeds.is_empty() {
            return Err(CliError::validation("sweep lists must not be empty"));
        }
        if let Some(k) = sweep.k_values.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(CliError::validation(format!("sweep K value {k} must be non-negative")));
        }
        if sweep.eval_samples == 0 {
            return Err(CliError::validation("sweep.eval_samples must be at least 1"));
        }
        Ok(Self {
            model,
            paths,
            count,
            max_lag,
            surrogate,
            sweep,
            source: doc,
        })
    }

    pub fn seed(&self) -> u64 {
        self.model.training.seed
    }

    pub fn data_path(&self) -> CliResult<&Path> {
        required(self.paths.data.as_deref(), "paths.data")
    }

    pub fn checkpoint_path(&self) -> CliResult<&Path> {
        required(self.paths.checkpoint.as_deref(), "paths.checkpoint")
    }

    pub fn generated_path(&self) -> CliResult<&Path> {
        required(self.paths.generated.as_deref(), "paths.generated")
    }

    pub fn reference_path(&self) -> CliResult<&Path> {
        required(self.paths.reference.as_deref(), "paths.reference")
    }

    /// Model for one sweep cell: the configured model with neurons,
    /// timesteps, K and seed replaced.
    pub fn cell_model(&self, n: usize, t: usize, k: f64, seed: u64) -> CliResult<ModelConfig> {
        let mut doc = self.source.clone();
        doc.set("model", "neurons", n.to_string());
        doc.set("model", "timesteps", t.to_string());
        doc.set("training", "k", k.to_string());
        doc.set("training", "seed", seed.to_string());
        Ok(ModelConfig::read_kv(&mut doc.reader())?)
    }

    /// Every setting with defaults filled in. Feeding this text back through
    /// [`RunConfig::from_doc`] yields an identical configuration.
    pub fn resolved(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        self.model.write_kv(&mut doc);
        let p = &self.paths;
        let path_entries = [
            ("data", &p.data),
            ("checkpoint", &p.checkpoint),
            ("output", &p.output),
            ("generated", &p.generated),
            ("reference", &p.reference),
        ];
        doc.set("paths", "out", p.out.display().to_string());
        for (key, value) in path_entries {
            if let Some(v) = value {
                doc.set("paths", key, v.display().to_string());
            }
        }
        doc.set("generate", "count", self.count.to_string());
        doc.set("evaluate", "max_lag", self.max_lag.to_string());
        let s = &self.surrogate;
        doc.set("surrogate", "rates", join_list(&s.rates));
        doc.set("surrogate", "bins", s.bins.to_string());
        doc.set("surrogate", "burst_prob", s.burst_prob.to_string());
        doc.set("surrogate", "burst_gain", s.burst_gain.to_string());
        doc.set("surrogate", "bin_width", s.bin_width.to_string());
        let w = &self.sweep;
        doc.set("sweep", "neurons", join_list(&w.neurons));
        doc.set("sweep", "timesteps", join_list(&w.timesteps));
        doc.set("sweep", "k_values", join_list(&w.k_values));
        doc.set("sweep", "seeds", join_list(&w.seeds));
        doc.set("sweep", "eval_samples", w.eval_samples.to_string());
        doc.set("sweep", "parallel", w.parallel.to_string());
        doc
    }

    /// Writes the resolved configuration to `<out>/resolved_<command>.ini`.
    pub fn write_snapshot(&self, command: &str) -> CliResult<PathBuf> {
        let path = self.paths.out.join(format!("resolved_{command}.ini"));
        fs::write(&path, self.resolved().to_string()).map_err(|e| spiqgan::Error::io(&path, e))?;
        Ok(path)
    }
}

fn read_paths(r: &mut KvReader<'_>) -> CliResult<Paths> {
    let mut path = |key: &str| -> CliResult<Option<PathBuf>> {
        Ok(r.raw("paths", key).map(PathBuf::from))
    };
    Ok(Paths {
        data: path("data")?,
        out: path("out")?.unwrap_or_else(|| PathBuf::from("out")),
        checkpoint: path("checkpoint")?,
        output: path("output")?,
        generated: path("generated")?,
        reference: path("reference")?,
    })
}

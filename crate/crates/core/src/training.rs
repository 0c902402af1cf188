//! Adversarial training: critic and generator losses, the alternating
//! update schedule, logging and the model configuration snapshot.
//!
//! During training the generator hands the critic its per-neuron spike
//! marginals (a continuous relaxation of the measured bitstring), which makes
//! the generator loss differentiable through the parameter-shift rule. Real
//! samples enter the critic as 0/1 vectors in the same patch-major layout.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::critic::CriticParams;
use crate::error::{config, shape, Error, Result};
use crate::generator::{self, GeneratorConfig, GeneratorParams, NoiseAverage, NoiseVector};
use crate::kv::{join_list, KvDoc, KvReader};
use crate::optim::{adam_step, AdamState};
use crate::rng::{Purpose, Streams};
use crate::spikedata::{sample_windows, SpikeMatrix, Window, WindowSpec, DEFAULT_BIN_WIDTH, MAX_STATE_BITS};
use crate::stats::{js_divergence, state_histogram};

/// How the spike-count term enters the generator loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyMode {
    /// `K * |mean_j(F_j - X_j)|`: the magnitude of the batch spike-count gap.
    Absolute,
    /// `-K * mean_j(F_j - X_j)`, the signed term as written in the loss.
    Signed,
    /// `K * mean_j |F_j - X_j|`: each fake sample against the real sample
    /// sharing its batch index.
    Paired,
}

impl FromStr for PenaltyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(PenaltyMode::Absolute),
            "signed" => Ok(PenaltyMode::Signed),
            "paired" => Ok(PenaltyMode::Paired),
            other => config(format!("unknown penalty mode {other:?} (absolute|signed|paired)")),
        }
    }
}

impl std::fmt::Display for PenaltyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyMode::Absolute => "absolute",
            PenaltyMode::Signed => "signed",
            PenaltyMode::Paired => "paired",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_gen: f64,
    pub lr_critic: f64,
    /// Weight of the spike-count term; 0 gives the plain Wasserstein loss.
    pub k_coeff: f64,
    pub critic_steps_per_gen: usize,
    pub clip_c: f64,
    /// When false the critic is left unconstrained.
    pub weight_clipping: bool,
    pub total_gen_steps: u64,
    pub seed: u64,
    /// JS divergence is logged every this many generator steps (0 = never).
    pub js_log_interval: u64,
    pub penalty_mode: PenaltyMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr_gen: 0.05,
            lr_critic: 0.002,
            k_coeff: 1.0,
            critic_steps_per_gen: 2,
            clip_c: 0.01,
            weight_clipping: true,
            total_gen_steps: 500,
            seed: 0,
            js_log_interval: 10,
            penalty_mode: PenaltyMode::Absolute,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return config("batch_size must be at least 1");
        }
        if !(self.lr_gen > 0.0 && self.lr_gen.is_finite()) {
            return config(format!("lr_gen must be positive, got {}", self.lr_gen));
        }
        if !(self.lr_critic > 0.0 && self.lr_critic.is_finite()) {
            return config(format!("lr_critic must be positive, got {}", self.lr_critic));
        }
        if !(self.k_coeff >= 0.0 && self.k_coeff.is_finite()) {
            return config(format!("k must be non-negative, got {}", self.k_coeff));
        }
        if self.weight_clipping && !(self.clip_c > 0.0) {
            return config(format!("clip constant must be positive, got {}", self.clip_c));
        }
        Ok(())
    }
}

/// Everything that defines a model: ansatz, training hyperparameters, the
/// neuron rows it was trained on and the data's bin width.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub generator: GeneratorConfig,
    pub training: TrainConfig,
    pub neuron_subset: Vec<usize>,
    pub bin_width: f64,
}

impl ModelConfig {
    /// Defaults for `n` neurons (the first `n` rows) and `t` timesteps.
    pub fn new(n: usize, t: usize) -> Self {
        Self {
            generator: GeneratorConfig::new(n, t),
            training: TrainConfig::default(),
            neuron_subset: (0..n).collect(),
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            neurons: self.neuron_subset.clone(),
            window_len: self.generator.n_patches,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.training.validate()?;
        if self.neuron_subset.len() != self.generator.n_feature {
            return config(format!(
                "neuron subset lists {} rows but the generator has {} feature qubits",
                self.neuron_subset.len(),
                self.generator.n_feature
            ));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return config(format!("bin width must be positive, got {}", self.bin_width));
        }
        Ok(())
    }

    pub fn write_kv(&self, doc: &mut KvDoc) {
        let g = &self.generator;
        doc.set("model", "neurons", g.n_feature.to_string());
        doc.set("model", "timesteps", g.n_patches.to_string());
        doc.set("model", "layers", g.n_layers.to_string());
        doc.set("model", "aux_qubits", g.n_aux.to_string());
        doc.set("model", "noise_low", g.noise_low.to_string());
        doc.set("model", "noise_high", g.noise_high.to_string());
        doc.set("model", "resample_noise", g.resample_noise_per_layer.to_string());
        doc.set("model", "neuron_subset", join_list(&self.neuron_subset));
        doc.set("model", "bin_width", self.bin_width.to_string());
        let t = &self.training;
        doc.set("training", "batch_size", t.batch_size.to_string());
        doc.set("training", "lr_gen", t.lr_gen.to_string());
        doc.set("training", "lr_critic", t.lr_critic.to_string());
        doc.set("training", "k", t.k_coeff.to_string());
        doc.set("training", "critic_steps_per_gen", t.critic_steps_per_gen.to_string());
        doc.set("training", "clip_c", t.clip_c.to_string());
        doc.set("training", "weight_clipping", t.weight_clipping.to_string());
        doc.set("training", "total_gen_steps", t.total_gen_steps.to_string());
        doc.set("training", "seed", t.seed.to_string());
        doc.set("training", "js_log_interval", t.js_log_interval.to_string());
        doc.set("training", "penalty_mode", t.penalty_mode.to_string());
    }

    /// Reads the `[model]` and `[training]` sections; absent keys take their
    /// defaults, `model.neurons` is required.
    pub fn read_kv(r: &mut KvReader<'_>) -> Result<Self> {
        let n: usize = r.require("model", "neurons")?;
        let t: usize = r.get_or("model", "timesteps", 1)?;
        let base = ModelConfig::new(n, t);
        let g = &base.generator;
        let generator = GeneratorConfig {
            n_feature: n,
            n_patches: t,
            n_layers: r.get_or("model", "layers", g.n_layers)?,
            n_aux: r.get_or("model", "aux_qubits", g.n_aux)?,
            noise_low: r.get_or("model", "noise_low", g.noise_low)?,
            noise_high: r.get_or("model", "noise_high", g.noise_high)?,
            resample_noise_per_layer: r.get_or("model", "resample_noise", g.resample_noise_per_layer)?,
        };
        let neuron_subset = r.list("model", "neuron_subset")?.unwrap_or(base.neuron_subset);
        let bin_width = r.get_or("model", "bin_width", base.bin_width)?;
        let d = TrainConfig::default();
        let training = TrainConfig {
            batch_size: r.get_or("training", "batch_size", d.batch_size)?,
            lr_gen: r.get_or("training", "lr_gen", d.lr_gen)?,
            lr_critic: r.get_or("training", "lr_critic", d.lr_critic)?,
            k_coeff: r.get_or("training", "k", d.k_coeff)?,
            critic_steps_per_gen: r.get_or("training", "critic_steps_per_gen", d.critic_steps_per_gen)?,
            clip_c: r.get_or("training", "clip_c", d.clip_c)?,
            weight_clipping: r.get_or("training", "weight_clipping", d.weight_clipping)?,
            total_gen_steps: r.get_or("training", "total_gen_steps", d.total_gen_steps)?,
            seed: r.get_or("training", "seed", d.seed)?,
            js_log_interval: r.get_or("training", "js_log_interval", d.js_log_interval)?,
            penalty_mode: r.get_or("training", "penalty_mode", d.penalty_mode)?,
        };
        let cfg = ModelConfig {
            generator,
            training,
            neuron_subset,
            bin_width,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let mut doc = KvDoc::new();
        self.write_kv(&mut doc);
        doc.to_string()
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text)?;
        let mut r = doc.reader();
        let cfg = Self::read_kv(&mut r)?;
        r.finish()?;
        Ok(cfg)
    }
}

fn check_batch(lens: &[usize]) -> Result<usize> {
    let b = lens[0];
    if lens.iter().any(|&l| l != b) {
        return shape(format!("batch vectors have differing lengths {lens:?}"));
    }
    if b == 0 {
        return config("empty batch");
    }
    Ok(b)
}

/// `(1 / 2B) * sum_j (C(fake_j) - C(real_j))`.
pub fn critic_loss(c_fake: &[f64], c_real: &[f64]) -> Result<f64> {
    let b = check_batch(&[c_fake.len(), c_real.len()])?;
    Ok(c_fake.iter().zip(c_real).map(|(f, r)| f - r).sum::<f64>() / (2.0 * b as f64))
}

/// Generator loss: `-(1/B) sum_j C(fake_j)` plus the spike-count term.
///
/// `fake_counts[j]` is the expected spike count of fake sample `j` (sum of
/// its marginals) and `real_counts[j]` the spike count of real sample `j`.
/// See [`PenaltyMode`] for the forms of the count term.
pub fn generator_loss(
    c_fake: &[f64],
    fake_counts: &[f64],
    real_counts: &[f64],
    k: f64,
    mode: PenaltyMode,
) -> Result<f64> {
    let b = check_batch(&[c_fake.len(), fake_counts.len(), real_counts.len()])? as f64;
    let critic_term = -c_fake.iter().sum::<f64>() / b;
    let gap = count_gap(fake_counts, real_counts);
    Ok(match mode {
        PenaltyMode::Absolute => critic_term + k * gap.abs(),
        PenaltyMode::Signed => critic_term - k * gap,
        PenaltyMode::Paired => {
            critic_term + k * fake_counts.iter().zip(real_counts).map(|(f, r)| (f - r).abs()).sum::<f64>() / b
        }
    })
}

/// Derivative of the count term with respect to each fake count `F_j`;
/// every marginal of sample `j` inherits entry `j`. Zero at an exact tie.
pub fn count_term_gradient(fake_counts: &[f64], real_counts: &[f64], k: f64, mode: PenaltyMode) -> Vec<f64> {
    let b = fake_counts.len() as f64;
    match mode {
        PenaltyMode::Absolute => {
            let g = k * sign(count_gap(fake_counts, real_counts)) / b;
            vec![g; fake_counts.len()]
        }
        PenaltyMode::Signed => vec![-k / b; fake_counts.len()],
        PenaltyMode::Paired => fake_counts
            .iter()
            .zip(real_counts)
            .map(|(f, r)| k * sign(f - r) / b)
            .collect(),
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean of `fake - real` over the batch.
fn count_gap(fake_counts: &[f64], real_counts: &[f64]) -> f64 {
    fake_counts
        .iter()
        .zip(real_counts)
        .map(|(f, r)| f - r)
        .sum::<f64>()
        / fake_counts.len() as f64
}

/// Mutable state of a run. `critic_updates` and `gen_steps` key the random
/// sub-streams, so together with the seed they are the full RNG state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub gen_params: GeneratorParams,
    pub critic_params: CriticParams,
    pub gen_adam: AdamState,
    pub critic_adam: AdamState,
    pub gen_steps: u64,
    pub critic_updates: u64,
}

impl TrainState {
    pub fn init(cfg: &ModelConfig) -> Self {
        let streams = Streams::new(cfg.training.seed);
        let gen_params = generator::init_params(
            &cfg.generator,
            &mut streams.get(Purpose::GeneratorInit, 0, 0, 0),
        );
        let critic_params = CriticParams::init(
            cfg.generator.output_len(),
            &mut streams.get(Purpose::CriticInit, 0, 0, 0),
        );
        Self {
            gen_adam: AdamState::new(gen_params.len()),
            critic_adam: AdamState::new(critic_params.as_slice().len()),
            gen_params,
            critic_params,
            gen_steps: 0,
            critic_updates: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub loss_critic: f64,
    pub loss_gen: f64,
    /// Batch mean of expected fake spike count minus real spike count.
    pub count_gap: f64,
    pub js_divergence: Option<f64>,
}

pub const LOG_HEADER: &str = "step,loss_critic,loss_gen,count_gap,js_divergence";

impl LogRow {
    pub fn to_csv_line(&self) -> String {
        let js = self.js_divergence.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.step, self.loss_critic, self.loss_gen, self.count_gap, js
        )
    }
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv_line());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub count_gap: f64,
}

pub struct Trainer<'a> {
    cfg: ModelConfig,
    data: &'a SpikeMatrix,
    streams: Streams,
    state: TrainState,
    reference: Option<Vec<f64>>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: ModelConfig, data: &'a SpikeMatrix) -> Result<Self> {
        let state = TrainState::init(&cfg);
        Self::with_state(cfg, data, state)
    }

    pub fn with_state(cfg: ModelConfig, data: &'a SpikeMatrix, state: TrainState) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.window_spec();
        if data.neurons() < cfg.generator.n_feature || data.bins() < cfg.generator.n_patches {
            return config(format!(
                "data is {} x {}, model needs at least {} neurons and {} bins",
                data.neurons(),
                data.bins(),
                cfg.generator.n_feature,
                cfg.generator.n_patches
            ));
        }
        spec.validate(data)?;
        if state.gen_params.len() != cfg.generator.param_count()
            || state.critic_params.input_dim() != cfg.generator.output_len()
        {
            return shape("training state does not match the model configuration");
        }
        let reference = if cfg.generator.output_len() <= MAX_STATE_BITS && cfg.training.js_log_interval > 0 {
            Some(state_histogram(&data.all_windows(&spec)?)?)
        } else {
            None
        };
        Ok(Self {
            streams: Streams::new(cfg.training.seed),
            cfg,
            data,
            state,
            reference,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut TrainState {
        &mut self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    fn real_batch(&self, purpose: Purpose, step: u64) -> Result<Vec<Window>> {
        let mut rng = self.streams.get(purpose, step, 0, 0);
        sample_windows(self.data, &self.cfg.window_spec(), self.cfg.training.batch_size, &mut rng)
    }

    fn noise_batch(&self, purpose: Purpose, step: u64) -> Vec<NoiseVector> {
        (0..self.cfg.training.batch_size as u64)
            .map(|j| NoiseVector::sample_streams(&self.cfg.generator, &self.streams, purpose, step, j))
            .collect()
    }

    fn fake_batch(&self, noise: &[NoiseVector]) -> Result<Vec<Vec<f64>>> {
        let g = &self.cfg.generator;
        let params = &self.state.gen_params;
        noise
            .par_iter()
            .map(|z| generator::forward(g, params, z))
            .collect()
    }

    /// The batch the next critic update will see: real windows and noise.
    pub fn critic_inputs(&self) -> Result<(Vec<Window>, Vec<NoiseVector>)> {
        let step = self.state.critic_updates;
        Ok((
            self.real_batch(Purpose::CriticWindows, step)?,
            self.noise_batch(Purpose::CriticNoise, step),
        ))
    }

    /// The batch the next generator update will see.
    pub fn generator_inputs(&self) -> Result<(Vec<Window>, Vec<NoiseVector>)> {
        let step = self.state.gen_steps;
        Ok((
            self.real_batch(Purpose::GeneratorWindows, step)?,
            self.noise_batch(Purpose::GeneratorNoise, step),
        ))
    }

    /// Gradient of the critic loss with respect to the critic weights for a
    /// given batch, along with the loss. Generator parameters are read only.
    pub fn critic_gradient(&self, real: &[Window], noise: &[NoiseVector]) -> Result<(f64, Vec<f64>)> {
        let fakes = self.fake_batch(noise)?;
        let critic = &self.state.critic_params;
        let scale = 1.0 / (2.0 * real.len() as f64);
        let mut grad = vec![0.0; critic.as_slice().len()];
        let mut c_fake = Vec::with_capacity(fakes.len());
        let mut c_real = Vec::with_capacity(real.len());
        for (fake, window) in fakes.iter().zip(real) {
            let x = window.to_f64();
            c_fake.push(critic.forward(fake)?);
            c_real.push(critic.forward(&x)?);
            let (gf, _) = critic.backward(fake)?;
            let (gr, _) = critic.backward(&x)?;
            for ((g, a), b) in grad.iter_mut().zip(gf.as_slice()).zip(gr.as_slice()) {
                *g += scale * (a - b);
            }
        }
        Ok((critic_loss(&c_fake, &c_real)?, grad))
    }

    /// One critic update: Adam on the critic loss, then weight clipping.
    pub fn critic_step(&mut self) -> Result<f64> {
        let (real, noise) = self.critic_inputs()?;
        let (loss, grad) = self.critic_gradient(&real, &noise)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("critic loss is {loss}")));
        }
        let t = &self.cfg.training;
        adam_step(
            self.state.critic_params.as_mut_slice(),
            &grad,
            &mut self.state.critic_adam,
            t.lr_critic,
        )?;
        if t.weight_clipping {
            self.state.critic_params.clip_weights(t.clip_c)?;
        }
        self.state.critic_updates += 1;
        Ok(loss)
    }

    /// Loss and its gradient with respect to every generator angle for a
    /// given batch. The critic is read only.
    pub fn generator_gradient(
        &self,
        real: &[Window],
        noise: &[NoiseVector],
    ) -> Result<(StepOutcome, GeneratorParams)> {
        let g = &self.cfg.generator;
        let t = &self.cfg.training;
        let b = real.len() as f64;
        let fakes = self.fake_batch(noise)?;
        let critic = &self.state.critic_params;
        let mut c_fake = Vec::with_capacity(fakes.len());
        let mut input_grads = Vec::with_capacity(fakes.len());
        for fake in &fakes {
            c_fake.push(critic.forward(fake)?);
            input_grads.push(critic.backward(fake)?.1);
        }
        let fake_counts: Vec<f64> = fakes.iter().map(|f| f.iter().sum()).collect();
        let real_counts: Vec<f64> = real.iter().map(|w| w.spike_count() as f64).collect();
        let loss = generator_loss(&c_fake, &fake_counts, &real_counts, t.k_coeff, t.penalty_mode)?;
        let count_grad = count_term_gradient(&fake_counts, &real_counts, t.k_coeff, t.penalty_mode);

        let params = &self.state.gen_params;
        let per_sample: Vec<GeneratorParams> = input_grads
            .par_iter()
            .zip(noise.par_iter())
            .zip(count_grad.par_iter())
            .map(|((ig, z), cg)| {
                let upstream: Vec<f64> = ig.iter().map(|d| -d / b + cg).collect();
                generator::param_shift_gradient(g, params, z, &upstream)
            })
            .collect::<Result<_>>()?;
        let mut grad = GeneratorParams::zeros(g);
        for sample in &per_sample {
            for (acc, v) in grad.as_mut_slice().iter_mut().zip(sample.as_slice()) {
                *acc += v;
            }
        }
        let outcome = StepOutcome {
            loss,
            count_gap: count_gap(&fake_counts, &real_counts),
        };
        Ok((outcome, grad))
    }

    /// One generator update with the critic frozen.
    pub fn generator_step(&mut self) -> Result<StepOutcome> {
        let (real, noise) = self.generator_inputs()?;
        let (outcome, grad) = self.generator_gradient(&real, &noise)?;
        if !outcome.loss.is_finite() {
            return Err(Error::Numerical(format!("generator loss is {}", outcome.loss)));
        }
        adam_step(
            self.state.gen_params.as_mut_slice(),
            grad.as_slice(),
            &mut self.state.gen_adam,
            self.cfg.training.lr_gen,
        )?;
        self.state.gen_steps += 1;
        Ok(outcome)
    }

    /// JS divergence (bits) between the generator's noise-averaged output
    /// distribution and the state histogram of every data window. `None`
    /// when `n * t` is too large for a histogram.
    pub fn js_divergence(&self) -> Result<Option<f64>> {
        let Some(reference) = &self.reference else {
            return Ok(None);
        };
        let g = &self.cfg.generator;
        let dist = generator::output_distribution(g, &self.state.gen_params, NoiseAverage::auto(g))?;
        js_divergence(&dist, reference).map(Some)
    }

    /// One round: `critic_steps_per_gen` critic updates then one generator
    /// update.
    pub fn round(&mut self) -> Result<LogRow> {
        let mut loss_critic = f64::NAN;
        for _ in 0..self.cfg.training.critic_steps_per_gen {
            loss_critic = self.critic_step()?;
        }
        let outcome = self.generator_step()?;
        let step = self.state.gen_steps;
        let interval = self.cfg.training.js_log_interval;
        let log_js = interval > 0
            && (step == 1 || step % interval == 0 || step == self.cfg.training.total_gen_steps);
        let js_divergence = if log_js { self.js_divergence()? } else { None };
        Ok(LogRow {
            step,
            loss_critic,
            loss_gen: outcome.loss,
            count_gap: outcome.count_gap,
            js_divergence,
        })
    }

    /// Runs rounds until `total_gen_steps` generator updates have happened,
    /// handing each log row to `on_row` as it is produced.
    pub fn run(&mut self, mut on_row: impl FnMut(&LogRow)) -> Result<Vec<LogRow>> {
        let mut rows = Vec::new();
        while self.state.gen_steps < self.cfg.training.total_gen_steps {
            let row = self.round()?;
            on_row(&row);
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Trains from a fresh initialization.
pub fn train(cfg: &ModelConfig, data: &SpikeMatrix) -> Result<(TrainState, Vec<LogRow>)> {
    let mut trainer = Trainer::new(cfg.clone(), data)?;
    let rows = trainer.run(|_| {})?;
    Ok((trainer.into_state(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spikedata::{synthesize_surrogate, SurrogateParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn critic_loss_values() {
        assert_eq!(critic_loss(&[0.4, -1.0], &[0.4, -1.0]).unwrap(), 0.0);
        assert!((critic_loss(&[0.3], &[0.5]).unwrap() + 0.1).abs() < 1e-15);
        assert_eq!(critic_loss(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert!(critic_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(critic_loss(&[], &[]).is_err());
    }

    #[test]
    fn generator_loss_values() {
        let abs = PenaltyMode::Absolute;
        assert!((generator_loss(&[0.3], &[2.0], &[1.0], 0.0, abs).unwrap() + 0.3).abs() < 1e-15);
        assert!((generator_loss(&[0.3], &[5.0], &[3.0], 1.0, abs).unwrap() - 1.7).abs() < 1e-15);
        assert_eq!(
            generator_loss(&[0.3, 0.1], &[2.0, 1.0], &[2.0, 1.0], 1.0, abs).unwrap(),
            generator_loss(&[0.3, 0.1], &[2.0, 1.0], &[2.0, 1.0], 0.0, abs).unwrap()
        );
        // signed: fewer fake spikes than real raises the loss
        assert!((generator_loss(&[0.3], &[1.0], &[3.0], 1.0, PenaltyMode::Signed).unwrap() - 1.7).abs() < 1e-15);
        assert!(generator_loss(&[0.3], &[1.0, 2.0], &[3.0], 1.0, abs).is_err());
        let paired = PenaltyMode::Paired;
        assert!((generator_loss(&[0.3], &[5.0], &[3.0], 1.0, paired).unwrap() - 1.7).abs() < 1e-15);
        let l = generator_loss(&[0.0, 0.0], &[2.0, 0.0], &[1.0, 1.0], 1.0, paired).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(generator_loss(&[0.0, 0.0], &[2.0, 0.0], &[1.0, 1.0], 1.0, abs).unwrap(), 0.0);
        for m in ["absolute", "signed", "paired"] {
            assert_eq!(m.parse::<PenaltyMode>().unwrap().to_string(), m);
        }
        assert!("bogus".parse::<PenaltyMode>().is_err());
    }

    #[test]
    fn count_term_gradient_sign() {
        let abs = PenaltyMode::Absolute;
        assert_eq!(count_term_gradient(&[3.0, 2.0], &[1.0, 1.0], 1.0, abs), vec![0.5, 0.5]);
        assert_eq!(count_term_gradient(&[0.0, 0.0], &[1.0, 1.0], 1.0, abs), vec![-0.5, -0.5]);
        // batch gap is zero even though each pair differs
        assert_eq!(count_term_gradient(&[2.0, 0.0], &[1.0, 1.0], 1.0, abs), vec![0.0, 0.0]);
        assert_eq!(count_term_gradient(&[1.0], &[1.0], 1.0, abs), vec![0.0]);
        assert_eq!(count_term_gradient(&[1.0], &[1.0], 2.0, PenaltyMode::Signed), vec![-2.0]);
        let paired = count_term_gradient(&[2.0, 0.0, 1.0, 1.5], &[1.0, 1.0, 1.0, 2.0], 1.0, PenaltyMode::Paired);
        assert_eq!(paired, vec![0.25, -0.25, 0.0, -0.25]);
    }

    fn small_data(seed: u64) -> SpikeMatrix {
        let p = SurrogateParams {
            rates: vec![0.15, 0.25, 0.2],
            bins: 2000,
            burst_prob: 0.9,
            burst_gain: 2.5,
            bin_width: 0.02,
        };
        synthesize_surrogate(&p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn tiny_config() -> ModelConfig {
        let mut cfg = ModelConfig::new(2, 1);
        cfg.generator.n_layers = 2;
        cfg.training.batch_size = 2;
        cfg.training.total_gen_steps = 3;
        cfg.training.seed = 5;
        cfg
    }

    #[test]
    fn defaults_match_published_hyperparameters() {
        let t = TrainConfig::default();
        assert_eq!(t.batch_size, 32);
        assert_eq!(t.lr_gen, 0.05);
        assert_eq!(t.lr_critic, 0.002);
        assert_eq!(t.critic_steps_per_gen, 2);
        assert_eq!(t.k_coeff, 1.0);
    }

    #[test]
    fn config_round_trips_through_text() {
        let mut cfg = tiny_config();
        cfg.neuron_subset = vec![2, 0];
        cfg.training.penalty_mode = PenaltyMode::Signed;
        cfg.generator.noise_high = 2.9;
        cfg.bin_width = 0.001;
        let text = cfg.to_kv_string();
        assert_eq!(ModelConfig::from_kv_str(&text).unwrap(), cfg);
        assert!(ModelConfig::from_kv_str(&format!("{text}\n[training]\nbogus = 1\n")).is_err());
        assert!(ModelConfig::from_kv_str("[model]\nneurons = 2\nneuron_subset = 0\n").is_err());
    }

    #[test]
    fn zero_critic_gives_zero_first_loss() {
        let data = small_data(1);
        let mut trainer = Trainer::new(tiny_config(), &data).unwrap();
        trainer.state_mut().critic_params = CriticParams::zeros(2);
        assert_eq!(trainer.critic_step().unwrap(), 0.0);
    }

    #[test]
    fn steps_are_deterministic() {
        let data = small_data(1);
        let mut a = Trainer::new(tiny_config(), &data).unwrap();
        let mut b = Trainer::new(tiny_config(), &data).unwrap();
        a.critic_step().unwrap();
        b.critic_step().unwrap();
        assert_eq!(a.state(), b.state());
        a.generator_step().unwrap();
        b.generator_step().unwrap();
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn updates_freeze_the_other_network() {
        let data = small_data(2);
        let mut trainer = Trainer::new(tiny_config(), &data).unwrap();
        let gen_before = trainer.state().gen_params.clone();
        trainer.critic_step().unwrap();
        assert_eq!(trainer.state().gen_params, gen_before);
        let critic_before = trainer.state().critic_params.clone();
        trainer.generator_step().unwrap();
        assert_eq!(trainer.state().critic_params, critic_before);
        assert_ne!(trainer.state().gen_params, gen_before);
    }

    #[test]
    fn critic_weights_stay_clipped() {
        let data = small_data(3);
        let mut trainer = Trainer::new(tiny_config(), &data).unwrap();
        for _ in 0..3 {
            trainer.critic_step().unwrap();
        }
        assert!(trainer.state().critic_params.as_slice().iter().all(|w| w.abs() <= 0.01));
    }

    #[test]
    fn no_critic_no_k_means_no_update() {
        let data = small_data(4);
        let mut cfg = tiny_config();
        cfg.training.k_coeff = 0.0;
        let mut trainer = Trainer::new(cfg, &data).unwrap();
        trainer.state_mut().critic_params = CriticParams::zeros(2);
        let before = trainer.state().gen_params.clone();
        trainer.generator_step().unwrap();
        assert_eq!(trainer.state().gen_params, before);
    }

    #[test]
    fn schedule_runs_two_critic_updates_per_generator_update() {
        let data = small_data(5);
        let mut trainer = Trainer::new(tiny_config(), &data).unwrap();
        let rows = trainer.run(|_| {}).unwrap();
        assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(trainer.state().gen_steps, 3);
        assert_eq!(trainer.state().critic_updates, 6);
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let data = small_data(6);
        let mut cfg = tiny_config();
        cfg.training.total_gen_steps = 0;
        let (state, rows) = train(&cfg, &data).unwrap();
        assert!(rows.is_empty());
        assert_eq!(state, TrainState::init(&cfg));
    }

    #[test]
    fn data_must_cover_the_model() {
        let data = small_data(7);
        let mut cfg = ModelConfig::new(4, 1);
        cfg.training.batch_size = 2;
        assert!(matches!(Trainer::new(cfg, &data), Err(Error::Config(_))));
        let mut cfg = ModelConfig::new(2, 3000);
        cfg.training.batch_size = 2;
        assert!(Trainer::new(cfg, &data).is_err());
    }

    #[test]
    fn log_format() {
        let rows = vec![
            LogRow { step: 1, loss_critic: -0.5, loss_gen: 0.25, count_gap: 0.1, js_divergence: Some(0.3) },
            LogRow { step: 2, loss_critic: 0.0, loss_gen: 1.0, count_gap: -0.1, js_divergence: None },
        ];
        assert_eq!(
            log_csv(&rows),
            "step,loss_critic,loss_gen,count_gap,js_divergence\n1,-0.5,0.25,0.1,0.3\n2,0,1,-0.1,\n"
        );
    }
}

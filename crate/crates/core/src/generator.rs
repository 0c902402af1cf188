//! Patch quantum generator.
//!
//! `n_patches` sub-generators share one re-uploading ansatz with independent
//! parameters. Sub-generator `p` produces the spike state of the
//! `n_feature` neurons at timestep `p`; concatenating the patches stacks the
//! timesteps of the sample.
//!
//! Each layer of a patch circuit is
//!
//! ```text
//! RX(z_k) on every qubit k           noise encoding (re-uploaded each layer)
//! RY(theta[l][k][0]) RZ(theta[l][k][1]) on every qubit k
//! CNOT(k, k+1) for k in 0..q-1       open nearest-neighbour chain
//! ```
//!
//! Feature qubits are indices `0..n_feature`; auxiliary qubits sit above them
//! and are discarded at measurement.
//!
//! Outputs are laid out patch-major: entry `p * n_feature + k` is neuron `k`
//! at timestep `p`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{config, shape, Result};
use crate::quadrature::gauss_legendre;
use crate::rng::{Purpose, Streams};
use crate::spikedata::Window;
use crate::statevec::{sample_from_probabilities, Gate, StateVector, MAX_QUBITS};

pub const DEFAULT_LAYERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_feature: usize,
    pub n_aux: usize,
    pub n_layers: usize,
    pub n_patches: usize,
    pub noise_low: f64,
    pub noise_high: f64,
    /// Draw an independent noise vector for every layer instead of
    /// re-uploading the same one.
    pub resample_noise_per_layer: bool,
}

impl GeneratorConfig {
    /// Default ansatz (4 layers, no auxiliary qubits, noise in `[0, pi]`).
    pub fn new(n_feature: usize, n_patches: usize) -> Self {
        Self {
            n_feature,
            n_aux: 0,
            n_layers: DEFAULT_LAYERS,
            n_patches,
            noise_low: 0.0,
            noise_high: PI,
            resample_noise_per_layer: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_feature == 0 {
            return config("n_feature must be at least 1");
        }
        if self.n_patches == 0 {
            return config("n_patches must be at least 1");
        }
        if self.n_layers == 0 {
            return config("n_layers must be at least 1");
        }
        if self.qubits() > MAX_QUBITS {
            return config(format!(
                "{} qubits per patch exceeds the simulator limit of {MAX_QUBITS}",
                self.qubits()
            ));
        }
        if !(self.noise_low.is_finite() && self.noise_high.is_finite())
            || self.noise_low > self.noise_high
        {
            return config(format!(
                "invalid noise interval [{}, {}]",
                self.noise_low, self.noise_high
            ));
        }
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        self.n_feature + self.n_aux
    }

    /// Output width: neurons times timesteps.
    pub fn output_len(&self) -> usize {
        self.n_feature * self.n_patches
    }

    pub fn params_per_patch(&self) -> usize {
        self.n_layers * self.qubits() * 2
    }

    pub fn param_count(&self) -> usize {
        self.params_per_patch() * self.n_patches
    }

    fn noise_slots(&self) -> usize {
        if self.resample_noise_per_layer {
            self.n_layers
        } else {
            1
        }
    }

    pub fn noise_per_patch(&self) -> usize {
        self.noise_slots() * self.qubits()
    }
}

/// Rotation angles laid out `[patch][layer][qubit][axis]`, axis 0 = RY, 1 = RZ.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    theta: Vec<f64>,
    per_patch: usize,
}

impl GeneratorParams {
    pub fn zeros(cfg: &GeneratorConfig) -> Self {
        Self {
            theta: vec![0.0; cfg.param_count()],
            per_patch: cfg.params_per_patch(),
        }
    }

    pub fn from_vec(cfg: &GeneratorConfig, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != cfg.param_count() {
            return shape(format!(
                "generator expects {} parameters, got {}",
                cfg.param_count(),
                theta.len()
            ));
        }
        Ok(Self {
            theta,
            per_patch: cfg.params_per_patch(),
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn patch(&self, p: usize) -> &[f64] {
        &self.theta[p * self.per_patch..(p + 1) * self.per_patch]
    }

    pub fn patch_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.theta[p * self.per_patch..(p + 1) * self.per_patch]
    }
}

/// Noise angles laid out `[patch][slot][qubit]`; there is one slot unless
/// noise is resampled per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    z: Vec<f64>,
    per_patch: usize,
}

impl NoiseVector {
    pub fn sample<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Self {
        let z = (0..cfg.n_patches * cfg.noise_per_patch())
            .map(|_| uniform(rng, cfg.noise_low, cfg.noise_high))
            .collect();
        Self {
            z,
            per_patch: cfg.noise_per_patch(),
        }
    }

    /// One noise draw per patch, each from its own stream, so patch `p`'s
    /// angles do not depend on how many patches precede it.
    pub fn sample_streams(
        cfg: &GeneratorConfig,
        streams: &Streams,
        purpose: Purpose,
        step: u64,
        index: u64,
    ) -> Self {
        let per_patch = cfg.noise_per_patch();
        let mut z = Vec::with_capacity(cfg.n_patches * per_patch);
        for p in 0..cfg.n_patches {
            let mut rng = streams.get(purpose, step, index, p as u64);
            z.extend((0..per_patch).map(|_| uniform(&mut rng, cfg.noise_low, cfg.noise_high)));
        }
        Self { z, per_patch }
    }

    pub fn from_vec(cfg: &GeneratorConfig, z: Vec<f64>) -> Result<Self> {
        let expect = cfg.n_patches * cfg.noise_per_patch();
        if z.len() != expect {
            return shape(format!("noise expects {expect} angles, got {}", z.len()));
        }
        Ok(Self {
            z,
            per_patch: cfg.noise_per_patch(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn patch(&self, p: usize) -> &[f64] {
        &self.z[p * self.per_patch..(p + 1) * self.per_patch]
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.gen::<f64>()
}

/// Every angle i.i.d. uniform in `[0, 2 pi)`.
pub fn init_params<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> GeneratorParams {
    let theta = (0..cfg.param_count()).map(|_| TAU * rng.gen::<f64>()).collect();
    GeneratorParams {
        theta,
        per_patch: cfg.params_per_patch(),
    }
}

pub fn build_patch_circuit(
    cfg: &GeneratorConfig,
    theta_patch: &[f64],
    z_patch: &[f64],
) -> Result<Vec<Gate>> {
    check_patch_shapes(cfg, theta_patch, z_patch)?;
    let q = cfg.qubits();
    let cnots = q.saturating_sub(1);
    let mut gates = Vec::with_capacity(cfg.n_layers * (3 * q + cnots));
    for layer in 0..cfg.n_layers {
        let slot = if cfg.resample_noise_per_layer { layer } else { 0 };
        for k in 0..q {
            gates.push(Gate::Rx {
                target: k,
                angle: z_patch[slot * q + k],
            });
        }
        for k in 0..q {
            let base = (layer * q + k) * 2;
            gates.push(Gate::Ry {
                target: k,
                angle: theta_patch[base],
            });
            gates.push(Gate::Rz {
                target: k,
                angle: theta_patch[base + 1],
            });
        }
        for k in 0..cnots {
            gates.push(Gate::Cnot {
                control: k,
                target: k + 1,
            });
        }
    }
    Ok(gates)
}

fn check_patch_shapes(cfg: &GeneratorConfig, theta_patch: &[f64], z_patch: &[f64]) -> Result<()> {
    if theta_patch.len() != cfg.params_per_patch() {
        return shape(format!(
            "patch expects {} parameters, got {}",
            cfg.params_per_patch(),
            theta_patch.len()
        ));
    }
    if z_patch.len() != cfg.noise_per_patch() {
        return shape(format!(
            "patch expects {} noise angles, got {}",
            cfg.noise_per_patch(),
            z_patch.len()
        ));
    }
    Ok(())
}

/// Final state of one patch circuit started from `|0...0>`.
pub fn patch_state(cfg: &GeneratorConfig, theta_patch: &[f64], z_patch: &[f64]) -> Result<StateVector> {
    let gates = build_patch_circuit(cfg, theta_patch, z_patch)?;
    let mut state = StateVector::zero(cfg.qubits())?;
    state.apply_circuit(&gates)?;
    Ok(state)
}

/// Probability of a spike on each feature qubit of one patch.
pub fn patch_marginals(cfg: &GeneratorConfig, theta_patch: &[f64], z_patch: &[f64]) -> Result<Vec<f64>> {
    patch_state(cfg, theta_patch, z_patch)?.marginals(cfg.n_feature)
}

fn check_shapes(cfg: &GeneratorConfig, params: &GeneratorParams, noise: &NoiseVector) -> Result<()> {
    if params.len() != cfg.param_count() {
        return shape(format!(
            "generator expects {} parameters, got {}",
            cfg.param_count(),
            params.len()
        ));
    }
    let expect = cfg.n_patches * cfg.noise_per_patch();
    if noise.as_slice().len() != expect {
        return shape(format!(
            "noise expects {expect} angles, got {}",
            noise.as_slice().len()
        ));
    }
    Ok(())
}

/// Concatenated per-patch marginals, length `n_feature * n_patches`.
pub fn forward(cfg: &GeneratorConfig, params: &GeneratorParams, noise: &NoiseVector) -> Result<Vec<f64>> {
    check_shapes(cfg, params, noise)?;
    let mut out = Vec::with_capacity(cfg.output_len());
    for p in 0..cfg.n_patches {
        out.extend(patch_marginals(cfg, params.patch(p), noise.patch(p))?);
    }
    Ok(out)
}

/// Measures every patch once. Auxiliary bits are dropped.
pub fn sample<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    params: &GeneratorParams,
    noise: &NoiseVector,
    rng: &mut R,
) -> Result<Window> {
    check_shapes(cfg, params, noise)?;
    let mut bits = Vec::with_capacity(cfg.output_len());
    for p in 0..cfg.n_patches {
        let state = patch_state(cfg, params.patch(p), noise.patch(p))?;
        let index = state.sample_index(rng);
        bits.extend((0..cfg.n_feature).map(|k| (index >> k & 1) as u8));
    }
    Window::new(cfg.n_feature, cfg.n_patches, bits)
}

/// `count` independent samples, each with fresh noise. Sample `i` reads only
/// its own sub-streams, so the result does not depend on thread count.
pub fn sample_many(
    cfg: &GeneratorConfig,
    params: &GeneratorParams,
    streams: &Streams,
    count: usize,
) -> Result<Vec<Window>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let noise = NoiseVector::sample_streams(cfg, streams, Purpose::Sampling, 0, i);
            sample(cfg, params, &noise, &mut streams.get(Purpose::Sampling, 1, i, 0))
        })
        .collect()
}

/// Gradient of `sum_i upstream[i] * forward(...)[i]` with respect to every
/// rotation angle, by the two-term parameter-shift rule. Only the patch that
/// owns an angle is re-simulated.
pub fn param_shift_gradient(
    cfg: &GeneratorConfig,
    params: &GeneratorParams,
    noise: &NoiseVector,
    upstream: &[f64],
) -> Result<GeneratorParams> {
    check_shapes(cfg, params, noise)?;
    if upstream.len() != cfg.output_len() {
        return shape(format!(
            "upstream gradient expects length {}, got {}",
            cfg.output_len(),
            upstream.len()
        ));
    }
    let n = cfg.n_feature;
    let mut grad = GeneratorParams::zeros(cfg);
    for p in 0..cfg.n_patches {
        let up = &upstream[p * n..(p + 1) * n];
        if up.iter().all(|&u| u == 0.0) {
            continue;
        }
        let z = noise.patch(p);
        let mut theta = params.patch(p).to_vec();
        let out = grad.patch_mut(p);
        for j in 0..theta.len() {
            let orig = theta[j];
            theta[j] = orig + FRAC_PI_2;
            let plus = patch_marginals(cfg, &theta, z)?;
            theta[j] = orig - FRAC_PI_2;
            let minus = patch_marginals(cfg, &theta, z)?;
            theta[j] = orig;
            out[j] = up
                .iter()
                .zip(plus.iter().zip(&minus))
                .map(|(u, (a, b))| u * (a - b) / 2.0)
                .sum();
        }
    }
    Ok(grad)
}

/// How the output distribution is averaged over the noise angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseAverage {
    /// Tensor-product Gauss-Legendre rule of this order per noise angle.
    Quadrature { order: usize },
    /// Fixed set of Monte-Carlo noise draws.
    MonteCarlo { draws: usize, seed: u64 },
}

const MAX_QUADRATURE_POINTS: usize = 1 << 16;

impl NoiseAverage {
    /// Quadrature when the grid stays small, Monte-Carlo otherwise.
    ///
    /// Patch probabilities are trigonometric polynomials of degree at most
    /// `n_layers` in each noise angle, so an order of `2 * n_layers + 8` is
    /// accurate to roughly 1e-10 on the default interval.
    pub fn auto(cfg: &GeneratorConfig) -> Self {
        let order = (2 * cfg.n_layers + 8).max(8);
        let dims = cfg.noise_per_patch() as u32;
        match order.checked_pow(dims) {
            Some(points) if points <= MAX_QUADRATURE_POINTS => NoiseAverage::Quadrature { order },
            _ => NoiseAverage::MonteCarlo {
                draws: 8192,
                seed: 0,
            },
        }
    }
}

/// Distribution of one patch's feature bits, averaged over the noise.
///
/// Indexed in reading order: neuron 0 is the most significant bit.
pub fn patch_distribution(
    cfg: &GeneratorConfig,
    theta_patch: &[f64],
    average: NoiseAverage,
) -> Result<Vec<f64>> {
    let n = cfg.n_feature;
    let dims = cfg.noise_per_patch();
    let mut dist = vec![0.0; 1 << n];
    let mut accumulate = |z: &[f64], weight: f64| -> Result<()> {
        let state = patch_state(cfg, theta_patch, z)?;
        for (b, amp) in state.amplitudes().iter().enumerate() {
            let feature = b & ((1 << n) - 1);
            dist[reverse_bits(feature, n)] += weight * amp.norm_sqr();
        }
        Ok(())
    };
    match average {
        NoiseAverage::Quadrature { order } => {
            let (nodes, weights) = gauss_legendre(order, cfg.noise_low, cfg.noise_high);
            let width = cfg.noise_high - cfg.noise_low;
            let mut counter = vec![0usize; dims];
            let mut z = vec![0.0; dims];
            loop {
                let mut w = 1.0;
                for (d, &c) in counter.iter().enumerate() {
                    z[d] = nodes[c];
                    // degenerate interval: every angle is the single endpoint
                    w *= if width > 0.0 { weights[c] / width } else { 1.0 / order as f64 };
                }
                accumulate(&z, w)?;
                let mut d = 0;
                loop {
                    if d == dims {
                        return Ok(normalize(dist));
                    }
                    counter[d] += 1;
                    if counter[d] < order {
                        break;
                    }
                    counter[d] = 0;
                    d += 1;
                }
            }
        }
        NoiseAverage::MonteCarlo { draws, seed } => {
            let streams = Streams::new(seed);
            let mut rng = streams.get(Purpose::Evaluation, 0, 0, 0);
            let w = 1.0 / draws as f64;
            let mut z = vec![0.0; dims];
            for _ in 0..draws {
                for v in z.iter_mut() {
                    *v = uniform(&mut rng, cfg.noise_low, cfg.noise_high);
                }
                accumulate(&z, w)?;
            }
            Ok(normalize(dist))
        }
    }
}

fn normalize(mut dist: Vec<f64>) -> Vec<f64> {
    let total: f64 = dist.iter().sum();
    if total > 0.0 {
        dist.iter_mut().for_each(|p| *p /= total);
    }
    dist
}

/// Full output distribution over `2^(n*t)` states, indexed like
/// [`crate::spikedata::state_index`]. Patches draw independent noise, so the
/// joint is the product of the per-patch distributions.
pub fn output_distribution(
    cfg: &GeneratorConfig,
    params: &GeneratorParams,
    average: NoiseAverage,
) -> Result<Vec<f64>> {
    if params.len() != cfg.param_count() {
        return shape(format!(
            "generator expects {} parameters, got {}",
            cfg.param_count(),
            params.len()
        ));
    }
    let bits = cfg.output_len();
    if bits > crate::spikedata::MAX_STATE_BITS {
        return config(format!(
            "state distribution over {bits} bits exceeds the limit of {}",
            crate::spikedata::MAX_STATE_BITS
        ));
    }
    let mut joint = vec![1.0];
    for p in 0..cfg.n_patches {
        let patch = patch_distribution(cfg, params.patch(p), average)?;
        joint = joint
            .iter()
            .flat_map(|a| patch.iter().map(move |b| a * b))
            .collect();
    }
    Ok(joint)
}

/// Draws one full sample directly from a precomputed output distribution.
pub fn sample_from_distribution<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    sample_from_probabilities(dist.iter().copied(), rng)
}

fn reverse_bits(value: usize, width: usize) -> usize {
    (0..width).fold(0, |acc, k| acc | ((value >> k & 1) << (width - 1 - k)))
}

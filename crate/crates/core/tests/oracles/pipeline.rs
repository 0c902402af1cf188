//! Checks that run library code against the oracles in the parent module.
//! Each returns `Err` with a description of the first mismatch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spiqgan::critic::CriticParams;
use spiqgan::generator::{self, GeneratorConfig, GeneratorParams, NoiseVector};
use spiqgan::spikedata::{SpikeMatrix, Window};
use spiqgan::statevec::StateVector;
use spiqgan::stats;
use spiqgan::training::{critic_loss, generator_loss, ModelConfig, PenaltyMode, Trainer};

type Check = Result<(), String>;

/// One random circuit on up to 4 qubits with up to 20 gates against the
/// dense oracle; returns the worst amplitude error and norm drift.
pub fn circuit_check(seed: u64) -> Result<(f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = rng.gen_range(1..=4);
    let len = rng.gen_range(0..=20);
    let gates = super::random_circuit(q, len, &mut rng);
    let mut sv = StateVector::zero(q).map_err(|e| e.to_string())?;
    sv.apply_circuit(&gates).map_err(|e| e.to_string())?;
    let dense = super::dense_run(q, &gates);
    let err = sv
        .amplitudes()
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok((err, (sv.norm_sqr() - 1.0).abs()))
}

fn tiny_model(seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::new(2, 1);
    cfg.generator.n_layers = 2;
    cfg.training.batch_size = 2;
    cfg.training.seed = seed;
    cfg
}

fn random_data(neurons: usize, bins: usize, seed: u64) -> SpikeMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..neurons * bins).map(|_| rng.gen_range(0..=1)).collect();
    SpikeMatrix::new(neurons, bins, data, 0.02).unwrap()
}

fn compare(what: &str, got: &[f64], want: &[f64], rel: f64, abs: f64) -> Check {
    if got.len() != want.len() {
        return Err(format!("{what}: length {} vs {}", got.len(), want.len()));
    }
    for (i, (a, b)) in got.iter().zip(want).enumerate() {
        if !super::close(*a, *b, rel, abs) {
            return Err(format!("{what}[{i}]: {a} vs {b}"));
        }
    }
    Ok(())
}

/// Parameter-shift gradient of a random upstream-weighted sum of marginals
/// against central differences.
pub fn marginal_gradient_check(seed: u64, n: usize, layers: usize, t: usize) -> Check {
    let cfg = GeneratorConfig {
        n_layers: layers,
        ..GeneratorConfig::new(n, t)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = generator::init_params(&cfg, &mut rng);
    let noise = NoiseVector::sample(&cfg, &mut rng);
    let up: Vec<f64> = (0..cfg.output_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let got = generator::param_shift_gradient(&cfg, &params, &noise, &up).map_err(|e| e.to_string())?;
    let f = |theta: &[f64]| {
        let p = GeneratorParams::from_vec(&cfg, theta.to_vec()).unwrap();
        let m = generator::forward(&cfg, &p, &noise).unwrap();
        m.iter().zip(&up).map(|(a, b)| a * b).sum()
    };
    let want = super::central_difference(f, params.as_slice(), 1e-5);
    compare("marginal gradient", got.as_slice(), &want, 1e-5, 1e-8)
}

/// Full generator-loss gradient (critic term plus count term) on n=2, t=1,
/// L=2, B=2 against central differences of the composed loss.
pub fn generator_loss_gradient_check(seed: u64, mode: PenaltyMode) -> Check {
    let mut cfg = tiny_model(seed);
    cfg.training.penalty_mode = mode;
    let data = random_data(2, 50, seed);
    let trainer = Trainer::new(cfg.clone(), &data).map_err(|e| e.to_string())?;
    let (real, noise) = trainer.generator_inputs().map_err(|e| e.to_string())?;
    let (_, got) = trainer.generator_gradient(&real, &noise).map_err(|e| e.to_string())?;
    let critic = trainer.state().critic_params.clone();
    let g = cfg.generator.clone();
    let t = cfg.training.clone();
    let loss = |theta: &[f64]| {
        let p = GeneratorParams::from_vec(&g, theta.to_vec()).unwrap();
        let fakes: Vec<Vec<f64>> = noise.iter().map(|z| generator::forward(&g, &p, z).unwrap()).collect();
        let c_fake: Vec<f64> = fakes.iter().map(|f| critic.forward(f).unwrap()).collect();
        let fake_counts: Vec<f64> = fakes.iter().map(|f| f.iter().sum()).collect();
        let real_counts: Vec<f64> = real.iter().map(|w| w.spike_count() as f64).collect();
        generator_loss(&c_fake, &fake_counts, &real_counts, t.k_coeff, t.penalty_mode).unwrap()
    };
    let want = super::central_difference(loss, trainer.state().gen_params.as_slice(), 1e-5);
    compare("generator loss gradient", got.as_slice(), &want, 1e-5, 1e-8)
}

/// Critic-loss gradient with respect to every critic weight on a tiny
/// batch (n=2, t=1, B=2) against central differences.
pub fn critic_loss_gradient_check(seed: u64) -> Check {
    let cfg = tiny_model(seed);
    let data = random_data(2, 50, seed);
    let trainer = Trainer::new(cfg.clone(), &data).map_err(|e| e.to_string())?;
    let (real, noise) = trainer.critic_inputs().map_err(|e| e.to_string())?;
    let (_, got) = trainer.critic_gradient(&real, &noise).map_err(|e| e.to_string())?;
    let g = &cfg.generator;
    let fakes: Vec<Vec<f64>> = noise
        .iter()
        .map(|z| generator::forward(g, &trainer.state().gen_params, z).unwrap())
        .collect();
    let reals: Vec<Vec<f64>> = real.iter().map(Window::to_f64).collect();
    let loss = |w: &[f64]| {
        let c = CriticParams::from_vec(2, w.to_vec()).unwrap();
        let cf: Vec<f64> = fakes.iter().map(|x| c.forward(x).unwrap()).collect();
        let cr: Vec<f64> = reals.iter().map(|x| c.forward(x).unwrap()).collect();
        critic_loss(&cf, &cr).unwrap()
    };
    let want = super::central_difference(loss, trainer.state().critic_params.as_slice(), 1e-5);
    compare("critic loss gradient", &got, &want, 1e-6, 1e-9)
}

/// Critic backprop for one random input: parameter and input gradients.
pub fn critic_backprop_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=6);
    let p = CriticParams::init(d, &mut rng);
    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (grads, input_grad) = p.backward(&x).map_err(|e| e.to_string())?;
    let by_weight = super::central_difference(
        |w| CriticParams::from_vec(d, w.to_vec()).unwrap().forward(&x).unwrap(),
        p.as_slice(),
        1e-5,
    );
    compare("critic weight gradient", grads.as_slice(), &by_weight, 1e-6, 1e-9)?;
    let by_input = super::central_difference(|xs| p.forward(xs).unwrap(), &x, 1e-5);
    compare("critic input gradient", &input_grad, &by_input, 1e-6, 1e-9)
}

/// Every estimator on one random 3 x 8 matrix, read both as a single 3 x 8
/// window and as several shorter windows.
pub fn stats_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_one = rng.gen_range(0.1..0.9);
    let rows: Vec<Vec<u8>> = (0..3)
        .map(|_| (0..8).map(|_| u8::from(rng.gen_bool(p_one))).collect())
        .collect();
    let bin_width = rng.gen_range(0.001..0.1);
    for t in [8, 4, 2, 1] {
        let w = super::windows_from_rows(&rows, t);
        let err = |e: spiqgan::Error| format!("t={t}: {e}");
        compare(
            &format!("firing rate t={t}"),
            &stats::firing_rate(&w, bin_width).map_err(err)?,
            &super::firing_rate(&w, bin_width),
            0.0,
            1e-12,
        )?;
        compare(
            &format!("covariance t={t}"),
            &stats::pairwise_covariance(&w).map_err(err)?,
            &super::covariance(&w),
            0.0,
            1e-12,
        )?;
        compare(
            &format!("k-probability t={t}"),
            &stats::k_probability(&w).map_err(err)?,
            &super::k_probability(&w),
            0.0,
            1e-12,
        )?;
        let max_lag = t - 1;
        match (stats::autocorrelogram(&w, max_lag), super::autocorrelogram(&w, max_lag)) {
            (Ok(a), Some(b)) => compare(&format!("autocorrelogram t={t}"), &a, &b, 0.0, 1e-12)?,
            (Err(_), None) => {}
            (a, b) => return Err(format!("autocorrelogram t={t}: {a:?} vs {b:?}")),
        }
        if 3 * t <= 20 {
            compare(
                &format!("state histogram t={t}"),
                &stats::state_histogram(&w).map_err(err)?,
                &super::state_histogram(&w),
                0.0,
                1e-12,
            )?;
        }
    }
    Ok(())
}

//! Wasserstein critic: `d -> 64 ReLU -> 1` linear, with a hand-written
//! backward pass and weight clipping.

use rand::Rng;

use crate::error::{config, shape, Result};

pub const HIDDEN: usize = 64;

/// All critic weights in one flat buffer: `w1` (64 x d, row-major), `b1`,
/// `w2`, then the scalar `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticParams {
    input_dim: usize,
    data: Vec<f64>,
}

impl CriticParams {
    pub fn len_for(input_dim: usize) -> usize {
        HIDDEN * input_dim + 2 * HIDDEN + 1
    }

    pub fn zeros(input_dim: usize) -> Self {
        Self {
            input_dim,
            data: vec![0.0; Self::len_for(input_dim)],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim);
        let first = 1.0 / (input_dim as f64).sqrt();
        let second = 1.0 / (HIDDEN as f64).sqrt();
        let split = HIDDEN * input_dim + HIDDEN;
        for (i, x) in p.data.iter_mut().enumerate() {
            let bound = if i < split { first } else { second };
            *x = rng.gen_range(-bound..=bound);
        }
        p
    }

    pub fn from_vec(input_dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != Self::len_for(input_dim) {
            return shape(format!(
                "critic with input {input_dim} needs {} weights, got {}",
                Self::len_for(input_dim),
                data.len()
            ));
        }
        Ok(Self { input_dim, data })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[..HIDDEN * self.input_dim]
    }

    pub fn b1(&self) -> &[f64] {
        let start = HIDDEN * self.input_dim;
        &self.data[start..start + HIDDEN]
    }

    pub fn w2(&self) -> &[f64] {
        let start = HIDDEN * self.input_dim + HIDDEN;
        &self.data[start..start + HIDDEN]
    }

    pub fn b2(&self) -> f64 {
        self.data[self.data.len() - 1]
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        let end = HIDDEN * self.input_dim;
        &mut self.data[..end]
    }

    pub fn b1_mut(&mut self) -> &mut [f64] {
        let start = HIDDEN * self.input_dim;
        &mut self.data[start..start + HIDDEN]
    }

    pub fn w2_mut(&mut self) -> &mut [f64] {
        let start = HIDDEN * self.input_dim + HIDDEN;
        &mut self.data[start..start + HIDDEN]
    }

    pub fn set_b2(&mut self, value: f64) {
        let last = self.data.len() - 1;
        self.data[last] = value;
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return shape(format!(
                "critic input has length {}, expected {}",
                x.len(),
                self.input_dim
            ));
        }
        Ok(())
    }

    fn pre_activations(&self, x: &[f64]) -> Vec<f64> {
        let d = self.input_dim;
        self.w1()
            .chunks_exact(d)
            .zip(self.b1())
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let hidden = self.pre_activations(x);
        Ok(self.b2()
            + hidden
                .iter()
                .zip(self.w2())
                .map(|(h, w)| w * h.max(0.0))
                .sum::<f64>())
    }

    /// Gradients of the scalar output with respect to every weight (same
    /// layout as the parameters) and with respect to `x`. ReLU'(0) = 0.
    pub fn backward(&self, x: &[f64]) -> Result<(CriticParams, Vec<f64>)> {
        self.check_input(x)?;
        let d = self.input_dim;
        let hidden = self.pre_activations(x);
        let mut grads = CriticParams::zeros(d);
        let mut input_grad = vec![0.0; d];
        let w1 = self.w1();
        let w2 = self.w2();
        {
            let g = grads.as_mut_slice();
            let (gw1, rest) = g.split_at_mut(HIDDEN * d);
            let (gb1, rest) = rest.split_at_mut(HIDDEN);
            let (gw2, gb2) = rest.split_at_mut(HIDDEN);
            gb2[0] = 1.0;
            for h in 0..HIDDEN {
                let active = hidden[h] > 0.0;
                gw2[h] = if active { hidden[h] } else { 0.0 };
                if !active {
                    continue;
                }
                gb1[h] = w2[h];
                let row = &w1[h * d..(h + 1) * d];
                for i in 0..d {
                    gw1[h * d + i] = w2[h] * x[i];
                    input_grad[i] += w2[h] * row[i];
                }
            }
        }
        Ok((grads, input_grad))
    }

    /// Clamps every weight to `[-c, c]`.
    pub fn clip_weights(&mut self, c: f64) -> Result<()> {
        if !(c > 0.0) {
            return config(format!("clip constant must be positive, got {c}"));
        }
        self.data.iter_mut().for_each(|w| *w = w.clamp(-c, c));
        Ok(())
    }
}

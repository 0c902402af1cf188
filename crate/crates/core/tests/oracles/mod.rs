//! Independent reference implementations for integration and acceptance
//! tests. Nothing in this file calls into the library's numerics; the
//! `pipeline` submodule drives the library and compares against them.
#![allow(dead_code)]

pub mod pipeline;

use num_complex::Complex64;
use rand::Rng;
use spiqgan::spikedata::Window;
use spiqgan::statevec::Gate;

// ---- dense-matrix circuit simulation ----

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| c((i == j) as u8 as f64, 0.0)).collect())
        .collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn rotation(axis: char, angle: f64) -> Matrix {
    let (co, si) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    match axis {
        'x' => vec![vec![c(co, 0.0), c(0.0, -si)], vec![c(0.0, -si), c(co, 0.0)]],
        'y' => vec![vec![c(co, 0.0), c(-si, 0.0)], vec![c(si, 0.0), c(co, 0.0)]],
        _ => vec![vec![c(co, -si), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, si)]],
    }
}

/// Full `2^q x 2^q` unitary. Qubit 0 is the least significant index bit,
/// i.e. the rightmost Kronecker factor.
pub fn gate_matrix(gate: &Gate, q: usize) -> Matrix {
    let dim = 1 << q;
    match *gate {
        Gate::Cnot { control, target } => {
            let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
            for col in 0..dim {
                let row = if col >> control & 1 == 1 { col ^ (1 << target) } else { col };
                m[row][col] = c(1.0, 0.0);
            }
            m
        }
        Gate::Rx { target, angle } | Gate::Ry { target, angle } | Gate::Rz { target, angle } => {
            let axis = match gate {
                Gate::Rx { .. } => 'x',
                Gate::Ry { .. } => 'y',
                _ => 'z',
            };
            let mut m = vec![vec![c(1.0, 0.0)]];
            for k in (0..q).rev() {
                let factor = if k == target { rotation(axis, angle) } else { identity(2) };
                m = kron(&m, &factor);
            }
            m
        }
    }
}

pub fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Final state of `gates` applied to `|0...0>`.
pub fn dense_run(q: usize, gates: &[Gate]) -> Vec<Complex64> {
    let mut v = vec![c(0.0, 0.0); 1 << q];
    v[0] = c(1.0, 0.0);
    for g in gates {
        v = mat_vec(&gate_matrix(g, q), &v);
    }
    v
}

pub fn random_circuit<R: Rng>(q: usize, len: usize, rng: &mut R) -> Vec<Gate> {
    (0..len)
        .map(|_| {
            let target = rng.gen_range(0..q);
            let angle = rng.gen_range(-7.0..7.0);
            match rng.gen_range(0..if q > 1 { 4 } else { 3 }) {
                0 => Gate::Rx { target, angle },
                1 => Gate::Ry { target, angle },
                2 => Gate::Rz { target, angle },
                _ => {
                    let mut control = rng.gen_range(0..q);
                    while control == target {
                        control = rng.gen_range(0..q);
                    }
                    Gate::Cnot { control, target }
                }
            }
        })
        .collect()
}

// ---- generator ansatz rebuilt from its textual definition ----

/// One patch: per layer RX(z_k) on every qubit, then RY, RZ from
/// `theta[(layer * q + k) * 2 + axis]`, then CNOT(k, k+1) down the chain.
pub fn ansatz(q: usize, layers: usize, theta: &[f64], z: &[f64]) -> Vec<Gate> {
    let mut gates = Vec::new();
    for l in 0..layers {
        for (k, &angle) in z.iter().enumerate().take(q) {
            gates.push(Gate::Rx { target: k, angle });
        }
        for k in 0..q {
            let base = (l * q + k) * 2;
            gates.push(Gate::Ry { target: k, angle: theta[base] });
            gates.push(Gate::Rz { target: k, angle: theta[base + 1] });
        }
        for k in 0..q.saturating_sub(1) {
            gates.push(Gate::Cnot { control: k, target: k + 1 });
        }
    }
    gates
}

/// Feature-bit distribution of one patch in reading order (neuron 0 most
/// significant) at fixed noise.
pub fn ansatz_distribution(n: usize, q: usize, layers: usize, theta: &[f64], z: &[f64]) -> Vec<f64> {
    let amps = dense_run(q, &ansatz(q, layers, theta, z));
    let mut dist = vec![0.0; 1 << n];
    for (b, a) in amps.iter().enumerate() {
        let s = (0..n).fold(0, |acc, k| acc | ((b >> k & 1) << (n - 1 - k)));
        dist[s] += a.norm_sqr();
    }
    dist
}

/// Noise-averaged patch distribution for a two-angle noise space, by
/// composite Simpson integration on `[low, high]^2` with `panels` panels
/// per axis (`panels` even).
pub fn simpson_patch_distribution(
    layers: usize,
    theta: &[f64],
    low: f64,
    high: f64,
    panels: usize,
) -> Vec<f64> {
    assert!(panels % 2 == 0);
    let h = (high - low) / panels as f64;
    let weight = |i: usize| {
        if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut out = vec![0.0; 4];
    for i in 0..=panels {
        for j in 0..=panels {
            let z = [low + i as f64 * h, low + j as f64 * h];
            let w = weight(i) * weight(j);
            for (o, p) in out.iter_mut().zip(ansatz_distribution(2, 2, layers, theta, &z)) {
                *o += w * p;
            }
        }
    }
    let total: f64 = out.iter().sum();
    out.iter().map(|p| p / total).collect()
}

// ---- statistics, by the most literal loops possible ----

/// Window entries as `x[sample][neuron][time]`.
pub fn as_arrays(samples: &[Window]) -> Vec<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|w| {
            (0..w.neurons())
                .map(|i| (0..w.timesteps()).map(|p| w.get(i, p) as f64).collect())
                .collect()
        })
        .collect()
}

fn neuron_values(x: &[Vec<Vec<f64>>], i: usize) -> Vec<f64> {
    x.iter().flat_map(|s| s[i].iter().copied()).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn firing_rate(samples: &[Window], bin_width: f64) -> Vec<f64> {
    let x = as_arrays(samples);
    (0..x[0].len())
        .map(|i| mean(&neuron_values(&x, i)) / bin_width)
        .collect()
}

pub fn covariance(samples: &[Window]) -> Vec<f64> {
    let x = as_arrays(samples);
    let n = x[0].len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (neuron_values(&x, i), neuron_values(&x, j));
            let (ma, mb) = (mean(&a), mean(&b));
            let prod: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u - ma) * (v - mb)).collect();
            out.push(mean(&prod));
        }
    }
    out
}

pub fn k_probability(samples: &[Window]) -> Vec<f64> {
    let x = as_arrays(samples);
    let n = x[0].len();
    let mut hist = vec![0.0; n + 1];
    let mut bins = 0.0;
    for s in &x {
        for p in 0..s[0].len() {
            let k = (0..n).filter(|&i| s[i][p] == 1.0).count();
            hist[k] += 1.0;
            bins += 1.0;
        }
    }
    hist.iter().map(|h| h / bins).collect()
}

pub fn autocorrelogram(samples: &[Window], max_lag: usize) -> Option<Vec<f64>> {
    let x = as_arrays(samples);
    let n = x[0].len();
    let mut curves = Vec::new();
    for i in 0..n {
        let all = neuron_values(&x, i);
        let mu = mean(&all);
        let var = mean(&all.iter().map(|v| (v - mu) * (v - mu)).collect::<Vec<_>>());
        if var == 0.0 {
            continue;
        }
        let curve: Vec<f64> = (0..=max_lag)
            .map(|lag| {
                let mut terms = Vec::new();
                for s in &x {
                    let row = &s[i];
                    for u in 0..row.len() - lag {
                        terms.push((row[u] - mu) * (row[u + lag] - mu));
                    }
                }
                mean(&terms) / var
            })
            .collect();
        curves.push(curve);
    }
    if curves.is_empty() {
        return None;
    }
    Some(
        (0..=max_lag)
            .map(|lag| curves.iter().map(|c| c[lag]).sum::<f64>() / curves.len() as f64)
            .collect(),
    )
}

/// State of a window written out as a binary string in reading order
/// (timestep-major, neuron 0 first) and parsed back as an integer.
pub fn state_of(w: &Window) -> usize {
    let mut text = String::new();
    for p in 0..w.timesteps() {
        for i in 0..w.neurons() {
            text.push(if w.get(i, p) == 1 { '1' } else { '0' });
        }
    }
    usize::from_str_radix(&text, 2).unwrap()
}

pub fn state_histogram(samples: &[Window]) -> Vec<f64> {
    let bits = samples[0].neurons() * samples[0].timesteps();
    let mut hist = vec![0.0; 1 << bits];
    for w in samples {
        hist[state_of(w)] += 1.0;
    }
    hist.iter().map(|h| h / samples.len() as f64).collect()
}

/// Windows of an `n x cols` 0/1 matrix cut into consecutive `t`-bin pieces.
pub fn windows_from_rows(rows: &[Vec<u8>], t: usize) -> Vec<Window> {
    let cols = rows[0].len();
    (0..cols / t)
        .map(|w| {
            let mut bits = Vec::new();
            for p in 0..t {
                for row in rows {
                    bits.push(row[w * t + p]);
                }
            }
            Window::new(rows.len(), t, bits).unwrap()
        })
        .collect()
}

// ---- numerical differentiation and comparisons ----

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| <= rel * max(|a|, |b|) + abs`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

/// Largest `|observed - expected| / sigma` over the cells of a multinomial
/// with `draws` trials, `sigma = sqrt(p (1 - p) / draws)`. Cells with
/// probability below 1e-12 must be empty.
pub fn multinomial_z(observed: &[f64], expected: &[f64], draws: usize) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            if p < 1e-12 {
                if o == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (o - p).abs() / (p * (1.0 - p) / draws as f64).sqrt()
            }
        })
        .fold(0.0, f64::max)
}

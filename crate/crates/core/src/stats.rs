//! Evaluation statistics over sets of spike windows.
//!
//! All moments are population moments (divisor `N`), pooled over every bin
//! of every sample.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{config, shape, Error, Result};
use crate::spikedata::{state_index, Window, MAX_STATE_BITS};

fn check_samples(samples: &[Window]) -> Result<(usize, usize)> {
    let Some(first) = samples.first() else {
        return config("no samples");
    };
    let (n, t) = (first.neurons(), first.timesteps());
    if samples.iter().any(|w| w.neurons() != n || w.timesteps() != t) {
        return shape("samples differ in shape");
    }
    Ok((n, t))
}

/// Spikes per second for each neuron.
pub fn firing_rate(samples: &[Window], bin_width: f64) -> Result<Vec<f64>> {
    let (n, t) = check_samples(samples)?;
    if !(bin_width > 0.0) {
        return config(format!("bin width must be positive, got {bin_width}"));
    }
    let mut spikes = vec![0usize; n];
    for w in samples {
        for p in 0..t {
            for (k, s) in spikes.iter_mut().enumerate() {
                *s += w.get(k, p) as usize;
            }
        }
    }
    let bins = (samples.len() * t) as f64;
    Ok(spikes.iter().map(|&s| s as f64 / (bins * bin_width)).collect())
}

/// `E[s_i s_j] - E[s_i] E[s_j]` for every pair `i < j`, upper triangle in
/// row-major order.
pub fn pairwise_covariance(samples: &[Window]) -> Result<Vec<f64>> {
    let (n, t) = check_samples(samples)?;
    if n < 2 {
        return config("pairwise covariance needs at least two neurons");
    }
    let mut first = vec![0usize; n];
    let mut second = vec![0usize; n * n];
    for w in samples {
        for p in 0..t {
            for i in 0..n {
                if w.get(i, p) == 1 {
                    first[i] += 1;
                    for j in i + 1..n {
                        second[i * n + j] += w.get(j, p) as usize;
                    }
                }
            }
        }
    }
    let total = (samples.len() * t) as f64;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let mi = first[i] as f64 / total;
            let mj = first[j] as f64 / total;
            out.push(second[i * n + j] as f64 / total - mi * mj);
        }
    }
    Ok(out)
}

/// `P(k)` = fraction of bins in which exactly `k` neurons spike.
pub fn k_probability(samples: &[Window]) -> Result<Vec<f64>> {
    let (n, t) = check_samples(samples)?;
    let mut counts = vec![0usize; n + 1];
    for w in samples {
        for p in 0..t {
            let k: usize = (0..n).map(|i| w.get(i, p) as usize).sum();
            counts[k] += 1;
        }
    }
    let total = (samples.len() * t) as f64;
    Ok(counts.iter().map(|&c| c as f64 / total).collect())
}

/// Pearson autocorrelation for lags `0..=max_lag`, averaged over neurons
/// with nonzero variance.
///
/// For neuron `i` with pooled mean `mu` and variance `var`,
/// `a_i(tau) = mean[(s(u) - mu)(s(u + tau) - mu)] / var`, the mean taken over
/// every valid `u` inside every sample (lags never cross window edges).
pub fn autocorrelogram(samples: &[Window], max_lag: usize) -> Result<Vec<f64>> {
    let (n, t) = check_samples(samples)?;
    if max_lag >= t {
        return config(format!("max lag {max_lag} must be below window length {t}"));
    }
    let total = (samples.len() * t) as f64;
    let mut acc = vec![0.0; max_lag + 1];
    let mut active = 0usize;
    for i in 0..n {
        let spikes: usize = samples
            .iter()
            .map(|w| (0..t).map(|p| w.get(i, p) as usize).sum::<usize>())
            .sum();
        let mu = spikes as f64 / total;
        let var = mu - mu * mu;
        if var <= 0.0 {
            continue;
        }
        active += 1;
        for (lag, a) in acc.iter_mut().enumerate() {
            let mut sum = 0.0;
            for w in samples {
                for u in 0..t - lag {
                    sum += (w.get(i, u) as f64 - mu) * (w.get(i, u + lag) as f64 - mu);
                }
            }
            let pairs = (samples.len() * (t - lag)) as f64;
            *a += sum / pairs / var;
        }
    }
    if active == 0 {
        return Err(Error::Undefined(
            "autocorrelogram: every neuron is constant, variance is zero".into(),
        ));
    }
    Ok(acc.into_iter().map(|a| a / active as f64).collect())
}

/// Empirical distribution over the `2^(n t)` spike states.
pub fn state_histogram(samples: &[Window]) -> Result<Vec<f64>> {
    let (n, t) = check_samples(samples)?;
    if n * t > MAX_STATE_BITS {
        return config(format!(
            "{} state bits exceeds the limit of {MAX_STATE_BITS}",
            n * t
        ));
    }
    let mut hist = vec![0.0; 1 << (n * t)];
    for w in samples {
        hist[state_index(w)?] += 1.0;
    }
    let total = samples.len() as f64;
    hist.iter_mut().for_each(|h| *h /= total);
    Ok(hist)
}

/// Jensen-Shannon divergence in bits, in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return shape(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        ));
    }
    let p = normalized(p)?;
    let q = normalized(q)?;
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(&q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            js += 0.5 * b * (b / m).log2();
        }
    }
    Ok(js.clamp(0.0, 1.0))
}

fn normalized(p: &[f64]) -> Result<Vec<f64>> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return config("probability vector has a negative or non-finite entry");
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return config(format!("probability vector sums to {total}, not 1"));
    }
    Ok(p.iter().map(|x| x / total).collect())
}

pub fn stats_mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return shape(format!("vectors have lengths {} and {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return config("mean square error of empty vectors");
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    pub neurons: usize,
    pub timesteps: usize,
    pub samples: usize,
    pub bin_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatReport {
    /// Hz per neuron.
    pub firing_rate: Vec<f64>,
    /// Upper triangle, row-major; empty for a single neuron.
    pub pairwise_cov: Vec<f64>,
    pub k_probability: Vec<f64>,
    /// `None` when every neuron is constant.
    pub autocorrelogram: Option<Vec<f64>>,
    pub meta: SampleMeta,
}

/// All statistics in one pass. `max_lag` is clipped to `t - 1`.
pub fn build_report(samples: &[Window], bin_width: f64, max_lag: usize) -> Result<StatReport> {
    let (n, t) = check_samples(samples)?;
    let pairwise_cov = if n >= 2 {
        pairwise_covariance(samples)?
    } else {
        Vec::new()
    };
    let autocorrelogram = match autocorrelogram(samples, max_lag.min(t - 1)) {
        Ok(a) => Some(a),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(StatReport {
        firing_rate: firing_rate(samples, bin_width)?,
        pairwise_cov,
        k_probability: k_probability(samples)?,
        autocorrelogram,
        meta: SampleMeta {
            neurons: n,
            timesteps: t,
            samples: samples.len(),
            bin_width,
        },
    })
}

fn stat_csv(name: &str, values: &[f64]) -> String {
    let mut out = String::from("stat,index,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{name},{i},{v}");
    }
    out
}

impl StatReport {
    /// Every statistic as `stat,index,value` rows under one header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stat,index,value\n");
        for (name, values) in self.named() {
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{name},{i},{v}");
            }
        }
        out
    }

    fn named(&self) -> Vec<(&'static str, &[f64])> {
        let mut v: Vec<(&'static str, &[f64])> = vec![
            ("firing_rate", &self.firing_rate),
            ("pairwise_cov", &self.pairwise_cov),
            ("k_probability", &self.k_probability),
        ];
        if let Some(a) = &self.autocorrelogram {
            v.push(("autocorrelogram", a));
        }
        v
    }

    /// One CSV per statistic plus `meta.csv` in `dir` (created if missing).
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, values) in self.named() {
            let path = dir.join(format!("{name}.csv"));
            fs::write(&path, stat_csv(name, values)).map_err(|e| Error::io(&path, e))?;
        }
        let meta = format!(
            "key,value\nneurons,{}\ntimesteps,{}\nsamples,{}\nbin_width,{}\n",
            self.meta.neurons, self.meta.timesteps, self.meta.samples, self.meta.bin_width
        );
        let path = dir.join("meta.csv");
        fs::write(&path, meta).map_err(|e| Error::io(&path, e))
    }
}

//! Spike rasters: the `SPIKES v1` text format, training windows and a
//! surrogate data model.
//!
//! The file format is a header line `SPIKES v1 <neurons> <bins> <bin_width_seconds>`
//! followed by one line per neuron of `0`/`1` characters with no separators.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{config, shape, Error, Result};

pub const DEFAULT_BIN_WIDTH: f64 = 0.02;

/// Largest `n * t` for which state indices and histograms are built.
pub const MAX_STATE_BITS: usize = 20;

const MAGIC: &str = "SPIKES";
const FORMAT_VERSION: &str = "v1";

/// Binary raster, rows are neurons and columns are time bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeMatrix {
    neurons: usize,
    bins: usize,
    data: Vec<u8>,
    bin_width: f64,
}

impl SpikeMatrix {
    /// `data` is row-major (`neurons` rows of `bins` entries).
    pub fn new(neurons: usize, bins: usize, data: Vec<u8>, bin_width: f64) -> Result<Self> {
        if neurons == 0 || bins == 0 {
            return config(format!("empty spike matrix ({neurons} x {bins})"));
        }
        if data.len() != neurons * bins {
            return shape(format!(
                "{neurons} x {bins} matrix needs {} entries, got {}",
                neurons * bins,
                data.len()
            ));
        }
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return config(format!("bin width must be positive, got {bin_width}"));
        }
        if let Some(pos) = data.iter().position(|&b| b > 1) {
            return Err(Error::Parse(format!(
                "non-binary entry {} at neuron {}, bin {}",
                data[pos],
                pos / bins,
                pos % bins
            )));
        }
        Ok(Self {
            neurons,
            bins,
            data,
            bin_width,
        })
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn get(&self, neuron: usize, bin: usize) -> u8 {
        self.data[neuron * self.bins + bin]
    }

    pub fn row(&self, neuron: usize) -> &[u8] {
        &self.data[neuron * self.bins..(neuron + 1) * self.bins]
    }

    /// Concatenates windows column-wise into one raster.
    pub fn from_windows(windows: &[Window], bin_width: f64) -> Result<Self> {
        let Some(first) = windows.first() else {
            return config("no windows to concatenate");
        };
        let (n, t) = (first.n, first.t);
        if windows.iter().any(|w| w.n != n || w.t != t) {
            return shape("windows differ in shape");
        }
        let bins = t * windows.len();
        let mut data = vec![0u8; n * bins];
        for (w_idx, w) in windows.iter().enumerate() {
            for p in 0..t {
                for k in 0..n {
                    data[k * bins + w_idx * t + p] = w.get(k, p);
                }
            }
        }
        Self::new(n, bins, data, bin_width)
    }

    /// Splits the selected rows into consecutive non-overlapping windows;
    /// trailing bins that do not fill a window are dropped.
    pub fn tile_windows(&self, spec: &WindowSpec) -> Result<Vec<Window>> {
        spec.validate(self)?;
        Ok((0..self.bins / spec.window_len)
            .map(|i| self.window_at(spec, i * spec.window_len))
            .collect())
    }

    /// Windows at every admissible start column.
    pub fn all_windows(&self, spec: &WindowSpec) -> Result<Vec<Window>> {
        spec.validate(self)?;
        Ok((0..=self.bins - spec.window_len)
            .map(|start| self.window_at(spec, start))
            .collect())
    }

    fn window_at(&self, spec: &WindowSpec, start: usize) -> Window {
        let n = spec.neurons.len();
        let t = spec.window_len;
        let mut bits = Vec::with_capacity(n * t);
        for p in 0..t {
            for &row in &spec.neurons {
                bits.push(self.get(row, start + p));
            }
        }
        Window { n, t, bits }
    }
}

/// One `n x t` binary sample stored patch-major: entry `p * n + k` is
/// neuron `k` at timestep `p`. This is the layout the critic consumes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Window {
    n: usize,
    t: usize,
    bits: Vec<u8>,
}

impl Window {
    pub fn new(n: usize, t: usize, bits: Vec<u8>) -> Result<Self> {
        if n == 0 || t == 0 {
            return config(format!("empty window ({n} x {t})"));
        }
        if bits.len() != n * t {
            return shape(format!(
                "{n} x {t} window needs {} bits, got {}",
                n * t,
                bits.len()
            ));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Parse("window entries must be 0 or 1".into()));
        }
        Ok(Self { n, t, bits })
    }

    pub fn neurons(&self) -> usize {
        self.n
    }

    pub fn timesteps(&self) -> usize {
        self.t
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, neuron: usize, timestep: usize) -> u8 {
        self.bits[timestep * self.n + neuron]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn spike_count(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSpec {
    pub neurons: Vec<usize>,
    pub window_len: usize,
}

impl WindowSpec {
    /// First `n` rows, `t` bins.
    pub fn first(n: usize, t: usize) -> Self {
        Self {
            neurons: (0..n).collect(),
            window_len: t,
        }
    }

    pub fn validate(&self, m: &SpikeMatrix) -> Result<()> {
        if self.neurons.is_empty() {
            return config("window spec selects no neurons");
        }
        if self.window_len == 0 {
            return config("window length must be at least 1");
        }
        if self.window_len > m.bins {
            return config(format!(
                "window length {} exceeds {} bins",
                self.window_len, m.bins
            ));
        }
        for (i, &row) in self.neurons.iter().enumerate() {
            if row >= m.neurons {
                return config(format!(
                    "neuron index {row} out of range for {} neurons",
                    m.neurons
                ));
            }
            if self.neurons[..i].contains(&row) {
                return config(format!("neuron index {row} selected twice"));
            }
        }
        Ok(())
    }
}

pub fn load_spikes(path: impl AsRef<Path>) -> Result<SpikeMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spikes(&text)
}

pub fn parse_spikes(text: &str) -> Result<SpikeMatrix> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing SPIKES header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(Error::Parse(format!("malformed header {header:?}")));
    }
    if fields[1] != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format version {:?}",
            fields[1]
        )));
    }
    let parse_count = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad {what} count {s:?} in header")))
    };
    let neurons = parse_count(fields[2], "neuron")?;
    let bins = parse_count(fields[3], "bin")?;
    let bin_width: f64 = fields[4]
        .parse()
        .map_err(|_| Error::Parse(format!("bad bin width {:?} in header", fields[4])))?;

    let mut data = Vec::with_capacity(neurons * bins);
    let mut rows = 0;
    for line in lines {
        if line.is_empty() && rows == neurons {
            continue;
        }
        if rows == neurons {
            return Err(Error::Parse(format!(
                "more than the declared {neurons} rows"
            )));
        }
        if line.len() != bins {
            return Err(Error::Parse(format!(
                "row {rows} has {} entries, header declares {bins}",
                line.len()
            )));
        }
        for (col, ch) in line.bytes().enumerate() {
            match ch {
                b'0' => data.push(0),
                b'1' => data.push(1),
                other => {
                    return Err(Error::Parse(format!(
                        "non-binary entry {:?} at row {rows}, column {col}",
                        other as char
                    )))
                }
            }
        }
        rows += 1;
    }
    if rows != neurons {
        return Err(Error::Parse(format!(
            "found {rows} rows, header declares {neurons}"
        )));
    }
    SpikeMatrix::new(neurons, bins, data, bin_width)
}

pub fn format_spikes(m: &SpikeMatrix) -> String {
    let mut out = String::with_capacity(m.neurons * (m.bins + 1) + 48);
    let _ = writeln!(
        out,
        "{MAGIC} {FORMAT_VERSION} {} {} {}",
        m.neurons, m.bins, m.bin_width
    );
    for i in 0..m.neurons {
        out.extend(m.row(i).iter().map(|&b| if b == 1 { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn save_spikes(m: &SpikeMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_spikes(m)).map_err(|e| Error::io(path, e))
}

/// Debug export: one `window,neuron,timestep,spike` row per entry.
pub fn windows_csv(windows: &[Window]) -> String {
    let mut out = String::from("window,neuron,timestep,spike\n");
    for (i, w) in windows.iter().enumerate() {
        for p in 0..w.t {
            for k in 0..w.n {
                let _ = writeln!(out, "{i},{k},{p},{}", w.get(k, p));
            }
        }
    }
    out
}

/// `count` windows with uniformly random start columns in `[0, bins - t]`.
pub fn sample_windows<R: Rng + ?Sized>(
    m: &SpikeMatrix,
    spec: &WindowSpec,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Window>> {
    spec.validate(m)?;
    let max_start = m.bins - spec.window_len;
    Ok((0..count)
        .map(|_| m.window_at(spec, rng.gen_range(0..=max_start)))
        .collect())
}

/// Maps a window to its index among the `2^(n t)` spike states. Bits are
/// read patch-major with neuron 0 of timestep 0 as the most significant bit,
/// so for two neurons and one timestep the states are `00, 01, 10, 11`.
pub fn state_index(w: &Window) -> Result<usize> {
    let bits = w.bits.len();
    if bits > MAX_STATE_BITS {
        return config(format!(
            "{bits} state bits exceeds the limit of {MAX_STATE_BITS}"
        ));
    }
    Ok(w.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize))
}

/// Markov-modulated Bernoulli raster.
///
/// A hidden two-state chain (quiet / burst) keeps its state from one bin to
/// the next with probability `burst_prob`. In quiet bins neuron `i` spikes
/// with probability `rates[i]`, in burst bins with `burst_gain * rates[i]`;
/// spikes are independent given the state. The shared state induces positive
/// pairwise covariance and a heavy k-tail.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateParams {
    pub rates: Vec<f64>,
    pub bins: usize,
    pub burst_prob: f64,
    pub burst_gain: f64,
    pub bin_width: f64,
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return config("surrogate needs at least one neuron");
        }
        if self.bins == 0 {
            return config("surrogate needs at least one bin");
        }
        if let Some(r) = self.rates.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            return config(format!("spike probability {r} outside (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.burst_prob) {
            return config(format!(
                "burst stay probability {} outside [0, 1]",
                self.burst_prob
            ));
        }
        let max_rate = self.rates.iter().cloned().fold(0.0, f64::max);
        if !(self.burst_gain > 0.0) || self.burst_gain * max_rate > 1.0 {
            return config(format!(
                "burst gain {} invalid for max rate {max_rate}",
                self.burst_gain
            ));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return config(format!("bin width must be positive, got {}", self.bin_width));
        }
        Ok(())
    }

    /// Exact single-bin state distribution of the first `n` neurons under the
    /// stationary (50/50) hidden-state law, in [`state_index`] order.
    pub fn stationary_state_distribution(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 || n > self.rates.len() || n > MAX_STATE_BITS {
            return config(format!("cannot build a state distribution for {n} neurons"));
        }
        Ok((0..1usize << n)
            .map(|s| {
                let mut quiet = 1.0;
                let mut burst = 1.0;
                for k in 0..n {
                    let spike = s >> (n - 1 - k) & 1 == 1;
                    let (rq, rb) = (self.rates[k], self.rates[k] * self.burst_gain);
                    quiet *= if spike { rq } else { 1.0 - rq };
                    burst *= if spike { rb } else { 1.0 - rb };
                }
                0.5 * (quiet + burst)
            })
            .collect())
    }
}

pub fn synthesize_surrogate<R: Rng + ?Sized>(params: &SurrogateParams, rng: &mut R) -> Result<SpikeMatrix> {
    params.validate()?;
    let n = params.rates.len();
    let bins = params.bins;
    let mut data = vec![0u8; n * bins];
    // symmetric chain: stationary law is 50/50
    let mut burst = rng.gen_bool(0.5);
    for b in 0..bins {
        if b > 0 && !rng.gen_bool(params.burst_prob) {
            burst = !burst;
        }
        let gain = if burst { params.burst_gain } else { 1.0 };
        for (i, &r) in params.rates.iter().enumerate() {
            data[i * bins + b] = u8::from(rng.gen::<f64>() < gain * r);
        }
    }
    SpikeMatrix::new(n, bins, data, params.bin_width)
}

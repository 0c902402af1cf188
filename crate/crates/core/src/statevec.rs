//! Dense statevector simulation for the rotation/CNOT gate set used by the
//! patch ansatz.
//!
//! Qubit 0 is the least-significant bit of the basis index. Rotations follow
//! `R_A(phi) = exp(-i phi A / 2)`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{config, Error, Result};

/// Largest register the simulator will allocate (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn target(&self) -> usize {
        match *self {
            Gate::Rx { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::Cnot { target, .. } => target,
        }
    }

    /// Checks the qubit indices against a register of `num_qubits`.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let target = self.target();
        if target >= num_qubits {
            return config(format!(
                "gate target {target} out of range for {num_qubits} qubits"
            ));
        }
        if let Gate::Cnot { control, target } = *self {
            if control >= num_qubits {
                return config(format!(
                    "gate control {control} out of range for {num_qubits} qubits"
                ));
            }
            if control == target {
                return config(format!("CNOT control and target are both {control}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return config(format!(
                "qubit count {num_qubits} outside [1, {MAX_QUBITS}]"
            ));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the caller is
    /// responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Shape(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return config(format!("{num_qubits} qubits exceeds {MAX_QUBITS}"));
        }
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            Gate::Rx { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let diag = Complex64::new(c, 0.0);
                let off = Complex64::new(0.0, -s);
                self.apply_single(target, [[diag, off], [off, diag]]);
            }
            Gate::Ry { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let s = Complex64::new(s, 0.0);
                self.apply_single(target, [[c, -s], [s, c]]);
            }
            Gate::Rz { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                let stride = 1usize << target;
                for (i, amp) in self.amplitudes.iter_mut().enumerate() {
                    *amp *= if i & stride == 0 { lo } else { hi };
                }
            }
            Gate::Cnot { control, target } => {
                let cmask = 1usize << control;
                let tmask = 1usize << target;
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a 2x2 unitary to `target` by pairing amplitudes `stride` apart.
    fn apply_single(&mut self, target: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1usize << target;
        let len = self.amplitudes.len();
        let mut block = 0;
        while block < len {
            for i in block..block + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            block += stride << 1;
        }
    }

    /// Applies `gates` in list order. All gates are validated before any is
    /// applied, so an invalid list leaves the state untouched.
    pub fn apply_circuit(&mut self, gates: &[Gate]) -> Result<()> {
        for g in gates {
            g.validate(self.num_qubits)?;
        }
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability that `qubit` measures 1.
    pub fn marginal_one(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return config(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            ));
        }
        let mask = 1usize << qubit;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Marginals of qubits `0..count` in one pass over the amplitudes.
    pub fn marginals(&self, count: usize) -> Result<Vec<f64>> {
        if count > self.num_qubits {
            return config(format!(
                "requested {count} marginals from {} qubits",
                self.num_qubits
            ));
        }
        let mut out = vec![0.0; count];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (k, m) in out.iter_mut().enumerate() {
                if i >> k & 1 == 1 {
                    *m += p;
                }
            }
        }
        Ok(out)
    }

    /// Draws a basis index by inverse CDF over the probability vector.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_from_probabilities(self.amplitudes.iter().map(|a| a.norm_sqr()), rng)
    }

    /// Draws one measurement of all qubits; entry `k` is qubit `k`.
    pub fn sample_bitstring<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let index = self.sample_index(rng);
        (0..self.num_qubits).map(|k| (index >> k & 1) as u8).collect()
    }
}

/// Inverse-CDF draw over a (possibly slightly unnormalized) probability
/// sequence. Falls back to the last index with nonzero mass when rounding
/// leaves the cumulative sum just below `u`.
pub(crate) fn sample_from_probabilities<R, I>(probs: I, rng: &mut R) -> usize
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = f64>,
{
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            last_nonzero = i;
        }
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    last_nonzero
}

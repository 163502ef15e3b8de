use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Statevector;
use crate::generator::GenRng;

/// Renders `value` as an `n_bits` bit-string. The leftmost character is the
/// highest classical bit, so string order equals numeric order.
pub fn render_key(value: u64, n_bits: usize) -> String {
    (0..n_bits).rev().map(|b| if (value >> b) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Inverse of [`render_key`].
pub fn key_value(key: &str) -> Option<u64> {
    if key.len() > 64 || !key.bytes().all(|b| b == b'0' || b == b'1') {
        return None;
    }
    key.bytes().try_fold(0u64, |acc, b| Some((acc << 1) | u64::from(b - b'0')))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error("bit-string '{key}' does not have length {n_bits}")]
    LengthMismatch { key: String, n_bits: usize },
    #[error("'{0}' is not a bit-string")]
    NotBinary(String),
    #[error("distribution is empty")]
    Empty,
}

/// Measured bit-strings with their counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDistribution {
    pub n_bits: usize,
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

impl OutputDistribution {
    /// Builds a distribution, summing repeated keys and dropping zero counts.
    pub fn from_counts<K: Into<String>>(
        n_bits: usize,
        counts: impl IntoIterator<Item = (K, u64)>,
    ) -> Result<Self, DistributionError> {
        let mut map = BTreeMap::new();
        for (k, v) in counts {
            let k = k.into();
            if !k.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(DistributionError::NotBinary(k));
            }
            if k.len() != n_bits {
                return Err(DistributionError::LengthMismatch { key: k, n_bits });
            }
            if v > 0 {
                *map.entry(k).or_insert(0) += v;
            }
        }
        let shots = map.values().sum();
        Ok(OutputDistribution { n_bits, shots, counts: map })
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Relative frequencies.
    pub fn frequencies(&self) -> Probabilities {
        let total = self.shots.max(1) as f64;
        Probabilities {
            n_bits: self.n_bits,
            probs: self.counts.iter().map(|(k, &v)| (k.clone(), v as f64 / total)).collect(),
        }
    }
}

/// Exact outcome probabilities keyed like [`OutputDistribution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probabilities {
    pub n_bits: usize,
    pub probs: BTreeMap<String, f64>,
}

/// Probabilities below this are treated as rounding noise.
const NEGLIGIBLE: f64 = 1e-15;

impl Probabilities {
    pub fn get(&self, key: &str) -> f64 {
        self.probs.get(key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Largest per-key difference, missing keys counting as zero.
    pub fn max_abs_diff(&self, other: &Probabilities) -> f64 {
        let keys = self.probs.keys().chain(other.probs.keys());
        keys.map(|k| (self.get(k) - other.get(k)).abs()).fold(0.0, f64::max)
    }
}

/// Outcome probabilities of measuring `sv` with `(qubit, clbit)` wiring.
/// Unmeasured clbits read 0; a clbit written twice keeps the last value.
pub fn measurement_probabilities(sv: &Statevector, wiring: &[(usize, usize)], n_clbits: usize) -> Probabilities {
    let mut acc: HashMap<u64, f64> = HashMap::new();
    for (index, amp) in sv.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut key = 0u64;
        for &(q, c) in wiring {
            let bit = ((index >> q) & 1) as u64;
            key = (key & !(1 << c)) | (bit << c);
        }
        *acc.entry(key).or_insert(0.0) += p;
    }
    Probabilities {
        n_bits: n_clbits,
        probs: acc
            .into_iter()
            .filter(|&(_, p)| p > NEGLIGIBLE)
            .map(|(k, p)| (render_key(k, n_clbits), p))
            .collect(),
    }
}

/// Draws `shots` independent outcomes by inverse-CDF lookup.
pub fn sample_probabilities(probs: &Probabilities, shots: u64, rng: &mut GenRng) -> OutputDistribution {
    let keys: Vec<&String> = probs.probs.keys().collect();
    let mut cdf = Vec::with_capacity(keys.len());
    let mut running = 0.0;
    for k in &keys {
        running += probs.probs[*k];
        cdf.push(running);
    }
    let mut counts = vec![0u64; keys.len()];
    if !keys.is_empty() {
        for _ in 0..shots {
            let u = rng.gen::<f64>() * running;
            let i = cdf.partition_point(|&c| c <= u).min(keys.len() - 1);
            counts[i] += 1;
        }
    }
    OutputDistribution::from_counts(probs.n_bits, keys.into_iter().cloned().zip(counts))
        .expect("keys come from a valid distribution")
}

/// Samples `shots` measurement outcomes of `sv`.
pub fn sample(sv: &Statevector, wiring: &[(usize, usize)], n_clbits: usize, shots: u64, rng: &mut GenRng) -> OutputDistribution {
    sample_probabilities(&measurement_probabilities(sv, wiring, n_clbits), shots, rng)
}

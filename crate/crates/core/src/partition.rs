//! Hoppe-Ewens urn over class-assignment vectors.
//!
//! Class vectors use 0-based labels in order of first appearance: `z[0] = 0`
//! and every `z[j]` is at most one above the largest earlier label.

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gamma};

/// Urn weight of the new-class ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UrnParams {
    alpha: f64,
}

impl UrnParams {
    /// `alpha = 0` is the degenerate one-class limit.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "urn weight alpha must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(UrnParams { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Draw a class vector for `d` nodes.
///
/// Node `j+1` opens a new class with probability `alpha / (alpha + j)` and
/// joins existing class `i` with probability `m_i / (alpha + j)`.
pub fn sample_partition<R: Rng + ?Sized>(d: usize, params: UrnParams, rng: &mut R) -> Vec<usize> {
    let mut z = Vec::with_capacity(d);
    if d == 0 {
        return z;
    }
    z.push(0);
    if params.alpha == 0.0 {
        z.resize(d, 0);
        return z;
    }
    let mut counts = vec![1usize];
    for j in 1..d {
        let u = rng.random::<f64>() * (params.alpha + j as f64);
        let mut acc = 0.0;
        let mut label = counts.len();
        for (i, &m) in counts.iter().enumerate() {
            acc += m as f64;
            if u < acc {
                label = i;
                break;
            }
        }
        if label == counts.len() {
            counts.push(0);
        }
        counts[label] += 1;
        z.push(label);
    }
    z
}

/// Check that `z` is an urn-order class vector and return its occupation
/// counts.
pub fn occupation_counts(z: &[usize]) -> Result<Vec<usize>> {
    let mut counts: Vec<usize> = Vec::new();
    for (j, &c) in z.iter().enumerate() {
        if c > counts.len() || (j == 0 && c != 0) {
            return Err(Error::InfeasiblePartition(format!(
                "entry {} is {} but at most {} is reachable",
                j + 1,
                c + 1,
                counts.len() + 1
            )));
        }
        if c == counts.len() {
            counts.push(0);
        }
        counts[c] += 1;
    }
    Ok(counts)
}

/// `ln P(z) = K ln(alpha) + ln Γ(alpha) - ln Γ(d + alpha) + Σ ln (m_k - 1)!`
pub fn log_partition_prob(z: &[usize], params: UrnParams) -> Result<f64> {
    let counts = occupation_counts(z)?;
    Ok(log_prob_from_counts(&counts, params.alpha))
}

/// Urn probability of any class vector with these occupation counts.
pub(crate) fn log_prob_from_counts(counts: &[usize], alpha: f64) -> f64 {
    let d: usize = counts.iter().sum();
    let k = counts.len();
    if d == 0 {
        return 0.0;
    }
    if alpha == 0.0 {
        return if k == 1 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * alpha.ln() + ln_gamma(alpha) - ln_gamma(d as f64 + alpha)
        + counts.iter().map(|&m| ln_factorial(m - 1)).sum::<f64>()
}

/// `E[K_d] = Σ_{i=1}^{d} alpha / (alpha + i - 1)`
pub fn expected_num_cells(d: usize, alpha: f64) -> f64 {
    (1..=d).map(|i| alpha / (alpha + (i - 1) as f64)).sum()
}

/// Every urn-order class vector of length `d` (Bell(d) of them).
pub fn enumerate_partitions(d: usize) -> Vec<Vec<usize>> {
    fn extend(z: &mut Vec<usize>, max: usize, d: usize, out: &mut Vec<Vec<usize>>) {
        if z.len() == d {
            out.push(z.clone());
            return;
        }
        for c in 0..=max + 1 {
            z.push(c);
            extend(z, max.max(c), d, out);
            z.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        out.push(Vec::new());
        return out;
    }
    extend(&mut vec![0], 0, d, &mut out);
    out
}

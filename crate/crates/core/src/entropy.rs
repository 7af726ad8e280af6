//! Differential entropy estimators for one-dimensional samples.
//!
//! A result of `-inf` is a legitimate outcome (zero spacings or neighbor
//! distances), not an error.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats::{self, digamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntropyMethod {
    /// Duplicate removal followed by a 1-spacing estimate.
    OneSp,
    /// m-spacing estimate with `m = floor(sqrt(N))`.
    Vasicek,
    /// Kozachenko-Leonenko with the third nearest neighbor.
    KL3NN,
    /// Entropy of a Gaussian with the sample variance.
    Gaussian,
    MaxEnt1,
    MaxEnt2,
}

impl EntropyMethod {
    pub const ALL: [EntropyMethod; 6] = [
        EntropyMethod::OneSp,
        EntropyMethod::Vasicek,
        EntropyMethod::KL3NN,
        EntropyMethod::Gaussian,
        EntropyMethod::MaxEnt1,
        EntropyMethod::MaxEnt2,
    ];

    /// Short name used in method identifiers.
    pub fn tag(self) -> &'static str {
        match self {
            EntropyMethod::OneSp => "1sp",
            EntropyMethod::Vasicek => "sp1",
            EntropyMethod::KL3NN => "3NN",
            EntropyMethod::Gaussian => "Gau",
            EntropyMethod::MaxEnt1 => "ME1",
            EntropyMethod::MaxEnt2 => "ME2",
        }
    }

    fn min_len(self) -> usize {
        match self {
            EntropyMethod::KL3NN => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for EntropyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EntropyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntropyMethod::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::UnknownMethod(format!("entropy estimator {s:?}")))
    }
}

/// Sorted distinct values with their multiplicities.
pub fn dedupe_sorted(x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let s = stats::sorted(x);
    let mut values: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for v in s {
        match values.last() {
            Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
            _ => {
                values.push(v);
                counts.push(1);
            }
        }
    }
    (values, counts)
}

pub fn entropy_estimate(x: &[f64], method: EntropyMethod) -> Result<f64> {
    if x.len() < method.min_len() {
        return Err(Error::TooFewSamples {
            needed: method.min_len(),
            got: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(match method {
        EntropyMethod::OneSp => one_spacing(x),
        EntropyMethod::Vasicek => vasicek(x),
        EntropyMethod::KL3NN => knn(x, 3),
        EntropyMethod::Gaussian => gaussian(x),
        EntropyMethod::MaxEnt1 => maxent(x, false),
        EntropyMethod::MaxEnt2 => maxent(x, true),
    })
}

fn one_spacing(x: &[f64]) -> f64 {
    let (u, _) = dedupe_sorted(x);
    let n = u.len();
    if n < 2 {
        return f64::NEG_INFINITY;
    }
    let spacing: f64 = u.windows(2).map(|w| (w[1] - w[0]).ln()).sum::<f64>() / (n - 1) as f64;
    digamma(n as f64) - digamma(1.0) + spacing
}

fn vasicek(x: &[f64]) -> f64 {
    let s = stats::sorted(x);
    let n = s.len();
    let m = ((n as f64).sqrt().floor() as usize).max(1);
    let scale = n as f64 / (2.0 * m as f64);
    let total: f64 = (0..n)
        .map(|i| {
            let hi = s[(i + m).min(n - 1)];
            let lo = s[i.saturating_sub(m)];
            (scale * (hi - lo)).ln()
        })
        .sum();
    total / n as f64
}

/// Distance from each point to its k-th nearest neighbor (1-D, via sorting).
fn kth_neighbor_distances(x: &[f64], k: usize) -> Vec<f64> {
    let s = stats::sorted(x);
    let n = s.len();
    (0..n)
        .map(|i| {
            // merge the two sorted neighbor lists walking outward
            let (mut l, mut r) = (i, i);
            let mut d = 0.0;
            for _ in 0..k {
                let dl = if l > 0 { s[i] - s[l - 1] } else { f64::INFINITY };
                let dr = if r + 1 < n { s[r + 1] - s[i] } else { f64::INFINITY };
                if dl <= dr {
                    l -= 1;
                    d = dl;
                } else {
                    r += 1;
                    d = dr;
                }
            }
            d
        })
        .collect()
}

fn knn(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let logs: f64 = kth_neighbor_distances(x, k).iter().map(|d| d.ln()).sum();
    digamma(n as f64) - digamma(k as f64) + 2f64.ln() + logs / n as f64
}

fn gaussian(x: &[f64]) -> f64 {
    0.5 * (2.0 * PI * E).ln() + 0.5 * stats::pop_variance(x).ln()
}

const ME_K1: f64 = 36.0 / (8.0 * 1.732_050_807_568_877_2 - 9.0);

/// Negentropy approximation from the three expectations
/// `E[y exp(-y^2/2)]`, `E|y|` and `E[exp(-y^2/2)]` of a whitened variable.
pub(crate) fn maxent_negentropy(odd: f64, abs: f64, gauss: f64, second: bool) -> f64 {
    if second {
        let k2 = 24.0 / (16.0 * 3f64.sqrt() - 27.0);
        ME_K1 * odd * odd + k2 * (gauss - 0.5f64.sqrt()).powi(2)
    } else {
        let k2 = 1.0 / (2.0 - 6.0 / PI);
        ME_K1 * odd * odd + k2 * (abs - (2.0 / PI).sqrt()).powi(2)
    }
}

fn maxent(x: &[f64], second: bool) -> f64 {
    let n = x.len() as f64;
    let m = stats::mean(x);
    // unbiased sd
    let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return f64::NEG_INFINITY;
    }
    let (mut odd, mut abs, mut gauss) = (0.0, 0.0, 0.0);
    for v in x {
        let y = (v - m) / sd;
        let g = (-0.5 * y * y).exp();
        odd += y * g;
        abs += y.abs();
        gauss += g;
    }
    let h_white = 0.5 * (2.0 * PI * E).ln() - maxent_negentropy(odd / n, abs / n, gauss / n, second);
    h_white + sd.ln()
}

//! Benchmark evaluation: data perturbations, weighted accuracy with exact
//! binomial intervals, weighted ROC curves and bootstrapped AUC.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::entropy::dedupe_sorted;
use crate::error::{Error, Result};
use crate::pair::{Direction, PairSample};
use crate::stats::rng_stream;
use crate::table::to_csv;

pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const SMALL_NOISE_SD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub id: String,
    pub weight: f64,
    pub truth: Direction,
    pub decision: Direction,
    pub confidence: f64,
}

impl DecisionRecord {
    /// Undecided or non-finite confidences are ranked at 0.
    pub fn new(id: impl Into<String>, weight: f64, truth: Direction, decision: Direction, confidence: f64) -> Self {
        let confidence = if decision == Direction::Undecided || !confidence.is_finite() {
            0.0
        } else {
            confidence
        };
        DecisionRecord {
            id: id.into(),
            weight,
            truth,
            decision,
            confidence,
        }
    }

    pub fn correct(&self) -> bool {
        self.decision != Direction::Undecided && self.decision == self.truth
    }

    /// The record as if X and Y had been exchanged.
    pub fn swapped(&self) -> Self {
        DecisionRecord {
            id: self.id.clone(),
            weight: self.weight,
            truth: self.truth.flipped(),
            decision: self.decision.flipped(),
            confidence: -self.confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbKind {
    Unperturbed,
    Discretized,
    Undiscretized,
    SmallNoise,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 4] = [
        PerturbKind::Unperturbed,
        PerturbKind::Discretized,
        PerturbKind::Undiscretized,
        PerturbKind::SmallNoise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbKind::Unperturbed => "unperturbed",
            PerturbKind::Discretized => "discretized",
            PerturbKind::Undiscretized => "undiscretized",
            PerturbKind::SmallNoise => "small-noise",
        }
    }
}

impl fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerturbKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown perturbation {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
struct MergeCandidate {
    cost: f64,
    left: usize,
    stamp: (u64, u64),
}

impl PartialEq for MergeCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for MergeCandidate {}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MergeCandidate {
    // reversed: BinaryHeap pops the cheapest, then leftmost, merge first
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.left.cmp(&self.left))
    }
}

/// Merges adjacent distinct values until `target` remain. Each merge joins
/// the two neighbors whose replacement by their count-weighted mean adds
/// the least absolute error.
pub fn discretize(x: &[f64], target: usize) -> Vec<f64> {
    let (values, counts) = dedupe_sorted(x);
    let k = values.len();
    if target == 0 || k <= target {
        return x.to_vec();
    }
    let mut value = values.clone();
    let mut count: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut next: Vec<Option<usize>> = (0..k).map(|i| (i + 1 < k).then_some(i + 1)).collect();
    let mut prev: Vec<Option<usize>> = (0..k).map(|i| i.checked_sub(1)).collect();
    let mut version = vec![0u64; k];
    let mut owner: Vec<usize> = (0..k).collect();

    let cost = |value: &[f64], count: &[f64], a: usize, b: usize| {
        2.0 * count[a] * count[b] * (value[b] - value[a]) / (count[a] + count[b])
    };
    let mut heap = BinaryHeap::new();
    for i in 0..k - 1 {
        heap.push(MergeCandidate {
            cost: cost(&value, &count, i, i + 1),
            left: i,
            stamp: (0, 0),
        });
    }
    let mut live = k;
    while live > target {
        let c = heap.pop().expect("a merge is always available");
        let Some(r) = next[c.left] else { continue };
        if owner[c.left] != c.left || (version[c.left], version[r]) != c.stamp {
            continue;
        }
        let l = c.left;
        let total = count[l] + count[r];
        value[l] = (count[l] * value[l] + count[r] * value[r]) / total;
        count[l] = total;
        owner[r] = l;
        next[l] = next[r];
        if let Some(n) = next[r] {
            prev[n] = Some(l);
        }
        version[l] += 1;
        live -= 1;
        if let Some(p) = prev[l] {
            heap.push(MergeCandidate {
                cost: cost(&value, &count, p, l),
                left: p,
                stamp: (version[p], version[l]),
            });
        }
        if let Some(n) = next[l] {
            heap.push(MergeCandidate {
                cost: cost(&value, &count, l, n),
                left: l,
                stamp: (version[l], version[n]),
            });
        }
    }
    // resolve each original distinct value to its surviving group
    let find = |mut i: usize| {
        while owner[i] != i {
            i = owner[i];
        }
        i
    };
    let index: HashMap<u64, usize> = values.iter().enumerate().map(|(i, v)| (v.to_bits(), i)).collect();
    x.iter().map(|v| value[find(index[&v.to_bits()])]).collect()
}

/// Adds `U[0, z' - z)` to each value `z`, with `z'` the next larger
/// distinct value; the maximum is left alone.
pub fn undiscretize<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Vec<f64> {
    let (values, _) = dedupe_sorted(x);
    let index: HashMap<u64, usize> = values.iter().enumerate().map(|(i, v)| (v.to_bits(), i)).collect();
    x.iter()
        .map(|&z| {
            let i = index[&z.to_bits()];
            match values.get(i + 1) {
                Some(&up) => z + rng.random::<f64>() * (up - z),
                None => z,
            }
        })
        .collect()
}

pub fn perturb<R: Rng + ?Sized>(pair: &PairSample, kind: PerturbKind, rng: &mut R) -> Result<PairSample> {
    pair.validate()?;
    let mut out = pair.clone();
    match kind {
        PerturbKind::Unperturbed => {}
        PerturbKind::Discretized => {
            let ux = dedupe_sorted(&pair.x).0.len();
            let uy = dedupe_sorted(&pair.y).0.len();
            if ux > uy {
                out.x = discretize(&pair.x, uy);
            } else if uy > ux {
                out.y = discretize(&pair.y, ux);
            }
        }
        PerturbKind::Undiscretized => {
            out.x = undiscretize(&pair.x, rng);
            out.y = undiscretize(&pair.y, rng);
        }
        PerturbKind::SmallNoise => {
            let noise = Normal::new(0.0, SMALL_NOISE_SD).expect("valid sd");
            out.x.iter_mut().for_each(|v| *v += noise.sample(rng));
            out.y.iter_mut().for_each(|v| *v += noise.sample(rng));
        }
    }
    Ok(out)
}

/// Standardize both variables, then apply the perturbation.
pub fn preprocess<R: Rng + ?Sized>(pair: &PairSample, kind: PerturbKind, rng: &mut R) -> Result<PairSample> {
    perturb(&pair.standardized()?, kind, rng)
}

/// Equal weights summing to one within each dataset label.
pub fn assign_weights(labels: &[String]) -> Vec<f64> {
    let mut size: HashMap<&str, usize> = HashMap::new();
    for l in labels {
        *size.entry(l.as_str()).or_default() += 1;
    }
    labels.iter().map(|l| 1.0 / size[l.as_str()] as f64).collect()
}

/// Swaps the roles of X and Y for every second record of each group, a
/// group being a maximal run of consecutive records with equal weight.
pub fn balance(records: &[DecisionRecord]) -> Vec<DecisionRecord> {
    let mut out = Vec::with_capacity(records.len());
    let mut pos = 0usize;
    for (i, r) in records.iter().enumerate() {
        if i > 0 && records[i - 1].weight != r.weight {
            pos = 0;
        }
        out.push(if pos % 2 == 1 { r.swapped() } else { r.clone() });
        pos += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyResult {
    pub accuracy: f64,
    pub ci68: (f64, f64),
    pub ci95: (f64, f64),
    pub n_eff: u64,
    pub k_eff: u64,
}

/// Inverse of the regularized incomplete beta function in `x`, by bisection.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact binomial interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, kf, nf - kf + 1.0)
    };
    let hi = if k == n {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, kf + 1.0, nf - kf)
    };
    (lo, hi)
}

pub fn weighted_accuracy(records: &[DecisionRecord]) -> Result<AccuracyResult> {
    let total: f64 = records.iter().map(|r| r.weight).sum();
    if records.is_empty() || total.is_nan() || total <= 0.0 {
        return Err(Error::EmptyInput);
    }
    let hits: f64 = records.iter().filter(|r| r.correct()).map(|r| r.weight).sum();
    let n_eff = total.round() as u64;
    let k_eff = (hits.round() as u64).min(n_eff);
    Ok(AccuracyResult {
        accuracy: hits / total,
        ci68: clopper_pearson(k_eff, n_eff, 0.68),
        ci95: clopper_pearson(k_eff, n_eff, 0.95),
        n_eff,
        k_eff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Records with confidence at or above this value count as X -> Y.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    pub auc: f64,
    pub ci95: (f64, f64),
    pub curve: Vec<RocPoint>,
}

fn class_weights(records: &[DecisionRecord]) -> (f64, f64) {
    let pos = records
        .iter()
        .filter(|r| r.truth == Direction::XtoY)
        .map(|r| r.weight)
        .sum();
    let neg = records
        .iter()
        .filter(|r| r.truth == Direction::YtoX)
        .map(|r| r.weight)
        .sum();
    (pos, neg)
}

/// Weighted ROC curve; positives are records whose truth is X -> Y.
pub fn roc_curve(records: &[DecisionRecord]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_weights(records);
    if !(pos > 0.0 && neg > 0.0) {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<&DecisionRecord> = records.iter().filter(|r| r.truth != Direction::Undecided).collect();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].confidence;
        while i < sorted.len() && sorted[i].confidence == s {
            match sorted[i].truth {
                Direction::XtoY => tp += sorted[i].weight,
                _ => fp += sorted[i].weight,
            }
            i += 1;
        }
        curve.push(RocPoint {
            threshold: s,
            fpr: fp / neg,
            tpr: tp / pos,
        });
    }
    Ok(curve)
}

pub fn auc_from_curve(curve: &[RocPoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn roc_auc(records: &[DecisionRecord], bootstrap: usize, seed: u64) -> Result<RocResult> {
    let curve = roc_curve(records)?;
    let auc = auc_from_curve(&curve);
    let n = records.len();
    let mut samples: Vec<f64> = (0..bootstrap)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = rng_stream(seed, b as u64);
            let resample: Vec<DecisionRecord> = (0..n).map(|_| records[rng.random_range(0..n)].clone()).collect();
            roc_curve(&resample).ok().map(|c| auc_from_curve(&c))
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let ci95 = if samples.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (percentile(&samples, 0.025), percentile(&samples, 0.975))
    };
    Ok(RocResult { auc, ci95, curve })
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Weighted share of true X -> Y records ranked above `theta`.
pub fn recall(records: &[DecisionRecord], theta: f64) -> f64 {
    let (pos, _) = class_weights(records);
    let hit: f64 = records
        .iter()
        .filter(|r| r.truth == Direction::XtoY && r.confidence > theta)
        .map(|r| r.weight)
        .sum();
    hit / pos
}

/// Weighted share of true X -> Y records among those ranked above `theta`.
pub fn precision(records: &[DecisionRecord], theta: f64) -> f64 {
    let above: Vec<&DecisionRecord> = records.iter().filter(|r| r.confidence > theta).collect();
    let all: f64 = above.iter().map(|r| r.weight).sum();
    let hit: f64 = above
        .iter()
        .filter(|r| r.truth == Direction::XtoY)
        .map(|r| r.weight)
        .sum();
    hit / all
}

pub fn roc_csv(curve: &[RocPoint]) -> String {
    to_csv(
        &["threshold", "fpr", "tpr"],
        curve
            .iter()
            .map(|p| [p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()]),
    )
}

/// A minimal standalone SVG plot of the curve and the chance diagonal.
pub fn roc_svg(curve: &[RocPoint], title: &str) -> String {
    let (size, pad) = (400.0, 40.0);
    let span = size - 2.0 * pad;
    let pt = |x: f64, y: f64| format!("{:.2},{:.2}", pad + x * span, size - pad - y * span);
    let path: Vec<String> = curve.iter().map(|p| pt(p.fpr, p.tpr)).collect();
    let esc = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n",
            "<rect x=\"{p}\" y=\"{p}\" width=\"{w}\" height=\"{w}\" fill=\"none\" stroke=\"black\"/>\n",
            "<line x1=\"{p}\" y1=\"{b}\" x2=\"{b}\" y2=\"{p}\" stroke=\"grey\" stroke-dasharray=\"4 4\"/>\n",
            "<polyline points=\"{path}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
            "<text x=\"{c}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{t}</text>\n",
            "<text x=\"{c}\" y=\"{xl}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">false positive rate</text>\n",
            "<text x=\"14\" y=\"{c}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {c})\">true positive rate</text>\n",
            "</svg>\n"
        ),
        s = size,
        p = pad,
        w = span,
        b = size - pad,
        c = size / 2.0,
        xl = size - 10.0,
        path = path.join(" "),
        t = esc,
    )
}

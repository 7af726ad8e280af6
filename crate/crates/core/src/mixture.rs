//! One-dimensional Gaussian mixtures fitted by minimum message length:
//! component-wise EM that annihilates weak components, started from many
//! components and pruned down to one.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::{self, rng_stream};

pub const MAX_COMPONENTS: usize = 25;
pub const MAX_SWEEPS: usize = 500;
pub const REL_TOL: f64 = 1e-7;
/// Variance floor relative to the sample variance.
pub const VAR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub k: usize,
    /// Message length of the data under the fitted parameters.
    pub codelength: f64,
}

impl MixtureModel {
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&v| {
                let terms: Vec<f64> = (0..self.k)
                    .map(|j| self.weights[j].ln() + log_normal(v, self.means[j], self.variances[j]))
                    .collect();
                log_sum_exp(&terms)
            })
            .sum()
    }
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// `sum_j log(N a_j / 12) + k/2 log(N/12) + 3k/2 - log p(x)`, two free
/// parameters per component.
pub fn mixture_codelength(x: &[f64], weights: &[f64], means: &[f64], variances: &[f64]) -> f64 {
    let n = x.len() as f64;
    let k = weights.len();
    let model = MixtureModel {
        weights: weights.to_vec(),
        means: means.to_vec(),
        variances: variances.to_vec(),
        k,
        codelength: 0.0,
    };
    penalty(n, weights) - model.log_likelihood(x)
}

fn penalty(n: f64, weights: &[f64]) -> f64 {
    let k = weights.len() as f64;
    weights.iter().map(|a| (n * a / 12.0).ln()).sum::<f64>() + 0.5 * k * (n / 12.0).ln() + 1.5 * k
}

// weights, means, variances
type Params = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Working state. `w` are unnormalized weights with total `z`; per point
/// `total[i] * exp(shift[i]) = sum_j w_j N(x_i | j)`.
struct State<'a> {
    x: &'a [f64],
    w: Vec<f64>,
    z: f64,
    mu: Vec<f64>,
    var: Vec<f64>,
    alive: Vec<bool>,
    /// log density of component j at point i, row-major by component
    ld: Vec<f64>,
    shift: Vec<f64>,
    total: Vec<f64>,
}

impl State<'_> {
    fn n(&self) -> usize {
        self.x.len()
    }

    fn k(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    fn refresh_density(&mut self, j: usize) {
        let n = self.n();
        for i in 0..n {
            self.ld[j * n + i] = log_normal(self.x[i], self.mu[j], self.var[j]);
        }
    }

    fn recompute_point(&mut self, i: usize) {
        let n = self.n();
        let terms: Vec<f64> = (0..self.w.len())
            .filter(|&j| self.alive[j])
            .map(|j| self.w[j].ln() + self.ld[j * n + i])
            .collect();
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.shift[i] = m;
        self.total[i] = terms.iter().map(|t| (t - m).exp()).sum();
    }

    fn recompute_all(&mut self) {
        self.z = (0..self.w.len()).filter(|&j| self.alive[j]).map(|j| self.w[j]).sum();
        for i in 0..self.n() {
            self.recompute_point(i);
        }
    }

    fn log_p(&self, i: usize) -> f64 {
        self.shift[i] + self.total[i].ln() - self.z.ln()
    }

    /// Replaces component j's contribution `old_w * exp(old_ld)` by the
    /// current one, falling back to an exact sum when cancellation bites.
    fn swap_contribution(&mut self, j: usize, old_w: f64, old_ld: &[f64]) {
        let n = self.n();
        for (i, &old_ld) in old_ld.iter().enumerate().take(n) {
            let old = if old_w > 0.0 {
                old_w.ln() + old_ld
            } else {
                f64::NEG_INFINITY
            };
            let new = if self.alive[j] {
                self.w[j].ln() + self.ld[j * n + i]
            } else {
                f64::NEG_INFINITY
            };
            let t = self.total[i] + (new - self.shift[i]).exp() - (old - self.shift[i]).exp();
            if !(t.is_finite() && t > 1e-8 * self.total[i]) || new - self.shift[i] > 30.0 {
                self.recompute_point(i);
            } else {
                self.total[i] = t;
            }
        }
    }

    fn normalized(&self) -> Params {
        let idx: Vec<usize> = (0..self.w.len()).filter(|&j| self.alive[j]).collect();
        (
            idx.iter().map(|&j| self.w[j] / self.z).collect(),
            idx.iter().map(|&j| self.mu[j]).collect(),
            idx.iter().map(|&j| self.var[j]).collect(),
        )
    }

    fn codelength(&self) -> f64 {
        let (a, _, _) = self.normalized();
        let ll: f64 = (0..self.n()).map(|i| self.log_p(i)).sum();
        penalty(self.n() as f64, &a) - ll
    }

    /// One pass over all live components. Returns false if none survive.
    fn sweep(&mut self, floor: f64) -> bool {
        let n = self.n();
        let nf = n as f64;
        for m in 0..self.w.len() {
            if !self.alive[m] {
                continue;
            }
            let lw = (self.w[m] / self.z).ln();
            let post: Vec<f64> = (0..n)
                .map(|i| (lw + self.ld[m * n + i] - self.log_p(i)).exp())
                .collect();
            let count: f64 = post.iter().sum();

            let old_w = self.w[m];
            let old_ld: Vec<f64> = self.ld[m * n..(m + 1) * n].to_vec();
            // new normalized weight relative to the others
            let share = (count - 1.0).max(0.0) / nf;
            let rest = self.z - old_w;
            let new_w = share * self.z;
            let alpha = new_w / (rest + new_w);
            if alpha * nf < 1.0 {
                self.alive[m] = false;
                self.w[m] = 0.0;
                self.z = rest;
                if self.k() == 0 {
                    return false;
                }
            } else {
                self.w[m] = new_w;
                self.z = rest + new_w;
                let mu: f64 = post.iter().zip(self.x).map(|(p, v)| p * v).sum::<f64>() / count;
                let var: f64 = post
                    .iter()
                    .zip(self.x)
                    .map(|(p, v)| p * (v - mu) * (v - mu))
                    .sum::<f64>()
                    / count;
                self.mu[m] = mu;
                self.var[m] = var.max(floor);
                self.refresh_density(m);
            }
            self.swap_contribution(m, old_w, &old_ld);
        }
        // keep weights on a unit scale
        let z = self.z;
        self.w.iter_mut().for_each(|w| *w /= z);
        self.total.iter_mut().for_each(|t| *t /= z);
        self.z = 1.0;
        true
    }
}

pub fn fit_gmm_mml(x: &[f64], seed: u64) -> Result<MixtureModel> {
    fit_gmm_mml_traced(x, seed).map(|(m, _)| m)
}

/// Also returns the `(k, codelength)` reached after every sweep.
pub fn fit_gmm_mml_traced(x: &[f64], seed: u64) -> Result<(MixtureModel, Vec<(usize, f64)>)> {
    let n = x.len();
    if n < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: n });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let total_var = stats::pop_variance(x);
    if total_var == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let floor = VAR_FLOOR * total_var;
    let k_max = MAX_COMPONENTS.min(n / 10);

    // one seeded draw inside each quantile bin
    let sorted = stats::sorted(x);
    let mut rng = rng_stream(seed, 0);
    let mu: Vec<f64> = (0..k_max)
        .map(|j| {
            let (lo, hi) = (j * n / k_max, (j + 1) * n / k_max);
            sorted[rng.random_range(lo..hi)]
        })
        .collect();

    let mut st = State {
        x,
        w: vec![1.0 / k_max as f64; k_max],
        z: 1.0,
        mu,
        var: vec![(total_var / 10.0).max(floor); k_max],
        alive: vec![true; k_max],
        ld: vec![0.0; k_max * n],
        shift: vec![0.0; n],
        total: vec![0.0; n],
    };
    for j in 0..k_max {
        st.refresh_density(j);
    }
    st.recompute_all();

    let mut trace = Vec::new();
    let mut best: Option<(f64, Params)> = None;
    loop {
        let mut prev = st.codelength();
        for _ in 0..MAX_SWEEPS {
            if !st.sweep(floor) {
                break;
            }
            let cur = st.codelength();
            trace.push((st.k(), cur));
            let done = (prev - cur).abs() < REL_TOL * prev.abs();
            prev = cur;
            if done {
                break;
            }
        }
        if st.k() == 0 {
            break;
        }
        if best.as_ref().is_none_or(|(l, _)| prev < *l) {
            best = Some((prev, st.normalized()));
        }
        if st.k() <= 1 {
            break;
        }
        // annihilate the weakest survivor and continue from there
        let weakest = (0..st.w.len())
            .filter(|&j| st.alive[j])
            .min_by(|&a, &b| st.w[a].total_cmp(&st.w[b]))
            .expect("at least two live components");
        st.alive[weakest] = false;
        st.w[weakest] = 0.0;
        st.recompute_all();
    }

    let (_, (weights, means, variances)) =
        best.ok_or_else(|| Error::FitFailed("every mixture component was annihilated".into()))?;
    let codelength = mixture_codelength(x, &weights, &means, &variances);
    Ok((
        MixtureModel {
            k: weights.len(),
            weights,
            means,
            variances,
            codelength,
        },
        trace,
    ))
}

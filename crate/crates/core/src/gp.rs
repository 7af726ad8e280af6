//! Exact Gaussian-process regression: squared-exponential covariance,
//! constant mean, Gaussian noise, type-II maximum likelihood fitting.

use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::{Mat, Side};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::median_bandwidth;
use crate::optim::{bfgs, BfgsOptions, Objective};
use crate::stats::{self, rng_stream};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal jitter tried in order when a Cholesky factorization fails.
pub const JITTER_LADDER: [f64; 8] = [0.0, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];

/// Largest training set handed to the exact GP.
pub const SUBSAMPLE_CAP: usize = 1000;

/// Covariance `s^2 exp(-d^2 / (2 l^2)) + sigma^2 [i == j]`, mean `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub log_bandwidth: f64,
    pub log_signal: f64,
    pub log_noise: f64,
    pub mean: f64,
}

impl GpHyper {
    pub fn new(bandwidth: f64, signal: f64, noise: f64, mean: f64) -> Result<Self> {
        let h = GpHyper {
            log_bandwidth: bandwidth.ln(),
            log_signal: signal.ln(),
            log_noise: noise.ln(),
            mean,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.bandwidth(), self.signal_var(), self.noise_var()]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.mean.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid GP hyperparameters {self:?}")))
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.log_bandwidth.exp()
    }

    pub fn signal_var(&self) -> f64 {
        (2.0 * self.log_signal).exp()
    }

    pub fn noise_sd(&self) -> f64 {
        self.log_noise.exp()
    }

    pub fn noise_var(&self) -> f64 {
        (2.0 * self.log_noise).exp()
    }

    fn to_vec(self) -> Vec<f64> {
        vec![self.log_bandwidth, self.log_signal, self.log_noise, self.mean]
    }

    fn from_slice(p: &[f64]) -> Self {
        GpHyper {
            log_bandwidth: p[0],
            log_signal: p[1],
            log_noise: p[2],
            mean: p[3],
        }
    }

    fn cov(&self, a: f64, b: f64) -> f64 {
        let l = self.bandwidth();
        self.signal_var() * (-(a - b) * (a - b) / (2.0 * l * l)).exp()
    }
}

/// A fitted GP, ready for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    pub hyper: GpHyper,
    pub train_x: Vec<f64>,
    /// `(K + sigma^2 I)^{-1} (y - c)`
    pub train_alpha: Vec<f64>,
    /// Negative log marginal likelihood of the training data.
    pub nlml: f64,
}

impl GpModel {
    /// Conditions the GP on `(x, y)` at fixed hyperparameters.
    pub fn new(x: &[f64], y: &[f64], hyper: GpHyper) -> Result<Self> {
        check_xy(x, y, 1)?;
        hyper.validate()?;
        let sq = sq_dists(x);
        let ev = evaluate(&sq, y, &hyper, true, false).ok_or(Error::NotPositiveDefinite)?;
        Ok(GpModel {
            hyper,
            train_x: x.to_vec(),
            train_alpha: ev.alpha,
            nlml: ev.nlml,
        })
    }

    pub fn predict(&self, x_test: &[f64]) -> Vec<f64> {
        gp_predict_mean(self, x_test)
    }
}

fn check_xy(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min {
        return Err(Error::TooFewSamples {
            needed: min,
            got: x.len(),
        });
    }
    if let Some(index) = x.iter().zip(y).position(|(a, b)| !(a.is_finite() && b.is_finite())) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

fn sq_dists(x: &[f64]) -> Mat<f64> {
    Mat::from_fn(x.len(), x.len(), |i, j| (x[i] - x[j]) * (x[i] - x[j]))
}

struct Evaluation {
    nlml: f64,
    alpha: Vec<f64>,
    grad: Option<Vec<f64>>,
}

/// NLML (and optionally its gradient in the log parameters and the mean).
/// With `jitter` the ladder is climbed on factorization failure.
fn evaluate(sq: &Mat<f64>, y: &[f64], h: &GpHyper, jitter: bool, want_grad: bool) -> Option<Evaluation> {
    let n = y.len();
    let l2 = h.bandwidth().powi(2);
    let sf2 = h.signal_var();
    let sn2 = h.noise_var();
    if !(l2.is_finite() && l2 > 0.0 && sf2.is_finite() && sn2.is_finite() && h.mean.is_finite()) {
        return None;
    }
    let kf = Mat::from_fn(n, n, |i, j| sf2 * (-sq[(i, j)] / (2.0 * l2)).exp());
    let ladder: &[f64] = if jitter { &JITTER_LADDER } else { &JITTER_LADDER[..1] };
    let mut factor = None;
    for &eps in ladder {
        let a = Mat::from_fn(n, n, |i, j| kf[(i, j)] + if i == j { sn2 + eps } else { 0.0 });
        if let Ok(llt) = Llt::new(a.as_ref(), Side::Lower) {
            factor = Some(llt);
            break;
        }
    }
    let llt = factor?;

    let mut alpha = Mat::from_fn(n, 1, |i, _| y[i] - h.mean);
    let resid: Vec<f64> = (0..n).map(|i| alpha[(i, 0)]).collect();
    llt.solve_in_place(alpha.as_mut());
    let alpha: Vec<f64> = (0..n).map(|i| alpha[(i, 0)]).collect();
    let lfac = llt.L();
    let logdet: f64 = (0..n).map(|i| lfac[(i, i)].ln()).sum::<f64>();
    let quad: f64 = resid.iter().zip(&alpha).map(|(r, a)| r * a).sum();
    let nlml = 0.5 * quad + logdet + 0.5 * n as f64 * LN_2PI;
    if !nlml.is_finite() {
        return None;
    }

    let grad = if want_grad {
        let inv = llt.inverse();
        let mut g_l = 0.0;
        let mut g_s = 0.0;
        let mut tr_w = 0.0;
        for j in 0..n {
            for i in 0..n {
                let w = inv[(i, j)] - alpha[i] * alpha[j];
                g_l += w * kf[(i, j)] * sq[(i, j)] / l2;
                g_s += w * kf[(i, j)];
            }
            tr_w += inv[(j, j)] - alpha[j] * alpha[j];
        }
        let g_c = -alpha.iter().sum::<f64>();
        let g = vec![0.5 * g_l, g_s, sn2 * tr_w, g_c];
        if g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(g)
    } else {
        None
    };
    Some(Evaluation { nlml, alpha, grad })
}

/// `1/2 log|2 pi (K + sigma^2 I)| + 1/2 (y - c)^T (K + sigma^2 I)^{-1} (y - c)`.
pub fn gp_nlml(x: &[f64], y: &[f64], hyper: &GpHyper) -> Result<f64> {
    check_xy(x, y, 1)?;
    hyper.validate()?;
    evaluate(&sq_dists(x), y, hyper, false, false)
        .map(|e| e.nlml)
        .ok_or(Error::NotPositiveDefinite)
}

/// NLML together with its gradient in
/// `(log_bandwidth, log_signal, log_noise, mean)`.
pub fn gp_nlml_grad(x: &[f64], y: &[f64], hyper: &GpHyper) -> Result<(f64, [f64; 4])> {
    check_xy(x, y, 1)?;
    hyper.validate()?;
    let e = evaluate(&sq_dists(x), y, hyper, false, true).ok_or(Error::NotPositiveDefinite)?;
    let g = e.grad.expect("gradient requested");
    Ok((e.nlml, [g[0], g[1], g[2], g[3]]))
}

struct NlmlObjective<'a> {
    sq: Mat<f64>,
    y: &'a [f64],
}

impl Objective for NlmlObjective<'_> {
    fn value(&mut self, p: &[f64]) -> Option<f64> {
        evaluate(&self.sq, self.y, &GpHyper::from_slice(p), true, false).map(|e| e.nlml)
    }

    fn value_grad(&mut self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
        let e = evaluate(&self.sq, self.y, &GpHyper::from_slice(p), true, true)?;
        Some((e.nlml, e.grad?))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GpFitOptions {
    /// Extra starts beyond the default initialization.
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for GpFitOptions {
    fn default() -> Self {
        GpFitOptions {
            restarts: 2,
            max_iter: 200,
            grad_tol: 1e-5,
            seed: 0,
        }
    }
}

/// Starting point: median-heuristic bandwidth, sd(y) amplitude,
/// sd(y)/10 noise, mean(y).
pub fn initial_hyper(x: &[f64], y: &[f64]) -> Result<GpHyper> {
    let sd = stats::pop_variance(y).sqrt();
    if sd == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let bw = median_bandwidth(x).map_err(|_| Error::ConstantSeries)?;
    GpHyper::new(bw, sd, sd / 10.0, stats::mean(y))
}

pub fn gp_fit(x: &[f64], y: &[f64]) -> Result<GpModel> {
    gp_fit_with(x, y, &GpFitOptions::default())
}

pub fn gp_fit_with(x: &[f64], y: &[f64], opts: &GpFitOptions) -> Result<GpModel> {
    check_xy(x, y, 4)?;
    let init = initial_hyper(x, y)?;
    let mut obj = NlmlObjective { sq: sq_dists(x), y };
    let bfgs_opts = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        ..BfgsOptions::default()
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..=opts.restarts {
        let mut p0 = init.to_vec();
        if start > 0 {
            let mut rng = rng_stream(opts.seed, start as u64);
            for v in p0.iter_mut().take(3) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += z;
            }
        }
        if let Some(m) = bfgs(&mut obj, &p0, &bfgs_opts) {
            if best.as_ref().is_none_or(|(f, _)| m.f < *f) {
                best = Some((m.f, m.x));
            }
        }
    }
    let (_, p) = best.ok_or_else(|| Error::OptimizerFailed("no start produced a finite likelihood".into()))?;
    let hyper = GpHyper::from_slice(&p);
    let ev = evaluate(&obj.sq, y, &hyper, true, false)
        .ok_or_else(|| Error::OptimizerFailed("optimum not factorizable".into()))?;
    Ok(GpModel {
        hyper,
        train_x: x.to_vec(),
        train_alpha: ev.alpha,
        nlml: ev.nlml,
    })
}

/// `c + k(x_test, train_x) alpha`
pub fn gp_predict_mean(model: &GpModel, x_test: &[f64]) -> Vec<f64> {
    x_test
        .iter()
        .map(|&t| {
            model.hyper.mean
                + model
                    .train_x
                    .iter()
                    .zip(&model.train_alpha)
                    .map(|(&xi, a)| model.hyper.cov(t, xi) * a)
                    .sum::<f64>()
        })
        .collect()
}

/// `y' - f(x')` on a test sample.
pub fn residuals(model: &GpModel, x_test: &[f64], y_test: &[f64]) -> Vec<f64> {
    gp_predict_mean(model, x_test)
        .iter()
        .zip(y_test)
        .map(|(f, y)| y - f)
        .collect()
}

/// Indices of at most `cap` samples: seeded shuffle, then an even stride
/// through the shuffled order. Returned sorted so the original order survives.
pub fn subsample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_stream(seed, u64::MAX));
    let mut out: Vec<usize> = (0..cap).map(|i| idx[i * n / cap]).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn hyper(l: f64, sf: f64, sn: f64, c: f64) -> GpHyper {
        GpHyper::new(l, sf, sn, c).unwrap()
    }

    #[test]
    fn single_point_closed_form() {
        let h = hyper(1.0, 1.0, 1.0, 0.0);
        let v = gp_nlml(&[0.0], &[1.0], &h).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (4.0 * std::f64::consts::PI).ln() + 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1.51552, epsilon = 1e-5);
        let m = GpModel::new(&[0.0], &[1.0], h).unwrap();
        assert_abs_diff_eq!(m.predict(&[0.0])[0], 0.5, epsilon = 1e-12);
    }

    // Gaussian elimination with partial pivoting: determinant and solve.
    fn dense_logdet_solve(a: &[Vec<f64>], b: &[f64]) -> (f64, Vec<f64>) {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(r, v)| {
                let mut r = r.clone();
                r.push(*v);
                r
            })
            .collect();
        let mut logdet = 0.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, p);
            logdet += m[c][c].abs().ln();
            let (top, rest) = m.split_at_mut(c + 1);
            let pivot = &top[c];
            for row in rest {
                let f = row[c] / pivot[c];
                for (a, b) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *a -= f * b;
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (m[r][n] - s) / m[r][r];
        }
        (logdet, x)
    }

    fn random_instance(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>, GpHyper) {
        let mut rng = rng_stream(seed, 7);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h = hyper(
            rng.random_range(0.3..2.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.1..1.0),
            rng.random_range(-0.5..0.5),
        );
        (x, y, h)
    }

    fn cov_matrix(x: &[f64], h: &GpHyper, noise: bool) -> Vec<Vec<f64>> {
        let n = x.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| h.cov(x[i], x[j]) + if noise && i == j { h.noise_var() } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn nlml_matches_dense_oracle() {
        for seed in 0..10 {
            let (x, y, h) = random_instance(seed, 10);
            let a = cov_matrix(&x, &h, true);
            let r: Vec<f64> = y.iter().map(|v| v - h.mean).collect();
            let (logdet, sol) = dense_logdet_solve(&a, &r);
            let quad: f64 = r.iter().zip(&sol).map(|(p, q)| p * q).sum();
            let expect = 0.5 * (10.0 * LN_2PI + logdet) + 0.5 * quad;
            assert_abs_diff_eq!(gp_nlml(&x, &y, &h).unwrap(), expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_target_leaves_only_determinant() {
        let (x, _, h) = random_instance(3, 8);
        let y = vec![h.mean; 8];
        let (logdet, _) = dense_logdet_solve(&cov_matrix(&x, &h, true), &y);
        assert_abs_diff_eq!(
            gp_nlml(&x, &y, &h).unwrap(),
            0.5 * (8.0 * LN_2PI + logdet),
            epsilon = 1e-10
        );
    }

    #[test]
    fn penalized_likelihood_identity() {
        for seed in 0..20 {
            let (x, y, mut h) = random_instance(100 + seed, 10);
            h.mean = 0.0;
            let n = x.len();
            let k = cov_matrix(&x, &h, false);
            let a = cov_matrix(&x, &h, true);
            let sn2 = h.noise_var();
            // f = K (K + s^2 I)^{-1} y
            let (_, alpha) = dense_logdet_solve(&a, &y);
            let f: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * alpha[j]).sum()).collect();
            let (_, kinv_f) = dense_logdet_solve(&k, &f);
            let fkf: f64 = f.iter().zip(&kinv_f).map(|(p, q)| p * q).sum();
            let rss: f64 = y.iter().zip(&f).map(|(p, q)| (p - q) * (p - q)).sum();
            let i_plus: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| k[i][j] / sn2 + if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let (logdet_ip, _) = dense_logdet_solve(&i_plus, &vec![0.0; n]);
            let penalized = 0.5 * n as f64 * (2.0 * std::f64::consts::PI * sn2).ln()
                + rss / (2.0 * sn2)
                + 0.5 * fkf
                + 0.5 * logdet_ip;
            let nlml = gp_nlml(&x, &y, &h).unwrap();
            assert!((penalized - nlml).abs() < 1e-8, "seed {seed}: {penalized} vs {nlml}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (x, y, h) = random_instance(200 + seed, 12);
            let (_, g) = gp_nlml_grad(&x, &y, &h).unwrap();
            let p = h.to_vec();
            for k in 0..4 {
                let step = 1e-5;
                let mut lo = p.clone();
                let mut hi = p.clone();
                lo[k] -= step;
                hi[k] += step;
                let fd = (gp_nlml(&x, &y, &GpHyper::from_slice(&hi)).unwrap()
                    - gp_nlml(&x, &y, &GpHyper::from_slice(&lo)).unwrap())
                    / (2.0 * step);
                let tol = 1e-5 * fd.abs().max(1.0);
                assert!((fd - g[k]).abs() < tol, "param {k}: fd {fd} analytic {}", g[k]);
            }
        }
    }

    #[test]
    fn prediction_limits() {
        let x = [-1.0, 0.0, 0.7, 1.5];
        let y = [0.3, -0.2, 0.9, 0.1];
        let tiny = hyper(0.5, 1.0, 1e-5, 0.2);
        let m = GpModel::new(&x, &y, tiny).unwrap();
        for (p, t) in m.predict(&x).iter().zip(&y) {
            assert!((p - t).abs() < 1e-6);
        }
        let far = m.predict(&[1e3])[0];
        assert_abs_diff_eq!(far, 0.2, epsilon = 1e-6);
        let zero = GpModel {
            hyper: hyper(1.0, 1.0, 1.0, 0.0),
            train_x: vec![0.0],
            train_alpha: vec![0.0],
            nlml: 0.0,
        };
        assert_eq!(residuals(&zero, &[5.0, 6.0], &[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn fits_noise_level_of_sine() {
        let mut rng = rng_stream(42, 0);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v.sin() + 0.1 * z
            })
            .collect();
        let m = gp_fit(&x, &y).unwrap();
        let sd = m.hyper.noise_sd();
        assert!((0.05..=0.2).contains(&sd), "noise sd {sd}");
        let again = gp_fit(&x, &y).unwrap();
        assert_eq!(m.hyper, again.hyper);
    }

    #[test]
    fn interpolates_gp_draw() {
        // draw f from the prior, fit with near-zero noise, residuals vanish
        let mut rng = rng_stream(5, 0);
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 4.0).collect();
        let h = hyper(1.0, 1.0, 1e-6, 0.0);
        let a = cov_matrix(&x, &h, false);
        let am = Mat::from_fn(20, 20, |i, j| a[i][j] + if i == j { 1e-8 } else { 0.0 });
        let llt = Llt::new(am.as_ref(), Side::Lower).unwrap();
        let z: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
        let lf = llt.L();
        let f: Vec<f64> = (0..20).map(|i| (0..=i).map(|j| lf[(i, j)] * z[j]).sum()).collect();
        let m = GpModel::new(&x, &f, h).unwrap();
        let r = residuals(&m, &x, &f);
        assert!(r.iter().all(|v| v.abs() < 1e-4), "{r:?}");
    }

    #[test]
    fn residuals_uncorrelated_with_input() {
        let mut rng = rng_stream(9, 0);
        let x: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                0.8 * v + 0.6 * e
            })
            .collect();
        let x = crate::standardize(&x).unwrap();
        let y = crate::standardize(&y).unwrap();
        let m = gp_fit(&x, &y).unwrap();
        let r = residuals(&m, &x, &y);
        let (mr, mx) = (stats::mean(&r), stats::mean(&x));
        let cov: f64 = r.iter().zip(&x).map(|(a, b)| (a - mr) * (b - mx)).sum::<f64>() / 500.0;
        let corr = cov / (stats::pop_variance(&r) * stats::pop_variance(&x)).sqrt();
        assert!(corr.abs() < 0.1, "corr {corr}");
    }

    #[test]
    fn fit_rejects_constant_input() {
        assert!(gp_fit(&[1.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).is_err());
        assert!(matches!(
            gp_fit(&[1.0, 2.0, 3.0, 4.0], &[2.0; 4]),
            Err(Error::ConstantSeries)
        ));
    }

    #[test]
    fn subsample_is_deterministic_and_bounded() {
        let a = subsample_indices(2500, 1000, 3);
        assert_eq!(a.len(), 1000);
        assert_eq!(a, subsample_indices(2500, 1000, 3));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample_indices(10, 1000, 3), (0..10).collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn nlml_ignores_joint_permutation(seed in 0u64..1000, rot in 1usize..9) {
            let (x, y, h) = random_instance(seed, 10);
            let mut idx: Vec<usize> = (0..10).collect();
            idx.rotate_left(rot);
            idx.swap(0, 5);
            let xp: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let yp: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let a = gp_nlml(&x, &y, &h).unwrap();
            let b = gp_nlml(&xp, &yp, &h).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }
}

//! Synthetic cause-effect pairs with known direction X -> Y, built from
//! random densities and Gaussian-process draws.

use faer::linalg::solvers::Llt;
use faer::{Mat, Side};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::JITTER_LADDER;
use crate::pair::{standardize, Direction, PairSample};
use crate::stats::rng_stream;

pub const MIN_PAIR_LEN: usize = 50;
pub const SCENARIOS: [&str; 4] = ["SIM", "SIM-c", "SIM-ln", "SIM-G"];

/// Gamma distribution in shape-scale form (mean `shape * scale`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub const fn new(shape: f64, scale: f64) -> Self {
        GammaParams { shape, scale }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, self.scale)
            .expect("validated gamma parameters")
            .sample(rng)
    }

    fn valid(&self) -> bool {
        self.shape.is_finite() && self.shape > 0.0 && self.scale.is_finite() && self.scale > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub confounders: usize,
    /// Noise sd of every GP draw.
    pub tau: f64,
    pub w_ex: GammaParams,
    /// Drawn but unused: the E_Y noise reuses the drawn W_EX bandwidth, which
    /// is what gives SIM-G its near-Gaussian additive noise.
    pub w_ey: GammaParams,
    pub w_ez: GammaParams,
    pub s_ex: GammaParams,
    pub s_ey: GammaParams,
    pub s_ez: GammaParams,
    pub s_x: GammaParams,
    pub s_mx: GammaParams,
    pub s_my: GammaParams,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_ex, self.w_ey, self.w_ez, self.s_ex, self.s_ey, self.s_ez, self.s_x, self.s_mx, self.s_my,
        ];
        if !all.iter().all(GammaParams::valid) || self.tau.is_nan() || self.tau <= 0.0 || self.confounders > 1 {
            return Err(Error::InvalidConfig(format!(
                "bad scenario parameters for {}",
                self.name
            )));
        }
        Ok(())
    }
}

pub fn scenario_params(name: &str) -> Result<ScenarioConfig> {
    let g = GammaParams::new;
    let mut cfg = ScenarioConfig {
        name: name.to_string(),
        confounders: 0,
        tau: 1e-4,
        w_ex: g(5.0, 0.1),
        w_ey: g(5.0, 0.1),
        w_ez: g(5.0, 0.1),
        s_ex: g(2.0, 1.5),
        s_ey: g(2.0, 15.0),
        s_ez: g(2.0, 15.0),
        s_x: g(2.0, 15.0),
        s_mx: g(2.0, 0.1),
        s_my: g(2.0, 0.1),
    };
    match name {
        "SIM" => {}
        "SIM-c" => cfg.confounders = 1,
        "SIM-ln" => {
            cfg.s_ey = g(2.0, 300.0);
            cfg.s_mx = g(2.0, 0.01);
            cfg.s_my = g(2.0, 0.01);
        }
        "SIM-G" => {
            cfg.w_ex = g(1e6, 1e-3);
            cfg.s_ex = g(1e6, 1e-3);
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    }
    Ok(cfg)
}

/// Draw from `N(0, K + sigma^2 I)` where `K` is the Gaussian kernel with one
/// bandwidth per input column.
fn gp_draw<R: Rng + ?Sized>(inputs: &[&[f64]], bandwidths: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    let n = inputs[0].len();
    let k = Mat::from_fn(n, n, |i, j| {
        let d: f64 = inputs
            .iter()
            .zip(bandwidths)
            .map(|(col, b)| (col[i] - col[j]).powi(2) / (b * b))
            .sum();
        (-d).exp()
    });
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    for eps in JITTER_LADDER {
        let a = Mat::from_fn(n, n, |i, j| k[(i, j)] + if i == j { sigma * sigma + eps } else { 0.0 });
        if let Ok(llt) = Llt::new(a.as_ref(), Side::Lower) {
            let l = llt.L();
            return (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();
        }
    }
    // a unit kernel plus 1e-3 on the diagonal is always positive definite
    unreachable!("Gaussian kernel matrix not factorizable even with jitter")
}

/// Sample from a random density: returns the cumulative trapezoid integral
/// of `exp(F)` over a sorted standard-normal sample, in ascending order.
pub fn sample_random_density<R: Rng + ?Sized>(n: usize, theta: f64, sigma: f64, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    x.sort_by(f64::total_cmp);
    let f = gp_draw(&[&x], &[theta], sigma, rng);
    let mut g = vec![0.0; n];
    for i in 1..n {
        g[i] = g[i - 1] + 0.5 * (f[i].exp() + f[i - 1].exp()) * (x[i] - x[i - 1]);
    }
    g
}

/// Random-density noise in random order (the density draw is sorted).
fn noise<R: Rng + ?Sized>(n: usize, w: f64, tau: f64, rng: &mut R) -> Vec<f64> {
    let mut e = sample_random_density(n, w, tau, rng);
    e.shuffle(rng);
    e
}

struct Latent {
    x: Vec<f64>,
    y: Vec<f64>,
    // read only by tests
    #[allow(dead_code)]
    x_clean: Vec<f64>,
}

fn sample_latent<R: Rng + ?Sized>(cfg: &ScenarioConfig, n: usize, rng: &mut R) -> Result<Latent> {
    cfg.validate()?;
    if n < MIN_PAIR_LEN {
        return Err(Error::TooFewSamples {
            needed: MIN_PAIR_LEN,
            got: n,
        });
    }
    let w_ex = cfg.w_ex.sample(rng);
    let _w_ey = cfg.w_ey.sample(rng);
    let w_ez = cfg.w_ez.sample(rng);
    let e_x = standardize(&noise(n, w_ex, cfg.tau, rng))?;
    let e_y = standardize(&noise(n, w_ex, cfg.tau, rng))?;
    let e_z = standardize(&noise(n, w_ez, cfg.tau, rng))?;

    let x = if cfg.confounders == 0 {
        let s = cfg.s_ex.sample(rng);
        gp_draw(&[&e_x], &[s], cfg.tau, rng)
    } else {
        let s = [cfg.s_ex.sample(rng), cfg.s_ez.sample(rng)];
        gp_draw(&[&e_x, &e_z], &s, cfg.tau, rng)
    };
    let x = standardize(&x)?;

    let y = if cfg.confounders == 0 {
        let s = [cfg.s_x.sample(rng), cfg.s_ey.sample(rng)];
        gp_draw(&[&x, &e_y], &s, cfg.tau, rng)
    } else {
        let s = [cfg.s_x.sample(rng), cfg.s_ey.sample(rng), cfg.s_ez.sample(rng)];
        gp_draw(&[&x, &e_y, &e_z], &s, cfg.tau, rng)
    };
    let y = standardize(&y)?;

    let s_mx = cfg.s_mx.sample(rng);
    let mx: Vec<f64> = (0..n)
        .map(|_| s_mx * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    let s_my = cfg.s_my.sample(rng);
    let my: Vec<f64> = (0..n)
        .map(|_| s_my * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    Ok(Latent {
        x: x.iter().zip(&mx).map(|(a, b)| a + b).collect(),
        y: y.iter().zip(&my).map(|(a, b)| a + b).collect(),
        x_clean: x,
    })
}

/// One synthetic pair whose ground truth is X -> Y.
pub fn sample_pair<R: Rng + ?Sized>(cfg: &ScenarioConfig, n: usize, rng: &mut R) -> Result<PairSample> {
    let l = sample_latent(cfg, n, rng)?;
    Ok(PairSample::new(cfg.name.clone(), l.x, l.y)?.with_truth(Direction::XtoY))
}

/// `count` pairs named `pair0001`, ...; pair `i` uses RNG stream `i` under
/// `seed`, so any pair can be regenerated on its own.
pub fn generate_pairs(cfg: &ScenarioConfig, n: usize, count: usize, seed: u64) -> Result<Vec<PairSample>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_stream(seed, i as u64);
            let mut p = sample_pair(cfg, n, &mut rng)?;
            p.id = format!("pair{:04}", i + 1);
            Ok(p)
        })
        .collect()
}

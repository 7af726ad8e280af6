//! Additive-noise-model direction inference: regress each variable on the
//! other and score how well the residuals look like independent noise, or
//! compare direct marginal-likelihood scores of the two factorizations.

use std::collections::HashMap;
use std::f64::consts::{E, PI};

use crate::entropy::{entropy_estimate, EntropyMethod};
use crate::error::{Error, Result};
use crate::gp::{gp_fit_with, residuals, subsample_indices, GpFitOptions, SUBSAMPLE_CAP};
use crate::kernel::{hsic_biased, hsic_gamma_pvalue, median_bandwidth, FIXED_BANDWIDTH};
use crate::mixture::fit_gmm_mml;
use crate::pair::{split_train_test, PairSample, ScorePair, SplitMode};
use crate::stats::{self, derive_seed};

pub const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnmScore {
    /// `-log p` of the HSIC independence test, adaptive bandwidths.
    PHsic,
    /// HSIC value, adaptive bandwidths.
    Hsic,
    /// HSIC value with one fixed bandwidth for both kernels.
    HsicFixed,
    /// `H(input) + H(residual)`.
    Entropy(EntropyMethod),
    /// `log Var(input) + log Var(residual)`.
    Gauss,
    /// Gaussian input likelihood plus GP marginal likelihood.
    FN,
    /// Mixture message length of the input plus GP marginal likelihood.
    MML,
}

/// Ranking heuristic that turns a score pair into one confidence value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    /// `-c_xy + c_yx`
    Difference,
    /// `-1/min` when `c_xy < c_yx`, `+1/min` otherwise.
    InverseMin,
    /// `-1/(1 - min)` when `c_xy < c_yx`, `+1/(1 - min)` otherwise.
    InverseOneMinusMin,
}

impl AnmScore {
    pub fn heuristic(self) -> Heuristic {
        match self {
            AnmScore::PHsic => Heuristic::InverseMin,
            AnmScore::Hsic | AnmScore::HsicFixed => Heuristic::InverseOneMinusMin,
            _ => Heuristic::Difference,
        }
    }
}

pub fn confidence(c_xy: f64, c_yx: f64, heuristic: Heuristic) -> f64 {
    if !(c_xy.is_finite() && c_yx.is_finite()) || c_xy == c_yx {
        return 0.0;
    }
    let min = c_xy.min(c_yx);
    let sign = if c_xy < c_yx { -1.0 } else { 1.0 };
    let s = match heuristic {
        Heuristic::Difference => -c_xy + c_yx,
        Heuristic::InverseMin => sign / min,
        Heuristic::InverseOneMinusMin => sign / (1.0 - min),
    };
    if s.is_finite() {
        s
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnmConfig {
    pub score: AnmScore,
    pub split: SplitMode,
    /// Kernel bandwidth for [`AnmScore::HsicFixed`]; must be unset otherwise.
    pub fixed_bandwidth: Option<f64>,
}

impl AnmConfig {
    pub fn new(score: AnmScore, split: SplitMode) -> Self {
        AnmConfig {
            score,
            split,
            fixed_bandwidth: (score == AnmScore::HsicFixed).then_some(FIXED_BANDWIDTH),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.score, self.fixed_bandwidth) {
            (AnmScore::HsicFixed, Some(b)) if b.is_finite() && b > 0.0 => Ok(()),
            (AnmScore::HsicFixed, _) => Err(Error::InvalidConfig(
                "fixed-kernel HSIC needs a positive bandwidth".into(),
            )),
            (_, Some(_)) => Err(Error::InvalidConfig(
                "a fixed bandwidth only applies to fixed-kernel HSIC".into(),
            )),
            (_, None) => Ok(()),
        }
    }
}

/// Regression of one variable on the other, evaluated on the test part.
#[derive(Debug, Clone)]
struct DirectionFit {
    input: Vec<f64>,
    resid: Vec<f64>,
    nlml: f64,
}

/// Lexicographic sort of (input, output) so the result does not depend on
/// sample order, only on the set of points.
fn canonical(input: &[f64], output: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..input.len()).collect();
    idx.sort_by(|&a, &b| input[a].total_cmp(&input[b]).then(output[a].total_cmp(&output[b])));
    (
        idx.iter().map(|&i| input[i]).collect(),
        idx.iter().map(|&i| output[i]).collect(),
    )
}

/// One pair prepared for scoring: subsampled, standardized, with GP fits
/// cached so several scores can share them.
pub struct AnmSession {
    pair: PairSample,
    seed: u64,
    fits: HashMap<(SplitMode, bool), std::result::Result<DirectionFit, String>>,
    mml: [Option<Option<f64>>; 2],
}

impl AnmSession {
    pub fn new(pair: &PairSample, seed: u64) -> Result<Self> {
        pair.validate()?;
        if pair.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: MIN_SAMPLES,
                got: pair.len(),
            });
        }
        let idx = subsample_indices(pair.len(), SUBSAMPLE_CAP, derive_seed(seed, 3));
        let pair = pair.select(&idx).standardized()?;
        Ok(AnmSession {
            pair,
            seed,
            fits: HashMap::new(),
            mml: [None, None],
        })
    }

    /// The prepared (subsampled, standardized) data.
    pub fn data(&self) -> &PairSample {
        &self.pair
    }

    fn fit(&mut self, split: SplitMode, forward: bool) -> std::result::Result<DirectionFit, String> {
        let seed = self.seed;
        let pair = &self.pair;
        self.fits
            .entry((split, forward))
            .or_insert_with(|| {
                let oriented = if forward { pair.clone() } else { pair.swapped() };
                let (train, test) = split_train_test(&oriented, split).map_err(|e| e.to_string())?;
                let (tx, ty) = canonical(&train.x, &train.y);
                let opts = GpFitOptions {
                    seed: derive_seed(seed, 1),
                    ..GpFitOptions::default()
                };
                let model = gp_fit_with(&tx, &ty, &opts).map_err(|e| e.to_string())?;
                let (sx, sy) = canonical(&test.x, &test.y);
                let resid = residuals(&model, &sx, &sy);
                Ok(DirectionFit {
                    input: sx,
                    resid,
                    nlml: model.nlml,
                })
            })
            .clone()
    }

    fn mml_length(&mut self, forward: bool) -> Option<f64> {
        let slot = usize::from(!forward);
        if self.mml[slot].is_none() {
            let x = if forward { &self.pair.x } else { &self.pair.y };
            self.mml[slot] = Some(fit_gmm_mml(x, derive_seed(self.seed, 2)).ok().map(|m| m.codelength));
        }
        self.mml[slot].flatten()
    }

    fn direction_score(&mut self, cfg: &AnmConfig, forward: bool) -> Option<f64> {
        let split = match cfg.score {
            AnmScore::FN | AnmScore::MML => SplitMode::Recycling,
            _ => cfg.split,
        };
        let fit = self.fit(split, forward).ok()?;
        let (u, r) = (&fit.input, &fit.resid);
        let score = match cfg.score {
            AnmScore::PHsic => {
                let res = hsic_gamma_pvalue(u, r, median_bandwidth(u).ok()?, median_bandwidth(r).ok()?).ok()?;
                -res.p_value?.ln()
            }
            AnmScore::Hsic => hsic_biased(u, r, median_bandwidth(u).ok()?, median_bandwidth(r).ok()?).ok()?,
            AnmScore::HsicFixed => {
                let b = cfg.fixed_bandwidth?;
                hsic_biased(u, r, b, b).ok()?
            }
            AnmScore::Entropy(m) => entropy_estimate(u, m).ok()? + entropy_estimate(r, m).ok()?,
            AnmScore::Gauss => stats::pop_variance(u).ln() + stats::pop_variance(r).ln(),
            AnmScore::FN => {
                let n = u.len() as f64;
                0.5 * n * (2.0 * PI * E).ln() + 0.5 * n * stats::pop_variance(u).ln() + fit.nlml
            }
            AnmScore::MML => self.mml_length(forward)? + fit.nlml,
        };
        (!score.is_nan()).then_some(score)
    }

    pub fn score(&mut self, cfg: &AnmConfig) -> Result<ScorePair> {
        cfg.validate()?;
        let fwd = self.direction_score(cfg, true);
        let bwd = self.direction_score(cfg, false);
        Ok(match (fwd, bwd) {
            (Some(c_xy), Some(c_yx)) => ScorePair::new(c_xy, c_yx, confidence(c_xy, c_yx, cfg.score.heuristic())),
            _ => ScorePair::failed(),
        })
    }
}

/// Scores both causal directions of one pair.
pub fn anm_decide(pair: &PairSample, cfg: &AnmConfig, seed: u64) -> Result<ScorePair> {
    cfg.validate()?;
    AnmSession::new(pair, seed)?.score(cfg)
}

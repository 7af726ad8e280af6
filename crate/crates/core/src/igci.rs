//! Information-geometric causal inference for deterministic, nearly
//! noiseless relations: compare slope or entropy statistics of the two
//! normalized variables.

use crate::anm::{confidence, Heuristic};
use crate::entropy::{entropy_estimate, EntropyMethod};
use crate::error::{Error, Result};
use crate::pair::{standardize, PairSample, ScorePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseMeasure {
    /// Map the range onto [0, 1].
    Uniform,
    /// Zero mean, unit population variance.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IgciEstimator {
    Slope,
    SlopePP,
    Entropy(EntropyMethod),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IgciConfig {
    pub base: BaseMeasure,
    pub estimator: IgciEstimator,
}

impl IgciConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base == BaseMeasure::Gaussian && self.estimator == IgciEstimator::Entropy(EntropyMethod::Gaussian) {
            return Err(Error::InvalidConfig(
                "Gaussian entropy estimator is meaningless under the Gaussian base measure".into(),
            ));
        }
        Ok(())
    }
}

pub fn igci_normalize(x: &[f64], base: BaseMeasure) -> Result<Vec<f64>> {
    match base {
        BaseMeasure::Gaussian => standardize(x),
        BaseMeasure::Uniform => {
            if x.is_empty() {
                return Err(Error::EmptyInput);
            }
            let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi.is_nan() || lo.is_nan() || hi <= lo || !(hi - lo).is_finite() {
                return Err(Error::ConstantSeries);
            }
            Ok(x.iter().map(|v| (v - lo) / (hi - lo)).collect())
        }
    }
}

/// Indices sorting `x` ascending; ties keep their original order.
fn order(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

/// Weighted mean of log slopes between consecutive points; zero y-gaps are
/// left out together with their weight.
fn log_slope_mean(points: &[(f64, f64, f64)]) -> Result<f64> {
    let (mut sum, mut weight) = (0.0, 0.0);
    for w in points.windows(2) {
        let (x0, y0, n0) = w[0];
        let (x1, y1, _) = w[1];
        let dy = (y1 - y0).abs();
        if dy > 0.0 {
            sum += n0 * (dy / (x1 - x0)).ln();
            weight += n0;
        }
    }
    if weight == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok(sum / weight)
}

pub fn igci_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let idx = order(x);
    if idx.windows(2).any(|w| x[w[0]] == x[w[1]]) {
        return Err(Error::RepeatedX);
    }
    let pts: Vec<(f64, f64, f64)> = idx.iter().map(|&i| (x[i], y[i], 1.0)).collect();
    log_slope_mean(&pts)
}

pub fn igci_slope_pp(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    for i in order(x) {
        match pts.last_mut() {
            Some(last) if last.0 == x[i] => last.2 += 1.0,
            _ => pts.push((x[i], y[i], 1.0)),
        }
    }
    if pts.len() < 2 {
        return Err(Error::ConstantSeries);
    }
    log_slope_mean(&pts)
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    Ok(())
}

/// Slope, falling back to slope++ when the input has repeated values.
fn slope_or_pp(x: &[f64], y: &[f64]) -> Result<f64> {
    match igci_slope(x, y) {
        Err(Error::RepeatedX) => igci_slope_pp(x, y),
        other => other,
    }
}

pub fn igci_decide(pair: &PairSample, cfg: &IgciConfig) -> Result<ScorePair> {
    pair.validate()?;
    cfg.validate()?;
    let x = igci_normalize(&pair.x, cfg.base)?;
    let y = igci_normalize(&pair.y, cfg.base)?;
    let (c_xy, c_yx) = match cfg.estimator {
        IgciEstimator::Slope => (slope_or_pp(&x, &y)?, slope_or_pp(&y, &x)?),
        IgciEstimator::SlopePP => (igci_slope_pp(&x, &y)?, igci_slope_pp(&y, &x)?),
        IgciEstimator::Entropy(m) => {
            let hx = entropy_estimate(&x, m)?;
            let hy = entropy_estimate(&y, m)?;
            if hx == f64::NEG_INFINITY && hy == f64::NEG_INFINITY {
                return Ok(ScorePair {
                    c_xy: f64::NEG_INFINITY,
                    c_yx: f64::NEG_INFINITY,
                    dir: crate::Direction::Undecided,
                    confidence: 0.0,
                });
            }
            (hy - hx, hx - hy)
        }
    };
    Ok(ScorePair::new(
        c_xy,
        c_yx,
        confidence(c_xy, c_yx, Heuristic::Difference),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::Direction;
    use crate::stats::rng_stream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn normalization_examples() {
        assert_eq!(
            igci_normalize(&[2.0, 4.0, 6.0], BaseMeasure::Uniform).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(
            igci_normalize(&[0.0, 2.0], BaseMeasure::Gaussian).unwrap(),
            vec![-1.0, 1.0]
        );
        assert!(matches!(
            igci_normalize(&[3.0, 3.0], BaseMeasure::Uniform),
            Err(Error::ConstantSeries)
        ));
    }

    #[test]
    fn slope_examples() {
        let v = igci_slope(&[0.0, 0.5, 1.0], &[0.0, 0.25, 1.0]).unwrap();
        assert_abs_diff_eq!(v, (0.5f64.ln() + 1.5f64.ln()) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, -0.14384, epsilon = 1e-5);
        let x = [0.3, 0.1, 0.9, 0.0, 1.0];
        assert_abs_diff_eq!(igci_slope(&x, &x).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(
            igci_slope(&[0.0, 0.5, 0.5, 1.0], &[0.0, 0.1, 0.2, 1.0]),
            Err(Error::RepeatedX)
        ));
    }

    #[test]
    fn slope_pp_example() {
        let x = igci_normalize(&[0.0, 0.0, 1.0, 2.0], BaseMeasure::Uniform).unwrap();
        let y = igci_normalize(&[1.0, 1.0, 2.0, 4.0], BaseMeasure::Uniform).unwrap();
        let v = igci_slope_pp(&x, &y).unwrap();
        assert_abs_diff_eq!(
            v,
            (2.0 * (2.0f64 / 3.0).ln() + (4.0f64 / 3.0).ln()) / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(v, -0.17442, epsilon = 1e-5);
        assert!(igci_slope_pp(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_gaps_are_skipped() {
        // y repeats on consecutive x: 2 of 4 gaps vanish
        let x = [0.0, 0.25, 0.5, 0.75, 1.0];
        let y = [0.0, 0.0, 0.5, 0.5, 1.0];
        let v = igci_slope(&x, &y).unwrap();
        assert!(v.is_finite());
        assert_abs_diff_eq!(v, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn cubic_on_grid_points_forward() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let p = PairSample::new("c", x, y).unwrap();
        let cfg = IgciConfig {
            base: BaseMeasure::Uniform,
            estimator: IgciEstimator::Slope,
        };
        let s = igci_decide(&p, &cfg).unwrap();
        assert!(s.c_xy < 0.0);
        assert_eq!(s.dir, Direction::XtoY);
    }

    #[test]
    fn gaussian_entropy_rejected_under_gaussian_base() {
        let p = PairSample::new("g", vec![0.0, 1.0, 2.0, 4.0], vec![1.0, 0.0, 3.0, 2.0]).unwrap();
        let cfg = IgciConfig {
            base: BaseMeasure::Gaussian,
            estimator: IgciEstimator::Entropy(EntropyMethod::Gaussian),
        };
        assert!(matches!(igci_decide(&p, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn non_injective_relation_grows_backward_score() {
        let sample = |n: usize| {
            let mut rng = rng_stream(n as u64, 41);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|v| (v - 0.5).abs()).collect();
            let p = PairSample::new("n", x, y).unwrap();
            let cfg = IgciConfig {
                base: BaseMeasure::Uniform,
                estimator: IgciEstimator::Slope,
            };
            igci_decide(&p, &cfg).unwrap()
        };
        let small = sample(200);
        let large = sample(2000);
        assert!(large.c_yx > small.c_yx);
        // normalized y = |2x - 1| up to range rescaling: slope at most about 2
        for s in [small, large] {
            assert!(s.c_xy <= 2f64.ln() + 0.1, "{s:?}");
        }
    }

    fn noisy_pair() -> impl Strategy<Value = PairSample> {
        (5usize..80, 0u64..1000).prop_map(|(n, seed)| {
            let mut rng = rng_stream(seed, 42);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|v| v.powi(2) + 0.1 * rng.random::<f64>()).collect();
            PairSample::new("p", x, y).unwrap()
        })
    }

    proptest! {
        #[test]
        fn entropy_scores_are_antisymmetric(p in noisy_pair()) {
            for m in [EntropyMethod::OneSp, EntropyMethod::Vasicek, EntropyMethod::Gaussian, EntropyMethod::MaxEnt1] {
                let cfg = IgciConfig { base: BaseMeasure::Uniform, estimator: IgciEstimator::Entropy(m) };
                let s = igci_decide(&p, &cfg).unwrap();
                prop_assert_eq!(s.c_xy + s.c_yx, 0.0);
            }
        }

        #[test]
        fn slope_pp_reduces_to_slope(p in noisy_pair()) {
            let x = igci_normalize(&p.x, BaseMeasure::Uniform).unwrap();
            let y = igci_normalize(&p.y, BaseMeasure::Uniform).unwrap();
            let a = igci_slope(&x, &y).unwrap();
            let b = igci_slope_pp(&x, &y).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn uniform_normalization_hits_both_ends(p in noisy_pair()) {
            let u = igci_normalize(&p.y, BaseMeasure::Uniform).unwrap();
            prop_assert!(u.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(u.contains(&0.0) && u.contains(&1.0));
        }
    }
}

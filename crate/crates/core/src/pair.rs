//! Domain types shared by every method: the paired sample, decided
//! direction and score pair, plus the deterministic preprocessing steps.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats;

/// Causal direction between the two columns of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    XtoY,
    YtoX,
    Undecided,
}

impl Direction {
    /// Lower score wins; exact ties (and NaN) leave the pair undecided.
    pub fn from_scores(c_xy: f64, c_yx: f64) -> Self {
        if c_xy < c_yx {
            Direction::XtoY
        } else if c_xy > c_yx {
            Direction::YtoX
        } else {
            Direction::Undecided
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::XtoY => Direction::YtoX,
            Direction::YtoX => Direction::XtoY,
            Direction::Undecided => Direction::Undecided,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::XtoY => "X->Y",
            Direction::YtoX => "Y->X",
            Direction::Undecided => "?",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X->Y" => Ok(Direction::XtoY),
            "Y->X" => Ok(Direction::YtoX),
            "?" => Ok(Direction::Undecided),
            other => Err(Error::InvalidConfig(format!("unknown direction {other:?}"))),
        }
    }
}

/// Two aligned real-valued series, the unit of work for every method.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub truth: Option<Direction>,
    pub weight: f64,
}

impl PairSample {
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let pair = PairSample {
            id: id.into(),
            x,
            y,
            truth: None,
            weight: 1.0,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn with_truth(mut self, truth: Direction) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidWeight(weight));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::LengthMismatch {
                left: self.x.len(),
                right: self.y.len(),
            });
        }
        if self.x.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.x.len(),
            });
        }
        if let Some(index) = self
            .x
            .iter()
            .zip(&self.y)
            .position(|(a, b)| !(a.is_finite() && b.is_finite()))
        {
            return Err(Error::NonFinite { index });
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::InvalidWeight(self.weight));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Exchanges the roles of X and Y; the ground truth flips with them.
    pub fn swapped(&self) -> PairSample {
        PairSample {
            id: self.id.clone(),
            x: self.y.clone(),
            y: self.x.clone(),
            truth: self.truth.map(Direction::flipped),
            weight: self.weight,
        }
    }

    /// Keeps only the listed sample indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PairSample {
        PairSample {
            id: self.id.clone(),
            x: indices.iter().map(|&i| self.x[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            truth: self.truth,
            weight: self.weight,
        }
    }

    /// Both columns standardized to mean 0 and population sd 1.
    pub fn standardized(&self) -> Result<PairSample> {
        Ok(PairSample {
            id: self.id.clone(),
            x: standardize(&self.x)?,
            y: standardize(&self.y)?,
            truth: self.truth,
            weight: self.weight,
        })
    }
}

/// Scores for both directions together with the decision they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    pub c_xy: f64,
    pub c_yx: f64,
    pub dir: Direction,
    pub confidence: f64,
}

impl ScorePair {
    /// Builds a score pair whose direction follows from the scores.
    pub fn new(c_xy: f64, c_yx: f64, confidence: f64) -> Self {
        ScorePair {
            c_xy,
            c_yx,
            dir: Direction::from_scores(c_xy, c_yx),
            confidence,
        }
    }

    /// Sentinel for a method failure: both scores `+inf`, no decision.
    pub fn failed() -> Self {
        ScorePair {
            c_xy: f64::INFINITY,
            c_yx: f64::INFINITY,
            dir: Direction::Undecided,
            confidence: 0.0,
        }
    }

    pub fn swapped(&self) -> ScorePair {
        ScorePair {
            c_xy: self.c_yx,
            c_yx: self.c_xy,
            dir: self.dir.flipped(),
            confidence: -self.confidence,
        }
    }
}

/// Affine map to empirical mean 0 and population standard deviation 1.
pub fn standardize(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: series.len(),
        });
    }
    // moments over sorted values, so they depend only on the multiset
    let s = stats::sorted(series);
    let mean = stats::mean(&s);
    let sd = stats::pop_variance(&s).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::ConstantSeries);
    }
    Ok(series.iter().map(|v| (v - mean) / sd).collect())
}

/// How training and test data are obtained from one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMode {
    /// Odd positions (1st, 3rd, ...) train, even positions test.
    Splitting,
    /// The full sample serves as both training and test data.
    Recycling,
}

pub fn split_train_test(pair: &PairSample, mode: SplitMode) -> Result<(PairSample, PairSample)> {
    match mode {
        SplitMode::Recycling => Ok((pair.clone(), pair.clone())),
        SplitMode::Splitting => {
            if pair.len() < 4 {
                return Err(Error::TooFewSamples {
                    needed: 4,
                    got: pair.len(),
                });
            }
            let train: Vec<usize> = (0..pair.len()).step_by(2).collect();
            let test: Vec<usize> = (1..pair.len()).step_by(2).collect();
            Ok((pair.select(&train), pair.select(&test)))
        }
    }
}

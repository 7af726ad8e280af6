//! Named method registry: every evaluated variant under its published name.

use std::fmt;

use crate::anm::{AnmConfig, AnmScore, AnmSession};
use crate::entropy::EntropyMethod;
use crate::error::{Error, Result};
use crate::igci::{igci_decide, BaseMeasure, IgciConfig, IgciEstimator};
use crate::pair::{PairSample, ScorePair, SplitMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Anm(AnmConfig),
    Igci(IgciConfig),
}

impl Method {
    /// Looks up a method by name; `base` only matters for IGCI variants.
    pub fn parse(name: &str, base: BaseMeasure) -> Result<Method> {
        use AnmScore::*;
        use SplitMode::*;
        let anm = |score, split| Ok(Method::Anm(AnmConfig::new(score, split)));
        let igci = |estimator| {
            let cfg = IgciConfig { base, estimator };
            cfg.validate()?;
            Ok(Method::Igci(cfg))
        };
        match name {
            "ANM-pHSIC" => anm(PHsic, Recycling),
            "ANM-HSIC" => anm(Hsic, Recycling),
            "ANM-HSIC-ds" => anm(Hsic, Splitting),
            "ANM-HSIC-fk" => anm(HsicFixed, Recycling),
            "ANM-HSIC-ds-fk" => anm(HsicFixed, Splitting),
            "ANM-Gauss" => anm(Gauss, Recycling),
            "ANM-FN" => anm(FN, Recycling),
            "ANM-MML" => anm(MML, Recycling),
            "IGCI-slope" => igci(IgciEstimator::Slope),
            "IGCI-slope++" => igci(IgciEstimator::SlopePP),
            _ => {
                if let Some(tag) = name.strip_prefix("ANM-ent-") {
                    let m = entropy_tag(name, tag)?;
                    anm(Entropy(m), Recycling)
                } else if let Some(tag) = name.strip_prefix("IGCI-ent-") {
                    igci(IgciEstimator::Entropy(entropy_tag(name, tag)?))
                } else {
                    Err(Error::UnknownMethod(name.to_string()))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Method::Anm(c) => match c.score {
                AnmScore::PHsic => "ANM-pHSIC".into(),
                AnmScore::Hsic if c.split == SplitMode::Splitting => "ANM-HSIC-ds".into(),
                AnmScore::Hsic => "ANM-HSIC".into(),
                AnmScore::HsicFixed if c.split == SplitMode::Splitting => "ANM-HSIC-ds-fk".into(),
                AnmScore::HsicFixed => "ANM-HSIC-fk".into(),
                AnmScore::Entropy(m) => format!("ANM-ent-{}", m.tag()),
                AnmScore::Gauss => "ANM-Gauss".into(),
                AnmScore::FN => "ANM-FN".into(),
                AnmScore::MML => "ANM-MML".into(),
            },
            Method::Igci(c) => match c.estimator {
                IgciEstimator::Slope => "IGCI-slope".into(),
                IgciEstimator::SlopePP => "IGCI-slope++".into(),
                IgciEstimator::Entropy(m) => format!("IGCI-ent-{}", m.tag()),
            },
        }
    }

    /// Runs the method on one pair. Invalid input (too short, constant
    /// columns) is an error; numerical failures come back as
    /// [`ScorePair::failed`].
    pub fn decide(&self, pair: &PairSample, seed: u64) -> Result<ScorePair> {
        match self {
            Method::Anm(cfg) => AnmSession::new(pair, seed)?.score(cfg),
            Method::Igci(cfg) => igci_decide(pair, cfg),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn entropy_tag(name: &str, tag: &str) -> Result<EntropyMethod> {
    tag.parse().map_err(|_| Error::UnknownMethod(name.to_string()))
}

/// Every registered name.
pub fn method_names() -> Vec<String> {
    let mut v: Vec<String> = ["ANM-pHSIC", "ANM-HSIC", "ANM-HSIC-ds", "ANM-HSIC-fk", "ANM-HSIC-ds-fk"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.extend(EntropyMethod::ALL.iter().map(|m| format!("ANM-ent-{}", m.tag())));
    v.extend(["ANM-Gauss", "ANM-FN", "ANM-MML", "IGCI-slope", "IGCI-slope++"].map(String::from));
    v.extend(EntropyMethod::ALL.iter().map(|m| format!("IGCI-ent-{}", m.tag())));
    v
}

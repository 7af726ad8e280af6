//! Batch execution over a corpus and evaluation of the resulting score
//! table against pair metadata.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::anm::AnmSession;
use crate::cep::PairMeta;
use crate::error::{Error, Result};
use crate::eval::{
    balance, preprocess, roc_auc, weighted_accuracy, AccuracyResult, DecisionRecord, PerturbKind, RocResult,
};
use crate::methods::Method;
use crate::pair::{Direction, PairSample, ScorePair};
use crate::stats::{derive_seed, rng_stream};
use crate::table::to_csv;

pub const RESULTS_HEADER: [&str; 6] = ["id", "method", "c_xy", "c_yx", "decision", "confidence"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub id: String,
    pub method: String,
    pub score: ScorePair,
    /// Why the pair produced no scores, if it failed outright.
    pub error: Option<String>,
    pub seconds: f64,
}

/// Seed handed to the methods for the pair at `index`.
pub fn pair_seed(seed: u64, index: usize) -> u64 {
    derive_seed(derive_seed(seed, 11), index as u64)
}

/// Runs every method on one pair. ANM variants share their regression fits.
pub fn run_pair(
    pair: &PairSample,
    index: usize,
    methods: &[Method],
    perturb: PerturbKind,
    seed: u64,
) -> Vec<ResultRow> {
    let mut rng = rng_stream(derive_seed(seed, 7), index as u64);
    let prepared = preprocess(pair, perturb, &mut rng);
    let pseed = pair_seed(seed, index);
    let mut session: Option<std::result::Result<AnmSession, String>> = None;
    methods
        .iter()
        .map(|m| {
            let start = Instant::now();
            let outcome = match (&prepared, m) {
                (Err(e), _) => Err(e.to_string()),
                (Ok(p), Method::Anm(cfg)) => {
                    let s = session.get_or_insert_with(|| AnmSession::new(p, pseed).map_err(|e| e.to_string()));
                    match s {
                        Ok(s) => s.score(cfg).map_err(|e| e.to_string()),
                        Err(e) => Err(e.clone()),
                    }
                }
                (Ok(p), Method::Igci(_)) => m.decide(p, pseed).map_err(|e| e.to_string()),
            };
            let (score, error) = match outcome {
                Ok(s) => (s, None),
                Err(e) => (ScorePair::failed(), Some(e)),
            };
            ResultRow {
                id: pair.id.clone(),
                method: m.name(),
                score,
                error,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// Runs all pairs in parallel on the current rayon pool; rows come back in
/// (pair, method) order whatever the thread count.
pub fn run_corpus(pairs: &[PairSample], methods: &[Method], perturb: PerturbKind, seed: u64) -> Vec<ResultRow> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| run_pair(p, i, methods, perturb, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    to_csv(
        &RESULTS_HEADER,
        rows.iter().map(|r| {
            [
                r.id.clone(),
                r.method.clone(),
                r.score.c_xy.to_string(),
                r.score.c_yx.to_string(),
                r.score.dir.to_string(),
                r.score.confidence.to_string(),
            ]
        }),
    )
}

/// Wall-clock seconds per row, kept apart so the results file stays
/// reproducible.
pub fn timings_csv(rows: &[ResultRow]) -> String {
    to_csv(
        &["id", "method", "seconds", "error"],
        rows.iter().map(|r| {
            [
                r.id.clone(),
                r.method.clone(),
                format!("{:.6}", r.seconds),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn parse_results_csv(text: &str, path: &Path) -> Result<Vec<ResultRow>> {
    let bad = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(bad(1, format!("expected header {}", RESULTS_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != RESULTS_HEADER.len() {
            return Err(bad(line, format!("expected 6 fields, got {}", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line, format!("not a number: {s:?}")));
        let dir: Direction = rec[4]
            .parse()
            .map_err(|_| bad(line, format!("bad decision {:?}", &rec[4])))?;
        rows.push(ResultRow {
            id: rec[0].to_string(),
            method: rec[1].to_string(),
            score: ScorePair {
                c_xy: num(&rec[2])?,
                c_yx: num(&rec[3])?,
                dir,
                confidence: num(&rec[5])?,
            },
            error: None,
            seconds: 0.0,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: String,
    pub n_pairs: usize,
    pub n_undecided: usize,
    pub accuracy: AccuracyResult,
    /// Absent when only one truth class is present.
    pub roc: Option<RocResult>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub balance: bool,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            balance: true,
            bootstrap: crate::eval::DEFAULT_BOOTSTRAP,
            seed: 0,
        }
    }
}

/// Decision records for one method, in metadata order over scalar pairs.
pub fn records_for(rows: &[ResultRow], meta: &[PairMeta], method: &str) -> Result<Vec<DecisionRecord>> {
    let by_id: HashMap<&str, &ResultRow> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| (r.id.as_str(), r))
        .collect();
    meta.iter()
        .filter(|m| m.is_scalar())
        .map(|m| {
            let r = by_id
                .get(m.id.as_str())
                .ok_or_else(|| Error::IdMismatch(format!("no {method} result for {}", m.id)))?;
            Ok(DecisionRecord::new(
                &m.id,
                m.weight,
                m.truth(),
                r.score.dir,
                r.score.confidence,
            ))
        })
        .collect()
}

pub fn evaluate(rows: &[ResultRow], meta: &[PairMeta], opts: &EvalOptions) -> Result<Vec<MethodReport>> {
    let known: HashSet<&str> = meta.iter().filter(|m| m.is_scalar()).map(|m| m.id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !known.contains(r.id.as_str()) {
            return Err(Error::IdMismatch(format!(
                "{} is not a scalar pair in the metadata",
                r.id
            )));
        }
        if !seen.insert((r.method.as_str(), r.id.as_str())) {
            return Err(Error::IdMismatch(format!("duplicate {} result for {}", r.method, r.id)));
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    if methods.is_empty() {
        return Err(Error::EmptyInput);
    }
    methods
        .into_iter()
        .map(|method| {
            let mut records = records_for(rows, meta, method)?;
            if opts.balance {
                records = balance(&records);
            }
            let roc = match roc_auc(&records, opts.bootstrap, opts.seed) {
                Ok(r) => Some(r),
                Err(Error::SingleClass) => None,
                Err(e) => return Err(e),
            };
            Ok(MethodReport {
                method: method.to_string(),
                n_pairs: records.len(),
                n_undecided: records.iter().filter(|r| r.decision == Direction::Undecided).count(),
                accuracy: weighted_accuracy(&records)?,
                roc,
            })
        })
        .collect()
}

pub const ACCURACY_HEADER: [&str; 11] = [
    "method",
    "pairs",
    "undecided",
    "accuracy",
    "acc_ci68_lo",
    "acc_ci68_hi",
    "acc_ci95_lo",
    "acc_ci95_hi",
    "auc",
    "auc_ci95_lo",
    "auc_ci95_hi",
];

pub fn accuracy_csv(reports: &[MethodReport]) -> String {
    to_csv(
        &ACCURACY_HEADER,
        reports.iter().map(|r| {
            let a = &r.accuracy;
            let mut row = vec![
                r.method.clone(),
                r.n_pairs.to_string(),
                r.n_undecided.to_string(),
                a.accuracy.to_string(),
                a.ci68.0.to_string(),
                a.ci68.1.to_string(),
                a.ci95.0.to_string(),
                a.ci95.1.to_string(),
            ];
            match &r.roc {
                Some(roc) => row.extend([roc.auc.to_string(), roc.ci95.0.to_string(), roc.ci95.1.to_string()]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
            row
        }),
    )
}

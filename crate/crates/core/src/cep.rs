//! Reading and writing the CauseEffectPairs directory layout: one
//! `<id>.txt` file of whitespace-separated columns per pair, plus a
//! `pairmeta.txt` with rows `id cause_start cause_end effect_start effect_end weight`
//! (columns 1-based, ranges inclusive).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pair::{Direction, PairSample};

pub const META_FILE: &str = "pairmeta.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct PairMeta {
    pub id: String,
    pub cause_cols: (usize, usize),
    pub effect_cols: (usize, usize),
    pub weight: f64,
}

impl PairMeta {
    pub fn is_scalar(&self) -> bool {
        self.cause_cols.0 == self.cause_cols.1 && self.effect_cols.0 == self.effect_cols.1
    }

    /// Direction relative to file column order.
    pub fn truth(&self) -> Direction {
        if self.cause_cols.0 < self.effect_cols.0 {
            Direction::XtoY
        } else {
            Direction::YtoX
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses whitespace-separated finite numbers, one sample per line; blank
/// lines are skipped.
pub fn parse_matrix(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(parse_err(path, line_no, format!("non-finite value {tok:?}"))),
                Err(_) => Err(parse_err(path, line_no, format!("not a number: {tok:?}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::NonRectangular {
                    path: path.to_path_buf(),
                    line: line_no,
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(parse_err(
            path,
            rows.len(),
            format!("need at least 2 rows, got {}", rows.len()),
        ));
    }
    Ok(rows)
}

pub fn load_pair(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    parse_matrix(&text, path)
}

pub fn parse_meta(text: &str, path: &Path) -> Result<Vec<PairMeta>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.is_empty() {
            continue;
        }
        if tok.len() != 6 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 6 fields, got {}", tok.len()),
            ));
        }
        let col = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| parse_err(path, line_no, format!("bad column index {s:?}")))
        };
        let cause = (col(tok[1])?, col(tok[2])?);
        let effect = (col(tok[3])?, col(tok[4])?);
        if cause.0 > cause.1 || effect.0 > effect.1 {
            return Err(parse_err(path, line_no, "column range runs backwards"));
        }
        if cause.1 >= effect.0 && effect.1 >= cause.0 {
            return Err(parse_err(path, line_no, "cause and effect columns overlap"));
        }
        let weight = tok[5]
            .parse::<f64>()
            .ok()
            .filter(|w| w.is_finite() && *w > 0.0)
            .ok_or_else(|| parse_err(path, line_no, format!("bad weight {:?}", tok[5])))?;
        out.push(PairMeta {
            id: tok[0].to_string(),
            cause_cols: cause,
            effect_cols: effect,
            weight,
        });
    }
    Ok(out)
}

pub fn load_meta(dir: &Path) -> Result<Vec<PairMeta>> {
    let path = dir.join(META_FILE);
    if !path.is_file() {
        return Err(Error::MissingMeta(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path)?;
    parse_meta(&text, &path)
}

fn pair_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.txt"))
}

/// Loads the scalar pairs listed in the metadata, in metadata order. X is
/// the lower-numbered column, so the truth flag says which way the arrow
/// points relative to file order.
pub fn load_benchmark(dir: &Path) -> Result<Vec<PairSample>> {
    let meta = load_meta(dir)?;
    for m in &meta {
        let path = pair_path(dir, &m.id);
        if !path.is_file() {
            return Err(Error::MetaPairMismatch { id: m.id.clone(), path });
        }
    }
    meta.iter()
        .filter(|m| m.is_scalar())
        .map(|m| {
            let path = pair_path(dir, &m.id);
            let rows = load_pair(&path)?;
            let width = rows[0].len();
            let (c, e) = (m.cause_cols.0, m.effect_cols.0);
            if c.max(e) > width {
                return Err(parse_err(
                    &path,
                    1,
                    format!("metadata names column {} of {width}", c.max(e)),
                ));
            }
            let column = |k: usize| rows.iter().map(|r| r[k - 1]).collect::<Vec<f64>>();
            let truth = m.truth();
            let (x, y) = if truth == Direction::XtoY {
                (column(c), column(e))
            } else {
                (column(e), column(c))
            };
            PairSample::new(m.id.clone(), x, y)?
                .with_truth(truth)
                .with_weight(m.weight)
        })
        .collect()
}

/// Two-column text in the benchmark format; values print with the
/// shortest representation that parses back exactly.
pub fn format_pair(pair: &PairSample) -> String {
    let mut s = String::with_capacity(pair.len() * 40);
    for (x, y) in pair.x.iter().zip(&pair.y) {
        let _ = writeln!(s, "{x} {y}");
    }
    s
}

pub fn format_meta_row(pair: &PairSample) -> String {
    let cols = if pair.truth == Some(Direction::YtoX) {
        "2 2 1 1"
    } else {
        "1 1 2 2"
    };
    format!("{} {cols} {}\n", pair.id, pair.weight)
}

/// Writes every pair file and the metadata; pairs without a truth label are
/// recorded as X -> Y.
pub fn write_corpus(dir: &Path, pairs: &[PairSample]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut meta = String::new();
    for p in pairs {
        fs::write(pair_path(dir, &p.id), format_pair(p))?;
        meta.push_str(&format_meta_row(p));
    }
    fs::write(dir.join(META_FILE), meta)?;
    Ok(())
}

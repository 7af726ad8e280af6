//! Collates accuracy tables from several evaluations into one Markdown
//! summary and interval plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub label: String,
    pub method: String,
    pub pairs: usize,
    pub undecided: usize,
    pub accuracy: f64,
    pub ci68: (f64, f64),
    pub ci95: (f64, f64),
    pub auc: Option<(f64, f64, f64)>,
}

/// `LABEL=PATH`, or a bare path labelled by its parent directory.
pub fn split_input(arg: &str) -> (String, PathBuf) {
    if let Some((label, path)) = arg.split_once('=') {
        return (label.to_string(), PathBuf::from(path));
    }
    let path = PathBuf::from(arg);
    let label = path
        .parent()
        .and_then(Path::file_name)
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    (label, path)
}

pub fn read_accuracy(label: &str, path: &Path) -> Result<Vec<Entry>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(causepair::runner::ACCURACY_HEADER) {
        return Err(bad("not an accuracy table".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("bad number {:?}", &rec[i])))
        };
        let count = |i: usize| {
            rec[i]
                .parse::<usize>()
                .map_err(|_| bad(format!("bad count {:?}", &rec[i])))
        };
        let auc = if rec[8].is_empty() {
            None
        } else {
            Some((num(8)?, num(9)?, num(10)?))
        };
        out.push(Entry {
            label: label.to_string(),
            method: rec[0].to_string(),
            pairs: count(1)?,
            undecided: count(2)?,
            accuracy: num(3)?,
            ci68: (num(4)?, num(5)?),
            ci95: (num(6)?, num(7)?),
            auc,
        });
    }
    Ok(out)
}

pub fn markdown(entries: &[Entry]) -> String {
    let mut s = String::from(
        "| data | method | pairs | undecided | accuracy | 68% CI | 95% CI | AUC | AUC 95% CI |\n\
         |---|---|---:|---:|---:|---|---|---:|---|\n",
    );
    for e in entries {
        let (auc, auc_ci) = match e.auc {
            Some((a, lo, hi)) => (format!("{a:.3}"), format!("[{lo:.3}, {hi:.3}]")),
            None => ("n/a".into(), "n/a".into()),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.3} | [{:.3}, {:.3}] | [{:.3}, {:.3}] | {auc} | {auc_ci} |",
            e.label, e.method, e.pairs, e.undecided, e.accuracy, e.ci68.0, e.ci68.1, e.ci95.0, e.ci95.1
        );
    }
    s
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal interval plot on [0, 1]: thin bar for the 95% interval,
/// thick bar for the inner interval when present, dot for the estimate.
/// label, estimate, optional inner interval, outer interval
pub type IntervalRow = (String, f64, Option<(f64, f64)>, (f64, f64));

pub fn interval_svg(title: &str, rows: &[IntervalRow]) -> String {
    let (left, width, row_h, top) = (260.0, 400.0, 22.0, 40.0);
    let height = top + row_h * rows.len() as f64 + 40.0;
    let x = |v: f64| left + v.clamp(0.0, 1.0) * width;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"{cx}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{t}</text>\n",
        w = left + width + 30.0,
        cx = left + width / 2.0,
        t = esc(title)
    );
    let bottom = top + row_h * rows.len() as f64;
    for tick in 0..=10 {
        let v = tick as f64 / 10.0;
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{top}\" x2=\"{0}\" y2=\"{bottom}\" stroke=\"#ddd\"/><text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\">{v:.1}</text>",
            x(v),
            bottom + 16.0
        );
    }
    let _ = writeln!(
        s,
        "<line x1=\"{0}\" y1=\"{top}\" x2=\"{0}\" y2=\"{bottom}\" stroke=\"grey\" stroke-dasharray=\"4 4\"/>",
        x(0.5)
    );
    for (i, (name, est, inner, outer)) in rows.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            left - 8.0,
            y + 4.0,
            esc(name)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"black\"/>",
            x(outer.0),
            x(outer.1)
        );
        if let Some((lo, hi)) = inner {
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"8\" fill=\"steelblue\"/>",
                x(*lo),
                y - 4.0,
                (x(*hi) - x(*lo)).max(1.0)
            );
        }
        let _ = writeln!(
            s,
            "<circle cx=\"{}\" cy=\"{y}\" r=\"3.5\" fill=\"firebrick\"/>",
            x(*est)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn accuracy_svg(entries: &[Entry]) -> String {
    let rows: Vec<_> = entries
        .iter()
        .map(|e| (format!("{} {}", e.label, e.method), e.accuracy, Some(e.ci68), e.ci95))
        .collect();
    interval_svg("weighted accuracy (68% and 95% intervals)", &rows)
}

pub fn auc_svg(entries: &[Entry]) -> String {
    let rows: Vec<_> = entries
        .iter()
        .filter_map(|e| {
            e.auc
                .map(|(a, lo, hi)| (format!("{} {}", e.label, e.method), a, None, (lo, hi)))
        })
        .collect();
    interval_svg("AUC (95% bootstrap interval)", &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_labels() {
        assert_eq!(
            split_input("noisy=out/a.csv"),
            ("noisy".into(), PathBuf::from("out/a.csv"))
        );
        assert_eq!(split_input("runs/sim/accuracy.csv").0, "sim");
        assert_eq!(split_input("accuracy.csv").0, "accuracy");
    }

    #[test]
    fn renders_tables_and_plots() {
        let e = Entry {
            label: "SIM".into(),
            method: "IGCI-slope++".into(),
            pairs: 10,
            undecided: 1,
            accuracy: 0.7,
            ci68: (0.55, 0.8),
            ci95: (0.4, 0.9),
            auc: None,
        };
        let md = markdown(std::slice::from_ref(&e));
        assert!(md.contains("| SIM | IGCI-slope++ | 10 | 1 | 0.700 | [0.550, 0.800] | [0.400, 0.900] | n/a | n/a |"));
        let svg = accuracy_svg(std::slice::from_ref(&e));
        assert!(svg.contains("<circle") && svg.contains("<rect"));
        assert!(!auc_svg(&[e]).contains("<circle"));
    }
}

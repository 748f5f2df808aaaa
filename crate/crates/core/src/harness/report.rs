//! Evaluation reports over repeated holdout runs.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::error::{Error, Result};

/// Outcome of one train/test repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub metrics: Metrics,
    /// C chosen by cross-validation, for SVM-based methods.
    pub selected_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub views: Vec<String>,
    pub class_names: Vec<String>,
    pub seed: u64,
    pub per_run_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_accuracy: f64,
    pub best_accuracy: f64,
    pub best_run_index: usize,
    /// Confusion matrix of the best run, rows true and columns predicted.
    pub confusion: Vec<Vec<u64>>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub selected_c: Vec<Option<f64>>,
}

impl EvalReport {
    pub fn from_runs(
        method: impl Into<String>,
        views: Vec<String>,
        class_names: Vec<String>,
        seed: u64,
        runs: Vec<RunOutcome>,
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Validation("a report needs at least one run".into()));
        }
        let acc: Vec<f64> = runs.iter().map(|r| r.metrics.accuracy).collect();
        let n = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / n;
        let std = if acc.len() > 1 {
            (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut best = 0;
        for (i, &a) in acc.iter().enumerate() {
            if a > acc[best] {
                best = i;
            }
        }
        let best_metrics = runs[best].metrics.clone();
        Ok(EvalReport {
            method: method.into(),
            views,
            class_names,
            seed,
            mean_accuracy: mean,
            std_accuracy: std,
            best_accuracy: acc[best],
            best_run_index: best,
            per_run_accuracy: acc,
            confusion: best_metrics.confusion,
            sensitivity: best_metrics.sensitivity,
            specificity: best_metrics.specificity,
            selected_c: runs.iter().map(|r| r.selected_c).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(Error::Parameter(format!("unknown report format {other:?}"))),
        }
    }
}

/// Accuracy as a percentage with its spread: `87.10% ± 2.17`.
pub fn format_accuracy(mean: f64, std: f64) -> String {
    format!("{:.2}% ± {:.2}", mean * 100.0, std * 100.0)
}

fn percent(v: f64) -> String {
    let p = v * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{p:.0}%")
    } else {
        format!("{p:.2}%")
    }
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:>w$}", w = widths[c]))
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
    }
    out
}

/// Plain-text rendering: a method summary line, the per-run accuracies and
/// the best run's confusion matrix with sensitivity and specificity rows.
pub fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let summary = vec![
        vec![
            "Method".to_string(),
            "Average".to_string(),
            "Best".to_string(),
        ],
        vec![
            format!("{} ({})", report.method, report.views.join(", ")),
            format_accuracy(report.mean_accuracy, report.std_accuracy),
            format!("{:.1}%", report.best_accuracy * 100.0),
        ],
    ];
    out.push_str(&table(&summary));
    out.push('\n');

    let mut runs = vec![vec![
        "Run".to_string(),
        "Accuracy".to_string(),
        "C".to_string(),
    ]];
    for (i, (a, c)) in report
        .per_run_accuracy
        .iter()
        .zip(&report.selected_c)
        .enumerate()
    {
        runs.push(vec![
            (i + 1).to_string(),
            format!("{:.2}%", a * 100.0),
            c.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
        ]);
    }
    out.push_str(&table(&runs));
    out.push('\n');

    writeln!(
        out,
        "Best run {} (rows true, columns predicted)",
        report.best_run_index + 1
    )
    .unwrap();
    let mut conf = vec![std::iter::once(String::new())
        .chain(report.class_names.iter().cloned())
        .collect::<Vec<_>>()];
    for (name, row) in report.class_names.iter().zip(&report.confusion) {
        conf.push(
            std::iter::once(name.clone())
                .chain(row.iter().map(u64::to_string))
                .collect(),
        );
    }
    conf.push(
        std::iter::once("Sensitivity".to_string())
            .chain(report.sensitivity.iter().map(|&v| percent(v)))
            .collect(),
    );
    conf.push(
        std::iter::once("Specificity".to_string())
            .chain(report.specificity.iter().map(|&v| percent(v)))
            .collect(),
    );
    out.push_str(&table(&conf));
    out
}

pub fn emit_report(
    report: &EvalReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let body = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Text => render_text(report),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(acc_num: u64, total: u64) -> RunOutcome {
        let confusion = vec![vec![acc_num, total - acc_num], vec![0, 0]];
        RunOutcome {
            metrics: Metrics::from_confusion(confusion).unwrap(),
            selected_c: Some(1.0),
        }
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn empty_runs_rejected() {
        assert!(EvalReport::from_runs("rf", vec![], names(), 0, vec![]).is_err());
    }

    #[test]
    fn summary_statistics() {
        let r = EvalReport::from_runs(
            "rf",
            vec!["v".into()],
            names(),
            3,
            vec![run(3, 4), run(4, 4), run(2, 4), run(4, 4)],
        )
        .unwrap();
        assert_eq!(r.per_run_accuracy, vec![0.75, 1.0, 0.5, 1.0]);
        assert_eq!(r.mean_accuracy, 0.8125);
        let expected_std =
            ((0.0625f64.powi(2) + 0.1875f64.powi(2) * 2.0 + 0.3125f64.powi(2)) / 3.0).sqrt();
        assert!((r.std_accuracy - expected_std).abs() < 1e-15);
        assert_eq!(r.best_run_index, 1);
        assert_eq!(r.confusion, vec![vec![4, 0], vec![0, 0]]);
        let single = EvalReport::from_runs("rf", vec![], names(), 0, vec![run(1, 2)]).unwrap();
        assert_eq!(single.std_accuracy, 0.0);
    }

    #[test]
    fn accuracy_formatting() {
        assert_eq!(format_accuracy(0.871, 0.0217), "87.10% ± 2.17");
        assert_eq!(percent(0.92), "92%");
        assert_eq!(percent(74.0 / 75.0), "98.67%");
    }

    #[test]
    fn json_round_trip_and_text() {
        let r = EvalReport::from_runs(
            "rfsvm",
            vec!["A".into(), "B".into()],
            names(),
            9,
            vec![run(1, 3), run(2, 3)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("r.json");
        emit_report(&r, &json, ReportFormat::Json).unwrap();
        assert_eq!(
            EvalReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap(),
            r
        );
        let text = dir.path().join("r.txt");
        emit_report(&r, &text, ReportFormat::Text).unwrap();
        let body = std::fs::read_to_string(&text).unwrap();
        assert!(body.contains(&format_accuracy(r.mean_accuracy, r.std_accuracy)));
        assert!(body.contains("Sensitivity"));
        assert!(emit_report(&r, dir.path().join("missing/r.json"), ReportFormat::Json).is_err());
    }
}

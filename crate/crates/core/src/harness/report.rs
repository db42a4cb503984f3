//! Report files: `gs.csv`, `fit.jsonl` and the derived tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::gof::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    /// `gs.csv` with columns `trial,gs,pvalue,reject`.
    Csv,
    /// `fit.jsonl`: config echo, null fit, trial errors and timing.
    Jsonl,
}

/// `trial,gs,pvalue,reject` rows in trial order. Failed trials keep their
/// row with empty fields. Contains no timing, so equal seeds give equal bytes.
pub fn gs_csv(report: &RunReport) -> String {
    let mut out = String::from("trial,gs,pvalue,reject\n");
    for t in &report.trials {
        match &t.result {
            Some(r) => writeln!(out, "{},{},{},{}", t.trial, r.statistic, r.p_value, r.reject),
            None => writeln!(out, "{},,,", t.trial),
        }
        .expect("writing to a String");
    }
    out
}

pub fn fit_jsonl(report: &RunReport) -> String {
    let mut lines = vec![
        json!({ "config": report.config }),
        json!({ "null_fit": report.null_fit }),
    ];
    for t in &report.trials {
        if let Some(e) = &t.error {
            lines.push(json!({ "trial": t.trial, "error": e }));
        }
    }
    lines.push(json!({ "wall_time_secs": report.wall_time_secs }));
    lines.iter().map(|l| l.to_string() + "\n").collect()
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn emit_report(report: &RunReport, dir: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => write(dir, "gs.csv", &gs_csv(report)),
        ReportFormat::Jsonl => write(dir, "fit.jsonl", &fit_jsonl(report)),
    }
}

/// Writes a CSV table with the given header.
pub fn write_table(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write(dir, name, &out)
}

/// Reads the successful statistics back from a `gs.csv` file.
pub fn read_gs_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "trial,gs,pvalue,reject")) => {}
        _ => return Err(Error::ParseError { line: 1, reason: "expected header trial,gs,pvalue,reject".into() }),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let cell = line.split(',').nth(1).ok_or(Error::ParseError { line: i + 1, reason: "missing gs column".into() })?;
        if cell.is_empty() {
            continue;
        }
        out.push(cell.parse().map_err(|_| Error::ParseError { line: i + 1, reason: format!("bad number '{cell}'") })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::em_fit_null;
    use crate::gs::{GSResult, StatKind};
    use crate::harness::config::TestConfig;
    use crate::harness::gof::TrialResult;
    use crate::kernel::BinGrid;
    use crate::sequence::{Label, LabeledSequence};

    fn report() -> RunReport {
        let seq = LabeledSequence::new(2.0, vec![(0.5, Label::One), (0.8, Label::Two)]).unwrap();
        let null_fit = em_fit_null(&[seq], &BinGrid::preset("paper3").unwrap(), 1e-3, 10).unwrap();
        let res = |s: f64, p: f64| GSResult { statistic: s, dof: 3, p_value: p, reject: p < 0.05, condition_number: 10.0, kind: StatKind::GS };
        RunReport {
            config: TestConfig::default(),
            null_fit,
            trials: vec![
                TrialResult { trial: 0, sample: vec![0], result: Some(res(1.5, 0.68)), error: None },
                TrialResult { trial: 1, sample: vec![0], result: Some(res(9.0, 0.029)), error: None },
                TrialResult { trial: 2, sample: vec![0], result: None, error: Some("singular".into()) },
            ],
            wall_time_secs: 0.25,
        }
    }

    #[test]
    fn gs_csv_rows() {
        let csv = gs_csv(&report());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,1.5,0.68,false");
        assert_eq!(lines[2], "1,9,0.029,true");
        assert_eq!(lines[3], "2,,,");
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = report();
        emit_report(&r, dir.path(), ReportFormat::Csv).unwrap();
        emit_report(&r, dir.path(), ReportFormat::Jsonl).unwrap();
        assert_eq!(read_gs_csv(&dir.path().join("gs.csv")).unwrap(), vec![1.5, 9.0]);
        let fit = fs::read_to_string(dir.path().join("fit.jsonl")).unwrap();
        assert_eq!(fit.lines().count(), 4);
        assert!(fit.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
        write_table(dir.path(), "qq.csv", &["empirical", "theoretical"], &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("qq.csv")).unwrap(), "empirical,theoretical\n1,2\n");
    }
}

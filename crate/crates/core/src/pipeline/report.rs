//! Plot-ready tables collected from a run directory: one box-plot row and
//! one mean/std column pair per evaluation condition.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluate::{EvaluationSummary, Quartiles};
use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Name of the evaluation directory, e.g. `eval` or `eval_random`.
    pub name: String,
    pub summary: EvaluationSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub conditions: Vec<Condition>,
}

/// Every subdirectory of `run` holding `summary.csv` and `series.csv`,
/// sorted by name.
pub fn collect(run: &Path) -> Result<Report> {
    let entries = std::fs::read_dir(run).map_err(|e| Error::io(run, e))?;
    let mut dirs: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(run, e))?.path();
        if path.join("summary.csv").is_file() && path.join("series.csv").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Config(format!("no evaluation summaries under {}", run.display())));
    }
    let conditions = dirs
        .iter()
        .map(|d| {
            Ok(Condition {
                name: d.file_name().expect("directory entry").to_string_lossy().into_owned(),
                summary: EvaluationSummary::read_dir(d)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report { conditions })
}

impl Report {
    /// `boxplot.csv` and `series.csv` (CSV) or `report.json`, in `out`.
    pub fn write(&self, out: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
        io::ensure_dir(out)?;
        match format {
            ReportFormat::Json => {
                let path = out.join("report.json");
                io::write_json(&path, self)?;
                Ok(vec![path])
            }
            ReportFormat::Csv => {
                let box_path = out.join("boxplot.csv");
                let mut w = io::csv_writer(&box_path)?;
                w.write_record(["condition", "n_runs", "min", "q1", "median", "q3", "max"])?;
                for c in &self.conditions {
                    let Quartiles { min, q1, median, q3, max } = c.summary.quartiles;
                    let mut row = vec![c.name.clone(), c.summary.n_runs().to_string()];
                    row.extend([min, q1, median, q3, max].map(io::fmt_f64));
                    w.write_record(&row)?;
                }
                w.flush().map_err(|e| Error::io(&box_path, e))?;

                let series_path = out.join("series.csv");
                let times = &self.conditions[0].summary.times;
                if self.conditions.iter().any(|c| &c.summary.times != times) {
                    return Err(Error::Shape("evaluation conditions use different time grids".into()));
                }
                let mut w = io::csv_writer(&series_path)?;
                let mut header = vec!["t".to_string()];
                for c in &self.conditions {
                    header.push(format!("{}_mean", c.name));
                    header.push(format!("{}_std", c.name));
                }
                w.write_record(&header)?;
                for (i, t) in times.iter().enumerate() {
                    let mut row = vec![io::fmt_f64(*t)];
                    for c in &self.conditions {
                        row.push(io::fmt_f64(c.summary.mean_series[i]));
                        row.push(io::fmt_f64(c.summary.std_series[i]));
                    }
                    w.write_record(&row)?;
                }
                w.flush().map_err(|e| Error::io(&series_path, e))?;
                Ok(vec![box_path, series_path])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(finals: &[f64]) -> EvaluationSummary {
        let runs: Vec<Vec<(f64, f64)>> = finals.iter().map(|&f| vec![(0.0, 1.0), (0.5, f)]).collect();
        let refs: Vec<&[(f64, f64)]> = runs.iter().map(Vec::as_slice).collect();
        EvaluationSummary::from_series(&refs).unwrap()
    }

    #[test]
    fn report_matches_written_summaries() {
        let dir = tempfile::tempdir().unwrap();
        let a = summary(&[1.0, 2.0, 3.0]);
        let b = summary(&[4.0, 6.0]);
        a.write_dir(&dir.path().join("eval")).unwrap();
        b.write_dir(&dir.path().join("eval_random")).unwrap();
        std::fs::create_dir(dir.path().join("dataset")).unwrap();

        let report = collect(dir.path()).unwrap();
        let names: Vec<&str> = report.conditions.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["eval", "eval_random"]);
        assert_eq!(report.conditions[0].summary, a);
        assert_eq!(report.conditions[1].summary.quartiles.median, 5.0);

        let out = dir.path().join("report");
        report.write(&out, ReportFormat::Csv).unwrap();
        let text = std::fs::read_to_string(out.join("boxplot.csv")).unwrap();
        assert!(text.contains("eval,3,1,1.5,2,2.5,3"), "{text}");
        let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
        assert_eq!(series.lines().next().unwrap(), "t,eval_mean,eval_std,eval_random_mean,eval_random_std");
    }

    #[test]
    fn empty_run_dir_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(collect(dir.path()).is_err());
    }
}

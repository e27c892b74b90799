//! Trial records, their CSV form, and mean ± std summaries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::RigidTransform;
use crate::solver::Timings;

/// Header row of every experiment CSV.
pub const CSV_HEADER: [&str; 12] = [
    "experiment",
    "dataset",
    "algorithm",
    "trial",
    "seed",
    "sigma",
    "outliers",
    "rotation_mode",
    "avg_shift",
    "rot_acc",
    "t_err",
    "wall_ms",
];

/// One CSV row. Floats are written in shortest round-trip form, so a row read
/// back is bit-identical to the one written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub experiment: String,
    pub dataset: String,
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    pub sigma: f64,
    pub outliers: usize,
    pub rotation_mode: String,
    pub avg_shift: f64,
    pub rot_acc: f64,
    pub t_err: f64,
    /// Left empty in deterministic runs.
    pub wall_ms: Option<f64>,
}

/// A trial's outcome for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub row: CsvRow,
    pub ground_truth: RigidTransform,
    pub estimate: RigidTransform,
    pub timings: Timings,
    /// CFK found too few keypoints and full CF ran instead.
    pub fell_back: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Unbiased (n − 1) estimator; 0 for a single sample.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len();
        if n == 0 {
            return Stats { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats { mean, std }
    }
}

/// Mean ± std of each metric for one (algorithm, sigma, outliers) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub algorithm: String,
    pub sigma: f64,
    pub outliers: usize,
    pub trials: usize,
    pub avg_shift: Stats,
    pub rot_acc: Stats,
    pub t_err: Stats,
}

/// Groups rows by (algorithm, sigma, outliers) in order of first appearance.
pub fn summarize<'a>(rows: impl IntoIterator<Item = &'a CsvRow>) -> Vec<SummaryStats> {
    let mut groups: Vec<(String, f64, usize, Vec<&CsvRow>)> = Vec::new();
    for row in rows {
        let key_match = |g: &(String, f64, usize, Vec<&CsvRow>)| {
            g.0 == row.algorithm && g.1.to_bits() == row.sigma.to_bits() && g.2 == row.outliers
        };
        match groups.iter_mut().find(|g| key_match(g)) {
            Some(g) => g.3.push(row),
            None => groups.push((row.algorithm.clone(), row.sigma, row.outliers, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(algorithm, sigma, outliers, rows)| {
            let col = |f: fn(&CsvRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
            SummaryStats {
                algorithm,
                sigma,
                outliers,
                trials: rows.len(),
                avg_shift: Stats::of(&col(|r| r.avg_shift)),
                rot_acc: Stats::of(&col(|r| r.rot_acc)),
                t_err: Stats::of(&col(|r| r.t_err)),
            }
        })
        .collect()
}

pub fn csv_string<'a>(rows: impl IntoIterator<Item = &'a CsvRow>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn write_csv<'a>(rows: impl IntoIterator<Item = &'a CsvRow>, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header '{}'", CSV_HEADER.join(",")),
        });
    }
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e| Error::MalformedBody {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: &str, sigma: f64, shift: f64, wall: Option<f64>) -> CsvRow {
        CsvRow {
            experiment: "noise".into(),
            dataset: "bunny".into(),
            algorithm: alg.into(),
            trial: 0,
            seed: u64::MAX,
            sigma,
            outliers: 0,
            rotation_mode: "large-origin".into(),
            avg_shift: shift,
            rot_acc: shift * 3.0,
            t_err: 1.0 / 3.0,
            wall_ms: wall,
        }
    }

    #[test]
    fn stats_match_hand_computation() {
        let s = Stats::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, 5.0);
        // Sum of squared deviations is 32; 32 / 7.
        assert!((s.std - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stats::of(&[1.5]).std, 0.0);
        assert!(Stats::of(&[]).mean.is_nan());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            row("cf", 0.002, 0.1 + 0.2, Some(12.5)),
            row("icp", 0.002, 1e-300, None),
            row("cf", 0.01, std::f64::consts::PI, None),
        ];
        let text = csv_string(&rows);
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        let back = parse_csv(&text, Path::new("x.csv")).unwrap();
        assert_eq!(back, rows);
        assert_eq!(summarize(&back), summarize(&rows));
    }

    #[test]
    fn grouping_keeps_first_appearance_order() {
        let rows = vec![
            row("cf", 0.01, 1.0, None),
            row("icp", 0.01, 2.0, None),
            row("cf", 0.01, 3.0, None),
            row("cf", 0.02, 4.0, None),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].algorithm.as_str(), s[0].trials, s[0].avg_shift.mean), ("cf", 2, 2.0));
        assert_eq!((s[1].algorithm.as_str(), s[1].sigma), ("icp", 0.01));
        assert_eq!(s[2].sigma, 0.02);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(parse_csv("a,b\n1,2\n", Path::new("x.csv")), Err(Error::MalformedHeader { .. })));
    }
}

//! Per-cell quartile tables and the noise-monotonicity check.

use std::io::Write;

use serde::Serialize;

use super::{HarnessError, RunResult};

/// Five-number summary with Tukey hinges: each quartile is the median of the
/// half of the sorted data on its side, the overall median included when the
/// count is odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub const NAN: Quartiles = Quartiles { min: f64::NAN, q1: f64::NAN, median: f64::NAN, q3: f64::NAN, max: f64::NAN };
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let half = v.len().div_ceil(2);
    Some(Quartiles {
        min: v[0],
        q1: median_sorted(&v[..half]),
        median: median_sorted(&v),
        q3: median_sorted(&v[v.len() - half..]),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub eps_g: f64,
    pub runs: usize,
    /// Runs that errored or produced no finite best-iterate errors.
    pub failures: usize,
    pub feas: Quartiles,
    pub kkt: Quartiles,
}

/// One row per `(problem, eps_g)` in order of first appearance.
pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in results {
        if !keys.iter().any(|(g, e)| *g == r.problem && *e == r.eps_g) {
            keys.push((r.problem.clone(), r.eps_g));
        }
    }
    keys.into_iter()
        .map(|(group, eps_g)| {
            let cell: Vec<&RunResult> = results.iter().filter(|r| r.problem == group && r.eps_g == eps_g).collect();
            let ok: Vec<&RunResult> =
                cell.iter().copied().filter(|r| !r.failed() && r.feas_err_best.is_finite() && r.kkt_err_best.is_finite()).collect();
            let feas: Vec<f64> = ok.iter().map(|r| r.feas_err_best).collect();
            let kkt: Vec<f64> = ok.iter().map(|r| r.kkt_err_best).collect();
            SummaryRow {
                runs: cell.len(),
                failures: cell.len() - ok.len(),
                feas: quartiles(&feas).unwrap_or(Quartiles::NAN),
                kkt: quartiles(&kkt).unwrap_or(Quartiles::NAN),
                group,
                eps_g,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: "<summary>".into(), source };
    writeln!(out, "# quartiles: Tukey hinges (inclusive median); NaN marks cells without successful runs").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_string(), "eps_g".into(), "runs".into(), "failures".into()];
    for metric in ["feas", "kkt"] {
        for q in ["min", "q1", "median", "q3", "max"] {
            header.push(format!("{metric}_{q}"));
        }
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.group.clone(), r.eps_g.to_string(), r.runs.to_string(), r.failures.to_string()];
        for q in [r.feas, r.kkt] {
            rec.extend([q.min, q.q1, q.median, q.q3, q.max].iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Groups with at least two noise levels carrying a finite median.
    pub groups: usize,
    /// `(group, lower eps_g, higher eps_g)` where the median KKT error fell.
    pub inversions: Vec<(String, f64, f64)>,
    pub holds: bool,
}

/// Whether the median best KKT error is nondecreasing in `eps_g` within each
/// group, allowing at most `max_inversions` decreasing adjacent pairs overall.
pub fn noise_monotonicity(rows: &[SummaryRow], max_inversions: usize) -> MonotonicityReport {
    let mut groups: Vec<&str> = Vec::new();
    for r in rows {
        if !groups.contains(&r.group.as_str()) {
            groups.push(&r.group);
        }
    }
    let mut counted = 0;
    let mut inversions = Vec::new();
    for g in groups {
        let mut levels: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.group == g && r.kkt.median.is_finite()).map(|r| (r.eps_g, r.kkt.median)).collect();
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        if levels.len() < 2 {
            continue;
        }
        counted += 1;
        for pair in levels.windows(2) {
            if pair[1].1 < pair[0].1 {
                inversions.push((g.to_string(), pair[0].0, pair[1].0));
            }
        }
    }
    MonotonicityReport { groups: counted, holds: inversions.len() <= max_inversions, inversions }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(problem: &str, eps_g: f64, kkt: f64) -> RunResult {
        RunResult {
            problem: problem.into(),
            seed: 0,
            eps_g,
            k_best: Some(1),
            feas_err_best: 0.0,
            kkt_err_best: kkt,
            iterations: 1,
            samples_used: 1,
            terminated_by: "budget_exhausted".into(),
            wall_time: 0.0,
        }
    }

    #[test]
    fn inclusive_quartiles() {
        let q = quartiles(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.5, 2.5, 3.5));
        let q = quartiles(&[7.0; 5]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (7.0, 7.0, 7.0, 7.0, 7.0));
        assert_eq!(quartiles(&[]), None);
    }

    #[test]
    fn failed_cell_gives_nan_row() {
        let mut r = result("a", 1e-2, 1.0);
        r.terminated_by = "error: boom".into();
        let rows = summarize(&[r]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].failures, 1);
        assert!(rows[0].kkt.median.is_nan());
        let mut out = Vec::new();
        write_summary(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# quartiles"));
        assert!(text.lines().nth(2).unwrap().contains("NaN"));
    }

    #[test]
    fn monotonicity_counts_inversions() {
        let rows = summarize(&[
            result("a", 1e-4, 1.0),
            result("a", 1e-2, 2.0),
            result("b", 1e-4, 3.0),
            result("b", 1e-2, 1.0),
        ]);
        let rep = noise_monotonicity(&rows, 1);
        assert_eq!(rep.groups, 2);
        assert_eq!(rep.inversions, vec![("b".to_string(), 1e-4, 1e-2)]);
        assert!(rep.holds);
        assert!(!noise_monotonicity(&rows, 0).holds);
    }
}

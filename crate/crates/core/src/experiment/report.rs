//! Per-group aggregates over the completed runs of a sweep.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::{RunManifest, RunStatus, SummaryRow};
use crate::error::{Error, Result};
use crate::eval::stats::{mean, mean_interval, median, quantile, wilson_interval};
use crate::eval::{welch_t_test, z_test_proportions, Alternative};

pub const AGGREGATES_CSV: &str = "aggregates.csv";
pub const AGGREGATES_JSON: &str = "aggregates.json";

/// One (k, model, n, d) group. Intervals are 95%; `ci_degenerate` is set when
/// the group has fewer than two runs and the accuracy interval collapses to
/// the point estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub k: usize,
    pub model: String,
    pub n: usize,
    pub d: usize,
    pub runs: usize,
    pub acc_mean: f64,
    pub acc_ci_lo: f64,
    pub acc_ci_hi: f64,
    pub learning_runs: usize,
    pub eligible_runs: usize,
    pub plm: Option<f64>,
    pub plm_ci_lo: Option<f64>,
    pub plm_ci_hi: Option<f64>,
    pub loss_median: f64,
    pub key_norm_q1: Option<f64>,
    pub key_norm_median: Option<f64>,
    pub key_norm_q3: Option<f64>,
    pub value_norm_q1: Option<f64>,
    pub value_norm_median: Option<f64>,
    pub value_norm_q3: Option<f64>,
    pub mcq_mean: Option<f64>,
    pub ci_degenerate: bool,
    /// Group compared against: the first group at the same k.
    pub ref_group: String,
    /// Two-sided Welch test of accuracy against `ref_group`.
    pub acc_t: Option<f64>,
    pub acc_p: Option<f64>,
    /// Two-sided pooled z-test of pLM against `ref_group`.
    pub plm_z: Option<f64>,
    pub plm_p: Option<f64>,
}

fn group_label(model: &str, n: usize, d: usize) -> String {
    format!("{model}/n{n}/d{d}")
}

fn quartiles(xs: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None, None);
    }
    (Some(quantile(xs, 0.25)), Some(median(xs)), Some(quantile(xs, 0.75)))
}

/// Groups rows by (k, model, n, d), ordered by k then model then n then d.
pub fn aggregate(rows: &[SummaryRow]) -> Result<Vec<AggregateRow>> {
    if rows.is_empty() {
        return Err(Error::Report("sweep has no successful runs".into()));
    }
    let mut keys: Vec<(usize, &str, usize, usize)> = rows.iter().map(|r| (r.k, r.model.as_str(), r.n, r.d)).collect();
    keys.sort_unstable();
    keys.dedup();

    let groups: Vec<Vec<&SummaryRow>> = keys
        .iter()
        .map(|&(k, m, n, d)| rows.iter().filter(|r| r.k == k && r.model == m && r.n == n && r.d == d).collect())
        .collect();

    let mut out = Vec::with_capacity(keys.len());
    for (gi, (&(k, model, n, d), group)) in keys.iter().zip(&groups).enumerate() {
        let acc: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
        let acc_mean = mean(&acc);
        let (acc_ci_lo, acc_ci_hi) = mean_interval(&acc).unwrap_or((acc_mean, acc_mean));
        let eligible = group.iter().filter(|r| r.learning.is_some()).count();
        let learning = group.iter().filter(|r| r.learning == Some(true)).count();
        let wilson = wilson_interval(learning as u64, eligible as u64);
        let losses: Vec<f64> = group.iter().map(|r| r.final_loss).collect();
        let keys_n: Vec<f64> = group.iter().filter_map(|r| r.key_norm).collect();
        let values_n: Vec<f64> = group.iter().filter_map(|r| r.value_norm).collect();
        let mcq: Vec<f64> = group.iter().filter_map(|r| r.mcq_acc).collect();
        let (kq1, kmed, kq3) = quartiles(&keys_n);
        let (vq1, vmed, vq3) = quartiles(&values_n);

        let ri = keys.iter().position(|key| key.0 == k).expect("group exists");
        let (_, rm, rn, rd) = keys[ri];
        let (mut acc_t, mut acc_p, mut plm_z, mut plm_p) = (None, None, None, None);
        if ri != gi {
            let ref_acc: Vec<f64> = groups[ri].iter().map(|r| r.accuracy).collect();
            if let Ok(t) = welch_t_test(&acc, &ref_acc, Alternative::TwoSided) {
                acc_t = Some(t.t);
                acc_p = Some(t.p);
            }
            let ref_eligible = groups[ri].iter().filter(|r| r.learning.is_some()).count();
            let ref_learning = groups[ri].iter().filter(|r| r.learning == Some(true)).count();
            if let Ok(z) = z_test_proportions(
                learning as u64,
                eligible as u64,
                ref_learning as u64,
                ref_eligible as u64,
                Alternative::TwoSided,
            ) {
                plm_z = Some(z.z);
                plm_p = Some(z.p);
            }
        }

        out.push(AggregateRow {
            k,
            model: model.to_owned(),
            n,
            d,
            runs: group.len(),
            acc_mean,
            acc_ci_lo,
            acc_ci_hi,
            learning_runs: learning,
            eligible_runs: eligible,
            plm: (eligible > 0).then(|| learning as f64 / eligible as f64),
            plm_ci_lo: wilson.map(|w| w.0),
            plm_ci_hi: wilson.map(|w| w.1),
            loss_median: median(&losses),
            key_norm_q1: kq1,
            key_norm_median: kmed,
            key_norm_q3: kq3,
            value_norm_q1: vq1,
            value_norm_median: vmed,
            value_norm_q3: vq3,
            mcq_mean: (!mcq.is_empty()).then(|| mean(&mcq)),
            ci_degenerate: group.len() < 2,
            ref_group: group_label(rm, rn, rd),
            acc_t,
            acc_p,
            plm_z,
            plm_p,
        });
    }
    Ok(out)
}

/// Summary rows of every successful run under `sweep_dir/runs`, in run-id order.
pub fn collect_rows(sweep_dir: &Path) -> Result<Vec<SummaryRow>> {
    let runs = sweep_dir.join("runs");
    let mut paths: Vec<PathBuf> = match fs::read_dir(&runs) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path().join("manifest.json"))
            .filter(|p| p.is_file())
            .collect(),
        Err(_) => Vec::new(),
    };
    paths.sort();
    let mut rows = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if let (RunStatus::Ok, Some(row)) = (manifest.status, manifest.summary) {
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Writes `aggregates.csv` and `aggregates.json` into the sweep directory.
pub fn write_report(sweep_dir: &Path) -> Result<Vec<AggregateRow>> {
    let rows = collect_rows(sweep_dir)?;
    let agg = aggregate(&rows)?;
    let csv_path = sweep_dir.join(AGGREGATES_CSV);
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in &agg {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = sweep_dir.join(AGGREGATES_JSON);
    fs::write(&json_path, serde_json::to_string_pretty(&agg)? + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, d: usize, run: &str, acc: f64, learning: Option<bool>, loss: f64) -> SummaryRow {
        SummaryRow {
            k,
            n: 1,
            d,
            model: "toy".into(),
            run: run.into(),
            accuracy: acc,
            learning,
            final_loss: loss,
            key_norm: Some(loss * 10.0),
            value_norm: Some(1.0),
            mcq_acc: None,
        }
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(aggregate(&[]), Err(Error::Report(_))));
    }

    #[test]
    fn single_run_degenerate() {
        let agg = aggregate(&[row(1, 1, "a", 0.4, Some(true), 0.2)]).unwrap();
        assert_eq!(agg.len(), 1);
        assert!(agg[0].ci_degenerate);
        assert_eq!((agg[0].acc_ci_lo, agg[0].acc_ci_hi), (0.4, 0.4));
        assert_eq!(agg[0].plm, Some(1.0));
        assert_eq!(agg[0].acc_p, None);
    }

    #[test]
    fn two_k_hand_values() {
        let rows = [
            row(1, 1, "a", 0.2, Some(true), 0.1),
            row(1, 1, "b", 0.6, Some(false), 0.3),
            row(1, 1, "c", 1.0, None, 0.2),
            row(5, 1, "d", 0.1, Some(false), 0.9),
            row(5, 1, "e", 0.3, Some(false), 0.5),
        ];
        let agg = aggregate(&rows).unwrap();
        assert_eq!(agg.len(), 2);
        let a = &agg[0];
        assert_eq!(a.k, 1);
        assert!((a.acc_mean - 0.6).abs() < 1e-12);
        // sample sd 0.4, half width 1.96 * 0.4 / sqrt(3)
        let half = 1.959_963_984_540_054 * 0.4 / 3f64.sqrt();
        assert!((a.acc_ci_hi - 0.6 - half).abs() < 1e-12);
        assert_eq!((a.learning_runs, a.eligible_runs, a.plm), (1, 2, Some(0.5)));
        assert!((a.loss_median - 0.2).abs() < 1e-12);
        assert!((a.key_norm_median.unwrap() - 2.0).abs() < 1e-12);
        let b = &agg[1];
        assert!((b.acc_mean - 0.2).abs() < 1e-12);
        assert!((b.loss_median - 0.7).abs() < 1e-12);
        assert_eq!(b.plm, Some(0.0));
        assert_eq!(b.mcq_mean, None);
    }

    #[test]
    fn significance_matches_z_test() {
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push(row(5, 1, &format!("a{i}"), 0.1 * i as f64, Some(i < 2), 0.5));
            rows.push(row(5, 4, &format!("b{i}"), 0.1 * i as f64 + 0.2, Some(i < 5), 0.1));
        }
        let agg = aggregate(&rows).unwrap();
        assert_eq!(agg[1].ref_group, "toy/n1/d1");
        let z = z_test_proportions(5, 6, 2, 6, Alternative::TwoSided).unwrap();
        assert_eq!(agg[1].plm_z, Some(z.z));
        assert_eq!(agg[1].plm_p, Some(z.p));
        let acc_a: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let acc_b: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 + 0.2).collect();
        let t = welch_t_test(&acc_b, &acc_a, Alternative::TwoSided).unwrap();
        assert_eq!(agg[1].acc_t, Some(t.t));
        assert_eq!(agg[0].plm_z, None);
    }
}

//! Comparison reports and their JSON/CSV forms.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Quantity};
use crate::closedform::ClosedForm;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// How an estimate is judged against its reference value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |mean - reference| within the tolerance.
    Equal,
    /// mean strictly below the reference.
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub std_dev: f64,
    pub n: usize,
}

/// Pass/fail rule shared by every report.
///
/// Equal: |mean - ref| ≤ max(3·stderr, grid_tol·|ref|, 1e-9·|ref|). The
/// last term is a floating-point floor for estimates with zero variance.
pub fn judge(comparison: Comparison, est: &Estimate, reference: f64, grid_tolerance: f64) -> (f64, Verdict) {
    let ok = |b: bool| if b { Verdict::Pass } else { Verdict::Fail };
    match comparison {
        Comparison::Equal => {
            let tol = (3.0 * est.stderr)
                .max(grid_tolerance * reference.abs())
                .max(1e-9 * reference.abs());
            (tol, ok((est.mean - reference).abs() <= tol))
        }
        Comparison::UpperBound => (0.0, ok(est.mean < reference)),
    }
}

/// (mean - reference)/stderr, `None` when stderr is 0 and they differ.
pub fn z_score(est: &Estimate, reference: f64) -> Option<f64> {
    let diff = est.mean - reference;
    if est.stderr > 0.0 {
        Some(diff / est.stderr)
    } else if diff == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// One measured quantity at one level against its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub quantity: Quantity,
    /// `None` for quantities that do not depend on a level.
    pub t_scaled: Option<f64>,
    pub closed_form: ClosedForm,
    pub comparison: Comparison,
    pub estimate: Estimate,
    pub z_score: Option<f64>,
    pub grid_tolerance: f64,
    /// Allowed |mean - closed form| for `Equal` comparisons.
    pub tolerance: f64,
    pub verdict: Verdict,
    /// The first pass failed and this row comes from the 4N rerun.
    pub retried: bool,
    pub failed_trials: usize,
    /// Trials with a near-critical level or near-tangential crossing.
    pub flagged_trials: usize,
}

impl ComparisonReport {
    /// Recomputes the verdict from the stored fields.
    pub fn recheck(&self) -> Verdict {
        judge(self.comparison, &self.estimate, self.closed_form.value, self.grid_tolerance).1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ComparisonReport>,
    pub runtime_seconds: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict == Verdict::Pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the JSON report with the runtime zeroed.
    pub fn digest(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.runtime_seconds = 0.0;
        Ok(hex(&Sha256::digest(copy.to_json()?.as_bytes())))
    }

    /// One row per (quantity, level).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["config_hash", "quantity", "t_scaled", "N", "mean", "stderr", "closed_form", "z", "verdict"])?;
        for r in &self.rows {
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            wr.write_record([
                self.config_hash.clone(),
                r.quantity.to_string(),
                opt(r.t_scaled),
                r.estimate.n.to_string(),
                r.estimate.mean.to_string(),
                r.estimate.stderr.to_string(),
                r.closed_form.value.to_string(),
                opt(r.z_score),
                match r.verdict {
                    Verdict::Pass => "pass".into(),
                    Verdict::Fail => "fail".into(),
                },
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// SHA-256 of the canonical JSON form of the experiment (output path
/// excluded).
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(hex(&Sha256::digest(serde_json::to_vec(cfg)?)))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, stderr: f64) -> Estimate {
        Estimate {
            mean,
            stderr,
            std_dev: stderr * 10.0,
            n: 100,
        }
    }

    #[test]
    fn equality_rule() {
        assert_eq!(judge(Comparison::Equal, &est(1.02, 0.01), 1.0, 0.0).1, Verdict::Pass);
        assert_eq!(judge(Comparison::Equal, &est(1.04, 0.01), 1.0, 0.0).1, Verdict::Fail);
        assert_eq!(judge(Comparison::Equal, &est(1.04, 0.01), 1.0, 0.05).1, Verdict::Pass);
        // zero-variance estimate equal up to rounding
        assert_eq!(judge(Comparison::Equal, &est(2.0 + 1e-13, 0.0), 2.0, 0.0).1, Verdict::Pass);
        assert_eq!(z_score(&est(2.0, 0.0), 2.0), Some(0.0));
        assert_eq!(z_score(&est(2.1, 0.0), 2.0), None);
    }

    #[test]
    fn bound_rule() {
        assert_eq!(judge(Comparison::UpperBound, &est(0.9, 0.5), 1.0, 0.0).1, Verdict::Pass);
        assert_eq!(judge(Comparison::UpperBound, &est(1.0, 0.0), 1.0, 0.0).1, Verdict::Fail);
    }
}

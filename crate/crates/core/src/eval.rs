//! Precision, recall and F-score of success predictions, and the ablation table.

use std::fmt::Write as _;

use crate::dataset::TrajectoryDataset;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Truly successful samples.
    pub actual_success: usize,
    /// Samples predicted successful.
    pub predicted_success: usize,
    pub true_positive: usize,
    pub actual_failure: usize,
    pub predicted_failure: usize,
    /// Nothing was predicted successful, so precision is reported as 0.
    pub precision_undefined: bool,
    /// Nothing was actually successful, so recall is reported as 0.
    pub recall_undefined: bool,
}

impl Metrics {
    /// From `(predicted_success, actual_success)` pairs.
    pub fn from_predictions(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut m = Metrics::default();
        for (pred, actual) in pairs {
            if pred {
                m.predicted_success += 1;
            } else {
                m.predicted_failure += 1;
            }
            if actual {
                m.actual_success += 1;
            } else {
                m.actual_failure += 1;
            }
            if pred && actual {
                m.true_positive += 1;
            }
        }
        m.precision_undefined = m.predicted_success == 0;
        m.recall_undefined = m.actual_success == 0;
        m.precision = if m.precision_undefined {
            0.0
        } else {
            m.true_positive as f64 / m.predicted_success as f64
        };
        m.recall = if m.recall_undefined {
            0.0
        } else {
            m.true_positive as f64 / m.actual_success as f64
        };
        m.f_score = f_score(m.precision, m.recall);
        m
    }

    pub fn total(&self) -> usize {
        self.predicted_success + self.predicted_failure
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f_score(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Scores a predictor on the initial state of every trajectory.
pub fn score(predict: impl Fn(&[f64]) -> bool, test: &TrajectoryDataset) -> Metrics {
    Metrics::from_predictions(
        test.trajectories
            .iter()
            .map(|t| (predict(t.initial()), t.label.is_success())),
    )
}

/// One row of an ablation study.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub axis: String,
    pub setting: String,
    /// Seed of the reported run.
    pub seed: u64,
    /// Test metrics of the seed with the best train-split F, or the failure reason.
    pub outcome: Result<Metrics, String>,
    pub n_test: usize,
}

pub const REPORT_HEADER: &str = "axis,setting,seed,P,R,F,n_test";

/// Comma-separated table; failed rows leave P, R and F empty.
pub fn report_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for r in rows {
        match &r.outcome {
            Ok(m) => writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{}",
                r.axis, r.setting, r.seed, m.precision, m.recall, m.f_score, r.n_test
            ),
            Err(_) => writeln!(s, "{},{},{},,,,{}", r.axis, r.setting, r.seed, r.n_test),
        }
        .unwrap();
    }
    s
}

pub fn report_summary(rows: &[AblationRow]) -> String {
    let mut s = String::new();
    for r in rows {
        match &r.outcome {
            Ok(m) => {
                write!(
                    s,
                    "{:<10} {:<8} seed {:<6} P {:5.1}%  R {:5.1}%  F {:5.1}%  predicted success {}/{}",
                    r.axis,
                    r.setting,
                    r.seed,
                    100.0 * m.precision,
                    100.0 * m.recall,
                    100.0 * m.f_score,
                    m.predicted_success,
                    r.n_test
                )
                .unwrap();
                if m.precision_undefined {
                    s.push_str("  (no predicted successes; precision undefined)");
                }
                s.push('\n');
            }
            Err(e) => writeln!(s, "{:<10} {:<8} failed: {e}", r.axis, r.setting).unwrap(),
        }
    }
    s
}

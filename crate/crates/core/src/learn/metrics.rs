//! Confusion matrix, precision, recall and F-beta.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    /// Counts predictions against labels; both are 0/1 and of equal length.
    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Self {
        assert_eq!(predicted.len(), actual.len(), "prediction and label counts differ");
        let mut m = ConfusionMatrix::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p != 0, a != 0) {
                (false, false) => m.tn += 1,
                (true, false) => m.fp += 1,
                (false, true) => m.fn_ += 1,
                (true, true) => m.tp += 1,
            }
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    /// `[[tn, fp], [fn, tp]]`, rows indexed by the true class.
    pub fn as_table(&self) -> [[u64; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub beta: f64,
    pub f_beta: f64,
    /// No positive predictions: precision reported as 0.
    pub precision_undefined: bool,
    /// No positive labels: recall reported as 0.
    pub recall_undefined: bool,
}

impl Evaluation {
    pub fn from_matrix(matrix: ConfusionMatrix, beta: f64) -> Self {
        let predicted_pos = matrix.tp + matrix.fp;
        let actual_pos = matrix.tp + matrix.fn_;
        let precision = if predicted_pos == 0 { 0.0 } else { matrix.tp as f64 / predicted_pos as f64 };
        let recall = if actual_pos == 0 { 0.0 } else { matrix.tp as f64 / actual_pos as f64 };
        Evaluation {
            matrix,
            precision,
            recall,
            beta,
            f_beta: f_beta(precision, recall, beta),
            precision_undefined: predicted_pos == 0,
            recall_undefined: actual_pos == 0,
        }
    }
}

/// `(b^2 + 1) P R / (b^2 P + R)`, taken as 0 when both P and R are 0.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom <= 0.0 {
        0.0
    } else {
        (b2 + 1.0) * precision * recall / denom
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    f_beta(precision, recall, 1.0)
}

/// One row of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub scenario: String,
    pub classifier: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn write_evaluation_csv(rows: &[EvaluationRow]) -> String {
    let mut out = String::from("scenario,classifier,precision,recall,f1\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.scenario, r.classifier, r.precision, r.recall, r.f1));
    }
    out
}

pub fn parse_evaluation_csv(text: &str) -> Result<Vec<EvaluationRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some("scenario,classifier,precision,recall,f1") => {}
        other => return Err(format!("unexpected evaluation header {other:?}")),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(format!("expected 5 fields in '{l}'"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number '{s}': {e}"));
            Ok(EvaluationRow {
                scenario: f[0].to_string(),
                classifier: f[1].to_string(),
                precision: num(f[2])?,
                recall: num(f[3])?,
                f1: num(f[4])?,
            })
        })
        .collect()
}

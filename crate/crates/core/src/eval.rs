//! Confusion matrices and one-vs-rest classification metrics.
//!
//! Ratios whose denominator is zero are `None` and render as `n/a`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("{names} class names for a {classes}-class matrix")]
    NameCount { names: usize, classes: usize },
}

/// `counts[i][j]` = windows of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    /// Builds from square rows of counts.
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Option<Self> {
        let c = rows.len();
        (c > 0 && rows.iter().all(|r| r.len() == c)).then_some(Self { counts: rows })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut m = ConfusionMatrix::zeros(classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label >= classes {
                return Err(EvalError::LabelOutOfRange { label, classes });
            }
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvrCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl OvrCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Treats `positive` as the positive class and every other class as negative.
pub fn ovr_counts(m: &ConfusionMatrix, positive: usize) -> Result<OvrCounts, EvalError> {
    let c = m.classes();
    if positive >= c {
        return Err(EvalError::LabelOutOfRange { label: positive, classes: c });
    }
    let tp = m.get(positive, positive);
    let fn_ = (0..c).filter(|&j| j != positive).map(|j| m.get(positive, j)).sum();
    let fp = (0..c).filter(|&i| i != positive).map(|i| m.get(i, positive)).sum();
    let tn = m.total() - tp - fn_ - fp;
    Ok(OvrCounts { tp, fp, fn_, tn })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

/// `(1 + β²)·P·R / (β²·R + P)`
pub fn f_measure(precision: Option<f64>, recall: Option<f64>, beta: f64) -> Option<f64> {
    let (p, r) = (precision?, recall?);
    let b2 = beta * beta;
    let den = b2 * r + p;
    (den != 0.0).then(|| (1.0 + b2) * p * r / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

impl ClassMetrics {
    pub fn from_counts(class: impl Into<String>, k: OvrCounts, beta: f64) -> Self {
        let precision = ratio(k.tp, k.tp + k.fp);
        let recall = ratio(k.tp, k.tp + k.fn_);
        Self {
            class: class.into(),
            precision,
            recall,
            f_measure: f_measure(precision, recall, beta),
            specificity: ratio(k.tn, k.tn + k.fp),
            accuracy: ratio(k.tp + k.tn, k.total()),
        }
    }
}

pub fn metrics(m: &ConfusionMatrix, positive: usize, beta: f64) -> Result<ClassMetrics, EvalError> {
    check_beta(beta)?;
    Ok(ClassMetrics::from_counts(format!("class {positive}"), ovr_counts(m, positive)?, beta))
}

fn check_beta(beta: f64) -> Result<(), EvalError> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(EvalError::InvalidBeta(beta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub beta: f64,
    pub classes: Vec<ClassMetrics>,
    pub class_names: Vec<String>,
    pub matrix: ConfusionMatrix,
}

/// One-vs-rest metrics for every class.
pub fn evaluate<S: AsRef<str>>(m: &ConfusionMatrix, names: &[S], beta: f64) -> Result<EvalReport, EvalError> {
    check_beta(beta)?;
    if names.len() != m.classes() {
        return Err(EvalError::NameCount {
            names: names.len(),
            classes: m.classes(),
        });
    }
    let classes = names
        .iter()
        .enumerate()
        .map(|(i, n)| Ok(ClassMetrics::from_counts(n.as_ref(), ovr_counts(m, i)?, beta)))
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(EvalReport {
        beta,
        classes,
        class_names: names.iter().map(|n| n.as_ref().to_string()).collect(),
        matrix: m.clone(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

const COLUMNS: [&str; 5] = ["Precision", "Recall", "F-Measure", "Specificity", "Accuracy"];

/// Metrics table followed by the confusion grid.
pub fn render_report(r: &EvalReport) -> String {
    let name_w = r
        .classes
        .iter()
        .map(|c| c.class.len())
        .chain(r.class_names.iter().map(|n| n.len()))
        .chain(["Activity".len()])
        .max()
        .unwrap_or(8);
    let mut out = format!("{:<name_w$}", "Activity");
    for h in COLUMNS {
        out.push_str(&format!("  {h:>11}"));
    }
    out.push('\n');
    for c in &r.classes {
        out.push_str(&format!("{:<name_w$}", c.class));
        for v in [c.precision, c.recall, c.f_measure, c.specificity, c.accuracy] {
            out.push_str(&format!("  {:>11}", cell(v)));
        }
        out.push('\n');
    }
    out.push_str(&format!("beta = {}\n\n", r.beta));

    out.push_str("Confusion matrix (rows: true, columns: predicted)\n");
    let width = r
        .matrix
        .rows()
        .iter()
        .flatten()
        .map(|v| v.to_string().len())
        .chain(r.class_names.iter().map(|n| n.len()))
        .max()
        .unwrap_or(1);
    out.push_str(&" ".repeat(name_w));
    for n in &r.class_names {
        out.push_str(&format!("  {n:>width$}"));
    }
    out.push('\n');
    for (n, row) in r.class_names.iter().zip(r.matrix.rows()) {
        out.push_str(&format!("{n:<name_w$}"));
        for v in row {
            out.push_str(&format!("  {v:>width$}"));
        }
        out.push('\n');
    }
    out
}

/// Machine-readable form of [`render_report`]; undefined metrics are `null`.
pub fn report_json(r: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

/// Header row of class names, then one row per true class.
pub fn confusion_csv<S: AsRef<str>>(m: &ConfusionMatrix, names: &[S]) -> String {
    let mut out = String::from("true\\predicted");
    for n in names {
        out.push(',');
        out.push_str(n.as_ref());
    }
    out.push('\n');
    for (n, row) in names.iter().zip(m.rows()) {
        out.push_str(n.as_ref());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig9() -> ConfusionMatrix {
        ConfusionMatrix::from_rows(vec![vec![5286, 288], vec![792, 13587]]).unwrap()
    }

    #[test]
    fn hand_counted_matrix() {
        let m = confusion(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(m.rows(), &[vec![1, 1], vec![0, 1]]);
        let d = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(d.rows(), &[vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn confusion_errors() {
        assert_eq!(
            confusion(&[0, 1], &[0], 2),
            Err(EvalError::LengthMismatch { truth: 2, predicted: 1 })
        );
        assert_eq!(
            confusion(&[0, 2], &[0, 1], 2),
            Err(EvalError::LabelOutOfRange { label: 2, classes: 2 })
        );
    }

    #[test]
    fn label_lists_reproduce_matrix() {
        let mut t = Vec::new();
        let mut p = Vec::new();
        for (ti, pi, n) in [(0, 0, 5286), (0, 1, 288), (1, 0, 792), (1, 1, 13587)] {
            t.extend(std::iter::repeat(ti).take(n));
            p.extend(std::iter::repeat(pi).take(n));
        }
        assert_eq!(confusion(&t, &p, 2).unwrap(), fig9());
    }

    #[test]
    fn ovr_both_readings() {
        let k = ovr_counts(&fig9(), 0).unwrap();
        assert_eq!(k, OvrCounts { tp: 5286, fp: 792, fn_: 288, tn: 13587 });
        let k = ovr_counts(&fig9(), 1).unwrap();
        assert_eq!(k, OvrCounts { tp: 13587, fp: 288, fn_: 792, tn: 5286 });
        let diag = ConfusionMatrix::from_rows(vec![vec![3, 0], vec![0, 4]]).unwrap();
        let k = ovr_counts(&diag, 0).unwrap();
        assert_eq!((k.fp, k.fn_), (0, 0));
    }

    #[test]
    fn fig9_metrics() {
        let m = metrics(&fig9(), 0, 1.0).unwrap();
        let r4 = |v: Option<f64>| format!("{:.4}", v.unwrap());
        assert_eq!(r4(m.accuracy), "0.9459");
        assert_eq!(r4(m.precision), "0.8697");
        assert_eq!(r4(m.recall), "0.9483");
        assert_eq!(r4(m.specificity), "0.9449");
    }

    #[test]
    fn f_measure_examples() {
        assert_eq!(format!("{:.2}", f_measure(Some(0.89), Some(0.97), 1.0).unwrap()), "0.93");
        let f = f_measure(Some(0.5), Some(1.0), 2.0).unwrap();
        assert!((f - 2.5 / 4.5).abs() < 1e-15);
        for x in [0.1, 0.37, 1.0] {
            assert!((f_measure(Some(x), Some(x), 1.0).unwrap() - x).abs() < 1e-15);
        }
        assert_eq!(f_measure(Some(0.0), Some(0.0), 1.0), None);
        assert_eq!(f_measure(None, Some(0.5), 1.0), None);
    }

    #[test]
    fn undefined_precision_is_none() {
        let m = ConfusionMatrix::from_rows(vec![vec![0, 4], vec![0, 6]]).unwrap();
        let r = metrics(&m, 0, 1.0).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.f_measure, None);
        assert!(metrics(&m, 0, 0.0).is_err());
    }

    #[test]
    fn specificity_equals_other_recall() {
        let m = fig9();
        assert_eq!(metrics(&m, 0, 1.0).unwrap().specificity, metrics(&m, 1, 1.0).unwrap().recall);
    }

    #[test]
    fn rendered_table_from_direct_values() {
        let row = ClassMetrics {
            class: "eating".into(),
            precision: Some(0.89),
            recall: Some(0.97),
            f_measure: f_measure(Some(0.89), Some(0.97), 1.0),
            specificity: Some(0.96),
            accuracy: Some(0.96),
        };
        let r = EvalReport {
            beta: 1.0,
            classes: vec![row],
            class_names: vec!["eating".into(), "other".into()],
            matrix: fig9(),
        };
        let text = render_report(&r);
        let line = text.lines().nth(1).unwrap();
        let cells: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cells, ["eating", "0.89", "0.97", "0.93", "0.96", "0.96"]);
        assert_eq!(text, render_report(&r));
        assert!(text.contains("5286"));
    }

    #[test]
    fn undefined_renders_na() {
        let m = ConfusionMatrix::from_rows(vec![vec![0, 4], vec![0, 6]]).unwrap();
        let r = evaluate(&m, &["eating", "other"], 1.0).unwrap();
        let text = render_report(&r);
        let eating = text.lines().nth(1).unwrap();
        assert!(eating.split_whitespace().nth(1) == Some("n/a"), "{text}");
        assert!(report_json(&r).contains("\"precision\": null"));
    }

    #[test]
    fn csv_export() {
        assert_eq!(
            confusion_csv(&fig9(), &["eating", "other"]),
            "true\\predicted,eating,other\neating,5286,288\nother,792,13587\n"
        );
    }
}

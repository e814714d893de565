//! Frame-level evaluation: confusion counts, ROC points over k, AUC.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{AadError, Result};

/// Binary per-frame labels, `true` = anomalous frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    labels: Vec<bool>,
}

impl GroundTruth {
    pub fn new(labels: Vec<bool>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Swaps positives and negatives.
    pub fn inverted(&self) -> Self {
        Self::new(self.labels.iter().map(|l| !l).collect())
    }

    /// One `0`/`1` token per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            match line.trim() {
                "" => continue,
                "0" => labels.push(false),
                "1" => labels.push(true),
                other => {
                    return Err(AadError::Parse {
                        line: i + 1,
                        msg: format!("expected 0 or 1, found {other:?}"),
                    })
                }
            }
        }
        Ok(Self { labels })
    }

    pub fn to_text(&self) -> String {
        self.labels.iter().map(|&l| if l { "1\n" } else { "0\n" }).collect()
    }
}

pub fn load_frame_labels(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).map_err(|e| AadError::from(e).in_file(path))?;
    GroundTruth::parse(&text).map_err(|e| e.in_file(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `tp / (tp + fn)`, or 0 with no positives.
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `fp / (fp + tn)`, or 0 with no negatives.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts over frames `first_evaluated..`; earlier frames are
/// warmup and excluded.
pub fn confusion(pred: &[bool], truth: &GroundTruth, first_evaluated: usize) -> Result<Confusion> {
    if pred.len() != truth.len() {
        return Err(AadError::Shape(format!(
            "{} predictions for {} ground-truth frames",
            pred.len(),
            truth.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth.labels()).skip(first_evaluated) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub k: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub counts: Confusion,
}

impl RocPoint {
    pub fn new(k: f64, counts: Confusion) -> Self {
        Self {
            k,
            tpr: counts.tpr(),
            fpr: counts.fpr(),
            counts,
        }
    }
}

/// Trapezoidal area under `(fpr, tpr)` with `(0, 0)` and `(1, 1)` appended.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend_from_slice(points);
    pts.push((1.0, 1.0));
    if pts.len() < 3 {
        return Err(AadError::InsufficientData("AUC needs at least one ROC point".into()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum())
}

/// AUC of a k-sweep.
pub fn sweep_auc(points: &[RocPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(AadError::InsufficientData(format!(
            "AUC needs at least 2 sweep points, have {}",
            points.len()
        )));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    auc(&xy)
}

/// `k,tp,fp,tn,fn,tpr,fpr` rows, then `# auc=<value>` when available.
pub fn roc_csv(points: &[RocPoint], auc: Option<f64>) -> String {
    let mut out = String::from("k,tp,fp,tn,fn,tpr,fpr\n");
    for p in points {
        let c = p.counts;
        writeln!(out, "{},{},{},{},{},{},{}", p.k, c.tp, c.fp, c.tn, c.fn_, p.tpr, p.fpr)
            .expect("writing to a String cannot fail");
    }
    if let Some(a) = auc {
        writeln!(out, "# auc={a}").expect("writing to a String cannot fail");
    }
    out
}

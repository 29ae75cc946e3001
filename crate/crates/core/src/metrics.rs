//! Classification metrics: accuracy, F1, one-vs-all ROC and AUC.

use crate::error::{Error, Result};
use crate::types::SeverityScore;
use serde::{Deserialize, Serialize};

fn check_lengths(preds: &[usize], truths: &[usize]) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch(preds.len(), truths.len()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], truths: &[usize]) -> Result<f64> {
    check_lengths(preds, truths)?;
    let hits = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    #[default]
    Macro,
    Weighted,
}

/// Per-class F1 with the zero-division convention (`P + R = 0` gives 0).
pub fn f1_per_class(preds: &[usize], truths: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    check_lengths(preds, truths)?;
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &t) in preds.iter().zip(truths) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::InvalidParameter(format!("label outside 0..{n_classes}")));
        }
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    Ok((0..n_classes)
        .map(|c| {
            let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
            let precision = ratio(tp[c], tp[c] + fp[c]);
            let recall = ratio(tp[c], tp[c] + fn_[c]);
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect())
}

pub fn f1_score(preds: &[usize], truths: &[usize], n_classes: usize, average: F1Average) -> Result<f64> {
    let per_class = f1_per_class(preds, truths, n_classes)?;
    Ok(match average {
        F1Average::Macro => per_class.iter().sum::<f64>() / n_classes as f64,
        F1Average::Weighted => {
            let mut support = vec![0usize; n_classes];
            for &t in truths {
                support[t] += 1;
            }
            per_class.iter().zip(&support).map(|(f, &s)| f * s as f64).sum::<f64>() / truths.len() as f64
        }
    })
}

pub fn f1_macro(preds: &[usize], truths: &[usize], n_classes: usize) -> Result<f64> {
    f1_score(preds, truths, n_classes, F1Average::Macro)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score at or above which samples are called positive; `+inf` for the origin.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve with one point per distinct score (ties grouped), AUC by the
/// trapezoidal rule.
pub fn roc_binary(scores: &[f64], positives: &[bool]) -> Result<RocCurve> {
    if scores.len() != positives.len() {
        return Err(Error::LengthMismatch(scores.len(), positives.len()));
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateClass(0));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64, threshold: s });
    }
    let auc =
        points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum::<f64>().clamp(0.0, 1.0);
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub clip_id: String,
    pub truth: SeverityScore,
    pub scores: [f64; SeverityScore::COUNT],
}

impl ScoredRow {
    /// Arg-max class; ties go to the lower class.
    pub fn predicted(&self) -> usize {
        let mut best = 0;
        for c in 1..self.scores.len() {
            if self.scores[c] > self.scores[best] {
                best = c;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredPredictions {
    rows: Vec<ScoredRow>,
}

impl ScoredPredictions {
    pub fn new(rows: Vec<ScoredRow>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFiniteValue { index: i });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ScoredRow] {
        &self.rows
    }

    pub fn truths(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.truth.index()).collect()
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.rows.iter().map(ScoredRow::predicted).collect()
    }

    pub fn support(&self) -> [usize; SeverityScore::COUNT] {
        let mut s = [0; SeverityScore::COUNT];
        for r in &self.rows {
            s[r.truth.index()] += 1;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucReport {
    /// Support-weighted mean over usable classes.
    pub weighted: f64,
    /// Unweighted mean over usable classes.
    pub macro_avg: f64,
    pub per_class: [Option<f64>; SeverityScore::COUNT],
    pub support: [usize; SeverityScore::COUNT],
    pub curves: Vec<Option<RocCurve>>,
    /// Classes without positives or negatives, excluded from both means.
    pub degenerate: Vec<u8>,
}

/// Averages per-class AUCs; `None` entries are skipped.
pub fn average_auc(per_class: &[Option<f64>], support: &[usize]) -> Result<(f64, f64)> {
    let usable: Vec<(f64, usize)> = per_class.iter().zip(support).filter_map(|(a, &s)| a.map(|a| (a, s))).collect();
    if usable.is_empty() {
        return Err(Error::AllClassesDegenerate);
    }
    let total: usize = usable.iter().map(|&(_, s)| s).sum();
    let weighted = usable.iter().map(|&(a, s)| a * s as f64).sum::<f64>() / total as f64;
    let macro_avg = usable.iter().map(|&(a, _)| a).sum::<f64>() / usable.len() as f64;
    Ok((weighted, macro_avg))
}

pub fn auc_multiclass(sp: &ScoredPredictions) -> Result<AucReport> {
    let support = sp.support();
    let mut per_class = [None; SeverityScore::COUNT];
    let mut curves = Vec::with_capacity(SeverityScore::COUNT);
    let mut degenerate = Vec::new();
    for (c, slot) in per_class.iter_mut().enumerate() {
        let scores: Vec<f64> = sp.rows.iter().map(|r| r.scores[c]).collect();
        let positives: Vec<bool> = sp.rows.iter().map(|r| r.truth.index() == c).collect();
        match roc_binary(&scores, &positives) {
            Ok(curve) => {
                *slot = Some(curve.auc);
                curves.push(Some(curve));
            }
            Err(Error::DegenerateClass(_)) => {
                degenerate.push(c as u8);
                curves.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let (weighted, macro_avg) = average_auc(&per_class, &support)?;
    Ok(AucReport { weighted, macro_avg, per_class, support, curves, degenerate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_average: F1Average,
    pub auc: AucReport,
}

impl MetricsReport {
    pub fn compute(sp: &ScoredPredictions, f1_average: F1Average) -> Result<Self> {
        let preds = sp.predictions();
        let truths = sp.truths();
        Ok(Self {
            n: truths.len(),
            accuracy: accuracy(&preds, &truths)?,
            f1: f1_score(&preds, &truths, SeverityScore::COUNT, f1_average)?,
            f1_average,
            auc: auc_multiclass(sp)?,
        })
    }
}

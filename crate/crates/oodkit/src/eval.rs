//! ROC/AUC evaluation, threshold decisions and top-k OOD ranking.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Scores with ground-truth labels: 1 = outlier, 0 = normal.
#[derive(Debug, Clone)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.is_empty() || scores.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "scores and labels must be equal-length and non-empty: {} vs {}",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite score at index {pos}"
            )));
        }
        if let Some(pos) = labels.iter().position(|l| *l > 1) {
            return Err(Error::InvalidParameter(format!(
                "label at index {pos} is not 0 or 1"
            )));
        }
        Ok(Self { scores, labels })
    }
}

/// One operating point of the ROC sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve with tie-grouped points and the rank-based AUC.
///
/// Each point gives the false/true positive rates of the decision
/// "outlier iff score > threshold" (the same boundary rule as
/// [`threshold_decide`]); the sweep runs from the strictest threshold
/// (highest score, nothing flagged) down to negative infinity (everything
/// flagged), so (0,0) and (1,1) are always present and both rates are
/// nondecreasing.
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Builds the ROC curve and AUC for labeled scores.
///
/// The AUC is the Mann-Whitney statistic: the probability that a random
/// outlier outscores a random normal point, with ties counting one half.
/// Tie groups move as a single sweep step, so duplicate scores cannot bias
/// the curve.
pub fn roc_curve(ls: &LabeledScores) -> Result<RocCurve> {
    let n_pos = ls.labels.iter().filter(|&&l| l == 1).count();
    let n_neg = ls.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidParameter(format!(
            "ROC needs both classes: got {n_pos} outliers and {n_neg} normals"
        )));
    }

    // sort descending by score; group ties into single steps
    let mut order: Vec<usize> = (0..ls.scores.len()).collect();
    order.sort_by(|&a, &b| ls.scores[b].partial_cmp(&ls.scores[a]).unwrap());

    let mut points = Vec::new();
    points.push(RocPoint {
        threshold: ls.scores[order[0]],
        fpr: 0.0,
        tpr: 0.0,
    });
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let score = ls.scores[order[i]];
        let mut j = i;
        while j < order.len() && ls.scores[order[j]] == score {
            if ls.labels[order[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let threshold = if j < order.len() {
            ls.scores[order[j]]
        } else {
            f64::NEG_INFINITY
        };
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
        i = j;
    }

    // rank-based Mann-Whitney AUC with average ranks over tie groups
    let mut asc: Vec<usize> = (0..ls.scores.len()).collect();
    asc.sort_by(|&a, &b| ls.scores[a].partial_cmp(&ls.scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < asc.len() {
        let score = ls.scores[asc[i]];
        let mut j = i;
        let mut pos_in_group = 0usize;
        while j < asc.len() && ls.scores[asc[j]] == score {
            if ls.labels[asc[j]] == 1 {
                pos_in_group += 1;
            }
            j += 1;
        }
        // ranks are 1-based; every member of the tie group gets the average
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j;
    }
    let n_pos_f = n_pos as f64;
    let u = rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0;
    let auc = u / (n_pos_f * n_neg as f64);

    Ok(RocCurve { points, auc })
}

/// Eq.-style boolean decision: 1 (normal) iff score <= theta, else 0
/// (outlier). A score exactly at the threshold counts as normal.
pub fn threshold_decide(score: f64, theta: f64) -> u8 {
    if score <= theta {
        1
    } else {
        0
    }
}

/// Ids of the k highest scores, descending; ties resolved toward the
/// earlier id in the input order.
pub fn top_k_outliers<T: Clone>(scores: &[f64], ids: &[T], k: usize) -> Result<Vec<T>> {
    if scores.len() != ids.len() {
        return Err(Error::DimensionMismatch {
            context: "scores vs ids length",
            expected: scores.len(),
            got: ids.len(),
        });
    }
    if k > scores.len() {
        return Err(Error::InvalidParameter(format!(
            "k must be at most {}, got {k}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores must be comparable")
            .then(a.cmp(&b))
    });
    Ok(order.into_iter().take(k).map(|i| ids[i].clone()).collect())
}

/// Renders the curve in the text export format: a `threshold,fpr,tpr`
/// header, one point per line at full precision, and a trailing
/// `# auc=<value>` comment.
pub fn roc_to_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", p.threshold, p.fpr, p.tpr);
    }
    let _ = writeln!(out, "# auc={:?}", curve.auc);
    out
}

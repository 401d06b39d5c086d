//! Ranking and thresholded classification metrics, the cost-weighted
//! financial loss, and bootstrap evaluation over the test set.
//!
//! Every rule here treats `score >= threshold` as a fraud prediction.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Resamples that draw a single class are redrawn at most this many times.
pub const MAX_REDRAWS: usize = 100;

pub const DEFAULT_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Zero when nothing is flagged.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Zero when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unit costs of misclassification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Average credit line lost per funded fraudster (false negative).
    pub acl: f64,
    /// Customer lifetime value at stake per wrongly rejected applicant.
    pub clv: f64,
    /// Probability that a rejected legitimate applicant churns.
    pub churn_given_reject: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            acl: 1000.0,
            clv: 500.0,
            churn_given_reject: 0.2,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.acl >= 0.0 && self.acl.is_finite()) || !(self.clv >= 0.0 && self.clv.is_finite()) {
            return Err(Error::Config(format!(
                "acl ({}) and clv ({}) must be finite and non-negative",
                self.acl, self.clv
            )));
        }
        if !(0.0..=1.0).contains(&self.churn_given_reject) {
            return Err(Error::Config(format!(
                "churn_given_reject {} outside [0, 1]",
                self.churn_given_reject
            )));
        }
        Ok(())
    }

    /// Cost of one false positive.
    pub fn false_positive_cost(&self) -> f64 {
        self.clv * self.churn_given_reject
    }
}

/// `fn * ACL + fp * CLV * P(churn | reject)`.
pub fn financial_loss(counts: &ConfusionCounts, costs: &CostParams) -> f64 {
    counts.fn_ as f64 * costs.acl + counts.fp as f64 * costs.false_positive_cost()
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("scores contain NaN".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Metric(format!("label {l} is not 0 or 1")));
    }
    Ok(())
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "both classes required ({pos} positive, {neg} negative)"
        )));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as the normalized Mann–Whitney U statistic,
/// using average ranks for tied scores.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based) ranks of positives; tied blocks share their mean rank.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_block = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += avg_rank * pos_in_block as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Counts under the rule `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Sweeps every distinct score as a threshold and returns the one with the
/// highest F1 together with that F1. Ties go to the largest threshold.
pub fn optimal_f1_threshold(scores: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    check_inputs(scores, labels)?;
    let (n_pos, _) = class_counts(labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut best: Option<(f64, f64)> = None;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let counts = ConfusionCounts {
            tp,
            fp,
            tn: 0,
            fn_: n_pos as u64 - tp,
        };
        let f1 = counts.f1();
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((threshold, f1));
        }
    }
    Ok(best.expect("non-empty input has at least one threshold"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
}

impl MeanStd {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.iter().all(|&x| x == xs[0]) {
            return MeanStd { mean: xs[0], std: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanStd { mean, std: var.sqrt() }
    }

    /// `"81.05±0.33"` for a ratio metric given as a fraction.
    pub fn percent(&self) -> String {
        format!("{:.2}±{:.2}", self.mean * 100.0, self.std * 100.0)
    }

    pub fn plain(&self) -> String {
        format!("{:.2}±{:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub auc: MeanStd,
    pub f1: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub financial_loss: MeanStd,
    /// F1-optimal threshold fixed on the full evaluation set.
    pub threshold: f64,
    pub n_replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ReplicateMetrics {
    auc: f64,
    f1: f64,
    precision: f64,
    recall: f64,
    loss: f64,
}

/// Bootstrap mean and standard deviation of every metric.
///
/// The threshold is chosen once on the full input and then held fixed.
/// Each replicate resamples rows with replacement using its own derived
/// seed; single-class resamples are redrawn up to [`MAX_REDRAWS`] times.
pub fn bootstrap_evaluate(
    scores: &[f64],
    labels: &[u8],
    costs: &CostParams,
    n_replicates: usize,
    seed: u64,
) -> Result<MetricSummary> {
    costs.validate()?;
    if n_replicates < 2 {
        return Err(Error::Argument(format!("need at least 2 bootstrap replicates, got {n_replicates}")));
    }
    let (threshold, _) = optimal_f1_threshold(scores, labels)?;
    let n = scores.len();

    let replicates: Vec<ReplicateMetrics> = (0..n_replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_label = rep.to_string();
            let mut s = vec![0.0; n];
            let mut l = vec![0u8; n];
            for attempt in 0..=MAX_REDRAWS {
                let attempt_label = attempt.to_string();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["bootstrap", &rep_label, &attempt_label]));
                for k in 0..n {
                    let i = rng.random_range(0..n);
                    s[k] = scores[i];
                    l[k] = labels[i];
                }
                let pos = l.iter().filter(|&&x| x == 1).count();
                if pos == 0 || pos == n {
                    continue;
                }
                let counts = confusion(&s, &l, threshold)?;
                return Ok(ReplicateMetrics {
                    auc: roc_auc(&s, &l)?,
                    f1: counts.f1(),
                    precision: counts.precision(),
                    recall: counts.recall(),
                    loss: financial_loss(&counts, costs),
                });
            }
            Err(Error::Metric(format!(
                "bootstrap replicate {rep} drew a single class {} times",
                MAX_REDRAWS + 1
            )))
        })
        .collect::<Result<_>>()?;

    let collect = |f: fn(&ReplicateMetrics) -> f64| MeanStd::from_samples(&replicates.iter().map(f).collect::<Vec<_>>());
    Ok(MetricSummary {
        auc: collect(|r| r.auc),
        f1: collect(|r| r.f1),
        precision: collect(|r| r.precision),
        recall: collect(|r| r.recall),
        financial_loss: collect(|r| r.loss),
        threshold,
        n_replicates,
    })
}

/// O(n²) pair counting; the reference for [`roc_auc`].
#[doc(hidden)]
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            wins += match si.partial_cmp(&sj) {
                Some(Ordering::Greater) => 1.0,
                Some(Ordering::Equal) => 0.5,
                _ => 0.0,
            };
        }
    }
    wins / pairs
}

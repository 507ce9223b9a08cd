//! Quantile discretization of continuous values into ordered classes and
//! midpoint-distance confidence scores.
//!
//! Classes are `1..=K`. Cuts are empirical quantiles of the observed values
//! (linear interpolation between order statistics, the common "type 7"
//! convention — the cut placement is convention-sensitive, so it is pinned
//! here). Interval `k` is `[q_{k-1}, q_k)` except the last, which is closed;
//! out-of-range values clamp to the end classes.
//!
//! Scores for a prediction are a softmax over negated midpoint distances,
//! each normalized by its class interval length, so a closer midpoint means
//! a higher score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ingest::{ObservationTable, RegionId};

/// Quantile cuts and derived interval geometry for K ordinal classes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrdinalScheme {
    k: usize,
    /// `k + 1` non-decreasing cut points; first = data min, last = data max.
    cuts: Vec<f64>,
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

impl OrdinalScheme {
    /// Fits K-quantile cuts on observed values.
    pub fn fit(values: &[f64], k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("binning values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < k {
            return Err(Error::TooFewDistinct {
                k,
                found: distinct.len(),
            });
        }
        let cuts: Vec<f64> = (0..=k)
            .map(|i| quantile_sorted(&sorted, i as f64 / k as f64))
            .collect();
        for class in 1..=k {
            if !(cuts[class] - cuts[class - 1] > 0.0) {
                return Err(Error::DegenerateCuts { class, k });
            }
        }
        Ok(OrdinalScheme { k, cuts })
    }

    pub fn from_cuts(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 3 {
            return Err(Error::InvalidConfig(
                "need at least 3 cut points (K >= 2)".into(),
            ));
        }
        let k = cuts.len() - 1;
        for class in 1..=k {
            if !(cuts[class] - cuts[class - 1] > 0.0) {
                return Err(Error::DegenerateCuts { class, k });
            }
        }
        Ok(OrdinalScheme { k, cuts })
    }

    pub fn class_count(&self) -> usize {
        self.k
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Midpoint of class `k` (1-based).
    pub fn midpoint(&self, class: usize) -> f64 {
        (self.cuts[class - 1] + self.cuts[class]) / 2.0
    }

    /// Interval length of class `k` (1-based).
    pub fn interval_len(&self, class: usize) -> f64 {
        self.cuts[class] - self.cuts[class - 1]
    }

    /// Class of a value: intervals are `[q_{k-1}, q_k)`, the last closed;
    /// values outside the fitted range clamp to the end classes.
    pub fn assign_class(&self, z: f64) -> usize {
        if z >= self.cuts[self.k] {
            return self.k;
        }
        // 1 + number of interior cuts <= z.
        let interior = &self.cuts[1..self.k];
        1 + interior.partition_point(|c| *c <= z)
    }

    /// Softmax confidence scores over negated, length-normalized midpoint
    /// distances. `temperature` defaults to 1 and is exposed only for
    /// sensitivity studies.
    pub fn confidence_scores(&self, z_pred: f64, temperature: f64) -> Vec<f64> {
        let raw: Vec<f64> = (1..=self.k)
            .map(|class| -((z_pred - self.midpoint(class)).abs() / self.interval_len(class)))
            .collect();
        softmax(&raw, temperature)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "K": self.k, "cuts": self.cuts })
    }
}

fn softmax(raw: &[f64], temperature: f64) -> Vec<f64> {
    let t = if temperature > 0.0 { temperature } else { 1.0 };
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|s| ((s - max) / t).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest score, lowest index on ties; returned 1-based.
pub fn argmax_class(scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best + 1
}

/// How the predicted class is derived from a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionRule {
    /// Direct interval assignment of the predicted value (default).
    IntervalAssignment,
    /// Argmax of the confidence scores. Differs from interval assignment
    /// only when the predicted value sits exactly on an interior cut.
    ScoreArgmax,
}

impl Default for PredictionRule {
    fn default() -> Self {
        PredictionRule::IntervalAssignment
    }
}

/// An observation with its ordinal classes and confidence scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredRow {
    pub row: usize,
    pub region: RegionId,
    pub z_true: f64,
    pub z_pred: f64,
    /// True class in `1..=K`.
    pub actual: usize,
    /// Predicted class in `1..=K`.
    pub predicted: usize,
    /// Length-K confidence vector, sums to 1.
    pub scores: Vec<f64>,
}

impl ScoredRow {
    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ScoredTable {
    pub scheme: OrdinalScheme,
    pub rows: Vec<ScoredRow>,
}

impl ScoredTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Replaces predictions with a seeded uniform-random baseline: the
    /// predicted class is uniform on `1..=K` and its score vector mixes a
    /// one-hot at `confidence` with the uniform vector.
    pub fn with_random_predictions(&self, seed: u64, confidence: f64) -> Result<ScoredTable> {
        let preds = random_predictions(self.rows.len(), self.scheme.class_count(), seed, confidence)?;
        let rows = self
            .rows
            .iter()
            .zip(preds)
            .map(|(row, (predicted, scores))| ScoredRow {
                predicted,
                scores,
                ..row.clone()
            })
            .collect();
        Ok(ScoredTable {
            scheme: self.scheme.clone(),
            rows,
        })
    }
}

fn score_table_impl(
    table: &ObservationTable,
    scheme: &OrdinalScheme,
    rule: PredictionRule,
    temperature: f64,
    parallel: bool,
) -> ScoredTable {
    let rows = exec::map_indices(table.rows.len(), parallel, |i| {
        let obs = &table.rows[i];
        let scores = scheme.confidence_scores(obs.z_pred, temperature);
        let predicted = match rule {
            PredictionRule::IntervalAssignment => scheme.assign_class(obs.z_pred),
            PredictionRule::ScoreArgmax => argmax_class(&scores),
        };
        ScoredRow {
            row: obs.row,
            region: obs.region.clone(),
            z_true: obs.z_true,
            z_pred: obs.z_pred,
            actual: scheme.assign_class(obs.z_true),
            predicted,
            scores,
        }
    });
    ScoredTable {
        scheme: scheme.clone(),
        rows,
    }
}

/// Discretizes and scores every observation against a fitted scheme.
pub fn score_table(
    table: &ObservationTable,
    scheme: &OrdinalScheme,
    rule: PredictionRule,
    temperature: f64,
) -> ScoredTable {
    score_table_impl(table, scheme, rule, temperature, exec::default_parallel())
}

/// Single-threaded [`score_table`].
pub fn score_table_seq(
    table: &ObservationTable,
    scheme: &OrdinalScheme,
    rule: PredictionRule,
    temperature: f64,
) -> ScoredTable {
    score_table_impl(table, scheme, rule, temperature, false)
}

/// Seeded uniform-random predictions: class uniform on `1..=K`, scores a
/// `confidence`-weighted mix of one-hot and uniform.
pub fn random_predictions(
    n: usize,
    k: usize,
    seed: u64,
    confidence: f64,
) -> Result<Vec<(usize, Vec<f64>)>> {
    if n == 0 {
        return Err(Error::EmptySubset("random baseline"));
    }
    if k < 2 {
        return Err(Error::InvalidConfig(format!("K must be >= 2, got {k}")));
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::InvalidConfig(format!(
            "baseline confidence must be in [0, 1], got {confidence}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = (1.0 - confidence) / k as f64;
    Ok((0..n)
        .map(|_| {
            let class = rng.gen_range(1..=k);
            let scores: Vec<f64> = (1..=k)
                .map(|j| if j == class { confidence + uniform } else { uniform })
                .collect();
            (class, scores)
        })
        .collect())
}

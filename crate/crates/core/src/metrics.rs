//! Audit metrics: expected calibration error, demographic-parity and
//! equalized-odds unfairness, per-group reports, and aggregation-level
//! sweeps.
//!
//! All empirical probabilities are plain frequency ratios computed from
//! integer counts at the last step, so results are permutation-invariant and
//! identical across the parallel and sequential paths.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::RegionGraph;
use crate::ingest::{RegionId, RegionSet};
use crate::ordinal::{ScoredRow, ScoredTable};

/// Assignment of each row to a sensitive group, aligned with a row slice.
#[derive(Clone, Debug)]
pub struct GroupAssignment {
    descriptor: String,
    labels: Vec<String>,
    row_group: Vec<u32>,
}

impl GroupAssignment {
    /// Builds an assignment from one label per row. Groups are the distinct
    /// labels in sorted order; every group is non-empty by construction.
    pub fn from_row_labels(descriptor: impl Into<String>, per_row: Vec<String>) -> Result<Self> {
        if per_row.is_empty() {
            return Err(Error::EmptySubset("group assignment"));
        }
        let labels: Vec<String> = per_row
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, u32> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let row_group = per_row.iter().map(|l| index[l.as_str()]).collect();
        Ok(GroupAssignment {
            descriptor: descriptor.into(),
            labels,
            row_group,
        })
    }

    /// Groups rows by a region attribute (e.g. the parent administrative
    /// unit). Every row's region must carry the attribute.
    pub fn by_region_attribute(
        rows: &[ScoredRow],
        regions: &RegionSet,
        key: &str,
    ) -> Result<Self> {
        let per_row = rows
            .iter()
            .map(|r| {
                let region = regions
                    .get(r.region.as_str())
                    .ok_or_else(|| Error::UnknownRegion(r.region.as_str().to_owned()))?;
                region
                    .attributes
                    .get(key)
                    .cloned()
                    .ok_or_else(|| Error::MissingAttribute {
                        region: r.region.as_str().to_owned(),
                        key: key.to_owned(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_row_labels(format!("attribute:{key}"), per_row)
    }

    /// Two groups: rows whose region is in `members` vs the rest. Both sides
    /// must be non-empty.
    pub fn binary_membership(
        rows: &[ScoredRow],
        members: &BTreeSet<RegionId>,
        focus_label: &str,
        rest_label: &str,
    ) -> Result<Self> {
        let per_row: Vec<String> = rows
            .iter()
            .map(|r| {
                if members.contains(&r.region) {
                    focus_label.to_owned()
                } else {
                    rest_label.to_owned()
                }
            })
            .collect();
        if !per_row.iter().any(|l| l == focus_label) {
            return Err(Error::EmptyGroup(focus_label.to_owned()));
        }
        if !per_row.iter().any(|l| l == rest_label) {
            return Err(Error::EmptyGroup(rest_label.to_owned()));
        }
        Self::from_row_labels(format!("membership:{focus_label}"), per_row)
    }

    /// One group per region id.
    pub fn by_region(rows: &[ScoredRow]) -> Result<Self> {
        Self::from_row_labels(
            "region",
            rows.iter().map(|r| r.region.as_str().to_owned()).collect(),
        )
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn group_count(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.row_group.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_group.is_empty()
    }

    pub fn group_of(&self, row: usize) -> usize {
        self.row_group[row] as usize
    }

    /// Row indices of one group, in row order.
    pub fn rows_in(&self, group: usize) -> Vec<usize> {
        self.row_group
            .iter()
            .enumerate()
            .filter(|(_, &g)| g as usize == group)
            .map(|(i, _)| i)
            .collect()
    }

    fn check_alignment(&self, rows: &[ScoredRow]) -> Result<()> {
        if self.row_group.len() != rows.len() {
            return Err(Error::InvalidConfig(format!(
                "group assignment covers {} rows, table has {}",
                self.row_group.len(),
                rows.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BinStat {
    pub count: usize,
    pub accuracy: f64,
    pub confidence: f64,
    pub score_lo: f64,
    pub score_hi: f64,
}

/// Expected calibration error over quantile bins of the top score.
#[derive(Clone, Debug, Serialize)]
pub struct EceReport {
    pub n: usize,
    pub requested_bins: usize,
    pub effective_bins: usize,
    /// True when fewer rows than requested bins forced a reduction.
    pub reduced: bool,
    pub bins: Vec<BinStat>,
    pub ece: f64,
}

fn ece_items(rows: &[ScoredRow]) -> Vec<(f64, bool)> {
    rows.iter()
        .map(|r| (r.max_score(), r.actual == r.predicted))
        .collect()
}

fn ece_core(items: &[(f64, bool)], requested_bins: usize) -> Result<EceReport> {
    let n = items.len();
    if n == 0 {
        return Err(Error::EmptySubset("calibration"));
    }
    if requested_bins == 0 {
        return Err(Error::InvalidConfig("B must be >= 1".into()));
    }
    let effective = requested_bins.min(n);
    // Stable sort keeps equal scores in row order, so bin sizes are exact.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| items[a].0.total_cmp(&items[b].0));

    let mut bins = Vec::with_capacity(effective);
    let mut weighted_gap = 0.0;
    for b in 0..effective {
        let lo = b * n / effective;
        let hi = (b + 1) * n / effective;
        let idxs = &order[lo..hi];
        let count = idxs.len();
        let correct = idxs.iter().filter(|&&i| items[i].1).count();
        let conf_sum: f64 = idxs.iter().map(|&i| items[i].0).sum();
        let accuracy = correct as f64 / count as f64;
        let confidence = conf_sum / count as f64;
        weighted_gap += count as f64 * (accuracy - confidence).abs();
        bins.push(BinStat {
            count,
            accuracy,
            confidence,
            score_lo: items[idxs[0]].0,
            score_hi: items[idxs[count - 1]].0,
        });
    }
    Ok(EceReport {
        n,
        requested_bins,
        effective_bins: effective,
        reduced: effective < requested_bins,
        bins,
        ece: weighted_gap / n as f64,
    })
}

/// ECE with bin boundaries taken from the evaluated rows' own top-score
/// quantiles.
pub fn ece(rows: &[ScoredRow], bins: usize) -> Result<EceReport> {
    ece_core(&ece_items(rows), bins)
}

/// Interior bin thresholds from the top-score quantiles of a reference row
/// set; used for cross-region comparability when bins must be shared.
pub fn global_bin_thresholds(rows: &[ScoredRow], bins: usize) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptySubset("calibration thresholds"));
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("B must be >= 1".into()));
    }
    let mut scores: Vec<f64> = rows.iter().map(|r| r.max_score()).collect();
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    Ok((1..bins)
        .map(|b| {
            let h = (n - 1) as f64 * b as f64 / bins as f64;
            let lo = h.floor() as usize;
            let frac = h - lo as f64;
            if lo + 1 >= n {
                scores[n - 1]
            } else {
                scores[lo] + frac * (scores[lo + 1] - scores[lo])
            }
        })
        .collect())
}

/// ECE with externally fixed thresholds; bins may be empty and contribute
/// zero weight.
pub fn ece_with_thresholds(rows: &[ScoredRow], thresholds: &[f64]) -> Result<EceReport> {
    let items = ece_items(rows);
    let n = items.len();
    if n == 0 {
        return Err(Error::EmptySubset("calibration"));
    }
    let bins_n = thresholds.len() + 1;
    let mut stats = vec![(0usize, 0usize, 0.0f64, f64::INFINITY, f64::NEG_INFINITY); bins_n];
    for &(score, correct) in &items {
        let b = thresholds.partition_point(|t| *t <= score);
        let s = &mut stats[b];
        s.0 += 1;
        s.1 += correct as usize;
        s.2 += score;
        s.3 = s.3.min(score);
        s.4 = s.4.max(score);
    }
    let mut weighted_gap = 0.0;
    let bins: Vec<BinStat> = stats
        .into_iter()
        .map(|(count, correct, conf_sum, lo, hi)| {
            if count == 0 {
                return BinStat {
                    count: 0,
                    accuracy: 0.0,
                    confidence: 0.0,
                    score_lo: 0.0,
                    score_hi: 0.0,
                };
            }
            let accuracy = correct as f64 / count as f64;
            let confidence = conf_sum / count as f64;
            weighted_gap += count as f64 * (accuracy - confidence).abs();
            BinStat {
                count,
                accuracy,
                confidence,
                score_lo: lo,
                score_hi: hi,
            }
        })
        .collect();
    Ok(EceReport {
        n,
        requested_bins: bins_n,
        effective_bins: bins_n,
        reduced: false,
        bins,
        ece: weighted_gap / n as f64,
    })
}

/// Demographic-parity unfairness with its arg-max witness.
#[derive(Clone, Debug, Serialize)]
pub struct DpReport {
    pub value: f64,
    pub witness_group: String,
    pub witness_class: usize,
}

fn class_count(rows: &[ScoredRow]) -> usize {
    rows.first().map(|r| r.scores.len()).unwrap_or(0)
}

/// `max_{a,k} | P(ŷ=k | A=a) − P(ŷ=k) |` over the given rows.
pub fn dp_unfairness(rows: &[ScoredRow], groups: &GroupAssignment) -> Result<DpReport> {
    groups.check_alignment(rows)?;
    if rows.is_empty() {
        return Err(Error::EmptySubset("demographic parity"));
    }
    let k_n = class_count(rows);
    let m = groups.group_count();
    let mut counts = vec![vec![0usize; k_n]; m];
    let mut group_n = vec![0usize; m];
    let mut marginal = vec![0usize; k_n];
    for (i, row) in rows.iter().enumerate() {
        let a = groups.group_of(i);
        counts[a][row.predicted - 1] += 1;
        group_n[a] += 1;
        marginal[row.predicted - 1] += 1;
    }
    let n = rows.len();
    let mut best = (0.0f64, 0usize, 0usize);
    for a in 0..m {
        for class in 1..=k_n {
            let conditional = counts[a][class - 1] as f64 / group_n[a] as f64;
            let overall = marginal[class - 1] as f64 / n as f64;
            let gap = (conditional - overall).abs();
            if gap > best.0 {
                best = (gap, a, class);
            }
        }
    }
    Ok(DpReport {
        value: best.0,
        witness_group: groups.labels[best.1].clone(),
        witness_class: best.2.max(1),
    })
}

/// Equalized-odds unfairness across groups. `value` is `None` when no
/// (group, true-class) cell reaches the support threshold — explicitly
/// undefined rather than zero.
#[derive(Clone, Debug, Serialize)]
pub struct EoReport {
    pub value: Option<f64>,
    /// (group, predicted class, true class) attaining the maximum.
    pub witness: Option<(String, usize, usize)>,
    /// (group, true class) cells below the support threshold.
    pub skipped: Vec<(String, usize)>,
    /// Per group, count of rows with each true class.
    pub support: BTreeMap<String, Vec<usize>>,
}

/// `max_{a,k,k'} | P(ŷ=k | y=k', A=a) − P(ŷ=k | y=k') |` over cells with
/// `count(y=k', A=a) >= min_support`.
pub fn eo_unfairness(
    rows: &[ScoredRow],
    groups: &GroupAssignment,
    min_support: usize,
) -> Result<EoReport> {
    groups.check_alignment(rows)?;
    if rows.is_empty() {
        return Err(Error::EmptySubset("equalized odds"));
    }
    if min_support == 0 {
        return Err(Error::InvalidConfig("min_support must be >= 1".into()));
    }
    let k_n = class_count(rows);
    let m = groups.group_count();
    let mut cell = vec![vec![vec![0usize; k_n]; k_n]; m]; // [a][true][pred]
    let mut cell_n = vec![vec![0usize; k_n]; m]; // [a][true]
    let mut global = vec![vec![0usize; k_n]; k_n]; // [true][pred]
    let mut global_n = vec![0usize; k_n]; // [true]
    for (i, row) in rows.iter().enumerate() {
        let a = groups.group_of(i);
        cell[a][row.actual - 1][row.predicted - 1] += 1;
        cell_n[a][row.actual - 1] += 1;
        global[row.actual - 1][row.predicted - 1] += 1;
        global_n[row.actual - 1] += 1;
    }
    let mut best: Option<(f64, usize, usize, usize)> = None;
    let mut skipped = Vec::new();
    for a in 0..m {
        for true_class in 1..=k_n {
            let support = cell_n[a][true_class - 1];
            if support < min_support {
                skipped.push((groups.labels[a].clone(), true_class));
                continue;
            }
            let overall_n = global_n[true_class - 1];
            for pred in 1..=k_n {
                let conditional = cell[a][true_class - 1][pred - 1] as f64 / support as f64;
                let overall = global[true_class - 1][pred - 1] as f64 / overall_n as f64;
                let gap = (conditional - overall).abs();
                if best.map(|(v, ..)| gap > v).unwrap_or(true) {
                    best = Some((gap, a, pred, true_class));
                }
            }
        }
    }
    let support = groups
        .labels
        .iter()
        .enumerate()
        .map(|(a, label)| (label.clone(), cell_n[a].clone()))
        .collect();
    Ok(EoReport {
        value: best.map(|(v, ..)| v),
        witness: best.map(|(_, a, pred, true_class)| (groups.labels[a].clone(), pred, true_class)),
        skipped,
        support,
    })
}

/// Equalized odds of a subset against the full table: the per-region EO
/// figure of the audit reports.
#[derive(Clone, Debug, Serialize)]
pub struct EoVsGlobalReport {
    pub n_subset: usize,
    pub value: Option<f64>,
    /// (predicted class, true class) attaining the maximum.
    pub witness: Option<(usize, usize)>,
    /// True classes with subset support below the threshold.
    pub skipped: Vec<usize>,
}

/// `max_{k,k'} | P(ŷ=k | y=k', subset) − P(ŷ=k | y=k') |`, the global term
/// over all rows, restricted to true classes with enough subset support.
pub fn eo_vs_global(
    rows: &[ScoredRow],
    subset: &[usize],
    min_support: usize,
) -> Result<EoVsGlobalReport> {
    if subset.is_empty() {
        return Err(Error::EmptySubset("eo_vs_global"));
    }
    if min_support == 0 {
        return Err(Error::InvalidConfig("min_support must be >= 1".into()));
    }
    let k_n = class_count(rows);
    let mut sub = vec![vec![0usize; k_n]; k_n];
    let mut sub_n = vec![0usize; k_n];
    let mut global = vec![vec![0usize; k_n]; k_n];
    let mut global_n = vec![0usize; k_n];
    for row in rows {
        global[row.actual - 1][row.predicted - 1] += 1;
        global_n[row.actual - 1] += 1;
    }
    for &i in subset {
        let row = &rows[i];
        sub[row.actual - 1][row.predicted - 1] += 1;
        sub_n[row.actual - 1] += 1;
    }
    let mut best: Option<(f64, usize, usize)> = None;
    let mut skipped = Vec::new();
    for true_class in 1..=k_n {
        let support = sub_n[true_class - 1];
        if support < min_support {
            skipped.push(true_class);
            continue;
        }
        for pred in 1..=k_n {
            let conditional = sub[true_class - 1][pred - 1] as f64 / support as f64;
            let overall =
                global[true_class - 1][pred - 1] as f64 / global_n[true_class - 1] as f64;
            let gap = (conditional - overall).abs();
            if best.map(|(v, ..)| gap > v).unwrap_or(true) {
                best = Some((gap, pred, true_class));
            }
        }
    }
    Ok(EoVsGlobalReport {
        n_subset: subset.len(),
        value: best.map(|(v, ..)| v),
        witness: best.map(|(_, pred, true_class)| (pred, true_class)),
        skipped,
    })
}

/// Which rows define the ECE bin boundaries of per-group reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EceBinning {
    /// Each group's bins come from its own top-score quantiles (default).
    SubsetLocal,
    /// All groups share boundaries from the whole table.
    Global,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupMetrics {
    pub group: String,
    pub n: usize,
    pub eo_vs_global: Option<f64>,
    pub eo_witness: Option<(usize, usize)>,
    pub eo_skipped: Vec<usize>,
    pub ece: f64,
    pub ece_bins: usize,
    pub ece_reduced: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupingReport {
    pub descriptor: String,
    pub dp: DpReport,
    pub eo: EoReport,
    pub groups: Vec<GroupMetrics>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub n: usize,
    pub classes: usize,
    pub requested_bins: usize,
    pub min_support: usize,
    pub binning: EceBinning,
    pub global_ece: EceReport,
    pub groupings: Vec<GroupingReport>,
}

/// Runs the full audit: global calibration, then per grouping the DP/EO
/// measures and per-group (EO-vs-global, local ECE) pairs.
pub fn audit(
    table: &ScoredTable,
    groupings: &[GroupAssignment],
    bins: usize,
    min_support: usize,
    binning: EceBinning,
) -> Result<AuditReport> {
    let rows = &table.rows;
    let global_ece = ece(rows, bins)?;
    let thresholds = match binning {
        EceBinning::Global => Some(global_bin_thresholds(rows, bins)?),
        EceBinning::SubsetLocal => None,
    };
    let mut grouping_reports = Vec::with_capacity(groupings.len());
    for grouping in groupings {
        grouping.check_alignment(rows)?;
        let dp = dp_unfairness(rows, grouping)?;
        let eo = eo_unfairness(rows, grouping, min_support)?;
        let labels = grouping.labels().to_vec();
        let per_group = exec::map_indices(labels.len(), exec::default_parallel(), |g| {
            let subset = grouping.rows_in(g);
            let eo_report = eo_vs_global(rows, &subset, min_support)?;
            let subset_rows: Vec<ScoredRow> =
                subset.iter().map(|&i| rows[i].clone()).collect();
            let ece_report = match &thresholds {
                Some(t) => ece_with_thresholds(&subset_rows, t)?,
                None => ece(&subset_rows, bins)?,
            };
            Ok(GroupMetrics {
                group: labels[g].clone(),
                n: subset.len(),
                eo_vs_global: eo_report.value,
                eo_witness: eo_report.witness,
                eo_skipped: eo_report.skipped,
                ece: ece_report.ece,
                ece_bins: ece_report.effective_bins,
                ece_reduced: ece_report.reduced,
            })
        });
        let groups = per_group.into_iter().collect::<Result<Vec<_>>>()?;
        grouping_reports.push(GroupingReport {
            descriptor: grouping.descriptor().to_owned(),
            dp,
            eo,
            groups,
        });
    }
    Ok(AuditReport {
        n: rows.len(),
        classes: table.scheme.class_count(),
        requested_bins: bins,
        min_support,
        binning,
        global_ece,
        groupings: grouping_reports,
    })
}

/// One row per group (`grouping,group,n,eo_vs_global,witness,ece`), preceded
/// by the global ECE line.
pub fn audit_csv(report: &AuditReport) -> String {
    let mut out =
        String::from("grouping,group,n,eo_vs_global,eo_witness_pred,eo_witness_true,ece\n");
    out.push_str(&format!(
        "(global),(all),{},,,,{}\n",
        report.n, report.global_ece.ece
    ));
    for grouping in &report.groupings {
        for g in &grouping.groups {
            let (eo, wp, wt) = match (g.eo_vs_global, g.eo_witness) {
                (Some(v), Some((p, t))) => (v.to_string(), p.to_string(), t.to_string()),
                _ => ("NA".into(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                grouping.descriptor, g.group, g.n, eo, wp, wt, g.ece
            ));
        }
    }
    out
}

/// One point of an aggregation-level sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub level: usize,
    pub n_rows: usize,
    pub eo_vs_global: Option<f64>,
    pub ece: Option<f64>,
    pub eo_random: Option<f64>,
    pub ece_random: Option<f64>,
}

/// Evaluates EO-vs-global and ECE on the rows inside `ball(center, level)`
/// for each level `1..=max_level`. With `baseline = Some((seed, confidence))`
/// the same curve is computed for a seeded random predictor.
pub fn sweep_levels(
    table: &ScoredTable,
    graph: &RegionGraph,
    center: &str,
    max_level: usize,
    bins: usize,
    min_support: usize,
    baseline: Option<(u64, f64)>,
) -> Result<Vec<SweepPoint>> {
    let center_idx = graph
        .node_index(center)
        .ok_or_else(|| Error::UnknownRegion(center.to_owned()))?;
    if max_level > graph.horizon() {
        return Err(Error::HorizonExceeded {
            m: max_level,
            horizon: graph.horizon(),
        });
    }
    let node_of_row: Vec<usize> = table
        .rows
        .iter()
        .map(|r| {
            graph
                .node_index(r.region.as_str())
                .ok_or_else(|| Error::UnknownRegion(r.region.as_str().to_owned()))
        })
        .collect::<Result<Vec<_>>>()?;
    let random_table = match baseline {
        Some((seed, confidence)) => Some(table.with_random_predictions(seed, confidence)?),
        None => None,
    };

    let mut points = Vec::with_capacity(max_level);
    for level in 1..=max_level {
        let ball = graph.ball_indices(center_idx, level)?;
        let in_ball: Vec<bool> = {
            let mut mask = vec![false; graph.len()];
            for idx in ball {
                mask[idx] = true;
            }
            mask
        };
        let subset: Vec<usize> = (0..table.rows.len())
            .filter(|&i| in_ball[node_of_row[i]])
            .collect();
        let evaluate = |t: &ScoredTable| -> Result<(Option<f64>, Option<f64>)> {
            if subset.is_empty() {
                return Ok((None, None));
            }
            let eo = eo_vs_global(&t.rows, &subset, min_support)?.value;
            let subset_rows: Vec<ScoredRow> = subset.iter().map(|&i| t.rows[i].clone()).collect();
            let ece_value = ece(&subset_rows, bins)?.ece;
            Ok((eo, Some(ece_value)))
        };
        let (eo_value, ece_value) = evaluate(table)?;
        let (eo_random, ece_random) = match &random_table {
            Some(rt) => evaluate(rt)?,
            None => (None, None),
        };
        points.push(SweepPoint {
            level,
            n_rows: subset.len(),
            eo_vs_global: eo_value,
            ece: ece_value,
            eo_random,
            ece_random,
        });
    }
    Ok(points)
}

/// Sweep curve as CSV; undefined entries are written as `NA`.
pub fn sweep_csv(points: &[SweepPoint], include_baseline: bool) -> String {
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
    let mut out = String::from(if include_baseline {
        "level,n_rows,eo_vs_global,ece,eo_random,ece_random\n"
    } else {
        "level,n_rows,eo_vs_global,ece\n"
    });
    for p in points {
        if include_baseline {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.level,
                p.n_rows,
                fmt(p.eo_vs_global),
                fmt(p.ece),
                fmt(p.eo_random),
                fmt(p.ece_random)
            ));
        } else {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.level,
                p.n_rows,
                fmt(p.eo_vs_global),
                fmt(p.ece)
            ));
        }
    }
    out
}

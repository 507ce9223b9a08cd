//! Independent brute-force oracles shared by the integration suites.
//!
//! Everything here recomputes results from first principles — explicit
//! frequency tables, dense boolean matrix products, double sums — and must
//! stay independent of the implementation paths it checks.

use geofair_core::ordinal::ScoredRow;

/// `max_{a,k} |P(ŷ=k | A=a) − P(ŷ=k)|` by explicit enumeration.
pub fn oracle_dp(rows: &[ScoredRow], per_row_group: &[String]) -> f64 {
    let k_n = rows[0].scores.len();
    let n = rows.len();
    let mut labels: Vec<&String> = per_row_group.iter().collect();
    labels.sort();
    labels.dedup();
    let mut best = 0.0f64;
    for label in labels {
        let members: Vec<usize> = (0..n).filter(|&i| &per_row_group[i] == label).collect();
        for class in 1..=k_n {
            let cond = members
                .iter()
                .filter(|&&i| rows[i].predicted == class)
                .count() as f64
                / members.len() as f64;
            let marginal =
                rows.iter().filter(|r| r.predicted == class).count() as f64 / n as f64;
            best = best.max((cond - marginal).abs());
        }
    }
    best
}

/// `max_{a,k,k'} |P(ŷ=k | y=k', A=a) − P(ŷ=k | y=k')|` over supported cells.
pub fn oracle_eo(
    rows: &[ScoredRow],
    per_row_group: &[String],
    min_support: usize,
) -> Option<f64> {
    let k_n = rows[0].scores.len();
    let n = rows.len();
    let mut labels: Vec<&String> = per_row_group.iter().collect();
    labels.sort();
    labels.dedup();
    let mut best: Option<f64> = None;
    for label in labels {
        for true_class in 1..=k_n {
            let cell: Vec<usize> = (0..n)
                .filter(|&i| &per_row_group[i] == label && rows[i].actual == true_class)
                .collect();
            if cell.len() < min_support {
                continue;
            }
            let all: Vec<usize> = (0..n).filter(|&i| rows[i].actual == true_class).collect();
            for pred in 1..=k_n {
                let cond = cell.iter().filter(|&&i| rows[i].predicted == pred).count() as f64
                    / cell.len() as f64;
                let overall = all.iter().filter(|&&i| rows[i].predicted == pred).count() as f64
                    / all.len() as f64;
                let gap = (cond - overall).abs();
                best = Some(best.map_or(gap, |b: f64| b.max(gap)));
            }
        }
    }
    best
}

/// Subset-vs-global equalized odds by explicit enumeration.
pub fn oracle_eo_vs_global(
    rows: &[ScoredRow],
    subset: &[usize],
    min_support: usize,
) -> Option<f64> {
    let k_n = rows[0].scores.len();
    let mut best: Option<f64> = None;
    for true_class in 1..=k_n {
        let cell: Vec<usize> = subset
            .iter()
            .copied()
            .filter(|&i| rows[i].actual == true_class)
            .collect();
        if cell.len() < min_support {
            continue;
        }
        let all: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].actual == true_class)
            .collect();
        for pred in 1..=k_n {
            let cond = cell.iter().filter(|&&i| rows[i].predicted == pred).count() as f64
                / cell.len() as f64;
            let overall = all.iter().filter(|&&i| rows[i].predicted == pred).count() as f64
                / all.len() as f64;
            let gap = (cond - overall).abs();
            best = Some(best.map_or(gap, |b: f64| b.max(gap)));
        }
    }
    best
}

/// ECE from scratch: stable sort by top score, near-equal quantile chunks.
pub fn oracle_ece(rows: &[ScoredRow], requested_bins: usize) -> f64 {
    let n = rows.len();
    let bins = requested_bins.min(n);
    let mut items: Vec<(f64, bool, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let max = r.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (max, r.actual == r.predicted, i)
        })
        .collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let mut total = 0.0;
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = (b + 1) * n / bins;
        let chunk = &items[lo..hi];
        let acc = chunk.iter().filter(|x| x.1).count() as f64 / chunk.len() as f64;
        let conf = chunk.iter().map(|x| x.0).sum::<f64>() / chunk.len() as f64;
        total += chunk.len() as f64 * (acc - conf).abs();
    }
    total / n as f64
}

/// Non-zero pattern of `(I + V)^steps` by dense boolean multiplication.
pub fn oracle_matrix_power_reach(neighbors: &[Vec<usize>], steps: usize) -> Vec<Vec<bool>> {
    let n = neighbors.len();
    let mut base = vec![vec![false; n]; n];
    for (i, list) in neighbors.iter().enumerate() {
        base[i][i] = true;
        for &j in list {
            base[i][j] = true;
        }
    }
    let mut acc = base.clone();
    for _ in 1..steps {
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if acc[i][k] {
                    for j in 0..n {
                        if base[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        acc = next;
    }
    acc
}

/// Smoothing by the direct double sum over all node pairs.
pub fn oracle_smooth(
    distances: &dyn Fn(usize, usize) -> Option<u16>,
    n: usize,
    values: &[Option<f64>],
    exponent: f64,
    cutoff: usize,
) -> Vec<Option<f64>> {
    (0..n)
        .map(|i| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (j, value) in values.iter().enumerate() {
                if let (Some(x), Some(d)) = (value, distances(i, j)) {
                    if d as usize <= cutoff {
                        let w = 1.0 / (1.0 + d as f64).powf(exponent);
                        num += w * x;
                        den += w;
                    }
                }
            }
            (den > 0.0).then(|| num / den)
        })
        .collect()
}

/// DP unfairness of the shifted classifier at a fixed lambda, with its own
/// classifier implementation (prior-divided form, lowest-index ties).
pub fn oracle_mitigated_dp(
    rows: &[ScoredRow],
    group_of: &[usize],
    priors: [f64; 2],
    lambda: &[f64],
) -> f64 {
    let k_n = rows[0].scores.len();
    let signs = [1.0, -1.0];
    let n = rows.len();
    let mut counts = [vec![0usize; k_n], vec![0usize; k_n]];
    let mut totals = [0usize; 2];
    for (i, row) in rows.iter().enumerate() {
        let g = group_of[i];
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (j, &s) in row.scores.iter().enumerate() {
            let v = s - signs[g] / priors[g] * lambda[j];
            if v > best_val {
                best_val = v;
                best = j;
            }
        }
        counts[g][best] += 1;
        totals[g] += 1;
    }
    let mut dp = 0.0f64;
    for class in 0..k_n {
        let marginal = (counts[0][class] + counts[1][class]) as f64 / n as f64;
        for g in 0..2 {
            let cond = counts[g][class] as f64 / totals[g] as f64;
            dp = dp.max((cond - marginal).abs());
        }
    }
    dp
}

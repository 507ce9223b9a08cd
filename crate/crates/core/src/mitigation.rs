//! Post-processing mitigation of demographic-parity unfairness for a binary
//! geographic grouping.
//!
//! The mitigated classifier shifts each group's confidence scores by
//! per-class offsets scaled by the group prior:
//! `fair_k = prior(a) * score_k - sign(a) * lambda_k`, predicting the argmax.
//! The offsets are fitted by deterministic subgradient descent on the convex
//! piecewise-linear dual
//! `H(lambda) = mean_i max_k [ score_k(i) - sign(a_i) * lambda_k / prior(a_i) ]`,
//! whose subgradient in coordinate `k` is the difference of the two groups'
//! mitigated prediction frequencies for class `k`. Descent starts at zero,
//! tracks the iterate with the lowest empirical DP unfairness, and stops at
//! the tolerance or the iteration cap, so the result never degrades the
//! starting point.
//!
//! Predictions are computed on the prior-divided form
//! `score_k - sign(a) * lambda_k / prior(a)`, which has the same argmax as
//! the fair scores and reproduces the unmitigated argmax exactly at
//! `lambda = 0`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ingest::RegionId;
use crate::metrics::GroupAssignment;
use crate::ordinal::{argmax_class, ScoredRow, ScoredTable};

const JITTER_MAGNITUDE: f64 = 1e-5;

/// Fitted per-class offsets with the group priors and sign encoding needed
/// to apply them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MitigationModel {
    pub lambda: Vec<f64>,
    /// Empirical group priors from the fitting data.
    pub priors: BTreeMap<String, f64>,
    /// +1 for the first group label in sorted order, -1 for the second.
    pub sign_encoding: BTreeMap<String, i8>,
    pub epsilon: f64,
    pub step_scale: f64,
    pub max_iters: usize,
    /// Subgradient iterations actually run.
    pub iterations: usize,
    /// DP unfairness of the unmitigated (lambda = 0) classifier.
    pub initial_dp: f64,
    /// DP unfairness of the returned lambda on the fitting data.
    pub final_dp: f64,
    /// Dual objective at each visited iterate, starting at lambda = 0.
    pub objective_trace: Vec<f64>,
    pub jitter_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Stop as soon as the best iterate's DP unfairness is at or below this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Step size is `step_scale / sqrt(t)`.
    pub step_scale: f64,
    /// Seeded uniform score jitter (magnitude 1e-5) emulating a randomized
    /// classifier; off by default.
    pub jitter_seed: Option<u64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            epsilon: 0.01,
            max_iters: 1000,
            step_scale: 0.1,
            jitter_seed: None,
        }
    }
}

/// Per-row group data resolved once per fit/apply.
struct Context<'a> {
    rows: &'a [ScoredRow],
    classes: usize,
    group_of: Vec<usize>,
    labels: [String; 2],
    priors: [f64; 2],
    signs: [f64; 2],
    /// Precomputed per-(row, class) jitter, when enabled.
    jitter: Option<Vec<f64>>,
}

impl<'a> Context<'a> {
    fn new(
        rows: &'a [ScoredRow],
        groups: &GroupAssignment,
        jitter_seed: Option<u64>,
    ) -> Result<Self> {
        groups_binary(groups)?;
        if rows.is_empty() {
            return Err(Error::EmptySubset("mitigation"));
        }
        if groups.len() != rows.len() {
            return Err(Error::InvalidConfig(format!(
                "group assignment covers {} rows, table has {}",
                groups.len(),
                rows.len()
            )));
        }
        let classes = rows[0].scores.len();
        for row in rows {
            if row.scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFinite("confidence scores"));
            }
        }
        let group_of: Vec<usize> = (0..rows.len()).map(|i| groups.group_of(i)).collect();
        let n = rows.len() as f64;
        let n0 = group_of.iter().filter(|&&g| g == 0).count();
        let priors = [n0 as f64 / n, (rows.len() - n0) as f64 / n];
        let labels = [groups.labels()[0].clone(), groups.labels()[1].clone()];
        let jitter = jitter_seed.map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..rows.len() * classes)
                .map(|_| rng.gen_range(-JITTER_MAGNITUDE..=JITTER_MAGNITUDE))
                .collect()
        });
        Ok(Context {
            rows,
            classes,
            group_of,
            labels,
            priors,
            signs: [1.0, -1.0],
            jitter,
        })
    }

    /// Mitigated prediction and the row's dual-objective term.
    fn classify(&self, i: usize, lambda: &[f64]) -> (usize, f64) {
        let row = &self.rows[i];
        let g = self.group_of[i];
        let scale = self.signs[g] / self.priors[g];
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (j, &score) in row.scores.iter().enumerate() {
            let mut v = score - scale * lambda[j];
            if let Some(jit) = &self.jitter {
                v += jit[i * self.classes + j];
            }
            if v > best_val {
                best_val = v;
                best = j;
            }
        }
        (best + 1, best_val)
    }
}

fn groups_binary(groups: &GroupAssignment) -> Result<()> {
    if groups.group_count() != 2 {
        return Err(Error::NotBinary(groups.group_count()));
    }
    Ok(())
}

struct Evaluation {
    /// Mitigated prediction counts per (group, class).
    counts: [Vec<usize>; 2],
    group_n: [usize; 2],
    dp: f64,
    dual: f64,
}

fn evaluate(ctx: &Context<'_>, lambda: &[f64]) -> Evaluation {
    let outcomes = exec::map_indices(ctx.rows.len(), exec::default_parallel(), |i| {
        ctx.classify(i, lambda)
    });
    let mut counts = [vec![0usize; ctx.classes], vec![0usize; ctx.classes]];
    let mut group_n = [0usize; 2];
    let mut dual_sum = 0.0;
    for (i, (class, best_val)) in outcomes.into_iter().enumerate() {
        let g = ctx.group_of[i];
        counts[g][class - 1] += 1;
        group_n[g] += 1;
        dual_sum += best_val;
    }
    let n = ctx.rows.len() as f64;
    let mut dp = 0.0f64;
    for class in 0..ctx.classes {
        let marginal = (counts[0][class] + counts[1][class]) as f64 / n;
        for g in 0..2 {
            let conditional = counts[g][class] as f64 / group_n[g] as f64;
            dp = dp.max((conditional - marginal).abs());
        }
    }
    Evaluation {
        counts,
        group_n,
        dp,
        dual: dual_sum / n,
    }
}

/// Dual objective `H(lambda)`; exposed for the convexity diagnostics.
pub fn dual_objective(
    table: &ScoredTable,
    groups: &GroupAssignment,
    lambda: &[f64],
) -> Result<f64> {
    let ctx = Context::new(&table.rows, groups, None)?;
    Ok(evaluate(&ctx, lambda).dual)
}

/// DP unfairness of the mitigated classifier at a given `lambda`.
pub fn mitigated_dp(
    table: &ScoredTable,
    groups: &GroupAssignment,
    lambda: &[f64],
) -> Result<f64> {
    let ctx = Context::new(&table.rows, groups, None)?;
    Ok(evaluate(&ctx, lambda).dp)
}

fn build_model(ctx: &Context<'_>, opts: &FitOptions) -> MitigationModel {
    MitigationModel {
        lambda: vec![0.0; ctx.classes],
        priors: ctx
            .labels
            .iter()
            .zip(ctx.priors)
            .map(|(l, p)| (l.clone(), p))
            .collect(),
        sign_encoding: ctx
            .labels
            .iter()
            .zip([1i8, -1i8])
            .map(|(l, s)| (l.clone(), s))
            .collect(),
        epsilon: opts.epsilon,
        step_scale: opts.step_scale,
        max_iters: opts.max_iters,
        iterations: 0,
        initial_dp: 0.0,
        final_dp: 0.0,
        objective_trace: Vec::new(),
        jitter_seed: opts.jitter_seed,
    }
}

/// Wraps an explicitly chosen `lambda` in a model (priors and signs from the
/// grouping); used for comparisons against external search procedures.
pub fn model_for_lambda(
    table: &ScoredTable,
    groups: &GroupAssignment,
    lambda: Vec<f64>,
) -> Result<MitigationModel> {
    let ctx = Context::new(&table.rows, groups, None)?;
    if lambda.len() != ctx.classes {
        return Err(Error::InvalidConfig(format!(
            "lambda has {} entries, need {}",
            lambda.len(),
            ctx.classes
        )));
    }
    let mut model = build_model(&ctx, &FitOptions::default());
    let eval = evaluate(&ctx, &lambda);
    model.initial_dp = evaluate(&ctx, &vec![0.0; ctx.classes]).dp;
    model.final_dp = eval.dp;
    model.lambda = lambda;
    Ok(model)
}

/// Fits the per-class offsets by subgradient descent with best-iterate
/// tracking. The returned model's DP never exceeds the unmitigated DP.
pub fn fit_lambda(
    table: &ScoredTable,
    groups: &GroupAssignment,
    opts: &FitOptions,
) -> Result<MitigationModel> {
    if !(opts.epsilon >= 0.0) || !(opts.step_scale > 0.0) {
        return Err(Error::InvalidConfig(
            "epsilon must be >= 0 and step_scale > 0".into(),
        ));
    }
    let ctx = Context::new(&table.rows, groups, opts.jitter_seed)?;
    let mut model = build_model(&ctx, opts);

    let mut lambda = vec![0.0f64; ctx.classes];
    let mut eval = evaluate(&ctx, &lambda);
    model.initial_dp = eval.dp;
    model.objective_trace.push(eval.dual);

    let mut best_lambda = lambda.clone();
    let mut best_dp = eval.dp;
    for t in 1..=opts.max_iters {
        if best_dp <= opts.epsilon {
            break;
        }
        // Subgradient of H: frequency gap between the minus and plus group.
        let step = opts.step_scale / (t as f64).sqrt();
        for class in 0..ctx.classes {
            let plus = eval.counts[0][class] as f64 / eval.group_n[0] as f64;
            let minus = eval.counts[1][class] as f64 / eval.group_n[1] as f64;
            lambda[class] -= step * (minus - plus);
        }
        eval = evaluate(&ctx, &lambda);
        model.objective_trace.push(eval.dual);
        model.iterations = t;
        if eval.dp < best_dp {
            best_dp = eval.dp;
            best_lambda = lambda.clone();
        }
    }
    model.lambda = best_lambda;
    model.final_dp = best_dp;
    Ok(model)
}

/// A row with its original and mitigated predictions. Midpoint prices make
/// the class shift readable in price terms.
#[derive(Clone, Debug, Serialize)]
pub struct MitigatedRow {
    pub row: usize,
    pub region: RegionId,
    pub original: usize,
    pub mitigated: usize,
    pub original_mid_price: f64,
    pub mitigated_mid_price: f64,
    /// Fair scores `prior * score_k - sign * lambda_k`.
    pub fair_scores: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MitigatedTable {
    pub rows: Vec<MitigatedRow>,
}

impl MitigatedTable {
    pub fn changed_count(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.original != r.mitigated)
            .count()
    }
}

/// Applies a fitted model. Original predictions are left untouched; the
/// original class reported here is the argmax of the unshifted scores.
pub fn apply_mitigation(
    table: &ScoredTable,
    groups: &GroupAssignment,
    model: &MitigationModel,
) -> Result<MitigatedTable> {
    for label in groups.labels() {
        if !model.priors.contains_key(label) || !model.sign_encoding.contains_key(label) {
            return Err(Error::InvalidConfig(format!(
                "group label '{label}' unknown to the mitigation model"
            )));
        }
    }
    let ctx = Context::new(&table.rows, groups, model.jitter_seed)?;
    if model.lambda.len() != ctx.classes {
        return Err(Error::InvalidConfig(format!(
            "lambda has {} entries, table has {} classes",
            model.lambda.len(),
            ctx.classes
        )));
    }
    // Use the model's stored priors/signs (they may come from a different
    // fitting table than this one).
    let mut apply_ctx = ctx;
    for g in 0..2 {
        apply_ctx.priors[g] = model.priors[&apply_ctx.labels[g]];
        apply_ctx.signs[g] = model.sign_encoding[&apply_ctx.labels[g]] as f64;
    }

    let scheme = &table.scheme;
    let rows = exec::map_indices(table.rows.len(), exec::default_parallel(), |i| {
        let row = &table.rows[i];
        let g = apply_ctx.group_of[i];
        let original = argmax_class(&row.scores);
        let (mitigated, _) = apply_ctx.classify(i, &model.lambda);
        let fair_scores: Vec<f64> = row
            .scores
            .iter()
            .enumerate()
            .map(|(j, &s)| apply_ctx.priors[g] * s - apply_ctx.signs[g] * model.lambda[j])
            .collect();
        MitigatedRow {
            row: row.row,
            region: row.region.clone(),
            original,
            mitigated,
            original_mid_price: scheme.midpoint(original),
            mitigated_mid_price: scheme.midpoint(mitigated),
            fair_scores,
        }
    });
    Ok(MitigatedTable { rows })
}

/// Mitigated rows as CSV.
pub fn mitigated_csv(table: &MitigatedTable) -> String {
    let mut out = String::from(
        "row,region,original_class,mitigated_class,original_mid_price,mitigated_mid_price\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.row, r.region, r.original, r.mitigated, r.original_mid_price, r.mitigated_mid_price
        ));
    }
    out
}

//! Neighborhood-based low-pass filtering of per-region statistics.
//!
//! The smoothed value of a region is the weighted average of the values in
//! its neighborhood ball, with weights decaying in path length:
//! `1 / (1 + d)^p` for `d <= m`, zero beyond the cutoff. Regions without a
//! value contribute to neither numerator nor denominator.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::RegionGraph;
use crate::ingest::{RegionId, RegionSet};

/// Path-weight kernel parameters (`p` exponent, `m` cutoff).
#[derive(Clone, Copy, Debug)]
pub struct SmoothingParams {
    pub exponent: f64,
    pub cutoff: usize,
}

impl SmoothingParams {
    pub fn new(exponent: f64, cutoff: usize) -> Result<Self> {
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "smoothing exponent must be a positive real, got {exponent}"
            )));
        }
        Ok(SmoothingParams { exponent, cutoff })
    }
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams {
            exponent: 1.0,
            cutoff: 5,
        }
    }
}

/// Kernel weight for a path length; `None` means unreachable.
pub fn weight(d: Option<u16>, params: &SmoothingParams) -> f64 {
    match d {
        Some(d) if (d as usize) <= params.cutoff => {
            1.0 / (1.0 + d as f64).powf(params.exponent)
        }
        _ => 0.0,
    }
}

/// A per-region statistic; absent keys are missing values.
#[derive(Clone, Debug)]
pub struct RegionField {
    pub name: String,
    values: BTreeMap<RegionId, f64>,
}

impl RegionField {
    pub fn new(name: impl Into<String>, values: BTreeMap<RegionId, f64>) -> Result<Self> {
        if values.values().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("region field"));
        }
        Ok(RegionField {
            name: name.into(),
            values,
        })
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RegionId, f64)> {
        self.values.iter().map(|(k, &v)| (k, v))
    }
}

/// Result of smoothing: the filtered field plus, per region, how many values
/// contributed to its average.
#[derive(Clone, Debug)]
pub struct Smoothed {
    pub field: RegionField,
    pub n_contributing: BTreeMap<RegionId, usize>,
}

/// Smooths `field` over `graph`. Optional `multiplier` scales each source
/// region's kernel weight (e.g. by observation count); it defaults to off.
pub fn smooth_field(
    field: &RegionField,
    graph: &RegionGraph,
    params: &SmoothingParams,
    multiplier: Option<&RegionField>,
) -> Result<Smoothed> {
    smooth_field_impl(field, graph, params, multiplier, exec::default_parallel())
}

/// Single-threaded [`smooth_field`].
pub fn smooth_field_seq(
    field: &RegionField,
    graph: &RegionGraph,
    params: &SmoothingParams,
    multiplier: Option<&RegionField>,
) -> Result<Smoothed> {
    smooth_field_impl(field, graph, params, multiplier, false)
}

fn smooth_field_impl(
    field: &RegionField,
    graph: &RegionGraph,
    params: &SmoothingParams,
    multiplier: Option<&RegionField>,
    parallel: bool,
) -> Result<Smoothed> {
    if params.cutoff > graph.horizon() {
        return Err(Error::HorizonExceeded {
            m: params.cutoff,
            horizon: graph.horizon(),
        });
    }
    for (id, _) in field.iter() {
        if graph.node_index(id.as_str()).is_none() {
            return Err(Error::UnknownRegion(id.as_str().to_owned()));
        }
    }
    let n = graph.len();
    // Per-node value lookup, indexed by node order.
    let values: Vec<Option<f64>> = (0..n)
        .map(|i| field.get(graph.id(i).as_str()))
        .collect();
    let mults: Vec<f64> = (0..n)
        .map(|i| match multiplier {
            Some(m) => m.get(graph.id(i).as_str()).unwrap_or(0.0).max(0.0),
            None => 1.0,
        })
        .collect();

    let per_node = exec::map_indices(n, parallel, |i| {
        let ball = graph
            .ball_indices(i, params.cutoff)
            .expect("cutoff validated against horizon");
        let mut contributing: Vec<(f64, f64)> = Vec::new();
        for j in ball {
            if let Some(x) = values[j] {
                let w = weight(graph.distance(i, j), params) * mults[j];
                if w > 0.0 {
                    contributing.push((w, x));
                }
            }
        }
        if contributing.is_empty() {
            return (None, 0usize);
        }
        // Weighted average, computed relative to the minimum contributing
        // value so that constant fields are exact fixed points.
        let min = contributing.iter().map(|&(_, x)| x).fold(f64::INFINITY, f64::min);
        let max = contributing
            .iter()
            .map(|&(_, x)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        let wsum: f64 = contributing.iter().map(|&(w, _)| w).sum();
        let shifted: f64 = contributing.iter().map(|&(w, x)| w * (x - min)).sum();
        let value = (min + shifted / wsum).clamp(min, max);
        (Some(value), contributing.len())
    });

    let mut values_out = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (i, (value, count)) in per_node.into_iter().enumerate() {
        let id = graph.id(i).clone();
        if let Some(v) = value {
            values_out.insert(id.clone(), v);
        }
        counts.insert(id, count);
    }
    Ok(Smoothed {
        field: RegionField::new(format!("smoothed:{}", field.name), values_out)?,
        n_contributing: counts,
    })
}

/// Per-region statistics derivable from the observation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationStatistic {
    /// Mean of `(z_pred - z_true) / z_true`.
    MeanRelativeError,
    /// Mean of `z_pred - z_true`.
    MeanError,
    MeanObserved,
    MeanPredicted,
    Count,
}

impl ObservationStatistic {
    pub const NAMES: [&'static str; 5] = [
        "mean_relative_error",
        "mean_error",
        "mean_observed",
        "mean_predicted",
        "count",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObservationStatistic::MeanRelativeError => "mean_relative_error",
            ObservationStatistic::MeanError => "mean_error",
            ObservationStatistic::MeanObserved => "mean_observed",
            ObservationStatistic::MeanPredicted => "mean_predicted",
            ObservationStatistic::Count => "count",
        }
    }
}

impl std::str::FromStr for ObservationStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_relative_error" => Ok(ObservationStatistic::MeanRelativeError),
            "mean_error" => Ok(ObservationStatistic::MeanError),
            "mean_observed" => Ok(ObservationStatistic::MeanObserved),
            "mean_predicted" => Ok(ObservationStatistic::MeanPredicted),
            "count" => Ok(ObservationStatistic::Count),
            other => Err(Error::UnknownField(other.to_owned())),
        }
    }
}

/// Computes a per-region statistic over the observations. Regions of
/// `regions` without observations are missing, except for `count`, which is
/// zero there.
pub fn observation_field(
    table: &crate::ingest::ObservationTable,
    regions: &RegionSet,
    stat: ObservationStatistic,
) -> Result<RegionField> {
    let mut sums: BTreeMap<RegionId, (f64, usize)> = BTreeMap::new();
    for obs in &table.rows {
        let value = match stat {
            ObservationStatistic::MeanRelativeError => (obs.z_pred - obs.z_true) / obs.z_true,
            ObservationStatistic::MeanError => obs.z_pred - obs.z_true,
            ObservationStatistic::MeanObserved => obs.z_true,
            ObservationStatistic::MeanPredicted => obs.z_pred,
            ObservationStatistic::Count => 1.0,
        };
        let entry = sums.entry(obs.region.clone()).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += 1;
    }
    let values: BTreeMap<RegionId, f64> = match stat {
        ObservationStatistic::Count => regions
            .ids()
            .map(|id| {
                let count = sums.get(id).map(|&(_, c)| c).unwrap_or(0);
                (id.clone(), count as f64)
            })
            .collect(),
        _ => sums
            .into_iter()
            .map(|(id, (sum, count))| (id, sum / count as f64))
            .collect(),
    };
    if values.is_empty() {
        return Err(Error::AllMissing(stat.name().to_owned()));
    }
    RegionField::new(stat.name(), values)
}

/// Reporting convenience: mean of a field grouped by a region attribute
/// (e.g. parent administrative unit). Regions without a value are skipped;
/// groups without any value are omitted.
pub fn reaggregate(
    field: &RegionField,
    regions: &RegionSet,
    attribute: &str,
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (id, region) in regions.iter() {
        let Some(value) = field.get(id.as_str()) else {
            continue;
        };
        let key = region
            .attributes
            .get(attribute)
            .ok_or_else(|| Error::MissingAttribute {
                region: id.as_str().to_owned(),
                key: attribute.to_owned(),
            })?;
        let entry = sums.entry(key.clone()).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (sum, count))| (k, sum / count as f64))
        .collect())
}

//! Loading of region polygons and observation records, point-to-region
//! assignment, and the basic cleaning filters.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exec;
use crate::geojson;
use crate::geometry::{Point, RegionGeometry};

/// Opaque identifier of a spatial unit.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(String);

impl RegionId {
    pub fn new(id: impl Into<String>) -> Self {
        RegionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RegionId {
    fn from(s: &str) -> Self {
        RegionId(s.to_owned())
    }
}

impl std::borrow::Borrow<str> for RegionId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct Region {
    pub geometry: RegionGeometry,
    /// Scalar feature properties other than the id, stringified.
    pub attributes: BTreeMap<String, String>,
}

/// The spatial units under audit, keyed by id (iteration order is id order).
#[derive(Clone, Debug, Default)]
pub struct RegionSet {
    regions: BTreeMap<RegionId, Region>,
}

impl RegionSet {
    pub fn new(regions: BTreeMap<RegionId, Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::EmptyRegionSet);
        }
        Ok(RegionSet { regions })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.regions.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&Region> {
        self.regions.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &RegionId> {
        self.regions.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RegionId, &Region)> {
        self.regions.iter()
    }

    /// Serializes the regions back to a FeatureCollection. Properties are
    /// the id under `id_key`, the stored attributes, and whatever `extra`
    /// adds per region.
    pub fn to_geojson_with(
        &self,
        id_key: &str,
        config: Option<Value>,
        mut extra: impl FnMut(&RegionId) -> Vec<(String, Value)>,
    ) -> Value {
        let features = self
            .iter()
            .map(|(id, region)| {
                let mut props = serde_json::Map::new();
                props.insert(id_key.to_owned(), Value::String(id.as_str().to_owned()));
                for (k, v) in &region.attributes {
                    props.insert(k.clone(), Value::String(v.clone()));
                }
                for (k, v) in extra(id) {
                    props.insert(k, v);
                }
                geojson::feature(&region.geometry, props)
            })
            .collect();
        geojson::feature_collection(features, config)
    }

    /// Parses a GeoJSON FeatureCollection; `id_key` names the property that
    /// carries the region id.
    pub fn from_geojson_str(text: &str, id_key: &str) -> Result<Self> {
        let features = geojson::parse_feature_collection(text)?;
        let mut regions = BTreeMap::new();
        let mut first_index: BTreeMap<RegionId, usize> = BTreeMap::new();
        for feat in features {
            let id_value = feat.properties.get(id_key).ok_or_else(|| Error::Feature {
                index: feat.index,
                reason: format!("missing id property '{id_key}'"),
            })?;
            let id = property_string(id_value).filter(|s| !s.is_empty()).ok_or_else(|| {
                Error::Feature {
                    index: feat.index,
                    reason: format!("id property '{id_key}' is empty or not a scalar"),
                }
            })?;
            let id = RegionId::new(id);
            if let Some(&first) = first_index.get(&id) {
                return Err(Error::DuplicateRegionId {
                    id: id.0,
                    first,
                    second: feat.index,
                });
            }
            first_index.insert(id.clone(), feat.index);
            let attributes = feat
                .properties
                .iter()
                .filter(|(k, _)| k.as_str() != id_key)
                .filter_map(|(k, v)| property_string(v).map(|s| (k.clone(), s)))
                .collect();
            regions.insert(
                id,
                Region {
                    geometry: feat.geometry,
                    attributes,
                },
            );
        }
        RegionSet::new(regions)
    }
}

fn property_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Loads region polygons from a GeoJSON file.
pub fn load_regions(path: &Path, id_key: &str) -> Result<RegionSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    RegionSet::from_geojson_str(&text, id_key)
}

/// Where a raw record is located: coordinates to be joined, or an explicit
/// region id to be validated.
#[derive(Clone, Debug)]
pub enum LocationRef {
    Coords { lon: f64, lat: f64 },
    Region(RegionId),
}

/// A parsed observation record, before spatial assignment.
#[derive(Clone, Debug)]
pub struct RawRecord {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub location: LocationRef,
    pub z_true: f64,
    pub z_pred: f64,
}

/// Column mapping for the observations CSV.
#[derive(Clone, Debug)]
pub struct ObservationSchema {
    pub location: LocationColumns,
    pub observed: String,
    pub predicted: String,
}

#[derive(Clone, Debug)]
pub enum LocationColumns {
    LonLat { lon: String, lat: String },
    RegionId { column: String },
}

impl ObservationSchema {
    pub fn lon_lat(lon: &str, lat: &str, observed: &str, predicted: &str) -> Self {
        ObservationSchema {
            location: LocationColumns::LonLat {
                lon: lon.into(),
                lat: lat.into(),
            },
            observed: observed.into(),
            predicted: predicted.into(),
        }
    }

    pub fn region_id(column: &str, observed: &str, predicted: &str) -> Self {
        ObservationSchema {
            location: LocationColumns::RegionId {
                column: column.into(),
            },
            observed: observed.into(),
            predicted: predicted.into(),
        }
    }
}

/// Reads the observations CSV. Lines starting with `#` are treated as
/// comments (our own writers put the run configuration there). Prices must
/// be finite and strictly positive.
pub fn load_observations(path: &Path, schema: &ObservationSchema) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::ObservationRow {
            row: 0,
            reason: format!("cannot read header: {e}"),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let observed_idx = col(&schema.observed)?;
    let predicted_idx = col(&schema.predicted)?;
    let location_idx = match &schema.location {
        LocationColumns::LonLat { lon, lat } => (Some(col(lon)?), Some(col(lat)?), None),
        LocationColumns::RegionId { column } => (None, None, Some(col(column)?)),
    };

    let parse_f64 = |row: usize, name: &str, raw: &str| -> Result<f64> {
        raw.parse::<f64>().map_err(|_| Error::ObservationRow {
            row,
            reason: format!("column '{name}' has non-numeric value '{raw}'"),
        })
    };

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::ObservationRow {
            row,
            reason: e.to_string(),
        })?;
        let field = |idx: usize| rec.get(idx).unwrap_or("");
        let z_true = parse_f64(row, &schema.observed, field(observed_idx))?;
        let z_pred = parse_f64(row, &schema.predicted, field(predicted_idx))?;
        for (name, z) in [(&schema.observed, z_true), (&schema.predicted, z_pred)] {
            if !z.is_finite() || z <= 0.0 {
                return Err(Error::ObservationRow {
                    row,
                    reason: format!("column '{name}' must be finite and > 0, got {z}"),
                });
            }
        }
        let location = match location_idx {
            (Some(lon_idx), Some(lat_idx), None) => {
                let lon = parse_f64(row, "lon", field(lon_idx))?;
                let lat = parse_f64(row, "lat", field(lat_idx))?;
                LocationRef::Coords { lon, lat }
            }
            (None, None, Some(region_idx)) => {
                let id = field(region_idx);
                if id.is_empty() {
                    return Err(Error::ObservationRow {
                        row,
                        reason: "empty region id".into(),
                    });
                }
                LocationRef::Region(RegionId::new(id))
            }
            _ => unreachable!("schema resolves to exactly one location form"),
        };
        records.push(RawRecord {
            row,
            location,
            z_true,
            z_pred,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyObservations);
    }
    Ok(records)
}

/// An observation assigned to a region.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub region: RegionId,
    pub z_true: f64,
    pub z_pred: f64,
}

/// Provenance counters carried through the pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestCounts {
    pub n_loaded: usize,
    pub n_dropped_outside: usize,
    pub n_dropped_outlier: usize,
    pub n_dropped_excluded: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ObservationTable {
    pub rows: Vec<Observation>,
    pub counts: IngestCounts,
}

impl ObservationTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

enum JoinOutcome {
    Matched(Observation),
    Outside,
    UnknownId(String),
}

fn join_record(record: &RawRecord, regions: &[(&RegionId, &Region)], set: &RegionSet) -> JoinOutcome {
    match &record.location {
        LocationRef::Coords { lon, lat } => {
            let p = Point::new(*lon, *lat);
            // Regions are scanned in id order, so the first match is the
            // lexicographically smallest — the boundary tie-break rule.
            for (id, region) in regions {
                if region.geometry.bbox().contains(p) && region.geometry.contains(p) {
                    return JoinOutcome::Matched(Observation {
                        row: record.row,
                        region: (*id).clone(),
                        z_true: record.z_true,
                        z_pred: record.z_pred,
                    });
                }
            }
            JoinOutcome::Outside
        }
        LocationRef::Region(id) => {
            if set.contains(id.as_str()) {
                JoinOutcome::Matched(Observation {
                    row: record.row,
                    region: id.clone(),
                    z_true: record.z_true,
                    z_pred: record.z_pred,
                })
            } else {
                JoinOutcome::UnknownId(id.as_str().to_owned())
            }
        }
    }
}

fn spatial_join_impl(
    records: &[RawRecord],
    regions: &RegionSet,
    parallel: bool,
) -> Result<ObservationTable> {
    if regions.is_empty() {
        return Err(Error::EmptyRegionSet);
    }
    let ordered: Vec<(&RegionId, &Region)> = regions.iter().collect();
    let outcomes = exec::map_indices(records.len(), parallel, |i| {
        join_record(&records[i], &ordered, regions)
    });

    let mut unknown: Vec<String> = outcomes
        .iter()
        .filter_map(|o| match o {
            JoinOutcome::UnknownId(id) => Some(id.clone()),
            _ => None,
        })
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(Error::UnknownRegionIds(unknown));
    }

    let mut rows = Vec::with_capacity(records.len());
    let mut outside = 0usize;
    for outcome in outcomes {
        match outcome {
            JoinOutcome::Matched(obs) => rows.push(obs),
            JoinOutcome::Outside => outside += 1,
            JoinOutcome::UnknownId(_) => unreachable!(),
        }
    }
    Ok(ObservationTable {
        rows,
        counts: IngestCounts {
            n_loaded: records.len(),
            n_dropped_outside: outside,
            ..IngestCounts::default()
        },
    })
}

/// Assigns each record to a region. Coordinate records falling outside every
/// region are dropped and counted; explicit region ids must all exist.
/// Boundary points go to the lexicographically smallest matching region id.
pub fn spatial_join(records: &[RawRecord], regions: &RegionSet) -> Result<ObservationTable> {
    spatial_join_impl(records, regions, exec::default_parallel())
}

/// Single-threaded [`spatial_join`]; used by the benchmarks and as the
/// fallback when the `parallel` feature is disabled.
pub fn spatial_join_seq(records: &[RawRecord], regions: &RegionSet) -> Result<ObservationTable> {
    spatial_join_impl(records, regions, false)
}

/// Removes price outliers (`z_true > price_cap`; the cap itself is retained)
/// and rows in explicitly excluded regions.
pub fn clean(
    table: &ObservationTable,
    price_cap: f64,
    exclude: &BTreeSet<RegionId>,
) -> Result<ObservationTable> {
    if !(price_cap > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "price cap must be > 0, got {price_cap}"
        )));
    }
    let mut counts = table.counts;
    let mut rows = Vec::with_capacity(table.rows.len());
    for obs in &table.rows {
        if obs.z_true > price_cap {
            counts.n_dropped_outlier += 1;
        } else if exclude.contains(&obs.region) {
            counts.n_dropped_excluded += 1;
        } else {
            rows.push(obs.clone());
        }
    }
    Ok(ObservationTable { rows, counts })
}

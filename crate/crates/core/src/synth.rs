//! Synthetic grid cities with known geometry, price surfaces, and planted
//! spatially-correlated prediction bias.
//!
//! Cells are unit squares (queen contiguity by construction), so adjacency
//! and neighborhood ground truth are analytic. The generator exists to make
//! properties provable, not to look realistic: observed values follow a
//! smooth directional gradient plus seeded noise, and predictions are exact
//! inside the biased zone up to a multiplicative factor.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{Polygon, RegionGeometry};
use crate::ingest::{
    IngestCounts, LocationRef, Observation, ObservationTable, RawRecord, Region, RegionId,
    RegionSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrant {
    SouthWest,
    SouthEast,
    NorthWest,
    NorthEast,
}

impl std::str::FromStr for Quadrant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sw" | "southwest" => Ok(Quadrant::SouthWest),
            "se" | "southeast" => Ok(Quadrant::SouthEast),
            "nw" | "northwest" => Ok(Quadrant::NorthWest),
            "ne" | "northeast" => Ok(Quadrant::NorthEast),
            other => Err(Error::InvalidConfig(format!("unknown quadrant '{other}'"))),
        }
    }
}

/// Which cells receive the planted prediction bias.
#[derive(Clone, Copy, Debug)]
pub enum BiasZone {
    Quadrant(Quadrant),
    /// Chebyshev ball around a seed cell — on a queen grid this equals the
    /// graph neighborhood ball of the same radius.
    Ball {
        center_row: usize,
        center_col: usize,
        radius: usize,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct BiasSpec {
    pub zone: BiasZone,
    /// Multiplicative factor on predictions inside the zone
    /// (0.85 = systematic 15% under-prediction).
    pub factor: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum ObservationCount {
    Fixed(usize),
    /// Uniformly random per region, inclusive bounds.
    Range(usize, usize),
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    pub base_price: f64,
    /// Direction of the price gradient, degrees counter-clockwise from +x.
    pub gradient_angle_deg: f64,
    pub gradient_amplitude: f64,
    /// Additive gaussian noise on observed values.
    pub noise_scale: f64,
    /// Relative gaussian noise on predictions outside the biased zone.
    pub pred_noise: f64,
    pub bias: Option<BiasSpec>,
    pub obs_per_region: ObservationCount,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 20,
            cols: 20,
            base_price: 10_000.0,
            gradient_angle_deg: 45.0,
            gradient_amplitude: 600.0,
            noise_scale: 1_800.0,
            pred_noise: 0.02,
            bias: Some(BiasSpec {
                zone: BiasZone::Quadrant(Quadrant::SouthWest),
                factor: 0.85,
            }),
            obs_per_region: ObservationCount::Fixed(25),
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid must be at least 2x2, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.base_price > 0.0) {
            return Err(Error::InvalidConfig("base price must be > 0".into()));
        }
        for (name, v) in [
            ("gradient amplitude", self.gradient_amplitude),
            ("noise scale", self.noise_scale),
            ("prediction noise", self.pred_noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if let Some(bias) = &self.bias {
            if !(bias.factor > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "bias factor must be > 0, got {}",
                    bias.factor
                )));
            }
            if let BiasZone::Ball {
                center_row,
                center_col,
                ..
            } = bias.zone
            {
                if center_row >= self.rows || center_col >= self.cols {
                    return Err(Error::InvalidConfig(format!(
                        "bias ball center ({center_row},{center_col}) outside the grid"
                    )));
                }
            }
        }
        if let ObservationCount::Range(lo, hi) = self.obs_per_region {
            if lo > hi {
                return Err(Error::InvalidConfig(format!(
                    "observation range {lo}..={hi} is empty"
                )));
            }
        }
        match self.obs_per_region {
            ObservationCount::Fixed(0) | ObservationCount::Range(0, 0) => {
                return Err(Error::InvalidConfig(
                    "observations per region must be >= 1".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn cell_id(row: usize, col: usize) -> RegionId {
        RegionId::new(format!("r{row:03}c{col:03}"))
    }

    fn district(&self, row: usize, col: usize) -> &'static str {
        let south = row * 2 < self.rows;
        let west = col * 2 < self.cols;
        match (south, west) {
            (true, true) => "SW",
            (true, false) => "SE",
            (false, true) => "NW",
            (false, false) => "NE",
        }
    }

    fn in_zone(&self, row: usize, col: usize) -> bool {
        match &self.bias {
            None => false,
            Some(spec) => match spec.zone {
                BiasZone::Quadrant(q) => {
                    let south = row * 2 < self.rows;
                    let west = col * 2 < self.cols;
                    match q {
                        Quadrant::SouthWest => south && west,
                        Quadrant::SouthEast => south && !west,
                        Quadrant::NorthWest => !south && west,
                        Quadrant::NorthEast => !south && !west,
                    }
                }
                BiasZone::Ball {
                    center_row,
                    center_col,
                    radius,
                } => {
                    let dr = row.abs_diff(center_row);
                    let dc = col.abs_diff(center_col);
                    dr.max(dc) <= radius
                }
            },
        }
    }

    fn surface(&self, x: f64, y: f64) -> f64 {
        let theta = self.gradient_angle_deg.to_radians();
        let u = x / self.cols as f64 - 0.5;
        let v = y / self.rows as f64 - 0.5;
        self.base_price + self.gradient_amplitude * (theta.cos() * u + theta.sin() * v)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A generated city: regions, the raw coordinate records, the same records
/// already assigned to their cells, and the exact set of biased region ids.
#[derive(Clone, Debug)]
pub struct SynthCity {
    pub regions: RegionSet,
    pub records: Vec<RawRecord>,
    pub observations: ObservationTable,
    pub biased_regions: BTreeSet<RegionId>,
}

/// Generates a city. Sampling uses per-region derived seeds, so the output
/// is identical whether regions are generated in parallel or sequentially.
pub fn generate_city(config: &SynthConfig) -> Result<SynthCity> {
    config.validate()?;
    let rows = config.rows;
    let cols = config.cols;
    let n_cells = rows * cols;

    let mut regions = BTreeMap::new();
    let mut biased = BTreeSet::new();
    for row in 0..rows {
        for col in 0..cols {
            let id = SynthConfig::cell_id(row, col);
            let geometry = RegionGeometry::new(vec![Polygon::rectangle(
                col as f64,
                row as f64,
                (col + 1) as f64,
                (row + 1) as f64,
            )])
            .expect("grid cell is valid");
            let attributes: BTreeMap<String, String> =
                [("district".to_owned(), config.district(row, col).to_owned())]
                    .into_iter()
                    .collect();
            if config.in_zone(row, col) {
                biased.insert(id.clone());
            }
            regions.insert(
                id,
                Region {
                    geometry,
                    attributes,
                },
            );
        }
    }

    let per_cell = exec::map_indices(n_cells, exec::default_parallel(), |idx| {
        let row = idx / cols;
        let col = idx % cols;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
            config.seed ^ (idx as u64).wrapping_mul(0x9E3779B97F4A7C15),
        ));
        let count = match config.obs_per_region {
            ObservationCount::Fixed(c) => c,
            ObservationCount::Range(lo, hi) => rng.gen_range(lo..=hi),
        };
        let biased_cell = config.in_zone(row, col);
        let mut cell_obs = Vec::with_capacity(count);
        for _ in 0..count {
            // Keep points away from cell edges so the round trip through the
            // spatial join is unambiguous.
            let x = col as f64 + 0.05 + 0.9 * rng.gen::<f64>();
            let y = row as f64 + 0.05 + 0.9 * rng.gen::<f64>();
            let z_true = (config.surface(x, y) + config.noise_scale * standard_normal(&mut rng))
                .max(1.0);
            let z_pred = if biased_cell {
                z_true * config.bias.as_ref().map(|b| b.factor).unwrap_or(1.0)
            } else {
                (z_true * (1.0 + config.pred_noise * standard_normal(&mut rng))).max(0.01)
            };
            cell_obs.push((x, y, z_true, z_pred));
        }
        cell_obs
    });

    let mut records = Vec::new();
    let mut observations = Vec::new();
    for (idx, cell_obs) in per_cell.into_iter().enumerate() {
        let id = SynthConfig::cell_id(idx / cols, idx % cols);
        for (x, y, z_true, z_pred) in cell_obs {
            let row_no = records.len() + 1;
            records.push(RawRecord {
                row: row_no,
                location: LocationRef::Coords { lon: x, lat: y },
                z_true,
                z_pred,
            });
            observations.push(Observation {
                row: row_no,
                region: id.clone(),
                z_true,
                z_pred,
            });
        }
    }
    let counts = IngestCounts {
        n_loaded: records.len(),
        ..IngestCounts::default()
    };
    Ok(SynthCity {
        regions: RegionSet::new(regions)?,
        records,
        observations: ObservationTable {
            rows: observations,
            counts,
        },
        biased_regions: biased,
    })
}

/// The city's observations as CSV (`lon,lat,z_true,z_pred`).
pub fn observations_csv(city: &SynthCity) -> String {
    let mut out = String::from("lon,lat,z_true,z_pred\n");
    for record in &city.records {
        let LocationRef::Coords { lon, lat } = &record.location else {
            unreachable!("synthetic records carry coordinates");
        };
        out.push_str(&format!("{lon},{lat},{},{}\n", record.z_true, record.z_pred));
    }
    out
}

/// The exact set of biased region ids, as JSON.
pub fn bias_mask_json(city: &SynthCity, config: Option<Value>) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("spec_version".into(), json!(crate::geojson::SPEC_VERSION));
    if let Some(cfg) = config {
        obj.insert("config".into(), cfg);
    }
    obj.insert(
        "biased_regions".into(),
        json!(city
            .biased_regions
            .iter()
            .map(|id| id.as_str())
            .collect::<Vec<_>>()),
    );
    Value::Object(obj)
}

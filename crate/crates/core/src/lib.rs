//! Ex-post auditing of geospatial calibration error and unfairness.
//!
//! Given region polygons and per-record (location, observed, predicted)
//! values from an external model, this crate quantifies calibration error
//! (ECE) and unfairness (demographic parity, equalized odds) at configurable
//! spatial aggregation levels, and post-processes confidence scores to
//! mitigate demographic-parity violations.
//!
//! The pipeline:
//!
//! 1. [`ingest`] — load GeoJSON regions and CSV observations, join points to
//!    regions, apply cleaning filters.
//! 2. [`graph`] — build the polygon-contiguity graph and path-length
//!    neighborhoods.
//! 3. [`ordinal`] — discretize values into quantile classes with
//!    midpoint-distance confidence scores.
//! 4. [`metrics`] — ECE / DP / EO audits per group and across aggregation
//!    levels; [`smoothing`] — low-pass filtering of per-region statistics.
//! 5. [`mitigation`] — plug-in demographic-parity post-processing.
//! 6. [`synth`] — synthetic cities with planted bias, the test bench for all
//!    of the above.
//!
//! Data-parallel inner loops (spatial join, per-source BFS, per-region
//! smoothing, per-row scoring) run on rayon when the default `parallel`
//! feature is enabled and fall back to sequential loops otherwise; both
//! paths produce identical results.

pub mod error;
mod exec;
pub mod geojson;
pub mod geometry;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod mitigation;
pub mod ordinal;
pub mod smoothing;
pub mod synth;

pub use error::{Error, Result};
pub use graph::RegionGraph;
pub use ingest::{ObservationTable, RegionId, RegionSet};
pub use metrics::{AuditReport, GroupAssignment};
pub use mitigation::MitigationModel;
pub use ordinal::{OrdinalScheme, ScoredTable};
pub use smoothing::{RegionField, SmoothingParams};
pub use synth::SynthConfig;

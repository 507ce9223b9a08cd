//! Minimal GeoJSON (RFC 7946) reading and writing.
//!
//! Reads FeatureCollections of Polygon / MultiPolygon features and writes
//! them back with arbitrary per-feature properties. Top-level foreign members
//! (`spec_version`, `config`) are attached to every emitted collection so a
//! run can be reproduced from its own output.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, RegionGeometry};

pub const SPEC_VERSION: &str = "1";

#[derive(Debug)]
pub struct ParsedFeature {
    pub index: usize,
    pub properties: Map<String, Value>,
    pub geometry: RegionGeometry,
}

fn position(v: &Value) -> std::result::Result<Point, String> {
    let arr = v.as_array().ok_or("position is not an array")?;
    if arr.len() < 2 {
        return Err("position has fewer than 2 coordinates".into());
    }
    let x = arr[0].as_f64().ok_or("non-numeric coordinate")?;
    let y = arr[1].as_f64().ok_or("non-numeric coordinate")?;
    Ok(Point::new(x, y))
}

fn ring(v: &Value) -> std::result::Result<Vec<Point>, String> {
    v.as_array()
        .ok_or("ring is not an array")?
        .iter()
        .map(position)
        .collect()
}

fn polygon(coords: &Value) -> std::result::Result<Polygon, String> {
    let rings = coords.as_array().ok_or("polygon coordinates not an array")?;
    if rings.is_empty() {
        return Err("polygon has no rings".into());
    }
    let exterior = ring(&rings[0])?;
    let holes = rings[1..].iter().map(ring).collect::<std::result::Result<Vec<_>, _>>()?;
    Polygon::new(exterior, holes)
}

fn geometry(v: &Value) -> std::result::Result<RegionGeometry, String> {
    let obj = v.as_object().ok_or("geometry is not an object")?;
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or("geometry has no type")?;
    let coords = obj.get("coordinates").ok_or("geometry has no coordinates")?;
    match kind {
        "Polygon" => RegionGeometry::new(vec![polygon(coords)?]),
        "MultiPolygon" => {
            let parts = coords
                .as_array()
                .ok_or("multipolygon coordinates not an array")?
                .iter()
                .map(polygon)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            RegionGeometry::new(parts)
        }
        other => Err(format!("unsupported geometry type '{other}'")),
    }
}

/// Parses a FeatureCollection, reporting the offending feature index on error.
pub fn parse_feature_collection(text: &str) -> Result<Vec<ParsedFeature>> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Error::GeoJson(format!("not valid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::GeoJson("root is not an object".into()))?;
    match obj.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => {}
        other => {
            return Err(Error::GeoJson(format!(
                "expected a FeatureCollection, got {other:?}"
            )))
        }
    }
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::GeoJson("missing 'features' array".into()))?;

    let mut parsed = Vec::with_capacity(features.len());
    for (index, feat) in features.iter().enumerate() {
        let fobj = feat.as_object().ok_or(Error::Feature {
            index,
            reason: "feature is not an object".into(),
        })?;
        let properties = match fobj.get("properties") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => {
                return Err(Error::Feature {
                    index,
                    reason: "properties is not an object".into(),
                })
            }
        };
        let geom_value = fobj.get("geometry").ok_or(Error::Feature {
            index,
            reason: "feature has no geometry".into(),
        })?;
        let geometry = geometry(geom_value).map_err(|reason| Error::InvalidGeometry {
            index,
            reason,
        })?;
        parsed.push(ParsedFeature {
            index,
            properties,
            geometry,
        });
    }
    Ok(parsed)
}

fn ring_value(ring: &[Point]) -> Value {
    // Rings are stored open; re-close them on output.
    let mut coords: Vec<Value> = ring.iter().map(|p| json!([p.x, p.y])).collect();
    if let Some(first) = coords.first().cloned() {
        coords.push(first);
    }
    Value::Array(coords)
}

/// Serializes a geometry as Polygon when it has one part, MultiPolygon otherwise.
pub fn geometry_value(geom: &RegionGeometry) -> Value {
    let polys: Vec<Value> = geom
        .parts()
        .iter()
        .map(|poly| {
            let mut rings = vec![ring_value(poly.exterior())];
            rings.extend(poly.holes().iter().map(|h| ring_value(h)));
            Value::Array(rings)
        })
        .collect();
    if polys.len() == 1 {
        json!({ "type": "Polygon", "coordinates": polys.into_iter().next().unwrap() })
    } else {
        json!({ "type": "MultiPolygon", "coordinates": polys })
    }
}

pub fn feature(geom: &RegionGeometry, properties: Map<String, Value>) -> Value {
    json!({
        "type": "Feature",
        "properties": properties,
        "geometry": geometry_value(geom),
    })
}

/// A FeatureCollection with the resolved run configuration embedded as a
/// foreign member.
pub fn feature_collection(features: Vec<Value>, config: Option<Value>) -> Value {
    let mut obj = Map::new();
    obj.insert("type".into(), json!("FeatureCollection"));
    obj.insert("spec_version".into(), json!(SPEC_VERSION));
    if let Some(cfg) = config {
        obj.insert("config".into(), cfg);
    }
    obj.insert("features".into(), Value::Array(features));
    Value::Object(obj)
}

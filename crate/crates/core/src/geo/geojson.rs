//! RFC 7946 FeatureCollection reading and writing.

use indexmap::IndexMap;
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{Feature, Geometry, GeometryIssue, LonLat, ParseError, PropertyValue, Region, Ring};

/// Reads a FeatureCollection, stopping at the first invalid feature.
pub fn parse_feature_collection(text: &str) -> Result<Vec<Feature>, ParseError> {
    parse_feature_collection_all(text).map_err(|mut errs| errs.swap_remove(0))
}

/// Reads a FeatureCollection and reports every invalid feature (one error
/// per feature). The error list is never empty.
pub fn parse_feature_collection_all(text: &str) -> Result<Vec<Feature>, Vec<ParseError>> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| vec![ParseError::MalformedJson(e.to_string())])?;
    let obj = root
        .as_object()
        .filter(|o| o.get("type").and_then(Value::as_str) == Some("FeatureCollection"))
        .ok_or_else(|| vec![ParseError::NotAFeatureCollection])?;
    let items = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| vec![ParseError::NotAFeatureCollection])?;

    let mut features = Vec::with_capacity(items.len());
    let mut errors = Vec::new();
    for (index, item) in items.iter().enumerate() {
        match parse_feature(index, item) {
            Ok(f) => features.push(f),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(features)
    } else {
        Err(errors)
    }
}

fn parse_feature(index: usize, item: &Value) -> Result<Feature, ParseError> {
    let obj = item
        .as_object()
        .filter(|o| o.get("type").and_then(Value::as_str) == Some("Feature"))
        .ok_or(ParseError::NotAFeature { index })?;

    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("f{index}"),
    };

    let empty = Map::new();
    let props = match obj.get("properties") {
        Some(Value::Object(m)) => m,
        Some(Value::Null) | None => &empty,
        Some(_) => {
            return Err(ParseError::InvalidProperty {
                index,
                key: "properties".into(),
                reason: "must be an object".into(),
            })
        }
    };

    let category_id = match props.get("category") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        _ => return Err(ParseError::MissingCategory { index }),
    };

    let geometry = match obj.get("geometry") {
        None | Some(Value::Null) => None,
        Some(g) => {
            let geometry =
                parse_geometry(g).map_err(|issue| ParseError::InvalidGeometry { index, issue })?;
            geometry
                .validate()
                .map_err(|issue| ParseError::InvalidGeometry { index, issue })?;
            Some(geometry)
        }
    };

    let mut properties = IndexMap::with_capacity(props.len());
    for (key, value) in props {
        if key == "category" {
            continue;
        }
        let invalid = |reason: &str| ParseError::InvalidProperty {
            index,
            key: key.clone(),
            reason: reason.to_string(),
        };
        let parsed = match key.as_str() {
            "anchor" => PropertyValue::Position(
                parse_position(value).map_err(|issue| invalid(&issue.to_string()))?,
            ),
            "height_m" => match value.as_f64() {
                Some(h) if h >= 0.0 && h.is_finite() => PropertyValue::Number(h),
                _ => return Err(invalid("must be a non-negative number")),
            },
            "name" | "description" => match value {
                Value::String(s) => PropertyValue::Text(s.clone()),
                _ => return Err(invalid("must be a string")),
            },
            _ => scalar(value),
        };
        properties.insert(key.clone(), parsed);
    }

    let feature = Feature {
        id,
        category_id,
        geometry,
        properties,
    };
    if feature.geometry.is_none() && feature.anchor().is_none() {
        return Err(ParseError::MissingAnchor { index });
    }
    Ok(feature)
}

/// Nested values are kept as their compact JSON text.
fn scalar(value: &Value) -> PropertyValue {
    match value {
        Value::Null => PropertyValue::Null,
        Value::Bool(b) => PropertyValue::Bool(*b),
        Value::Number(n) => n
            .as_f64()
            .map(PropertyValue::Number)
            .unwrap_or_else(|| PropertyValue::Text(n.to_string())),
        Value::String(s) => PropertyValue::Text(s.clone()),
        other => PropertyValue::Text(other.to_string()),
    }
}

fn parse_position(value: &Value) -> Result<LonLat, GeometryIssue> {
    let arr = value.as_array().ok_or(GeometryIssue::MalformedPosition)?;
    if arr.len() < 2 {
        return Err(GeometryIssue::MalformedPosition);
    }
    // Extra elements (altitude) are ignored.
    let lon = arr[0].as_f64().ok_or(GeometryIssue::MalformedPosition)?;
    let lat = arr[1].as_f64().ok_or(GeometryIssue::MalformedPosition)?;
    LonLat::checked(lon, lat)
}

fn positions(value: &Value) -> Result<Vec<LonLat>, GeometryIssue> {
    value
        .as_array()
        .ok_or(GeometryIssue::MalformedCoordinates)?
        .iter()
        .map(parse_position)
        .collect()
}

fn nested<T>(
    value: &Value,
    inner: impl Fn(&Value) -> Result<T, GeometryIssue>,
) -> Result<Vec<T>, GeometryIssue> {
    value
        .as_array()
        .ok_or(GeometryIssue::MalformedCoordinates)?
        .iter()
        .map(inner)
        .collect()
}

fn parse_geometry(value: &Value) -> Result<Geometry, GeometryIssue> {
    let obj = value.as_object().ok_or(GeometryIssue::UnsupportedType)?;
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or(GeometryIssue::UnsupportedType)?;
    let coords = obj
        .get("coordinates")
        .ok_or(GeometryIssue::MalformedCoordinates);
    Ok(match kind {
        "Point" => Geometry::Point(parse_position(coords?)?),
        "MultiPoint" => Geometry::MultiPoint(positions(coords?)?),
        "LineString" => Geometry::LineString(positions(coords?)?),
        "MultiLineString" => Geometry::MultiLineString(nested(coords?, positions)?),
        "Polygon" => Geometry::Polygon(nested(coords?, positions)?),
        "MultiPolygon" => Geometry::MultiPolygon(nested(coords?, |p| nested(p, positions))?),
        _ => return Err(GeometryIssue::UnsupportedType),
    })
}

fn position_json(p: &LonLat) -> Value {
    json!([p.lon, p.lat])
}

fn line_json(line: &[LonLat]) -> Value {
    Value::Array(line.iter().map(position_json).collect())
}

fn rings_json(rings: &[Ring]) -> Value {
    Value::Array(rings.iter().map(|r| line_json(r)).collect())
}

pub fn geometry_json(geometry: &Geometry) -> Value {
    let coordinates = match geometry {
        Geometry::Point(p) => position_json(p),
        Geometry::MultiPoint(ps) | Geometry::LineString(ps) => line_json(ps),
        Geometry::MultiLineString(lines) => {
            Value::Array(lines.iter().map(|l| line_json(l)).collect())
        }
        Geometry::Polygon(rings) => rings_json(rings),
        Geometry::MultiPolygon(polys) => {
            Value::Array(polys.iter().map(|p| rings_json(p)).collect())
        }
    };
    json!({ "type": geometry.type_name(), "coordinates": coordinates })
}

fn property_json(value: &PropertyValue) -> Value {
    match value {
        PropertyValue::Null => Value::Null,
        PropertyValue::Bool(b) => Value::Bool(*b),
        PropertyValue::Number(n) => json!(n),
        PropertyValue::Text(s) => Value::String(s.clone()),
        PropertyValue::Position(p) => position_json(p),
    }
}

/// GeoJSON object for one feature; `category` is written first among the
/// properties.
pub fn feature_json(feature: &Feature) -> Value {
    let mut props = Map::new();
    props.insert(
        "category".into(),
        Value::String(feature.category_id.clone()),
    );
    for (k, v) in &feature.properties {
        props.insert(k.clone(), property_json(v));
    }
    json!({
        "type": "Feature",
        "id": feature.id,
        "geometry": feature.geometry.as_ref().map(geometry_json).unwrap_or(Value::Null),
        "properties": props,
    })
}

pub fn to_feature_collection(features: &[Feature]) -> Value {
    json!({
        "type": "FeatureCollection",
        "features": features.iter().map(feature_json).collect::<Vec<_>>(),
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("malformed region JSON: {0}")]
    Json(String),
    #[error("invalid region: {0}")]
    Geometry(#[from] GeometryIssue),
}

/// Reads a region either as a bare ring (`[[lon,lat], ...]`) or as a GeoJSON
/// Polygon whose outer ring is used.
pub fn parse_region(text: &str) -> Result<Region, RegionError> {
    let value: Value = serde_json::from_str(text).map_err(|e| RegionError::Json(e.to_string()))?;
    let ring = match &value {
        Value::Array(_) => positions(&value)?,
        Value::Object(o) if o.get("type").and_then(Value::as_str) == Some("Polygon") => {
            let rings = nested(
                o.get("coordinates")
                    .ok_or(GeometryIssue::MalformedCoordinates)?,
                positions,
            )?;
            rings.into_iter().next().ok_or(GeometryIssue::Empty)?
        }
        _ => return Err(GeometryIssue::MalformedCoordinates.into()),
    };
    Ok(Region::new(ring)?)
}

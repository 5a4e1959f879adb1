//! GeoJSON data model and the planar predicates the rest of the engine
//! builds on. All coordinates are WGS84 lon/lat degrees treated as a plane;
//! nothing here is geodesic.

mod geojson;
mod predicates;

pub use geojson::{feature_json, geometry_json};
pub use geojson::{
    parse_feature_collection, parse_feature_collection_all, parse_region, to_feature_collection,
    RegionError,
};
pub(crate) use predicates::ring_self_intersects;
pub use predicates::{
    bounding_box, intersects, point_in_polygon, point_in_rings, point_on_ring,
    representative_point, segments_intersect,
};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A WGS84 position in degrees. Serialized as `[lon, lat]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl From<[f64; 2]> for LonLat {
    fn from([lon, lat]: [f64; 2]) -> Self {
        Self { lon, lat }
    }
}

impl From<LonLat> for [f64; 2] {
    fn from(p: LonLat) -> Self {
        [p.lon, p.lat]
    }
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    /// Checked constructor enforcing finite values and the lon/lat ranges.
    pub fn checked(lon: f64, lat: f64) -> Result<Self, GeometryIssue> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(GeometryIssue::NonFiniteCoordinate);
        }
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(GeometryIssue::CoordinateOutOfRange);
        }
        Ok(Self { lon, lat })
    }
}

/// A closed ring: first position equals last.
pub type Ring = Vec<LonLat>;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(LonLat),
    MultiPoint(Vec<LonLat>),
    LineString(Vec<LonLat>),
    MultiLineString(Vec<Vec<LonLat>>),
    /// Outer ring followed by zero or more holes.
    Polygon(Vec<Ring>),
    MultiPolygon(Vec<Vec<Ring>>),
}

impl Geometry {
    pub fn type_name(&self) -> &'static str {
        match self {
            Geometry::Point(_) => "Point",
            Geometry::MultiPoint(_) => "MultiPoint",
            Geometry::LineString(_) => "LineString",
            Geometry::MultiLineString(_) => "MultiLineString",
            Geometry::Polygon(_) => "Polygon",
            Geometry::MultiPolygon(_) => "MultiPolygon",
        }
    }

    /// Visits every coordinate, including ring closing duplicates.
    pub fn for_each_position(&self, mut f: impl FnMut(LonLat)) {
        match self {
            Geometry::Point(p) => f(*p),
            Geometry::MultiPoint(ps) | Geometry::LineString(ps) => ps.iter().copied().for_each(f),
            Geometry::MultiLineString(lines) => lines.iter().flatten().copied().for_each(f),
            Geometry::Polygon(rings) => rings.iter().flatten().copied().for_each(f),
            Geometry::MultiPolygon(polys) => polys.iter().flatten().flatten().copied().for_each(f),
        }
    }

    /// Validates the structural rules: closed rings with at least four
    /// positions and no repeated consecutive positions, lines with at least
    /// two positions, every coordinate finite and in range.
    pub fn validate(&self) -> Result<(), GeometryIssue> {
        let mut bad = None;
        self.for_each_position(|p| {
            if bad.is_none() {
                bad = LonLat::checked(p.lon, p.lat).err();
            }
        });
        if let Some(issue) = bad {
            return Err(issue);
        }
        match self {
            Geometry::Point(_) => Ok(()),
            Geometry::MultiPoint(ps) if ps.is_empty() => Err(GeometryIssue::Empty),
            Geometry::MultiPoint(_) => Ok(()),
            Geometry::LineString(line) => validate_line(line),
            Geometry::MultiLineString(lines) if lines.is_empty() => Err(GeometryIssue::Empty),
            Geometry::MultiLineString(lines) => lines.iter().try_for_each(|l| validate_line(l)),
            Geometry::Polygon(rings) => validate_polygon(rings),
            Geometry::MultiPolygon(polys) if polys.is_empty() => Err(GeometryIssue::Empty),
            Geometry::MultiPolygon(polys) => polys.iter().try_for_each(|p| validate_polygon(p)),
        }
    }
}

fn validate_line(line: &[LonLat]) -> Result<(), GeometryIssue> {
    if line.len() < 2 {
        return Err(GeometryIssue::LineTooShort);
    }
    Ok(())
}

fn validate_polygon(rings: &[Ring]) -> Result<(), GeometryIssue> {
    if rings.is_empty() {
        return Err(GeometryIssue::Empty);
    }
    rings.iter().try_for_each(|r| validate_ring(r))
}

pub(crate) fn validate_ring(ring: &[LonLat]) -> Result<(), GeometryIssue> {
    if ring.len() < 4 {
        return Err(GeometryIssue::RingTooShort);
    }
    if ring.first() != ring.last() {
        return Err(GeometryIssue::RingNotClosed);
    }
    if ring.windows(2).any(|w| w[0] == w[1]) {
        return Err(GeometryIssue::RepeatedPoint);
    }
    Ok(())
}

/// Why a geometry (or a geometry-like property) was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryIssue {
    #[error("ring not closed")]
    RingNotClosed,
    #[error("ring has fewer than 4 positions")]
    RingTooShort,
    #[error("repeated consecutive position")]
    RepeatedPoint,
    #[error("line has fewer than 2 positions")]
    LineTooShort,
    #[error("coordinate out of range")]
    CoordinateOutOfRange,
    #[error("coordinate is not finite")]
    NonFiniteCoordinate,
    #[error("malformed position")]
    MalformedPosition,
    #[error("malformed coordinates")]
    MalformedCoordinates,
    #[error("unsupported geometry type")]
    UnsupportedType,
    #[error("empty geometry")]
    Empty,
    #[error("ring has zero area")]
    ZeroArea,
    #[error("ring self-intersects")]
    SelfIntersecting,
}

impl GeometryIssue {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            GeometryIssue::RingNotClosed => "ring_not_closed",
            GeometryIssue::RingTooShort => "ring_too_short",
            GeometryIssue::RepeatedPoint => "repeated_point",
            GeometryIssue::LineTooShort => "line_too_short",
            GeometryIssue::CoordinateOutOfRange => "coordinate_out_of_range",
            GeometryIssue::NonFiniteCoordinate => "coordinate_not_finite",
            GeometryIssue::MalformedPosition => "malformed_position",
            GeometryIssue::MalformedCoordinates => "malformed_coordinates",
            GeometryIssue::UnsupportedType => "unsupported_geometry_type",
            GeometryIssue::Empty => "empty_geometry",
            GeometryIssue::ZeroArea => "zero_area",
            GeometryIssue::SelfIntersecting => "self_intersecting",
        }
    }
}

/// Scalar property value. `Position` carries the reserved `anchor` key.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    Null,
    Bool(bool),
    Number(f64),
    Text(String),
    Position(LonLat),
}

impl PropertyValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Display form used by detail tables.
    pub fn display(&self) -> String {
        match self {
            PropertyValue::Null => String::new(),
            PropertyValue::Bool(b) => b.to_string(),
            PropertyValue::Number(n) => n.to_string(),
            PropertyValue::Text(s) => s.clone(),
            PropertyValue::Position(p) => format!("{},{}", p.lon, p.lat),
        }
    }
}

/// A categorized map item: geometry, or only an anchor, plus properties.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: String,
    pub category_id: String,
    pub geometry: Option<Geometry>,
    /// Properties in source order, without the `category` key.
    pub properties: IndexMap<String, PropertyValue>,
}

impl Feature {
    pub fn name(&self) -> Option<&str> {
        self.properties.get("name").and_then(PropertyValue::as_str)
    }

    pub fn anchor(&self) -> Option<LonLat> {
        match self.properties.get("anchor") {
            Some(PropertyValue::Position(p)) => Some(*p),
            _ => None,
        }
    }

    pub fn height_m(&self) -> Option<f64> {
        match self.properties.get("height_m") {
            Some(PropertyValue::Number(h)) => Some(*h),
            _ => None,
        }
    }

    /// The geometry used for spatial predicates: the feature's own geometry,
    /// or a point at its anchor when it has none.
    pub fn footprint(&self) -> Option<Geometry> {
        match (&self.geometry, self.anchor()) {
            (Some(g), _) => Some(g.clone()),
            (None, Some(a)) => Some(Geometry::Point(a)),
            (None, None) => None,
        }
    }

    pub fn bbox(&self) -> Option<Bbox> {
        match (&self.geometry, self.anchor()) {
            (Some(g), _) => Some(bounding_box(g)),
            (None, Some(a)) => Some(Bbox { min: a, max: a }),
            (None, None) => None,
        }
    }
}

/// Axis-aligned lon/lat rectangle. Antimeridian-crossing boxes are not
/// representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub min: LonLat,
    pub max: LonLat,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BboxError {
    #[error("bbox coordinate invalid: {0}")]
    Coordinate(GeometryIssue),
    #[error("bbox min exceeds max (antimeridian-crossing boxes are not supported)")]
    Inverted,
    #[error("bbox must have four comma-separated numbers")]
    Malformed,
}

impl Bbox {
    pub fn new(min: LonLat, max: LonLat) -> Result<Self, BboxError> {
        let min = LonLat::checked(min.lon, min.lat).map_err(BboxError::Coordinate)?;
        let max = LonLat::checked(max.lon, max.lat).map_err(BboxError::Coordinate)?;
        if min.lon > max.lon || min.lat > max.lat {
            return Err(BboxError::Inverted);
        }
        Ok(Self { min, max })
    }

    /// West, south, east, north.
    pub fn from_edges(west: f64, south: f64, east: f64, north: f64) -> Result<Self, BboxError> {
        Self::new(LonLat::new(west, south), LonLat::new(east, north))
    }

    pub fn world() -> Self {
        Self {
            min: LonLat::new(-180.0, -90.0),
            max: LonLat::new(180.0, 90.0),
        }
    }

    pub fn point(p: LonLat) -> Self {
        Self { min: p, max: p }
    }

    pub fn edges(&self) -> [f64; 4] {
        [self.min.lon, self.min.lat, self.max.lon, self.max.lat]
    }

    pub fn contains(&self, p: LonLat) -> bool {
        p.lon >= self.min.lon
            && p.lon <= self.max.lon
            && p.lat >= self.min.lat
            && p.lat <= self.max.lat
    }

    /// Closed-interval overlap: touching boxes intersect.
    pub fn intersects(&self, other: &Bbox) -> bool {
        self.min.lon <= other.max.lon
            && other.min.lon <= self.max.lon
            && self.min.lat <= other.max.lat
            && other.min.lat <= self.max.lat
    }

    pub fn union(&self, other: &Bbox) -> Bbox {
        Bbox {
            min: LonLat::new(
                self.min.lon.min(other.min.lon),
                self.min.lat.min(other.min.lat),
            ),
            max: LonLat::new(
                self.max.lon.max(other.max.lon),
                self.max.lat.max(other.max.lat),
            ),
        }
    }

    pub fn area(&self) -> f64 {
        (self.max.lon - self.min.lon) * (self.max.lat - self.min.lat)
    }

    pub fn center(&self) -> LonLat {
        LonLat::new(
            (self.min.lon + self.max.lon) / 2.0,
            (self.min.lat + self.max.lat) / 2.0,
        )
    }

    /// The box as a closed counter-clockwise ring.
    pub fn to_ring(&self) -> Ring {
        vec![
            self.min,
            LonLat::new(self.max.lon, self.min.lat),
            self.max,
            LonLat::new(self.min.lon, self.max.lat),
            self.min,
        ]
    }
}

impl std::str::FromStr for Bbox {
    type Err = BboxError;

    /// Parses `west,south,east,north`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| BboxError::Malformed)?;
        match parts[..] {
            [w, so, e, n] => Bbox::from_edges(w, so, e, n),
            _ => Err(BboxError::Malformed),
        }
    }
}

/// A simple closed polygon delimiting an analysis area (the orange line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Ring", into = "Ring")]
pub struct Region {
    ring: Ring,
}

impl TryFrom<Ring> for Region {
    type Error = GeometryIssue;

    fn try_from(ring: Ring) -> Result<Self, Self::Error> {
        Region::new(ring)
    }
}

impl From<Region> for Ring {
    fn from(r: Region) -> Self {
        r.ring
    }
}

impl Region {
    pub fn new(ring: Ring) -> Result<Self, GeometryIssue> {
        for p in &ring {
            LonLat::checked(p.lon, p.lat)?;
        }
        validate_ring(&ring)?;
        if predicates::ring_signed_area(&ring) == 0.0 {
            return Err(GeometryIssue::ZeroArea);
        }
        if predicates::ring_self_intersects(&ring) {
            return Err(GeometryIssue::SelfIntersecting);
        }
        Ok(Self { ring })
    }

    pub fn ring(&self) -> &[LonLat] {
        &self.ring
    }

    pub fn bbox(&self) -> Bbox {
        bounding_box(&Geometry::LineString(self.ring.clone()))
    }
}

/// Errors raised while reading a GeoJSON FeatureCollection.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("input is not a GeoJSON FeatureCollection")]
    NotAFeatureCollection,
    #[error("feature {index}: invalid geometry: {issue}")]
    InvalidGeometry { index: usize, issue: GeometryIssue },
    #[error("feature {index}: missing category")]
    MissingCategory { index: usize },
    #[error("feature {index}: no geometry and no anchor")]
    MissingAnchor { index: usize },
    #[error("feature {index}: invalid property `{key}`: {reason}")]
    InvalidProperty {
        index: usize,
        key: String,
        reason: String,
    },
    #[error("feature {index}: not a GeoJSON Feature")]
    NotAFeature { index: usize },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::MalformedJson(_) => "malformed_json",
            ParseError::NotAFeatureCollection => "not_a_feature_collection",
            ParseError::InvalidGeometry { issue, .. } => issue.code(),
            ParseError::MissingCategory { .. } => "missing_category",
            ParseError::MissingAnchor { .. } => "missing_anchor",
            ParseError::InvalidProperty { .. } => "invalid_property",
            ParseError::NotAFeature { .. } => "not_a_feature",
        }
    }

    pub fn feature_index(&self) -> Option<usize> {
        match self {
            ParseError::MalformedJson(_) | ParseError::NotAFeatureCollection => None,
            ParseError::InvalidGeometry { index, .. }
            | ParseError::MissingCategory { index }
            | ParseError::MissingAnchor { index }
            | ParseError::InvalidProperty { index, .. }
            | ParseError::NotAFeature { index } => Some(*index),
        }
    }
}

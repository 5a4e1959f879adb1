//! View state and per-feature style resolution.
//!
//! A category has two independent controls: visibility (the checkbox) and
//! opacity (the slider). Hidden categories are not drawn at all; a category
//! at opacity 0 is drawn with zero alpha and cannot be clicked.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Bbox, Feature, Geometry, Region};
use crate::ontology::{Ontology, OntologyError, Rgb};

pub const POLYGON_FILL_ALPHA: f64 = 0.55;
pub const POLYGON_STROKE_WIDTH: f64 = 2.0;
pub const LINE_STROKE_WIDTH: f64 = 3.0;
pub const MARKER_RING_WIDTH: f64 = 2.0;
pub const DEFAULT_ICON: &str = "default-pin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "2d", alias = "2D")]
    TwoD,
    #[serde(rename = "3d", alias = "3D")]
    ThreeD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Viewport {
    pub width: u32,
    pub height: u32,
}

impl Viewport {
    pub fn new(width: u32, height: u32) -> Result<Self, StyleError> {
        if width == 0 || height == 0 {
            return Err(StyleError::EmptyViewport);
        }
        Ok(Self { width, height })
    }
}

impl std::str::FromStr for Viewport {
    type Err = StyleError;

    /// Parses `WxH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or(StyleError::MalformedViewport)?;
        let w = w
            .trim()
            .parse()
            .map_err(|_| StyleError::MalformedViewport)?;
        let h = h
            .trim()
            .parse()
            .map_err(|_| StyleError::MalformedViewport)?;
        Viewport::new(w, h)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StyleError {
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error(transparent)]
    UnknownCategory(#[from] OntologyError),
    #[error("viewport dimensions must be at least 1")]
    EmptyViewport,
    #[error("viewport must look like WIDTHxHEIGHT")]
    MalformedViewport,
}

/// Per-session view: extent, viewport and the category panel state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewState {
    pub mode: Mode,
    pub bbox: Bbox,
    pub viewport: Viewport,
    /// Explicit slider values; absent categories are at 1.0.
    pub opacity: BTreeMap<String, f64>,
    pub visible: BTreeSet<String>,
    #[serde(default)]
    pub annotations: Vec<Region>,
}

impl ViewState {
    /// Every ontology category checked, every slider at 1.0, no annotations.
    pub fn new(mode: Mode, bbox: Bbox, viewport: Viewport, ontology: &Ontology) -> Self {
        Self {
            mode,
            bbox,
            viewport,
            opacity: BTreeMap::new(),
            visible: ontology.categories().iter().map(|c| c.id.clone()).collect(),
            annotations: Vec::new(),
        }
    }

    pub fn opacity_of(&self, category_id: &str) -> f64 {
        self.opacity.get(category_id).copied().unwrap_or(1.0)
    }

    pub fn is_visible(&self, category_id: &str) -> bool {
        self.visible.contains(category_id)
    }

    /// A copy with one category's slider moved. Out-of-range alphas are
    /// rejected, never clamped.
    pub fn set_opacity(
        &self,
        ontology: &Ontology,
        category_id: &str,
        alpha: f64,
    ) -> Result<ViewState, StyleError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(StyleError::AlphaOutOfRange(alpha));
        }
        if !ontology.contains(category_id) {
            return Err(OntologyError::UnknownCategory(category_id.to_string()).into());
        }
        let mut next = self.clone();
        next.opacity.insert(category_id.to_string(), alpha);
        Ok(next)
    }

    pub fn set_visibility(
        &self,
        ontology: &Ontology,
        category_id: &str,
        visible: bool,
    ) -> Result<ViewState, StyleError> {
        if !ontology.contains(category_id) {
            return Err(OntologyError::UnknownCategory(category_id.to_string()).into());
        }
        let mut next = self.clone();
        if visible {
            next.visible.insert(category_id.to_string());
        } else {
            next.visible.remove(category_id);
        }
        Ok(next)
    }

    /// Full slider state for every ontology category, defaults included.
    pub fn opacity_map(&self, ontology: &Ontology) -> BTreeMap<String, f64> {
        ontology
            .categories()
            .iter()
            .map(|c| (c.id.clone(), self.opacity_of(&c.id)))
            .collect()
    }
}

/// Category slider applied to a base alpha.
pub fn effective_alpha(base_alpha: f64, category_alpha: f64) -> f64 {
    base_alpha * category_alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: f64,
}

impl Rgba {
    pub fn from_rgb(c: Rgb, a: f64) -> Self {
        Self {
            r: c.0,
            g: c.1,
            b: c.2,
            a,
        }
    }

    pub fn rgb(&self) -> Rgb {
        Rgb(self.r, self.g, self.b)
    }
}

/// How a feature is drawn: as a filled shape, a stroked line or a marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Polygon,
    Polyline,
    Billboard,
}

impl FeatureKind {
    pub fn of(feature: &Feature) -> Self {
        match &feature.geometry {
            Some(Geometry::Polygon(_) | Geometry::MultiPolygon(_)) => FeatureKind::Polygon,
            Some(Geometry::LineString(_) | Geometry::MultiLineString(_)) => FeatureKind::Polyline,
            Some(Geometry::Point(_) | Geometry::MultiPoint(_)) | None => FeatureKind::Billboard,
        }
    }

    /// Stacking rank: polygons below lines below markers.
    pub fn z_rank(self) -> i32 {
        match self {
            FeatureKind::Polygon => 0,
            FeatureKind::Polyline => 1,
            FeatureKind::Billboard => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub fill: Rgba,
    pub stroke: Rgba,
    pub stroke_width: f64,
    pub icon_id: Option<String>,
    pub z_rank: i32,
}

/// Style of one feature under a view, or `None` when its category is
/// unchecked.
pub fn resolve_style(
    feature: &Feature,
    view: &ViewState,
    ontology: &Ontology,
) -> Result<Option<RenderStyle>, StyleError> {
    let color = ontology.resolve_color(&feature.category_id)?;
    if !view.is_visible(&feature.category_id) {
        return Ok(None);
    }
    let slider = view.opacity_of(&feature.category_id);
    let alpha = |base: f64| effective_alpha(base, slider);
    let kind = FeatureKind::of(feature);
    let style = match kind {
        FeatureKind::Polygon => RenderStyle {
            fill: Rgba::from_rgb(color, alpha(POLYGON_FILL_ALPHA)),
            stroke: Rgba::from_rgb(color, alpha(1.0)),
            stroke_width: POLYGON_STROKE_WIDTH,
            icon_id: None,
            z_rank: kind.z_rank(),
        },
        FeatureKind::Polyline => RenderStyle {
            fill: Rgba::from_rgb(color, alpha(0.0)),
            stroke: Rgba::from_rgb(color, alpha(1.0)),
            stroke_width: LINE_STROKE_WIDTH,
            icon_id: None,
            z_rank: kind.z_rank(),
        },
        FeatureKind::Billboard => {
            let icon = ontology
                .get(&feature.category_id)
                .and_then(|c| c.icon_id.clone())
                .unwrap_or_else(|| DEFAULT_ICON.to_string());
            RenderStyle {
                fill: Rgba::from_rgb(color, alpha(1.0)),
                stroke: Rgba::from_rgb(Rgb(255, 255, 255), alpha(1.0)),
                stroke_width: MARKER_RING_WIDTH,
                icon_id: Some(icon),
                z_rank: kind.z_rank(),
            }
        }
    };
    Ok(Some(style))
}

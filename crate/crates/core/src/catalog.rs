//! Ingested datasets and the queries behind the search tasks: bbox and
//! category filtering, region counting, name search, detail tables and
//! click hit-testing.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::geo::{intersects, point_in_rings, Bbox, Feature, Geometry, LonLat, Region};
use crate::ontology::Ontology;
use crate::render2d::{PixelXY, Projection, RenderError};
use crate::style::{FeatureKind, ViewState};

/// Cells per axis of the spatial grid.
pub const GRID_CELLS: usize = 32;
/// Click radius around a marker's anchored position.
pub const MARKER_HIT_RADIUS_PX: f64 = 12.0;
/// Click distance from a line.
pub const LINE_HIT_TOLERANCE_PX: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("feature `{feature_id}` has unknown category `{category_id}`")]
    FeatureCategoryUnknown {
        feature_id: String,
        category_id: String,
    },
    #[error("duplicate feature id `{0}`")]
    DuplicateFeatureId(String),
    #[error("feature `{0}` has neither geometry nor anchor")]
    MissingPosition(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("point lies outside the current view")]
    OutsideView,
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::FeatureCategoryUnknown { .. } => "unknown_category",
            CatalogError::DuplicateFeatureId(_) => "duplicate_feature_id",
            CatalogError::MissingPosition(_) => "missing_anchor",
            CatalogError::UnknownCategory(_) => "unknown_category",
            CatalogError::UnknownFeature(_) => "unknown_feature",
            CatalogError::OutsideView => "outside_view",
            CatalogError::Render(RenderError::DegenerateBbox) => "degenerate_bbox",
            CatalogError::Render(RenderError::Style(_)) => "style_error",
        }
    }
}

/// Uniform grid over the dataset extent; each cell lists the indices of the
/// features whose bbox overlaps it.
#[derive(Debug, Clone)]
struct Grid {
    extent: Option<Bbox>,
    cell_w: f64,
    cell_h: f64,
    cells: Vec<Vec<usize>>,
}

impl Grid {
    fn build(bboxes: &[Bbox]) -> Self {
        let extent = bboxes.iter().copied().reduce(|a, b| a.union(&b));
        let (cell_w, cell_h) = extent
            .map(|e| {
                (
                    (e.max.lon - e.min.lon) / GRID_CELLS as f64,
                    (e.max.lat - e.min.lat) / GRID_CELLS as f64,
                )
            })
            .unwrap_or((0.0, 0.0));
        let mut grid = Grid {
            extent,
            cell_w,
            cell_h,
            cells: vec![Vec::new(); GRID_CELLS * GRID_CELLS],
        };
        for (i, b) in bboxes.iter().enumerate() {
            let (c0, c1, r0, r1) = grid.span(b);
            for row in r0..=r1 {
                for col in c0..=c1 {
                    grid.cells[row * GRID_CELLS + col].push(i);
                }
            }
        }
        grid
    }

    fn index(v: f64, origin: f64, size: f64) -> usize {
        if size <= 0.0 {
            return 0;
        }
        ((v - origin) / size)
            .floor()
            .clamp(0.0, (GRID_CELLS - 1) as f64) as usize
    }

    /// Inclusive column and row ranges covered by a box. Monotone in each
    /// coordinate, so overlapping boxes always share a cell.
    fn span(&self, b: &Bbox) -> (usize, usize, usize, usize) {
        let e = self.extent.expect("span on empty grid");
        (
            Self::index(b.min.lon, e.min.lon, self.cell_w),
            Self::index(b.max.lon, e.min.lon, self.cell_w),
            Self::index(b.min.lat, e.min.lat, self.cell_h),
            Self::index(b.max.lat, e.min.lat, self.cell_h),
        )
    }

    fn candidates(&self, b: &Bbox) -> Vec<usize> {
        match self.extent {
            Some(e) if e.intersects(b) => {
                let (c0, c1, r0, r1) = self.span(b);
                let mut out: Vec<usize> = (r0..=r1)
                    .flat_map(|row| (c0..=c1).map(move |col| row * GRID_CELLS + col))
                    .flat_map(|cell| self.cells[cell].iter().copied())
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            }
            _ => Vec::new(),
        }
    }
}

/// Ordered key/value rows describing one feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetailTable {
    pub rows: Vec<(String, String)>,
}

/// An immutable, spatially indexed set of features.
#[derive(Debug, Clone)]
pub struct Dataset {
    id: String,
    features: Vec<Feature>,
    bboxes: Vec<Bbox>,
    by_id: HashMap<String, usize>,
    grid: Grid,
    ontology: Arc<Ontology>,
}

/// Validates categories and ids, then builds the spatial grid. Without an
/// explicit id the dataset is named after a hash of its feature ids.
pub fn ingest(
    payload: Vec<Feature>,
    ontology: Arc<Ontology>,
    id: Option<String>,
) -> Result<Dataset, CatalogError> {
    let mut by_id = HashMap::with_capacity(payload.len());
    let mut bboxes = Vec::with_capacity(payload.len());
    for (i, f) in payload.iter().enumerate() {
        if !ontology.contains(&f.category_id) {
            return Err(CatalogError::FeatureCategoryUnknown {
                feature_id: f.id.clone(),
                category_id: f.category_id.clone(),
            });
        }
        if by_id.insert(f.id.clone(), i).is_some() {
            return Err(CatalogError::DuplicateFeatureId(f.id.clone()));
        }
        bboxes.push(
            f.bbox()
                .ok_or_else(|| CatalogError::MissingPosition(f.id.clone()))?,
        );
    }
    let id = id.unwrap_or_else(|| {
        let mut h = DefaultHasher::new();
        payload.len().hash(&mut h);
        payload.iter().for_each(|f| f.id.hash(&mut h));
        format!("ds-{:016x}", h.finish())
    });
    Ok(Dataset {
        id,
        grid: Grid::build(&bboxes),
        features: payload,
        bboxes,
        by_id,
        ontology,
    })
}

fn sorted_by_id(mut v: Vec<&Feature>) -> Vec<&Feature> {
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

impl Dataset {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn ontology_arc(&self) -> Arc<Ontology> {
        Arc::clone(&self.ontology)
    }

    pub fn get(&self, feature_id: &str) -> Option<&Feature> {
        self.by_id.get(feature_id).map(|&i| &self.features[i])
    }

    /// Union of all feature boxes; `None` for an empty dataset.
    pub fn extent(&self) -> Option<Bbox> {
        self.grid.extent
    }

    /// Feature count per category, for categories that occur.
    pub fn categories_present(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for f in &self.features {
            *out.entry(f.category_id.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Features whose box meets `bbox` and whose category is in
    /// `categories` (empty means all), sorted by id.
    pub fn query(&self, bbox: &Bbox, categories: &BTreeSet<String>) -> Vec<&Feature> {
        let hits = self
            .grid
            .candidates(bbox)
            .into_iter()
            .filter(|&i| self.bboxes[i].intersects(bbox))
            .map(|i| &self.features[i])
            .filter(|f| categories.is_empty() || categories.contains(&f.category_id))
            .collect();
        sorted_by_id(hits)
    }

    /// Features of exactly `category_id` that share a point with the region.
    pub fn count_in_region(
        &self,
        region: &Region,
        category_id: &str,
    ) -> Result<usize, CatalogError> {
        if !self.ontology.contains(category_id) {
            return Err(CatalogError::UnknownCategory(category_id.to_string()));
        }
        let rb = region.bbox();
        Ok(self
            .grid
            .candidates(&rb)
            .into_iter()
            .filter(|&i| {
                self.features[i].category_id == category_id && self.bboxes[i].intersects(&rb)
            })
            .filter(|&i| {
                self.features[i]
                    .footprint()
                    .is_some_and(|g| intersects(&g, region))
            })
            .count())
    }

    /// Case-insensitive substring match on `name`, sorted by (name, id).
    pub fn search(&self, text: &str) -> Vec<&Feature> {
        let needle = text.trim().to_lowercase();
        if needle.is_empty() {
            return Vec::new();
        }
        let mut hits: Vec<&Feature> = self
            .features
            .iter()
            .filter(|f| f.name().is_some_and(|n| n.to_lowercase().contains(&needle)))
            .collect();
        hits.sort_by(|a, b| a.name().cmp(&b.name()).then_with(|| a.id.cmp(&b.id)));
        hits
    }

    /// `name` first (when present), then the category label, then the
    /// remaining properties in source order.
    pub fn feature_detail(&self, feature_id: &str) -> Result<DetailTable, CatalogError> {
        let f = self
            .get(feature_id)
            .ok_or_else(|| CatalogError::UnknownFeature(feature_id.to_string()))?;
        let mut rows = Vec::with_capacity(f.properties.len() + 1);
        if let Some(name) = f.properties.get("name") {
            rows.push(("name".to_string(), name.display()));
        }
        let label = self
            .ontology
            .get(&f.category_id)
            .map(|c| c.label.clone())
            .unwrap_or_else(|| f.category_id.clone());
        rows.push(("category".to_string(), label));
        rows.extend(
            f.properties
                .iter()
                .filter(|(k, _)| k.as_str() != "name")
                .map(|(k, v)| (k.clone(), v.display())),
        );
        Ok(DetailTable { rows })
    }

    /// Topmost clickable feature at `p`. Markers win over lines, lines over
    /// polygons; within a class the greater id wins. Hidden categories and
    /// categories at opacity 0 are never hit.
    pub fn hit_test(&self, view: &ViewState, p: LonLat) -> Result<Option<String>, CatalogError> {
        if !view.bbox.contains(p) {
            return Err(CatalogError::OutsideView);
        }
        let proj = Projection::new(&view.bbox, view.viewport)?;
        let click = proj.project(p);
        let r = MARKER_HIT_RADIUS_PX.max(LINE_HIT_TOLERANCE_PX);
        let sw = proj.unproject(PixelXY {
            x: click.x - r,
            y: click.y + r,
        });
        let ne = proj.unproject(PixelXY {
            x: click.x + r,
            y: click.y - r,
        });
        let search = Bbox {
            min: LonLat::new(sw.lon.max(-180.0), sw.lat.max(-90.0)),
            max: LonLat::new(ne.lon.min(180.0), ne.lat.min(90.0)),
        };

        let best = self
            .query(&search, &BTreeSet::new())
            .into_iter()
            .filter(|f| view.is_visible(&f.category_id) && view.opacity_of(&f.category_id) > 0.0)
            .filter(|f| hits(f, &proj, click, p))
            .max_by(|a, b| {
                FeatureKind::of(a)
                    .z_rank()
                    .cmp(&FeatureKind::of(b).z_rank())
                    .then_with(|| a.id.cmp(&b.id))
            });
        Ok(best.map(|f| f.id.clone()))
    }
}

fn distance(a: PixelXY, b: PixelXY) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

fn segment_distance(p: PixelXY, a: PixelXY, b: PixelXY) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return distance(p, a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    distance(
        p,
        PixelXY {
            x: a.x + t * dx,
            y: a.y + t * dy,
        },
    )
}

fn line_hit(proj: &Projection, line: &[LonLat], click: PixelXY) -> bool {
    line.windows(2).any(|w| {
        segment_distance(click, proj.project(w[0]), proj.project(w[1])) <= LINE_HIT_TOLERANCE_PX
    })
}

fn marker_hit(proj: &Projection, at: LonLat, click: PixelXY) -> bool {
    distance(proj.project(at), click) <= MARKER_HIT_RADIUS_PX
}

fn hits(f: &Feature, proj: &Projection, click: PixelXY, p: LonLat) -> bool {
    match &f.geometry {
        Some(Geometry::Point(q)) => marker_hit(proj, *q, click),
        Some(Geometry::MultiPoint(qs)) => qs.iter().any(|q| marker_hit(proj, *q, click)),
        Some(Geometry::LineString(l)) => line_hit(proj, l, click),
        Some(Geometry::MultiLineString(ls)) => ls.iter().any(|l| line_hit(proj, l, click)),
        Some(Geometry::Polygon(rings)) => point_in_rings(p, rings),
        Some(Geometry::MultiPolygon(polys)) => polys.iter().any(|r| point_in_rings(p, r)),
        None => f.anchor().is_some_and(|a| marker_hit(proj, a, click)),
    }
}

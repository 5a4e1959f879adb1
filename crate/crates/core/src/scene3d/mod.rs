//! 3D scene assembly: extruded polygon prisms, ground-level polylines and
//! billboards, in local tangent-plane meters around the view center.
//!
//! The category slider reaches 3D output through the alpha channel of each
//! node color; nothing else about a node depends on it.

mod triangulate;

pub use triangulate::{signed_area2, triangulate};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::catalog::Dataset;
use crate::geo::{Feature, Geometry, LonLat, Ring};
use crate::icons::IconRegistry;
use crate::ontology::Ontology;
use crate::style::{resolve_style, FeatureKind, Rgba, StyleError, ViewState};

/// Equirectangular scale used for the local plane.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("ring has zero area")]
    DegenerateRing,
    #[error("ring self-intersects (no ear found)")]
    SelfIntersecting,
    #[error("extrusion height must be a non-negative number")]
    NegativeHeight,
    #[error("feature `{feature_id}`: {source}")]
    Feature {
        feature_id: String,
        #[source]
        source: Box<SceneError>,
    },
    #[error(transparent)]
    Style(#[from] StyleError),
}

pub fn classify(feature: &Feature) -> FeatureKind {
    FeatureKind::of(feature)
}

fn flat3<S: Serializer>(v: &[[f64; 3]], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().flatten())
}

fn flat_idx<S: Serializer>(v: &[[u32; 3]], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().flatten())
}

fn flat_paths<S: Serializer>(v: &[Vec<[f64; 3]>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(
        v.iter()
            .map(|p| p.iter().flatten().copied().collect::<Vec<f64>>()),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    /// Flattened as `[x0, y0, z0, x1, ...]`.
    #[serde(serialize_with = "flat3")]
    pub vertices: Vec<[f64; 3]>,
    #[serde(serialize_with = "flat_idx")]
    pub triangles: Vec<[u32; 3]>,
    pub color: Rgba,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Billboard {
    pub position: [f64; 3],
    pub icon_ref: String,
    pub color: Rgba,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeBody {
    /// One mesh per polygon part.
    Mesh {
        meshes: Vec<Mesh>,
    },
    Polyline {
        #[serde(serialize_with = "flat_paths")]
        paths: Vec<Vec<[f64; 3]>>,
        color: Rgba,
        width_px: f64,
    },
    Billboard {
        billboards: Vec<Billboard>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneNode {
    pub feature_id: String,
    pub category_id: String,
    #[serde(flatten)]
    pub body: NodeBody,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub origin: LonLat,
    pub meters_per_degree: f64,
    pub nodes: Vec<SceneNode>,
    pub warnings: Vec<String>,
}

impl Scene {
    /// Stable, pretty-printed JSON.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }
}

/// Prism over a ring in the local plane: bottom cap at z = 0 facing down,
/// top cap at `height_m` facing up, two wall triangles per edge. A zero
/// height yields only an upward cap.
pub fn extrude_polygon(ring: &[[f64; 2]], height_m: f64, color: Rgba) -> Result<Mesh, SceneError> {
    if !(height_m >= 0.0 && height_m.is_finite()) {
        return Err(SceneError::NegativeHeight);
    }
    let pts = triangulate::open_ring(ring);
    let caps = triangulate(pts)?;
    let n = pts.len() as u32;
    let cap_tris = caps.iter().map(|t| [t[0] as u32, t[1] as u32, t[2] as u32]);

    if height_m == 0.0 {
        return Ok(Mesh {
            vertices: pts.iter().map(|p| [p[0], p[1], 0.0]).collect(),
            triangles: cap_tris.collect(),
            color,
        });
    }

    let mut vertices = Vec::with_capacity(2 * pts.len());
    vertices.extend(pts.iter().map(|p| [p[0], p[1], 0.0]));
    vertices.extend(pts.iter().map(|p| [p[0], p[1], height_m]));

    let mut triangles = Vec::with_capacity(4 * pts.len() - 4);
    for [a, b, c] in cap_tris {
        triangles.push([a, c, b]);
        triangles.push([n + a, n + b, n + c]);
    }
    let ccw = signed_area2(pts) > 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let (u, v) = if ccw { (i, j) } else { (j, i) };
        triangles.push([u, v, n + v]);
        triangles.push([u, n + v, n + u]);
    }
    Ok(Mesh {
        vertices,
        triangles,
        color,
    })
}

/// Equirectangular projection about an origin, in meters (x east, y north).
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    origin: LonLat,
    cos_lat: f64,
}

impl LocalFrame {
    pub fn new(origin: LonLat) -> Self {
        Self {
            origin,
            cos_lat: origin.lat.to_radians().cos(),
        }
    }

    pub fn to_local(&self, p: LonLat) -> [f64; 2] {
        [
            (p.lon - self.origin.lon) * self.cos_lat * METERS_PER_DEGREE,
            (p.lat - self.origin.lat) * METERS_PER_DEGREE,
        ]
    }

    fn ring(&self, ring: &[LonLat]) -> Vec<[f64; 2]> {
        ring.iter().map(|p| self.to_local(*p)).collect()
    }

    fn ground(&self, p: LonLat) -> [f64; 3] {
        let [x, y] = self.to_local(p);
        [x, y, 0.0]
    }
}

fn polygon_parts(g: &Geometry) -> Vec<&[Ring]> {
    match g {
        Geometry::Polygon(rings) => vec![rings.as_slice()],
        Geometry::MultiPolygon(polys) => polys.iter().map(|p| p.as_slice()).collect(),
        _ => Vec::new(),
    }
}

fn marker_positions(f: &Feature) -> Vec<LonLat> {
    match &f.geometry {
        Some(Geometry::Point(p)) => vec![*p],
        Some(Geometry::MultiPoint(ps)) => ps.clone(),
        Some(_) => Vec::new(),
        None => f.anchor().into_iter().collect(),
    }
}

fn line_parts(g: &Geometry) -> Vec<&[LonLat]> {
    match g {
        Geometry::LineString(l) => vec![l.as_slice()],
        Geometry::MultiLineString(ls) => ls.iter().map(|l| l.as_slice()).collect(),
        _ => Vec::new(),
    }
}

/// One node per visible feature, ordered by feature id.
///
/// Polygon height comes from the feature's `height_m`, then the category's
/// `default_height_m`, then 0. Polygon holes are dropped with a warning.
pub fn build_scene(
    features: &[Feature],
    view: &ViewState,
    ontology: &Ontology,
    icons: &IconRegistry,
) -> Result<Scene, SceneError> {
    let origin = view.bbox.center();
    let frame = LocalFrame::new(origin);
    let mut sorted: Vec<&Feature> = features.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut nodes = Vec::new();
    let mut warnings = Vec::new();
    for f in sorted {
        let Some(style) = resolve_style(f, view, ontology)? else {
            continue;
        };
        let body = match (classify(f), &f.geometry) {
            (FeatureKind::Polygon, Some(g)) => {
                let height = f
                    .height_m()
                    .or_else(|| {
                        ontology
                            .get(&f.category_id)
                            .and_then(|c| c.default_height_m)
                    })
                    .unwrap_or(0.0);
                let mut meshes = Vec::new();
                let mut holes = 0;
                for rings in polygon_parts(g) {
                    holes += rings.len() - 1;
                    let mesh = extrude_polygon(&frame.ring(&rings[0]), height, style.fill)
                        .map_err(|e| SceneError::Feature {
                            feature_id: f.id.clone(),
                            source: Box::new(e),
                        })?;
                    meshes.push(mesh);
                }
                if holes > 0 {
                    warnings.push(format!("feature {}: {holes} polygon hole(s) dropped", f.id));
                }
                NodeBody::Mesh { meshes }
            }
            (FeatureKind::Polyline, Some(g)) => NodeBody::Polyline {
                paths: line_parts(g)
                    .into_iter()
                    .map(|l| l.iter().map(|p| frame.ground(*p)).collect())
                    .collect(),
                color: style.stroke,
                width_px: style.stroke_width,
            },
            _ => {
                let icon_ref = icons.resolve(style.icon_id.as_deref().unwrap_or_default());
                NodeBody::Billboard {
                    billboards: marker_positions(f)
                        .into_iter()
                        .map(|p| Billboard {
                            position: frame.ground(p),
                            icon_ref: icon_ref.clone(),
                            color: style.fill,
                        })
                        .collect(),
                }
            }
        };
        nodes.push(SceneNode {
            feature_id: f.id.clone(),
            category_id: f.category_id.clone(),
            body,
        });
    }
    Ok(Scene {
        origin,
        meters_per_degree: METERS_PER_DEGREE,
        nodes,
        warnings,
    })
}

/// Builds what a session sees in 3D: the dataset's features in the view bbox.
pub fn scene_view(
    dataset: &Dataset,
    view: &ViewState,
    icons: &IconRegistry,
) -> Result<Scene, SceneError> {
    let features: Vec<Feature> = dataset
        .query(&view.bbox, &Default::default())
        .into_iter()
        .cloned()
        .collect();
    build_scene(&features, view, dataset.ontology(), icons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{parse_feature_collection, Bbox};
    use crate::ontology::load_ontology;
    use crate::style::{Mode, Viewport};
    use std::collections::HashMap;

    fn red() -> Rgba {
        Rgba {
            r: 255,
            g: 0,
            b: 0,
            a: 1.0,
        }
    }

    /// Divergence-theorem volume from signed tetrahedra against the origin.
    fn volume(m: &Mesh) -> f64 {
        m.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| m.vertices[i as usize]);
                a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0])
            })
            .sum::<f64>()
            / 6.0
    }

    fn edge_uses(m: &Mesh) -> HashMap<(u32, u32), usize> {
        let mut uses = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        uses
    }

    const UNIT: [[f64; 2]; 5] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];

    #[test]
    fn unit_square_prism() {
        let m = extrude_polygon(&UNIT, 10.0, red()).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
        assert!((volume(&m) - 10.0).abs() < 1e-12);
        assert!(edge_uses(&m).values().all(|&c| c == 2));
        assert!(m.vertices.iter().all(|v| v[2] == 0.0 || v[2] == 10.0));
    }

    #[test]
    fn clockwise_ring_still_outward() {
        let cw: Vec<[f64; 2]> = UNIT.iter().rev().copied().collect();
        let m = extrude_polygon(&cw, 4.0, red()).unwrap();
        assert!((volume(&m) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_height_is_flat_cap() {
        let pent = [[0.0, 0.0], [2.0, 0.0], [3.0, 1.0], [1.0, 2.0], [-1.0, 1.0]];
        let m = extrude_polygon(&pent, 0.0, red()).unwrap();
        assert_eq!(m.vertices.len(), 5);
        assert_eq!(m.triangles.len(), 3);
        assert!(m.vertices.iter().all(|v| v[2] == 0.0));
        assert_eq!(
            extrude_polygon(&pent, -1.0, red()),
            Err(SceneError::NegativeHeight)
        );
    }

    fn fixtures() -> (Ontology, Vec<Feature>, ViewState) {
        let o = load_ontology(
            r#"{"categories":[
                {"id":"park","label":"Parks","color":[0,160,80],"default_height_m":2},
                {"id":"building","label":"Buildings","color":[120,120,200]},
                {"id":"hospital","label":"Hospitals","color":[220,20,60],"icon_id":"hospital"},
                {"id":"tram","label":"Tram"}]}"#,
        )
        .unwrap();
        let fs = parse_feature_collection(
            r#"{"type":"FeatureCollection","features":[
              {"type":"Feature","id":"b1","geometry":{"type":"Polygon","coordinates":[[[7.680,45.070],[7.681,45.070],[7.681,45.071],[7.680,45.071],[7.680,45.070]]]},"properties":{"category":"building","height_m":25}},
              {"type":"Feature","id":"h1","geometry":{"type":"Point","coordinates":[7.682,45.072]},"properties":{"category":"hospital"}},
              {"type":"Feature","id":"p1","geometry":{"type":"Polygon","coordinates":[[[7.670,45.060],[7.675,45.060],[7.675,45.065],[7.670,45.065],[7.670,45.060]],[[7.671,45.061],[7.672,45.061],[7.672,45.062],[7.671,45.061]]]},"properties":{"category":"park"}},
              {"type":"Feature","id":"t1","geometry":{"type":"MultiLineString","coordinates":[[[7.66,45.05],[7.69,45.08]],[[7.66,45.08],[7.69,45.05]]]},"properties":{"category":"tram"}},
              {"type":"Feature","id":"b2","geometry":{"type":"Polygon","coordinates":[[[7.685,45.070],[7.686,45.070],[7.686,45.071],[7.685,45.070]]]},"properties":{"category":"building"}},
              {"type":"Feature","id":"m1","geometry":null,"properties":{"category":"hospital","anchor":[7.679,45.069]}}
            ]}"#,
        )
        .unwrap();
        let v = ViewState::new(
            Mode::ThreeD,
            Bbox::from_edges(7.65, 45.05, 7.70, 45.09).unwrap(),
            Viewport::new(800, 600).unwrap(),
            &o,
        );
        (o, fs, v)
    }

    #[test]
    fn classify_examples() {
        let (_, fs, _) = fixtures();
        assert_eq!(classify(&fs[0]), FeatureKind::Polygon);
        assert_eq!(classify(&fs[3]), FeatureKind::Polyline);
        assert_eq!(classify(&fs[5]), FeatureKind::Billboard);
        assert_eq!(classify(&fs[1]), FeatureKind::Billboard);
    }

    #[test]
    fn scene_nodes_and_fallbacks() {
        let (o, fs, v) = fixtures();
        let icons = IconRegistry::new("/icons");
        let scene = build_scene(&fs, &v, &o, &icons).unwrap();
        let ids: Vec<&str> = scene.nodes.iter().map(|n| n.feature_id.as_str()).collect();
        assert_eq!(ids, ["b1", "b2", "h1", "m1", "p1", "t1"]);

        let mesh_of = |id: &str| match &scene
            .nodes
            .iter()
            .find(|n| n.feature_id == id)
            .unwrap()
            .body
        {
            NodeBody::Mesh { meshes } => meshes[0].clone(),
            other => panic!("expected mesh, got {other:?}"),
        };
        // Feature height.
        let b1 = mesh_of("b1");
        assert_eq!(b1.triangles.len(), 12);
        assert!(b1.vertices.iter().any(|v| v[2] == 25.0));
        // No height anywhere: flat cap.
        let b2 = mesh_of("b2");
        assert_eq!(b2.triangles.len(), 1);
        // Category default.
        let p1 = mesh_of("p1");
        assert!(p1.vertices.iter().all(|v| v[2] == 0.0 || v[2] == 2.0));
        assert_eq!(scene.warnings, ["feature p1: 1 polygon hole(s) dropped"]);

        match &scene.nodes[2].body {
            NodeBody::Billboard { billboards } => {
                assert_eq!(billboards[0].icon_ref, "/icons/hospital.png");
                assert_eq!(billboards[0].position[2], 0.0);
            }
            other => panic!("{other:?}"),
        }
        match &scene.nodes[5].body {
            NodeBody::Polyline {
                paths, width_px, ..
            } => {
                assert_eq!(paths.len(), 2);
                assert_eq!(*width_px, 3.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn local_frame_origin_and_scale() {
        let f = LocalFrame::new(LonLat::new(7.0, 45.0));
        assert_eq!(f.to_local(LonLat::new(7.0, 45.0)), [0.0, 0.0]);
        let [x, y] = f.to_local(LonLat::new(7.001, 45.001));
        assert!((y - 111.32).abs() < 1e-6);
        assert!((x - 111.32 * 45f64.to_radians().cos()).abs() < 1e-6);
    }

    #[test]
    fn polygon_alpha_follows_slider() {
        let (o, fs, v) = fixtures();
        let icons = IconRegistry::default();
        let half = v.set_opacity(&o, "building", 0.5).unwrap();
        let scene = build_scene(&fs, &half, &o, &icons).unwrap();
        match &scene.nodes[0].body {
            NodeBody::Mesh { meshes } => assert!((meshes[0].color.a - 0.275).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hidden_category_has_no_node() {
        let (o, fs, v) = fixtures();
        let v = v.set_visibility(&o, "hospital", false).unwrap();
        let scene = build_scene(&fs, &v, &o, &IconRegistry::default()).unwrap();
        assert_eq!(scene.nodes.len(), 4);
    }

    #[test]
    fn json_shape() {
        let (o, fs, v) = fixtures();
        let scene = build_scene(&fs, &v, &o, &IconRegistry::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&scene.to_json()).unwrap();
        let origin = json["origin"].as_array().unwrap();
        assert!((origin[0].as_f64().unwrap() - 7.675).abs() < 1e-12);
        assert!((origin[1].as_f64().unwrap() - 45.07).abs() < 1e-12);
        let first = &json["nodes"][0];
        let keys: Vec<&str> = first
            .as_object()
            .unwrap()
            .keys()
            .map(|k| k.as_str())
            .collect();
        assert_eq!(keys, ["feature_id", "category_id", "kind", "meshes"]);
        assert_eq!(
            first["meshes"][0]["vertices"].as_array().unwrap().len(),
            8 * 3
        );
        assert_eq!(
            first["meshes"][0]["triangles"].as_array().unwrap().len(),
            12 * 3
        );
        assert_eq!(
            scene.to_json(),
            build_scene(&fs, &v, &o, &IconRegistry::default())
                .unwrap()
                .to_json()
        );
    }
}

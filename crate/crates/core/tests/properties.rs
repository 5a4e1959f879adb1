use std::f64::consts::PI;

use indexmap::IndexMap;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vividmap_core::geo::{
    intersects, parse_feature_collection, to_feature_collection, PropertyValue,
};
use vividmap_core::scene3d::NodeBody;
use vividmap_core::{
    build_scene, load_ontology, Bbox, Feature, Geometry, IconRegistry, LonLat, Mode, Region,
    ViewState, Viewport,
};

fn star(c: (f64, f64), radius: f64, jitter: &[(f64, f64)]) -> Vec<LonLat> {
    let n = jitter.len();
    let mut ring: Vec<LonLat> = jitter
        .iter()
        .enumerate()
        .map(|(i, (dt, dr))| {
            let t = (i as f64 + dt) / n as f64 * 2.0 * PI;
            LonLat::new(c.0 + radius * dr * t.cos(), c.1 + radius * dr * t.sin())
        })
        .collect();
    ring.push(ring[0]);
    ring
}

fn position() -> impl Strategy<Value = LonLat> {
    (-170.0f64..170.0, -80.0f64..80.0).prop_map(|(x, y)| LonLat::new(x, y))
}

fn geometry() -> impl Strategy<Value = Geometry> {
    let jitter = proptest::collection::vec((0.0f64..0.8, 0.3f64..1.0), 3..10);
    prop_oneof![
        position().prop_map(Geometry::Point),
        proptest::collection::vec(position(), 1..4).prop_map(Geometry::MultiPoint),
        (position(), position())
            .prop_filter("distinct", |(a, b)| a != b)
            .prop_map(|(a, b)| Geometry::LineString(vec![a, b])),
        ((-100.0f64..100.0, -60.0f64..60.0), 0.5f64..5.0, jitter)
            .prop_map(|(c, r, j)| Geometry::Polygon(vec![star(c, r, &j)])),
    ]
}

fn property() -> impl Strategy<Value = PropertyValue> {
    prop_oneof![
        Just(PropertyValue::Null),
        any::<bool>().prop_map(PropertyValue::Bool),
        (-1e6f64..1e6).prop_map(PropertyValue::Number),
        "[a-zA-Z ]{0,12}".prop_map(PropertyValue::Text),
    ]
}

fn feature() -> impl Strategy<Value = Feature> {
    (
        "[a-z]{1,6}",
        prop_oneof![Just("school"), Just("hospital"), Just("park")],
        proptest::option::of(geometry()),
        position(),
        proptest::collection::vec(("[a-z]{2,6}x", property()), 0..4),
        proptest::option::of("[A-Za-z ]{1,16}"),
    )
        .prop_map(|(id, cat, geometry, anchor, props, name)| {
            let mut properties = IndexMap::new();
            if let Some(n) = name {
                properties.insert("name".to_string(), PropertyValue::Text(n));
            }
            if geometry.is_none() {
                properties.insert("anchor".to_string(), PropertyValue::Position(anchor));
            }
            for (k, v) in props {
                properties.insert(k, v);
            }
            Feature {
                id,
                category_id: cat.to_string(),
                geometry,
                properties,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn parse_serialize_parse_round_trip(features in proptest::collection::vec(feature(), 0..8)) {
        let text = to_feature_collection(&features).to_string();
        let once = parse_feature_collection(&text).unwrap();
        prop_assert_eq!(&once, &features);
        let twice = parse_feature_collection(&to_feature_collection(&once).to_string()).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn scene_heights_within_bounds(
        polys in proptest::collection::vec(((-1.0f64..1.0, -1.0f64..1.0), 0.05f64..0.4,
            proptest::collection::vec((0.0f64..0.8, 0.3f64..1.0), 3..9), 0.0f64..80.0), 1..5),
        points in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..5),
    ) {
        let ontology = load_ontology(r#"{"categories":[{"id":"b","label":"B"}]}"#).unwrap();
        let mut features = Vec::new();
        for (i, (c, r, j, h)) in polys.iter().enumerate() {
            let mut properties = IndexMap::new();
            properties.insert("height_m".to_string(), PropertyValue::Number(*h));
            features.push(Feature {
                id: format!("p{i}"),
                category_id: "b".into(),
                geometry: Some(Geometry::Polygon(vec![star(*c, *r, j)])),
                properties,
            });
        }
        for (i, (x, y)) in points.iter().enumerate() {
            features.push(Feature {
                id: format!("m{i}"),
                category_id: "b".into(),
                geometry: Some(Geometry::Point(LonLat::new(*x, *y))),
                properties: IndexMap::new(),
            });
        }
        let view = ViewState::new(Mode::ThreeD, Bbox::from_edges(-2.0, -2.0, 2.0, 2.0).unwrap(),
            Viewport::new(100, 100).unwrap(), &ontology);
        let scene = build_scene(&features, &view, &ontology, &IconRegistry::default()).unwrap();
        for node in &scene.nodes {
            match &node.body {
                NodeBody::Mesh { meshes } => {
                    let h = features.iter().find(|f| f.id == node.feature_id).unwrap().height_m().unwrap();
                    for m in meshes {
                        for v in &m.vertices {
                            prop_assert!(v[2] >= 0.0 && v[2] <= h);
                        }
                    }
                }
                NodeBody::Billboard { billboards } => {
                    for b in billboards {
                        prop_assert_eq!(b.position[2], 0.0);
                    }
                }
                NodeBody::Polyline { .. } => {}
            }
        }
    }
}

fn winding_inside(p: (f64, f64), ring: &[LonLat]) -> bool {
    let mut w = 0;
    for e in ring.windows(2) {
        let (a, b) = (e[0], e[1]);
        let side = (b.lon - a.lon) * (p.1 - a.lat) - (b.lat - a.lat) * (p.0 - a.lon);
        if a.lat <= p.1 {
            if b.lat > p.1 && side > 0.0 {
                w += 1;
            }
        } else if b.lat <= p.1 && side < 0.0 {
            w -= 1;
        }
    }
    w != 0
}

fn random_star(rng: &mut ChaCha8Rng) -> Vec<LonLat> {
    let c = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let r = rng.random_range(0.5..3.0);
    let n = rng.random_range(3..9);
    let jitter: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..0.8), rng.random_range(0.3..1.0)))
        .collect();
    star(c, r, &jitter)
}

fn segment_distance(p: (f64, f64), a: LonLat, b: LonLat) -> f64 {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let t = (((p.0 - a.lon) * dx + (p.1 - a.lat) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (p.0 - a.lon - t * dx).hypot(p.1 - a.lat - t * dy)
}

/// Smallest distance from a vertex of either ring to an edge of the other.
fn boundary_gap(g: &[LonLat], r: &[LonLat]) -> f64 {
    let one_way = |a: &[LonLat], b: &[LonLat]| {
        a.iter()
            .flat_map(|v| {
                b.windows(2)
                    .map(move |e| segment_distance((v.lon, v.lat), e[0], e[1]))
            })
            .fold(f64::INFINITY, f64::min)
    };
    one_way(g, r).min(one_way(r, g))
}

fn ring_box(r: &[LonLat]) -> [f64; 4] {
    r.iter().fold(
        [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ],
        |b, p| {
            [
                b[0].min(p.lon),
                b[1].min(p.lat),
                b[2].max(p.lon),
                b[3].max(p.lat),
            ]
        },
    )
}

#[test]
fn intersects_agrees_with_grid_sampling() {
    const CELLS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut agree, mut total) = (0, 0);
    for case in 0..300 {
        let g = random_star(&mut rng);
        let r = random_star(&mut rng);
        let region = Region::new(r.clone()).unwrap();
        let got = intersects(&Geometry::Polygon(vec![g.clone()]), &region);

        // Sample the overlap of the two boxes; no overlap means no shared point.
        let (bg, br) = (ring_box(&g), ring_box(&r));
        let (x0, y0, x1, y1) = (
            bg[0].max(br[0]),
            bg[1].max(br[1]),
            bg[2].min(br[2]),
            bg[3].min(br[3]),
        );
        let mut sampled = false;
        let mut cell = 0.0;
        if x0 <= x1 && y0 <= y1 {
            let (cw, ch) = ((x1 - x0) / CELLS as f64, (y1 - y0) / CELLS as f64);
            cell = cw.hypot(ch);
            'grid: for i in 0..CELLS {
                for j in 0..CELLS {
                    let p = (x0 + (i as f64 + 0.5) * cw, y0 + (j as f64 + 0.5) * ch);
                    if winding_inside(p, &g) && winding_inside(p, &r) {
                        sampled = true;
                        break 'grid;
                    }
                }
            }
        }
        // A sampled shared point is a real shared point.
        if sampled {
            assert!(
                got,
                "case {case}: grid found an overlap that intersects missed"
            );
        }
        if got != sampled {
            assert!(
                boundary_gap(&g, &r) <= cell,
                "case {case}: disagreement with boundaries more than one cell apart"
            );
        }
        total += 1;
        agree += usize::from(got == sampled);
    }
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.99, "agreement {rate}");
}

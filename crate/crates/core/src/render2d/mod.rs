//! Deterministic SVG map output.
//!
//! Every coordinate is written with exactly two decimals (ties to even) and
//! alphas with Rust's shortest round-trip float form, so equal inputs give
//! byte-identical documents on every platform. Alphas appear only as
//! attributes of the per-feature `<g>` wrapper.

mod projection;

pub use projection::{mercator, project, PixelXY, Projection, MAX_MERCATOR_LAT};

use std::fmt::Write as _;

use thiserror::Error;

use crate::catalog::Dataset;
use crate::geo::{Feature, Geometry, LonLat};
use crate::ontology::Ontology;
use crate::style::{resolve_style, FeatureKind, RenderStyle, StyleError, ViewState};

pub const BACKGROUND_COLOR: &str = "#ECEFF1";
pub const ANNOTATION_COLOR: &str = "#FF7F00";
pub const ANNOTATION_WIDTH: f64 = 3.0;
pub const MARKER_RADIUS: f64 = 14.0;
/// Distance from the marker tip (the anchored position) up to the badge center.
pub const MARKER_TIP_OFFSET: f64 = 22.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("bbox has zero width or height in Web Mercator")]
    DegenerateBbox,
    #[error(transparent)]
    Style(#[from] StyleError),
}

/// Two decimals, round half to even.
pub fn fmt_coord(v: f64) -> String {
    let scaled = (v * 100.0).round_ties_even() as i64;
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

pub fn fmt_alpha(a: f64) -> String {
    format!("{a}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn ring_path(out: &mut String, proj: &Projection, ring: &[LonLat]) {
    // The closing position is implied by `Z`.
    let open = &ring[..ring.len().saturating_sub(1)];
    for (i, p) in open.iter().enumerate() {
        let px = proj.project(*p);
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(out, "{}{} {} ", cmd, fmt_coord(px.x), fmt_coord(px.y));
    }
    out.push('Z');
}

fn polygon_path(proj: &Projection, polygons: &[&[Vec<LonLat>]]) -> String {
    let mut d = String::new();
    for rings in polygons {
        for ring in rings.iter() {
            if !d.is_empty() {
                d.push(' ');
            }
            ring_path(&mut d, proj, ring);
        }
    }
    d
}

fn points_attr(proj: &Projection, line: &[LonLat]) -> String {
    line.iter()
        .map(|p| {
            let px = proj.project(*p);
            format!("{},{}", fmt_coord(px.x), fmt_coord(px.y))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn marker(out: &mut String, proj: &Projection, at: LonLat, style: &RenderStyle) {
    let tip = proj.project(at);
    let fill = style.fill.rgb().hex();
    let ring = style.stroke.rgb().hex();
    let (x, y) = (tip.x, tip.y);
    let _ = write!(
        out,
        r#"<path d="M{} {} L{} {} L{} {} Z" fill="{fill}"/>"#,
        fmt_coord(x),
        fmt_coord(y),
        fmt_coord(x - 8.0),
        fmt_coord(y - 12.0),
        fmt_coord(x + 8.0),
        fmt_coord(y - 12.0),
    );
    let _ = write!(
        out,
        r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}" stroke="{ring}" stroke-width="{}"/>"#,
        fmt_coord(x),
        fmt_coord(y - MARKER_TIP_OFFSET),
        fmt_coord(MARKER_RADIUS),
        fmt_coord(style.stroke_width),
    );
}

fn feature_group(out: &mut String, proj: &Projection, feature: &Feature, style: &RenderStyle) {
    let kind = FeatureKind::of(feature);
    let (class, alphas) = match kind {
        FeatureKind::Polygon => (
            "polygon",
            format!(
                r#" fill-opacity="{}" stroke-opacity="{}""#,
                fmt_alpha(style.fill.a),
                fmt_alpha(style.stroke.a)
            ),
        ),
        FeatureKind::Polyline => (
            "line",
            format!(r#" stroke-opacity="{}""#, fmt_alpha(style.stroke.a)),
        ),
        FeatureKind::Billboard => (
            "marker",
            format!(
                r#" fill-opacity="{}" stroke-opacity="{}""#,
                fmt_alpha(style.fill.a),
                fmt_alpha(style.stroke.a)
            ),
        ),
    };
    let _ = write!(
        out,
        r#"<g class="feature {class}" data-feature="{}" data-category="{}"{alphas}>"#,
        escape(&feature.id),
        escape(&feature.category_id),
    );
    let stroke = style.stroke.rgb().hex();
    let width = fmt_coord(style.stroke_width);
    match &feature.geometry {
        Some(Geometry::Polygon(rings)) => {
            let d = polygon_path(proj, &[rings]);
            let _ = write!(
                out,
                r#"<path d="{d}" fill="{}" stroke="{stroke}" stroke-width="{width}" fill-rule="evenodd"/>"#,
                style.fill.rgb().hex()
            );
        }
        Some(Geometry::MultiPolygon(polys)) => {
            let parts: Vec<&[Vec<LonLat>]> = polys.iter().map(|p| p.as_slice()).collect();
            let d = polygon_path(proj, &parts);
            let _ = write!(
                out,
                r#"<path d="{d}" fill="{}" stroke="{stroke}" stroke-width="{width}" fill-rule="evenodd"/>"#,
                style.fill.rgb().hex()
            );
        }
        Some(Geometry::LineString(line)) => {
            let _ = write!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-linejoin="round" stroke-linecap="round"/>"#,
                points_attr(proj, line)
            );
        }
        Some(Geometry::MultiLineString(lines)) => {
            for line in lines {
                let _ = write!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-linejoin="round" stroke-linecap="round"/>"#,
                    points_attr(proj, line)
                );
            }
        }
        Some(Geometry::Point(p)) => marker(out, proj, *p, style),
        Some(Geometry::MultiPoint(ps)) => ps.iter().for_each(|p| marker(out, proj, *p, style)),
        None => {
            if let Some(anchor) = feature.anchor() {
                marker(out, proj, anchor, style);
            }
        }
    }
    out.push_str("</g>\n");
}

/// Renders the given features (typically a bbox query result) under a view.
///
/// Element order: background, then one group per visible feature sorted by
/// z-rank and feature id, then one orange path per annotation.
pub fn render_svg(
    features: &[Feature],
    view: &ViewState,
    ontology: &Ontology,
) -> Result<String, RenderError> {
    let proj = Projection::new(&view.bbox, view.viewport)?;
    let mut styled = Vec::with_capacity(features.len());
    for f in features {
        if let Some(style) = resolve_style(f, view, ontology)? {
            styled.push((f, style));
        }
    }
    styled.sort_by(|(fa, sa), (fb, sb)| sa.z_rank.cmp(&sb.z_rank).then_with(|| fa.id.cmp(&fb.id)));

    let (w, h) = (view.viewport.width, view.viewport.height);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect class="background" x="0" y="0" width="{w}" height="{h}" fill="{BACKGROUND_COLOR}"/>"#
    );
    for (f, style) in &styled {
        feature_group(&mut out, &proj, f, style);
    }
    for region in &view.annotations {
        let mut d = String::new();
        ring_path(&mut d, &proj, region.ring());
        let _ = writeln!(
            out,
            r#"<path class="annotation" d="{d}" fill="none" stroke="{ANNOTATION_COLOR}" stroke-width="{}" stroke-linejoin="round"/>"#,
            fmt_coord(ANNOTATION_WIDTH)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders what a session sees: the dataset's features in the view bbox.
pub fn render_view(dataset: &Dataset, view: &ViewState) -> Result<String, RenderError> {
    let features = dataset.query(&view.bbox, &Default::default());
    let owned: Vec<Feature> = features.into_iter().cloned().collect();
    render_svg(&owned, view, dataset.ontology())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{parse_feature_collection, Bbox, Region};
    use crate::ontology::load_ontology;
    use crate::style::{Mode, Viewport};

    fn setup() -> (Ontology, Vec<Feature>, ViewState) {
        let o = load_ontology(
            r#"{"categories":[
                {"id":"park","label":"Parks","color":[0,128,255]},
                {"id":"hospital","label":"Hospitals","color":[220,20,60]},
                {"id":"road","label":"Roads"}]}"#,
        )
        .unwrap();
        let fs = parse_feature_collection(
            r#"{"type":"FeatureCollection","features":[
              {"type":"Feature","id":"h1","geometry":{"type":"Point","coordinates":[5,5]},"properties":{"category":"hospital"}},
              {"type":"Feature","id":"p1","geometry":{"type":"Polygon","coordinates":[[[1,1],[4,1],[4,4],[1,4],[1,1]],[[2,2],[3,2],[3,3],[2,2]]]},"properties":{"category":"park"}},
              {"type":"Feature","id":"r1","geometry":{"type":"LineString","coordinates":[[0,5],[9,5]]},"properties":{"category":"road"}},
              {"type":"Feature","id":"h0","geometry":null,"properties":{"category":"hospital","anchor":[6,6],"name":"A & B"}}
            ]}"#,
        )
        .unwrap();
        let v = ViewState::new(
            Mode::TwoD,
            Bbox::from_edges(0.0, 0.0, 10.0, 10.0).unwrap(),
            Viewport::new(400, 300).unwrap(),
            &o,
        );
        (o, fs, v)
    }

    #[test]
    fn coordinate_formatting() {
        assert_eq!(fmt_coord(0.0), "0.00");
        assert_eq!(fmt_coord(-0.001), "0.00");
        assert_eq!(fmt_coord(12.345_67), "12.35");
        assert_eq!(fmt_coord(0.125), "0.12");
        assert_eq!(fmt_coord(0.375), "0.38");
        assert_eq!(fmt_coord(-3.5), "-3.50");
        assert_eq!(fmt_alpha(0.55 * 0.5), "0.275");
        assert_eq!(fmt_alpha(1.0), "1");
    }

    #[test]
    fn empty_map_is_background_only() {
        let (o, _, v) = setup();
        let svg = render_svg(&[], &v, &o).unwrap();
        assert!(svg.contains(r#"viewBox="0 0 400 300""#));
        assert_eq!(svg.matches("<rect").count(), 1);
        assert_eq!(svg.matches("<g ").count(), 0);
    }

    #[test]
    fn deterministic_output() {
        let (o, fs, v) = setup();
        assert_eq!(
            render_svg(&fs, &v, &o).unwrap(),
            render_svg(&fs, &v, &o).unwrap()
        );
    }

    #[test]
    fn z_order_and_group_count() {
        let (o, fs, mut v) = setup();
        v.annotations
            .push(Region::new(Bbox::from_edges(0.5, 0.5, 8.0, 8.0).unwrap().to_ring()).unwrap());
        let svg = render_svg(&fs, &v, &o).unwrap();
        let order: Vec<&str> = svg
            .match_indices("data-feature=\"")
            .map(|(i, _)| {
                let rest = &svg[i + 14..];
                &rest[..rest.find('"').unwrap()]
            })
            .collect();
        assert_eq!(order, ["p1", "r1", "h0", "h1"]);
        assert_eq!(svg.matches("<g ").count(), 4);
        assert_eq!(svg.matches(r#"class="annotation""#).count(), 1);
        assert!(svg.rfind("annotation").unwrap() > svg.rfind("data-feature").unwrap());
        assert!(svg.contains(r##"stroke="#FF7F00" stroke-width="3.00""##));
        // Hole written as a second subpath.
        assert!(svg.contains("Z M"));
    }

    #[test]
    fn half_opacity_polygon_group() {
        let (o, fs, v) = setup();
        let v = v.set_opacity(&o, "park", 0.5).unwrap();
        let svg = render_svg(&fs, &v, &o).unwrap();
        assert!(svg.contains(
            r#"data-feature="p1" data-category="park" fill-opacity="0.275" stroke-opacity="0.5""#
        ));
    }

    #[test]
    fn hidden_category_is_not_drawn() {
        let (o, fs, v) = setup();
        let v = v.set_visibility(&o, "hospital", false).unwrap();
        let svg = render_svg(&fs, &v, &o).unwrap();
        assert_eq!(svg.matches("<g ").count(), 2);
        assert!(!svg.contains("hospital"));
    }

    #[test]
    fn attributes_escaped() {
        let (o, mut fs, v) = setup();
        fs[0].id = "a\"<b>".into();
        let svg = render_svg(&fs, &v, &o).unwrap();
        assert!(svg.contains("data-feature=\"a&quot;&lt;b&gt;\""));
    }
}

use super::{Bbox, Geometry, LonLat, Region, Ring};

/// Twice the signed area of triangle (a, b, c); positive when counter-clockwise.
fn cross(a: LonLat, b: LonLat, c: LonLat) -> f64 {
    (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
}

fn within_segment_box(p: LonLat, a: LonLat, b: LonLat) -> bool {
    p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

fn on_segment(p: LonLat, a: LonLat, b: LonLat) -> bool {
    cross(a, b, p) == 0.0 && within_segment_box(p, a, b)
}

/// Closed-segment intersection test (shared endpoints and collinear overlap
/// count as intersecting).
pub fn segments_intersect(p1: LonLat, p2: LonLat, q1: LonLat, q2: LonLat) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && within_segment_box(p1, q1, q2))
        || (d2 == 0.0 && within_segment_box(p2, q1, q2))
        || (d3 == 0.0 && within_segment_box(q1, p1, p2))
        || (d4 == 0.0 && within_segment_box(q2, p1, p2))
}

pub fn point_on_ring(p: LonLat, ring: &[LonLat]) -> bool {
    ring.windows(2).any(|w| on_segment(p, w[0], w[1]))
}

/// Even-odd containment; points on the boundary count as inside.
pub fn point_in_polygon(p: LonLat, ring: &[LonLat]) -> bool {
    if point_on_ring(p, ring) {
        return true;
    }
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Containment in a polygon with holes: inside (or on) the outer ring and
/// not strictly inside any hole.
pub fn point_in_rings(p: LonLat, rings: &[Ring]) -> bool {
    let Some((outer, holes)) = rings.split_first() else {
        return false;
    };
    point_in_polygon(p, outer)
        && holes
            .iter()
            .all(|h| point_on_ring(p, h) || !point_in_polygon(p, h))
}

pub(crate) fn ring_signed_area(ring: &[LonLat]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].lon * w[1].lat - w[1].lon * w[0].lat)
        .sum::<f64>()
        / 2.0
}

pub(crate) fn ring_self_intersects(ring: &[LonLat]) -> bool {
    let n = ring.len() - 1;
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges only share their common vertex unless they fold back.
                let (a, b) = (ring[i], ring[i + 1]);
                let (c, d) = (ring[j], ring[j + 1]);
                let (other_i, other_j) = if j == i + 1 { (a, d) } else { (b, c) };
                if on_segment(other_j, a, b) || on_segment(other_i, c, d) {
                    return true;
                }
                continue;
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return true;
            }
        }
    }
    false
}

pub fn bounding_box(geometry: &Geometry) -> Bbox {
    let mut min = LonLat::new(f64::INFINITY, f64::INFINITY);
    let mut max = LonLat::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    geometry.for_each_position(|p| {
        min.lon = min.lon.min(p.lon);
        min.lat = min.lat.min(p.lat);
        max.lon = max.lon.max(p.lon);
        max.lat = max.lat.max(p.lat);
    });
    Bbox { min, max }
}

fn ring_edges_cross(ring: &[LonLat], region: &[LonLat]) -> bool {
    ring.windows(2).any(|e| {
        region
            .windows(2)
            .any(|r| segments_intersect(e[0], e[1], r[0], r[1]))
    })
}

fn line_intersects(line: &[LonLat], region: &[LonLat]) -> bool {
    line.iter().any(|p| point_in_polygon(*p, region)) || ring_edges_cross(line, region)
}

fn polygon_intersects(rings: &[Ring], region: &[LonLat]) -> bool {
    let Some(outer) = rings.first() else {
        return false;
    };
    outer.iter().any(|p| point_in_polygon(*p, region))
        || region.iter().any(|p| point_in_rings(*p, rings))
        || rings.iter().any(|r| ring_edges_cross(r, region))
}

/// True when the geometry and the region share at least one point.
pub fn intersects(geometry: &Geometry, region: &Region) -> bool {
    if !bounding_box(geometry).intersects(&region.bbox()) {
        return false;
    }
    let ring = region.ring();
    match geometry {
        Geometry::Point(p) => point_in_polygon(*p, ring),
        Geometry::MultiPoint(ps) => ps.iter().any(|p| point_in_polygon(*p, ring)),
        Geometry::LineString(line) => line_intersects(line, ring),
        Geometry::MultiLineString(lines) => lines.iter().any(|l| line_intersects(l, ring)),
        Geometry::Polygon(rings) => polygon_intersects(rings, ring),
        Geometry::MultiPolygon(polys) => polys.iter().any(|p| polygon_intersects(p, ring)),
    }
}

fn largest_part<T>(parts: &[T], bbox: impl Fn(&T) -> Bbox) -> &T {
    let mut best = &parts[0];
    let mut best_area = bbox(best).area();
    for part in &parts[1..] {
        let area = bbox(part).area();
        if area > best_area {
            best = part;
            best_area = area;
        }
    }
    best
}

fn line_representative(line: &[LonLat]) -> LonLat {
    line[line.len() / 2]
}

fn polygon_representative(rings: &[Ring]) -> LonLat {
    let outer = &rings[0];
    let vertices = &outer[..outer.len() - 1];
    let n = vertices.len() as f64;
    let (sum_lon, sum_lat) = vertices
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p.lon, y + p.lat));
    let avg = LonLat::new(sum_lon / n, sum_lat / n);
    if point_in_polygon(avg, outer) {
        avg
    } else {
        outer[0]
    }
}

/// Anchor position for labels and markers.
pub fn representative_point(geometry: &Geometry) -> LonLat {
    match geometry {
        Geometry::Point(p) => *p,
        Geometry::MultiPoint(ps) => *largest_part(ps, |p| Bbox::point(*p)),
        Geometry::LineString(line) => line_representative(line),
        Geometry::MultiLineString(lines) => line_representative(largest_part(lines, |l| {
            bounding_box(&Geometry::LineString(l.clone()))
        })),
        Geometry::Polygon(rings) => polygon_representative(rings),
        Geometry::MultiPolygon(polys) => polygon_representative(largest_part(polys, |p| {
            bounding_box(&Geometry::LineString(p[0].clone()))
        })),
    }
}

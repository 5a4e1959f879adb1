use super::SceneError;
use crate::geo::{ring_self_intersects, LonLat};

fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Twice the signed shoelace area; positive for counter-clockwise rings.
pub fn signed_area2(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum()
}

/// Drops the closing duplicate of a closed ring.
pub(crate) fn open_ring(ring: &[[f64; 2]]) -> &[[f64; 2]] {
    match ring {
        [first, .., last] if first == last => &ring[..ring.len() - 1],
        _ => ring,
    }
}

fn in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
}

fn between(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Ear-clipping triangulation of a simple ring (closed or open, no holes).
///
/// Returns exactly `n - 2` counter-clockwise triangles as indices into the
/// open vertex list. Collinear vertices are clipped as zero-area ears only
/// when no proper ear exists.
pub fn triangulate(ring: &[[f64; 2]]) -> Result<Vec<[usize; 3]>, SceneError> {
    let pts = open_ring(ring);
    let n = pts.len();
    if n < 3 {
        return Err(SceneError::DegenerateRing);
    }
    let area2 = signed_area2(pts);
    if area2 == 0.0 || !area2.is_finite() {
        return Err(SceneError::DegenerateRing);
    }
    let mut closed: Vec<LonLat> = pts.iter().map(|p| LonLat::new(p[0], p[1])).collect();
    closed.push(closed[0]);
    if ring_self_intersects(&closed) {
        return Err(SceneError::SelfIntersecting);
    }
    let mut remaining: Vec<usize> = if area2 > 0.0 {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    let mut triangles = Vec::with_capacity(n - 2);
    let mut start = 0;

    while remaining.len() > 3 {
        let m = remaining.len();
        let is_ear = |k: usize, allow_flat: bool| {
            let (ia, ib, ic) = (
                remaining[(k + m - 1) % m],
                remaining[k],
                remaining[(k + 1) % m],
            );
            let (a, b, c) = (pts[ia], pts[ib], pts[ic]);
            let turn = cross(a, b, c);
            if turn < 0.0 || (turn == 0.0 && !(allow_flat && between(b, a, c))) {
                return false;
            }
            if turn == 0.0 {
                return true;
            }
            !remaining.iter().any(|&j| {
                j != ia
                    && j != ib
                    && j != ic
                    && pts[j] != a
                    && pts[j] != b
                    && pts[j] != c
                    && in_triangle(pts[j], a, b, c)
            })
        };
        let found = (0..m)
            .map(|o| (start + o) % m)
            .find(|&k| is_ear(k, false))
            .or_else(|| (0..m).map(|o| (start + o) % m).find(|&k| is_ear(k, true)));
        let Some(k) = found else {
            return Err(SceneError::SelfIntersecting);
        };
        triangles.push([
            remaining[(k + m - 1) % m],
            remaining[k],
            remaining[(k + 1) % m],
        ]);
        remaining.remove(k);
        start = if k == 0 { 0 } else { k - 1 };
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);
    Ok(triangles)
}

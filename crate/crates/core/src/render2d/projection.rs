use serde::{Deserialize, Serialize};

use crate::geo::{Bbox, LonLat};
use crate::style::Viewport;

use super::RenderError;

/// Latitude limit of the square Web Mercator world, `atan(sinh(pi))` in degrees.
pub const MAX_MERCATOR_LAT: f64 = 85.051_128_779_806_59;

/// Pixel position, origin top-left, y down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelXY {
    pub x: f64,
    pub y: f64,
}

/// Normalized Web Mercator coordinates in [0, 1]², y down.
pub fn mercator(p: LonLat) -> (f64, f64) {
    let lat = p
        .lat
        .clamp(-MAX_MERCATOR_LAT, MAX_MERCATOR_LAT)
        .to_radians();
    let x = p.lon / 360.0 + 0.5;
    let y =
        0.5 - (std::f64::consts::FRAC_PI_4 + lat / 2.0).tan().ln() / (2.0 * std::f64::consts::PI);
    (x, y)
}

/// Unscaled Mercator northing `ln(tan(pi/4 + lat/2))`, y up.
fn northing(lat: f64) -> f64 {
    let lat = lat.clamp(-MAX_MERCATOR_LAT, MAX_MERCATOR_LAT).to_radians();
    (std::f64::consts::FRAC_PI_4 + lat / 2.0).tan().ln()
}

/// Linear map from the Mercator image of a bbox onto a viewport. Works in
/// degrees of longitude and unscaled northing so small boxes keep full
/// precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    west: f64,
    north: f64,
    span_x: f64,
    span_y: f64,
    width: f64,
    height: f64,
}

impl Projection {
    pub fn new(bbox: &Bbox, viewport: Viewport) -> Result<Self, RenderError> {
        let west = bbox.min.lon;
        let north = northing(bbox.max.lat);
        let span_x = bbox.max.lon - west;
        let span_y = north - northing(bbox.min.lat);
        if !(span_x > 0.0 && span_y > 0.0) {
            return Err(RenderError::DegenerateBbox);
        }
        Ok(Self {
            west,
            north,
            span_x,
            span_y,
            width: viewport.width as f64,
            height: viewport.height as f64,
        })
    }

    pub fn project(&self, p: LonLat) -> PixelXY {
        PixelXY {
            x: (p.lon - self.west) / self.span_x * self.width,
            y: (self.north - northing(p.lat)) / self.span_y * self.height,
        }
    }

    pub fn unproject(&self, px: PixelXY) -> LonLat {
        let lon = self.west + px.x / self.width * self.span_x;
        let y = self.north - px.y / self.height * self.span_y;
        LonLat::new(lon, y.sinh().atan().to_degrees())
    }
}

pub fn project(p: LonLat, bbox: &Bbox, viewport: Viewport) -> Result<PixelXY, RenderError> {
    Ok(Projection::new(bbox, viewport)?.project(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> Bbox {
        Bbox::from_edges(-180.0, -85.05113, 180.0, 85.05113).unwrap()
    }

    fn vp() -> Viewport {
        Viewport::new(256, 256).unwrap()
    }

    #[test]
    fn origin_maps_to_center() {
        let p = project(LonLat::new(0.0, 0.0), &world(), vp()).unwrap();
        assert!((p.x - 128.0).abs() < 1e-9 && (p.y - 128.0).abs() < 1e-9);
    }

    #[test]
    fn top_left_corner() {
        let p = project(LonLat::new(-180.0, 85.05113), &world(), vp()).unwrap();
        assert_eq!(p, PixelXY { x: 0.0, y: 0.0 });
    }

    #[test]
    fn forty_five_degrees() {
        // Reference from a 40-digit evaluation of the Mercator formula.
        let p = project(LonLat::new(45.0, 45.0), &world(), vp()).unwrap();
        assert!((p.x - 160.0).abs() < 1e-9);
        assert!((p.y - 92.089_609_450_292_47).abs() < 1e-9);
    }

    #[test]
    fn degenerate_bbox() {
        let flat = Bbox::from_edges(1.0, 2.0, 1.0, 3.0).unwrap();
        assert_eq!(
            project(LonLat::new(1.0, 2.0), &flat, vp()),
            Err(RenderError::DegenerateBbox)
        );
        let polar = Bbox::from_edges(0.0, 86.0, 1.0, 89.0).unwrap();
        assert_eq!(
            Projection::new(&polar, vp()),
            Err(RenderError::DegenerateBbox)
        );
    }

    #[test]
    fn unproject_inverts_project() {
        let bbox = Bbox::from_edges(7.6, 45.0, 7.75, 45.1).unwrap();
        let proj = Projection::new(&bbox, Viewport::new(800, 600).unwrap()).unwrap();
        let p = LonLat::new(7.68, 45.07);
        let back = proj.unproject(proj.project(p));
        assert!((back.lon - p.lon).abs() < 1e-12 && (back.lat - p.lat).abs() < 1e-12);
    }

    #[test]
    fn strictly_monotone() {
        let bbox = Bbox::from_edges(7.6, 45.0, 7.75, 45.1).unwrap();
        let proj = Projection::new(&bbox, Viewport::new(800, 600).unwrap()).unwrap();
        let mut prev = proj.project(LonLat::new(7.6, 45.0));
        for i in 1..100 {
            let t = i as f64 / 100.0;
            let p = proj.project(LonLat::new(7.6 + 0.15 * t, 45.0 + 0.1 * t));
            assert!(p.x > prev.x && p.y < prev.y);
            prev = p;
        }
    }
}

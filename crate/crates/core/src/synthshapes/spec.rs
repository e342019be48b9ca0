//! Analytic shape specs and pixel-center rasterization.
//!
//! A pixel (x, y) is set iff its center (x + 0.5, y + 0.5) lies inside the
//! analytic shape. No anti-aliasing, so masks are exactly reproducible.

use serde::{Deserialize, Serialize};

use crate::dataio::Mask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Triangle,
    Rectangle,
    Ellipse,
}

impl ShapeKind {
    pub fn category_id(&self) -> u32 {
        match self {
            ShapeKind::Triangle => 1,
            ShapeKind::Rectangle => 2,
            ShapeKind::Ellipse => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Triangle => "triangle",
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::Ellipse => "ellipse",
        }
    }

    pub fn all() -> [ShapeKind; 3] {
        [ShapeKind::Triangle, ShapeKind::Rectangle, ShapeKind::Ellipse]
    }
}

/// Size parameters, in pixels, relative to the shape center (orientation
/// applied on top at rasterization time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShapeGeometry {
    /// Vertex offsets from the center.
    Triangle { verts: [(f64, f64); 3] },
    /// Half extents along the local axes.
    Rectangle { half_w: f64, half_h: f64 },
    /// Semi-axes along the local axes.
    Ellipse { a: f64, b: f64 },
}

impl ShapeGeometry {
    pub fn kind(&self) -> ShapeKind {
        match self {
            ShapeGeometry::Triangle { .. } => ShapeKind::Triangle,
            ShapeGeometry::Rectangle { .. } => ShapeKind::Rectangle,
            ShapeGeometry::Ellipse { .. } => ShapeKind::Ellipse,
        }
    }

    /// Analytic area.
    pub fn area(&self) -> f64 {
        match self {
            ShapeGeometry::Triangle { verts } => {
                let [a, b, c] = verts;
                0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs()
            }
            ShapeGeometry::Rectangle { half_w, half_h } => 4.0 * half_w * half_h,
            ShapeGeometry::Ellipse { a, b } => std::f64::consts::PI * a * b,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ShapeGeometry::Triangle { .. } => self.area() > 0.0,
            ShapeGeometry::Rectangle { half_w, half_h } => *half_w > 0.0 && *half_h > 0.0,
            ShapeGeometry::Ellipse { a, b } => *a > 0.0 && *b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "non-positive size parameters: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub geometry: ShapeGeometry,
    /// Center in canvas coordinates (pixels).
    pub center: (f64, f64),
    /// Rotation in radians, counter-clockwise in pixel coordinates.
    pub orientation: f64,
    pub color: [u8; 3],
    /// 0 = backmost. Unique and contiguous within a scene.
    pub depth_rank: usize,
}

impl ShapeSpec {
    pub fn kind(&self) -> ShapeKind {
        self.geometry.kind()
    }

    /// Point-membership test in canvas coordinates.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        // Move into the shape's local frame: translate, then rotate by -θ.
        let (dx, dy) = (px - self.center.0, py - self.center.1);
        let (sin, cos) = self.orientation.sin_cos();
        let lx = cos * dx + sin * dy;
        let ly = -sin * dx + cos * dy;
        match &self.geometry {
            ShapeGeometry::Rectangle { half_w, half_h } => {
                lx.abs() <= *half_w && ly.abs() <= *half_h
            }
            ShapeGeometry::Ellipse { a, b } => {
                let u = lx / a;
                let v = ly / b;
                u * u + v * v <= 1.0
            }
            ShapeGeometry::Triangle { verts } => {
                // Half-plane sign test with counter-clockwise winding
                // enforced; boundary counts as inside.
                let [a, mut b, mut c] = *verts;
                let signed =
                    (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
                if signed < 0.0 {
                    std::mem::swap(&mut b, &mut c);
                }
                let edge = |p: (f64, f64), q: (f64, f64)| {
                    (q.0 - p.0) * (ly - p.1) - (lx - p.0) * (q.1 - p.1)
                };
                edge(a, b) >= 0.0 && edge(b, c) >= 0.0 && edge(c, a) >= 0.0
            }
        }
    }

    /// Conservative bounding radius around the center.
    pub fn bounding_radius(&self) -> f64 {
        match &self.geometry {
            ShapeGeometry::Triangle { verts } => verts
                .iter()
                .map(|v| (v.0 * v.0 + v.1 * v.1).sqrt())
                .fold(0.0, f64::max),
            ShapeGeometry::Rectangle { half_w, half_h } => {
                (half_w * half_w + half_h * half_h).sqrt()
            }
            ShapeGeometry::Ellipse { a, b } => a.max(*b),
        }
    }
}

/// Rasterize a spec onto an H x W canvas; the mask is clipped to the canvas.
pub fn rasterize_shape(spec: &ShapeSpec, canvas: (usize, usize)) -> Result<Mask> {
    let (h, w) = canvas;
    if h < 8 || w < 8 {
        return Err(Error::InvalidSpec(format!(
            "canvas {h}x{w} below minimum 8x8"
        )));
    }
    spec.geometry.validate()?;

    // Restrict the scan to the shape's bounding square for speed.
    let r = spec.bounding_radius();
    let x_lo = ((spec.center.0 - r).floor().max(0.0)) as usize;
    let y_lo = ((spec.center.1 - r).floor().max(0.0)) as usize;
    let x_hi = ((spec.center.0 + r).ceil().min(w as f64)) as usize;
    let y_hi = ((spec.center.1 + r).ceil().min(h as f64)) as usize;

    let mut mask = Mask::zeros((h, w));
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            if spec.contains(x as f64 + 0.5, y as f64 + 0.5) {
                mask[(y, x)] = 1;
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::mask_area;

    fn spec(geometry: ShapeGeometry, center: (f64, f64), orientation: f64) -> ShapeSpec {
        ShapeSpec {
            geometry,
            center,
            orientation,
            color: [200, 10, 10],
            depth_rank: 0,
        }
    }

    #[test]
    fn full_cover_rectangle_is_all_ones() {
        let s = spec(
            ShapeGeometry::Rectangle {
                half_w: 100.0,
                half_h: 100.0,
            },
            (16.0, 16.0),
            0.0,
        );
        let mask = rasterize_shape(&s, (32, 32)).unwrap();
        assert_eq!(mask_area(&mask), 32 * 32);
    }

    #[test]
    fn interior_ellipse_area_close_to_analytic() {
        let s = spec(ShapeGeometry::Ellipse { a: 30.0, b: 20.0 }, (64.0, 64.0), 0.7);
        let mask = rasterize_shape(&s, (128, 128)).unwrap();
        let analytic = std::f64::consts::PI * 30.0 * 20.0;
        let count = mask_area(&mask) as f64;
        assert!(
            (count - analytic).abs() / analytic < 0.02,
            "pixel count {count} vs analytic {analytic}"
        );
    }

    #[test]
    fn ellipse_matches_point_membership_oracle() {
        let s = spec(ShapeGeometry::Ellipse { a: 17.0, b: 9.0 }, (40.0, 30.0), 1.1);
        let mask = rasterize_shape(&s, (64, 80)).unwrap();
        for y in 0..64 {
            for x in 0..80 {
                let inside = s.contains(x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(mask[(y, x)] != 0, inside, "mismatch at ({x},{y})");
            }
        }
    }

    #[test]
    fn triangle_matches_half_plane_oracle() {
        let verts = [(-12.0, -8.0), (14.0, -2.0), (0.0, 13.0)];
        let s = spec(ShapeGeometry::Triangle { verts }, (32.0, 32.0), 0.4);
        let mask = rasterize_shape(&s, (64, 64)).unwrap();
        // Independent sign test, done directly in canvas coordinates.
        let (sin, cos) = s.orientation.sin_cos();
        let world: Vec<(f64, f64)> = verts
            .iter()
            .map(|v| {
                (
                    s.center.0 + cos * v.0 - sin * v.1,
                    s.center.1 + sin * v.0 + cos * v.1,
                )
            })
            .collect();
        let sign = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
            (q.0 - p.0) * (r.1 - p.1) - (r.0 - p.0) * (q.1 - p.1)
        };
        let orient = sign(world[0], world[1], world[2]).signum();
        for y in 0..64 {
            for x in 0..64 {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let d0 = sign(world[0], world[1], p) * orient;
                let d1 = sign(world[1], world[2], p) * orient;
                let d2 = sign(world[2], world[0], p) * orient;
                let inside = d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0;
                assert_eq!(mask[(y, x)] != 0, inside, "mismatch at ({x},{y})");
            }
        }
    }

    #[test]
    fn non_positive_sizes_are_invalid() {
        let s = spec(ShapeGeometry::Ellipse { a: 0.0, b: 5.0 }, (10.0, 10.0), 0.0);
        assert!(matches!(
            rasterize_shape(&s, (32, 32)),
            Err(Error::InvalidSpec(_))
        ));
        let degenerate = spec(
            ShapeGeometry::Triangle {
                verts: [(0.0, 0.0), (5.0, 5.0), (10.0, 10.0)],
            },
            (10.0, 10.0),
            0.0,
        );
        assert!(rasterize_shape(&degenerate, (32, 32)).is_err());
    }

    #[test]
    fn tiny_canvas_is_rejected() {
        let s = spec(ShapeGeometry::Ellipse { a: 2.0, b: 2.0 }, (3.0, 3.0), 0.0);
        assert!(rasterize_shape(&s, (4, 4)).is_err());
    }
}

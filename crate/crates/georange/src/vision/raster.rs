//! Minimal rasterization helpers for synthesizing test imagery.

use crate::camera::PixelPoint;

use super::image::GrayImage;

/// Stamps a straight stroke of the given thickness between two points.
pub fn draw_line_segment(
    img: &mut GrayImage,
    a: PixelPoint,
    b: PixelPoint,
    thickness_px: f64,
    value: u8,
) {
    let length = (b.u - a.u).hypot(b.v - a.v);
    let steps = (length * 2.0).ceil().max(1.0) as usize;
    let radius = (thickness_px / 2.0).max(0.5);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let cx = a.u + t * (b.u - a.u);
        let cy = a.v + t * (b.v - a.v);
        let r = radius.ceil() as i64 + 1;
        for dy in -r..=r {
            for dx in -r..=r {
                let x = cx.floor() as i64 + dx;
                let y = cy.floor() as i64 + dy;
                if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
                    continue;
                }
                // Pixel (x, y) has its center at (x + 0.5, y + 0.5).
                if (x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy) <= radius {
                    img.set(x as u32, y as u32, value);
                }
            }
        }
    }
}

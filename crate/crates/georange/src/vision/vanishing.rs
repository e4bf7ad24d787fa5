//! Vanishing-point estimation from lane-candidate line segments.
//!
//! Segments are filtered to plausible lane markings (reaching into the
//! lower part of the image, diagonal orientation), every non-parallel pair
//! is intersected, and the intersections are aggregated by coordinate-wise
//! median so a single outlier segment cannot drag the result.

use serde::{Deserialize, Serialize};

use crate::camera::PixelPoint;

use super::hough::LineSegment;
use super::VisionError;

/// Aggregated intersection of lane-candidate lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingPoint {
    pub point: PixelPoint,
    /// Number of segment pairs whose intersections were aggregated.
    pub support_pairs: usize,
    /// Median distance of pairwise intersections from the reported point.
    pub dispersion_px: f64,
}

/// Lane-candidate filtering and pairing parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VanishingConfig {
    /// Fraction of the image height, measured up from the bottom, that a
    /// segment must reach into.
    pub roi_lower_frac: f64,
    /// Accepted band of absolute slope angles, radians.
    pub slope_min_rad: f64,
    pub slope_max_rad: f64,
    /// Pairs closer than this to parallel are not intersected.
    pub parallel_eps_rad: f64,
}

impl Default for VanishingConfig {
    fn default() -> Self {
        VanishingConfig {
            roi_lower_frac: 0.45,
            slope_min_rad: 20.0f64.to_radians(),
            slope_max_rad: 70.0f64.to_radians(),
            parallel_eps_rad: 1.0f64.to_radians(),
        }
    }
}

/// Intersects lane-candidate segment pairs and aggregates by median.
pub fn vanishing_point(
    segments: &[LineSegment],
    image_height: u32,
    cfg: &VanishingConfig,
) -> Result<VanishingPoint, VisionError> {
    let roi_top = (1.0 - cfg.roi_lower_frac) * image_height as f64;
    let candidates: Vec<&LineSegment> = segments
        .iter()
        .filter(|s| {
            let lower_v = s.start.v.max(s.end.v);
            let slope = s.slope_angle().abs();
            lower_v >= roi_top && slope >= cfg.slope_min_rad && slope <= cfg.slope_max_rad
        })
        .collect();
    if candidates.len() < 2 {
        return Err(VisionError::InsufficientLines(candidates.len()));
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..candidates.len() {
        for j in (i + 1)..candidates.len() {
            if let Some(p) = intersect(candidates[i], candidates[j], cfg.parallel_eps_rad) {
                xs.push(p.u);
                ys.push(p.v);
            }
        }
    }
    if xs.is_empty() {
        return Err(VisionError::IllConditioned);
    }

    let point = PixelPoint::new(median(&mut xs.clone()), median(&mut ys.clone()));
    let mut spreads: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (x - point.u).hypot(y - point.v))
        .collect();
    Ok(VanishingPoint {
        point,
        support_pairs: xs.len(),
        dispersion_px: median(&mut spreads),
    })
}

/// Intersection of the infinite lines through two segments, or None when
/// they are within `parallel_eps` of parallel.
fn intersect(a: &LineSegment, b: &LineSegment, parallel_eps: f64) -> Option<PixelPoint> {
    let da = (a.end.u - a.start.u, a.end.v - a.start.v);
    let db = (b.end.u - b.start.u, b.end.v - b.start.v);
    let la = da.0.hypot(da.1);
    let lb = db.0.hypot(db.1);
    if la == 0.0 || lb == 0.0 {
        return None;
    }
    let cross = da.0 * db.1 - da.1 * db.0;
    let angle = (cross / (la * lb)).abs().asin();
    if angle <= parallel_eps {
        return None;
    }
    let t = ((b.start.u - a.start.u) * db.1 - (b.start.v - a.start.v) * db.0) / cross;
    Some(PixelPoint::new(a.start.u + t * da.0, a.start.v + t * da.1))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(x0: f64, y0: f64, x1: f64, y1: f64) -> LineSegment {
        LineSegment::new(PixelPoint::new(x0, y0), PixelPoint::new(x1, y1))
    }

    #[test]
    fn two_diagonals_intersect_at_center() {
        // Lines v = u and v = -u + 960 meet at (480, 480).
        let segments = vec![seg(400.0, 400.0, 700.0, 700.0), seg(260.0, 700.0, 560.0, 400.0)];
        let vp = vanishing_point(&segments, 960, &VanishingConfig::default()).unwrap();
        assert!((vp.point.u - 480.0).abs() < 1e-9);
        assert!((vp.point.v - 480.0).abs() < 1e-9);
        assert_eq!(vp.support_pairs, 1);
    }

    #[test]
    fn concurrent_lines_have_zero_dispersion() {
        // Three lines through (400, 300) at lane-like slopes.
        let through = |angle_deg: f64| {
            let (s, c) = angle_deg.to_radians().sin_cos();
            seg(400.0 + 120.0 * c, 300.0 + 120.0 * s, 400.0 + 320.0 * c, 300.0 + 320.0 * s)
        };
        let segments = vec![through(30.0), through(50.0), through(65.0)];
        let vp = vanishing_point(&segments, 720, &VanishingConfig::default()).unwrap();
        assert!((vp.point.u - 400.0).abs() < 1e-6);
        assert!((vp.point.v - 300.0).abs() < 1e-6);
        assert_eq!(vp.support_pairs, 3);
        assert!(vp.dispersion_px < 1e-6);
    }

    #[test]
    fn invariant_under_permutation_and_endpoint_swap() {
        let segments = vec![
            seg(100.0, 700.0, 400.0, 420.0),
            seg(860.0, 700.0, 560.0, 420.0),
            seg(200.0, 680.0, 450.0, 430.0),
        ];
        let base = vanishing_point(&segments, 720, &VanishingConfig::default()).unwrap();

        let mut permuted = segments.clone();
        permuted.rotate_left(1);
        let p = vanishing_point(&permuted, 720, &VanishingConfig::default()).unwrap();
        assert_eq!(p.point, base.point);

        let swapped: Vec<LineSegment> = segments
            .iter()
            .map(|s| LineSegment::new(s.end, s.start))
            .collect();
        let q = vanishing_point(&swapped, 720, &VanishingConfig::default()).unwrap();
        assert!((q.point.u - base.point.u).abs() < 1e-9);
        assert!((q.point.v - base.point.v).abs() < 1e-9);
    }

    #[test]
    fn filters_and_degenerate_cases() {
        let cfg = VanishingConfig::default();
        // Near-horizontal and near-vertical segments are not lane candidates.
        let flat = seg(100.0, 700.0, 500.0, 705.0);
        let steep = seg(300.0, 700.0, 302.0, 400.0);
        assert!(matches!(
            vanishing_point(&[flat, steep], 720, &cfg),
            Err(VisionError::InsufficientLines(0))
        ));
        // Segments above the lower-image region are ignored.
        let high = seg(100.0, 100.0, 300.0, 300.0);
        assert!(matches!(
            vanishing_point(&[high], 720, &cfg),
            Err(VisionError::InsufficientLines(0))
        ));
        // Two parallel lane lines never intersect.
        let a = seg(100.0, 700.0, 400.0, 400.0);
        let b = seg(150.0, 700.0, 450.0, 400.0);
        assert_eq!(vanishing_point(&[a, b], 720, &cfg), Err(VisionError::IllConditioned));
    }
}

//! Progressive probabilistic Hough transform for line-segment extraction.
//!
//! Edge pixels are consumed in random order. Each consumed pixel votes over
//! all angle bins; once a bin clears the vote threshold the detector walks
//! the corresponding line through the edge map (bridging gaps up to
//! `max_gap`), removes the walked pixels and their votes, and keeps the run
//! if it is long enough. Collinear runs are merged and each final segment
//! is refit by total least squares over its supporting pixels, giving
//! sub-pixel endpoints.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::PixelPoint;

use super::image::GrayImage;

/// A detected line segment with sub-pixel endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct LineSegment {
    pub start: PixelPoint,
    pub end: PixelPoint,
}

impl LineSegment {
    pub fn new(start: PixelPoint, end: PixelPoint) -> Self {
        LineSegment { start, end }
    }

    pub fn length(&self) -> f64 {
        (self.end.u - self.start.u).hypot(self.end.v - self.start.v)
    }

    /// Orientation folded into `(-pi/2, pi/2]`, independent of endpoint
    /// order.
    pub fn slope_angle(&self) -> f64 {
        let mut a = (self.end.v - self.start.v).atan2(self.end.u - self.start.u);
        if a <= -std::f64::consts::FRAC_PI_2 {
            a += std::f64::consts::PI;
        } else if a > std::f64::consts::FRAC_PI_2 {
            a -= std::f64::consts::PI;
        }
        a
    }
}

impl From<LineSegment> for [f64; 4] {
    fn from(s: LineSegment) -> Self {
        [s.start.u, s.start.v, s.end.u, s.end.v]
    }
}

impl TryFrom<[f64; 4]> for LineSegment {
    type Error = String;
    fn try_from(v: [f64; 4]) -> Result<Self, String> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err("segment coordinates must be finite".into());
        }
        Ok(LineSegment::new(
            PixelPoint::new(v[0], v[1]),
            PixelPoint::new(v[2], v[3]),
        ))
    }
}

/// Detector parameters; resolutions are pixels and radians.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PphtParams {
    pub rho_res: f64,
    pub theta_res: f64,
    pub vote_thresh: u32,
    pub min_len: f64,
    pub max_gap: f64,
    pub seed: u64,
}

impl Default for PphtParams {
    fn default() -> Self {
        PphtParams {
            rho_res: 1.0,
            theta_res: 1.0f64.to_radians(),
            vote_thresh: 30,
            min_len: 40.0,
            max_gap: 10.0,
            seed: 7,
        }
    }
}

struct Corridor {
    pixels: Vec<(u32, u32)>,
}

struct Fit {
    mean: (f64, f64),
    dir: (f64, f64),
    t_min: f64,
    t_max: f64,
}

impl Fit {
    fn of(pixels: &[(u32, u32)]) -> Fit {
        // Pixel index (x, y) covers the unit square with center
        // (x + 0.5, y + 0.5); fits are in continuous image coordinates.
        let n = pixels.len() as f64;
        let mut mean = (0.0, 0.0);
        for &(x, y) in pixels {
            mean.0 += x as f64 + 0.5;
            mean.1 += y as f64 + 0.5;
        }
        mean.0 /= n;
        mean.1 /= n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for &(x, y) in pixels {
            let dx = x as f64 + 0.5 - mean.0;
            let dy = y as f64 + 0.5 - mean.1;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        // Principal axis of the scatter: total-least-squares direction.
        let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let dir = (angle.cos(), angle.sin());
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        for &(x, y) in pixels {
            let t = (x as f64 - mean.0) * dir.0 + (y as f64 - mean.1) * dir.1;
            t_min = t_min.min(t);
            t_max = t_max.max(t);
        }
        Fit {
            mean,
            dir,
            t_min,
            t_max,
        }
    }

    fn segment(&self) -> LineSegment {
        LineSegment::new(
            PixelPoint::new(
                self.mean.0 + self.t_min * self.dir.0,
                self.mean.1 + self.t_min * self.dir.1,
            ),
            PixelPoint::new(
                self.mean.0 + self.t_max * self.dir.0,
                self.mean.1 + self.t_max * self.dir.1,
            ),
        )
    }

    fn length(&self) -> f64 {
        self.t_max - self.t_min
    }

    fn perp_distance(&self, x: f64, y: f64) -> f64 {
        ((x - self.mean.0) * -self.dir.1 + (y - self.mean.1) * self.dir.0).abs()
    }

    fn angle_to(&self, other: &Fit) -> f64 {
        let cross = self.dir.0 * other.dir.1 - self.dir.1 * other.dir.0;
        let dot = self.dir.0 * other.dir.0 + self.dir.1 * other.dir.1;
        // Fold to line orientation (direction sign is arbitrary).
        cross.atan2(dot).abs().min(std::f64::consts::PI - cross.atan2(dot).abs())
    }
}

/// Extracts line segments from a binary edge map.
///
/// Fixed seeds give byte-identical results; an empty edge map yields an
/// empty list.
pub fn ppht_segments(edges: &GrayImage, params: &PphtParams) -> Vec<LineSegment> {
    assert!(params.rho_res > 0.0 && params.theta_res > 0.0, "resolutions must be positive");
    let width = edges.width() as usize;
    let height = edges.height() as usize;

    let mut points: Vec<(u32, u32)> = Vec::new();
    for y in 0..edges.height() {
        for x in 0..edges.width() {
            if edges.get(x, y) != 0 {
                points.push((x, y));
            }
        }
    }
    if points.is_empty() {
        return Vec::new();
    }

    let num_angle = (std::f64::consts::PI / params.theta_res).round().max(1.0) as usize;
    let trig: Vec<(f64, f64)> = (0..num_angle)
        .map(|i| (i as f64 * params.theta_res).sin_cos())
        .collect();
    let max_rho = (width + height) as f64;
    let num_rho = (2.0 * max_rho / params.rho_res).round() as usize + 1;
    let rho_offset = (num_rho as i64 - 1) / 2;
    let mut accum = vec![0i32; num_angle * num_rho];

    let mut mask = vec![false; width * height];
    for &(x, y) in &points {
        mask[y as usize * width + x as usize] = true;
    }
    let mut voted = vec![false; width * height];

    let rho_index = |x: u32, y: u32, angle: usize| -> usize {
        let (sin_t, cos_t) = trig[angle];
        let rho = x as f64 * cos_t + y as f64 * sin_t;
        ((rho / params.rho_res).round() as i64 + rho_offset) as usize
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut corridors: Vec<Corridor> = Vec::new();

    while !points.is_empty() {
        let pick = rng.gen_range(0..points.len());
        let (px, py) = points.swap_remove(pick);
        let flat = py as usize * width + px as usize;
        if !mask[flat] {
            continue;
        }

        // Vote across every angle bin and remember the strongest line
        // through this pixel.
        voted[flat] = true;
        let mut best_count = -1i32;
        let mut best_angle = 0usize;
        for angle in 0..num_angle {
            let idx = angle * num_rho + rho_index(px, py, angle);
            accum[idx] += 1;
            if accum[idx] > best_count {
                best_count = accum[idx];
                best_angle = angle;
            }
        }
        if best_count < params.vote_thresh as i32 {
            continue;
        }

        // Walk the candidate line in both directions, bridging small gaps.
        let (sin_t, cos_t) = trig[best_angle];
        let dir = (-sin_t, cos_t);
        let mut corridor = vec![(px, py)];
        for sign in [1.0f64, -1.0] {
            let (dx, dy) = (dir.0 * sign, dir.1 * sign);
            let x_major = dx.abs() >= dy.abs();
            let (step_x, step_y) = if x_major {
                (dx.signum(), dy / dx.abs())
            } else {
                (dx / dy.abs(), dy.signum())
            };
            let mut fx = px as f64;
            let mut fy = py as f64;
            let mut gap = 0.0;
            loop {
                fx += step_x;
                fy += step_y;
                let xi = fx.round() as i64;
                let yi = fy.round() as i64;
                if xi < 0 || yi < 0 || xi >= width as i64 || yi >= height as i64 {
                    break;
                }
                // Tolerate one pixel of perpendicular drift from angle
                // quantization.
                let candidates: [(i64, i64); 3] = if x_major {
                    [(xi, yi), (xi, yi - 1), (xi, yi + 1)]
                } else {
                    [(xi, yi), (xi - 1, yi), (xi + 1, yi)]
                };
                let mut found = None;
                for &(cx, cy) in &candidates {
                    if cx < 0 || cy < 0 || cx >= width as i64 || cy >= height as i64 {
                        continue;
                    }
                    if mask[cy as usize * width + cx as usize] {
                        found = Some((cx as u32, cy as u32));
                        break;
                    }
                }
                match found {
                    Some(p) => {
                        if !corridor.contains(&p) {
                            corridor.push(p);
                        }
                        gap = 0.0;
                    }
                    None => {
                        gap += 1.0;
                        if gap > params.max_gap {
                            break;
                        }
                    }
                }
            }
        }

        // Consume the corridor: pixels leave the map and any votes they
        // cast are withdrawn.
        for &(x, y) in &corridor {
            let flat = y as usize * width + x as usize;
            mask[flat] = false;
            if voted[flat] {
                voted[flat] = false;
                for angle in 0..num_angle {
                    accum[angle * num_rho + rho_index(x, y, angle)] -= 1;
                }
            }
        }

        if corridor.len() >= 5 {
            corridors.push(Corridor { pixels: corridor });
        }
    }

    merge_collinear(&mut corridors, params);

    let mut segments: Vec<LineSegment> = corridors
        .iter()
        .map(|c| Fit::of(&c.pixels))
        .filter(|f| f.length() >= params.min_len)
        .map(|f| f.segment())
        .collect();
    segments.sort_by(|a, b| {
        (a.start.v, a.start.u, a.end.v, a.end.u)
            .partial_cmp(&(b.start.v, b.start.u, b.end.v, b.end.u))
            .unwrap()
    });
    segments
}

/// Repeatedly merges corridors whose fits are near-parallel, collinear, and
/// close along the shared direction.
fn merge_collinear(corridors: &mut Vec<Corridor>, params: &PphtParams) {
    let angle_tol = 2.0 * params.theta_res;
    let dist_tol = 2.0 * params.rho_res;
    loop {
        let fits: Vec<Fit> = corridors.iter().map(|c| Fit::of(&c.pixels)).collect();
        let mut merged: Option<(usize, usize)> = None;
        'outer: for i in 0..corridors.len() {
            for j in (i + 1)..corridors.len() {
                let (a, b) = (&fits[i], &fits[j]);
                if a.angle_to(b) > angle_tol {
                    continue;
                }
                if a.perp_distance(b.mean.0, b.mean.1) > dist_tol
                    || b.perp_distance(a.mean.0, a.mean.1) > dist_tol
                {
                    continue;
                }
                // Gap between the two extents along a's direction.
                let tb0 = (b.mean.0 + b.t_min * b.dir.0 - a.mean.0) * a.dir.0
                    + (b.mean.1 + b.t_min * b.dir.1 - a.mean.1) * a.dir.1;
                let tb1 = (b.mean.0 + b.t_max * b.dir.0 - a.mean.0) * a.dir.0
                    + (b.mean.1 + b.t_max * b.dir.1 - a.mean.1) * a.dir.1;
                let (lo, hi) = (tb0.min(tb1), tb0.max(tb1));
                let gap = (a.t_min - hi).max(lo - a.t_max).max(0.0);
                if gap <= params.max_gap {
                    merged = Some((i, j));
                    break 'outer;
                }
            }
        }
        match merged {
            Some((i, j)) => {
                let absorbed = corridors.remove(j);
                corridors[i].pixels.extend(absorbed.pixels);
            }
            None => break,
        }
    }
}

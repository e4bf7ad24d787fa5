//! Canny edge detection: Gaussian smoothing, Sobel gradients, non-maximum
//! suppression, and hysteresis linking.

use super::image::GrayImage;
use super::VisionError;

/// Runs the full edge chain, returning a binary map (255 = edge).
///
/// Thresholds apply to the Sobel gradient magnitude of the blurred image;
/// weak edges survive only when 8-connected to a strong one. Edges come out
/// one pixel wide along the gradient direction.
pub fn canny_edges(
    img: &GrayImage,
    low_thresh: f64,
    high_thresh: f64,
    blur_sigma: f64,
) -> Result<GrayImage, VisionError> {
    if !(low_thresh > 0.0 && low_thresh < high_thresh) {
        return Err(VisionError::BadThresholds {
            low: low_thresh,
            high: high_thresh,
        });
    }
    if blur_sigma < 0.0 || !blur_sigma.is_finite() {
        return Err(VisionError::BadThresholds {
            low: blur_sigma,
            high: blur_sigma,
        });
    }
    let w = img.width() as usize;
    let h = img.height() as usize;
    let blurred = gaussian_blur(img, blur_sigma);
    let (gx, gy) = sobel(&blurred, w, h);
    let thinned = non_maximum_suppression(&gx, &gy, w, h);
    Ok(hysteresis(&thinned, w, h, low_thresh, high_thresh))
}

/// Separable Gaussian blur with replicated borders; sigma 0 is the identity.
fn gaussian_blur(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let src: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();
    if sigma <= 0.0 {
        return src;
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let clamp = |v: i64, max: usize| v.clamp(0, max as i64 - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sx = clamp(x as i64 + i as i64 - radius, w);
                acc += k * src[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sy = clamp(y as i64 + i as i64 - radius, h);
                acc += k * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// 3x3 Sobel gradients; the one-pixel border stays zero.
fn sobel(src: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let p = |dx: i64, dy: i64| {
                src[(y as i64 + dy) as usize * w + (x as i64 + dx) as usize]
            };
            gx[y * w + x] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gy[y * w + x] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        }
    }
    (gx, gy)
}

/// Keeps only pixels that are local maxima along the gradient direction,
/// quantized to the four principal orientations.
fn non_maximum_suppression(gx: &[f64], gy: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let idx = y * w + x;
            let mag = gx[idx].hypot(gy[idx]);
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy[idx].atan2(gx[idx]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (a, b) = if !(22.5..157.5).contains(&angle) {
                (idx - 1, idx + 1)
            } else if angle < 67.5 {
                (idx - w - 1, idx + w + 1)
            } else if angle < 112.5 {
                (idx - w, idx + w)
            } else {
                (idx - w + 1, idx + w - 1)
            };
            let mag_at = |i: usize| gx[i].hypot(gy[i]);
            if mag >= mag_at(a) && mag >= mag_at(b) {
                out[idx] = mag;
            }
        }
    }
    out
}

/// Binary edge map via hysteresis: strong pixels seed a flood fill over
/// 8-connected weak pixels.
fn hysteresis(mag: &[f64], w: usize, h: usize, low: f64, high: f64) -> GrayImage {
    let mut out = GrayImage::new(w as u32, h as u32);
    let mut stack = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            if mag[y * w + x] >= high && out.get(x as u32, y as u32) == 0 {
                out.set(x as u32, y as u32, 255);
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let nx = cx as i64 + dx;
                            let ny = cy as i64 + dy;
                            if nx < 1 || ny < 1 || nx >= w as i64 - 1 || ny >= h as i64 - 1 {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if mag[ny * w + nx] >= low && out.get(nx as u32, ny as u32) == 0 {
                                out.set(nx as u32, ny as u32, 255);
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

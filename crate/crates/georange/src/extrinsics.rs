//! Camera self-calibration: pitch from the lane vanishing point and mount
//! height from an intercept-theorem relation against a measured range.
//!
//! Pitch is positive when the vanishing point sits below the principal
//! point (camera tilted up), matching the ground-plane projection
//! convention. The height solve is exact when fed the forward distance
//! along the road surface; [`height_from_depth_range`] first converts a
//! camera-depth range (what size-ratio ranging measures) into that forward
//! distance.

use serde::Serialize;
use thiserror::Error;

use crate::camera::{CameraIntrinsics, PixelPoint};
use crate::groundplane::CameraExtrinsics;
use crate::vision::VanishingPoint;

#[derive(Debug, Error, PartialEq)]
pub enum ExtrinsicsError {
    #[error("anchor sits at or above the horizon for this pitch: height undefined")]
    HorizonAnchor,
    #[error("inputs yield a non-positive mount height")]
    NonPositiveHeight,
}

/// Camera pitch implied by the vanishing point of forward road lines.
pub fn pitch_from_vp(vp: &VanishingPoint, k: &CameraIntrinsics) -> f64 {
    (vp.point.v - k.principal().1).atan2(k.focal_px())
}

/// Mount height from the anchor pixel of a target at a known forward
/// ground distance.
///
/// `forward_m` is measured along the road surface from the point beneath
/// the camera. At zero pitch this reduces to `drop * d / f`.
pub fn height_from_thales(
    forward_m: f64,
    anchor: PixelPoint,
    pitch_rad: f64,
    k: &CameraIntrinsics,
) -> Result<f64, ExtrinsicsError> {
    assert!(forward_m > 0.0, "forward distance must be positive");
    let drop = anchor.v - k.principal().1;
    let f = k.focal_px();
    let (sin_p, cos_p) = pitch_rad.sin_cos();
    let denom = drop * sin_p + f * cos_p;
    if denom <= 0.0 {
        return Err(ExtrinsicsError::HorizonAnchor);
    }
    let height = forward_m * (drop * cos_p - f * sin_p) / denom;
    if height <= 0.0 {
        return Err(ExtrinsicsError::NonPositiveHeight);
    }
    Ok(height)
}

/// Mount height from a camera-depth range (e.g. a size-ratio distance).
///
/// Depth and road-surface forward distance coincide at zero pitch but
/// diverge with tilt; the conversion depends on the height itself, so the
/// solve iterates the strongly contracting fixed point a few times.
pub fn height_from_depth_range(
    depth_m: f64,
    anchor: PixelPoint,
    pitch_rad: f64,
    k: &CameraIntrinsics,
) -> Result<f64, ExtrinsicsError> {
    let (sin_p, cos_p) = pitch_rad.sin_cos();
    let mut height = height_from_thales(depth_m, anchor, pitch_rad, k)?;
    for _ in 0..4 {
        let forward = (depth_m + height * sin_p) / cos_p;
        if forward <= 0.0 {
            return Err(ExtrinsicsError::NonPositiveHeight);
        }
        height = height_from_thales(forward, anchor, pitch_rad, k)?;
    }
    Ok(height)
}

/// Calibration schedule configuration.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationConfig {
    /// Running-median window length, in frames with usable observations.
    pub window: usize,
    /// Window spread below which the pitch estimate freezes, radians.
    pub pitch_freeze_tol_rad: f64,
    /// Window spread below which the height estimate freezes, meters.
    pub height_freeze_tol_m: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            window: 15,
            pitch_freeze_tol_rad: 0.2f64.to_radians(),
            height_freeze_tol_m: 0.05,
        }
    }
}

/// One frame's calibration state, kept for the run report.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationSample {
    pub t: f64,
    pub pitch_rad: Option<f64>,
    pub height_m: Option<f64>,
    pub vp_dispersion_px: Option<f64>,
    pub pitch_median_rad: Option<f64>,
    pub height_median_m: Option<f64>,
    pub frozen: bool,
}

/// Per-frame pitch/height estimation with running-median smoothing.
///
/// Estimates freeze once both windows are full and their spreads fall
/// under the configured tolerances; frames without a vanishing point keep
/// using the latest value.
#[derive(Debug)]
pub struct Calibrator {
    cfg: CalibrationConfig,
    pitches: Vec<f64>,
    heights: Vec<f64>,
    frozen: Option<CameraExtrinsics>,
    samples: Vec<CalibrationSample>,
}

impl Calibrator {
    pub fn new(cfg: CalibrationConfig) -> Self {
        Calibrator {
            cfg,
            pitches: Vec::new(),
            heights: Vec::new(),
            frozen: None,
            samples: Vec::new(),
        }
    }

    /// Feeds one frame's vanishing point and ranged anchor (depth from
    /// size-ratio ranging plus the anchor pixel it was measured at).
    pub fn observe(
        &mut self,
        t: f64,
        vp: Option<&VanishingPoint>,
        ranged_anchor: Option<(f64, PixelPoint)>,
        k: &CameraIntrinsics,
    ) {
        let mut pitch = None;
        let mut height = None;
        if self.frozen.is_none() {
            if let Some(vp) = vp {
                let p = pitch_from_vp(vp, k);
                if p.abs() < std::f64::consts::FRAC_PI_4 {
                    pitch = Some(p);
                    if let Some((depth_m, anchor)) = ranged_anchor {
                        if depth_m > 0.0 {
                            height = height_from_depth_range(depth_m, anchor, p, k).ok();
                        }
                    }
                }
            }
            if let Some(p) = pitch {
                push_window(&mut self.pitches, p, self.cfg.window);
            }
            if let Some(h) = height {
                push_window(&mut self.heights, h, self.cfg.window);
            }
            self.try_freeze();
        }
        self.samples.push(CalibrationSample {
            t,
            pitch_rad: pitch,
            height_m: height,
            vp_dispersion_px: vp.map(|v| v.dispersion_px),
            pitch_median_rad: median_of(&self.pitches),
            height_median_m: median_of(&self.heights),
            frozen: self.frozen.is_some(),
        });
    }

    fn try_freeze(&mut self) {
        if self.pitches.len() < self.cfg.window || self.heights.len() < self.cfg.window {
            return;
        }
        if spread(&self.pitches) <= self.cfg.pitch_freeze_tol_rad
            && spread(&self.heights) <= self.cfg.height_freeze_tol_m
        {
            self.frozen = self.current();
        }
    }

    /// Best extrinsics available right now: the frozen pair, else the
    /// running medians, else nothing.
    pub fn current(&self) -> Option<CameraExtrinsics> {
        if let Some(ext) = self.frozen {
            return Some(ext);
        }
        let pitch = median_of(&self.pitches)?;
        let height = median_of(&self.heights)?;
        CameraExtrinsics::new(pitch, height).ok()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    pub fn samples(&self) -> &[CalibrationSample] {
        &self.samples
    }

    /// Plain-text per-frame report of the calibration schedule.
    pub fn report(&self) -> String {
        let mut out = String::from(
            "frame_t pitch_deg height_m vp_dispersion_px pitch_median_deg height_median_m frozen\n",
        );
        let fmt = |v: Option<f64>, scale: f64| match v {
            Some(x) => format!("{:.4}", x * scale),
            None => "-".to_string(),
        };
        for s in &self.samples {
            out.push_str(&format!(
                "{:.3} {} {} {} {} {} {}\n",
                s.t,
                fmt(s.pitch_rad, 180.0 / std::f64::consts::PI),
                fmt(s.height_m, 1.0),
                fmt(s.vp_dispersion_px, 1.0),
                fmt(s.pitch_median_rad, 180.0 / std::f64::consts::PI),
                fmt(s.height_median_m, 1.0),
                if s.frozen { "yes" } else { "no" },
            ));
        }
        match self.current() {
            Some(ext) => out.push_str(&format!(
                "final: pitch_deg={:.4} height_m={:.4} frozen={}\n",
                ext.pitch_rad.to_degrees(),
                ext.height_m,
                self.is_frozen(),
            )),
            None => out.push_str("final: no calibration available\n"),
        }
        out
    }
}

fn push_window(window: &mut Vec<f64>, value: f64, cap: usize) {
    window.push(value);
    if window.len() > cap {
        window.remove(0);
    }
}

fn median_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

fn spread(values: &[f64]) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    max - min
}

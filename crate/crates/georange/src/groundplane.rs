//! Back-projection of image pixels onto the flat road plane.
//!
//! The world frame sits on the road surface below the camera: `lateral`
//! grows to the right, `forward` along the optical axis's ground trace, and
//! height is identically zero on the plane. Pitch is positive when the
//! camera tilts up (equivalently, when the horizon sits below the image
//! center); the sign convention is pinned by the projection round-trip
//! tests against [`crate::camera::project_ground_point`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, PixelPoint};
use crate::ranging::{RangeMeasurement, Side};

/// Rays whose ground-plane scale denominator falls at or below this are
/// treated as horizon rays; beyond it the intersection distance blows up.
pub const HORIZON_EPS: f64 = 1e-12;

/// Lateral offsets under this many meters count as "same lane" dead ahead.
pub const SAME_LANE_LATERAL_M: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum GroundPlaneError {
    #[error("pixel at or above the horizon: viewing ray never meets the road")]
    HorizonRay,
    #[error("invalid extrinsics: {0}")]
    InvalidExtrinsics(String),
}

/// Camera pose relative to the road: pitch about the lateral axis and
/// mounting height above the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub pitch_rad: f64,
    pub height_m: f64,
}

impl CameraExtrinsics {
    /// Validated constructor: height positive, |pitch| under 45 degrees
    /// (anything beyond is not a dash-mounted forward camera).
    pub fn new(pitch_rad: f64, height_m: f64) -> Result<Self, GroundPlaneError> {
        if !height_m.is_finite() || height_m <= 0.0 {
            return Err(GroundPlaneError::InvalidExtrinsics(format!(
                "mount height must be positive, got {height_m}"
            )));
        }
        if !pitch_rad.is_finite() || pitch_rad.abs() >= std::f64::consts::FRAC_PI_4 {
            return Err(GroundPlaneError::InvalidExtrinsics(format!(
                "pitch {pitch_rad} rad outside (-pi/4, pi/4)"
            )));
        }
        Ok(CameraExtrinsics {
            pitch_rad,
            height_m,
        })
    }
}

/// A point on the road plane in the camera's ground frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPoint {
    /// Meters to the right of the camera's forward ground trace.
    pub lateral_m: f64,
    /// Meters ahead of the camera's ground foot.
    pub forward_m: f64,
}

impl GroundPoint {
    pub fn new(lateral_m: f64, forward_m: f64) -> Self {
        GroundPoint {
            lateral_m,
            forward_m,
        }
    }
}

/// Intersects the viewing ray through pixel `p` with the road plane.
///
/// Returns `HorizonRay` when the ray points at or above the horizon and so
/// never descends to the road.
pub fn back_project(
    p: PixelPoint,
    ext: &CameraExtrinsics,
    k: &CameraIntrinsics,
) -> Result<GroundPoint, GroundPlaneError> {
    let (h1, h2) = k.principal();
    let f = k.focal_px();
    let (sin_p, cos_p) = ext.pitch_rad.sin_cos();
    // Pixels below the principal point.
    let drop = p.v - h2;
    // Descent rate of the ray; positive means it meets the road ahead.
    let denom = cos_p * drop - sin_p * f;
    if denom <= HORIZON_EPS {
        return Err(GroundPlaneError::HorizonRay);
    }
    let scale = ext.height_m / denom;
    Ok(GroundPoint {
        lateral_m: scale * (p.u - h1),
        forward_m: scale * (sin_p * drop + cos_p * f),
    })
}

/// Planar range and signed view angle of a ground point.
///
/// The angle is measured off the forward axis, positive to the right, so it
/// degenerates continuously to zero for a dead-ahead target.
pub fn range_and_angle(w: GroundPoint) -> RangeMeasurement {
    assert!(w.forward_m > 0.0, "ground point must lie ahead of the camera");
    let distance_m = w.lateral_m.hypot(w.forward_m);
    let angle_rad = (w.lateral_m.abs() / w.forward_m).atan().copysign(w.lateral_m);
    let side = if w.lateral_m.abs() < SAME_LANE_LATERAL_M {
        Side::Same
    } else if w.lateral_m < 0.0 {
        Side::Left
    } else {
        Side::Right
    };
    RangeMeasurement {
        distance_m,
        angle_rad,
        side,
    }
}

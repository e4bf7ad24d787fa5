//! Pinhole camera model: intrinsics derived from the horizontal field of
//! view, pixel/ray conversions, and forward projection of road-plane points
//! (the exact inverse of [`crate::groundplane::back_project`]).
//!
//! Pixel coordinates run right/down from the top-left corner; camera-frame
//! rays are right/up/forward. All coordinates are continuous sub-pixel
//! values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groundplane::{CameraExtrinsics, GroundPlaneError, GroundPoint};

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("horizontal field of view must lie in (0, pi), got {0} rad")]
    InvalidFov(f64),
    #[error("image dimensions must be positive")]
    EmptyImage,
    #[error("point lies behind the camera plane")]
    BehindCamera,
    #[error("camera config: {0}")]
    BadConfig(String),
}

/// A continuous pixel position, `u` rightward and `v` downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        PixelPoint { u, v }
    }
}

/// A viewing direction in the camera frame; `z` always equals the focal
/// length, so the ray is in one-to-one correspondence with a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRay {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Intrinsic parameters of an ideal pinhole camera.
///
/// Focal length and the per-pixel angle are deterministic functions of the
/// resolution and the horizontal field of view; they are precomputed here
/// and never drift from their defining relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    width_px: u32,
    height_px: u32,
    fov_h_rad: f64,
    focal_px: f64,
    principal: (f64, f64),
    rad_per_px: f64,
}

impl CameraIntrinsics {
    /// Builds intrinsics from resolution and horizontal field of view:
    /// `f = width / (2 tan(fov/2))`, per-pixel angle `fov / width`,
    /// principal point at the image center.
    pub fn from_fov(width_px: u32, height_px: u32, fov_h_rad: f64) -> Result<Self, CameraError> {
        if width_px == 0 || height_px == 0 {
            return Err(CameraError::EmptyImage);
        }
        if !(fov_h_rad > 0.0 && fov_h_rad < std::f64::consts::PI) {
            return Err(CameraError::InvalidFov(fov_h_rad));
        }
        let focal_px = width_px as f64 / (2.0 * (fov_h_rad / 2.0).tan());
        Ok(CameraIntrinsics {
            width_px,
            height_px,
            fov_h_rad,
            focal_px,
            principal: (width_px as f64 / 2.0, height_px as f64 / 2.0),
            rad_per_px: fov_h_rad / width_px as f64,
        })
    }

    /// Overrides the principal point (for calibrated cameras).
    pub fn with_principal(mut self, u: f64, v: f64) -> Self {
        self.principal = (u, v);
        self
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn fov_h_rad(&self) -> f64 {
        self.fov_h_rad
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.focal_px
    }

    /// Principal point `(u, v)`.
    pub fn principal(&self) -> (f64, f64) {
        self.principal
    }

    /// Horizontal view angle subtended by one pixel, in radians.
    pub fn rad_per_px(&self) -> f64 {
        self.rad_per_px
    }

    /// Whether a pixel falls inside the image bounds.
    pub fn in_frame(&self, p: PixelPoint) -> bool {
        p.u >= 0.0 && p.u <= self.width_px as f64 && p.v >= 0.0 && p.v <= self.height_px as f64
    }
}

/// Result of projecting a world point: the continuous pixel, its depth along
/// the optical axis, and whether it landed inside the frame. Off-frame
/// pixels are reported as-is, never clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: PixelPoint,
    pub depth_m: f64,
    pub in_frame: bool,
}

/// Camera-frame ray through a pixel: right/up offsets from the principal
/// point at focal-length depth.
pub fn pixel_to_camera_ray(p: PixelPoint, k: &CameraIntrinsics) -> CameraRay {
    let (h1, h2) = k.principal();
    CameraRay {
        x: p.u - h1,
        y: -(p.v - h2),
        z: k.focal_px(),
    }
}

/// Inverse of [`pixel_to_camera_ray`].
pub fn camera_ray_to_pixel(ray: CameraRay, k: &CameraIntrinsics) -> PixelPoint {
    let (h1, h2) = k.principal();
    PixelPoint {
        u: h1 + ray.x,
        v: h2 - ray.y,
    }
}

/// Projects a road-plane point through the pitched camera into the image.
///
/// Errors with `BehindCamera` when the point's depth after the pitch
/// rotation is non-positive.
pub fn project_ground_point(
    w: GroundPoint,
    ext: &CameraExtrinsics,
    k: &CameraIntrinsics,
) -> Result<Projection, CameraError> {
    let (sin_p, cos_p) = ext.pitch_rad.sin_cos();
    // Vector from camera center to the ground point, in road-aligned axes.
    let dx = w.lateral_m;
    let dy = -ext.height_m;
    let dz = w.forward_m;
    // Rotate into the pitched camera frame.
    let cam_y = cos_p * dy - sin_p * dz;
    let cam_z = sin_p * dy + cos_p * dz;
    if cam_z <= 0.0 {
        return Err(CameraError::BehindCamera);
    }
    let (h1, h2) = k.principal();
    let f = k.focal_px();
    let pixel = PixelPoint {
        u: h1 + f * dx / cam_z,
        v: h2 - f * cam_y / cam_z,
    };
    Ok(Projection {
        pixel,
        depth_m: cam_z,
        in_frame: k.in_frame(pixel),
    })
}

/// Camera description as read from a config file. Angles are degrees on
/// disk and converted at the boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraConfig {
    pub n_h: u32,
    pub n_v: u32,
    pub fov_h_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mount_height_m: Option<f64>,
}

impl CameraConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CameraError> {
        toml::from_str(text).map_err(|e| CameraError::BadConfig(e.to_string()))
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, CameraError> {
        let k = CameraIntrinsics::from_fov(self.n_h, self.n_v, self.fov_h_deg.to_radians())?;
        Ok(match self.principal {
            Some([u, v]) => k.with_principal(u, v),
            None => k,
        })
    }

    /// Fixed extrinsics, if the file pins both pitch and mount height.
    /// Specifying only one of the two is a config error.
    pub fn fixed_extrinsics(&self) -> Result<Option<CameraExtrinsics>, CameraError> {
        match (self.pitch_deg, self.mount_height_m) {
            (None, None) => Ok(None),
            (Some(p), Some(h)) => CameraExtrinsics::new(p.to_radians(), h)
                .map(Some)
                .map_err(|e: GroundPlaneError| CameraError::BadConfig(e.to_string())),
            _ => Err(CameraError::BadConfig(
                "pitch_deg and mount_height_m must be given together".into(),
            )),
        }
    }
}

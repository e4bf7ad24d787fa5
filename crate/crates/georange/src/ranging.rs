//! Size-ratio ranging from bounding boxes and the pixel-offset view angle.
//!
//! Distance comes from the pinhole similar-triangle relation applied to the
//! known physical width and height of the detected vehicle class, blended
//! 85% height / 15% width by default. The view angle is the signed
//! horizontal pixel count from the principal point times the per-pixel
//! angle, measured at the box's bottom-center anchor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, PixelPoint};

/// Weight of the height-derived distance in the blended estimate.
pub const DEFAULT_HEIGHT_WEIGHT: f64 = 0.85;

/// Boxes need at least this many pixels per side to carry range information.
pub const MIN_BOX_PX: f64 = 2.0;

/// Horizontal pixel offsets under this count as "same lane".
pub const SAME_LANE_PX: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum RangingError {
    #[error("bounding box under {MIN_BOX_PX} px per side carries no range information")]
    DegenerateBox,
    #[error("no dimension entry for class '{0}'")]
    UnknownClass(String),
    #[error("dimension table: {0}")]
    BadTable(String),
}

/// Which side of the ego vehicle's travel direction the target sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Same,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Same => write!(f, "same"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// An axis-aligned detection box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BoundingBox {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Self {
        BoundingBox {
            u_min,
            v_min,
            u_max,
            v_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    /// Bottom-center point, assumed to rest on the road surface.
    pub fn anchor(&self) -> PixelPoint {
        PixelPoint::new((self.u_min + self.u_max) / 2.0, self.v_max)
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.u_min, b.v_min, b.u_max, b.v_max]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = String;
    fn try_from(v: [f64; 4]) -> Result<Self, String> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err("bounding box coordinates must be finite".into());
        }
        Ok(BoundingBox::new(v[0], v[1], v[2], v[3]))
    }
}

/// One detected vehicle in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub target_id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub bbox: BoundingBox,
}

/// Physical extents of a vehicle class, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleDims {
    pub width_m: f64,
    pub height_m: f64,
}

/// Class-label to physical-size lookup.
///
/// The built-in entries are configuration defaults, not ground truth; any
/// run can replace them from a file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimsTable {
    pub classes: BTreeMap<String, VehicleDims>,
}

impl Default for DimsTable {
    fn default() -> Self {
        let mut classes = BTreeMap::new();
        classes.insert(
            "car".to_string(),
            VehicleDims {
                width_m: 1.8,
                height_m: 1.5,
            },
        );
        classes.insert(
            "van".to_string(),
            VehicleDims {
                width_m: 2.0,
                height_m: 2.2,
            },
        );
        classes.insert(
            "truck".to_string(),
            VehicleDims {
                width_m: 2.5,
                height_m: 3.2,
            },
        );
        DimsTable { classes }
    }
}

impl DimsTable {
    pub fn from_toml_str(text: &str) -> Result<Self, RangingError> {
        let table: DimsTable =
            toml::from_str(text).map_err(|e| RangingError::BadTable(e.to_string()))?;
        for (label, dims) in &table.classes {
            if !dims.width_m.is_finite()
                || dims.width_m <= 0.0
                || !dims.height_m.is_finite()
                || dims.height_m <= 0.0
            {
                return Err(RangingError::BadTable(format!(
                    "class '{label}' has non-positive dimensions"
                )));
            }
        }
        Ok(table)
    }

    pub fn get(&self, class_label: &str) -> Result<VehicleDims, RangingError> {
        self.classes
            .get(class_label)
            .copied()
            .ok_or_else(|| RangingError::UnknownClass(class_label.to_string()))
    }
}

/// A per-detection range and view-angle measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub distance_m: f64,
    /// Signed view angle off the travel direction; negative is left.
    pub angle_rad: f64,
    pub side: Side,
}

/// Blended size-ratio distance with an explicit height weight.
pub fn distance_from_bbox_weighted(
    bbox: &BoundingBox,
    dims: VehicleDims,
    k: &CameraIntrinsics,
    height_weight: f64,
) -> Result<f64, RangingError> {
    if bbox.width() < MIN_BOX_PX || bbox.height() < MIN_BOX_PX {
        return Err(RangingError::DegenerateBox);
    }
    let d_width = k.focal_px() * dims.width_m / bbox.width();
    let d_height = k.focal_px() * dims.height_m / bbox.height();
    Ok(height_weight * d_height + (1.0 - height_weight) * d_width)
}

/// Blended size-ratio distance at the default 85/15 height/width weights.
pub fn distance_from_bbox(
    bbox: &BoundingBox,
    dims: VehicleDims,
    k: &CameraIntrinsics,
) -> Result<f64, RangingError> {
    distance_from_bbox_weighted(bbox, dims, k, DEFAULT_HEIGHT_WEIGHT)
}

/// Signed view angle of the box anchor and the side label it implies.
pub fn offset_angle(bbox: &BoundingBox, k: &CameraIntrinsics) -> (f64, Side) {
    let pixel_offset = bbox.anchor().u - k.principal().0;
    let angle = pixel_offset * k.rad_per_px();
    let side = if pixel_offset.abs() < SAME_LANE_PX {
        Side::Same
    } else if pixel_offset < 0.0 {
        Side::Left
    } else {
        Side::Right
    };
    (angle, side)
}

/// Full per-detection measurement: class lookup, blended distance, angle.
pub fn measure_detection(
    det: &Detection,
    table: &DimsTable,
    k: &CameraIntrinsics,
) -> Result<RangeMeasurement, RangingError> {
    let dims = table.get(&det.class_label)?;
    let distance_m = distance_from_bbox(&det.bbox, dims, k)?;
    let (angle_rad, side) = offset_angle(&det.bbox, k);
    Ok(RangeMeasurement {
        distance_m,
        angle_rad,
        side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_camera() -> CameraIntrinsics {
        CameraIntrinsics::from_fov(960, 720, 86.7f64.to_radians()).unwrap()
    }

    fn car() -> VehicleDims {
        VehicleDims {
            width_m: 1.8,
            height_m: 1.5,
        }
    }

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "actual={actual} expected={expected} tol={tol}"
        );
    }

    #[test]
    fn agreeing_components_make_weights_irrelevant() {
        // 60x50 px box of a 1.8x1.5 m car: width and height both give
        // f * size / px = 15.254 m.
        let k = test_camera();
        let bbox = BoundingBox::new(100.0, 100.0, 160.0, 150.0);
        let d = distance_from_bbox(&bbox, car(), &k).unwrap();
        assert_close(d, 15.254216276213006, 1e-9);
        let d_other = distance_from_bbox_weighted(&bbox, car(), &k, 0.3).unwrap();
        assert_close(d_other, d, 1e-12);
    }

    #[test]
    fn blended_distance_weighting() {
        // 90x50 px box: width route 10.17 m, height route 15.25 m.
        let k = test_camera();
        let bbox = BoundingBox::new(100.0, 100.0, 190.0, 150.0);
        let d = distance_from_bbox(&bbox, car(), &k).unwrap();
        assert_close(d, 14.491505462402355, 1e-9);
    }

    #[test]
    fn doubling_box_halves_distance() {
        let k = test_camera();
        let small = BoundingBox::new(0.0, 0.0, 45.0, 30.0);
        let big = BoundingBox::new(0.0, 0.0, 90.0, 60.0);
        let d_small = distance_from_bbox(&small, car(), &k).unwrap();
        let d_big = distance_from_bbox(&big, car(), &k).unwrap();
        assert_close(d_big, d_small / 2.0, 1e-12);
        // And doubling the physical dims doubles the distance.
        let double_car = VehicleDims {
            width_m: 3.6,
            height_m: 3.0,
        };
        let d2 = distance_from_bbox(&small, double_car, &k).unwrap();
        assert_close(d2, 2.0 * d_small, 1e-12);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        let k = test_camera();
        for bbox in [
            BoundingBox::new(10.0, 10.0, 10.0, 50.0),
            BoundingBox::new(10.0, 10.0, 50.0, 11.0),
            BoundingBox::new(10.0, 10.0, 11.9, 50.0),
        ] {
            assert_eq!(
                distance_from_bbox(&bbox, car(), &k),
                Err(RangingError::DegenerateBox)
            );
        }
    }

    #[test]
    fn offset_angle_sign_and_linearity() {
        let k = test_camera();
        let (h1, _) = k.principal();

        let centered = BoundingBox::new(h1 - 30.0, 100.0, h1 + 30.0, 150.0);
        let (theta, side) = offset_angle(&centered, &k);
        assert_eq!(theta, 0.0);
        assert_eq!(side, Side::Same);

        // Anchor 100 px right of center: 100 * 0.0903125 degrees.
        let right = BoundingBox::new(h1 + 70.0, 100.0, h1 + 130.0, 150.0);
        let (theta_r, side_r) = offset_angle(&right, &k);
        assert_close(theta_r.to_degrees(), 9.03125, 1e-9);
        assert_eq!(side_r, Side::Right);

        let left = BoundingBox::new(h1 - 130.0, 100.0, h1 - 70.0, 150.0);
        let (theta_l, side_l) = offset_angle(&left, &k);
        assert_close(theta_l, -theta_r, 0.0);
        assert_eq!(side_l, Side::Left);
    }

    #[test]
    fn in_frame_angles_bounded_by_half_fov() {
        let k = test_camera();
        for u in [0.0, 100.0, 480.0, 959.0, 960.0] {
            let bbox = BoundingBox::new(u - 5.0, 0.0, u + 5.0, 10.0);
            let (theta, _) = offset_angle(&bbox, &k);
            assert!(theta.abs() <= k.fov_h_rad() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn table_lookup_and_parsing() {
        let table = DimsTable::default();
        assert!(table.get("car").is_ok());
        assert_eq!(
            table.get("bicycle"),
            Err(RangingError::UnknownClass("bicycle".into()))
        );

        let parsed = DimsTable::from_toml_str(
            "[classes.bus]\nwidth_m = 2.5\nheight_m = 3.0\n",
        )
        .unwrap();
        assert_eq!(parsed.get("bus").unwrap().height_m, 3.0);

        assert!(DimsTable::from_toml_str("[classes.bad]\nwidth_m = -1\nheight_m = 2\n").is_err());
    }

    #[test]
    fn measure_detection_wires_everything() {
        let k = test_camera();
        let det = Detection {
            target_id: "v1".into(),
            class_label: "car".into(),
            bbox: BoundingBox::new(450.0, 300.0, 510.0, 350.0),
        };
        let m = measure_detection(&det, &DimsTable::default(), &k).unwrap();
        assert_close(m.distance_m, 15.254216276213006, 1e-9);
        assert_eq!(m.side, Side::Same);
    }
}

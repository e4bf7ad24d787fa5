//! Spherical-earth geodesy: bearings, destination points, great-circle
//! distances, and local ENU decompositions of small offsets.
//!
//! All angles are radians and all distances are meters internally; degrees
//! appear only in [`GeoPoint`]'s constructor/accessors and serialized forms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters, used by the default [`EarthModel`].
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Two points closer than this (in degrees, per axis) have no defined bearing.
pub const COINCIDENT_EPS_DEG: f64 = 1e-12;

/// Maximum separation for the flat-plane deviation decomposition.
pub const LOCAL_RANGE_M: f64 = 1_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeodesyError {
    #[error("bearing undefined: points coincide within {COINCIDENT_EPS_DEG} degrees")]
    DegenerateSegment,
    #[error("bearing undefined: points are antipodal")]
    AntipodalSegment,
    #[error("points are {0:.1} m apart, beyond the {LOCAL_RANGE_M} m local-plane range")]
    OutOfLocalRange(f64),
    #[error("latitude {0} out of [-90, 90]")]
    InvalidLatitude(f64),
}

/// A latitude/longitude pair in degrees.
///
/// Latitude is validated into `[-90, 90]` and longitude is normalized into
/// `(-180, 180]` on construction, so every `GeoPoint` in the system upholds
/// both invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint", into = "RawGeoPoint")]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGeoPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = GeodesyError;
    fn try_from(raw: RawGeoPoint) -> Result<Self, GeodesyError> {
        GeoPoint::try_new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawGeoPoint {
    fn from(p: GeoPoint) -> Self {
        RawGeoPoint {
            lat: p.lat_deg,
            lon: p.lon_deg,
        }
    }
}

impl GeoPoint {
    /// Builds a point, normalizing longitude. Panics on an invalid latitude.
    pub fn new(lat_deg: f64, lon_deg: f64) -> Self {
        Self::try_new(lat_deg, lon_deg).expect("latitude out of range")
    }

    /// Fallible constructor for data read from external inputs.
    pub fn try_new(lat_deg: f64, lon_deg: f64) -> Result<Self, GeodesyError> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) || !lon_deg.is_finite() {
            return Err(GeodesyError::InvalidLatitude(lat_deg));
        }
        Ok(GeoPoint {
            lat_deg,
            lon_deg: normalize_lon_deg(lon_deg),
        })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }

    pub fn lat_rad(&self) -> f64 {
        self.lat_deg.to_radians()
    }

    pub fn lon_rad(&self) -> f64 {
        self.lon_deg.to_radians()
    }
}

/// Spherical earth model; only the radius matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub radius_m: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            radius_m: EARTH_RADIUS_M,
        }
    }
}

/// A truth-to-estimate offset split along and across the direction of travel.
///
/// Longitudinal is positive along the heading, lateral is positive to the
/// right of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationVector {
    pub longitudinal_m: f64,
    pub lateral_m: f64,
    pub magnitude_m: f64,
}

/// Wraps a longitude into `(-180, 180]`.
pub fn normalize_lon_deg(lon: f64) -> f64 {
    let mut l = lon % 360.0;
    if l <= -180.0 {
        l += 360.0;
    } else if l > 180.0 {
        l -= 360.0;
    }
    l
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(rad: f64) -> f64 {
    let mut a = rad % std::f64::consts::TAU;
    if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    } else if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}

/// Initial bearing from `start` toward `end`, clockwise from true north,
/// in `(-pi, pi]`.
///
/// Coincident and antipodal pairs are rejected: in both cases the forward
/// azimuth degenerates to `atan2(0, 0)`.
pub fn bearing(start: GeoPoint, end: GeoPoint) -> Result<f64, GeodesyError> {
    let dlat = (end.lat_deg - start.lat_deg).abs();
    let dlon = normalize_lon_deg(end.lon_deg - start.lon_deg).abs();
    if dlat <= COINCIDENT_EPS_DEG && dlon <= COINCIDENT_EPS_DEG {
        return Err(GeodesyError::DegenerateSegment);
    }
    if (end.lat_deg + start.lat_deg).abs() <= COINCIDENT_EPS_DEG
        && (dlon - 180.0).abs() <= COINCIDENT_EPS_DEG
    {
        return Err(GeodesyError::AntipodalSegment);
    }

    let lat1 = start.lat_rad();
    let lat2 = end.lat_rad();
    let dlon = end.lon_rad() - start.lon_rad();
    let east = dlon.sin() * lat2.cos();
    let north = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    Ok(normalize_angle(east.atan2(north)))
}

/// Point reached by travelling `distance_m` from `origin` along the initial
/// bearing `bearing_rad`.
pub fn destination(
    origin: GeoPoint,
    bearing_rad: f64,
    distance_m: f64,
    earth: EarthModel,
) -> GeoPoint {
    assert!(distance_m >= 0.0, "distance must be non-negative");
    let arc = distance_m / earth.radius_m;
    let lat1 = origin.lat_rad();
    let lat2 = (lat1.sin() * arc.cos() + lat1.cos() * arc.sin() * bearing_rad.cos())
        .clamp(-1.0, 1.0)
        .asin();
    let u = bearing_rad.sin() * arc.sin() * lat1.cos();
    let v = arc.cos() - lat1.sin() * lat2.sin();
    let lon2 = origin.lon_rad() + u.atan2(v);
    GeoPoint::new(lat2.to_degrees(), lon2.to_degrees())
}

/// Haversine great-circle distance in meters.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint, earth: EarthModel) -> f64 {
    let lat1 = a.lat_rad();
    let lat2 = b.lat_rad();
    let half_dlat = (lat2 - lat1) / 2.0;
    let half_dlon = normalize_angle(b.lon_rad() - a.lon_rad()) / 2.0;
    let h = half_dlat.sin().powi(2) + lat1.cos() * lat2.cos() * half_dlon.sin().powi(2);
    let arc = 2.0 * h.sqrt().atan2((1.0 - h).max(0.0).sqrt());
    earth.radius_m * arc
}

/// East/north offset of `point` relative to `origin` in a local tangent
/// plane, in meters. Valid for small separations only.
pub fn enu_offset(origin: GeoPoint, point: GeoPoint, earth: EarthModel) -> (f64, f64) {
    let dlat = (point.lat_deg - origin.lat_deg).to_radians();
    let dlon = normalize_lon_deg(point.lon_deg - origin.lon_deg).to_radians();
    let east = earth.radius_m * dlon * origin.lat_rad().cos();
    let north = earth.radius_m * dlat;
    (east, north)
}

/// Inverse of [`enu_offset`]: moves `origin` by a local east/north offset.
pub fn offset_by_enu(origin: GeoPoint, east_m: f64, north_m: f64, earth: EarthModel) -> GeoPoint {
    let dlat = north_m / earth.radius_m;
    let dlon = east_m / (earth.radius_m * origin.lat_rad().cos());
    GeoPoint::new(
        origin.lat_deg + dlat.to_degrees(),
        origin.lon_deg + dlon.to_degrees(),
    )
}

/// Splits the truth-to-estimate offset into components along the truth
/// heading (longitudinal) and its right-perpendicular (lateral).
pub fn decompose_deviation(
    truth: GeoPoint,
    truth_heading_rad: f64,
    estimate: GeoPoint,
    earth: EarthModel,
) -> Result<DeviationVector, GeodesyError> {
    let separation = great_circle_distance(truth, estimate, earth);
    if separation > LOCAL_RANGE_M {
        return Err(GeodesyError::OutOfLocalRange(separation));
    }
    let (east, north) = enu_offset(truth, estimate, earth);
    let (sin_h, cos_h) = truth_heading_rad.sin_cos();
    let longitudinal_m = east * sin_h + north * cos_h;
    let lateral_m = east * cos_h - north * sin_h;
    Ok(DeviationVector {
        longitudinal_m,
        lateral_m,
        magnitude_m: longitudinal_m.hypot(lateral_m),
    })
}

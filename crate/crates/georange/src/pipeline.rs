//! End-to-end per-frame estimation: GPS trace pre-processing, heading
//! extraction, range/angle measurement by either route, and the
//! destination-point solve that places the target on the globe.
//!
//! Runs are two-phase. Phase one walks the trace in time order: it smooths
//! the ego positions, derives headings, and (in auto mode) folds per-frame
//! vanishing points into the calibrator. Phase two estimates every frame
//! independently and may run in parallel; outputs are ordered by frame
//! index, so results are identical at any thread count.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, PixelPoint};
use crate::extrinsics::{CalibrationConfig, Calibrator};
use crate::geodesy::{
    bearing, destination, great_circle_distance, normalize_angle, EarthModel, GeoPoint,
    GeodesyError,
};
use crate::groundplane::{back_project, range_and_angle, CameraExtrinsics, GroundPlaneError};
use crate::ranging::{
    distance_from_bbox, measure_detection, Detection, DimsTable, RangingError, Side,
};
use crate::vision::{
    decode_pgm, detect_vanishing_point, vanishing_point, LineSegment, VanishingPoint,
    VisionConfig, VisionError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("timestamps must be strictly increasing (violated at index {0})")]
    NonMonotoneTrace(usize),
    #[error("frame time {0} lies outside the raw trace span")]
    FrameOutsideTrace(f64),
    #[error("trace has fewer than 2 positions")]
    TraceTooShort,
    #[error("trace never moves; headings are undefined")]
    DegenerateTrace,
    #[error("failed to read image '{path}': {message}")]
    ImageRead { path: String, message: String },
    #[error("smoothing window must be at least 1")]
    BadWindow,
}

/// Which estimation route produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    /// Size-ratio ranging from the detection box.
    Image,
    /// Ground-plane back-projection through the pitched camera.
    Geometric,
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Approach::Image => write!(f, "image"),
            Approach::Geometric => write!(f, "geometric"),
        }
    }
}

/// One video frame's worth of input data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub ego: GeoPoint,
    #[serde(default)]
    pub detections: Vec<Detection>,
    /// Path of a grayscale image for lane-line calibration, relative to the
    /// configured image root.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "image")]
    pub image_ref: Option<String>,
    /// Precomputed vanishing point, bypassing the vision stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vanishing_point: Option<PixelPoint>,
    /// Precomputed line segments, bypassing edge detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<LineSegment>>,
}

/// Pre-processed ego state for one frame.
#[derive(Debug, Clone, Copy)]
pub struct EgoState {
    pub position: GeoPoint,
    pub heading_rad: f64,
    pub speed_mps: f64,
}

/// One per-frame, per-detection, per-approach output.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    pub t: f64,
    pub target_id: String,
    pub approach: Approach,
    pub distance_m: f64,
    /// Signed view angle off the ego heading; negative is left.
    pub offset_angle_rad: f64,
    /// Bearing from true north of the ego-to-target line.
    pub bearing_rad: f64,
    pub position: GeoPoint,
}

/// Serialized form of [`TargetEstimate`]: angles in degrees, explicit
/// lat/lon field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub t: f64,
    pub target_id: String,
    pub approach: Approach,
    pub d_m: f64,
    pub theta_deg: f64,
    pub alpha_deg: f64,
    pub lat: f64,
    pub lon: f64,
}

impl From<&TargetEstimate> for EstimateRecord {
    fn from(e: &TargetEstimate) -> Self {
        EstimateRecord {
            t: e.t,
            target_id: e.target_id.clone(),
            approach: e.approach,
            d_m: e.distance_m,
            theta_deg: e.offset_angle_rad.to_degrees(),
            alpha_deg: e.bearing_rad.to_degrees(),
            lat: e.position.lat_deg(),
            lon: e.position.lon_deg(),
        }
    }
}

impl TryFrom<&EstimateRecord> for TargetEstimate {
    type Error = GeodesyError;
    fn try_from(r: &EstimateRecord) -> Result<Self, GeodesyError> {
        Ok(TargetEstimate {
            t: r.t,
            target_id: r.target_id.clone(),
            approach: r.approach,
            distance_m: r.d_m,
            offset_angle_rad: r.theta_deg.to_radians(),
            bearing_rad: r.alpha_deg.to_radians(),
            position: GeoPoint::try_new(r.lat, r.lon)?,
        })
    }
}

/// Why a detection produced no estimate. Skips never abort the frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedDetection {
    pub t: f64,
    pub target_id: String,
    pub approach: Approach,
    pub reason: String,
}

/// Per-run bookkeeping: skip records and the calibration trail.
#[derive(Debug, Default)]
pub struct RunLog {
    pub detections_seen: usize,
    pub estimates_made: usize,
    pub skips: Vec<SkippedDetection>,
    pub calibration_report: Option<String>,
}

impl RunLog {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "detections: {}\nestimates: {}\nskipped: {}\n",
            self.detections_seen,
            self.estimates_made,
            self.skips.len()
        );
        for s in &self.skips {
            out.push_str(&format!(
                "skip t={:.3} target={} approach={} reason: {}\n",
                s.t, s.target_id, s.approach, s.reason
            ));
        }
        if let Some(report) = &self.calibration_report {
            out.push_str("\ncalibration:\n");
            out.push_str(report);
        }
        out
    }
}

/// Interpolates a raw GPS trace to the frame times, then smooths with a
/// centered moving average.
///
/// The window shrinks symmetrically near the trace ends, so a window of 1
/// is the identity and end points are never dragged inward asymmetrically.
pub fn preprocess_trace(
    raw: &[(f64, GeoPoint)],
    frame_times: &[f64],
    smoothing_window: usize,
) -> Result<Vec<GeoPoint>, PipelineError> {
    if smoothing_window == 0 {
        return Err(PipelineError::BadWindow);
    }
    if raw.len() < 2 {
        return Err(PipelineError::TraceTooShort);
    }
    for i in 1..raw.len() {
        if raw[i].0 <= raw[i - 1].0 {
            return Err(PipelineError::NonMonotoneTrace(i));
        }
    }
    let t_first = raw[0].0;
    let t_last = raw[raw.len() - 1].0;
    let mut interpolated = Vec::with_capacity(frame_times.len());
    for &t in frame_times {
        if t < t_first - 1e-9 || t > t_last + 1e-9 {
            return Err(PipelineError::FrameOutsideTrace(t));
        }
        let idx = raw.partition_point(|&(rt, _)| rt < t);
        let point = if idx == 0 {
            raw[0].1
        } else if idx >= raw.len() {
            raw[raw.len() - 1].1
        } else {
            let (t0, p0) = raw[idx - 1];
            let (t1, p1) = raw[idx];
            let frac = (t - t0) / (t1 - t0);
            GeoPoint::new(
                p0.lat_deg() + frac * (p1.lat_deg() - p0.lat_deg()),
                p0.lon_deg() + frac * (p1.lon_deg() - p0.lon_deg()),
            )
        };
        interpolated.push(point);
    }

    let radius = (smoothing_window - 1) / 2;
    let n = interpolated.len();
    let smoothed = (0..n)
        .map(|i| {
            let r = radius.min(i).min(n - 1 - i);
            let slice = &interpolated[i - r..=i + r];
            let count = slice.len() as f64;
            GeoPoint::new(
                slice.iter().map(|p| p.lat_deg()).sum::<f64>() / count,
                slice.iter().map(|p| p.lon_deg()).sum::<f64>() / count,
            )
        })
        .collect();
    Ok(smoothed)
}

/// Per-frame headings from consecutive positions.
///
/// The first frame inherits the first defined heading; stationary frames
/// carry the previous one forward.
pub fn heading_sequence(positions: &[GeoPoint]) -> Result<Vec<f64>, PipelineError> {
    if positions.len() < 2 {
        return Err(PipelineError::TraceTooShort);
    }
    let mut headings: Vec<Option<f64>> = vec![None; positions.len()];
    let mut last: Option<f64> = None;
    for i in 1..positions.len() {
        if let Ok(b) = bearing(positions[i - 1], positions[i]) {
            last = Some(b);
        }
        headings[i] = last;
    }
    let first_defined = headings
        .iter()
        .flatten()
        .next()
        .copied()
        .ok_or(PipelineError::DegenerateTrace)?;
    Ok(headings
        .into_iter()
        .map(|h| h.unwrap_or(first_defined))
        .collect())
}

/// Combines the ego heading with a measured view angle into the bearing of
/// the ego-to-target line, normalized into `(-pi, pi]`.
pub fn compose_target_bearing(heading_rad: f64, angle_rad: f64, side: Side) -> f64 {
    let alpha = match side {
        Side::Same => heading_rad,
        Side::Left => heading_rad - angle_rad.abs(),
        Side::Right => heading_rad + angle_rad.abs(),
    };
    normalize_angle(alpha)
}

/// Estimates every detection of one frame with the requested approaches.
///
/// Per-detection failures (unknown class, degenerate box, above-horizon
/// anchor, missing calibration) are reported as skips, never as errors.
pub fn estimate_frame(
    frame: &FrameRecord,
    ego: &EgoState,
    k: &CameraIntrinsics,
    dims: Option<&DimsTable>,
    ext: Option<&CameraExtrinsics>,
    approaches: &[Approach],
    earth: EarthModel,
) -> (Vec<TargetEstimate>, Vec<SkippedDetection>) {
    let mut estimates = Vec::new();
    let mut skips = Vec::new();
    for approach in approaches {
        for det in &frame.detections {
            match measure(det, k, dims, ext, *approach) {
                Ok(m) => {
                    let alpha = compose_target_bearing(ego.heading_rad, m.angle_rad, m.side);
                    let position = destination(ego.position, alpha, m.distance_m, earth);
                    estimates.push(TargetEstimate {
                        t: frame.t,
                        target_id: det.target_id.clone(),
                        approach: *approach,
                        distance_m: m.distance_m,
                        offset_angle_rad: m.angle_rad,
                        bearing_rad: alpha,
                        position,
                    });
                }
                Err(reason) => skips.push(SkippedDetection {
                    t: frame.t,
                    target_id: det.target_id.clone(),
                    approach: *approach,
                    reason,
                }),
            }
        }
    }
    (estimates, skips)
}

fn measure(
    det: &Detection,
    k: &CameraIntrinsics,
    dims: Option<&DimsTable>,
    ext: Option<&CameraExtrinsics>,
    approach: Approach,
) -> Result<crate::ranging::RangeMeasurement, String> {
    match approach {
        Approach::Image => {
            let table = dims.ok_or("no dimension table configured")?;
            measure_detection(det, table, k).map_err(|e: RangingError| e.to_string())
        }
        Approach::Geometric => {
            let ext = ext.ok_or("no calibration available for this frame")?;
            let ground = back_project(det.bbox.anchor(), ext, k)
                .map_err(|e: GroundPlaneError| e.to_string())?;
            Ok(range_and_angle(ground))
        }
    }
}

/// How phase-two extrinsics are obtained.
#[derive(Debug, Clone)]
pub enum CalibrationMode {
    /// Use fixed extrinsics for every frame.
    Fixed(CameraExtrinsics),
    /// Estimate per frame from lane lines and running-median smooth.
    Auto(CalibrationConfig),
}

/// Options for a full trace run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub approaches: Vec<Approach>,
    pub smoothing_window: usize,
    pub calibration: CalibrationMode,
    pub vision: VisionConfig,
    pub earth: EarthModel,
    /// Worker threads for per-frame estimation; `None` uses all cores.
    pub threads: Option<usize>,
    /// Base directory for `FrameRecord::image_ref` paths.
    pub image_root: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            approaches: vec![Approach::Image, Approach::Geometric],
            smoothing_window: 3,
            calibration: CalibrationMode::Auto(CalibrationConfig::default()),
            vision: VisionConfig::default(),
            earth: EarthModel::default(),
            threads: None,
            image_root: None,
        }
    }
}

/// A completed run: per-frame ego states, estimates in frame order, and
/// the log.
#[derive(Debug)]
pub struct RunOutput {
    pub ego_states: Vec<EgoState>,
    pub estimates: Vec<TargetEstimate>,
    pub log: RunLog,
}

/// Runs the full two-phase pipeline over a frame trace.
pub fn run_trace(
    frames: &[FrameRecord],
    k: &CameraIntrinsics,
    dims: Option<&DimsTable>,
    opts: &RunOptions,
) -> Result<RunOutput, PipelineError> {
    for i in 1..frames.len() {
        if frames[i].t <= frames[i - 1].t {
            return Err(PipelineError::NonMonotoneTrace(i));
        }
    }
    let raw: Vec<(f64, GeoPoint)> = frames.iter().map(|f| (f.t, f.ego)).collect();
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let positions = preprocess_trace(&raw, &times, opts.smoothing_window)?;
    let headings = heading_sequence(&positions)?;

    let mut speeds = vec![0.0; positions.len()];
    for i in 1..positions.len() {
        let dt = times[i] - times[i - 1];
        speeds[i] = great_circle_distance(positions[i - 1], positions[i], opts.earth) / dt;
    }
    if speeds.len() > 1 {
        speeds[0] = speeds[1];
    }

    let ego_states: Vec<EgoState> = (0..positions.len())
        .map(|i| EgoState {
            position: positions[i],
            heading_rad: headings[i],
            speed_mps: speeds[i],
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .expect("thread pool");

    // Phase one (sequential in frame order): calibration.
    let (frame_ext, calibration_report) = match &opts.calibration {
        CalibrationMode::Fixed(ext) => (vec![Some(*ext); frames.len()], None),
        CalibrationMode::Auto(cfg) => {
            let vps = pool.install(|| frame_vanishing_points(frames, opts))?;
            let mut calibrator = Calibrator::new(*cfg);
            let mut per_frame = Vec::with_capacity(frames.len());
            for (frame, vp) in frames.iter().zip(&vps) {
                let ranged = dims.and_then(|table| best_ranged_anchor(frame, table, k));
                calibrator.observe(frame.t, vp.as_ref(), ranged, k);
                per_frame.push(calibrator.current());
            }
            (per_frame, Some(calibrator.report()))
        }
    };

    // Phase two (parallel, order restored by index).
    let per_frame: Vec<(Vec<TargetEstimate>, Vec<SkippedDetection>)> = pool.install(|| {
        frames
            .par_iter()
            .enumerate()
            .map(|(i, frame)| {
                estimate_frame(
                    frame,
                    &ego_states[i],
                    k,
                    dims,
                    frame_ext[i].as_ref(),
                    &opts.approaches,
                    opts.earth,
                )
            })
            .collect()
    });

    let mut log = RunLog {
        detections_seen: frames.iter().map(|f| f.detections.len()).sum(),
        calibration_report,
        ..RunLog::default()
    };
    let mut estimates = Vec::new();
    for (frame_estimates, frame_skips) in per_frame {
        estimates.extend(frame_estimates);
        log.skips.extend(frame_skips);
    }
    log.estimates_made = estimates.len();
    Ok(RunOutput {
        ego_states,
        estimates,
        log,
    })
}

/// Per-frame vanishing point: record override, then supplied segments,
/// then the image pipeline, else none.
fn frame_vanishing_points(
    frames: &[FrameRecord],
    opts: &RunOptions,
) -> Result<Vec<Option<VanishingPoint>>, PipelineError> {
    frames
        .par_iter()
        .map(|frame| {
            if let Some(p) = frame.vanishing_point {
                return Ok(Some(VanishingPoint {
                    point: p,
                    support_pairs: 1,
                    dispersion_px: 0.0,
                }));
            }
            if let Some(segments) = &frame.segments {
                // Supplied segments were already picked by the producer;
                // keep the slope filters but drop the image-extent one.
                let mut cfg = opts.vision.vanishing_config();
                cfg.roi_lower_frac = 1.0;
                return Ok(vanishing_point(segments, 0, &cfg).ok());
            }
            if let Some(rel) = &frame.image_ref {
                let path = match &opts.image_root {
                    Some(root) => root.join(rel),
                    None => PathBuf::from(rel),
                };
                let bytes = std::fs::read(&path).map_err(|e| PipelineError::ImageRead {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let img = decode_pgm(&bytes).map_err(|e: VisionError| PipelineError::ImageRead {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                return Ok(detect_vanishing_point(&img, &opts.vision).ok());
            }
            Ok(None)
        })
        .collect()
}

/// Picks the most centered detection with known dimensions to feed the
/// height calibration.
fn best_ranged_anchor(
    frame: &FrameRecord,
    table: &DimsTable,
    k: &CameraIntrinsics,
) -> Option<(f64, PixelPoint)> {
    let center_u = k.principal().0;
    frame
        .detections
        .iter()
        .filter_map(|det| {
            let dims = table.get(&det.class_label).ok()?;
            let d = distance_from_bbox(&det.bbox, dims, k).ok()?;
            Some((det.bbox.anchor(), d))
        })
        .min_by(|(a, _), (b, _)| {
            (a.u - center_u)
                .abs()
                .partial_cmp(&(b.u - center_u).abs())
                .unwrap()
        })
        .map(|(anchor, d)| (d, anchor))
}

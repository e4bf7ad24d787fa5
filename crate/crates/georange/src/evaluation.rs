//! Comparison of estimated trajectories against ground truth: per-frame
//! deviation vectors, min/avg/max/RMSE summaries, and speed/distance
//! covariates.
//!
//! Truth headings for the lateral/longitudinal split come from the truth
//! trace itself, so the axes follow the target's motion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{
    bearing, decompose_deviation, great_circle_distance, EarthModel, GeoPoint,
};
use crate::pipeline::{Approach, TargetEstimate};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no estimate matches any truth sample in time")]
    EmptyIntersection,
    #[error("trace has fewer than 2 samples; speeds undefined")]
    TraceTooShort,
}

/// One ground-truth position sample. `target_id` may be omitted when the
/// file describes a single target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSample {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_id: Option<String>,
    #[serde(flatten)]
    pub position: GeoPoint,
}

/// An estimate paired with the truth position at its timestamp.
#[derive(Debug, Clone)]
pub struct MatchedPair {
    pub estimate: TargetEstimate,
    pub truth_position: GeoPoint,
    pub truth_heading_rad: Option<f64>,
}

/// An estimate that found no truth sample within the matching window.
#[derive(Debug, Clone, Serialize)]
pub struct UnmatchedEstimate {
    pub t: f64,
    pub target_id: String,
    pub approach: Approach,
}

/// Result of time-matching estimates to a truth trace.
#[derive(Debug, Default)]
pub struct MatchOutcome {
    pub pairs: Vec<MatchedPair>,
    pub unmatched: Vec<UnmatchedEstimate>,
}

/// Pairs every estimate with the truth position at its time.
///
/// Bracketed times are linearly interpolated when `interpolate` is set and
/// snapped to the nearest sample otherwise; estimates outside the truth
/// span match the nearest end sample only within `max_dt`.
pub fn match_frames(
    estimates: &[TargetEstimate],
    truth: &[TruthSample],
    max_dt: f64,
    interpolate: bool,
) -> Result<MatchOutcome, EvalError> {
    let mut traces: BTreeMap<String, Vec<&TruthSample>> = BTreeMap::new();
    for sample in truth {
        traces
            .entry(sample.target_id.clone().unwrap_or_default())
            .or_default()
            .push(sample);
    }
    for trace in traces.values_mut() {
        trace.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    }

    let mut outcome = MatchOutcome::default();
    for estimate in estimates {
        let trace = traces
            .get(&estimate.target_id)
            .or_else(|| traces.get(""))
            .filter(|t| !t.is_empty());
        let matched = trace.and_then(|trace| locate(trace, estimate.t, max_dt, interpolate));
        match matched {
            Some((position, heading)) => outcome.pairs.push(MatchedPair {
                estimate: estimate.clone(),
                truth_position: position,
                truth_heading_rad: heading,
            }),
            None => outcome.unmatched.push(UnmatchedEstimate {
                t: estimate.t,
                target_id: estimate.target_id.clone(),
                approach: estimate.approach,
            }),
        }
    }
    if outcome.pairs.is_empty() {
        return Err(EvalError::EmptyIntersection);
    }
    Ok(outcome)
}

/// Truth position (and local heading) at time `t` along a sorted trace.
fn locate(
    trace: &[&TruthSample],
    t: f64,
    max_dt: f64,
    interpolate: bool,
) -> Option<(GeoPoint, Option<f64>)> {
    let idx = trace.partition_point(|s| s.t < t);
    if idx == 0 {
        let first = trace[0];
        if (first.t - t).abs() <= max_dt {
            return Some((first.position, heading_near(trace, 0)));
        }
        return None;
    }
    if idx >= trace.len() {
        let last = trace[trace.len() - 1];
        if (t - last.t).abs() <= max_dt {
            return Some((last.position, heading_near(trace, trace.len() - 1)));
        }
        return None;
    }
    let before = trace[idx - 1];
    let after = trace[idx];
    let heading = heading_of_segment(trace, idx - 1);
    if interpolate {
        let frac = (t - before.t) / (after.t - before.t);
        let position = GeoPoint::new(
            before.position.lat_deg() + frac * (after.position.lat_deg() - before.position.lat_deg()),
            before.position.lon_deg() + frac * (after.position.lon_deg() - before.position.lon_deg()),
        );
        Some((position, heading))
    } else {
        let (nearest, dt) = if t - before.t <= after.t - t {
            (before, t - before.t)
        } else {
            (after, after.t - t)
        };
        if dt <= max_dt {
            Some((nearest.position, heading))
        } else {
            None
        }
    }
}

/// Heading of segment `i -> i+1`, widening outward past stationary
/// segments.
fn heading_of_segment(trace: &[&TruthSample], i: usize) -> Option<f64> {
    if let Ok(b) = bearing(trace[i].position, trace[i + 1].position) {
        return Some(b);
    }
    // Stationary segment: look for the nearest moving one.
    for offset in 1..trace.len() {
        if i >= offset {
            let j = i - offset;
            if let Ok(b) = bearing(trace[j].position, trace[j + 1].position) {
                return Some(b);
            }
        }
        if i + offset + 1 < trace.len() {
            let j = i + offset;
            if let Ok(b) = bearing(trace[j].position, trace[j + 1].position) {
                return Some(b);
            }
        }
    }
    None
}

fn heading_near(trace: &[&TruthSample], i: usize) -> Option<f64> {
    if trace.len() < 2 {
        return None;
    }
    heading_of_segment(trace, i.min(trace.len() - 2))
}

/// One per-frame deviation entry of the report series.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationSample {
    pub t: f64,
    pub magnitude_m: f64,
    pub longitudinal_m: Option<f64>,
    pub lateral_m: Option<f64>,
}

/// Summary statistics over matched pairs.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationStats {
    pub frames: usize,
    pub min_m: f64,
    pub avg_m: f64,
    pub max_m: f64,
    pub rmse_m: f64,
    pub series: Vec<DeviationSample>,
}

/// Deviation magnitudes and their lateral/longitudinal split for a group
/// of matched pairs.
pub fn deviation_stats(pairs: &[MatchedPair], earth: EarthModel) -> DeviationStats {
    assert!(!pairs.is_empty(), "deviation stats need at least one pair");
    let mut min_m = f64::INFINITY;
    let mut max_m: f64 = 0.0;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut series = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let magnitude = great_circle_distance(pair.truth_position, pair.estimate.position, earth);
        let split = pair.truth_heading_rad.and_then(|heading| {
            decompose_deviation(pair.truth_position, heading, pair.estimate.position, earth).ok()
        });
        min_m = min_m.min(magnitude);
        max_m = max_m.max(magnitude);
        sum += magnitude;
        sum_sq += magnitude * magnitude;
        series.push(DeviationSample {
            t: pair.estimate.t,
            magnitude_m: magnitude,
            longitudinal_m: split.map(|d| d.longitudinal_m),
            lateral_m: split.map(|d| d.lateral_m),
        });
    }
    let n = pairs.len() as f64;
    DeviationStats {
        frames: pairs.len(),
        min_m,
        avg_m: sum / n,
        max_m,
        rmse_m: (sum_sq / n).sqrt(),
        series,
    }
}

/// Minimum/average/maximum triple.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinAvgMax {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

fn min_avg_max(values: &[f64]) -> MinAvgMax {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    MinAvgMax {
        min,
        avg: sum / values.len() as f64,
        max,
    }
}

/// Speed statistics of a timestamped position trace, km/h.
pub fn speed_stats(trace: &[(f64, GeoPoint)], earth: EarthModel) -> Result<MinAvgMax, EvalError> {
    if trace.len() < 2 {
        return Err(EvalError::TraceTooShort);
    }
    let speeds: Vec<f64> = trace
        .windows(2)
        .map(|w| {
            let dt = w[1].0 - w[0].0;
            great_circle_distance(w[0].1, w[1].1, earth) / dt * 3.6
        })
        .collect();
    Ok(min_avg_max(&speeds))
}

/// Traffic covariates for one target: vehicle speeds and inter-vehicle
/// distance over the matched frames.
#[derive(Debug, Clone, Serialize)]
pub struct Covariates {
    pub ego_speed_kmh: MinAvgMax,
    pub target_speed_kmh: MinAvgMax,
    pub distance_m: MinAvgMax,
}

/// Computes covariates from the ego trace, the truth trace, and the
/// matched pairs of one target.
pub fn covariates(
    ego: &[(f64, GeoPoint)],
    truth: &[(f64, GeoPoint)],
    pairs: &[MatchedPair],
    earth: EarthModel,
) -> Result<Covariates, EvalError> {
    let ego_speed = speed_stats(ego, earth)?;
    let target_speed = speed_stats(truth, earth)?;
    let distances: Vec<f64> = pairs
        .iter()
        .filter_map(|pair| {
            let ego_pos = interpolate_trace(ego, pair.estimate.t)?;
            Some(great_circle_distance(ego_pos, pair.truth_position, earth))
        })
        .collect();
    if distances.is_empty() {
        return Err(EvalError::EmptyIntersection);
    }
    Ok(Covariates {
        ego_speed_kmh: ego_speed,
        target_speed_kmh: target_speed,
        distance_m: min_avg_max(&distances),
    })
}

fn interpolate_trace(trace: &[(f64, GeoPoint)], t: f64) -> Option<GeoPoint> {
    if trace.is_empty() {
        return None;
    }
    let idx = trace.partition_point(|&(ts, _)| ts < t);
    if idx == 0 {
        return Some(trace[0].1);
    }
    if idx >= trace.len() {
        return Some(trace[trace.len() - 1].1);
    }
    let (t0, p0) = trace[idx - 1];
    let (t1, p1) = trace[idx];
    let frac = (t - t0) / (t1 - t0);
    Some(GeoPoint::new(
        p0.lat_deg() + frac * (p1.lat_deg() - p0.lat_deg()),
        p0.lon_deg() + frac * (p1.lon_deg() - p0.lon_deg()),
    ))
}

/// One (target, approach) row of the report.
#[derive(Debug, Serialize)]
pub struct DeviationRow {
    pub target_id: String,
    pub approach: Approach,
    pub stats: DeviationStats,
}

/// Full evaluation output.
#[derive(Debug, Default, Serialize)]
pub struct EvalReport {
    pub rows: Vec<DeviationRow>,
    pub covariate_rows: Vec<(String, Covariates)>,
    pub unmatched: Vec<UnmatchedEstimate>,
}

impl EvalReport {
    /// Plain-text table of deviation statistics and covariates.
    pub fn render_text(&self) -> String {
        let mut out = String::from("deviation of estimated geolocation vs ground truth (m)\n");
        out.push_str(&format!(
            "{:<12} {:<10} {:>6} {:>8} {:>8} {:>8} {:>8}\n",
            "target", "approach", "frames", "min", "avg", "max", "rmse"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<12} {:<10} {:>6} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
                row.target_id,
                row.approach.to_string(),
                row.stats.frames,
                row.stats.min_m,
                row.stats.avg_m,
                row.stats.max_m,
                row.stats.rmse_m
            ));
        }
        if !self.covariate_rows.is_empty() {
            out.push_str("\ntraffic covariates (min/avg/max)\n");
            out.push_str(&format!(
                "{:<12} {:>24} {:>24} {:>24}\n",
                "target", "ego speed km/h", "target speed km/h", "distance m"
            ));
            for (target, cov) in &self.covariate_rows {
                let triple = |m: &MinAvgMax| format!("{:.2}/{:.2}/{:.2}", m.min, m.avg, m.max);
                out.push_str(&format!(
                    "{:<12} {:>24} {:>24} {:>24}\n",
                    target,
                    triple(&cov.ego_speed_kmh),
                    triple(&cov.target_speed_kmh),
                    triple(&cov.distance_m)
                ));
            }
        }
        if !self.unmatched.is_empty() {
            out.push_str(&format!("\nunmatched estimates: {}\n", self.unmatched.len()));
            for u in &self.unmatched {
                out.push_str(&format!(
                    "unmatched t={:.3} target={} approach={}\n",
                    u.t, u.target_id, u.approach
                ));
            }
        }
        out
    }

    /// Per-frame deviations as CSV for external plotting.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("t,target_id,approach,magnitude_m,longitudinal_m,lateral_m\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for row in &self.rows {
            for s in &row.stats.series {
                out.push_str(&format!(
                    "{},{},{},{:.6},{},{}\n",
                    s.t,
                    row.target_id,
                    row.approach,
                    s.magnitude_m,
                    opt(s.longitudinal_m),
                    opt(s.lateral_m)
                ));
            }
        }
        out
    }
}

/// Groups estimates by (target, approach), matches each group against the
/// truth, and assembles the full report.
pub fn evaluate(
    estimates: &[TargetEstimate],
    truth: &[TruthSample],
    ego: Option<&[(f64, GeoPoint)]>,
    max_dt: f64,
    interpolate: bool,
    earth: EarthModel,
) -> Result<EvalReport, EvalError> {
    let mut groups: BTreeMap<(String, Approach), Vec<TargetEstimate>> = BTreeMap::new();
    for e in estimates {
        groups
            .entry((e.target_id.clone(), e.approach))
            .or_default()
            .push(e.clone());
    }

    let mut report = EvalReport::default();
    let mut matched_by_target: BTreeMap<String, Vec<MatchedPair>> = BTreeMap::new();
    let mut any = false;
    for ((target_id, approach), group) in groups {
        match match_frames(&group, truth, max_dt, interpolate) {
            Ok(outcome) => {
                any = true;
                report.rows.push(DeviationRow {
                    target_id: target_id.clone(),
                    approach,
                    stats: deviation_stats(&outcome.pairs, earth),
                });
                matched_by_target
                    .entry(target_id)
                    .or_default()
                    .extend(outcome.pairs);
                report.unmatched.extend(outcome.unmatched);
            }
            Err(EvalError::EmptyIntersection) => {
                report.unmatched.extend(group.iter().map(|e| UnmatchedEstimate {
                    t: e.t,
                    target_id: e.target_id.clone(),
                    approach: e.approach,
                }));
            }
            Err(other) => return Err(other),
        }
    }
    if !any {
        return Err(EvalError::EmptyIntersection);
    }

    if let Some(ego) = ego {
        for (target_id, pairs) in matched_by_target {
            let trace: Vec<(f64, GeoPoint)> = truth
                .iter()
                .filter(|s| s.target_id.as_deref().unwrap_or_default() == target_id
                    || s.target_id.is_none())
                .map(|s| (s.t, s.position))
                .collect();
            if let Ok(cov) = covariates(ego, &trace, &pairs, earth) {
                report.covariate_rows.push((target_id, cov));
            }
        }
    }
    Ok(report)
}

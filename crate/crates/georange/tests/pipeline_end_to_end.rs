//! Full-chain consistency on synthetic scenes: generated records fed back
//! through the pipeline must reproduce the scene's own ground truth.

use georange::camera::CameraConfig;
use georange::evaluation::{evaluate, match_frames, TruthSample};
use georange::geodesy::{great_circle_distance, EarthModel, GeoPoint};
use georange::groundplane::CameraExtrinsics;
use georange::pipeline::{run_trace, Approach, CalibrationMode, RunOptions, TargetEstimate};
use georange::ranging::DimsTable;
use georange::simulator::{generate, EgoScript, LaneLayout, NoiseParams, Scenario, TargetScript, TravelDirection};

fn straight_scenario() -> Scenario {
    Scenario {
        name: "straight".into(),
        seed: 42,
        duration_s: 60.0,
        frame_rate_hz: 1.0,
        origin: GeoPoint::new(30.65, 104.06),
        detection_range_m: 50.0,
        min_forward_m: 2.0,
        camera: CameraConfig {
            n_h: 960,
            n_v: 720,
            fov_h_deg: 86.7,
            principal: None,
            pitch_deg: Some(0.0),
            mount_height_m: Some(1.4),
        },
        ego: EgoScript {
            heading_deg: 0.0,
            speed_kmh: 25.0,
            start_east_m: 0.0,
            start_north_m: 0.0,
        },
        targets: vec![TargetScript {
            id: "v1".into(),
            class: "car".into(),
            dims: None,
            direction: TravelDirection::Same,
            lateral_offset_m: 0.0,
            initial_gap_m: 10.0,
            speed_kmh: 26.8,
        }],
        lanes: LaneLayout::default(),
        noise: NoiseParams::default(),
        emit_vanishing: false,
    }
}

fn fixed_run_options(truth_pitch: f64, truth_height: f64) -> RunOptions {
    RunOptions {
        approaches: vec![Approach::Image, Approach::Geometric],
        smoothing_window: 1,
        calibration: CalibrationMode::Fixed(
            CameraExtrinsics::new(truth_pitch, truth_height).unwrap(),
        ),
        threads: Some(2),
        ..RunOptions::default()
    }
}

fn truth_samples(truth: &georange::simulator::SyntheticTruth) -> Vec<TruthSample> {
    truth
        .points
        .iter()
        .map(|p| TruthSample {
            t: p.t,
            target_id: Some(p.target_id.clone()),
            position: p.position,
        })
        .collect()
}

#[test]
fn geometric_route_reproduces_truth_exactly() {
    let scenario = straight_scenario();
    let (records, truth) = generate(&scenario).unwrap();
    let k = scenario.camera.intrinsics().unwrap();
    let opts = fixed_run_options(truth.pitch_rad, truth.height_m);
    let out = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
    assert!(out.log.skips.is_empty(), "skips: {:?}", out.log.skips);

    let earth = EarthModel::default();
    let geometric: Vec<TargetEstimate> = out
        .estimates
        .iter()
        .filter(|e| e.approach == Approach::Geometric)
        .cloned()
        .collect();
    assert!(geometric.len() >= 60, "only {} frames", geometric.len());
    let outcome = match_frames(&geometric, &truth_samples(&truth), 0.25, true).unwrap();
    for pair in &outcome.pairs {
        let dev = great_circle_distance(pair.truth_position, pair.estimate.position, earth);
        assert!(
            dev < 0.01,
            "frame t={} deviates {dev} m",
            pair.estimate.t
        );
    }

    // Destination-point consistency: the estimate sits exactly its own
    // distance from the (pre-processed) ego position.
    for estimate in &out.estimates {
        let idx = records
            .iter()
            .position(|r| r.t == estimate.t)
            .expect("frame for estimate");
        let ego = out.ego_states[idx].position;
        let d = great_circle_distance(ego, estimate.position, earth);
        assert!((d - estimate.distance_m).abs() / estimate.distance_m < 1e-9);
    }
}

#[test]
fn approaches_agree_on_noise_free_same_lane_target() {
    let scenario = straight_scenario();
    let (records, truth) = generate(&scenario).unwrap();
    let k = scenario.camera.intrinsics().unwrap();
    let opts = fixed_run_options(truth.pitch_rad, truth.height_m);
    let out = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
    let earth = EarthModel::default();

    let mut count = 0;
    for e in out.estimates.iter().filter(|e| e.approach == Approach::Image) {
        let twin = out
            .estimates
            .iter()
            .find(|g| {
                g.approach == Approach::Geometric && g.t == e.t && g.target_id == e.target_id
            })
            .expect("geometric twin");
        let gap = great_circle_distance(e.position, twin.position, earth);
        assert!(gap < 0.1, "t={} routes disagree by {gap} m", e.t);
        count += 1;
    }
    assert!(count >= 60);
}

#[test]
fn auto_calibration_from_emitted_vanishing_points() {
    let mut scenario = straight_scenario();
    scenario.camera.pitch_deg = Some(-2.0);
    scenario.camera.mount_height_m = Some(1.5);
    scenario.emit_vanishing = true;
    let (records, truth) = generate(&scenario).unwrap();
    let k = scenario.camera.intrinsics().unwrap();
    let opts = RunOptions {
        approaches: vec![Approach::Geometric],
        smoothing_window: 1,
        calibration: CalibrationMode::Auto(Default::default()),
        threads: Some(1),
        ..RunOptions::default()
    };
    let out = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
    let report = out.log.calibration_report.as_deref().unwrap();
    assert!(report.contains("frozen=true"), "report:\n{report}");

    // Once frozen, estimates match truth to centimeters.
    let earth = EarthModel::default();
    let outcome = match_frames(&out.estimates, &truth_samples(&truth), 0.25, true).unwrap();
    let late: Vec<_> = outcome.pairs.iter().filter(|p| p.estimate.t > 20.0).collect();
    assert!(!late.is_empty());
    for pair in late {
        let dev = great_circle_distance(pair.truth_position, pair.estimate.position, earth);
        assert!(dev < 0.02, "t={} deviation {dev}", pair.estimate.t);
    }
}

#[test]
fn evaluation_report_on_simulated_run_is_near_zero() {
    let scenario = straight_scenario();
    let (records, truth) = generate(&scenario).unwrap();
    let k = scenario.camera.intrinsics().unwrap();
    let opts = fixed_run_options(truth.pitch_rad, truth.height_m);
    let out = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
    let ego: Vec<(f64, GeoPoint)> = records.iter().map(|r| (r.t, r.ego)).collect();
    let report = evaluate(
        &out.estimates,
        &truth_samples(&truth),
        Some(&ego),
        0.5,
        true,
        EarthModel::default(),
    )
    .unwrap();
    assert_eq!(report.rows.len(), 2); // one per approach
    for row in &report.rows {
        assert!(row.stats.rmse_m < 0.01, "{:?}", row.stats.rmse_m);
    }
    // Scripted ego speed is 25 km/h; recovered averages must sit within 1%.
    let (_, cov) = &report.covariate_rows[0];
    assert!((cov.ego_speed_kmh.avg - 25.0).abs() / 25.0 < 0.01);
    assert!((cov.target_speed_kmh.avg - 26.8).abs() / 26.8 < 0.01);
}

#[test]
fn rerunning_a_trace_is_deterministic() {
    let mut scenario = straight_scenario();
    scenario.noise = NoiseParams {
        gps_sigma_m: 1.5,
        pixel_jitter_px: 2.0,
        quantize: false,
    };
    let (records, truth) = generate(&scenario).unwrap();
    let k = scenario.camera.intrinsics().unwrap();
    let opts = fixed_run_options(truth.pitch_rad, truth.height_m);
    let a = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
    let opts_b = RunOptions { threads: Some(4), ..opts };
    let b = run_trace(&records, &k, Some(&DimsTable::default()), &opts_b).unwrap();
    assert_eq!(a.estimates, b.estimates);
}

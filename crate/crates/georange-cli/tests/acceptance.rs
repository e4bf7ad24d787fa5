//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured figures (run with `--nocapture` to see
//! them).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use georange::camera::{project_ground_point, CameraIntrinsics, PixelPoint};
use georange::evaluation::{deviation_stats, match_frames, TruthSample};
use georange::extrinsics::{height_from_depth_range, pitch_from_vp};
use georange::geodesy::{
    bearing, destination, great_circle_distance, normalize_angle, EarthModel, GeoPoint,
    GeodesyError,
};
use georange::groundplane::{back_project, CameraExtrinsics, GroundPlaneError, GroundPoint};
use georange::pipeline::{
    estimate_frame, heading_sequence, run_trace, Approach, CalibrationMode, EgoState, FrameRecord,
    RunOptions, TargetEstimate,
};
use georange::ranging::{distance_from_bbox, BoundingBox, Detection, DimsTable, VehicleDims};
use georange::simulator::{
    generate, render_lane_image, LaneLayout, Scenario, SyntheticTruth,
};
use georange::vision::{
    canny_edges, detect_vanishing_point, ppht_segments, vanishing_point, VisionConfig,
};

use rand::Rng;
use rand::SeedableRng;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load_scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    Scenario::from_toml_str(&text).unwrap()
}

/// Straight road, ego at 25 km/h, one same-lane target pulling ahead from
/// 10 m to 40 m over 60 s.
fn acceptance_s1() -> Scenario {
    let mut scenario = load_scenario("s1.toml");
    scenario.name = "s1-accept".into();
    scenario.targets.truncate(1);
    scenario
}

fn truth_samples(truth: &SyntheticTruth) -> Vec<TruthSample> {
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

fn fixed_options(truth: &SyntheticTruth, approaches: Vec<Approach>) -> RunOptions {
    RunOptions {
        approaches,
        smoothing_window: 3,
        calibration: CalibrationMode::Fixed(
            CameraExtrinsics::new(truth.pitch_rad, truth.height_m).unwrap(),
        ),
        ..RunOptions::default()
    }
}

#[test]
fn criterion_1_noise_free_round_trip() {
    let started = Instant::now();
    let scenario = acceptance_s1();
    let (records, truth) = generate(&scenario).unwrap();
    let k = scenario.camera.intrinsics().unwrap();
    let opts = fixed_options(&truth, vec![Approach::Geometric]);
    let out = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
    let outcome = match_frames(&out.estimates, &truth_samples(&truth), 0.25, true).unwrap();
    let stats = deviation_stats(&outcome.pairs, EarthModel::default());
    let elapsed = started.elapsed();
    assert!(
        stats.frames >= 60,
        "criterion 1 FAIL: only {} frames",
        stats.frames
    );
    assert!(
        stats.rmse_m < 0.01,
        "criterion 1 FAIL: rmse {} m",
        stats.rmse_m
    );
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "criterion 1 FAIL: took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 1 PASS: noise-free geometric round trip, rmse {:.2e} m over {} frames in {:.2?}",
        stats.rmse_m, stats.frames, elapsed
    );
}

#[test]
fn criterion_2_inter_approach_consistency() {
    let scenario = acceptance_s1();
    let (records, truth) = generate(&scenario).unwrap();
    let k = scenario.camera.intrinsics().unwrap();
    let opts = fixed_options(&truth, vec![Approach::Image, Approach::Geometric]);
    let out = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
    let earth = EarthModel::default();
    let mut worst = 0.0f64;
    let mut frames = 0;
    for image in out.estimates.iter().filter(|e| e.approach == Approach::Image) {
        let twin = out
            .estimates
            .iter()
            .find(|g| {
                g.approach == Approach::Geometric
                    && g.t == image.t
                    && g.target_id == image.target_id
            })
            .expect("geometric twin for every image estimate");
        let gap = great_circle_distance(image.position, twin.position, earth);
        worst = worst.max(gap);
        frames += 1;
        assert!(
            gap < 0.1,
            "criterion 2 FAIL: t={} approaches {gap} m apart",
            image.t
        );
    }
    assert!(frames >= 60);
    println!(
        "ACCEPTANCE 2 PASS: approaches within {worst:.2e} m across {frames} frames (bound 0.1 m)"
    );
}

#[test]
fn criterion_3_geodesy_inverse_suite() {
    let earth = EarthModel::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(314159);
    let mut worst_bearing = 0.0f64;
    let mut worst_distance = 0.0f64;
    for _ in 0..10_000 {
        let lat = rng.gen_range(-85.0..85.0);
        let lon = rng.gen_range(-180.0..180.0);
        let azimuth = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let distance = rng.gen_range(1.0..10_000.0);
        let origin = GeoPoint::new(lat, lon);
        let there = destination(origin, azimuth, distance, earth);
        let recovered = bearing(origin, there).unwrap();
        let bearing_err = normalize_angle(recovered - azimuth).abs();
        let measured = great_circle_distance(origin, there, earth);
        let distance_err = (measured - distance).abs() / distance;
        worst_bearing = worst_bearing.max(bearing_err);
        worst_distance = worst_distance.max(distance_err);
        assert!(
            bearing_err < 1e-9,
            "criterion 3 FAIL: bearing error {bearing_err} at ({lat}, {lon}) az {azimuth} d {distance}"
        );
        assert!(
            distance_err < 1e-6,
            "criterion 3 FAIL: distance error {distance_err}"
        );
    }
    println!(
        "ACCEPTANCE 3 PASS: 10000 inverse triples, worst bearing err {worst_bearing:.2e} rad, worst distance err {worst_distance:.2e} rel"
    );
}

#[test]
fn criterion_4_calibration_recovery() {
    let k = CameraIntrinsics::from_fov(960, 720, 86.7f64.to_radians()).unwrap();
    let dims = VehicleDims {
        width_m: 1.8,
        height_m: 1.5,
    };
    let mut worst_pitch = 0.0f64;
    let mut worst_height = 0.0f64;
    for &pitch_deg in &[-5.0f64, -2.0, 0.0, 2.0, 5.0] {
        for &height_m in &[1.2f64, 1.5, 1.8] {
            let ext = CameraExtrinsics::new(pitch_deg.to_radians(), height_m).unwrap();
            let img = render_lane_image(&k, &ext, &LaneLayout::default());
            let vp = detect_vanishing_point(&img, &VisionConfig::default()).unwrap();
            let pitch = pitch_from_vp(&vp, &k);
            let pitch_err = (pitch.to_degrees() - pitch_deg).abs();

            // Range a synthetic dead-ahead detection and invert for height.
            let proj = project_ground_point(GroundPoint::new(0.0, 10.0), &ext, &k).unwrap();
            let width_px = k.focal_px() * dims.width_m / proj.depth_m;
            let height_px = k.focal_px() * dims.height_m / proj.depth_m;
            let bbox = BoundingBox::new(
                proj.pixel.u - width_px / 2.0,
                proj.pixel.v - height_px,
                proj.pixel.u + width_px / 2.0,
                proj.pixel.v,
            );
            let depth = distance_from_bbox(&bbox, dims, &k).unwrap();
            let height = height_from_depth_range(depth, bbox.anchor(), pitch, &k).unwrap();
            let height_err = (height - height_m).abs();

            worst_pitch = worst_pitch.max(pitch_err);
            worst_height = worst_height.max(height_err);
            assert!(
                pitch_err < 0.05,
                "criterion 4 FAIL: pitch err {pitch_err:.4} deg at ({pitch_deg}, {height_m})"
            );
            assert!(
                height_err < 0.01,
                "criterion 4 FAIL: height err {height_err:.4} m at ({pitch_deg}, {height_m})"
            );
        }
    }
    println!(
        "ACCEPTANCE 4 PASS: 15 extrinsic combos, worst pitch err {worst_pitch:.4} deg (bound 0.05), worst height err {worst_height:.4} m (bound 0.01)"
    );
}

#[test]
fn criterion_5_vision_suite() {
    // Two rasterized lane strokes meeting at a known point.
    let cfg = VisionConfig::default();
    let true_vp = PixelPoint::new(478.0, 355.0);
    let mut img = georange::vision::image::GrayImage::filled(960, 720, 25);
    let ends = [PixelPoint::new(150.0, 705.0), PixelPoint::new(845.0, 700.0)];
    let mut truth_slopes = Vec::new();
    for end in &ends {
        let cut = PixelPoint::new(
            true_vp.u + 0.22 * (end.u - true_vp.u),
            true_vp.v + 0.22 * (end.v - true_vp.v),
        );
        georange::vision::raster::draw_line_segment(&mut img, cut, *end, 2.0, 210);
        truth_slopes.push((end.v - true_vp.v).atan2(end.u - true_vp.u));
    }

    let edges = canny_edges(&img, cfg.canny_low, cfg.canny_high, cfg.blur_sigma).unwrap();
    let segments = ppht_segments(&edges, &cfg.ppht_params());
    assert!(
        segments.len() >= 2,
        "criterion 5 FAIL: {} segments",
        segments.len()
    );
    let mut worst_slope = 0.0f64;
    for s in &segments {
        let err = truth_slopes
            .iter()
            .map(|a| {
                let mut d = (s.slope_angle() - a).abs() % std::f64::consts::PI;
                if d > std::f64::consts::FRAC_PI_2 {
                    d = std::f64::consts::PI - d;
                }
                d.to_degrees()
            })
            .fold(f64::INFINITY, f64::min);
        worst_slope = worst_slope.max(err);
        assert!(err < 1.0, "criterion 5 FAIL: slope err {err:.3} deg");
    }
    let vp = vanishing_point(&segments, img.height(), &cfg.vanishing_config()).unwrap();
    let miss = (vp.point.u - true_vp.u).hypot(vp.point.v - true_vp.v);
    assert!(miss < 3.0, "criterion 5 FAIL: vp miss {miss:.2} px");
    println!(
        "ACCEPTANCE 5 PASS: {} segments, worst slope err {worst_slope:.3} deg (bound 1), vp miss {miss:.2} px (bound 3)",
        segments.len()
    );
}

#[test]
fn criterion_6_noise_band_matches_reported_ranges() {
    let started = Instant::now();
    let base = load_scenario("s1_noise.toml");
    let seeds: Vec<u64> = (1..=20).collect();
    let earth = EarthModel::default();
    let k = base.camera.intrinsics().unwrap();

    let mut mean_dev = std::collections::BTreeMap::new();
    let mut rmse = std::collections::BTreeMap::new();
    for &seed in &seeds {
        let mut scenario = base.clone();
        scenario.seed = seed;
        let (records, truth) = generate(&scenario).unwrap();
        let opts = fixed_options(&truth, vec![Approach::Image, Approach::Geometric]);
        let out = run_trace(&records, &k, Some(&DimsTable::default()), &opts).unwrap();
        for approach in [Approach::Image, Approach::Geometric] {
            let group: Vec<TargetEstimate> = out
                .estimates
                .iter()
                .filter(|e| e.approach == approach)
                .cloned()
                .collect();
            let outcome = match_frames(&group, &truth_samples(&truth), 0.25, true).unwrap();
            let stats = deviation_stats(&outcome.pairs, earth);
            mean_dev
                .entry(approach)
                .or_insert_with(Vec::new)
                .push(stats.avg_m);
            rmse.entry(approach).or_insert_with(Vec::new).push(stats.rmse_m);
        }
    }

    let elapsed = started.elapsed();
    for approach in [Approach::Image, Approach::Geometric] {
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mean = avg(&mean_dev[&approach]);
        let root = avg(&rmse[&approach]);
        assert!(
            (0.5..=5.0).contains(&mean),
            "criterion 6 FAIL: {approach} mean deviation {mean:.3} m outside [0.5, 5.0]"
        );
        assert!(
            (1.0..=5.0).contains(&root),
            "criterion 6 FAIL: {approach} rmse {root:.3} m outside [1.0, 5.0]"
        );
        println!(
            "ACCEPTANCE 6 PASS ({approach}): mean deviation {mean:.3} m in [0.5, 5.0], rmse {root:.3} m in [1.0, 5.0] over 20 seeds"
        );
    }
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 6 FAIL: took {elapsed:?}"
    );
    println!("ACCEPTANCE 6 PASS: 20-seed noise study in {elapsed:.2?} (bound 60 s)");
}

#[test]
fn criterion_7_opposite_direction_sensing_window() {
    let scenario = load_scenario("s2.toml");
    let (records, _) = generate(&scenario).unwrap();
    for target in &scenario.targets {
        let frames = records
            .iter()
            .filter(|r| r.detections.iter().any(|d| d.target_id == target.id))
            .count();
        assert!(
            (2..=4).contains(&frames),
            "criterion 7 FAIL: target {} visible in {frames} frames",
            target.id
        );
        println!(
            "ACCEPTANCE 7 PASS: oncoming target {} sensed in {frames} frames (bound 2..=4)",
            target.id
        );
    }
}

#[test]
fn criterion_8_cli_chain_rerun_is_byte_identical() {
    let binary = env!("CARGO_BIN_EXE_georange");
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let run = |args: &[&str]| {
        let output = Command::new(binary)
            .args(args)
            .current_dir(root)
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "command {:?} failed: {}",
            args,
            String::from_utf8_lossy(&output.stderr)
        );
    };

    let scenario = fixtures().join("s1_noise.toml");
    let camera = fixtures().join("camera.toml");
    let dims = fixtures().join("dims.toml");
    run(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--frames",
        "frames.jsonl",
        "--truth",
        "truth.jsonl",
        "--seed",
        "7",
    ]);
    run(&[
        "estimate",
        "--frames",
        "frames.jsonl",
        "--camera",
        camera.to_str().unwrap(),
        "--dims",
        dims.to_str().unwrap(),
        "--approach",
        "both",
        "--calibration",
        "fixed",
        "--out-dir",
        "out",
    ]);
    run(&[
        "evaluate",
        "--estimates",
        "out/estimates_geometric.jsonl",
        "--truth",
        "truth.jsonl",
        "--frames",
        "frames.jsonl",
        "--report",
        "report.txt",
        "--csv",
        "deviations.csv",
    ]);
    run(&[
        "export",
        "--input",
        "out/estimates_image.jsonl",
        "--out",
        "trajectories.geojson",
    ]);

    let outputs = [
        "frames.jsonl",
        "truth.jsonl",
        "out/estimates_image.jsonl",
        "out/estimates_geometric.jsonl",
        "out/run.log",
        "report.txt",
        "deviations.csv",
        "trajectories.geojson",
    ];
    let snapshot: Vec<Vec<u8>> = outputs
        .iter()
        .map(|p| std::fs::read(root.join(p)).unwrap())
        .collect();

    for echo in [
        "frames.jsonl.echo.toml",
        "out/estimate.echo.toml",
        "report.txt.echo.toml",
        "trajectories.geojson.echo.toml",
    ] {
        run(&["rerun", "--echo", echo]);
    }

    for (path, before) in outputs.iter().zip(&snapshot) {
        let after = std::fs::read(root.join(path)).unwrap();
        assert_eq!(
            &after, before,
            "criterion 8 FAIL: {path} changed after rerun"
        );
    }
    println!(
        "ACCEPTANCE 8 PASS: {} output files byte-identical after rerun from config echoes",
        outputs.len()
    );
}

#[test]
fn criterion_9_degenerate_inputs_produce_their_errors() {
    let k = CameraIntrinsics::from_fov(960, 720, 86.7f64.to_radians()).unwrap();
    let ext = CameraExtrinsics::new(0.0, 1.4).unwrap();
    let earth = EarthModel::default();

    // Above-horizon anchor: explicit error from back-projection, logged
    // skip (never a crash) in the pipeline.
    let (_, h2) = k.principal();
    assert_eq!(
        back_project(PixelPoint::new(480.0, h2 - 40.0), &ext, &k),
        Err(GroundPlaneError::HorizonRay)
    );
    let frame = FrameRecord {
        t: 0.0,
        ego: GeoPoint::new(30.0, 104.0),
        detections: vec![
            Detection {
                target_id: "sky".into(),
                class_label: "car".into(),
                bbox: BoundingBox::new(440.0, 200.0, 520.0, 260.0),
            },
            Detection {
                target_id: "flat".into(),
                class_label: "car".into(),
                bbox: BoundingBox::new(440.0, 400.0, 440.0, 400.0),
            },
        ],
        image_ref: None,
        vanishing_point: None,
        segments: None,
    };
    let ego = EgoState {
        position: frame.ego,
        heading_rad: 0.0,
        speed_mps: 7.0,
    };
    let (estimates, skips) = estimate_frame(
        &frame,
        &ego,
        &k,
        Some(&DimsTable::default()),
        Some(&ext),
        &[Approach::Image, Approach::Geometric],
        earth,
    );
    assert!(estimates.is_empty());
    assert_eq!(skips.len(), 4, "skips: {skips:?}");
    assert!(skips
        .iter()
        .any(|s| s.target_id == "sky" && s.reason.contains("horizon")));
    assert!(skips
        .iter()
        .any(|s| s.target_id == "flat" && s.reason.contains("range information")));

    // Zero-size box: explicit ranging error.
    let zero = BoundingBox::new(10.0, 10.0, 10.0, 10.0);
    assert!(distance_from_bbox(
        &zero,
        VehicleDims {
            width_m: 1.8,
            height_m: 1.5
        },
        &k
    )
    .is_err());

    // Duplicate GPS points: bearing refuses, the heading sequence carries
    // the previous value instead of crashing.
    let p = GeoPoint::new(30.0, 104.0);
    assert_eq!(bearing(p, p), Err(GeodesyError::DegenerateSegment));
    let q = georange::geodesy::offset_by_enu(p, 0.0, 10.0, earth);
    let headings = heading_sequence(&[p, q, q, q]).unwrap();
    assert_eq!(headings.len(), 4);
    assert!(headings.iter().all(|h| h.abs() < 1e-9));

    // Antipodal bearing request: its own error, distinct from coincident.
    let anti = GeoPoint::new(-30.0, -76.0);
    assert_eq!(bearing(p, anti), Err(GeodesyError::AntipodalSegment));

    println!("ACCEPTANCE 9 PASS: degenerate inputs all yield their specified errors");
}

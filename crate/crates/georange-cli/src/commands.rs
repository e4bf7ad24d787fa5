//! Resolved run configurations and their execution.
//!
//! Every command materializes a [`RunConfig`] with all defaults filled in,
//! writes it as a TOML "echo" alongside its primary output, then executes.
//! `rerun` loads an echo and executes it again, reproducing the outputs
//! byte for byte (all randomness flows from seeds stored in the echo).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use georange::camera::CameraConfig;
use georange::evaluation::{evaluate, EvalError, TruthSample};
use georange::extrinsics::{pitch_from_vp, CalibrationConfig};
use georange::geodesy::{EarthModel, GeoPoint};
use georange::io;
use georange::pipeline::{
    run_trace, Approach, CalibrationMode, EstimateRecord, FrameRecord, PipelineError, RunOptions,
    TargetEstimate,
};
use georange::ranging::DimsTable;
use georange::simulator::{generate, render_lane_image, Scenario};
use georange::vision::{decode_pgm, detect_vanishing_point, VisionConfig};

/// Exit codes: 2 config/parse, 3 fatal trace, 4 empty evaluation overlap.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn config(message: impl std::fmt::Display) -> Self {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }
    fn trace(message: impl std::fmt::Display) -> Self {
        CliError {
            code: 3,
            message: message.to_string(),
        }
    }
    fn io(message: impl std::fmt::Display) -> Self {
        CliError {
            code: 1,
            message: message.to_string(),
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    io::atomic_write(path, bytes).map_err(CliError::io)
}

/// Approach selection as spelled on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ApproachArg {
    Image,
    Geometric,
    Both,
}

impl ApproachArg {
    pub fn approaches(self) -> Vec<Approach> {
        match self {
            ApproachArg::Image => vec![Approach::Image],
            ApproachArg::Geometric => vec![Approach::Geometric],
            ApproachArg::Both => vec![Approach::Image, Approach::Geometric],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationArg {
    /// Estimate pitch and height from lane lines per frame.
    Auto,
    /// Use the pitch/height pinned in the camera config.
    Fixed,
}

/// A fully resolved run, as stored in the echo file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Estimate(EstimateConfig),
    Evaluate(EvaluateConfig),
    Export(ExportConfig),
    Vanish(VanishConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub scenario: PathBuf,
    pub frames: PathBuf,
    pub truth: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub frames: PathBuf,
    pub camera: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<PathBuf>,
    pub approach: ApproachArg,
    pub calibration: CalibrationArg,
    pub out_dir: PathBuf,
    pub smoothing_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_root: Option<PathBuf>,
    pub seed: u64,
    pub vision: VisionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub estimates: PathBuf,
    pub truth: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<PathBuf>,
    pub report: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    pub max_dt: f64,
    pub nearest: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportConfig {
    pub input: PathBuf,
    /// Input is a ground-truth trace rather than estimates.
    pub truth: bool,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VanishConfig {
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub vision: VisionConfig,
}

impl RunConfig {
    /// Where this run's config echo lives, when it writes files at all.
    pub fn echo_path(&self) -> Option<PathBuf> {
        let with_suffix = |p: &Path| {
            let mut os = p.as_os_str().to_owned();
            os.push(".echo.toml");
            PathBuf::from(os)
        };
        match self {
            RunConfig::Simulate(c) => Some(with_suffix(&c.frames)),
            RunConfig::Estimate(c) => Some(c.out_dir.join("estimate.echo.toml")),
            RunConfig::Evaluate(c) => Some(with_suffix(&c.report)),
            RunConfig::Export(c) => Some(with_suffix(&c.out)),
            RunConfig::Vanish(c) => c.out.as_deref().map(with_suffix),
        }
    }

    pub fn execute(&self) -> Result<(), CliError> {
        if let Some(echo) = self.echo_path() {
            let text = toml::to_string_pretty(self)
                .map_err(|e| CliError::io(format!("echo serialization: {e}")))?;
            write_atomic(&echo, text.as_bytes())?;
        }
        match self {
            RunConfig::Simulate(c) => cmd_simulate(c),
            RunConfig::Estimate(c) => cmd_estimate(c),
            RunConfig::Evaluate(c) => cmd_evaluate(c),
            RunConfig::Export(c) => cmd_export(c),
            RunConfig::Vanish(c) => cmd_vanish(c),
        }
    }
}

pub fn load_echo(path: &Path) -> Result<RunConfig, CliError> {
    let text = io::read_to_string(path).map_err(CliError::config)?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn cmd_simulate(cfg: &SimulateConfig) -> Result<(), CliError> {
    let text = io::read_to_string(&cfg.scenario).map_err(CliError::config)?;
    let mut scenario = Scenario::from_toml_str(&text).map_err(CliError::config)?;
    if let Some(seed) = cfg.seed {
        scenario.seed = seed;
    }
    let (mut records, truth) = generate(&scenario).map_err(CliError::config)?;

    if let Some(images_dir) = &cfg.images {
        let k = scenario.camera.intrinsics().map_err(CliError::config)?;
        let ext = scenario
            .camera
            .fixed_extrinsics()
            .map_err(CliError::config)?
            .expect("validated by generate");
        // A straight road with solid markings looks identical from every
        // frame, so one rendered image serves the whole trace.
        let img = render_lane_image(&k, &ext, &scenario.lanes);
        let image_name = "lanes.pgm";
        write_atomic(
            &images_dir.join(image_name),
            &georange::vision::encode_pgm(&img),
        )?;
        for record in &mut records {
            record.image_ref = Some(image_name.to_string());
        }
    }

    io::write_jsonl(&cfg.frames, &records).map_err(CliError::io)?;
    let truth_samples: Vec<TruthSample> = truth
        .points
        .iter()
        .map(|p| TruthSample {
            t: p.t,
            target_id: Some(p.target_id.clone()),
            position: p.position,
        })
        .collect();
    io::write_jsonl(&cfg.truth, &truth_samples).map_err(CliError::io)?;
    eprintln!(
        "simulated {} frames, {} truth samples ({})",
        records.len(),
        truth_samples.len(),
        scenario.name
    );
    Ok(())
}

fn pipeline_exit(e: PipelineError) -> CliError {
    CliError::trace(e)
}

fn cmd_estimate(cfg: &EstimateConfig) -> Result<(), CliError> {
    // Fail fast: every referenced file is read and parsed before any
    // computation starts.
    let camera_text = io::read_to_string(&cfg.camera).map_err(CliError::config)?;
    let camera = CameraConfig::from_toml_str(&camera_text).map_err(CliError::config)?;
    let k = camera.intrinsics().map_err(CliError::config)?;

    let approaches = cfg.approach.approaches();
    let needs_dims =
        approaches.contains(&Approach::Image) || cfg.calibration == CalibrationArg::Auto;
    let dims = match (&cfg.dims, needs_dims) {
        (Some(path), _) => {
            let text = io::read_to_string(path).map_err(CliError::config)?;
            Some(DimsTable::from_toml_str(&text).map_err(CliError::config)?)
        }
        (None, true) => {
            return Err(CliError::config(
                "this run needs a dimension table (--dims): required by the image approach and by auto calibration",
            ))
        }
        (None, false) => None,
    };

    let calibration = match cfg.calibration {
        CalibrationArg::Fixed => {
            let ext = camera
                .fixed_extrinsics()
                .map_err(CliError::config)?
                .ok_or_else(|| {
                    CliError::config(
                        "fixed calibration needs pitch_deg and mount_height_m in the camera config",
                    )
                })?;
            CalibrationMode::Fixed(ext)
        }
        CalibrationArg::Auto => CalibrationMode::Auto(CalibrationConfig::default()),
    };

    let frames: Vec<FrameRecord> = io::read_jsonl(&cfg.frames).map_err(CliError::config)?;
    if frames.is_empty() {
        return Err(CliError::config("frames file contains no records"));
    }
    // Referenced images must exist up front.
    for frame in &frames {
        if let Some(rel) = &frame.image_ref {
            let path = match &cfg.image_root {
                Some(root) => root.join(rel),
                None => PathBuf::from(rel),
            };
            if !path.is_file() {
                return Err(CliError::config(format!(
                    "frame t={} references missing image {}",
                    frame.t,
                    path.display()
                )));
            }
        }
    }

    let mut vision = cfg.vision;
    vision.seed = cfg.seed;
    let opts = RunOptions {
        approaches: approaches.clone(),
        smoothing_window: cfg.smoothing_window,
        calibration,
        vision,
        earth: EarthModel::default(),
        threads: cfg.threads,
        image_root: cfg.image_root.clone(),
    };
    let output = run_trace(&frames, &k, dims.as_ref(), &opts).map_err(pipeline_exit)?;

    for approach in &approaches {
        let records: Vec<EstimateRecord> = output
            .estimates
            .iter()
            .filter(|e| e.approach == *approach)
            .map(EstimateRecord::from)
            .collect();
        let path = cfg.out_dir.join(format!("estimates_{approach}.jsonl"));
        io::write_jsonl(&path, &records).map_err(CliError::io)?;
    }
    write_atomic(
        &cfg.out_dir.join("run.log"),
        output.log.render_text().as_bytes(),
    )?;
    if let Some(report) = &output.log.calibration_report {
        write_atomic(&cfg.out_dir.join("calibration.txt"), report.as_bytes())?;
    }
    if !output.log.skips.is_empty() {
        eprintln!(
            "warning: {} detection(s) skipped; see run.log",
            output.log.skips.len()
        );
    }
    eprintln!(
        "estimated {} positions from {} frames",
        output.log.estimates_made,
        frames.len()
    );
    Ok(())
}

fn cmd_evaluate(cfg: &EvaluateConfig) -> Result<(), CliError> {
    let records: Vec<EstimateRecord> = io::read_jsonl(&cfg.estimates).map_err(CliError::config)?;
    let estimates: Vec<TargetEstimate> = records
        .iter()
        .map(TargetEstimate::try_from)
        .collect::<Result<_, _>>()
        .map_err(CliError::config)?;
    let truth: Vec<TruthSample> = io::read_jsonl(&cfg.truth).map_err(CliError::config)?;
    let ego: Option<Vec<(f64, GeoPoint)>> = match &cfg.frames {
        Some(path) => {
            let frames: Vec<FrameRecord> = io::read_jsonl(path).map_err(CliError::config)?;
            Some(frames.iter().map(|f| (f.t, f.ego)).collect())
        }
        None => None,
    };

    let report = evaluate(
        &estimates,
        &truth,
        ego.as_deref(),
        cfg.max_dt,
        !cfg.nearest,
        EarthModel::default(),
    )
    .map_err(|e| match e {
        EvalError::EmptyIntersection => CliError {
            code: 4,
            message: e.to_string(),
        },
        EvalError::TraceTooShort => CliError::trace(e),
    })?;

    write_atomic(&cfg.report, report.render_text().as_bytes())?;
    if let Some(csv) = &cfg.csv {
        write_atomic(csv, report.render_csv().as_bytes())?;
    }
    eprintln!(
        "evaluated {} (target, approach) groups, {} unmatched estimates",
        report.rows.len(),
        report.unmatched.len()
    );
    Ok(())
}

fn cmd_export(cfg: &ExportConfig) -> Result<(), CliError> {
    let doc = if cfg.truth {
        let truth: Vec<TruthSample> = io::read_jsonl(&cfg.input).map_err(CliError::config)?;
        io::geojson_from_truth(&truth)
    } else {
        let records: Vec<EstimateRecord> = io::read_jsonl(&cfg.input).map_err(CliError::config)?;
        let estimates: Vec<TargetEstimate> = records
            .iter()
            .map(TargetEstimate::try_from)
            .collect::<Result<_, _>>()
            .map_err(CliError::config)?;
        io::geojson_from_estimates(&estimates)
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::io(format!("geojson serialization: {e}")))?;
    text.push('\n');
    write_atomic(&cfg.out, text.as_bytes())
}

fn cmd_vanish(cfg: &VanishConfig) -> Result<(), CliError> {
    let bytes = io::read_bytes(&cfg.image).map_err(CliError::config)?;
    let img = decode_pgm(&bytes).map_err(CliError::config)?;
    let vp = detect_vanishing_point(&img, &cfg.vision).map_err(CliError::trace)?;

    let pitch_deg = match &cfg.camera {
        Some(path) => {
            let text = io::read_to_string(path).map_err(CliError::config)?;
            let camera = CameraConfig::from_toml_str(&text).map_err(CliError::config)?;
            let k = camera.intrinsics().map_err(CliError::config)?;
            Some(pitch_from_vp(&vp, &k).to_degrees())
        }
        None => None,
    };

    let mut lines = format!(
        "u = {}\nv = {}\nsupport_pairs = {}\ndispersion_px = {}\n",
        vp.point.u, vp.point.v, vp.support_pairs, vp.dispersion_px
    );
    if let Some(pitch) = pitch_deg {
        lines.push_str(&format!("pitch_deg = {pitch}\n"));
    }
    print!("{lines}");
    if let Some(out) = &cfg.out {
        write_atomic(out, lines.as_bytes())?;
    }
    Ok(())
}

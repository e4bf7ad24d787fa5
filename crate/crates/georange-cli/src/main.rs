//! Command-line front end: estimate target-vehicle geolocations from frame
//! records, simulate synthetic scenes, evaluate against ground truth,
//! export GeoJSON, and extract vanishing points from lane imagery.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    load_echo, ApproachArg, CalibrationArg, EstimateConfig, EvaluateConfig, ExportConfig,
    RunConfig, SimulateConfig, VanishConfig,
};
use georange::vision::VisionConfig;

#[derive(Parser)]
#[command(
    name = "georange",
    version,
    about = "Target-vehicle geolocation from a forward camera and GPS trace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate frame records and ground truth for a synthetic scenario.
    Simulate {
        /// Scenario description (TOML).
        #[arg(long)]
        scenario: PathBuf,
        /// Output frame records (JSON lines).
        #[arg(long)]
        frames: PathBuf,
        /// Output ground-truth trace (JSON lines).
        #[arg(long)]
        truth: PathBuf,
        /// Also render lane imagery into this directory and reference it
        /// from the frame records.
        #[arg(long)]
        images: Option<PathBuf>,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate target geolocations from frame records.
    Estimate {
        /// Input frame records (JSON lines).
        #[arg(long)]
        frames: PathBuf,
        /// Camera description (TOML).
        #[arg(long)]
        camera: PathBuf,
        /// Vehicle dimension table (TOML); required for the image approach
        /// and for auto calibration.
        #[arg(long)]
        dims: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ApproachArg::Both)]
        approach: ApproachArg,
        #[arg(long, value_enum, default_value_t = CalibrationArg::Auto)]
        calibration: CalibrationArg,
        /// Output directory for estimates, run log, and calibration report.
        #[arg(long)]
        out_dir: PathBuf,
        /// Centered moving-average window for the ego GPS trace.
        #[arg(long, default_value_t = 3)]
        smoothing_window: usize,
        /// Worker threads for per-frame estimation (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Base directory for image paths in the frame records.
        #[arg(long)]
        image_root: Option<PathBuf>,
        /// Run-level random seed (feeds the line detector).
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Vision parameter overrides (TOML).
        #[arg(long)]
        vision: Option<PathBuf>,
    },
    /// Compare estimates against a ground-truth trace.
    Evaluate {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Frame records for ego-speed/distance covariates (optional).
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Output report (plain text).
        #[arg(long)]
        report: PathBuf,
        /// Optional per-frame deviation CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Maximum estimate/truth time gap for matching, seconds.
        #[arg(long, default_value_t = 0.5)]
        max_dt: f64,
        /// Snap to the nearest truth sample instead of interpolating.
        #[arg(long)]
        nearest: bool,
    },
    /// Export estimates or truth as GeoJSON.
    Export {
        /// Input JSON-lines file (estimates unless --truth is given).
        #[arg(long)]
        input: PathBuf,
        /// Treat the input as a ground-truth trace.
        #[arg(long)]
        truth: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the lane-line vanishing point from one PGM image.
    Vanish {
        #[arg(long)]
        image: PathBuf,
        /// Camera description (TOML); adds the derived pitch to the output.
        #[arg(long)]
        camera: Option<PathBuf>,
        /// Vision parameter overrides (TOML).
        #[arg(long)]
        vision: Option<PathBuf>,
        /// Random seed for the line detector.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the result to this file (TOML).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a run from its config echo, reproducing its outputs.
    Rerun {
        #[arg(long)]
        echo: PathBuf,
    },
}

fn load_vision(path: Option<&PathBuf>) -> Result<VisionConfig, commands::CliError> {
    match path {
        None => Ok(VisionConfig::default()),
        Some(path) => {
            let text = georange::io::read_to_string(path).map_err(|e| commands::CliError {
                code: 2,
                message: e.to_string(),
            })?;
            toml::from_str(&text).map_err(|e| commands::CliError {
                code: 2,
                message: format!("{}: {e}", path.display()),
            })
        }
    }
}

fn build_config(command: Command) -> Result<RunConfig, commands::CliError> {
    Ok(match command {
        Command::Simulate {
            scenario,
            frames,
            truth,
            images,
            seed,
        } => RunConfig::Simulate(SimulateConfig {
            scenario,
            frames,
            truth,
            images,
            seed,
        }),
        Command::Estimate {
            frames,
            camera,
            dims,
            approach,
            calibration,
            out_dir,
            smoothing_window,
            threads,
            image_root,
            seed,
            vision,
        } => RunConfig::Estimate(EstimateConfig {
            frames,
            camera,
            dims,
            approach,
            calibration,
            out_dir,
            smoothing_window,
            threads,
            image_root,
            seed,
            vision: load_vision(vision.as_ref())?,
        }),
        Command::Evaluate {
            estimates,
            truth,
            frames,
            report,
            csv,
            max_dt,
            nearest,
        } => RunConfig::Evaluate(EvaluateConfig {
            estimates,
            truth,
            frames,
            report,
            csv,
            max_dt,
            nearest,
        }),
        Command::Export { input, truth, out } => {
            RunConfig::Export(ExportConfig { input, truth, out })
        }
        Command::Vanish {
            image,
            camera,
            vision,
            seed,
            out,
        } => {
            let mut vision = load_vision(vision.as_ref())?;
            if let Some(seed) = seed {
                vision.seed = seed;
            }
            RunConfig::Vanish(VanishConfig {
                image,
                camera,
                out,
                vision,
            })
        }
        Command::Rerun { echo } => return load_echo(&echo),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(cli.command) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return ExitCode::from(e.code);
        }
    };
    match config.execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

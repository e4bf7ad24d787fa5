//! Lane-line vision: grayscale images, Canny edges, probabilistic Hough
//! segments, and vanishing-point aggregation.

mod canny;
mod hough;
pub mod image;
pub mod raster;
mod vanishing;

pub use canny::canny_edges;
pub use hough::{ppht_segments, LineSegment, PphtParams};
pub use image::{decode_pgm, encode_pgm, GrayImage};
pub use vanishing::{vanishing_point, VanishingConfig, VanishingPoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VisionError {
    #[error("thresholds must satisfy 0 < low < high, got low={low} high={high}")]
    BadThresholds { low: f64, high: f64 },
    #[error("only {0} lane-candidate segments; at least 2 required")]
    InsufficientLines(usize),
    #[error("all candidate line pairs are near-parallel in the image")]
    IllConditioned,
    #[error("malformed image: {0}")]
    MalformedImage(String),
}

/// Parameters for the whole image -> vanishing point chain.
///
/// Defaults follow common lane-detection practice; none of them are pinned
/// by theory, so every one is configurable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct VisionConfig {
    pub blur_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub rho_res_px: f64,
    pub theta_res_deg: f64,
    pub vote_thresh: u32,
    pub min_len_px: f64,
    pub max_gap_px: f64,
    pub roi_lower_frac: f64,
    pub slope_min_deg: f64,
    pub slope_max_deg: f64,
    pub parallel_eps_deg: f64,
    pub seed: u64,
}

impl Default for VisionConfig {
    fn default() -> Self {
        VisionConfig {
            blur_sigma: 1.4,
            canny_low: 50.0,
            canny_high: 150.0,
            rho_res_px: 1.0,
            theta_res_deg: 1.0,
            vote_thresh: 30,
            min_len_px: 40.0,
            max_gap_px: 10.0,
            roi_lower_frac: 0.45,
            slope_min_deg: 20.0,
            slope_max_deg: 70.0,
            parallel_eps_deg: 1.0,
            seed: 7,
        }
    }
}

impl VisionConfig {
    pub fn ppht_params(&self) -> PphtParams {
        PphtParams {
            rho_res: self.rho_res_px,
            theta_res: self.theta_res_deg.to_radians(),
            vote_thresh: self.vote_thresh,
            min_len: self.min_len_px,
            max_gap: self.max_gap_px,
            seed: self.seed,
        }
    }

    pub fn vanishing_config(&self) -> VanishingConfig {
        VanishingConfig {
            roi_lower_frac: self.roi_lower_frac,
            slope_min_rad: self.slope_min_deg.to_radians(),
            slope_max_rad: self.slope_max_deg.to_radians(),
            parallel_eps_rad: self.parallel_eps_deg.to_radians(),
        }
    }
}

/// Full chain: edges, segments, vanishing point.
pub fn detect_vanishing_point(
    img: &GrayImage,
    cfg: &VisionConfig,
) -> Result<VanishingPoint, VisionError> {
    let edges = canny_edges(img, cfg.canny_low, cfg.canny_high, cfg.blur_sigma)?;
    let segments = ppht_segments(&edges, &cfg.ppht_params());
    vanishing_point(&segments, img.height(), &cfg.vanishing_config())
}

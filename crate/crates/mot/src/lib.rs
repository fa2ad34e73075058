//! Multi-object tracking emulated with stream rules: detections become
//! RDF-star symbols, a Kalman filter supplies predictions, and SORT or
//! DeepSORT association is a weighted rule program.

pub mod io;
pub mod kalman;
pub mod metrics;
pub mod scene;
pub mod symbolic;
pub mod tracker;

use thiserror::Error;
use thoth_core::query::{parse_rule_document, Rule};
use thoth_core::reason::SolveError;

pub mod geometry {
    pub use thoth_core::geometry::{appearance_distance, iou, BoundingBox, GeometryError};
}

pub use geometry::{appearance_distance, iou, BoundingBox};
pub use io::{read_detections, write_assignments, Assignment, DetectionRecord};
pub use kalman::{kf_predict, kf_update, KalmanConfig, KalmanState};
pub use scene::{generate_synthetic_scene, ObjectSpec, Scene, SceneSpec};
pub use symbolic::detections_to_stream;
pub use tracker::{run_tracker, Tracker, TrackerConfig};

/// IOU association in three overlap tiers.
pub const SORT_RULES: &str = include_str!("../rules/sort.ttl");
/// The SORT tiers plus windowed appearance matching.
pub const DEEPSORT_RULES: &str = include_str!("../rules/deepsort.ttl");

#[derive(Debug, Error)]
pub enum MotError {
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("records not sorted by frame (frame {frame})")]
    Unsorted { frame: u64 },
    #[error("non-finite value in Kalman update")]
    NonFinite,
    #[error("singular innovation covariance")]
    Singular,
    #[error("scene: {0}")]
    Scene(String),
    #[error("rules: {0}")]
    Rules(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

pub fn parse_rules(text: &str) -> Result<Vec<Rule>, MotError> {
    parse_rule_document(text).map_err(|errs| {
        MotError::Rules(
            errs.iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        )
    })
}

pub fn sort_rules() -> Vec<Rule> {
    parse_rules(SORT_RULES).expect("shipped SORT rules parse")
}

pub fn deepsort_rules() -> Vec<Rule> {
    parse_rules(DEEPSORT_RULES).expect("shipped DeepSORT rules parse")
}

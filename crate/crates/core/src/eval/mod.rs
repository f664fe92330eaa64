//! Detection evaluation: ground-truth ingestion, greedy IoU matching, and
//! the Recall / mAP / average-IoU / RPs-per-image report with PR curves.

mod annotations;
mod matching;
mod metrics;
mod report;

pub use annotations::{group_by_image, parse_annotations, GroundTruthBox};
pub use matching::{match_detections, DetOutcome, EvalDetection, MatchResult};
pub use metrics::{
    average_precision, avg_iou, mean_average_precision, pr_points, recall, rps_per_img, ApMethod,
};
pub use report::{
    build_report, emit_pr_curve, emit_pr_svg, parse_report, serialize_report, EvalConfig,
    EvalReport, REPORT_FORMAT,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("annotation line {line}: {reason}")]
    Annotation { line: usize, reason: String },
    #[error("metric {metric} is undefined: {reason}")]
    UndefinedMetric {
        metric: &'static str,
        reason: String,
    },
    #[error("report line {line}: {reason}")]
    Report { line: usize, reason: String },
    #[error("unsupported report format {got} (this toolkit reads format {expected})")]
    ReportVersion { expected: u32, got: u32 },
}

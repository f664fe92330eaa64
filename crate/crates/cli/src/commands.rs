//! The four commands, as library functions so tests can drive them without
//! spawning the binary. Each returns its printable output; `main` decides
//! where it goes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use darkgrid_core::cfg::emit_shape_report;
use darkgrid_core::detect::BBox;
use darkgrid_core::eval::{
    build_report, emit_pr_curve, emit_pr_svg, group_by_image, match_detections, parse_annotations,
    parse_report, serialize_report, ApMethod, EvalConfig, EvalDetection, EvalReport,
    GroundTruthBox, MatchResult,
};

use crate::dump::{parse_detections_file, serialize_detections};
use crate::error::CliError;
use crate::image::read_image;
use crate::pipeline::{detect_image, load_graph, Network, PixelDetection, RunConfig};

/// Renders the per-layer shape table of a configuration.
pub fn cmd_inspect(cfg: &Path, size: Option<usize>) -> Result<String, CliError> {
    if let Some(s) = size {
        if s == 0 || s % 32 != 0 {
            return Err(CliError::usage(format!(
                "--size must be a positive multiple of 32, got {s}"
            )));
        }
    }
    let graph = load_graph(cfg, size)?;
    let mut out = String::new();
    for warning in graph.warnings() {
        let _ = writeln!(out, "# warning: {warning}");
    }
    out.push_str(&emit_shape_report(&graph));
    Ok(out)
}

/// Runs detection on one image and serializes the result.
pub fn cmd_detect(
    config: &RunConfig,
    image_path: &Path,
) -> Result<(String, Vec<PixelDetection>), CliError> {
    let network = Network::load(config)?;
    let image = read_image(image_path)?;
    let dets = detect_image(&network, &image, config)?;
    let input = network.graph.input_shape();
    let doc = serialize_detections(
        &image_path.display().to_string(),
        input.w,
        input.h,
        &dets,
    );
    Ok((doc, dets))
}

/// Where evaluation detections come from: a forward pass per image, or a
/// planted-detections file that bypasses the network entirely.
pub enum EvalSource {
    Network(Box<RunConfig>),
    Planted(PathBuf),
}

pub struct EvalArgs {
    pub source: EvalSource,
    pub image_list: PathBuf,
    pub annotations: PathBuf,
    pub iou_thresh: f64,
    pub ap_method: ApMethod,
    pub skip_missing: bool,
    pub report_out: Option<PathBuf>,
    pub pr_out: Option<PathBuf>,
    pub pr_svg: Option<PathBuf>,
    pub json: bool,
}

fn read_image_list(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn resolve_image_path(list_path: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        list_path.parent().unwrap_or_else(|| Path::new(".")).join(p)
    }
}

fn pixel_to_eval(d: &PixelDetection) -> EvalDetection {
    EvalDetection::new(
        d.class,
        d.confidence,
        BBox::new(
            d.left + d.width / 2.0,
            d.top + d.height / 2.0,
            d.width,
            d.height,
        ),
    )
}

enum ImageOutcome {
    Evaluated(MatchResult),
    Skipped,
}

/// Evaluates detections over an image list against annotations, writing the
/// report and PR outputs. Returns the report and its serialized form.
pub fn cmd_eval(args: &EvalArgs) -> Result<(EvalReport, String), CliError> {
    if !(0.0..=1.0).contains(&args.iou_thresh) {
        return Err(CliError::usage(format!(
            "--iou-thresh must lie in [0, 1], got {}",
            args.iou_thresh
        )));
    }
    let entries = read_image_list(&args.image_list)?;
    let ann_text = std::fs::read_to_string(&args.annotations)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.annotations.display())))?;
    let ground_truth: BTreeMap<String, Vec<GroundTruthBox>> =
        group_by_image(parse_annotations(&ann_text)?);
    let empty: Vec<GroundTruthBox> = Vec::new();

    let outcomes: Vec<ImageOutcome> = match &args.source {
        EvalSource::Planted(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            let planted = parse_detections_file(&text)?;
            let no_dets: Vec<EvalDetection> = Vec::new();
            entries
                .iter()
                .map(|id| {
                    let dets = planted.get(id).unwrap_or(&no_dets);
                    let gts = ground_truth.get(id).unwrap_or(&empty);
                    ImageOutcome::Evaluated(match_detections(dets, gts, args.iou_thresh))
                })
                .collect()
        }
        EvalSource::Network(config) => {
            let network = Network::load(config)?;
            // Per-image work is independent; the ordered collect keeps the
            // aggregation fold deterministic.
            entries
                .par_iter()
                .map(|id| -> Result<ImageOutcome, CliError> {
                    let path = resolve_image_path(&args.image_list, id);
                    let image = match read_image(&path) {
                        Ok(t) => t,
                        Err(_) if args.skip_missing => return Ok(ImageOutcome::Skipped),
                        Err(e) => return Err(e),
                    };
                    let dets: Vec<EvalDetection> = detect_image(&network, &image, config)?
                        .iter()
                        .map(pixel_to_eval)
                        .collect();
                    let gts = ground_truth.get(id).unwrap_or(&empty);
                    Ok(ImageOutcome::Evaluated(match_detections(
                        &dets,
                        gts,
                        args.iou_thresh,
                    )))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };

    let mut per_image = Vec::with_capacity(outcomes.len());
    let mut skipped = 0usize;
    for outcome in outcomes {
        match outcome {
            ImageOutcome::Evaluated(m) => per_image.push(m),
            ImageOutcome::Skipped => skipped += 1,
        }
    }

    let report = build_report(
        &per_image,
        &EvalConfig {
            iou_threshold: args.iou_thresh,
            ap_method: args.ap_method,
            images_skipped: skipped,
        },
    )?;

    let rendered = if args.json {
        let mut s = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::input(format!("report serialization failed: {e}")))?;
        s.push('\n');
        s
    } else {
        serialize_report(&report)
    };
    if let Some(path) = &args.report_out {
        std::fs::write(path, &rendered)?;
    }
    if let Some(path) = &args.pr_out {
        std::fs::write(path, emit_pr_curve(&report))?;
    }
    if let Some(path) = &args.pr_svg {
        std::fs::write(path, emit_pr_svg(&report))?;
    }
    Ok((report, rendered))
}

/// Signed metric differences between two reports (B minus A).
#[derive(Debug, Clone, PartialEq)]
pub struct CompareDeltas {
    pub map: f64,
    pub recall: f64,
    pub avg_iou: Option<f64>,
    pub rps: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "n/a".to_string(),
    }
}

/// Renders a side-by-side metric table with signed deltas.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> (String, CompareDeltas) {
    let deltas = CompareDeltas {
        map: b.map_pct - a.map_pct,
        recall: b.recall_pct - a.recall_pct,
        avg_iou: match (a.avg_iou_pct, b.avg_iou_pct) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        },
        rps: b.rps_per_img - a.rps_per_img,
    };
    let mut out = String::new();
    let _ = writeln!(out, "{:<13} {:>10} {:>10} {:>10}", "metric", "A", "B", "delta");
    let _ = writeln!(
        out,
        "{:<13} {:>10.2} {:>10.2} {:>+10.2}",
        "map_pct", a.map_pct, b.map_pct, deltas.map
    );
    let _ = writeln!(
        out,
        "{:<13} {:>10.2} {:>10.2} {:>+10.2}",
        "recall_pct", a.recall_pct, b.recall_pct, deltas.recall
    );
    let _ = writeln!(
        out,
        "{:<13} {:>10} {:>10} {:>10}",
        "avg_iou_pct",
        fmt_opt(a.avg_iou_pct),
        fmt_opt(b.avg_iou_pct),
        deltas
            .avg_iou
            .map(|d| format!("{d:+.2}"))
            .unwrap_or_else(|| "n/a".to_string())
    );
    let _ = writeln!(
        out,
        "{:<13} {:>10.2} {:>10.2} {:>+10.2}",
        "rps_per_img", a.rps_per_img, b.rps_per_img, deltas.rps
    );
    let _ = writeln!(
        out,
        "images {} vs {}; ground truth {} vs {}; proposals {} vs {}",
        a.images, b.images, a.ground_truth, b.ground_truth, a.proposals, b.proposals
    );
    (out, deltas)
}

/// Loads and compares two serialized reports.
pub fn cmd_compare(a_path: &Path, b_path: &Path) -> Result<(String, CompareDeltas), CliError> {
    let load = |p: &Path| -> Result<EvalReport, CliError> {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", p.display())))?;
        parse_report(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
    };
    let a = load(a_path)?;
    let b = load(b_path)?;
    Ok(compare_reports(&a, &b))
}

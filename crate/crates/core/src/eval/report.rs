//! Report aggregation and the plain-text report format.
//!
//! The serialized report is a line-oriented `key: value` document followed
//! by the PR table. Floats are written with Rust's shortest round-trip
//! formatting, so parsing a serialized report reproduces every metric
//! bit-exactly.

use std::fmt::Write as _;

use serde::Serialize;

use super::metrics::{
    average_precision, avg_iou, mean_average_precision, pr_points, recall, rps_per_img, ApMethod,
};
use super::{EvalError, MatchResult};

/// Current report format version, written as the first line.
pub const REPORT_FORMAT: u32 = 1;

/// Evaluation settings that shape a report.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// IoU above which a detection counts as a true positive.
    pub iou_threshold: f64,
    pub ap_method: ApMethod,
    /// Images listed but not readable (counted when skipping is allowed).
    pub images_skipped: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.25,
            ap_method: ApMethod::AllPoint,
            images_skipped: 0,
        }
    }
}

/// Aggregated evaluation metrics plus the PR sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: usize,
    pub images_skipped: usize,
    pub ground_truth: usize,
    pub proposals: usize,
    pub true_positives: usize,
    pub iou_threshold: f64,
    pub ap_method: ApMethod,
    pub recall_pct: f64,
    pub map_pct: f64,
    /// Mean IoU over true positives; absent when there are none.
    pub avg_iou_pct: Option<f64>,
    pub rps_per_img: f64,
    /// (class index, AP in [0,1]) for every class with ground truth.
    pub class_ap: Vec<(usize, f64)>,
    /// Pooled (recall, precision) sweep over all detections.
    pub pr_points: Vec<(f64, f64)>,
}

/// Aggregates per-image match results into a report. Per-image results are
/// folded in input (image) order, so the outcome is deterministic.
pub fn build_report(per_image: &[MatchResult], config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let images = per_image.len();
    let ground_truth: usize = per_image.iter().map(|m| m.gt_count()).sum();
    let proposals: usize = per_image.iter().map(|m| m.outcomes.len()).sum();
    let true_positives: usize = per_image.iter().map(|m| m.tp_count()).sum();

    let rps = rps_per_img(proposals, images)?;
    let recall_pct = recall(true_positives, ground_truth - true_positives)?;

    // Pool detections across images: confidence-descending, ties broken by
    // image order then per-image index.
    let mut pooled: Vec<(f64, usize, usize, bool, usize)> = Vec::with_capacity(proposals);
    for (img_idx, m) in per_image.iter().enumerate() {
        for (det_idx, o) in m.outcomes.iter().enumerate() {
            pooled.push((o.confidence, img_idx, det_idx, o.tp, o.class));
        }
    }
    pooled.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    // Ground truth is single-class (class 0), so that is the one class with
    // a defined AP; detections of other classes still weigh on the pooled
    // precision sweep and proposal counts.
    let class_ranked: Vec<bool> = pooled
        .iter()
        .filter(|(_, _, _, _, class)| *class == 0)
        .map(|(_, _, _, tp, _)| *tp)
        .collect();
    let ap = average_precision(&class_ranked, ground_truth, config.ap_method)?;
    let class_ap = vec![(0, ap)];
    let map_pct = mean_average_precision(&[ap])?;

    let tp_ious: Vec<f64> = per_image.iter().flat_map(|m| m.tp_ious()).collect();
    let avg_iou_pct = if tp_ious.is_empty() {
        None
    } else {
        Some(avg_iou(&tp_ious)?)
    };

    let ranked_all: Vec<bool> = pooled.iter().map(|(_, _, _, tp, _)| *tp).collect();
    let pr = pr_points(&ranked_all, ground_truth);

    Ok(EvalReport {
        images,
        images_skipped: config.images_skipped,
        ground_truth,
        proposals,
        true_positives,
        iou_threshold: config.iou_threshold,
        ap_method: config.ap_method,
        recall_pct,
        map_pct,
        avg_iou_pct,
        rps_per_img: rps,
        class_ap,
        pr_points: pr,
    })
}

pub fn serialize_report(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format: {REPORT_FORMAT}");
    let _ = writeln!(out, "images: {}", r.images);
    let _ = writeln!(out, "images_skipped: {}", r.images_skipped);
    let _ = writeln!(out, "ground_truth: {}", r.ground_truth);
    let _ = writeln!(out, "proposals: {}", r.proposals);
    let _ = writeln!(out, "true_positives: {}", r.true_positives);
    let _ = writeln!(out, "iou_threshold: {}", r.iou_threshold);
    let _ = writeln!(out, "ap_method: {}", r.ap_method);
    let _ = writeln!(out, "recall_pct: {}", r.recall_pct);
    let _ = writeln!(out, "map_pct: {}", r.map_pct);
    match r.avg_iou_pct {
        Some(v) => {
            let _ = writeln!(out, "avg_iou_pct: {v}");
        }
        None => {
            let _ = writeln!(out, "avg_iou_pct: n/a");
        }
    }
    let _ = writeln!(out, "rps_per_img: {}", r.rps_per_img);
    let _ = writeln!(out, "class_ap: {}", r.class_ap.len());
    for (class, ap) in &r.class_ap {
        let _ = writeln!(out, "ap {class}: {ap}");
    }
    let _ = writeln!(out, "pr_points: {}", r.pr_points.len());
    for (rec, prec) in &r.pr_points {
        let _ = writeln!(out, "{rec},{prec}");
    }
    out
}

struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str), EvalError> {
        for (idx, line) in self.lines.by_ref() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Ok((idx + 1, line));
            }
        }
        Err(EvalError::Report {
            line: 0,
            reason: "unexpected end of report".to_string(),
        })
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, String), EvalError> {
        let (line_no, line) = self.next_line()?;
        let (k, v) = line.split_once(':').ok_or_else(|| EvalError::Report {
            line: line_no,
            reason: format!("expected {key:?} line, got {line:?}"),
        })?;
        if k.trim() != key {
            return Err(EvalError::Report {
                line: line_no,
                reason: format!("expected key {key:?}, got {:?}", k.trim()),
            });
        }
        Ok((line_no, v.trim().to_string()))
    }

    fn keyed_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, EvalError> {
        let (line_no, value) = self.keyed(key)?;
        value.parse::<T>().map_err(|_| EvalError::Report {
            line: line_no,
            reason: format!("bad value {value:?} for {key:?}"),
        })
    }
}

/// Parses a serialized report, validating the format version.
pub fn parse_report(text: &str) -> Result<EvalReport, EvalError> {
    let mut reader = LineReader {
        lines: text.lines().enumerate(),
    };
    let format: u32 = reader.keyed_parse("format")?;
    if format != REPORT_FORMAT {
        return Err(EvalError::ReportVersion {
            expected: REPORT_FORMAT,
            got: format,
        });
    }
    let images = reader.keyed_parse("images")?;
    let images_skipped = reader.keyed_parse("images_skipped")?;
    let ground_truth = reader.keyed_parse("ground_truth")?;
    let proposals = reader.keyed_parse("proposals")?;
    let true_positives = reader.keyed_parse("true_positives")?;
    let iou_threshold = reader.keyed_parse("iou_threshold")?;
    let ap_method: ApMethod = {
        let (line_no, v) = reader.keyed("ap_method")?;
        v.parse().map_err(|e| EvalError::Report {
            line: line_no,
            reason: e,
        })?
    };
    let recall_pct = reader.keyed_parse("recall_pct")?;
    let map_pct = reader.keyed_parse("map_pct")?;
    let avg_iou_pct = {
        let (line_no, v) = reader.keyed("avg_iou_pct")?;
        if v == "n/a" {
            None
        } else {
            Some(v.parse::<f64>().map_err(|_| EvalError::Report {
                line: line_no,
                reason: format!("bad value {v:?} for \"avg_iou_pct\""),
            })?)
        }
    };
    let rps_per_img = reader.keyed_parse("rps_per_img")?;
    let n_classes: usize = reader.keyed_parse("class_ap")?;
    let mut class_ap = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let (line_no, line) = reader.next_line()?;
        let parsed = line
            .strip_prefix("ap ")
            .and_then(|rest| rest.split_once(':'))
            .and_then(|(c, v)| {
                Some((
                    c.trim().parse::<usize>().ok()?,
                    v.trim().parse::<f64>().ok()?,
                ))
            });
        let (class, ap) = parsed.ok_or_else(|| EvalError::Report {
            line: line_no,
            reason: format!("expected \"ap <class>: <value>\", got {line:?}"),
        })?;
        class_ap.push((class, ap));
    }
    let n_points: usize = reader.keyed_parse("pr_points")?;
    let mut pr = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let (line_no, line) = reader.next_line()?;
        let parsed = line
            .split_once(',')
            .and_then(|(r, p)| Some((r.trim().parse::<f64>().ok()?, p.trim().parse::<f64>().ok()?)));
        let point = parsed.ok_or_else(|| EvalError::Report {
            line: line_no,
            reason: format!("expected \"recall,precision\", got {line:?}"),
        })?;
        pr.push(point);
    }
    Ok(EvalReport {
        images,
        images_skipped,
        ground_truth,
        proposals,
        true_positives,
        iou_threshold,
        ap_method,
        recall_pct,
        map_pct,
        avg_iou_pct,
        rps_per_img,
        class_ap,
        pr_points: pr,
    })
}

/// PR sweep as comma-separated `recall,precision` rows with a header line.
pub fn emit_pr_curve(r: &EvalReport) -> String {
    let mut out = String::from("recall,precision\n");
    for (rec, prec) in &r.pr_points {
        let _ = writeln!(out, "{rec},{prec}");
    }
    out
}

/// Self-contained SVG rendering of the PR curve.
pub fn emit_pr_svg(r: &EvalReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 48.0; // margin
    let sx = |rec: f64| M + rec * (W - 2.0 * M);
    let sy = |prec: f64| H - M - prec * (H - 2.0 * M);
    let mut path = String::new();
    for (i, (rec, prec)) in r.pr_points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(path, "{cmd}{:.2},{:.2} ", sx(*rec), sy(*prec));
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "  <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "  <line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        out,
        "  <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M
    );
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">recall</text>",
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        out,
        "  <text x=\"14\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {})\">precision</text>",
        H / 2.0,
        H / 2.0
    );
    if !path.is_empty() {
        let _ = writeln!(
            out,
            "  <path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
            path.trim_end()
        );
    }
    let _ = writeln!(out, "</svg>");
    out
}

//! Text formats owned by the command-line layer: the per-image detection
//! dump and the planted-detections file consumed by `eval
//! --detections-file`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use darkgrid_core::detect::BBox;
use darkgrid_core::eval::EvalDetection;

use crate::error::CliError;
use crate::pipeline::PixelDetection;

/// Serializes detections for one image: comment header, then one
/// `class confidence left top width height` record per line. Floats use
/// round-trip formatting.
pub fn serialize_detections(
    image: &str,
    net_w: usize,
    net_h: usize,
    dets: &[PixelDetection],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# image: {image}");
    let _ = writeln!(out, "# net: {net_w}x{net_h}");
    let _ = writeln!(out, "# boxes: {}", dets.len());
    let _ = writeln!(out, "# fields: class confidence left top width height");
    for d in dets {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            d.class, d.confidence, d.left, d.top, d.width, d.height
        );
    }
    out
}

/// Parses a planted-detections file: repeated records of an image-id line, a
/// count line, then that many `class confidence left top width height`
/// lines. Unlike the annotation grammar, a zero-count record carries no
/// placeholder line.
pub fn parse_detections_file(
    text: &str,
) -> Result<BTreeMap<String, Vec<EvalDetection>>, CliError> {
    let mut out: BTreeMap<String, Vec<EvalDetection>> = BTreeMap::new();
    let mut lines = text.lines().enumerate().peekable();
    loop {
        while matches!(lines.peek(), Some((_, l)) if l.trim().is_empty()) {
            lines.next();
        }
        let Some((_, id_line)) = lines.next() else {
            break;
        };
        let image_id = id_line.trim().to_string();
        let (count_idx, count_line) = lines.next().ok_or_else(|| {
            CliError::input(format!(
                "detections file: record {image_id:?} ends before its count line"
            ))
        })?;
        let count: usize = count_line.trim().parse().map_err(|_| {
            CliError::input(format!(
                "detections file line {}: expected a count, got {:?}",
                count_idx + 1,
                count_line.trim()
            ))
        })?;
        let entry = out.entry(image_id.clone()).or_default();
        for _ in 0..count {
            let (idx, line) = lines.next().ok_or_else(|| {
                CliError::input(format!(
                    "detections file: record {image_id:?} declares {count} detections but the file ends early"
                ))
            })?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(CliError::input(format!(
                    "detections file line {}: expected 6 fields, got {}",
                    idx + 1,
                    fields.len()
                )));
            }
            let parse_f = |s: &str| -> Result<f64, CliError> {
                s.parse().map_err(|_| {
                    CliError::input(format!(
                        "detections file line {}: bad number {s:?}",
                        idx + 1
                    ))
                })
            };
            let class: usize = fields[0].parse().map_err(|_| {
                CliError::input(format!(
                    "detections file line {}: bad class {:?}",
                    idx + 1,
                    fields[0]
                ))
            })?;
            let confidence = parse_f(fields[1])?;
            let (left, top, width, height) = (
                parse_f(fields[2])?,
                parse_f(fields[3])?,
                parse_f(fields[4])?,
                parse_f(fields[5])?,
            );
            entry.push(EvalDetection::new(
                class,
                confidence,
                BBox::new(left + width / 2.0, top + height / 2.0, width, height),
            ));
        }
    }
    Ok(out)
}

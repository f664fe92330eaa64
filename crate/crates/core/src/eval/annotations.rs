//! Ground-truth annotation parsing.
//!
//! The text format is repeated records of: an image path line, a box-count
//! line, then that many box lines. Each box line holds at least four
//! integers `x y w h` (pixel corner coordinates); any further integers are
//! kept as attribute flags in order blur, expression, illumination, invalid,
//! occlusion, pose. A record with count 0 still carries one placeholder box
//! line, which is consumed and discarded.

use std::collections::BTreeMap;

use super::EvalError;

/// One annotated box bound to an image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image_id: String,
    /// Left edge, pixels.
    pub x: f64,
    /// Top edge, pixels.
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Extra integers from the box line, in file order.
    pub attrs: Vec<i64>,
}

impl GroundTruthBox {
    pub fn new(image_id: impl Into<String>, x: f64, y: f64, w: f64, h: f64) -> Self {
        GroundTruthBox {
            image_id: image_id.into(),
            x,
            y,
            w,
            h,
            attrs: Vec::new(),
        }
    }

    /// The `invalid` attribute flag (fourth extra integer). Invalid boxes
    /// are excluded from matching and from ground-truth counts.
    pub fn is_invalid(&self) -> bool {
        self.attrs.get(3).copied() == Some(1)
    }
}

pub fn parse_annotations(text: &str) -> Result<Vec<GroundTruthBox>, EvalError> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    loop {
        // Tolerate blank lines between records and at the end of the file.
        while matches!(lines.peek(), Some((_, l)) if l.trim().is_empty()) {
            lines.next();
        }
        let Some((_, path_line)) = lines.next() else {
            break;
        };
        let image_id = path_line.trim().to_string();
        let (count_idx, count_line) = lines.next().ok_or_else(|| EvalError::Annotation {
            line: 0,
            reason: format!("record {image_id:?} ends before its box-count line"),
        })?;
        let count: usize = count_line
            .trim()
            .parse()
            .map_err(|_| EvalError::Annotation {
                line: count_idx + 1,
                reason: format!("expected a box count, got {:?}", count_line.trim()),
            })?;
        let box_lines = count.max(1);
        for k in 0..box_lines {
            let (idx, line) = lines.next().ok_or_else(|| EvalError::Annotation {
                line: count_idx + 1,
                reason: format!(
                    "record {image_id:?} declares {count} boxes but the file ends after {k}"
                ),
            })?;
            if count == 0 {
                continue; // placeholder line for an empty record
            }
            let fields: Vec<i64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i64>().map_err(|_| EvalError::Annotation {
                        line: idx + 1,
                        reason: format!("expected an integer, got {tok:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if fields.len() < 4 {
                return Err(EvalError::Annotation {
                    line: idx + 1,
                    reason: format!("box line has {} fields, need at least x y w h", fields.len()),
                });
            }
            out.push(GroundTruthBox {
                image_id: image_id.clone(),
                x: fields[0] as f64,
                y: fields[1] as f64,
                w: fields[2] as f64,
                h: fields[3] as f64,
                attrs: fields[4..].to_vec(),
            });
        }
    }
    Ok(out)
}

/// Groups boxes by image id, preserving a deterministic (sorted) order.
pub fn group_by_image(boxes: Vec<GroundTruthBox>) -> BTreeMap<String, Vec<GroundTruthBox>> {
    let mut map: BTreeMap<String, Vec<GroundTruthBox>> = BTreeMap::new();
    for b in boxes {
        map.entry(b.image_id.clone()).or_default().push(b);
    }
    map
}

//! Decoding raw head tensors into boxes, confidence filtering and greedy
//! non-maximum suppression.
//!
//! A head tensor of an S-by-S grid carries `B * (5 + C)` channels: for each
//! of the B anchor slots, the raw values `t_x, t_y, t_w, t_h, t_o` followed
//! by C class logits, each as a full S-by-S plane. Decoding follows the grid
//! parameterization: the box center is the sigmoid-squashed offset within
//! the cell, width and height scale the anchor prior exponentially, and
//! objectness and class scores are independent sigmoids.

use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("head tensor has {channels} channels, expected {expected} = {b} anchors * (5 + {classes} classes)")]
    ChannelMismatch {
        channels: usize,
        expected: usize,
        b: usize,
        classes: usize,
    },
    #[error("head tensor batch extent must be 1, got {0}")]
    BatchExtent(usize),
}

/// Axis-aligned box in center format. Coordinates produced by
/// [`decode_head`] are normalized to [0, 1] relative to the network input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox { cx, cy, w, h }
    }

    /// Corner coordinates (left, top, right, bottom).
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }
}

/// One decoded box with its objectness and class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub objectness: f64,
    pub class_scores: Vec<f64>,
    pub best_class: usize,
    pub confidence: f64,
}

impl Detection {
    /// Builds a detection, deriving `best_class` (argmax, ties to the lowest
    /// index) and `confidence` (objectness times the best class score).
    pub fn from_scores(bbox: BBox, objectness: f64, class_scores: Vec<f64>) -> Self {
        let best_class = argmax(&class_scores);
        let confidence = objectness * class_scores[best_class];
        Detection {
            bbox,
            objectness,
            class_scores,
            best_class,
            confidence,
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Logistic squash, saturated strictly inside (0, 1) so scores stay in the
/// open interval for any finite logit. The floor keeps products of scores
/// (confidences) positive as well.
fn sigmoid(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s.clamp(1e-30, 1.0 - f64::EPSILON)
}

/// Exponential box scaling, with the argument saturated so coordinates stay
/// finite for any finite logit. Real networks emit |t| of a few units; the
/// cap only matters for untrained weights.
fn box_exp(x: f64) -> f64 {
    x.clamp(-30.0, 30.0).exp()
}

/// Decodes one raw head tensor into `S_h * S_w * B` detections, unfiltered.
///
/// `anchors` are the (width, height) priors for this head in network-input
/// pixels; `net_w`/`net_h` are the network input extents used to normalize.
/// Cell (row r, column g) with anchor slot b decodes as
/// `cx = (sigmoid(t_x) + g) / S_w`, `cy = (sigmoid(t_y) + r) / S_h`,
/// `w = p_w * exp(t_w) / net_w`, `h = p_h * exp(t_h) / net_h`.
///
/// Scores are saturated to the open interval (0, 1) and box scaling to a
/// finite range, so the detection count and score bounds hold for any finite
/// logits, however extreme.
///
/// Iteration order is row-major over cells, anchor slot innermost, so output
/// order is deterministic.
pub fn decode_head(
    raw: &Tensor,
    anchors: &[(f32, f32)],
    classes: usize,
    net_w: usize,
    net_h: usize,
) -> Result<Vec<Detection>, DecodeError> {
    let shape = raw.shape();
    if shape.n != 1 {
        return Err(DecodeError::BatchExtent(shape.n));
    }
    let b = anchors.len();
    let expected = b * (5 + classes);
    if shape.c != expected {
        return Err(DecodeError::ChannelMismatch {
            channels: shape.c,
            expected,
            b,
            classes,
        });
    }
    let (s_h, s_w) = (shape.h, shape.w);
    let mut out = Vec::with_capacity(s_h * s_w * b);
    for row in 0..s_h {
        for col in 0..s_w {
            for (slot, &(p_w, p_h)) in anchors.iter().enumerate() {
                let base = slot * (5 + classes);
                let raw_at = |ch: usize| raw.at(0, base + ch, row, col) as f64;
                let cx = (sigmoid(raw_at(0)) + col as f64) / s_w as f64;
                let cy = (sigmoid(raw_at(1)) + row as f64) / s_h as f64;
                let w = p_w as f64 * box_exp(raw_at(2)) / net_w as f64;
                let h = p_h as f64 * box_exp(raw_at(3)) / net_h as f64;
                let objectness = sigmoid(raw_at(4));
                let class_scores: Vec<f64> =
                    (0..classes).map(|c| sigmoid(raw_at(5 + c))).collect();
                out.push(Detection::from_scores(
                    BBox::new(cx, cy, w, h),
                    objectness,
                    class_scores,
                ));
            }
        }
    }
    Ok(out)
}

/// Keeps detections with confidence strictly above `threshold`, preserving
/// order.
pub fn filter_confidence(dets: Vec<Detection>, threshold: f64) -> Vec<Detection> {
    dets.into_iter()
        .filter(|d| d.confidence > threshold)
        .collect()
}

/// Intersection over union of two boxes; 0 when the union has no area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (al, at, ar, ab) = a.corners();
    let (bl, bt, br, bb) = b.corners();
    let iw = (ar.min(br) - al.max(bl)).max(0.0);
    let ih = (ab.min(bb) - at.max(bt)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Greedy per-class non-maximum suppression.
///
/// Detections of each class are visited in confidence-descending order (ties
/// broken by original index); a detection is kept unless its IoU with an
/// already kept detection of the same class exceeds `iou_threshold`. The
/// result is sorted by confidence descending, then original index, so output
/// is fully deterministic.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = kept.iter().any(|&k| {
            dets[k].best_class == dets[i].best_class
                && iou(&dets[k].bbox, &dets[i].bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| dets[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Shape4, Tensor};

    fn head_tensor(s: usize, b: usize, classes: usize, fill: f32) -> Tensor {
        Tensor::filled(Shape4::new(1, b * (5 + classes), s, s), fill)
    }

    fn det(cx: f64, cy: f64, w: f64, h: f64, conf: f64, class: usize) -> Detection {
        let mut scores = vec![0.0; class + 1];
        scores[class] = 1.0;
        Detection {
            bbox: BBox::new(cx, cy, w, h),
            objectness: conf,
            class_scores: scores,
            best_class: class,
            confidence: conf,
        }
    }

    #[test]
    fn decode_zero_logits_center_cell_zero() {
        let raw = head_tensor(13, 1, 1, 0.0);
        let dets = decode_head(&raw, &[(32.0, 32.0)], 1, 416, 416).unwrap();
        assert_eq!(dets.len(), 169);
        let first = &dets[0];
        assert!((first.bbox.cx - 0.5 / 13.0).abs() < 1e-9);
        assert!((first.bbox.cy - 0.5 / 13.0).abs() < 1e-9);
        // exp(0) = 1 so the box is the anchor prior.
        assert!((first.bbox.w - 32.0 / 416.0).abs() < 1e-9);
        assert!((first.objectness - 0.5).abs() < 1e-9);
    }

    #[test]
    fn decode_sigmoid_offset_in_column_five() {
        let s = 13;
        let mut raw = head_tensor(s, 1, 1, 0.0).into_data();
        // t_x = 1 at cell (row 0, col 5): channel 0 plane, offset row*13+col.
        raw[5] = 1.0;
        let raw = Tensor::new(Shape4::new(1, 6, s, s), raw).unwrap();
        let dets = decode_head(&raw, &[(32.0, 32.0)], 1, 416, 416).unwrap();
        let d = &dets[5]; // row 0, col 5, single anchor
        let sigma1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((d.bbox.cx - (sigma1 + 5.0) / 13.0).abs() < 1e-9);
        assert!((d.bbox.cx - 0.44085).abs() < 1e-5);
    }

    #[test]
    fn decode_rejects_channel_mismatch() {
        let raw = Tensor::zeros(Shape4::new(1, 17, 13, 13));
        assert!(matches!(
            decode_head(&raw, &[(1.0, 1.0); 3], 1, 416, 416),
            Err(DecodeError::ChannelMismatch { expected: 18, .. })
        ));
    }

    #[test]
    fn best_class_ties_break_to_lowest_index() {
        let d = Detection::from_scores(BBox::new(0.5, 0.5, 0.1, 0.1), 0.9, vec![0.4, 0.4, 0.2]);
        assert_eq!(d.best_class, 0);
        assert!((d.confidence - 0.36).abs() < 1e-12);
    }

    #[test]
    fn filter_thresholds() {
        let dets = vec![
            det(0.1, 0.1, 0.05, 0.05, 0.9, 0),
            det(0.5, 0.5, 0.05, 0.05, 0.2, 0),
            det(0.9, 0.9, 0.05, 0.05, 0.3, 0),
        ];
        assert_eq!(filter_confidence(dets.clone(), 0.0).len(), 3);
        assert_eq!(filter_confidence(dets.clone(), 1.0).len(), 0);
        let kept = filter_confidence(dets, 0.25);
        assert_eq!(kept.len(), 2);
        assert!((kept[0].confidence - 0.9).abs() < 1e-12);
        assert!((kept[1].confidence - 0.3).abs() < 1e-12);
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = BBox::new(1.0, 1.0, 2.0, 2.0);
        assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        let far = BBox::new(10.0, 10.0, 2.0, 2.0);
        assert_eq!(iou(&a, &far), 0.0);
    }

    #[test]
    fn iou_corner_boxes_is_one_seventh() {
        // (0,0)-(2,2) and (1,1)-(3,3): intersection 1, union 7.
        let a = BBox::new(1.0, 1.0, 2.0, 2.0);
        let b = BBox::new(2.0, 2.0, 2.0, 2.0);
        assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn iou_zero_union_is_zero() {
        let a = BBox::new(0.5, 0.5, 0.0, 0.0);
        assert_eq!(iou(&a, &a), 0.0);
    }

    #[test]
    fn nms_single_detection_unchanged() {
        let dets = vec![det(0.5, 0.5, 0.2, 0.2, 0.7, 0)];
        assert_eq!(nms(&dets, 0.45), dets);
    }

    #[test]
    fn nms_identical_boxes_keep_strongest() {
        let dets = vec![
            det(0.5, 0.5, 0.2, 0.2, 0.8, 0),
            det(0.5, 0.5, 0.2, 0.2, 0.9, 0),
        ];
        let kept = nms(&dets, 0.45);
        assert_eq!(kept.len(), 1);
        assert!((kept[0].confidence - 0.9).abs() < 1e-12);
    }

    #[test]
    fn nms_disjoint_boxes_both_survive() {
        let dets = vec![
            det(0.2, 0.2, 0.1, 0.1, 0.9, 0),
            det(0.8, 0.8, 0.1, 0.1, 0.8, 0),
        ];
        assert_eq!(nms(&dets, 0.45).len(), 2);
    }

    #[test]
    fn nms_is_per_class() {
        let dets = vec![
            det(0.5, 0.5, 0.2, 0.2, 0.9, 0),
            det(0.5, 0.5, 0.2, 0.2, 0.8, 1),
        ];
        assert_eq!(nms(&dets, 0.45).len(), 2);
    }
}

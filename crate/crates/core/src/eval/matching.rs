//! Greedy confidence-ordered matching of detections to ground truth.

use crate::detect::{iou, BBox};

use super::GroundTruthBox;

/// A detection carried into evaluation: pixel-space box, class index and
/// final confidence. Ground truth carries no class labels, so only class 0
/// can ever match; other classes count as proposals and false positives.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalDetection {
    pub class: usize,
    pub confidence: f64,
    pub bbox: BBox,
}

impl EvalDetection {
    pub fn new(class: usize, confidence: f64, bbox: BBox) -> Self {
        EvalDetection {
            class,
            confidence,
            bbox,
        }
    }
}

/// Outcome for one detection, in the original input order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetOutcome {
    pub class: usize,
    pub confidence: f64,
    pub tp: bool,
    /// IoU against the matched ground-truth box; 0 for false positives.
    pub iou: f64,
}

/// Per-image matching result. `gt_matched` is parallel to the valid
/// (non-`invalid`) ground-truth boxes in their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub outcomes: Vec<DetOutcome>,
    pub gt_matched: Vec<bool>,
}

impl MatchResult {
    pub fn tp_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.tp).count()
    }

    pub fn gt_count(&self) -> usize {
        self.gt_matched.len()
    }

    pub fn tp_ious(&self) -> impl Iterator<Item = f64> + '_ {
        self.outcomes.iter().filter(|o| o.tp).map(|o| o.iou)
    }
}

fn gt_bbox(gt: &GroundTruthBox) -> BBox {
    BBox::new(gt.x + gt.w / 2.0, gt.y + gt.h / 2.0, gt.w, gt.h)
}

/// Matches one image's detections against its ground truth.
///
/// Detections are processed in confidence-descending order (ties keep input
/// order). Each detection claims the unmatched ground-truth box with the
/// highest IoU; it is a true positive iff that IoU strictly exceeds
/// `iou_threshold`, and the claimed box is then consumed. Boxes flagged
/// `invalid` are dropped before matching and never counted.
pub fn match_detections(
    dets: &[EvalDetection],
    gts: &[GroundTruthBox],
    iou_threshold: f64,
) -> MatchResult {
    let valid: Vec<BBox> = gts
        .iter()
        .filter(|g| !g.is_invalid())
        .map(gt_bbox)
        .collect();
    let mut gt_matched = vec![false; valid.len()];

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut outcomes: Vec<DetOutcome> = dets
        .iter()
        .map(|d| DetOutcome {
            class: d.class,
            confidence: d.confidence,
            tp: false,
            iou: 0.0,
        })
        .collect();

    for &i in &order {
        let det = &dets[i];
        if det.class != 0 {
            continue; // no ground truth of that class exists
        }
        let mut best: Option<(usize, f64)> = None;
        for (g, gbox) in valid.iter().enumerate() {
            if gt_matched[g] {
                continue;
            }
            let overlap = iou(&det.bbox, gbox);
            if best.map_or(true, |(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        if let Some((g, overlap)) = best {
            if overlap > iou_threshold {
                gt_matched[g] = true;
                outcomes[i].tp = true;
                outcomes[i].iou = overlap;
            }
        }
    }

    MatchResult {
        outcomes,
        gt_matched,
    }
}

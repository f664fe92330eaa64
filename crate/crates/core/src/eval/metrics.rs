//! The four scalar metrics and the precision/recall sweep.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// How average precision integrates the PR curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApMethod {
    /// Area under the full precision envelope.
    AllPoint,
    /// Mean of the envelope sampled at recalls 0.0, 0.1, ..., 1.0.
    ElevenPoint,
}

impl ApMethod {
    pub fn name(self) -> &'static str {
        match self {
            ApMethod::AllPoint => "allpoint",
            ApMethod::ElevenPoint => "11point",
        }
    }
}

impl std::fmt::Display for ApMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ApMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "allpoint" => Ok(ApMethod::AllPoint),
            "11point" => Ok(ApMethod::ElevenPoint),
            other => Err(format!(
                "unknown AP method {other:?} (expected \"allpoint\" or \"11point\")"
            )),
        }
    }
}

/// `100 * tp / (tp + fn)`, as a percentage.
pub fn recall(tp: usize, fn_: usize) -> Result<f64, EvalError> {
    let denom = tp + fn_;
    if denom == 0 {
        return Err(EvalError::UndefinedMetric {
            metric: "recall",
            reason: "tp + fn is zero (no ground truth)".to_string(),
        });
    }
    Ok(100.0 * tp as f64 / denom as f64)
}

/// Cumulative (recall, precision) after each detection of a
/// confidence-ranked outcome sequence. Recall is non-decreasing.
pub fn pr_points(ranked_tp: &[bool], gt_count: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(ranked_tp.len());
    let mut tp = 0usize;
    for (i, &is_tp) in ranked_tp.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        let seen = i + 1;
        out.push((tp as f64 / gt_count as f64, tp as f64 / seen as f64));
    }
    out
}

/// Average precision of one class from its confidence-ranked true/false
/// outcomes, in [0, 1].
pub fn average_precision(
    ranked_tp: &[bool],
    gt_count: usize,
    method: ApMethod,
) -> Result<f64, EvalError> {
    if gt_count == 0 {
        return Err(EvalError::UndefinedMetric {
            metric: "average_precision",
            reason: "class has no ground truth".to_string(),
        });
    }
    let points = pr_points(ranked_tp, gt_count);
    match method {
        ApMethod::AllPoint => {
            // Every true positive advances recall by exactly 1/gt_count and
            // contributes that step times the precision envelope there. The
            // envelope at step i is the best precision at any rank >= i.
            let mut ap = 0.0;
            let mut envelope = 0.0f64;
            for (i, &is_tp) in ranked_tp.iter().enumerate().rev() {
                envelope = envelope.max(points[i].1);
                if is_tp {
                    ap += envelope / gt_count as f64;
                }
            }
            Ok(ap)
        }
        ApMethod::ElevenPoint => {
            let mut sum = 0.0;
            for step in 0..=10 {
                let target = step as f64 / 10.0;
                let best = points
                    .iter()
                    .filter(|(r, _)| *r >= target - 1e-12)
                    .map(|(_, p)| *p)
                    .fold(0.0f64, f64::max);
                sum += best;
            }
            Ok(sum / 11.0)
        }
    }
}

/// `100 * mean(per-class APs)`.
pub fn mean_average_precision(aps: &[f64]) -> Result<f64, EvalError> {
    if aps.is_empty() {
        return Err(EvalError::UndefinedMetric {
            metric: "mAP",
            reason: "no classes with ground truth".to_string(),
        });
    }
    Ok(100.0 * aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Surviving proposals per evaluated image.
pub fn rps_per_img(total_proposals: usize, image_count: usize) -> Result<f64, EvalError> {
    if image_count == 0 {
        return Err(EvalError::UndefinedMetric {
            metric: "RPs/Img",
            reason: "no images evaluated".to_string(),
        });
    }
    Ok(total_proposals as f64 / image_count as f64)
}

/// `100 * mean IoU` over true-positive matches.
pub fn avg_iou(tp_ious: &[f64]) -> Result<f64, EvalError> {
    if tp_ious.is_empty() {
        return Err(EvalError::UndefinedMetric {
            metric: "avg IoU",
            reason: "no true positives".to_string(),
        });
    }
    Ok(100.0 * tp_ious.iter().sum::<f64>() / tp_ious.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_matches_reported_test_set_arithmetic() {
        // 39123 annotated boxes; 22196 and 26385 correct detections.
        let a = recall(22196, 39123 - 22196).unwrap();
        let b = recall(26385, 39123 - 26385).unwrap();
        assert!((a - 56.73).abs() < 0.01, "{a}");
        assert!((b - 67.44).abs() < 0.01, "{b}");
    }

    #[test]
    fn recall_edge_cases() {
        assert_eq!(recall(0, 5).unwrap(), 0.0);
        assert_eq!(recall(5, 0).unwrap(), 100.0);
        assert!(matches!(
            recall(0, 0),
            Err(EvalError::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn perfect_ranking_has_unit_ap() {
        let ap = average_precision(&[true, true, true], 3, ApMethod::AllPoint).unwrap();
        assert!((ap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_tp_has_zero_ap() {
        let ap = average_precision(&[false, false], 4, ApMethod::AllPoint).unwrap();
        assert_eq!(ap, 0.0);
        assert_eq!(average_precision(&[], 4, ApMethod::AllPoint).unwrap(), 0.0);
    }

    #[test]
    fn tp_fp_tp_over_three_boxes_is_five_ninths() {
        let ap = average_precision(&[true, false, true], 3, ApMethod::AllPoint).unwrap();
        assert!((ap - 5.0 / 9.0).abs() < 1e-9, "{ap}");
    }

    #[test]
    fn ap_requires_ground_truth() {
        assert!(matches!(
            average_precision(&[true], 0, ApMethod::AllPoint),
            Err(EvalError::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn eleven_point_ap_of_perfect_ranking_is_one() {
        let ap = average_precision(&[true, true], 2, ApMethod::ElevenPoint).unwrap();
        assert!((ap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn map_is_the_mean_times_one_hundred() {
        assert!((mean_average_precision(&[0.519]).unwrap() - 51.9).abs() < 1e-9);
        assert!((mean_average_precision(&[1.0, 0.0]).unwrap() - 50.0).abs() < 1e-12);
        let m = mean_average_precision(&[5.0 / 9.0]).unwrap();
        assert!((m - 55.56).abs() < 0.01, "{m}");
        assert!(matches!(
            mean_average_precision(&[]),
            Err(EvalError::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn rps_per_img_is_a_plain_ratio() {
        assert_eq!(rps_per_img(0, 10).unwrap(), 0.0);
        assert_eq!(rps_per_img(7, 2).unwrap(), 3.5);
        assert_eq!(rps_per_img(300, 10).unwrap(), 30.0);
        assert!(matches!(
            rps_per_img(1, 0),
            Err(EvalError::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn avg_iou_is_the_mean_over_true_positives() {
        assert_eq!(avg_iou(&[1.0, 1.0]).unwrap(), 100.0);
        assert!((avg_iou(&[0.5, 0.7]).unwrap() - 60.0).abs() < 1e-12);
        let v = avg_iou(&[1.0 / 7.0]).unwrap();
        assert!((v - 14.29).abs() < 0.01, "{v}");
        assert!(matches!(
            avg_iou(&[]),
            Err(EvalError::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn pr_sweep_of_the_five_ninths_fixture() {
        let pts = pr_points(&[true, false, true], 3);
        let expected = [(1.0 / 3.0, 1.0), (1.0 / 3.0, 0.5), (2.0 / 3.0, 2.0 / 3.0)];
        assert_eq!(pts.len(), 3);
        for ((r, p), (er, ep)) in pts.iter().zip(expected) {
            assert!((r - er).abs() < 1e-12 && (p - ep).abs() < 1e-12);
        }
    }

    #[test]
    fn ap_method_parses_both_spellings() {
        assert_eq!("allpoint".parse::<ApMethod>().unwrap(), ApMethod::AllPoint);
        assert_eq!("11point".parse::<ApMethod>().unwrap(), ApMethod::ElevenPoint);
        assert!("voc".parse::<ApMethod>().is_err());
    }
}

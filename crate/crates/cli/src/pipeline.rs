//! Shared run configuration and the image-to-detections pipeline.

use std::path::{Path, PathBuf};

use darkgrid_core::cfg::{parse_cfg, LayerKind, NetworkGraph};
use darkgrid_core::detect::{decode_head, filter_confidence, nms, Detection};
use darkgrid_core::engine::{forward, load_weights, random_init, WeightStore};
use darkgrid_core::eval::ApMethod;
use darkgrid_core::tensor::Tensor;

use crate::error::CliError;
use crate::image::{fit_to_network, Fit};

/// Where convolution parameters come from.
#[derive(Debug, Clone)]
pub enum WeightSource {
    File(PathBuf),
    Seed(u64),
}

/// Settings shared by the detection and evaluation commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub cfg: PathBuf,
    pub weights: WeightSource,
    /// Square input-size override; must be a positive multiple of 32.
    pub size: Option<usize>,
    pub conf_thresh: f64,
    /// Greedy suppression threshold; 0 disables suppression entirely
    /// (Darknet convention), so every decoded box survives.
    pub nms_thresh: f64,
    /// IoU above which a detection matches ground truth during evaluation.
    pub iou_thresh: f64,
    pub ap_method: ApMethod,
    pub letterbox: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("--conf-thresh", self.conf_thresh),
            ("--nms-thresh", self.nms_thresh),
            ("--iou-thresh", self.iou_thresh),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::usage(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if let Some(size) = self.size {
            if size == 0 || size % 32 != 0 {
                return Err(CliError::usage(format!(
                    "--size must be a positive multiple of 32, got {size}"
                )));
            }
        }
        Ok(())
    }
}

/// A parsed graph bound to its weights.
pub struct Network {
    pub graph: NetworkGraph,
    pub store: WeightStore,
}

/// Parses a cfg file, applying an optional square input-size override.
pub fn load_graph(cfg: &Path, size: Option<usize>) -> Result<NetworkGraph, CliError> {
    let text = std::fs::read_to_string(cfg)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", cfg.display())))?;
    let graph = parse_cfg(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", cfg.display())))?;
    match size {
        Some(s) => Ok(graph.with_input_size(s)?),
        None => Ok(graph),
    }
}

impl Network {
    pub fn load(config: &RunConfig) -> Result<Network, CliError> {
        config.validate()?;
        let graph = load_graph(&config.cfg, config.size)?;
        let store = match &config.weights {
            WeightSource::Seed(seed) => random_init(&graph, *seed),
            WeightSource::File(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
                load_weights(&graph, &bytes)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
            }
        };
        Ok(Network { graph, store })
    }
}

/// One detection mapped back to original image pixels, corner format.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDetection {
    pub class: usize,
    pub confidence: f64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

fn to_pixels(det: &Detection, fit: Fit, net: (usize, usize), orig: (usize, usize)) -> PixelDetection {
    let (net_w, net_h) = (net.0 as f64, net.1 as f64);
    let (orig_w, orig_h) = (orig.0 as f64, orig.1 as f64);
    let b = det.bbox;
    let (left, top, width, height) = match fit {
        Fit::Stretch => (
            (b.cx - b.w / 2.0) * orig_w,
            (b.cy - b.h / 2.0) * orig_h,
            b.w * orig_w,
            b.h * orig_h,
        ),
        Fit::Letterbox {
            scaled_w,
            scaled_h,
            dx,
            dy,
        } => {
            let sx = orig_w / scaled_w as f64;
            let sy = orig_h / scaled_h as f64;
            let left = (b.cx * net_w - dx as f64 - b.w * net_w / 2.0) * sx;
            let top = (b.cy * net_h - dy as f64 - b.h * net_h / 2.0) * sy;
            (left, top, b.w * net_w * sx, b.h * net_h * sy)
        }
    };
    PixelDetection {
        class: det.best_class,
        confidence: det.confidence,
        left,
        top,
        width,
        height,
    }
}

/// Runs the full pipeline on a decoded image: fit to the network input,
/// forward, decode every head, filter, suppress, then map back to original
/// pixels. Output is ordered by confidence descending (ties keep decode
/// order), so results are deterministic.
pub fn detect_image(
    net: &Network,
    image: &Tensor,
    config: &RunConfig,
) -> Result<Vec<PixelDetection>, CliError> {
    let input_shape = net.graph.input_shape();
    let (net_h, net_w) = (input_shape.h, input_shape.w);
    let (fitted, fit) = fit_to_network(image, net_w, net_h, config.letterbox);
    let result = forward(&net.graph, &net.store, &fitted)?;

    let mut decoded: Vec<Detection> = Vec::new();
    for (layer_idx, tensor) in &result.yolo_outputs {
        let LayerKind::Yolo {
            mask,
            anchors,
            classes,
            ..
        } = &net.graph.layers()[*layer_idx]
        else {
            unreachable!("forward only records yolo layers");
        };
        let head_anchors: Vec<(f32, f32)> = mask.iter().map(|&m| anchors[m]).collect();
        decoded.extend(decode_head(tensor, &head_anchors, *classes, net_w, net_h)?);
    }

    let filtered = filter_confidence(decoded, config.conf_thresh);
    let mut survivors = if config.nms_thresh > 0.0 {
        nms(&filtered, config.nms_thresh)
    } else {
        filtered
    };
    // A stable sort keeps decode order among equal confidences.
    survivors.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

    let orig_shape = image.shape();
    Ok(survivors
        .iter()
        .map(|d| to_pixels(d, fit, (net_w, net_h), (orig_shape.w, orig_shape.h)))
        .collect())
}

//! Inference and evaluation toolkit for Darknet-style detection networks.
//!
//! The crate is organized around the lifecycle of a detection run:
//!
//! * [`tensor`] — dense NCHW tensors and the numeric layer kernels
//!   (convolution, batch norm, pooling, upsampling, concat, shortcut).
//! * [`cfg`] — parser and shape inference for the textual network
//!   configuration format, including the two shipped reference graphs.
//! * [`engine`] — binary weight loading, seeded random initialization and
//!   the forward pass.
//! * [`detect`] — grid decoding of raw head tensors into boxes, confidence
//!   filtering and non-maximum suppression.
//! * [`eval`] — ground-truth ingestion, greedy IoU matching and the
//!   Recall / mAP / avg-IoU / RPs-per-image report with PR curves.

pub mod cfg;
pub mod detect;
pub mod engine;
pub mod eval;
pub mod tensor;

pub use cfg::{LayerKind, NetworkGraph, ShapeTable};
pub use detect::{BBox, Detection};
pub use engine::{ForwardResult, WeightStore};
pub use eval::{EvalReport, GroundTruthBox, MatchResult};
pub use tensor::{ConvParams, Shape4, Tensor};

//! Binary weight loading, seeded initialization and the forward pass.
//!
//! The weight file is the Darknet layout: a 20-byte header (three signed
//! 32-bit little-endian integers `major`, `minor`, `revision`, then an
//! unsigned 64-bit image counter) followed by one parameter block per
//! convolutional layer in graph order. A batch-normalized layer stores
//! `beta`, `gamma`, `rolling_mean`, `rolling_var` (one float per filter
//! each); a plain layer stores `bias`. The kernel weights
//! (`filters * in_c * size * size` floats) follow either way. The file must
//! be consumed exactly: a short file or trailing bytes is an error carrying
//! the byte offset.

use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cfg::{conv_padding, maxpool_padding, Activation, LayerKind, NetworkGraph, Shape3};
use crate::tensor::{
    self, BatchNormParams, ConvParams, Shape4, Tensor, TensorError, BN_EPSILON, LEAKY_SLOPE,
};

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("weight file is {len} bytes, too short for the 20-byte header")]
    ShortHeader { len: usize },
    #[error("unsupported weight file version {major}.{minor} (expected major 0, minor 1 or 2)")]
    UnsupportedVersion { major: i32, minor: i32 },
    #[error(
        "weight file exhausted at byte offset {offset} while reading {what} for layer {layer}"
    )]
    Truncated {
        offset: usize,
        layer: usize,
        what: &'static str,
    },
    #[error("{remaining} trailing bytes after all layer parameters (offset {offset})")]
    TrailingBytes { offset: usize, remaining: usize },
    #[error("store holds {got} convolutional blocks but the graph has {expected}")]
    BlockCount { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("input shape {got} does not match network input {expected} (batch must be 1)")]
    InputShape { expected: Shape4, got: Shape4 },
    #[error("layer {layer} ({kind}): {source}")]
    Kernel {
        layer: usize,
        kind: &'static str,
        #[source]
        source: TensorError,
    },
    #[error(transparent)]
    Weights(#[from] WeightError),
}

/// Header of a weight file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightHeader {
    pub major: i32,
    pub minor: i32,
    pub revision: i32,
    pub images_seen: u64,
}

/// Parameters for one convolutional layer. `bias` is all zeros when the
/// layer is batch-normalized; the file's leading per-filter block is the
/// normalization offset (`beta`) in that case.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub bias: Vec<f32>,
    pub batch_norm: Option<BatchNormParams>,
    pub kernel: Vec<f32>,
}

/// All convolutional parameters of a graph, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    pub header: WeightHeader,
    blocks: Vec<LayerWeights>,
}

impl WeightStore {
    pub fn blocks(&self) -> &[LayerWeights] {
        &self.blocks
    }

    /// Total number of stored parameter values.
    pub fn value_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| {
                let bn = b
                    .batch_norm
                    .as_ref()
                    .map(|bn| bn.gamma.len() + bn.beta.len() + bn.mean.len() + bn.var.len())
                    .unwrap_or(0);
                b.bias.len() + bn + b.kernel.len()
            })
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().all(|b| {
            let bn_ok = b.batch_norm.as_ref().map_or(true, |bn| {
                [&bn.gamma, &bn.beta, &bn.mean, &bn.var]
                    .iter()
                    .all(|v| v.iter().all(|x| x.is_finite()))
            });
            bn_ok
                && b.bias.iter().all(|x| x.is_finite())
                && b.kernel.iter().all(|x| x.is_finite())
        })
    }

    /// Serializes the store back to the binary file layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.header.major.to_le_bytes());
        out.extend_from_slice(&self.header.minor.to_le_bytes());
        out.extend_from_slice(&self.header.revision.to_le_bytes());
        out.extend_from_slice(&self.header.images_seen.to_le_bytes());
        for block in &self.blocks {
            match &block.batch_norm {
                Some(bn) => {
                    for seq in [&bn.beta, &bn.gamma, &bn.mean, &bn.var] {
                        for v in seq.iter() {
                            out.extend_from_slice(&v.to_le_bytes());
                        }
                    }
                }
                None => {
                    for v in &block.bias {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
            for v in &block.kernel {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Raw head tensors produced by a forward pass, one per yolo layer in graph
/// order, plus optional per-layer wall-clock timings.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub yolo_outputs: Vec<(usize, Tensor)>,
    pub layer_times_ms: Option<Vec<f64>>,
}

/// Input shape (channels, rows, cols) feeding layer `i`.
fn layer_input_shape(g: &NetworkGraph, i: usize) -> Shape3 {
    if i == 0 {
        g.input_shape()
    } else {
        g.shape(i - 1)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn read_f32s(
        &mut self,
        count: usize,
        layer: usize,
        what: &'static str,
    ) -> Result<Vec<f32>, WeightError> {
        let need = count * 4;
        if self.bytes.len() - self.pos < need {
            // Report where the data ran out, on a float boundary.
            let whole = (self.bytes.len() - self.pos) / 4;
            return Err(WeightError::Truncated {
                offset: self.pos + whole * 4,
                layer,
                what,
            });
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let raw: [u8; 4] = self.bytes[self.pos..self.pos + 4].try_into().unwrap();
            out.push(f32::from_le_bytes(raw));
            self.pos += 4;
        }
        Ok(out)
    }
}

/// Parses a weight file against a shape-inferred graph.
pub fn load_weights(g: &NetworkGraph, bytes: &[u8]) -> Result<WeightStore, WeightError> {
    if bytes.len() < 20 {
        return Err(WeightError::ShortHeader { len: bytes.len() });
    }
    let major = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let minor = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let revision = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let images_seen = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if major != 0 || !(minor == 1 || minor == 2) {
        return Err(WeightError::UnsupportedVersion { major, minor });
    }
    let header = WeightHeader {
        major,
        minor,
        revision,
        images_seen,
    };

    let mut cursor = Cursor { bytes, pos: 20 };
    let mut blocks = Vec::new();
    for (i, layer) in g.layers().iter().enumerate() {
        let LayerKind::Convolutional {
            filters,
            size,
            batch_normalize,
            ..
        } = layer
        else {
            continue;
        };
        let in_c = layer_input_shape(g, i).c;
        let (bias, batch_norm) = if *batch_normalize {
            let beta = cursor.read_f32s(*filters, i, "batch-norm beta")?;
            let gamma = cursor.read_f32s(*filters, i, "batch-norm gamma")?;
            let mean = cursor.read_f32s(*filters, i, "batch-norm rolling mean")?;
            let var = cursor.read_f32s(*filters, i, "batch-norm rolling variance")?;
            (
                vec![0.0; *filters],
                Some(BatchNormParams {
                    gamma,
                    beta,
                    mean,
                    var,
                    epsilon: BN_EPSILON,
                }),
            )
        } else {
            (cursor.read_f32s(*filters, i, "bias")?, None)
        };
        let kernel = cursor.read_f32s(filters * in_c * size * size, i, "kernel weights")?;
        blocks.push(LayerWeights {
            bias,
            batch_norm,
            kernel,
        });
    }
    if cursor.pos != bytes.len() {
        return Err(WeightError::TrailingBytes {
            offset: cursor.pos,
            remaining: bytes.len() - cursor.pos,
        });
    }
    Ok(WeightStore { header, blocks })
}

/// Deterministic pseudorandom weights for a graph: kernels and biases drawn
/// uniformly from [-0.1, 0.1], batch-norm statistics at identity
/// (gamma 1, beta 0, mean 0, var 1).
pub fn random_init(g: &NetworkGraph, seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-0.1f32, 0.1f32);
    let mut blocks = Vec::new();
    for (i, layer) in g.layers().iter().enumerate() {
        let LayerKind::Convolutional {
            filters,
            size,
            batch_normalize,
            ..
        } = layer
        else {
            continue;
        };
        let in_c = layer_input_shape(g, i).c;
        let (bias, batch_norm) = if *batch_normalize {
            (
                vec![0.0; *filters],
                Some(BatchNormParams {
                    gamma: vec![1.0; *filters],
                    beta: vec![0.0; *filters],
                    mean: vec![0.0; *filters],
                    var: vec![1.0; *filters],
                    epsilon: BN_EPSILON,
                }),
            )
        } else {
            (
                (0..*filters).map(|_| dist.sample(&mut rng)).collect(),
                None,
            )
        };
        let kernel = (0..filters * in_c * size * size)
            .map(|_| dist.sample(&mut rng))
            .collect();
        blocks.push(LayerWeights {
            bias,
            batch_norm,
            kernel,
        });
    }
    WeightStore {
        header: WeightHeader {
            major: 0,
            minor: 2,
            revision: 0,
            images_seen: 0,
        },
        blocks,
    }
}

/// Index of the last layer that consumes each layer's output. Outputs may be
/// dropped as soon as execution passes that point; dropping never changes
/// results because tensors are immutable values.
fn last_use(g: &NetworkGraph) -> Vec<usize> {
    let layers = g.layers();
    let mut last: Vec<usize> = (0..layers.len()).collect();
    for (j, layer) in layers.iter().enumerate() {
        let mut consume = |i: usize| {
            if last[i] < j {
                last[i] = j;
            }
        };
        match layer {
            LayerKind::Route { layers } => layers.iter().for_each(|&i| consume(i)),
            LayerKind::Shortcut { from, .. } => {
                consume(*from);
                if j > 0 {
                    consume(j - 1);
                }
            }
            _ => {
                if j > 0 {
                    consume(j - 1);
                }
            }
        }
    }
    last
}

fn apply_activation(t: Tensor, activation: Activation) -> Tensor {
    match activation {
        Activation::Linear => t,
        Activation::Leaky => tensor::leaky_relu(&t, LEAKY_SLOPE),
    }
}

fn run_forward(
    g: &NetworkGraph,
    w: &WeightStore,
    input: &Tensor,
    release_unused: bool,
    timed: bool,
) -> Result<ForwardResult, ForwardError> {
    let net = g.input_shape();
    let expected = Shape4::new(1, net.c, net.h, net.w);
    if input.shape() != expected {
        return Err(ForwardError::InputShape {
            expected,
            got: input.shape(),
        });
    }
    let conv_layers = g
        .layers()
        .iter()
        .filter(|l| matches!(l, LayerKind::Convolutional { .. }))
        .count();
    if w.blocks.len() != conv_layers {
        return Err(WeightError::BlockCount {
            expected: conv_layers,
            got: w.blocks.len(),
        }
        .into());
    }

    let last = last_use(g);
    let mut cache: Vec<Option<Tensor>> = vec![None; g.layers().len()];
    let mut yolo_outputs = Vec::with_capacity(g.yolo_layers().len());
    let mut times = timed.then(|| Vec::with_capacity(g.layers().len()));
    let mut conv_index = 0usize;

    for (i, layer) in g.layers().iter().enumerate() {
        let started = timed.then(Instant::now);
        let prev: &Tensor = if i == 0 {
            input
        } else {
            cache[i - 1].as_ref().expect("previous output retained")
        };
        let kernel_err = |source: TensorError| ForwardError::Kernel {
            layer: i,
            kind: layer.name(),
            source,
        };
        let out = match layer {
            LayerKind::Convolutional {
                filters,
                size,
                stride,
                pad,
                activation,
                ..
            } => {
                let block = &w.blocks[conv_index];
                conv_index += 1;
                let params = ConvParams {
                    filters: *filters,
                    size: *size,
                    stride: *stride,
                    pad: conv_padding(*size, *pad),
                    weights: block.kernel.clone(),
                    bias: block.bias.clone(),
                    batch_norm: block.batch_norm.clone(),
                };
                let t = tensor::conv2d(prev, &params).map_err(kernel_err)?;
                apply_activation(t, *activation)
            }
            LayerKind::Maxpool { size, stride } => {
                tensor::maxpool_padded(prev, *size, *stride, maxpool_padding(*size))
                    .map_err(kernel_err)?
            }
            LayerKind::Upsample { stride } => tensor::upsample_nearest(prev, *stride),
            LayerKind::Route { layers } => {
                let mut acc = cache[layers[0]]
                    .as_ref()
                    .expect("route input retained")
                    .clone();
                for &r in &layers[1..] {
                    let rhs = cache[r].as_ref().expect("route input retained");
                    acc = tensor::concat_channels(&acc, rhs).map_err(kernel_err)?;
                }
                acc
            }
            LayerKind::Shortcut { from, activation } => {
                let from_t = cache[*from].as_ref().expect("shortcut input retained");
                let t = tensor::shortcut_add(prev, from_t).map_err(kernel_err)?;
                apply_activation(t, *activation)
            }
            LayerKind::Yolo { .. } => {
                let t = prev.clone();
                yolo_outputs.push((i, t.clone()));
                t
            }
        };
        cache[i] = Some(out);
        if release_unused {
            for (k, slot) in cache.iter_mut().enumerate().take(i) {
                if last[k] <= i {
                    *slot = None;
                }
            }
        }
        if let (Some(times), Some(started)) = (times.as_mut(), started) {
            times.push(started.elapsed().as_secs_f64() * 1e3);
        }
    }

    Ok(ForwardResult {
        yolo_outputs,
        layer_times_ms: times,
    })
}

/// Executes the graph on a single input, returning every yolo head tensor in
/// graph order. Pure: repeated calls with the same store and input are
/// bit-identical.
pub fn forward(
    g: &NetworkGraph,
    w: &WeightStore,
    input: &Tensor,
) -> Result<ForwardResult, ForwardError> {
    run_forward(g, w, input, true, false)
}

/// Like [`forward`] but records per-layer wall-clock milliseconds. Timing is
/// diagnostic only and not part of any determinism contract.
pub fn forward_timed(
    g: &NetworkGraph,
    w: &WeightStore,
    input: &Tensor,
) -> Result<ForwardResult, ForwardError> {
    run_forward(g, w, input, true, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::parse_cfg;

    const MINIMAL: &str = "\
[net]
width=8
height=8
channels=3

[convolutional]
filters=2
size=1
stride=1
pad=0
activation=linear
";

    fn minimal_graph() -> NetworkGraph {
        parse_cfg(MINIMAL).unwrap()
    }

    fn minimal_file(payload_floats: &[f32]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        for v in payload_floats {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn minimal_graph_needs_exactly_eight_floats() {
        let g = minimal_graph();
        // 2 biases + 2*3*1*1 kernel weights.
        let payload: Vec<f32> = (0..8).map(|i| i as f32).collect();
        let bytes = minimal_file(&payload);
        assert_eq!(bytes.len(), 52);
        let store = load_weights(&g, &bytes).unwrap();
        assert_eq!(store.blocks().len(), 1);
        assert_eq!(store.blocks()[0].bias, vec![0.0, 1.0]);
        assert_eq!(store.blocks()[0].kernel, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn truncating_four_bytes_fails_at_offset_48() {
        let g = minimal_graph();
        let payload: Vec<f32> = (0..8).map(|i| i as f32).collect();
        let mut bytes = minimal_file(&payload);
        bytes.truncate(bytes.len() - 4);
        match load_weights(&g, &bytes).unwrap_err() {
            WeightError::Truncated { offset, what, .. } => {
                assert_eq!(offset, 48);
                assert_eq!(what, "kernel weights");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_file_is_a_header_error() {
        let g = minimal_graph();
        assert!(matches!(
            load_weights(&g, &[]),
            Err(WeightError::ShortHeader { len: 0 })
        ));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let g = minimal_graph();
        let payload: Vec<f32> = vec![0.0; 9];
        let bytes = minimal_file(&payload);
        match load_weights(&g, &bytes).unwrap_err() {
            WeightError::TrailingBytes { offset, remaining } => {
                assert_eq!(offset, 52);
                assert_eq!(remaining, 4);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn bad_versions_are_rejected() {
        let g = minimal_graph();
        let mut bytes = minimal_file(&[0.0; 8]);
        bytes[0] = 1; // major = 1
        assert!(matches!(
            load_weights(&g, &bytes),
            Err(WeightError::UnsupportedVersion { major: 1, .. })
        ));
        let mut bytes = minimal_file(&[0.0; 8]);
        bytes[4] = 3; // minor = 3
        assert!(matches!(
            load_weights(&g, &bytes),
            Err(WeightError::UnsupportedVersion { minor: 3, .. })
        ));
    }

    #[test]
    fn batch_norm_blocks_load_in_beta_gamma_mean_var_order() {
        let text = "\
[net]
width=4
height=4
channels=1

[convolutional]
batch_normalize=1
filters=2
size=1
stride=1
pad=0
activation=leaky
";
        let g = parse_cfg(text).unwrap();
        // beta, gamma, mean, var (2 each), then 2 kernel weights.
        let payload = [10.0, 11.0, 20.0, 21.0, 30.0, 31.0, 40.0, 41.0, 1.0, 2.0];
        let store = load_weights(&g, &minimal_file(&payload)).unwrap();
        let bn = store.blocks()[0].batch_norm.as_ref().unwrap();
        assert_eq!(bn.beta, vec![10.0, 11.0]);
        assert_eq!(bn.gamma, vec![20.0, 21.0]);
        assert_eq!(bn.mean, vec![30.0, 31.0]);
        assert_eq!(bn.var, vec![40.0, 41.0]);
        assert_eq!(store.blocks()[0].bias, vec![0.0, 0.0]);
        assert_eq!(store.blocks()[0].kernel, vec![1.0, 2.0]);
    }

    #[test]
    fn weight_bytes_round_trip() {
        let g = minimal_graph();
        let store = random_init(&g, 3);
        let again = load_weights(&g, &store.to_bytes()).unwrap();
        assert_eq!(store, again);
    }

    #[test]
    fn random_init_is_deterministic_per_seed() {
        let g = minimal_graph();
        let a = random_init(&g, 42);
        let b = random_init(&g, 42);
        let c = random_init(&g, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.value_count(), 8);
        assert!(a.all_finite());
        assert!(a
            .blocks()
            .iter()
            .all(|blk| blk.kernel.iter().all(|v| (-0.1..=0.1).contains(v))));
    }

    #[test]
    fn forward_rejects_wrong_input_shape() {
        let g = minimal_graph();
        let w = random_init(&g, 0);
        let bad = Tensor::zeros(Shape4::new(1, 3, 4, 4));
        assert!(matches!(
            forward(&g, &w, &bad),
            Err(ForwardError::InputShape { .. })
        ));
    }

    #[test]
    fn forward_is_reproducible() {
        let text = "\
[net]
width=16
height=16
channels=3

[convolutional]
batch_normalize=1
filters=8
size=3
stride=2
pad=1
activation=leaky

[maxpool]
size=2
stride=2

[convolutional]
filters=18
size=1
stride=1
pad=0
activation=linear

[yolo]
mask=0,1,2
anchors=10,13,16,30,33,23
classes=1
num=3
";
        let g = parse_cfg(text).unwrap();
        let w = random_init(&g, 9);
        let x = Tensor::filled(Shape4::new(1, 3, 16, 16), 0.25);
        let a = forward(&g, &w, &x).unwrap();
        let b = forward(&g, &w, &x).unwrap();
        assert_eq!(a.yolo_outputs.len(), 1);
        assert_eq!(a.yolo_outputs[0].1.shape(), Shape4::new(1, 18, 4, 4));
        assert_eq!(a.yolo_outputs[0].1, b.yolo_outputs[0].1);
    }

    #[test]
    fn release_schedule_does_not_change_results() {
        let text = "\
[net]
width=16
height=16
channels=3

[convolutional]
batch_normalize=1
filters=4
size=3
stride=1
pad=1
activation=leaky

[convolutional]
batch_normalize=1
filters=4
size=3
stride=1
pad=1
activation=leaky

[shortcut]
from=0
activation=linear

[route]
layers=-1,0

[convolutional]
filters=18
size=1
stride=1
pad=0
activation=linear

[yolo]
mask=0,1,2
anchors=10,13,16,30,33,23
classes=1
num=3
";
        let g = parse_cfg(text).unwrap();
        let w = random_init(&g, 5);
        let x = Tensor::filled(Shape4::new(1, 3, 16, 16), -0.5);
        let eager = run_forward(&g, &w, &x, true, false).unwrap();
        let retained = run_forward(&g, &w, &x, false, false).unwrap();
        assert_eq!(eager.yolo_outputs, retained.yolo_outputs);
    }

    #[test]
    fn zero_weights_give_zero_head_maps() {
        let text = "\
[net]
width=8
height=8
channels=3

[convolutional]
batch_normalize=1
filters=12
size=3
stride=1
pad=1
activation=leaky

[convolutional]
filters=12
size=1
stride=1
pad=0
activation=linear

[yolo]
mask=0,1
anchors=10,13,16,30
classes=1
num=2
";
        let g = parse_cfg(text).unwrap();
        let zero_bytes = {
            let floats = 12 * 4 + 12 * 3 * 9 + 12 + 12 * 12;
            let mut bytes = Vec::new();
            bytes.extend_from_slice(&0i32.to_le_bytes());
            bytes.extend_from_slice(&2i32.to_le_bytes());
            bytes.extend_from_slice(&0i32.to_le_bytes());
            bytes.extend_from_slice(&0u64.to_le_bytes());
            bytes.extend(std::iter::repeat(0u8).take(floats * 4));
            bytes
        };
        let w = load_weights(&g, &zero_bytes).unwrap();
        let x = Tensor::zeros(Shape4::new(1, 3, 8, 8));
        let out = forward(&g, &w, &x).unwrap();
        assert!(out.yolo_outputs[0].1.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn timed_forward_reports_every_layer() {
        let g = minimal_graph();
        let w = random_init(&g, 1);
        let x = Tensor::zeros(Shape4::new(1, 3, 8, 8));
        let r = forward_timed(&g, &w, &x).unwrap();
        assert_eq!(r.layer_times_ms.as_ref().unwrap().len(), 1);
    }
}

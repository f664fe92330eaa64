//! Dense 4-D tensors (batch, channels, rows, cols) and the layer kernels.
//!
//! Tensors are immutable values: every kernel is a pure function returning a
//! fresh tensor, so a tensor may be shared across threads freely. All
//! arithmetic is 32-bit float; accumulation order is fixed so repeated calls
//! are bit-identical.

use thiserror::Error;

/// Extents of a 4-D tensor in NCHW order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape4 { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {got} does not match shape {shape} (expected {expected})")]
    DataLength {
        shape: Shape4,
        expected: usize,
        got: usize,
    },
    #[error("all four extents must be >= 1, got {0}")]
    EmptyExtent(Shape4),
    #[error("input has {input_channels} channels but kernel weights expect {weight_channels}")]
    ChannelMismatch {
        input_channels: usize,
        weight_channels: usize,
    },
    #[error("weight count {got} does not match filters*in_c*size*size = {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("bias count {got} does not match filter count {expected}")]
    BiasLength { expected: usize, got: usize },
    #[error("per-channel parameter length {got} does not match channel count {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("stride must be >= 1")]
    ZeroStride,
    #[error("window of size {size} exceeds padded input extent {padded}")]
    WindowTooLarge { size: usize, padded: usize },
    #[error("variance plus epsilon must be positive, got {0}")]
    NonPositiveVariance(f32),
    #[error("spatial dimensions differ: {a} vs {b}")]
    SpatialMismatch { a: Shape4, b: Shape4 },
    #[error("shapes differ: {a} vs {b}")]
    ShapeMismatch { a: Shape4, b: Shape4 },
    #[error("channel slice {start}..{end} out of range for {channels} channels")]
    ChannelRange {
        start: usize,
        end: usize,
        channels: usize,
    },
}

/// Dense row-major NCHW tensor of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape4,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, checking that `data` matches `shape` and that every
    /// extent is at least one.
    pub fn new(shape: Shape4, data: Vec<f32>) -> Result<Self, TensorError> {
        if shape.n == 0 || shape.c == 0 || shape.h == 0 || shape.w == 0 {
            return Err(TensorError::EmptyExtent(shape));
        }
        if data.len() != shape.len() {
            return Err(TensorError::DataLength {
                shape,
                expected: shape.len(),
                got: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape4) -> Self {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape4, value: f32) -> Self {
        assert!(!shape.is_empty(), "tensor extents must be >= 1");
        Tensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        debug_assert!(n < self.shape.n && c < self.shape.c && y < self.shape.h && x < self.shape.w);
        self.data[self.offset(n, c, y, x)]
    }

    /// Contiguous view of one channel plane.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let start = self.offset(n, c, 0, 0);
        &self.data[start..start + self.shape.h * self.shape.w]
    }

    /// Copies channels `start..end` into a new tensor.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Tensor, TensorError> {
        if start >= end || end > self.shape.c {
            return Err(TensorError::ChannelRange {
                start,
                end,
                channels: self.shape.c,
            });
        }
        let out_shape = Shape4::new(self.shape.n, end - start, self.shape.h, self.shape.w);
        let plane = self.shape.h * self.shape.w;
        let mut data = Vec::with_capacity(out_shape.len());
        for n in 0..self.shape.n {
            let lo = self.offset(n, start, 0, 0);
            data.extend_from_slice(&self.data[lo..lo + (end - start) * plane]);
        }
        Tensor::new(out_shape, data)
    }

    pub fn iter(&self) -> impl Iterator<Item = f32> + '_ {
        self.data.iter().copied()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Per-channel batch normalization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub epsilon: f32,
}

/// Darknet-convention batch-norm epsilon.
pub const BN_EPSILON: f32 = 1e-5;

/// Darknet-convention leaky activation slope.
pub const LEAKY_SLOPE: f32 = 0.1;

/// Bound convolution parameters: kernel weights laid out as
/// `[filter][in_channel][ky][kx]`, one bias per filter, optional batch norm
/// applied after the windowed product.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub filters: usize,
    pub size: usize,
    pub stride: usize,
    pub pad: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub batch_norm: Option<BatchNormParams>,
}

impl ConvParams {
    /// Input channel count implied by the weight vector, given the declared
    /// filter count and kernel size.
    pub fn bound_in_channels(&self) -> Option<usize> {
        let per_filter = self.size * self.size * self.filters;
        if per_filter == 0 || self.weights.len() % per_filter != 0 {
            None
        } else {
            Some(self.weights.len() / per_filter)
        }
    }
}

/// 2-D cross-correlation (Darknet convention: no kernel flip), bias add,
/// then batch normalization when present. Output spatial extents follow
/// `(dim + 2*pad - size) / stride + 1`.
pub fn conv2d(input: &Tensor, p: &ConvParams) -> Result<Tensor, TensorError> {
    let Shape4 { n, c, h, w } = input.shape();
    if p.stride == 0 {
        return Err(TensorError::ZeroStride);
    }
    let expected = p.filters * c * p.size * p.size;
    if p.weights.len() != expected {
        // Distinguish a wrong channel count from a malformed weight vector.
        if let Some(bound) = p.bound_in_channels() {
            return Err(TensorError::ChannelMismatch {
                input_channels: c,
                weight_channels: bound,
            });
        }
        return Err(TensorError::WeightLength {
            expected,
            got: p.weights.len(),
        });
    }
    if p.bias.len() != p.filters {
        return Err(TensorError::BiasLength {
            expected: p.filters,
            got: p.bias.len(),
        });
    }
    let padded_h = h + 2 * p.pad;
    let padded_w = w + 2 * p.pad;
    if padded_h < p.size || padded_w < p.size {
        return Err(TensorError::WindowTooLarge {
            size: p.size,
            padded: padded_h.min(padded_w),
        });
    }
    let out_h = (padded_h - p.size) / p.stride + 1;
    let out_w = (padded_w - p.size) / p.stride + 1;
    let out_shape = Shape4::new(n, p.filters, out_h, out_w);
    let mut out = vec![0.0f32; out_shape.len()];

    let k_dim = c * p.size * p.size;
    let m_dim = out_h * out_w;
    let mut cols = if p.size == 1 && p.stride == 1 && p.pad == 0 {
        Vec::new()
    } else {
        vec![0.0f32; k_dim * m_dim]
    };

    for batch in 0..n {
        let in_base = batch * c * h * w;
        let out_base = batch * p.filters * m_dim;
        let src: &[f32] = if cols.is_empty() {
            // 1x1/stride-1 kernels multiply the input planes directly.
            &input.data()[in_base..in_base + c * h * w]
        } else {
            im2col(
                &input.data()[in_base..in_base + c * h * w],
                c,
                h,
                w,
                p.size,
                p.stride,
                p.pad,
                out_h,
                out_w,
                &mut cols,
            );
            &cols
        };
        // out[filters x m] = weights[filters x k] * src[k x m]
        unsafe {
            matrixmultiply::sgemm(
                p.filters,
                k_dim,
                m_dim,
                1.0,
                p.weights.as_ptr(),
                k_dim as isize,
                1,
                src.as_ptr(),
                m_dim as isize,
                1,
                0.0,
                out[out_base..].as_mut_ptr(),
                m_dim as isize,
                1,
            );
        }
        for f in 0..p.filters {
            let b = p.bias[f];
            if b != 0.0 {
                for v in &mut out[out_base + f * m_dim..out_base + (f + 1) * m_dim] {
                    *v += b;
                }
            }
        }
    }

    let out = Tensor::new(out_shape, out)?;
    match &p.batch_norm {
        Some(bn) => batch_norm_apply(&out, bn),
        None => Ok(out),
    }
}

#[allow(clippy::too_many_arguments)]
fn im2col(
    input: &[f32],
    c: usize,
    h: usize,
    w: usize,
    size: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
    cols: &mut [f32],
) {
    let mut row = 0;
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for ky in 0..size {
            for kx in 0..size {
                let dst = &mut cols[row * out_h * out_w..(row + 1) * out_h * out_w];
                for oy in 0..out_h {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let dst_row = &mut dst[oy * out_w..(oy + 1) * out_w];
                    if iy < 0 || iy >= h as isize {
                        dst_row.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, slot) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *slot = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// `y = gamma * (x - mean) / sqrt(var + epsilon) + beta`, per channel.
pub fn batch_norm_apply(x: &Tensor, bn: &BatchNormParams) -> Result<Tensor, TensorError> {
    let Shape4 { n, c, h, w } = x.shape();
    for params in [&bn.gamma, &bn.beta, &bn.mean, &bn.var] {
        if params.len() != c {
            return Err(TensorError::ParamLength {
                expected: c,
                got: params.len(),
            });
        }
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(x.data().len());
    for batch in 0..n {
        for ch in 0..c {
            let denom = bn.var[ch] + bn.epsilon;
            if denom <= 0.0 {
                return Err(TensorError::NonPositiveVariance(denom));
            }
            let scale = bn.gamma[ch] / denom.sqrt();
            let mean = bn.mean[ch];
            let beta = bn.beta[ch];
            let base = (batch * c + ch) * plane;
            data.extend(
                x.data()[base..base + plane]
                    .iter()
                    .map(|&v| (v - mean) * scale + beta),
            );
        }
    }
    Tensor::new(x.shape(), data)
}

/// Element-wise `max(x, slope * x)` for a slope in (0, 1).
pub fn leaky_relu(x: &Tensor, slope: f32) -> Tensor {
    let data = x
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v } else { slope * v })
        .collect();
    Tensor {
        shape: x.shape(),
        data,
    }
}

/// Max pooling with no implicit padding: output extents are
/// `(dim - size) / stride + 1` and every window lies inside the input.
pub fn maxpool(input: &Tensor, size: usize, stride: usize) -> Result<Tensor, TensorError> {
    maxpool_padded(input, size, stride, 0)
}

/// Max pooling with the Darknet edge rule: the input is notionally padded by
/// `padding` (split `padding/2` on top/left, the remainder on bottom/right)
/// with values that never win the max, and output extents are
/// `(dim + padding - size) / stride + 1`.
pub fn maxpool_padded(
    input: &Tensor,
    size: usize,
    stride: usize,
    padding: usize,
) -> Result<Tensor, TensorError> {
    let Shape4 { n, c, h, w } = input.shape();
    if stride == 0 {
        return Err(TensorError::ZeroStride);
    }
    if size == 0 || h + padding < size || w + padding < size {
        return Err(TensorError::WindowTooLarge {
            size,
            padded: (h + padding).min(w + padding),
        });
    }
    let out_h = (h + padding - size) / stride + 1;
    let out_w = (w + padding - size) / stride + 1;
    let off = padding as isize / 2;
    let mut data = Vec::with_capacity(n * c * out_h * out_w);
    for batch in 0..n {
        for ch in 0..c {
            let plane = input.plane(batch, ch);
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut best = f32::NEG_INFINITY;
                    for ky in 0..size {
                        let iy = (oy * stride + ky) as isize - off;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..size {
                            let ix = (ox * stride + kx) as isize - off;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let v = plane[iy as usize * w + ix as usize];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    data.push(best);
                }
            }
        }
    }
    Tensor::new(Shape4::new(n, c, out_h, out_w), data)
}

/// Nearest-neighbor upsampling: each source pixel becomes a
/// `factor`-by-`factor` block.
///
/// `factor` must be an integer >= 2.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Tensor {
    assert!(factor >= 2, "upsample factor must be >= 2, got {factor}");
    let Shape4 { n, c, h, w } = input.shape();
    let out_shape = Shape4::new(n, c, factor * h, factor * w);
    let mut data = Vec::with_capacity(out_shape.len());
    for batch in 0..n {
        for ch in 0..c {
            let plane = input.plane(batch, ch);
            for y in 0..h * factor {
                let src_row = &plane[(y / factor) * w..(y / factor + 1) * w];
                for x in 0..w * factor {
                    data.push(src_row[x / factor]);
                }
            }
        }
    }
    Tensor {
        shape: out_shape,
        data,
    }
}

/// Concatenates along the channel axis; `a`'s channels come first.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
        return Err(TensorError::SpatialMismatch { a: sa, b: sb });
    }
    let out_shape = Shape4::new(sa.n, sa.c + sb.c, sa.h, sa.w);
    let plane = sa.h * sa.w;
    let mut data = Vec::with_capacity(out_shape.len());
    for n in 0..sa.n {
        data.extend_from_slice(&a.data()[n * sa.c * plane..(n + 1) * sa.c * plane]);
        data.extend_from_slice(&b.data()[n * sb.c * plane..(n + 1) * sb.c * plane]);
    }
    Tensor::new(out_shape, data)
}

/// Element-wise sum of two identically shaped tensors.
pub fn shortcut_add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            a: a.shape(),
            b: b.shape(),
        });
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x + y)
        .collect();
    Ok(Tensor {
        shape: a.shape(),
        data,
    })
}

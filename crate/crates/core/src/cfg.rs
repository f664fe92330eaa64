//! Parser for the textual network-configuration format.
//!
//! A configuration is a sequence of INI-like sections. The first section must
//! be `[net]` and declares the input extents; every following section is one
//! layer. Lines hold `key=value` pairs, `#` starts a comment, and blank lines
//! are ignored. Route and shortcut references may be absolute indices or
//! negative offsets relative to the referencing layer; both resolve to
//! absolute indices at parse time and must point at earlier layers.
//!
//! The full grammar is documented in `docs/cfg-format.md`.

use std::fmt::Write as _;

use thiserror::Error;

/// Keys accepted (and ignored, with a warning) in the `[net]` section so that
/// training-oriented configurations still parse.
const IGNORED_NET_KEYS: &[&str] = &[
    "batch",
    "subdivisions",
    "momentum",
    "decay",
    "angle",
    "saturation",
    "exposure",
    "hue",
    "learning_rate",
    "burn_in",
    "max_batches",
    "policy",
    "steps",
    "scales",
];

/// Training-oriented keys tolerated in `[yolo]` sections for the same reason.
const IGNORED_YOLO_KEYS: &[&str] = &[
    "jitter",
    "ignore_thresh",
    "truth_thresh",
    "random",
    "scale_x_y",
];

#[derive(Debug, Error)]
pub enum CfgError {
    #[error("missing [net] section")]
    MissingNetSection,
    #[error("line {line}: unknown section kind [{kind}]")]
    UnknownSection { kind: String, line: usize },
    #[error("line {line}: malformed key=value line: {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("line {line}: unknown key {key:?} in [{section}] section")]
    UnknownKey {
        section: String,
        key: String,
        line: usize,
    },
    #[error("[{section}] section starting at line {line} is missing required key {key:?}")]
    MissingKey {
        section: String,
        key: String,
        line: usize,
    },
    #[error("line {line}: bad value {value:?} for key {key:?}: {reason}")]
    BadValue {
        key: String,
        value: String,
        line: usize,
        reason: String,
    },
    #[error("layer {layer} references layer {referenced}, which is not earlier in the network")]
    ForwardReference { layer: usize, referenced: isize },
    #[error("layer {layer} references layer {referenced}, which does not exist")]
    OutOfRange { layer: usize, referenced: isize },
    #[error(
        "layer {layer}: yolo input has {incoming} channels but mask length {b} and \
         {classes} classes require {expected}"
    )]
    YoloChannelMismatch {
        layer: usize,
        incoming: usize,
        expected: usize,
        b: usize,
        classes: usize,
    },
    #[error("layer {layer}: {reason}")]
    BadYoloLayer { layer: usize, reason: String },
    #[error("layer {layer} ({kind}): {reason}")]
    ShapeInference {
        layer: usize,
        kind: String,
        reason: String,
    },
}

/// Activation applied after a layer's arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Leaky,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Leaky => "leaky",
        }
    }
}

/// One parsed layer. Route and shortcut indices are absolute.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Convolutional {
        filters: usize,
        size: usize,
        stride: usize,
        pad: bool,
        batch_normalize: bool,
        activation: Activation,
    },
    Maxpool {
        size: usize,
        stride: usize,
    },
    Upsample {
        stride: usize,
    },
    Route {
        layers: Vec<usize>,
    },
    Shortcut {
        from: usize,
        activation: Activation,
    },
    Yolo {
        mask: Vec<usize>,
        anchors: Vec<(f32, f32)>,
        classes: usize,
        num: usize,
    },
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Convolutional { .. } => "convolutional",
            LayerKind::Maxpool { .. } => "maxpool",
            LayerKind::Upsample { .. } => "upsample",
            LayerKind::Route { .. } => "route",
            LayerKind::Shortcut { .. } => "shortcut",
            LayerKind::Yolo { .. } => "yolo",
        }
    }
}

/// Output extents of one layer (channels, rows, cols).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl std::fmt::Display for Shape3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} x {} x {}", self.c, self.h, self.w)
    }
}

/// Per-layer output shapes of a validated graph.
pub type ShapeTable = Vec<Shape3>;

/// A parsed, shape-annotated layer graph.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    input: Shape3,
    layers: Vec<LayerKind>,
    shapes: ShapeTable,
    yolo_layers: Vec<usize>,
    warnings: Vec<String>,
}

impl PartialEq for NetworkGraph {
    fn eq(&self, other: &Self) -> bool {
        // Warnings are diagnostics, not structure.
        self.input == other.input && self.layers == other.layers
    }
}

impl NetworkGraph {
    /// Network input extents (channels, rows, cols).
    pub fn input_shape(&self) -> Shape3 {
        self.input
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    /// Output shape of layer `i`.
    pub fn shape(&self, i: usize) -> Shape3 {
        self.shapes[i]
    }

    pub fn shapes(&self) -> &ShapeTable {
        &self.shapes
    }

    /// Indices of the yolo layers, in graph order.
    pub fn yolo_layers(&self) -> &[usize] {
        &self.yolo_layers
    }

    /// Keys that were accepted but ignored while parsing.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Rebuilds the graph with a different square input size. The layer list
    /// is unchanged; shapes are re-inferred and re-validated.
    pub fn with_input_size(&self, size: usize) -> Result<NetworkGraph, CfgError> {
        let input = Shape3 {
            c: self.input.c,
            h: size,
            w: size,
        };
        let shapes = infer_shapes_from(input, &self.layers)?;
        Ok(NetworkGraph {
            input,
            layers: self.layers.clone(),
            shapes,
            yolo_layers: self.yolo_layers.clone(),
            warnings: self.warnings.clone(),
        })
    }
}

struct Section {
    kind: String,
    line: usize,
    entries: Vec<Entry>,
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

fn split_sections(text: &str) -> Result<Vec<Section>, CfgError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let kind = rest.strip_suffix(']').ok_or_else(|| CfgError::MalformedLine {
                line: line_no,
                content: raw.trim().to_string(),
            })?;
            sections.push(Section {
                kind: kind.trim().to_string(),
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CfgError::MalformedLine {
            line: line_no,
            content: raw.trim().to_string(),
        })?;
        let section = sections.last_mut().ok_or_else(|| CfgError::MalformedLine {
            line: line_no,
            content: raw.trim().to_string(),
        })?;
        section.entries.push(Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    Ok(sections)
}

struct SectionReader<'a> {
    section: &'a Section,
    used: Vec<bool>,
}

impl<'a> SectionReader<'a> {
    fn new(section: &'a Section) -> Self {
        SectionReader {
            used: vec![false; section.entries.len()],
            section,
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a Entry> {
        for (i, e) in self.section.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                return Some(e);
            }
        }
        None
    }

    fn required(&mut self, key: &str) -> Result<&'a Entry, CfgError> {
        self.get(key).ok_or_else(|| CfgError::MissingKey {
            section: self.section.kind.clone(),
            key: key.to_string(),
            line: self.section.line,
        })
    }

    fn usize_value(&mut self, key: &str) -> Result<usize, CfgError> {
        let e = self.required(key)?;
        parse_usize(e)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, CfgError> {
        match self.get(key) {
            Some(e) => parse_usize(e),
            None => Ok(default),
        }
    }

    /// Marks `keys` as used; returns the ones that were present.
    fn ignore(&mut self, keys: &[&str]) -> Vec<String> {
        let mut hit = Vec::new();
        for &k in keys {
            if self.get(k).is_some() {
                hit.push(k.to_string());
            }
        }
        hit
    }

    fn finish(self) -> Result<(), CfgError> {
        for (i, used) in self.used.iter().enumerate() {
            if !used {
                let e = &self.section.entries[i];
                return Err(CfgError::UnknownKey {
                    section: self.section.kind.clone(),
                    key: e.key.clone(),
                    line: e.line,
                });
            }
        }
        Ok(())
    }
}

fn parse_usize(e: &Entry) -> Result<usize, CfgError> {
    e.value.parse::<usize>().map_err(|err| CfgError::BadValue {
        key: e.key.clone(),
        value: e.value.clone(),
        line: e.line,
        reason: err.to_string(),
    })
}

fn parse_isize_list(e: &Entry) -> Result<Vec<isize>, CfgError> {
    e.value
        .split(',')
        .map(|tok| {
            tok.trim().parse::<isize>().map_err(|err| CfgError::BadValue {
                key: e.key.clone(),
                value: e.value.clone(),
                line: e.line,
                reason: err.to_string(),
            })
        })
        .collect()
}

fn parse_f32_list(e: &Entry) -> Result<Vec<f32>, CfgError> {
    e.value
        .split(',')
        .map(|tok| {
            tok.trim().parse::<f32>().map_err(|err| CfgError::BadValue {
                key: e.key.clone(),
                value: e.value.clone(),
                line: e.line,
                reason: err.to_string(),
            })
        })
        .collect()
}

fn parse_activation(e: &Entry) -> Result<Activation, CfgError> {
    match e.value.as_str() {
        "linear" => Ok(Activation::Linear),
        "leaky" => Ok(Activation::Leaky),
        other => Err(CfgError::BadValue {
            key: e.key.clone(),
            value: other.to_string(),
            line: e.line,
            reason: "expected \"linear\" or \"leaky\"".to_string(),
        }),
    }
}

/// Resolves a possibly negative layer reference against the referencing
/// layer's index. References must land strictly before `current`.
fn resolve_reference(current: usize, raw: isize) -> Result<usize, CfgError> {
    let abs = if raw < 0 {
        let back = raw.unsigned_abs();
        if back > current {
            return Err(CfgError::OutOfRange {
                layer: current,
                referenced: raw,
            });
        }
        current - back
    } else {
        raw as usize
    };
    if abs >= current {
        return Err(CfgError::ForwardReference {
            layer: current,
            referenced: raw,
        });
    }
    Ok(abs)
}

/// Parses a configuration into a validated, shape-annotated graph.
pub fn parse_cfg(text: &str) -> Result<NetworkGraph, CfgError> {
    let sections = split_sections(text)?;
    let net = sections.first().ok_or(CfgError::MissingNetSection)?;
    if net.kind != "net" {
        return Err(CfgError::MissingNetSection);
    }

    let mut warnings = Vec::new();
    let mut reader = SectionReader::new(net);
    let width = reader.usize_value("width")?;
    let height = reader.usize_value("height")?;
    let channels = reader.usize_value("channels")?;
    for key in reader.ignore(IGNORED_NET_KEYS) {
        warnings.push(format!("[net] key {key:?} is training-only and ignored"));
    }
    reader.finish()?;
    for (key, v) in [("width", width), ("height", height), ("channels", channels)] {
        if v == 0 {
            return Err(CfgError::BadValue {
                key: key.to_string(),
                value: "0".to_string(),
                line: net.line,
                reason: "must be >= 1".to_string(),
            });
        }
    }
    let input = Shape3 {
        c: channels,
        h: height,
        w: width,
    };

    let mut layers = Vec::with_capacity(sections.len() - 1);
    for (index, section) in sections[1..].iter().enumerate() {
        let layer = parse_layer(section, index, &mut warnings)?;
        layers.push(layer);
    }

    let shapes = infer_shapes_from(input, &layers)?;
    let yolo_layers = layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, LayerKind::Yolo { .. }))
        .map(|(i, _)| i)
        .collect();

    Ok(NetworkGraph {
        input,
        layers,
        shapes,
        yolo_layers,
        warnings,
    })
}

fn parse_layer(
    section: &Section,
    index: usize,
    warnings: &mut Vec<String>,
) -> Result<LayerKind, CfgError> {
    let mut reader = SectionReader::new(section);
    let layer = match section.kind.as_str() {
        "convolutional" => {
            let filters = reader.usize_value("filters")?;
            let size = reader.usize_value("size")?;
            let stride = reader.usize_or("stride", 1)?;
            let pad = reader.usize_or("pad", 0)? != 0;
            let batch_normalize = reader.usize_or("batch_normalize", 0)? != 0;
            let activation = match reader.get("activation") {
                Some(e) => parse_activation(e)?,
                None => Activation::Linear,
            };
            for (key, v) in [("filters", filters), ("size", size), ("stride", stride)] {
                if v == 0 {
                    return Err(CfgError::BadValue {
                        key: key.to_string(),
                        value: "0".to_string(),
                        line: section.line,
                        reason: "must be >= 1".to_string(),
                    });
                }
            }
            LayerKind::Convolutional {
                filters,
                size,
                stride,
                pad,
                batch_normalize,
                activation,
            }
        }
        "maxpool" => {
            let size = reader.usize_or("size", 2)?;
            let stride = reader.usize_or("stride", size)?;
            if size == 0 || stride == 0 {
                return Err(CfgError::BadValue {
                    key: "size/stride".to_string(),
                    value: "0".to_string(),
                    line: section.line,
                    reason: "must be >= 1".to_string(),
                });
            }
            LayerKind::Maxpool { size, stride }
        }
        "upsample" => {
            let stride = reader.usize_value("stride")?;
            if stride < 2 {
                return Err(CfgError::BadValue {
                    key: "stride".to_string(),
                    value: stride.to_string(),
                    line: section.line,
                    reason: "upsample factor must be >= 2".to_string(),
                });
            }
            LayerKind::Upsample { stride }
        }
        "route" => {
            let entry = reader.required("layers")?;
            let raw = parse_isize_list(entry)?;
            if raw.is_empty() {
                return Err(CfgError::BadValue {
                    key: "layers".to_string(),
                    value: entry.value.clone(),
                    line: entry.line,
                    reason: "route needs at least one layer".to_string(),
                });
            }
            let layers = raw
                .into_iter()
                .map(|r| resolve_reference(index, r))
                .collect::<Result<Vec<_>, _>>()?;
            LayerKind::Route { layers }
        }
        "shortcut" => {
            let entry = reader.required("from")?;
            let raw = entry.value.parse::<isize>().map_err(|err| CfgError::BadValue {
                key: "from".to_string(),
                value: entry.value.clone(),
                line: entry.line,
                reason: err.to_string(),
            })?;
            let from = resolve_reference(index, raw)?;
            if from + 1 == index {
                // Adding the previous layer to itself is almost certainly a typo.
                return Err(CfgError::BadValue {
                    key: "from".to_string(),
                    value: entry.value.clone(),
                    line: entry.line,
                    reason: "shortcut source is the previous layer itself".to_string(),
                });
            }
            let activation = match reader.get("activation") {
                Some(e) => parse_activation(e)?,
                None => Activation::Linear,
            };
            LayerKind::Shortcut { from, activation }
        }
        "yolo" => {
            let mask_entry = reader.required("mask")?;
            let mask = parse_isize_list(mask_entry)?
                .into_iter()
                .map(|v| {
                    usize::try_from(v).map_err(|_| CfgError::BadValue {
                        key: "mask".to_string(),
                        value: mask_entry.value.clone(),
                        line: mask_entry.line,
                        reason: "mask entries must be non-negative".to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let anchor_entry = reader.required("anchors")?;
            let flat = parse_f32_list(anchor_entry)?;
            if flat.len() % 2 != 0 {
                return Err(CfgError::BadYoloLayer {
                    layer: index,
                    reason: format!("anchors must come in (w,h) pairs, got {} values", flat.len()),
                });
            }
            let anchors: Vec<(f32, f32)> = flat.chunks(2).map(|p| (p[0], p[1])).collect();
            let classes = reader.usize_value("classes")?;
            let num = reader.usize_or("num", anchors.len())?;
            if classes == 0 {
                return Err(CfgError::BadYoloLayer {
                    layer: index,
                    reason: "classes must be >= 1".to_string(),
                });
            }
            if num != anchors.len() {
                return Err(CfgError::BadYoloLayer {
                    layer: index,
                    reason: format!("num={} but {} anchor pairs declared", num, anchors.len()),
                });
            }
            if mask.is_empty() {
                return Err(CfgError::BadYoloLayer {
                    layer: index,
                    reason: "mask must select at least one anchor".to_string(),
                });
            }
            for &m in &mask {
                if m >= anchors.len() {
                    return Err(CfgError::BadYoloLayer {
                        layer: index,
                        reason: format!("mask entry {m} exceeds anchor count {}", anchors.len()),
                    });
                }
            }
            for key in reader.ignore(IGNORED_YOLO_KEYS) {
                warnings.push(format!(
                    "[yolo] layer {index}: key {key:?} is training-only and ignored"
                ));
            }
            LayerKind::Yolo {
                mask,
                anchors,
                classes,
                num,
            }
        }
        other => {
            return Err(CfgError::UnknownSection {
                kind: other.to_string(),
                line: section.line,
            })
        }
    };
    reader.finish()?;
    Ok(layer)
}

/// Zero-padding width of a convolutional layer: `size/2` when the pad flag is
/// set, zero otherwise.
pub fn conv_padding(size: usize, pad: bool) -> usize {
    if pad {
        size / 2
    } else {
        0
    }
}

/// Implicit pooling padding (Darknet rule): `size - 1`, applied to the
/// right/bottom half-open so output extents become `(dim - 1)/stride + 1`.
pub fn maxpool_padding(size: usize) -> usize {
    size - 1
}

/// Recomputes the per-layer output shape table for a layer list.
pub fn infer_shapes_from(input: Shape3, layers: &[LayerKind]) -> Result<ShapeTable, CfgError> {
    let mut shapes: ShapeTable = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let prev = if i == 0 { input } else { shapes[i - 1] };
        let shape = match layer {
            LayerKind::Convolutional {
                filters,
                size,
                stride,
                pad,
                ..
            } => {
                let p = conv_padding(*size, *pad);
                let (h, w) = (prev.h + 2 * p, prev.w + 2 * p);
                if h < *size || w < *size {
                    return Err(CfgError::ShapeInference {
                        layer: i,
                        kind: "convolutional".to_string(),
                        reason: format!(
                            "kernel {size} exceeds padded input {h}x{w} (input {prev})"
                        ),
                    });
                }
                Shape3 {
                    c: *filters,
                    h: (h - size) / stride + 1,
                    w: (w - size) / stride + 1,
                }
            }
            LayerKind::Maxpool { size, stride } => {
                let pad = maxpool_padding(*size);
                if prev.h + pad < *size || prev.w + pad < *size {
                    return Err(CfgError::ShapeInference {
                        layer: i,
                        kind: "maxpool".to_string(),
                        reason: format!("window {size} exceeds padded input (input {prev})"),
                    });
                }
                Shape3 {
                    c: prev.c,
                    h: (prev.h + pad - size) / stride + 1,
                    w: (prev.w + pad - size) / stride + 1,
                }
            }
            LayerKind::Upsample { stride } => Shape3 {
                c: prev.c,
                h: prev.h * stride,
                w: prev.w * stride,
            },
            LayerKind::Route { layers: refs } => {
                let first = shapes[refs[0]];
                let mut channels = first.c;
                for &r in &refs[1..] {
                    let s = shapes[r];
                    if s.h != first.h || s.w != first.w {
                        return Err(CfgError::ShapeInference {
                            layer: i,
                            kind: "route".to_string(),
                            reason: format!(
                                "cannot concatenate layer {} ({}) with layer {} ({})",
                                refs[0], first, r, s
                            ),
                        });
                    }
                    channels += s.c;
                }
                Shape3 {
                    c: channels,
                    h: first.h,
                    w: first.w,
                }
            }
            LayerKind::Shortcut { from, .. } => {
                let s = shapes[*from];
                if s != prev {
                    return Err(CfgError::ShapeInference {
                        layer: i,
                        kind: "shortcut".to_string(),
                        reason: format!("shapes differ: previous {prev} vs layer {from} {s}"),
                    });
                }
                prev
            }
            LayerKind::Yolo { mask, classes, .. } => {
                let expected = mask.len() * (5 + classes);
                if prev.c != expected {
                    return Err(CfgError::YoloChannelMismatch {
                        layer: i,
                        incoming: prev.c,
                        expected,
                        b: mask.len(),
                        classes: *classes,
                    });
                }
                prev
            }
        };
        shapes.push(shape);
    }
    Ok(shapes)
}

/// Recomputes the shape table of an already validated graph.
pub fn infer_shapes(g: &NetworkGraph) -> Result<ShapeTable, CfgError> {
    infer_shapes_from(g.input_shape(), g.layers())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn layer_params(layer: &LayerKind) -> String {
    match layer {
        LayerKind::Convolutional {
            filters,
            size,
            stride,
            pad,
            batch_normalize,
            activation,
        } => {
            let mut s = format!(
                "{filters}x{size}x{size}/{stride} pad={}",
                conv_padding(*size, *pad)
            );
            if *batch_normalize {
                s.push_str(" bn");
            }
            s.push(' ');
            s.push_str(activation.name());
            s
        }
        LayerKind::Maxpool { size, stride } => format!("{size}x{size}/{stride}"),
        LayerKind::Upsample { stride } => format!("x{stride}"),
        LayerKind::Route { layers } => format!("layers={}", join(layers)),
        LayerKind::Shortcut { from, .. } => format!("from={from}"),
        LayerKind::Yolo { mask, classes, .. } => {
            format!("mask={} classes={classes}", join(mask))
        }
    }
}

/// Renders the per-layer shape table as a fixed-format text table: a header
/// line followed by one data row per layer.
pub fn emit_shape_report(g: &NetworkGraph) -> String {
    let mut out = String::new();
    let input = g.input_shape();
    let _ = writeln!(
        out,
        "{:>4}  {:<14} {:<34} output",
        "idx", "type", "params"
    );
    let _ = writeln!(
        out,
        "{:>4}  {:<14} {:<34} {}",
        "net", "input", format!("{}x{}", input.w, input.h), input
    );
    for (i, layer) in g.layers().iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4}  {:<14} {:<34} {}",
            i,
            layer.name(),
            layer_params(layer),
            g.shape(i)
        );
    }
    out
}

fn fmt_f32(v: f32) -> String {
    // `Display` for f32 round-trips, so canonical text re-parses exactly.
    format!("{v}")
}

/// Serializes a graph back to configuration text in canonical form: absolute
/// route/shortcut indices, explicit activations, fixed key order.
pub fn emit_cfg(g: &NetworkGraph) -> String {
    let mut out = String::new();
    let input = g.input_shape();
    let _ = writeln!(out, "[net]");
    let _ = writeln!(out, "width={}", input.w);
    let _ = writeln!(out, "height={}", input.h);
    let _ = writeln!(out, "channels={}", input.c);
    for layer in g.layers() {
        let _ = writeln!(out);
        match layer {
            LayerKind::Convolutional {
                filters,
                size,
                stride,
                pad,
                batch_normalize,
                activation,
            } => {
                let _ = writeln!(out, "[convolutional]");
                if *batch_normalize {
                    let _ = writeln!(out, "batch_normalize=1");
                }
                let _ = writeln!(out, "filters={filters}");
                let _ = writeln!(out, "size={size}");
                let _ = writeln!(out, "stride={stride}");
                let _ = writeln!(out, "pad={}", u8::from(*pad));
                let _ = writeln!(out, "activation={}", activation.name());
            }
            LayerKind::Maxpool { size, stride } => {
                let _ = writeln!(out, "[maxpool]");
                let _ = writeln!(out, "size={size}");
                let _ = writeln!(out, "stride={stride}");
            }
            LayerKind::Upsample { stride } => {
                let _ = writeln!(out, "[upsample]");
                let _ = writeln!(out, "stride={stride}");
            }
            LayerKind::Route { layers } => {
                let _ = writeln!(out, "[route]");
                let _ = writeln!(out, "layers={}", join(layers));
            }
            LayerKind::Shortcut { from, activation } => {
                let _ = writeln!(out, "[shortcut]");
                let _ = writeln!(out, "from={from}");
                let _ = writeln!(out, "activation={}", activation.name());
            }
            LayerKind::Yolo {
                mask,
                anchors,
                classes,
                num,
            } => {
                let _ = writeln!(out, "[yolo]");
                let _ = writeln!(out, "mask={}", join(mask));
                let flat: Vec<String> = anchors
                    .iter()
                    .flat_map(|(w, h)| [fmt_f32(*w), fmt_f32(*h)])
                    .collect();
                let _ = writeln!(out, "anchors={}", flat.join(","));
                let _ = writeln!(out, "classes={classes}");
                let _ = writeln!(out, "num={num}");
            }
        }
    }
    out
}

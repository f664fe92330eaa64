//! Structural checks on the two shipped configuration files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use darkgrid_core::cfg::{emit_cfg, emit_shape_report, parse_cfg, LayerKind, NetworkGraph, Shape3};

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn load(name: &str) -> NetworkGraph {
    let text = fs::read_to_string(repo_path(&format!("configs/{name}"))).unwrap();
    parse_cfg(&text).unwrap_or_else(|e| panic!("{name} must parse: {e}"))
}

fn yolo_shapes(g: &NetworkGraph) -> Vec<Shape3> {
    g.yolo_layers().iter().map(|&i| g.shape(i)).collect()
}

/// All layers whose outputs can reach `from`, following previous-layer,
/// route and shortcut edges.
fn ancestry(g: &NetworkGraph, from: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(i) = stack.pop() {
        if !seen.insert(i) {
            continue;
        }
        match &g.layers()[i] {
            LayerKind::Route { layers } => stack.extend(layers.iter().copied()),
            LayerKind::Shortcut { from, .. } => {
                stack.push(*from);
                if i > 0 {
                    stack.push(i - 1);
                }
            }
            _ => {
                if i > 0 {
                    stack.push(i - 1);
                }
            }
        }
    }
    seen
}

#[test]
fn variant_has_the_three_fusion_heads() {
    let g = load("yolov3-c.cfg");
    let sides: Vec<(usize, usize, usize)> = yolo_shapes(&g)
        .iter()
        .map(|s| (s.c, s.h, s.w))
        .collect();
    assert_eq!(sides, vec![(18, 104, 104), (18, 26, 26), (18, 13, 13)]);
}

#[test]
fn stock_has_the_three_classic_heads() {
    let g = load("yolov3.cfg");
    let sides: Vec<(usize, usize, usize)> = yolo_shapes(&g)
        .iter()
        .map(|s| (s.c, s.h, s.w))
        .collect();
    assert_eq!(sides, vec![(255, 13, 13), (255, 26, 26), (255, 52, 52)]);
}

#[test]
fn head_strides_cover_the_input_side() {
    let g = load("yolov3-c.cfg");
    let input = g.input_shape();
    for shape in yolo_shapes(&g) {
        assert_eq!(input.h % shape.h, 0);
        let stride = input.h / shape.h;
        assert!(matches!(stride, 4 | 16 | 32), "unexpected stride {stride}");
        assert_eq!(shape.h * stride, input.h);
    }
}

#[test]
fn both_graphs_infer_at_416_and_320() {
    for name in ["yolov3.cfg", "yolov3-c.cfg"] {
        let g = load(name);
        let resized = g.with_input_size(320).unwrap();
        let sides: Vec<usize> = resized
            .yolo_layers()
            .iter()
            .map(|&i| resized.shape(i).h)
            .collect();
        if name == "yolov3.cfg" {
            assert_eq!(sides, vec![10, 20, 40]);
        } else {
            assert_eq!(sides, vec![80, 20, 10]);
        }
    }
}

#[test]
fn variant_up_sampling_path_fuses_the_quarter_scale_backbone_map() {
    let g = load("yolov3-c.cfg");
    let yolo_104 = g
        .yolo_layers()
        .iter()
        .copied()
        .find(|&i| g.shape(i).h == 104)
        .unwrap();
    let upstream = ancestry(&g, yolo_104);
    let fusion = upstream.iter().any(|&i| {
        if let LayerKind::Route { layers } = &g.layers()[i] {
            layers.len() >= 2
                && layers.iter().any(|&r| {
                    let s = g.shape(r);
                    (s.c, s.h, s.w) == (128, 104, 104)
                })
        } else {
            false
        }
    });
    assert!(fusion, "104x104 head must concatenate the 1/4-scale backbone map");
}

#[test]
fn variant_max_pooling_path_fuses_twice() {
    let g = load("yolov3-c.cfg");
    let yolo_13 = g
        .yolo_layers()
        .iter()
        .copied()
        .find(|&i| g.shape(i).h == 13)
        .unwrap();
    let upstream = ancestry(&g, yolo_13);
    let concat_sides: Vec<usize> = upstream
        .iter()
        .filter_map(|&i| match &g.layers()[i] {
            LayerKind::Route { layers } if layers.len() >= 2 => Some(g.shape(i).h),
            _ => None,
        })
        .collect();
    // Two pooling fusions (26x26 then 13x13) on top of the backbone-era
    // concatenations the branch inherits.
    assert!(
        concat_sides.iter().filter(|&&s| s == 26).count() >= 2,
        "expected the 26x26 fusion with the mesoscale branch, got {concat_sides:?}"
    );
    assert!(
        concat_sides.contains(&13),
        "expected the 13x13 fusion with the trunk, got {concat_sides:?}"
    );
    // And the pooling fusions are fed by maxpool layers.
    let pools = upstream
        .iter()
        .filter(|&&i| matches!(g.layers()[i], LayerKind::Maxpool { .. }))
        .count();
    assert_eq!(pools, 2, "the fused 13x13 head pools exactly twice");
}

#[test]
fn variant_head_anchors_pin_the_halved_trio() {
    let g = load("yolov3-c.cfg");
    let yolo_104 = g
        .yolo_layers()
        .iter()
        .copied()
        .find(|&i| g.shape(i).h == 104)
        .unwrap();
    let LayerKind::Yolo { mask, anchors, classes, .. } = &g.layers()[yolo_104] else {
        panic!("not a yolo layer");
    };
    assert_eq!(*classes, 1);
    let head: Vec<(f32, f32)> = mask.iter().map(|&m| anchors[m]).collect();
    assert_eq!(head, vec![(5.0, 6.5), (8.0, 15.0), (16.5, 11.5)]);
}

#[test]
fn canonical_emission_round_trips_both_configs() {
    for name in ["yolov3.cfg", "yolov3-c.cfg"] {
        let g = load(name);
        let canon = emit_cfg(&g);
        let again = parse_cfg(&canon).unwrap();
        assert_eq!(g, again, "{name} must round-trip through canonical text");
        assert_eq!(canon, emit_cfg(&again));
    }
}

fn golden_check(name: &str, produced: &str) {
    let path = repo_path(&format!("crates/core/tests/golden/{name}"));
    if std::env::var_os("BLESS_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, produced).unwrap();
        return;
    }
    let frozen = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("golden file {name} missing; run with BLESS_GOLDEN=1"));
    assert_eq!(produced, frozen, "shape report for {name} drifted");
}

#[test]
fn shape_reports_match_the_golden_tables() {
    golden_check("yolov3-shapes.txt", &emit_shape_report(&load("yolov3.cfg")));
    golden_check("yolov3-c-shapes.txt", &emit_shape_report(&load("yolov3-c.cfg")));
}

#[test]
fn shape_reports_share_the_trunk_and_diverge_in_the_heads() {
    let stock: Vec<String> = emit_shape_report(&load("yolov3.cfg"))
        .lines()
        .map(String::from)
        .collect();
    let variant: Vec<String> = emit_shape_report(&load("yolov3-c.cfg"))
        .lines()
        .map(String::from)
        .collect();
    let mut common = 0;
    while common < stock.len() && common < variant.len() && stock[common] == variant[common] {
        common += 1;
    }
    // Header + net row + layers 0..=80 (the shared backbone and 13x13 trunk).
    assert_eq!(common, 2 + 81, "graphs must agree exactly through layer 80");
    assert_ne!(stock[common], variant[common]);
}

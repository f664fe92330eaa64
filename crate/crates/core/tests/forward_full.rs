//! Full-size forward passes through the shipped graphs.

use std::fs;
use std::path::Path;

use darkgrid_core::cfg::parse_cfg;
use darkgrid_core::engine::{forward, random_init};
use darkgrid_core::tensor::{Shape4, Tensor};

fn load(name: &str) -> darkgrid_core::cfg::NetworkGraph {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    parse_cfg(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn variant_heads_have_the_fused_shapes_at_416() {
    let g = load("yolov3-c.cfg");
    let w = random_init(&g, 7);
    let x = Tensor::filled(Shape4::new(1, 3, 416, 416), 0.5);
    let result = forward(&g, &w, &x).unwrap();
    let shapes: Vec<Shape4> = result.yolo_outputs.iter().map(|(_, t)| t.shape()).collect();
    assert_eq!(
        shapes,
        vec![
            Shape4::new(1, 18, 104, 104),
            Shape4::new(1, 18, 26, 26),
            Shape4::new(1, 18, 13, 13),
        ]
    );
    assert!(result.yolo_outputs.iter().all(|(_, t)| t.all_finite()));
}

#[test]
fn stock_heads_have_the_classic_shapes_at_416() {
    let g = load("yolov3.cfg");
    let w = random_init(&g, 7);
    let x = Tensor::filled(Shape4::new(1, 3, 416, 416), 0.5);
    let result = forward(&g, &w, &x).unwrap();
    let shapes: Vec<Shape4> = result.yolo_outputs.iter().map(|(_, t)| t.shape()).collect();
    assert_eq!(
        shapes,
        vec![
            Shape4::new(1, 255, 13, 13),
            Shape4::new(1, 255, 26, 26),
            Shape4::new(1, 255, 52, 52),
        ]
    );
}

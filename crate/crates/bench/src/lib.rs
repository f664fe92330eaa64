//! Deterministic fixture builders shared by the benchmark targets.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use darkgrid_core::detect::{BBox, Detection};
use darkgrid_core::tensor::{ConvParams, Shape4, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape4) -> Tensor {
    let dist = Uniform::new_inclusive(-1.0f32, 1.0);
    let data = (0..shape.len()).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape, data).unwrap()
}

pub fn conv_params(rng: &mut ChaCha8Rng, in_c: usize, filters: usize, size: usize) -> ConvParams {
    let dist = Uniform::new_inclusive(-0.1f32, 0.1);
    ConvParams {
        filters,
        size,
        stride: 1,
        pad: size / 2,
        weights: (0..filters * in_c * size * size)
            .map(|_| dist.sample(rng))
            .collect(),
        bias: (0..filters).map(|_| dist.sample(rng)).collect(),
        batch_norm: None,
    }
}

pub fn random_detections(rng: &mut ChaCha8Rng, n: usize) -> Vec<Detection> {
    (0..n)
        .map(|_| {
            Detection::from_scores(
                BBox::new(
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.01..0.3),
                    rng.gen_range(0.01..0.3),
                ),
                rng.gen_range(0.0..1.0),
                vec![rng.gen_range(0.0..1.0)],
            )
        })
        .collect()
}

/// True/false ranking with at most `gt` true entries.
pub fn random_ranking(rng: &mut ChaCha8Rng, n: usize, gt: usize) -> Vec<bool> {
    let mut tps = 0;
    (0..n)
        .map(|_| {
            let tp = rng.gen_bool(0.4) && tps < gt;
            if tp {
                tps += 1;
            }
            tp
        })
        .collect()
}

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use darkgrid_bench::{conv_params, random_detections, random_ranking, random_tensor, rng};
use darkgrid_core::detect::nms;
use darkgrid_core::eval::{average_precision, ApMethod};
use darkgrid_core::tensor::{concat_channels, conv2d, maxpool, upsample_nearest, Shape4};

fn bench_conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d");
    for &(channels, filters, size, side) in &[(64usize, 64usize, 3usize, 52usize), (256, 128, 1, 26)] {
        let mut r = rng(1);
        let input = random_tensor(&mut r, Shape4::new(1, channels, side, side));
        let params = conv_params(&mut r, channels, filters, size);
        let flops = 2 * filters * channels * size * size * side * side;
        group.throughput(Throughput::Elements(flops as u64));
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{channels}x{side}x{side}->{filters} k{size}")),
            &(input, params),
            |b, (input, params)| b.iter(|| conv2d(input, params).unwrap()),
        );
    }
    group.finish();
}

fn bench_resampling(c: &mut Criterion) {
    let mut r = rng(2);
    let input = random_tensor(&mut r, Shape4::new(1, 128, 52, 52));
    c.bench_function("maxpool 2/2 128x52x52", |b| {
        b.iter(|| maxpool(&input, 2, 2).unwrap())
    });
    c.bench_function("upsample x2 128x52x52", |b| {
        b.iter(|| upsample_nearest(&input, 2))
    });
    let other = random_tensor(&mut r, Shape4::new(1, 128, 52, 52));
    c.bench_function("concat 128+128x52x52", |b| {
        b.iter(|| concat_channels(&input, &other).unwrap())
    });
}

fn bench_nms(c: &mut Criterion) {
    let mut group = c.benchmark_group("nms");
    for &n in &[100usize, 1000] {
        let mut r = rng(3);
        let dets = random_detections(&mut r, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &dets, |b, dets| {
            b.iter(|| nms(dets, 0.45))
        });
    }
    group.finish();
}

fn bench_ap(c: &mut Criterion) {
    let mut r = rng(4);
    let ranking = random_ranking(&mut r, 50_000, 20_000);
    c.bench_function("average_precision 50k", |b| {
        b.iter(|| average_precision(&ranking, 20_000, ApMethod::AllPoint).unwrap())
    });
}

criterion_group!(benches, bench_conv, bench_resampling, bench_nms, bench_ap);
criterion_main!(benches);

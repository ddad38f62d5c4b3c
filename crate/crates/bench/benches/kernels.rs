use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use ramanhs::dsp::{sg_filter_cube, SgParams};
use ramanhs::neural::graph::Graph;
use ramanhs::neural::tensor::Tensor;
use ramanhs::neural::{denoise_cube, superres_cube, ArchConfig, Model};
use ramanhs::resample::upsample_bicubic;
use ramanhs::unmix::{abundance_map, vca};
use ramanhs::{HyrisrConfig, ResUNet1dConfig, ScaleFactor};
use ramanhs_bench::{sample, BANDS};

fn sg(c: &mut Criterion) {
    let s = sample(32, 1);
    let params = SgParams::new(3, 9).unwrap();
    c.bench_function("sg_filter 32x32x200 order 3 frame 9", |b| {
        b.iter(|| sg_filter_cube(black_box(&s.low_snr_hr), params).unwrap())
    });
}

fn unmixing(c: &mut Criterion) {
    let s = sample(32, 2);
    c.bench_function("nnls abundance map 32x32x200 k=5", |b| {
        b.iter(|| abundance_map(black_box(&s.clean_hr), &s.endmembers).unwrap())
    });
    let k = s.endmembers.count();
    c.bench_function("vca 32x32x200", |b| b.iter(|| vca(black_box(&s.clean_hr), k, 0).unwrap()));
}

fn upsampling(c: &mut Criterion) {
    let s = sample(32, 3);
    let sf = ScaleFactor::new(2).unwrap();
    c.bench_function("bicubic x2 16x16x200", |b| {
        b.iter(|| upsample_bicubic(black_box(&s.noisy_lr), sf, 32, 32).unwrap())
    });
}

fn conv(c: &mut Criterion) {
    let s = sample(16, 4);
    let resunet = Model::build(ArchConfig::Resunet1d(ResUNet1dConfig::desk(BANDS)), 0).unwrap();
    c.bench_function("resunet desk denoise 16x16x200", |b| {
        b.iter(|| denoise_cube(&resunet, black_box(&s.low_snr_hr), 256).unwrap())
    });
    let hyrisr = Model::build(ArchConfig::Hyrisr(HyrisrConfig::desk(BANDS, 2)), 0).unwrap();
    c.bench_function("hyrisr desk x2 8x8x200 forward", |b| {
        b.iter(|| superres_cube(&hyrisr, black_box(&s.noisy_lr), 16, 16).unwrap())
    });
    let target = Tensor::zeros(vec![1, BANDS, 16, 16]);
    c.bench_function("hyrisr desk x2 8x8x200 forward+backward", |b| {
        b.iter_batched(
            || {
                let data = (0..BANDS * 64).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
                Tensor::new(vec![1, BANDS, 8, 8], data).unwrap()
            },
            |x| {
                let mut g = Graph::new();
                let xv = g.input(x);
                let (y, _) = hyrisr.forward(&mut g, xv, true).unwrap();
                let l = g.l1_loss(y, &target).unwrap();
                g.backward(l).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = sg, unmixing, upsampling, conv
}
criterion_main!(kernels);

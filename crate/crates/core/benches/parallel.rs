//! Parallel versus sequential execution of the heavy kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lineguide::closure::{closure_map, ClosureParams};
use lineguide::gmm::{fit_gmm, PriorParams};
use lineguide::saliency::{itti_saliency, signature_saliency, IttiParams, SigParams};
use lineguide::{gaussian_blur, par, ColorImage, ContourMask, FloatMap, Image};

fn rings(size: usize) -> ContourMask {
    ContourMask::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 - size as f64 / 2.0, y as f64 - size as f64 / 2.0);
        let r = dx.hypot(dy);
        (r - 30.0).abs() < 0.7 || (r - 90.0).abs() < 0.7 || (x % 97 == 5 && y > size / 3)
    })
}

fn scene(size: usize) -> ColorImage {
    let plane = |k: usize| {
        FloatMap::from_fn(size, size, |x, y| {
            ((x * (3 + k) + y * (5 + 2 * k)) % 17) as f64 / 16.0
        })
    };
    ColorImage::new(plane(0), plane(1), plane(2)).expect("same size")
}

fn both<F: Fn()>(c: &mut Criterion, group: &str, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_function(BenchmarkId::from_parameter("parallel"), |b| b.iter(&f));
    g.bench_function(BenchmarkId::from_parameter("sequential"), |b| {
        b.iter(|| par::sequential(&f))
    });
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let mask = rings(256);
    let closure = closure_map(&mask, &ClosureParams::default()).unwrap();
    let image = scene(256);

    both(c, "closure_map_256", || {
        black_box(closure_map(black_box(&mask), &ClosureParams::default()).unwrap());
    });
    both(c, "gaussian_blur_256_sigma16", || {
        black_box(gaussian_blur(black_box(&closure), 16.0).unwrap());
    });
    both(c, "fit_gmm_256_k5", || {
        black_box(fit_gmm(black_box(&closure), &PriorParams::default()).unwrap());
    });
    both(c, "itti_saliency_256", || {
        black_box(itti_saliency(black_box(&image), &IttiParams::default()).unwrap());
    });
    let any = Image::Color(image.clone());
    both(c, "signature_saliency_256", || {
        black_box(signature_saliency(black_box(&any), &SigParams::default()).unwrap());
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);

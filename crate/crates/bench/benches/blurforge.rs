use blurforge_bench::{box_kernel, random_kernel, test_image};
use blurforge_core::{
    convolve_fft, convolve_spatial, generate_trajectory, psnr, rasterize, sample_params, ssim, SeededRng,
};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn kernels(c: &mut Criterion) {
    c.bench_function("trajectory_default", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            let mut rng = SeededRng::new(seed);
            let p = sample_params(&mut rng);
            black_box(generate_trajectory(&p, &mut rng).unwrap())
        })
    });

    let mut rng = SeededRng::new(1);
    let p = sample_params(&mut rng);
    let traj = generate_trajectory(&p, &mut rng).unwrap();
    c.bench_function("rasterize_default", |b| b.iter(|| black_box(rasterize(&traj, None).unwrap())));
}

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolve_256");
    let img = test_image(256, 256);
    let k = random_kernel(3);
    group.bench_function("spatial", |b| b.iter(|| black_box(convolve_spatial(&img, &k))));
    group.bench_function("fft", |b| b.iter(|| black_box(convolve_fft(&img, &k))));
    group.finish();

    let mut group = c.benchmark_group("convolve_720p_123");
    group.sample_size(10);
    let img = test_image(1280, 720);
    let k = box_kernel(123);
    group.bench_function("fft", |b| b.iter(|| black_box(convolve_fft(&img, &k))));
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let a = test_image(512, 512);
    let b_img = convolve_fft(&a, &random_kernel(5));
    c.bench_function("psnr_512", |b| b.iter(|| black_box(psnr(&a, &b_img).unwrap())));
    c.bench_function("ssim_512", |b| b.iter(|| black_box(ssim(&a, &b_img).unwrap())));
}

criterion_group!(benches, kernels, convolution, metrics);
criterion_main!(benches);

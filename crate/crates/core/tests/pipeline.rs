use std::path::Path;

use blurforge_core::manifest::{merge_manifests, Manifest, MANIFEST_FILE};
use blurforge_core::metrics::{evaluate_pairs, pairs_from_dirs, PairInput};
use blurforge_core::{
    build_dataset, build_framesim_dataset, psnr, read_kernel, ssim, DatasetConfig, Error, FrameSimConfig,
    ImageBuffer, PairSource, SeededRng,
};

fn textured(w: usize, h: usize, seed: u64) -> ImageBuffer {
    let mut rng = SeededRng::new(seed);
    let phase = rng.uniform() * 6.0;
    ImageBuffer::from_fn(w, h, 3, |c, x, y| {
        let v = 0.5 + 0.25 * ((x as f64 * 0.21 + phase).sin() + (y as f64 * 0.13 + c as f64).cos());
        let speck = if (x * 7 + y * 13 + c) % 29 == 0 { 0.2 } else { 0.0 };
        v * 0.8 + speck
    })
    .unwrap()
}

fn write_inputs(dir: &Path, sizes: &[(usize, usize)]) {
    for (i, &(w, h)) in sizes.iter().enumerate() {
        textured(w, h, i as u64).save_png(dir.join(format!("img{i:02}.png"))).unwrap();
    }
}

fn read_png(path: impl AsRef<Path>) -> Vec<u8> {
    ImageBuffer::load(path).unwrap().to_u8()
}

#[test]
fn two_inputs_give_two_pairs_and_six_files() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(300, 280), (260, 270)]);
    let config = DatasetConfig {
        master_seed: 3,
        ..Default::default()
    };
    let m = build_dataset(input.path(), out.path(), &config).unwrap();
    assert_eq!(m.records.len(), 2);
    let count = |d: &str| std::fs::read_dir(out.path().join(d)).unwrap().count();
    assert_eq!((count("sharp"), count("blurred"), count("kernels")), (2, 2, 2));
    m.validate(out.path()).unwrap();
    assert_eq!(Manifest::read(out.path().join(MANIFEST_FILE)).unwrap(), m);
}

#[test]
fn crops_are_in_range_and_aligned() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(512, 512)]);
    let config = DatasetConfig {
        master_seed: 11,
        patches_per_image: 6,
        ..Default::default()
    };
    let m = build_dataset(input.path(), out.path(), &config).unwrap();
    let source = ImageBuffer::load(input.path().join("img00.png")).unwrap();
    for r in &m.records {
        let c = r.crop.unwrap();
        assert!(c.x <= 256 && c.y <= 256);
        assert_eq!((c.w, c.h), (256, 256));
        // the sharp patch is the source at the recorded coordinates
        let expect = source.crop(c.x, c.y, c.w, c.h).unwrap();
        assert_eq!(read_png(out.path().join(&r.sharp_path)), expect.to_u8());
        // and the blurred patch matches the blurred full image at the same spot
        let k = read_kernel(out.path().join(r.kernel_path.as_ref().unwrap())).unwrap();
        let full = blurforge_core::convolve_fast(&source, &k);
        let expect = full.crop(c.x, c.y, c.w, c.h).unwrap();
        assert_eq!(read_png(out.path().join(&r.blurred_path)), expect.to_u8());
    }
}

#[test]
fn fixed_seed_reproduces_across_worker_counts() {
    let input = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(300, 300), (280, 290), (256, 256), (400, 260)]);
    let run = |workers| {
        let out = tempfile::tempdir().unwrap();
        let config = DatasetConfig {
            master_seed: 42,
            patches_per_image: 2,
            noise_sigma: 0.01,
            workers,
            ..Default::default()
        };
        let m = build_dataset(input.path(), out.path(), &config).unwrap();
        let text = std::fs::read_to_string(out.path().join(MANIFEST_FILE)).unwrap();
        let pixels: Vec<Vec<u8>> = m
            .records
            .iter()
            .flat_map(|r| [read_png(out.path().join(&r.sharp_path)), read_png(out.path().join(&r.blurred_path))])
            .collect();
        (text, pixels)
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn small_and_broken_inputs_are_skipped_and_listed() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(300, 300), (100, 400)]);
    std::fs::write(input.path().join("zz_broken.png"), b"not a png").unwrap();
    let m = build_dataset(input.path(), out.path(), &DatasetConfig::default()).unwrap();
    assert_eq!(m.records.len(), 1);
    let skipped: Vec<&str> = m.header.skipped.iter().map(|s| s.path.as_str()).collect();
    assert_eq!(skipped, ["img01.png", "zz_broken.png"]);
    // item indices stay tied to input position
    assert_eq!(m.records[0].pair_id, "syn-000000");
}

#[test]
fn downscale_and_full_image_mode() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(200, 150)]);
    let config = DatasetConfig {
        master_seed: 1,
        patch: None,
        downscale: 2,
        ..Default::default()
    };
    let m = build_dataset(input.path(), out.path(), &config).unwrap();
    let r = &m.records[0];
    assert_eq!(r.crop, None);
    assert_eq!(r.source_size, Some([100, 75]));
    let sharp = ImageBuffer::load(out.path().join(&r.sharp_path)).unwrap();
    assert_eq!((sharp.width(), sharp.height()), (100, 75));
    m.validate(out.path()).unwrap();
}

#[test]
fn undecodable_only_input_is_empty() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    std::fs::write(input.path().join("a.png"), b"garbage").unwrap();
    assert!(matches!(
        build_dataset(input.path(), out.path(), &DatasetConfig::default()),
        Err(Error::EmptyInput(_))
    ));
}

#[test]
fn tampered_manifest_fails_validation() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(300, 300)]);
    let mut m = build_dataset(input.path(), out.path(), &DatasetConfig::default()).unwrap();
    m.records[0].crop.as_mut().unwrap().x = 100;
    assert!(matches!(m.validate(out.path()), Err(Error::InvalidManifest(_))));

    let mut m = Manifest::read(out.path().join(MANIFEST_FILE)).unwrap();
    std::fs::write(out.path().join(m.records[0].kernel_path.as_ref().unwrap()), "KERN1\n1 1\n0.5\n").unwrap();
    assert!(matches!(m.validate(out.path()), Err(Error::MalformedKernelFile(_))));
    m.records[0].kernel_path = None;
    assert!(m.validate(out.path()).is_err());
}

/// 100 frames of a bright 10x10 square moving one pixel right per frame.
fn write_translating_square(dir: &Path, frames: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for t in 0..frames {
        let img = ImageBuffer::from_fn(160, 32, 1, |_, x, y| {
            if (10..20).contains(&y) && x >= 5 + t && x < 15 + t {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        img.save_png(dir.join(format!("f{t:04}.png"))).unwrap();
    }
}

#[test]
fn translating_square_streaks_by_window_length() {
    let root = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_translating_square(&root.path().join("seq"), 100);
    let config = FrameSimConfig {
        master_seed: 5,
        ..Default::default()
    };
    let m = build_framesim_dataset(root.path(), out.path(), &config).unwrap();
    assert_eq!(m.records.len(), 4);
    m.validate(out.path()).unwrap();
    for r in &m.records {
        assert_eq!(r.source, PairSource::FrameAverage);
        let win = r.window.as_ref().unwrap();
        let sharp = ImageBuffer::load(out.path().join(&r.sharp_path)).unwrap();
        let blurred = ImageBuffer::load(out.path().join(&r.blurred_path)).unwrap();
        // streak extent along the square's middle row
        let row: Vec<usize> = (0..160).filter(|&x| blurred.get(0, x, 15) > 0.1).collect();
        let extent = row.last().unwrap() - row.first().unwrap() + 1;
        assert_eq!(extent, 10 + win.frames - 1, "window {win:?}");
        assert_eq!(row[0], 5 + win.offset);
        assert!(ssim(&sharp, &blurred).unwrap() < 1.0);
        assert_eq!(ssim(&sharp, &sharp).unwrap(), 1.0);
        assert_eq!(win.middle_frame, format!("f{:04}.png", win.offset + win.frames / 2));
    }
}

#[test]
fn forced_window_gives_one_pair_and_short_sequences_are_skipped() {
    let root = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_translating_square(&root.path().join("a"), 25);
    write_translating_square(&root.path().join("b"), 10);
    let config = FrameSimConfig {
        master_seed: 1,
        stride: None,
        min_frames: 25,
        max_frames: 25,
        ..Default::default()
    };
    let m = build_framesim_dataset(root.path(), out.path(), &config).unwrap();
    assert_eq!(m.records.len(), 1);
    let win = m.records[0].window.as_ref().unwrap();
    assert_eq!((win.offset, win.frames), (0, 25));
    assert_eq!(m.header.skipped.len(), 1);
    assert_eq!(m.header.skipped[0].path, "b");

    let again = tempfile::tempdir().unwrap();
    let m2 = build_framesim_dataset(root.path(), again.path(), &config).unwrap();
    assert_eq!(m.records, m2.records);
}

#[test]
fn framesim_windows_are_reproducible() {
    let root = tempfile::tempdir().unwrap();
    write_translating_square(&root.path().join("seq"), 60);
    let run = |workers| {
        let out = tempfile::tempdir().unwrap();
        let config = FrameSimConfig {
            master_seed: 77,
            stride: Some(10),
            workers,
            ..Default::default()
        };
        build_framesim_dataset(root.path(), out.path(), &config).unwrap().records
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a, b);
    // slots at 0, 10, 20, 30 fit a 25-frame span in 60 frames
    assert_eq!(a.len(), 4);
}

#[test]
fn manifest_evaluation() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(300, 300), (260, 300), (320, 256)]);
    let m = build_dataset(input.path(), out.path(), &DatasetConfig::default()).unwrap();
    let report = evaluate_pairs(&m.metric_pairs(out.path())).unwrap();
    assert_eq!(report.per_pair.len(), 3);
    assert!(report.failures.is_empty());
    for p in &report.per_pair {
        assert!(p.psnr_db < 100.0 && p.ssim < 1.0);
    }

    // sharp against itself
    let same: Vec<PairInput> = m
        .records
        .iter()
        .map(|r| PairInput {
            pair_id: r.pair_id.clone(),
            reference: out.path().join(&r.sharp_path),
            candidate: out.path().join(&r.sharp_path),
        })
        .collect();
    let report = evaluate_pairs(&same).unwrap();
    assert_eq!(report.mean_psnr, Some(100.0));
    assert_eq!(report.mean_ssim, Some(1.0));
}

#[test]
fn mean_is_average_of_independently_recomputed_pairs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut expect_psnr = 0.0;
    let mut expect_ssim = 0.0;
    for i in 0..10u64 {
        let sharp = textured(40, 30, i);
        let mut rng = SeededRng::new(i + 50);
        let noisy = ImageBuffer::from_fn(40, 30, 3, |c, x, y| sharp.get(c, x, y) + 0.05 * rng.standard_normal()).unwrap();
        let name = format!("p{i}.png");
        sharp.save_png(a.path().join(&name)).unwrap();
        noisy.save_png(b.path().join(&name)).unwrap();
        // recompute from the decoded files
        let (sa, sb) = (ImageBuffer::load(a.path().join(&name)).unwrap(), ImageBuffer::load(b.path().join(&name)).unwrap());
        expect_psnr += psnr(&sa, &sb).unwrap() / 10.0;
        expect_ssim += ssim(&sa, &sb).unwrap() / 10.0;
    }
    let report = evaluate_pairs(&pairs_from_dirs(a.path(), b.path()).unwrap()).unwrap();
    assert_eq!(report.per_pair.len(), 10);
    assert!((report.mean_psnr.unwrap() - expect_psnr).abs() < 1e-9);
    assert!((report.mean_ssim.unwrap() - expect_ssim).abs() < 1e-12);
}

#[test]
fn unmatched_and_mismatched_pairs_are_reported() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    textured(32, 32, 0).save_png(a.path().join("ok.png")).unwrap();
    textured(32, 32, 0).save_png(b.path().join("ok.png")).unwrap();
    textured(32, 32, 1).save_png(a.path().join("only_a.png")).unwrap();
    textured(32, 32, 2).save_png(a.path().join("shape.png")).unwrap();
    textured(30, 32, 2).save_png(b.path().join("shape.png")).unwrap();
    let report = evaluate_pairs(&pairs_from_dirs(a.path(), b.path()).unwrap()).unwrap();
    assert_eq!(report.per_pair.len(), 1);
    let failed: Vec<&str> = report.failures.iter().map(|f| f.pair_id.as_str()).collect();
    assert_eq!(failed, ["only_a.png", "shape.png"]);
    assert!(report.failures[0].error.contains("missing file"));
    assert!(report.failures[1].error.contains("dimension mismatch"));
}

#[test]
fn merged_manifest_records_ratio_and_validates() {
    let input = tempfile::tempdir().unwrap();
    write_inputs(input.path(), &[(300, 300), (300, 300)]);
    let root = tempfile::tempdir().unwrap();
    let (syn_dir, fa_dir) = (root.path().join("syn"), root.path().join("fa"));
    let syn = build_dataset(input.path(), &syn_dir, &DatasetConfig::default()).unwrap();
    let frames = tempfile::tempdir().unwrap();
    write_translating_square(&frames.path().join("seq"), 25);
    let fa = build_framesim_dataset(
        frames.path(),
        &fa_dir,
        &FrameSimConfig {
            stride: None,
            ..Default::default()
        },
    )
    .unwrap();
    let merged = merge_manifests(&[(syn, syn_dir), (fa, fa_dir)], root.path()).unwrap();
    assert_eq!(merged.header.synth_real_ratio.as_deref(), Some("2:1"));
    merged.validate(root.path()).unwrap();
}

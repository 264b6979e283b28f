//! Cross-module property and invariant tests.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use depthfuse::depthprep::{ad_hole_fill, align_depth, dilate_fill, AdParams};
use depthfuse::filter::gaussian_blur;
use depthfuse::fusion::{self, ImageStack};
use depthfuse::io;
use depthfuse::metrics::{self, MetricParams};
use depthfuse::raster::{rgb_to_gray, INVALID_DEPTH};
use depthfuse::segment::{segment_depth, SegParams};
use depthfuse::simulate::{self, SceneSpec};
use depthfuse::{CameraIntrinsics, ColorImage, DepthMap, Extrinsics, GrayImage, OpticsConfig};

fn optics() -> OpticsConfig {
    OpticsConfig {
        f_mm: 24.0,
        f_number: 4.0,
        coc_mm: 0.019,
        pixel_pitch_mm: 0.02,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn depth_pgm_round_trip(samples in proptest::collection::vec(any::<u16>(), 1..400), w in 1usize..20) {
        let h = samples.len().div_ceil(w);
        let mut padded = samples.clone();
        padded.resize(w * h, 0);
        let map = DepthMap::from_samples(w, h, padded).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pgm");
        io::write_depth_pgm(&path, &map).unwrap();
        prop_assert_eq!(io::read_depth_pgm(&path).unwrap(), map);
    }

    #[test]
    fn png_round_trip(samples in proptest::collection::vec(any::<u8>(), 3..300)) {
        let n = samples.len() / 3;
        let w = n.clamp(1, 7);
        let h = n / w;
        if h == 0 { return Ok(()); }
        let img = ColorImage::from_samples(w, h, samples[..w * h * 3].to_vec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        io::write_color_png(&path, &img).unwrap();
        prop_assert_eq!(io::read_color_png(&path).unwrap(), img);
    }

    #[test]
    fn gray_conversion_bounded(samples in proptest::collection::vec(any::<u8>(), 12..120)) {
        let n = samples.len() / 3;
        let img = ColorImage::from_samples(n, 1, samples[..n * 3].to_vec()).unwrap();
        let g = rgb_to_gray(&img);
        prop_assert!(g.samples().iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn dilate_and_ad_fill_never_touch_valid_pixels(
        seed in any::<u64>(),
        hole_fraction in 0.05f64..0.9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (24usize, 18usize);
        let mut map = DepthMap::new(w, h).unwrap();
        let mut any_valid = false;
        for y in 0..h {
            for x in 0..w {
                if rng.gen_bool(1.0 - hole_fraction) {
                    map.set(x, y, rng.gen_range(500..5000));
                    any_valid = true;
                }
            }
        }
        prop_assume!(any_valid);
        let dilated = dilate_fill(&map);
        let filled = ad_hole_fill(&dilated, &AdParams::default()).unwrap();
        for y in 0..h {
            for x in 0..w {
                let original = map.get(x, y);
                if original != INVALID_DEPTH {
                    prop_assert_eq!(dilated.get(x, y), original);
                    prop_assert_eq!(filled.get(x, y), original);
                }
            }
        }
        // The zero-holes postcondition.
        prop_assert_eq!(filled.hole_count(), 0);
    }

    #[test]
    fn align_depth_invents_no_values_under_translation(
        seed in any::<u64>(),
        tx in -40.0f64..40.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (20usize, 12usize);
        let mut map = DepthMap::new(w, h).unwrap();
        let mut present = std::collections::HashSet::new();
        for y in 0..h {
            for x in 0..w {
                if rng.gen_bool(0.8) {
                    let d = rng.gen_range(600u16..4000);
                    map.set(x, y, d);
                    present.insert(d);
                }
            }
        }
        let intr = CameraIntrinsics { fx: 200.0, fy: 200.0, u0: 9.5, v0: 5.5 };
        let ext = Extrinsics {
            rotation: Extrinsics::identity().rotation,
            translation: [tx, 0.0, 0.0],
        };
        let (out, _) = align_depth(&map, &intr, &intr, &ext, (w, h)).unwrap();
        for &d in out.samples() {
            if d != INVALID_DEPTH {
                prop_assert!(present.contains(&d), "invented depth {}", d);
            }
        }
    }
}

#[test]
fn mirror_invariance_of_all_six_metrics() {
    fn mirror_gray(img: &GrayImage) -> GrayImage {
        let (w, h) = img.size();
        let mut out = GrayImage::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                out.set(x, y, img.get(w - 1 - x, y));
            }
        }
        out
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..3 {
        let make = |rng: &mut ChaCha8Rng| {
            let raw: Vec<f64> = (0..48 * 48).map(|_| rng.gen_range(0.0..=255.0)).collect();
            gaussian_blur(&GrayImage::from_samples(48, 48, raw).unwrap(), 1.0)
        };
        let a = make(&mut rng);
        let b = make(&mut rng);
        let f = {
            // A plausible fused image: per-pixel midpoint.
            let v: Vec<f64> = a
                .samples()
                .iter()
                .zip(b.samples())
                .map(|(&x, &y)| 0.5 * (x + y))
                .collect();
            GrayImage::from_samples(48, 48, v).unwrap()
        };
        let (ma, mb, mf) = (mirror_gray(&a), mirror_gray(&b), mirror_gray(&f));

        let exact = |v: f64, m: f64, name: &str| {
            assert_eq!(v, m, "{name} not mirror-invariant");
        };
        exact(
            metrics::q_mi(&a, &b, &f).unwrap(),
            metrics::q_mi(&ma, &mb, &mf).unwrap(),
            "q_mi",
        );
        exact(
            metrics::q_ncie(&a, &b, &f).unwrap(),
            metrics::q_ncie(&ma, &mb, &mf).unwrap(),
            "q_ncie",
        );
        let close = |v: f64, m: f64, tol: f64, name: &str| {
            assert!((v - m).abs() < tol, "{name}: {v} vs {m}");
        };
        close(
            metrics::q_g(&a, &b, &f, &Default::default()).unwrap(),
            metrics::q_g(&ma, &mb, &mf, &Default::default()).unwrap(),
            1e-9,
            "q_g",
        );
        close(
            metrics::q_y(&a, &b, &f).unwrap(),
            metrics::q_y(&ma, &mb, &mf).unwrap(),
            1e-9,
            "q_y",
        );
        close(
            metrics::q_p(&a, &b, &f).unwrap(),
            metrics::q_p(&ma, &mb, &mf).unwrap(),
            1e-9,
            "q_p",
        );
        close(
            metrics::q_cb(&a, &b, &f, &Default::default()).unwrap(),
            metrics::q_cb(&ma, &mb, &mf, &Default::default()).unwrap(),
            1e-3,
            "q_cb",
        );
    }
}

#[test]
fn blur_ladder_monotone_for_every_metric() {
    // A fused image strictly degrades along a blur ladder; every metric
    // must order the ladder.
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    let raw: Vec<f64> = (0..96 * 96).map(|_| rng.gen_range(0.0..=255.0)).collect();
    let sharp = gaussian_blur(&GrayImage::from_samples(96, 96, raw).unwrap(), 0.8);
    let to_color = |g: &GrayImage| {
        let mut img = ColorImage::new(96, 96).unwrap();
        for y in 0..96 {
            for x in 0..96 {
                let v = g.get(x, y).round().clamp(0.0, 255.0) as u8;
                img.set_pixel(x, y, [v, v, v]);
            }
        }
        img
    };
    let a = to_color(&sharp);
    let b = to_color(&gaussian_blur(&sharp, 1.2));
    let ladder: Vec<ColorImage> = [0.0, 1.0, 2.5]
        .iter()
        .map(|&s| to_color(&gaussian_blur(&sharp, s)))
        .collect();
    let mut previous: Option<metrics::MetricReport> = None;
    for fused in &ladder {
        let (report, failures) =
            metrics::evaluate_all(&a, &b, fused, &MetricParams::default()).unwrap();
        assert!(failures.is_empty());
        if let Some(prev) = previous {
            for ((name, v), (_, pv)) in report.values().iter().zip(prev.values().iter()) {
                assert!(v < pv, "{name}: {v} not below {pv} after more blur");
            }
        }
        previous = Some(report);
    }
}

fn simple_scene(seed: u64) -> SceneSpec {
    use depthfuse::simulate::{Degradation, Layer, LayerRegion};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let front = rng.gen_range(750.0..1150.0);
    let back = rng.gen_range(1900.0..3100.0);
    SceneSpec {
        image_size: (128, 96),
        seed,
        optics: optics(),
        layers: vec![
            Layer {
                depth_mm: back,
                region: LayerRegion::Background,
                texture_seed: seed ^ 1,
            },
            Layer {
                depth_mm: front,
                region: LayerRegion::Rect {
                    x: rng.gen_range(10..40),
                    y: rng.gen_range(8..28),
                    width: rng.gen_range(36..64),
                    height: rng.gen_range(30..52),
                },
                texture_seed: seed ^ 2,
            },
        ],
        focus_depths_mm: vec![front, back],
        degradation: Degradation::default(),
        sensor_range: Default::default(),
    }
}

#[test]
fn selection_recovers_ground_truth_on_in_dof_regions() {
    // Over simulator scenes, regions whose depth sits strictly inside one
    // source's DoF must pick that source at least 95% of the time.
    let params = SegParams {
        felz_k: 100.0,
        min_region_px: 50,
    };
    let mut total = 0usize;
    let mut correct = 0usize;
    for seed in 0..12u64 {
        let spec = simple_scene(300 + seed);
        let scene = simulate::render_stack(&spec).unwrap();
        let seg = segment_depth(&scene.true_depth, &spec.optics, &params).unwrap();
        let labels = fusion::select_in_focus(&scene.stack, &seg).unwrap();
        let (w, h) = spec.image_size;
        for region in 0..seg.region_count() as u32 {
            // Ground-truth layer of this region (regions never straddle
            // layers here since depths differ by far more than any DoF).
            let pixel = (0..w * h).find(|&i| seg.labels()[i] == region).unwrap();
            let layer = scene.layer_of_pixel[pixel] as usize;
            let info = scene.layer_info[layer];
            if !info.in_dof {
                continue;
            }
            total += 1;
            let got = labels.get(pixel % w, pixel / w) as usize;
            if got == info.best_focus {
                correct += 1;
            }
        }
    }
    assert!(
        total >= 20,
        "expected a meaningful region sample, got {total}"
    );
    let ratio = correct as f64 / total as f64;
    assert!(ratio >= 0.95, "recovered {correct}/{total}");
}

#[test]
fn fusing_copies_is_identity_and_psnr_property_holds() {
    let spec = simple_scene(777);
    let scene = simulate::render_stack(&spec).unwrap();
    // Idempotence: a stack of identical images fuses to that image.
    let img = scene.ground_truth.clone();
    let stack = ImageStack::new(vec![img.clone(), img.clone(), img.clone()]).unwrap();
    let labels = fusion::select_in_focus(
        &stack,
        &segment_depth(
            &scene.true_depth,
            &spec.optics,
            &SegParams {
                felz_k: 100.0,
                min_region_px: 1,
            },
        )
        .unwrap(),
    )
    .unwrap();
    assert_eq!(fusion::fuse(&stack, &labels).unwrap(), img);

    // PSNR of an image against itself is infinite; against its blur it is
    // finite and positive.
    let excluded = vec![false; img.width() * img.height()];
    assert!(simulate::psnr(&img, &img, &excluded).unwrap().is_infinite());
    let soft = {
        let g = gaussian_blur(&rgb_to_gray(&img), 2.0);
        let mut c = ColorImage::new(img.width(), img.height()).unwrap();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let v = g.get(x, y).round().clamp(0.0, 255.0) as u8;
                c.set_pixel(x, y, [v, v, v]);
            }
        }
        c
    };
    let p = simulate::psnr(&soft, &img, &excluded).unwrap();
    assert!(p.is_finite() && p > 0.0);
}

#[test]
fn felz_scale_is_monotone_on_seeded_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..4 {
        let (w, h) = (48usize, 36usize);
        let mut map = DepthMap::new(w, h).unwrap();
        let base = rng.gen_range(800.0..2600.0);
        for y in 0..h {
            for x in 0..w {
                let d = base
                    + 0.8 * x as f64
                    + 0.5 * y as f64
                    + rng.gen_range(-12.0..12.0)
                    + if (x / 12 + y / 12) % 2 == 0 {
                        150.0
                    } else {
                        0.0
                    };
                map.set(x, y, d.clamp(500.0, 5000.0) as u16);
            }
        }
        let mut prev = usize::MAX;
        for k in [10.0, 50.0, 200.0, 1000.0] {
            let seg = segment_depth(
                &map,
                &optics(),
                &SegParams {
                    felz_k: k,
                    min_region_px: 1,
                },
            )
            .unwrap();
            assert!(
                seg.region_count() <= prev,
                "k={k} grew the region count: {} > {}",
                seg.region_count(),
                prev
            );
            prev = seg.region_count();
        }
    }
}

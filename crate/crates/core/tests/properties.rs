mod common;

use forge_core::animator::{self, InitialState, TimelineOptions};
use forge_core::augment::{self, AugmentConfig, AugmentProbs};
use forge_core::background::{self, ProceduralBackgroundPlan};
use forge_core::captions::{self, CaptionDirectives};
use forge_core::compositor::{self, Layer, Transform2D};
use forge_core::detect_clean::{self, CleanParams, DetectionRecord};
use forge_core::manifest::{LayoutTarget, SourceMode};
use forge_core::metrics::{self, CaseRow};
use forge_core::raster::{self, Mask, PixelRect};
use forge_core::sizing::{self, KMeansParams, SizedItem};
use image::{Rgb, RgbImage, Rgba, RgbaImage};
use proptest::prelude::*;

const W: u32 = 48;
const H: u32 = 40;

fn arb_rect_mask() -> impl Strategy<Value = Mask> {
    (0..W - 4, 0..H - 4, 3u32..30, 3u32..30).prop_map(|(x, y, w, h)| {
        Mask::from_rect(W, H, PixelRect::new(x as i64, y as i64, w as i64, h as i64))
    })
}

fn arb_records() -> impl Strategy<Value = Vec<DetectionRecord>> {
    prop::collection::vec((arb_rect_mask(), 0usize..4, 0.05f64..1.0), 1..7).prop_map(|v| {
        v.into_iter()
            .map(|(m, l, c)| DetectionRecord::new(["cup", "CUP", "lamp", "book"][l], c, m).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cleaned_masks_are_disjoint_and_within_coverage(recs in arb_records()) {
        let p = CleanParams::default();
        let set = detect_clean::clean_detections(&recs, (W, H), &p).unwrap();
        let area = (W * H) as f64;
        for (i, a) in set.objects.iter().enumerate() {
            let cov = a.mask.count() as f64 / area;
            prop_assert!(cov >= p.min_cov && cov <= p.max_cov);
            for b in &set.objects[i + 1..] {
                prop_assert_eq!(a.mask.intersection_count(&b.mask), 0);
            }
        }
    }

    #[test]
    fn every_detection_is_accounted_once(recs in arb_records()) {
        let set = detect_clean::clean_detections(&recs, (W, H), &CleanParams::default()).unwrap();
        let mut seen: Vec<usize> = set
            .objects
            .iter()
            .flat_map(|o| o.sources.clone())
            .chain(set.rejected.iter().flat_map(|r| r.indices.clone()))
            .collect();
        seen.sort();
        prop_assert_eq!(seen, (0..recs.len()).collect::<Vec<_>>());
    }

    #[test]
    fn cleanup_is_idempotent(recs in arb_records()) {
        let p = CleanParams::default();
        let once = detect_clean::clean_detections(&recs, (W, H), &p).unwrap();
        let twice = detect_clean::clean_detections(&once.to_records(), (W, H), &p).unwrap();
        prop_assert_eq!(once.objects.len(), twice.objects.len());
        for (a, b) in once.objects.iter().zip(&twice.objects) {
            prop_assert_eq!(&a.mask, &b.mask);
            prop_assert_eq!(a.label.to_lowercase(), b.label.to_lowercase());
        }
        prop_assert!(twice.rejected.is_empty());
    }

    #[test]
    fn inpaint_mask_covers_union_and_grows_with_dilation(recs in arb_records(), d in 0u32..12) {
        let set = detect_clean::clean_detections(&recs, (W, H), &CleanParams::default()).unwrap();
        prop_assume!(!set.is_empty());
        let small = detect_clean::inpaint_mask(&set, d).unwrap();
        let big = detect_clean::inpaint_mask(&set, d + 3).unwrap();
        for o in &set.objects {
            prop_assert_eq!(o.mask.intersection_count(&small), o.mask.count());
        }
        prop_assert_eq!(small.intersection_count(&big), small.count());
    }
}

fn arb_cutout() -> impl Strategy<Value = RgbaImage> {
    (4u32..16, 4u32..16, any::<[u8; 4]>()).prop_map(|(w, h, c)| {
        RgbaImage::from_fn(w, h, |x, y| Rgba([c[0], c[1], c[2], if (x + y) % 5 == 0 { c[3] } else { 255 }]))
    })
}

fn arb_layer_spec() -> impl Strategy<Value = (RgbaImage, [f64; 2], f64, f64, f64)> {
    (arb_cutout(), (0.0f64..40.0, 0.0f64..32.0), 0.5f64..1.8, -180.0f64..180.0, 0.0f64..=1.0)
        .prop_map(|(r, c, s, rot, a)| (r, [c.0, c.1], s, rot, a))
}

fn layers_of(specs: &[(RgbaImage, [f64; 2], f64, f64, f64)], zs: &[i64]) -> Vec<Layer<'static>> {
    specs
        .iter()
        .zip(zs)
        .map(|((r, c, s, rot, a), &z)| Layer {
            raster: Box::leak(Box::new(r.clone())),
            transform: Transform2D {
                scale: *s,
                rotation_deg: *rot,
                ..Transform2D::at(*c)
            },
            alpha_mul: *a,
            z,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_alpha_layers_leave_background(specs in prop::collection::vec(arb_layer_spec(), 0..4), bg in any::<[u8; 3]>()) {
        let back = raster::uniform_rgb(40, 32, bg);
        let zs: Vec<i64> = (0..specs.len() as i64).collect();
        let mut layers = layers_of(&specs, &zs);
        for l in &mut layers {
            l.alpha_mul = 0.0;
        }
        prop_assert_eq!(compositor::composite_frame(&back, &layers).unwrap(), back);
    }

    #[test]
    fn compositing_ignores_list_order(specs in prop::collection::vec(arb_layer_spec(), 1..5), bg in any::<[u8; 3]>(), rot in 0usize..5) {
        let back = RgbImage::from_fn(40, 32, |x, y| Rgb([bg[0].wrapping_add(x as u8), bg[1], bg[2].wrapping_add(y as u8)]));
        let zs: Vec<i64> = (0..specs.len() as i64).map(|i| i * 7 - 3).collect();
        let layers = layers_of(&specs, &zs);
        let mut shuffled = layers.clone();
        shuffled.rotate_left(rot % layers.len());
        shuffled.reverse();
        prop_assert_eq!(
            compositor::composite_frame(&back, &layers).unwrap(),
            compositor::composite_frame(&back, &shuffled).unwrap()
        );
    }

    #[test]
    fn rotation_preserves_alpha_mass(w in 10u32..30, h in 10u32..30, rot in -180.0f64..180.0) {
        let src = RgbaImage::from_pixel(w, h, Rgba([10, 20, 30, 255]));
        let t = Transform2D { rotation_deg: rot, ..Transform2D::at([40.0, 40.0]) };
        let out = compositor::warp(&src, &t, (80, 80)).unwrap();
        let mass = |img: &RgbaImage| img.pixels().map(|p| p[3] as f64).sum::<f64>();
        let (a, b) = (mass(&src), mass(&out));
        prop_assert!((b - a).abs() <= 0.02 * a, "{} vs {}", b, a);
    }

    #[test]
    fn identity_warp_is_exact(src in arb_cutout()) {
        let (w, h) = src.dimensions();
        let out = compositor::warp(&src, &Transform2D::identity_for(w, h), (w, h)).unwrap();
        // color under zero alpha is not observable, warp emits it as zero
        let mut expect = src.clone();
        for p in expect.pixels_mut() {
            if p[3] == 0 {
                p.0 = [0; 4];
            }
        }
        prop_assert_eq!(out, expect);
    }

    #[test]
    fn scatter_rects_are_in_bounds_and_disjoint(
        sizes in prop::collection::vec((2u32..20, 2u32..20), 1..6),
        seed in any::<u64>(),
    ) {
        let canvas = (100, 80);
        let rects = compositor::scatter_layout(&sizes, canvas, seed, 1000).unwrap();
        let full = PixelRect::new(0, 0, 100, 80);
        for (i, r) in rects.iter().enumerate() {
            prop_assert!(full.contains_rect(r));
            prop_assert_eq!((r.w, r.h), (sizes[i].0 as i64, sizes[i].1 as i64));
            for o in &rects[i + 1..] {
                prop_assert!(!r.overlaps(o));
            }
        }
    }
}

fn arb_transform() -> impl Strategy<Value = Transform2D> {
    ((-50.0f64..150.0, -50.0f64..150.0), 0.3f64..2.0, -720.0f64..720.0).prop_map(|(c, s, r)| Transform2D {
        scale: s,
        rotation_deg: r,
        ..Transform2D::at([c.0, c.1])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn planned_centers_lie_on_the_lerp(a in arb_transform(), b in arb_transform(), k in 2usize..16, white in any::<bool>()) {
        let target = LayoutTarget {
            placements: vec![common::placement("o", b.translation_xy, b.scale, b.rotation_deg, 0)],
        };
        let init = [InitialState { object_id: "o".into(), transform: Some(a), raster_size: (10, 10), boxed: true }];
        let opts = TimelineOptions { canvas: (100, 100), white_start: white, shadows_fade_in: false };
        let tl = animator::plan_timeline(&init, &target, k, SourceMode::ManualDesign, &opts).unwrap();
        let t = &tl.objects[0];
        prop_assert_eq!(t.transforms[0], a);
        let end = t.transforms[k - 1];
        prop_assert_eq!(end.translation_xy, b.translation_xy);
        prop_assert_eq!(end.scale, b.scale);
        for i in 0..k {
            let u = i as f64 / (k - 1) as f64;
            for j in 0..2 {
                let l = a.translation_xy[j] + (b.translation_xy[j] - a.translation_xy[j]) * u;
                prop_assert!((t.transforms[i].translation_xy[j] - l).abs() < 1e-9);
            }
            let d = animator::shortest_delta_deg(a.rotation_deg, t.transforms[i].rotation_deg);
            prop_assert!(d.abs() <= 180.0 * u + 1e-9);
        }
        prop_assert_eq!(t.white_box_alpha[0], 1.0);
        prop_assert_eq!(t.white_box_alpha[k - 1], 0.0);
        prop_assert!(t.white_box_alpha.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(tl.background_fade_alpha.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(tl.background_fade_alpha[k - 1], 1.0);
    }

    #[test]
    fn shortest_delta_is_in_half_open_range(a in -1000.0f64..1000.0, b in -1000.0f64..1000.0) {
        let d = animator::shortest_delta_deg(a, b);
        prop_assert!((-180.0..180.0).contains(&d));
        let r = (a + d - b).rem_euclid(360.0);
        prop_assert!(r < 1e-6 || 360.0 - r < 1e-6);
    }

    #[test]
    fn kmeans_sse_never_rises_and_is_seed_deterministic(xs in prop::collection::vec(-5.0f64..5.0, 3..40), seed in any::<u64>()) {
        let p = KMeansParams::default();
        let a = sizing::kmeans_1d(&xs, &p, seed).unwrap();
        prop_assert!(a.sse_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(a.centroids.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(a, sizing::kmeans_1d(&xs, &p, seed).unwrap());
    }

    #[test]
    fn relative_scale_keeps_the_height_ratio(h in prop::collection::vec((0.05f64..5.0, 0.2f64..3.0), 1..4)) {
        let items: Vec<SizedItem> = h.iter().map(|&(m, a)| SizedItem { real_height_m: m, aspect: a }).collect();
        let px = sizing::relative_scale(&items, (400, 300), 0.05).unwrap();
        for i in 0..items.len() {
            for j in 0..items.len() {
                let got = px[i] / px[j];
                let want = items[i].real_height_m / items[j].real_height_m;
                prop_assert!((got - want).abs() <= 4.0 * f64::EPSILON * want);
            }
        }
    }
}

fn aug_spec(n: usize) -> forge_core::manifest::SampleSpec {
    let mut spec = common::base_spec("p", SourceMode::InTheWild, std::path::Path::new("."), (160, 128));
    for i in 0..n {
        let id = format!("o{i}");
        spec.objects.push(common::asset(&id, "x.png"));
        spec.target.placements.push(common::placement(&id, [30.0 + i as f64, 40.0], 1.0, 0.0, i as i64));
    }
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plans_are_pure_and_gated(n in 1usize..6, seed in any::<u64>(), scene in 0.0f64..=1.0, design in 0.0f64..=1.0, replace in 0.0f64..=1.0) {
        let spec = aug_spec(n);
        let cfg = AugmentConfig { probs: AugmentProbs { scene, design, replace }, ..AugmentConfig::default() };
        let pool = vec!["s1".to_string()];
        let plan = augment::sample_augmentations(&spec, &cfg, &pool, seed).unwrap();
        prop_assert_eq!(&plan, &augment::sample_augmentations(&spec, &cfg, &pool, seed).unwrap());
        plan.check(&spec).unwrap();
        if plan.replacement.is_some() {
            prop_assert!(plan.scene_completion.is_empty() && plan.design_elements.is_empty());
        }
        prop_assert!(plan.scene_completion.len() < n || plan.scene_completion.is_empty());
    }

    #[test]
    fn apply_plan_keeps_frame_count_canvas_and_untouched_targets(n in 1usize..6, seed in any::<u64>()) {
        let spec = aug_spec(n);
        let cfg = AugmentConfig { probs: AugmentProbs { scene: 0.4, design: 0.3, replace: 0.5 }, ..AugmentConfig::default() };
        let mut sub = common::asset("s1", "s1.png");
        sub.label = "sub".into();
        let plan = augment::sample_augmentations(&spec, &cfg, &["s1".into()], seed).unwrap();
        let aug = augment::apply_plan(&spec, &plan, &[sub]).unwrap();
        prop_assert_eq!(aug.spec.k, spec.k);
        prop_assert_eq!(aug.spec.canvas, spec.canvas);
        let victim = plan.replacement.as_ref().map(|r| r.victim_id.clone());
        for p in &spec.target.placements {
            if Some(&p.object_id) == victim.as_ref() {
                continue;
            }
            prop_assert_eq!(aug.spec.target.get(&p.object_id), Some(p));
        }
    }

    #[test]
    fn rendered_captions_validate(
        n in 0usize..=captions::BUILTIN_MAX_OBJECTS,
        words in prop::collection::vec("[a-z<>/ ,.]{1,12}", 12),
        bg in any::<bool>(),
    ) {
        let lib = captions::builtin_templates();
        let t = captions::resolve_template(&lib, "scene", n).unwrap();
        let clean = |s: &String| {
            let s = s.replace("<OBJ>", "o").replace("</OBJ>", "o").replace("<BG>", "b").replace("</BG>", "b");
            if s.trim().is_empty() { "thing".to_string() } else { s }
        };
        let d = CaptionDirectives {
            wrapped: words[..n].iter().map(clean).collect(),
            background: bg.then(|| clean(&words[10])),
            extras: vec![clean(&words[11])],
            edit: None,
        };
        let c = captions::render_caption(t, &d).unwrap();
        prop_assert!(captions::validate_caption(&c, n, bg).is_empty(), "{}", c);
    }
}

fn arb_img() -> impl Strategy<Value = RgbImage> {
    prop::collection::vec(any::<[u8; 3]>(), 36).prop_map(|px| RgbImage::from_fn(6, 6, |x, y| Rgb(px[(y * 6 + x) as usize])))
}

fn arb_mask() -> impl Strategy<Value = Mask> {
    prop::collection::vec(any::<bool>(), 36)
        .prop_filter("nonempty", |b| b.iter().any(|&v| v))
        .prop_map(|b| Mask::from_fn(6, 6, |x, y| b[(y * 6 + x) as usize]))
}

fn arb_row() -> impl Strategy<Value = CaseRow> {
    let opt = || prop::option::of(0.0f64..1.0);
    ("[a-z]{3}", 1usize..5, 0usize..5, opt(), opt(), opt(), opt(), opt()).prop_map(|(id, e, m, a, b, c, d, f)| CaseRow {
        case_id: id,
        expected: e,
        missing: m.min(e),
        clip_i: a,
        dino: b,
        clip_t: c,
        mse_bg: d,
        chamfer: f,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn mse_ignores_unmasked_pixels(a in arb_img(), b in arb_img(), c in arb_img(), mask in arb_mask()) {
        // replace unmasked pixels of `b` with those of `c`
        let mut b2 = b.clone();
        for y in 0..6 {
            for x in 0..6 {
                if !mask.get(x, y) {
                    b2.put_pixel(x, y, *c.get_pixel(x, y));
                }
            }
        }
        prop_assert_eq!(metrics::mse_bg(&a, &b, &mask).unwrap(), metrics::mse_bg(&a, &b2, &mask).unwrap());
    }

    #[test]
    fn mse_is_zero_iff_masked_pixels_match(a in arb_img(), b in arb_img(), mask in arb_mask()) {
        let same = (0..6).all(|y| (0..6).all(|x| !mask.get(x, y) || a.get_pixel(x, y) == b.get_pixel(x, y)));
        prop_assert_eq!(metrics::mse_bg(&a, &b, &mask).unwrap() == 0.0, same);
        prop_assert_eq!(metrics::mse_bg(&a, &a, &mask).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_ignores_target_order_and_is_zero_iff_exact(img in arb_img(), mask in arb_mask(), t in prop::collection::vec(any::<[u8; 3]>(), 1..5)) {
        let mut r = t.clone();
        r.reverse();
        let a = metrics::chamfer_color(&img, &mask, &t).unwrap();
        prop_assert_eq!(a, metrics::chamfer_color(&img, &mask, &r).unwrap());
        let exact = (0..6).all(|y| (0..6).all(|x| !mask.get(x, y) || t.contains(&img.get_pixel(x, y).0)));
        prop_assert_eq!(a == 0.0, exact);
    }

    #[test]
    fn cosine_ignores_positive_rescaling(v in prop::collection::vec(-10.0f32..10.0, 2..16), w in prop::collection::vec(-10.0f32..10.0, 16), s in 0.1f32..50.0) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let w = &w[..v.len()];
        prop_assume!(w.iter().any(|x| x.abs() > 1e-3));
        let scaled: Vec<f32> = v.iter().map(|x| x * s).collect();
        let a = metrics::cosine(&v, w).unwrap();
        let b = metrics::cosine(&scaled, w).unwrap();
        prop_assert!((a - b).abs() < 1e-5, "{} vs {}", a, b);
    }

    #[test]
    fn aggregate_ignores_row_order(rows in prop::collection::vec(arb_row(), 1..8)) {
        let mut rev = rows.clone();
        rev.reverse();
        prop_assert_eq!(metrics::aggregate(&rows).unwrap(), metrics::aggregate(&rev).unwrap());
    }

    #[test]
    fn procedural_backgrounds_are_deterministic(seed in any::<u64>(), w in 4u32..40, h in 4u32..40) {
        let p = ProceduralBackgroundPlan::sample(seed, (w, h)).unwrap();
        let a = background::synth_background(&p, (w, h), seed).unwrap();
        prop_assert_eq!(a.dimensions(), (w, h));
        prop_assert_eq!(a, background::synth_background(&p, (w, h), seed).unwrap());
    }

    #[test]
    fn palettes_respect_hsv_bounds(seed in any::<u64>(), n in 2usize..=4) {
        let p = background::sample_palette(seed, n).unwrap();
        prop_assert_eq!(p.colors.len(), n);
        for c in &p.colors {
            let (_, s, v) = background::rgb_to_hsv(*c);
            prop_assert!((0.2 - 0.01..=0.8 + 0.01).contains(&s), "s={}", s);
            prop_assert!((0.3 - 0.01..=0.95 + 0.01).contains(&v), "v={}", v);
        }
        prop_assert_eq!(p, background::sample_palette(seed, n).unwrap());
    }
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use forge_core::manifest::{
    self, BackgroundSpec, Canvas, LayoutTarget, ObjectAsset, Placement, RealDims, SampleSpec, SourceMode,
};
use forge_core::raster;
use image::{Rgb, RgbImage, Rgba, RgbaImage};
use rand::Rng;
use sha2::{Digest, Sha256};

/// Opaque ellipse of `color` filling a `w x h` raster; symmetric about the
/// raster center.
pub fn ellipse(w: u32, h: u32, color: [u8; 3]) -> RgbaImage {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    RgbaImage::from_fn(w, h, |x, y| {
        let dx = (x as f64 + 0.5 - cx) / cx;
        let dy = (y as f64 + 0.5 - cy) / cy;
        if dx * dx + dy * dy <= 1.0 {
            Rgba([color[0], color[1], color[2], 255])
        } else {
            Rgba([0, 0, 0, 0])
        }
    })
}

/// Opaque rectangle with a transparent border of `pad` pixels.
pub fn padded_rect(w: u32, h: u32, pad: u32, color: [u8; 3]) -> RgbaImage {
    RgbaImage::from_fn(w + 2 * pad, h + 2 * pad, |x, y| {
        if x >= pad && x < w + pad && y >= pad && y < h + pad {
            Rgba([color[0], color[1], color[2], 255])
        } else {
            Rgba([0, 0, 0, 0])
        }
    })
}

pub fn asset(id: &str, file: &str) -> ObjectAsset {
    ObjectAsset {
        id: id.into(),
        label: format!("{id} label"),
        description: format!("the {id} object"),
        cutout: PathBuf::from(file),
        real_dims: None,
        relit_variants: vec![],
    }
}

pub fn placement(id: &str, c: [f64; 2], scale: f64, rot: f64, z: i64) -> Placement {
    Placement {
        object_id: id.into(),
        center_xy: c,
        scale,
        rotation_deg: rot,
        perspective: [[0.0; 2]; 4],
        z_order: z,
        relight_t: 0.0,
    }
}

pub fn base_spec(id: &str, mode: SourceMode, dir: &Path, canvas: (u32, u32)) -> SampleSpec {
    SampleSpec {
        schema: manifest::SCHEMA.into(),
        sample_id: id.into(),
        source_mode: mode,
        objects: vec![],
        background: BackgroundSpec::plain([40, 90, 160], "a blue studio wall"),
        target: LayoutTarget::default(),
        caption_template_id: "studio".into(),
        k: None,
        canvas: Canvas {
            w: canvas.0,
            h: canvas.1,
        },
        seed: 0,
        white_start: false,
        target_image: None,
        interpolation_dir: None,
        base_dir: dir.to_path_buf(),
    }
}

const PALETTE: [[u8; 3]; 6] = [
    [220, 30, 30],
    [30, 200, 60],
    [240, 200, 20],
    [150, 40, 200],
    [20, 200, 220],
    [250, 120, 10],
];

/// A random manual-design spec with `n` ellipse objects. Cutouts are
/// written into `dir`; the sample spec itself is not.
pub fn random_manual_spec(dir: &Path, id: &str, n: usize, rng: &mut impl Rng) -> SampleSpec {
    let canvas = (160u32, 128u32);
    let mut spec = base_spec(id, SourceMode::ManualDesign, dir, canvas);
    spec.seed = rng.gen();
    spec.k = Some(rng.gen_range(2..=10));
    spec.white_start = rng.gen_bool(0.5);
    for i in 0..n {
        let oid = format!("{id}_o{i}");
        let file = format!("{oid}.png");
        let w = rng.gen_range(14..28);
        let h = rng.gen_range(14..28);
        raster::save_rgba(&ellipse(w, h, PALETTE[i % PALETTE.len()]), &dir.join(&file)).unwrap();
        spec.objects.push(asset(&oid, &file));
        spec.target.placements.push(placement(
            &oid,
            [rng.gen_range(20.0..140.0), rng.gen_range(20.0..108.0)],
            rng.gen_range(0.8..1.4),
            rng.gen_range(-30.0..30.0),
            i as i64,
        ));
    }
    spec
}

pub fn write_spec(spec: &SampleSpec, dir: &Path) -> PathBuf {
    let p = dir.join(format!("{}.spec.json", spec.sample_id));
    manifest::save_sample_spec(spec, &p).unwrap();
    p
}

/// Side-by-side spec with real heights `ha` and `hb` meters.
pub fn side_by_side_spec(dir: &Path, id: &str, ha: f64, hb: f64) -> SampleSpec {
    let mut spec = base_spec(id, SourceMode::SideBySide, dir, (256, 192));
    for (i, (h, color)) in [(ha, [220, 30, 30]), (hb, [30, 200, 60])].into_iter().enumerate() {
        let oid = format!("{id}_s{i}");
        let file = format!("{oid}.png");
        raster::save_rgba(&padded_rect(30, 60, 3, color), &dir.join(&file)).unwrap();
        let mut a = asset(&oid, &file);
        a.real_dims = Some(RealDims {
            width_m: h / 2.0,
            height_m: h,
            depth_m: h / 2.0,
        });
        spec.objects.push(a);
        spec.target
            .placements
            .push(placement(&oid, [60.0 + 100.0 * i as f64, 100.0], 1.0, 0.0, i as i64));
    }
    spec.background = BackgroundSpec::plain([235, 235, 235], "a light gray floor");
    spec
}

/// Subject-pair spec; writes the reference cutout and a target photo.
pub fn subject_pair_spec(dir: &Path, id: &str) -> SampleSpec {
    let mut spec = base_spec(id, SourceMode::SubjectPair, dir, (96, 64));
    let file = format!("{id}_subject.png");
    raster::save_rgba(&ellipse(30, 40, [200, 60, 60]), &dir.join(&file)).unwrap();
    let target = format!("{id}_target.png");
    let img = RgbImage::from_fn(96, 64, |x, y| Rgb([(x * 2) as u8, (y * 3) as u8, 90]));
    raster::save_rgb(&img, &dir.join(&target)).unwrap();
    spec.objects.push(asset(&format!("{id}_subj"), &file));
    spec.target_image = Some(PathBuf::from(target));
    spec
}

/// SHA-256 over every file below `root`: sorted relative paths and bytes.
pub fn dir_hash(root: &Path) -> String {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.push(p);
            }
        }
    }
    let mut files = Vec::new();
    walk(root, &mut files);
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(std::fs::read(&f).unwrap());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

//! Background pools: plain colors, procedural primitives over harmonious
//! palettes, and seeded choice from a photo directory.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{BackgroundKind, BackgroundSpec};
use crate::raster::{self, to_u8};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonyRule {
    /// Hues within 30 degrees of the base hue.
    Analogous,
    /// Base hue and its opposite.
    Complementary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub rule: HarmonyRule,
    pub base_hue: f64,
    pub colors: Vec<[u8; 3]>,
}

const ANALOGOUS_OFFSETS: [f64; 4] = [0.0, 30.0, -30.0, 15.0];
const COMPLEMENTARY_OFFSETS: [f64; 4] = [0.0, 180.0, 0.0, 180.0];

/// HSV (hue in degrees, s and v in `[0,1]`) to 8-bit RGB.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0);
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [to_u8((r + m) * 255.0), to_u8((g + m) * 255.0), to_u8((b + m) * 255.0)]
}

/// 8-bit RGB to HSV; hue is 0 for achromatic colors.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

/// Harmonious palette of `n` colors, deterministic in `seed`.
pub fn sample_palette(seed: u64, n: usize) -> Result<Palette> {
    if !(2..=4).contains(&n) {
        return Err(Error::arg(format!("palette size {n} outside [2, 4]")));
    }
    let mut rng = seed::sub_rng(seed, "palette");
    let base_hue = rng.gen_range(0.0..360.0);
    let rule = if rng.gen_bool(0.5) {
        HarmonyRule::Analogous
    } else {
        HarmonyRule::Complementary
    };
    let offsets = match rule {
        HarmonyRule::Analogous => ANALOGOUS_OFFSETS,
        HarmonyRule::Complementary => COMPLEMENTARY_OFFSETS,
    };
    let colors = offsets[..n]
        .iter()
        .map(|off| {
            let s = rng.gen_range(0.2..=0.8);
            let v = rng.gen_range(0.3..=0.95);
            hsv_to_rgb(base_hue + off, s, v)
        })
        .collect();
    Ok(Palette {
        rule,
        base_hue,
        colors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "primitive", rename_all = "snake_case")]
pub enum Primitive {
    LinearGradient { angle_deg: f64 },
    RadialGradient { center_xy: [f64; 2], radius: f64 },
    BlockTexture { block_size_px: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProceduralBackgroundPlan {
    #[serde(flatten)]
    pub primitive: Primitive,
    pub palette: Vec<[u8; 3]>,
}

impl ProceduralBackgroundPlan {
    /// Random primitive and palette sized for a canvas.
    pub fn sample(seed: u64, size: (u32, u32)) -> Result<Self> {
        let mut rng = seed::sub_rng(seed, "procedural-plan");
        let n = rng.gen_range(2..=4);
        let palette = sample_palette(seed::derive(seed, "procedural-palette"), n)?.colors;
        let (w, h) = (size.0 as f64, size.1 as f64);
        let primitive = match rng.gen_range(0..3) {
            0 => Primitive::LinearGradient {
                angle_deg: rng.gen_range(0.0..360.0),
            },
            1 => Primitive::RadialGradient {
                center_xy: [rng.gen_range(0.0..=w), rng.gen_range(0.0..=h)],
                radius: rng.gen_range(0.3..=1.0) * w.hypot(h),
            },
            _ => {
                let max_block = (size.0.min(size.1) / 2).max(4);
                Primitive::BlockTexture {
                    block_size_px: rng.gen_range(4..=max_block.max(4)),
                }
            }
        };
        Ok(ProceduralBackgroundPlan { primitive, palette })
    }
}

/// Piecewise-linear interpolation along the palette at `t` in `[0,1]`.
fn palette_at(palette: &[[u8; 3]], t: f64) -> [u8; 3] {
    if palette.len() == 1 {
        return palette[0];
    }
    let pos = t.clamp(0.0, 1.0) * (palette.len() - 1) as f64;
    let i = (pos.floor() as usize).min(palette.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (palette[i], palette[i + 1]);
    [0, 1, 2].map(|c| to_u8(a[c] as f64 * (1.0 - f) + b[c] as f64 * f))
}

pub fn synth_background(plan: &ProceduralBackgroundPlan, size: (u32, u32), seed: u64) -> Result<RgbImage> {
    let (w, h) = size;
    if w == 0 || h == 0 {
        return Err(Error::arg("zero-size canvas"));
    }
    if plan.palette.is_empty() || plan.palette.len() > 4 {
        return Err(Error::arg(format!(
            "palette must hold 1 to 4 colors, got {}",
            plan.palette.len()
        )));
    }
    let palette = &plan.palette;
    match plan.primitive {
        Primitive::LinearGradient { angle_deg } => {
            let (dx, dy) = (angle_deg.to_radians().cos(), angle_deg.to_radians().sin());
            // normalize projections of pixel centers so the extreme pixels hit 0 and 1
            let proj = |x: f64, y: f64| x * dx + y * dy;
            let corners = [
                proj(0.5, 0.5),
                proj(w as f64 - 0.5, 0.5),
                proj(0.5, h as f64 - 0.5),
                proj(w as f64 - 0.5, h as f64 - 0.5),
            ];
            let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            Ok(RgbImage::from_fn(w, h, |x, y| {
                let p = proj(x as f64 + 0.5, y as f64 + 0.5);
                let t = if span > 1e-12 { (p - lo) / span } else { 0.0 };
                Rgb(palette_at(palette, t))
            }))
        }
        Primitive::RadialGradient { center_xy, radius } => {
            if !(radius > 0.0) {
                return Err(Error::arg(format!("radial radius must be positive, got {radius}")));
            }
            Ok(RgbImage::from_fn(w, h, |x, y| {
                let d = (x as f64 + 0.5 - center_xy[0]).hypot(y as f64 + 0.5 - center_xy[1]);
                Rgb(palette_at(palette, d / radius))
            }))
        }
        Primitive::BlockTexture { block_size_px } => {
            if block_size_px == 0 {
                return Err(Error::arg("block size must be positive"));
            }
            let bw = w.div_ceil(block_size_px);
            let bh = h.div_ceil(block_size_px);
            let mut rng = seed::sub_rng(seed, "blocks");
            let colors: Vec<[u8; 3]> = (0..bw * bh)
                .map(|_| palette[rng.gen_range(0..palette.len())])
                .collect();
            Ok(RgbImage::from_fn(w, h, |x, y| {
                let (bx, by) = (x / block_size_px, y / block_size_px);
                Rgb(colors[(by * bw + bx) as usize])
            }))
        }
    }
}

/// Uniformly random opaque color for the plain-color pool.
pub fn random_plain_color(seed: u64) -> [u8; 3] {
    let mut rng = seed::sub_rng(seed, "plain-color");
    [rng.gen(), rng.gen(), rng.gen()]
}

/// Image files of a photo pool in lexicographic order.
pub fn list_photo_pool(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, Default)]
pub struct BackgroundPools {
    pub photo_dir: Option<PathBuf>,
}

/// Resolves a background spec to a canvas-sized raster. Relative paths in
/// the sample spec are resolved against `base_dir`.
pub fn pick_background(
    spec: &BackgroundSpec,
    base_dir: &Path,
    pools: &BackgroundPools,
    seed: u64,
    size: (u32, u32),
) -> Result<RgbImage> {
    let (w, h) = size;
    if w == 0 || h == 0 {
        return Err(Error::arg("zero-size canvas"));
    }
    match spec.kind {
        BackgroundKind::PlainColor => {
            let color = spec
                .color
                .ok_or_else(|| Error::schema("background.color", "required for plain_color"))?;
            Ok(raster::uniform_rgb(w, h, color))
        }
        BackgroundKind::Photo => {
            let path = match &spec.photo_path {
                Some(p) => base_dir.join(p),
                None => {
                    let dir = pools.photo_dir.as_ref().ok_or_else(|| {
                        Error::arg("photo background without photo_path needs a photo pool")
                    })?;
                    let files = list_photo_pool(dir)?;
                    if files.is_empty() {
                        return Err(Error::arg(format!(
                            "photo pool {} is empty",
                            dir.display()
                        )));
                    }
                    let mut rng = seed::sub_rng(seed, "photo-pool");
                    files[rng.gen_range(0..files.len())].clone()
                }
            };
            Ok(raster::center_crop_resize(&raster::load_rgb(&path)?, w, h))
        }
        BackgroundKind::Procedural => {
            let s = spec.procedural_seed.unwrap_or(seed);
            let plan = ProceduralBackgroundPlan::sample(s, size)?;
            synth_background(&plan, size, s)
        }
        BackgroundKind::InpaintedOriginal => {
            let rel = spec.photo_path.as_ref().ok_or_else(|| {
                Error::schema("background.photo_path", "required for inpainted_original")
            })?;
            let img = raster::load_rgb(&base_dir.join(rel))?;
            if img.dimensions() != size {
                return Err(Error::invariant(format!(
                    "inpainted background is {}x{}, canvas is {w}x{h}",
                    img.width(),
                    img.height()
                )));
            }
            Ok(img)
        }
    }
}

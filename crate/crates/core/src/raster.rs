//! Raster primitives shared by every stage: binary masks, pixel rectangles,
//! 8-bit rounding and deterministic PNG I/O.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, GrayImage, ImageEncoder, Luma, RgbImage, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rounds to the nearest 8-bit level, halves away from zero, clamped.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Axis-aligned pixel rectangle; serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct PixelRect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl From<[i64; 4]> for PixelRect {
    fn from(v: [i64; 4]) -> Self {
        PixelRect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<PixelRect> for [i64; 4] {
    fn from(r: PixelRect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

impl PixelRect {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        PixelRect { x, y, w, h }
    }

    pub fn right(&self) -> i64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w.max(0) * self.h.max(0)
    }

    pub fn is_empty(&self) -> bool {
        self.w <= 0 || self.h <= 0
    }

    pub fn intersect(&self, other: &PixelRect) -> PixelRect {
        let x = self.x.max(other.x);
        let y = self.y.max(other.y);
        let r = self.right().min(other.right());
        let b = self.bottom().min(other.bottom());
        PixelRect::new(x, y, (r - x).max(0), (b - y).max(0))
    }

    pub fn overlaps(&self, other: &PixelRect) -> bool {
        !self.intersect(other).is_empty()
    }

    pub fn contains_rect(&self, other: &PixelRect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn center(&self) -> [f64; 2] {
        [
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        ]
    }
}

/// Binary raster. Row-major, `true` marks a set pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            bits,
        }
    }

    /// Sets every pixel inside `rect` (clipped to the mask).
    pub fn from_rect(width: u32, height: u32, rect: PixelRect) -> Self {
        Mask::from_fn(width, height, |x, y| {
            let (x, y) = (x as i64, y as i64);
            x >= rect.x && x < rect.right() && y >= rect.y && y < rect.bottom()
        })
    }

    /// Any nonzero gray level counts as set.
    pub fn from_gray(img: &GrayImage) -> Self {
        Mask {
            width: img.width(),
            height: img.height(),
            bits: img.as_raw().iter().map(|&v| v != 0).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn check_same_size(&self, other: &Mask) {
        assert_eq!(
            self.dimensions(),
            other.dimensions(),
            "mask dimensions differ"
        );
    }

    pub fn union_with(&mut self, other: &Mask) {
        self.check_same_size(other);
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn subtract(&mut self, other: &Mask) {
        self.check_same_size(other);
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= !b;
        }
    }

    pub fn intersection_count(&self, other: &Mask) -> usize {
        self.check_same_size(other);
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn union_count(&self, other: &Mask) -> usize {
        self.check_same_size(other);
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a || b)
            .count()
    }

    pub fn iou(&self, other: &Mask) -> f64 {
        let union = self.union_count(other);
        if union == 0 {
            return 0.0;
        }
        self.intersection_count(other) as f64 / union as f64
    }

    /// Tight bounding box of the set pixels, `None` for an empty mask.
    pub fn bbox(&self) -> Option<PixelRect> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        any.then(|| {
            PixelRect::new(
                x0 as i64,
                y0 as i64,
                (x1 - x0 + 1) as i64,
                (y1 - y0 + 1) as i64,
            )
        })
    }
}

/// Alpha-weighted centroid in continuous pixel coordinates (pixel centers at
/// `+0.5`). `None` when the raster is fully transparent.
pub fn alpha_centroid(img: &RgbaImage) -> Option<[f64; 2]> {
    let (mut sx, mut sy, mut sw) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y, p) in img.enumerate_pixels() {
        let a = p[3] as f64;
        if a > 0.0 {
            sx += a * (x as f64 + 0.5);
            sy += a * (y as f64 + 0.5);
            sw += a;
        }
    }
    (sw > 0.0).then(|| [sx / sw, sy / sw])
}

/// Bounding box of pixels with nonzero alpha.
pub fn alpha_bbox(img: &RgbaImage) -> Option<PixelRect> {
    Mask::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y)[3] > 0).bbox()
}

pub fn has_visible_alpha(img: &RgbaImage) -> bool {
    img.pixels().any(|p| p[3] > 0)
}

/// Flattens straight-alpha RGBA onto an opaque white ground.
pub fn flatten_over_white(img: &RgbaImage) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        let a = p[3] as f64 / 255.0;
        image::Rgb([0, 1, 2].map(|c| to_u8(p[c] as f64 * a + 255.0 * (1.0 - a))))
    })
}

pub fn uniform_rgb(width: u32, height: u32, color: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(width, height, image::Rgb(color))
}

pub fn transparent(width: u32, height: u32) -> RgbaImage {
    RgbaImage::from_pixel(width, height, Rgba([0, 0, 0, 0]))
}

/// Center-crops `img` to the aspect ratio of `(width, height)`, then resizes
/// with a triangle filter. Aspect is preserved; no letterboxing.
pub fn center_crop_resize(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (sw, sh) = img.dimensions();
    if (sw, sh) == (width, height) {
        return img.clone();
    }
    let target_aspect = width as f64 / height as f64;
    let src_aspect = sw as f64 / sh as f64;
    let (cw, ch) = if src_aspect > target_aspect {
        (((sh as f64) * target_aspect).round().max(1.0) as u32, sh)
    } else {
        (sw, ((sw as f64) / target_aspect).round().max(1.0) as u32)
    };
    let cx = (sw - cw.min(sw)) / 2;
    let cy = (sh - ch.min(sh)) / 2;
    let cropped = image::imageops::crop_imm(img, cx, cy, cw.min(sw), ch.min(sh)).to_image();
    image::imageops::resize(
        &cropped,
        width,
        height,
        image::imageops::FilterType::Triangle,
    )
}

fn encode_png(path: &Path, buf: &[u8], w: u32, h: u32, color: ExtendedColorType) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(
        BufWriter::new(file),
        CompressionType::Default,
        FilterType::Adaptive,
    );
    encoder
        .write_image(buf, w, h, color)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes an 8-bit RGB PNG. Fixed encoder settings: identical pixels give
/// identical bytes.
pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    encode_png(path, img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
}

pub fn save_rgba(img: &RgbaImage, path: &Path) -> Result<()> {
    encode_png(
        path,
        img.as_raw(),
        img.width(),
        img.height(),
        ExtendedColorType::Rgba8,
    )
}

pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    encode_png(path, img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(open(path)?.to_rgb8())
}

pub fn load_rgba(path: &Path) -> Result<RgbaImage> {
    Ok(open(path)?.to_rgba8())
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    Ok(Mask::from_gray(&open(path)?.to_luma8()))
}

pub fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

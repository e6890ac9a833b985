//! Pixel-level assembly of a single frame.
//!
//! Geometry convention: a [`Transform2D`] places the *center* of a source
//! raster at `translation_xy` on the output canvas, after scaling and rotating
//! about that center. Positive rotation is clockwise on screen (y points
//! down). Perspective offsets are added to the four destination corners in
//! the order top-left, top-right, bottom-right, bottom-left.
//!
//! Resampling is inverse-mapped bilinear on premultiplied color. Source
//! samples outside the raster are transparent.

use std::collections::BTreeSet;

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{to_u8, PixelRect};
use crate::seed;

const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform2D {
    pub scale: f64,
    pub rotation_deg: f64,
    pub translation_xy: [f64; 2],
    #[serde(default)]
    pub perspective_offsets: [[f64; 2]; 4],
}

/// Cosine and sine with exact values at multiples of 90 degrees.
fn trig(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (1.0, 0.0)
    } else if r == 90.0 {
        (0.0, 1.0)
    } else if r == 180.0 {
        (-1.0, 0.0)
    } else if r == 270.0 {
        (0.0, -1.0)
    } else {
        let rad = r.to_radians();
        (rad.cos(), rad.sin())
    }
}

impl Transform2D {
    /// Pure placement: unit scale, no rotation, no perspective.
    pub fn at(center: [f64; 2]) -> Self {
        Transform2D {
            scale: 1.0,
            rotation_deg: 0.0,
            translation_xy: center,
            perspective_offsets: [[0.0; 2]; 4],
        }
    }

    /// Places a `w x h` raster with its top-left corner at the origin,
    /// unchanged. Warping with this transform into a `w x h` output is the
    /// identity.
    pub fn identity_for(w: u32, h: u32) -> Self {
        Transform2D::at([w as f64 / 2.0, h as f64 / 2.0])
    }

    pub fn is_affine(&self) -> bool {
        self.perspective_offsets.iter().flatten().all(|&v| v == 0.0)
    }

    /// Destination quadrilateral of a `w x h` source raster.
    pub fn quad(&self, w: u32, h: u32) -> [[f64; 2]; 4] {
        let (c, s) = trig(self.rotation_deg);
        let hw = w as f64 / 2.0 * self.scale;
        let hh = h as f64 / 2.0 * self.scale;
        let corners = [[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]];
        let mut out = [[0.0; 2]; 4];
        for (i, [x, y]) in corners.into_iter().enumerate() {
            out[i] = [
                c * x - s * y + self.translation_xy[0] + self.perspective_offsets[i][0],
                s * x + c * y + self.translation_xy[1] + self.perspective_offsets[i][1],
            ];
        }
        out
    }

    /// Axis-aligned extent of the destination quad, relative to the center.
    pub fn half_extents(&self, w: u32, h: u32) -> [f64; 2] {
        let q = self.quad(w, h);
        let [cx, cy] = self.translation_xy;
        let hx = q.iter().map(|p| (p[0] - cx).abs()).fold(0.0, f64::max);
        let hy = q.iter().map(|p| (p[1] - cy).abs()).fold(0.0, f64::max);
        [hx, hy]
    }

    /// Checks the quad is convex with positive area.
    pub fn validate(&self, w: u32, h: u32) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Degenerate(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if w == 0 || h == 0 {
            return Err(Error::Degenerate("empty source raster".into()));
        }
        let q = self.quad(w, h);
        if q.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite corner".into()));
        }
        let mut sign = 0.0f64;
        let mut area2 = 0.0;
        for i in 0..4 {
            let a = q[i];
            let b = q[(i + 1) % 4];
            let c = q[(i + 2) % 4];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross.abs() < 1e-12 {
                return Err(Error::Degenerate("collinear quad corners".into()));
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return Err(Error::Degenerate("quad is not convex".into()));
            }
            area2 += a[0] * b[1] - b[0] * a[1];
        }
        if area2.abs() / 2.0 <= 0.0 {
            return Err(Error::Degenerate("quad has zero area".into()));
        }
        Ok(())
    }
}

/// Maps destination canvas coordinates back into source raster coordinates.
#[derive(Debug, Clone, Copy)]
enum InverseMap {
    Affine {
        m: [[f64; 2]; 2],
        t: [f64; 2],
        src_center: [f64; 2],
    },
    Projective([[f64; 3]; 3]),
}

impl InverseMap {
    fn new(t: &Transform2D, w: u32, h: u32) -> Self {
        if t.is_affine() {
            let (c, s) = trig(t.rotation_deg);
            let inv = 1.0 / t.scale;
            InverseMap::Affine {
                m: [[c * inv, s * inv], [-s * inv, c * inv]],
                t: t.translation_xy,
                src_center: [w as f64 / 2.0, h as f64 / 2.0],
            }
        } else {
            let q = t.quad(w, h);
            let sq = square_to_quad(&q);
            let scale_src = [
                [1.0 / w as f64, 0.0, 0.0],
                [0.0, 1.0 / h as f64, 0.0],
                [0.0, 0.0, 1.0],
            ];
            InverseMap::Projective(invert3(&mul3(&sq, &scale_src)))
        }
    }

    #[inline]
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            InverseMap::Affine { m, t, src_center } => {
                let dx = x - t[0];
                let dy = y - t[1];
                (
                    m[0][0] * dx + m[0][1] * dy + src_center[0],
                    m[1][0] * dx + m[1][1] * dy + src_center[1],
                )
            }
            InverseMap::Projective(h) => {
                let u = h[0][0] * x + h[0][1] * y + h[0][2];
                let v = h[1][0] * x + h[1][1] * y + h[1][2];
                let z = h[2][0] * x + h[2][1] * y + h[2][2];
                (u / z, v / z)
            }
        }
    }
}

/// Unit square `(0,0),(1,0),(1,1),(0,1)` onto the quad, as a homography.
fn square_to_quad(q: &[[f64; 2]; 4]) -> [[f64; 3]; 3] {
    let [[x0, y0], [x1, y1], [x2, y2], [x3, y3]] = *q;
    let sx = x0 - x1 + x2 - x3;
    let sy = y0 - y1 + y2 - y3;
    if sx.abs() < 1e-12 && sy.abs() < 1e-12 {
        return [
            [x1 - x0, x3 - x0, x0],
            [y1 - y0, y3 - y0, y0],
            [0.0, 0.0, 1.0],
        ];
    }
    let dx1 = x1 - x2;
    let dx2 = x3 - x2;
    let dy1 = y1 - y2;
    let dy2 = y3 - y2;
    let den = dx1 * dy2 - dx2 * dy1;
    let g = (sx * dy2 - dx2 * sy) / den;
    let h = (dx1 * sy - sx * dy1) / den;
    [
        [x1 - x0 + g * x1, x3 - x0 + h * x3, x0],
        [y1 - y0 + g * y1, y3 - y0 + h * y3, y0],
        [g, h, 1.0],
    ]
}

fn mul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let [[a, b, c], [d, e, f], [g, h, i]] = *m;
    let det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    let inv = 1.0 / det;
    [
        [(e * i - f * h) * inv, (c * h - b * i) * inv, (b * f - c * e) * inv],
        [(f * g - d * i) * inv, (a * i - c * g) * inv, (c * d - a * f) * inv],
        [(d * h - e * g) * inv, (b * g - a * h) * inv, (a * e - b * d) * inv],
    ]
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

/// Bilinear sample at continuous source coordinates; `None` when fully
/// outside. Grid-aligned samples copy the source pixel verbatim.
#[inline]
fn sample(src: &RgbaImage, u: f64, v: f64) -> Option<[u8; 4]> {
    let (w, h) = (src.width() as i64, src.height() as i64);
    let sx = snap(u - 0.5);
    let sy = snap(v - 0.5);
    if sx <= -1.0 || sy <= -1.0 || sx >= w as f64 || sy >= h as f64 {
        return None;
    }
    let x0 = sx.floor() as i64;
    let y0 = sy.floor() as i64;
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    if fx == 0.0 && fy == 0.0 {
        return (x0 >= 0 && y0 >= 0 && x0 < w && y0 < h)
            .then(|| src.get_pixel(x0 as u32, y0 as u32).0);
    }
    let mut acc = [0.0f64; 4];
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    for (x, y, wt) in taps {
        if wt == 0.0 || x < 0 || y < 0 || x >= w || y >= h {
            continue;
        }
        let p = src.get_pixel(x as u32, y as u32);
        let a = p[3] as f64 * wt;
        acc[0] += p[0] as f64 * a;
        acc[1] += p[1] as f64 * a;
        acc[2] += p[2] as f64 * a;
        acc[3] += a;
    }
    if acc[3] <= 0.0 {
        return Some([0, 0, 0, 0]);
    }
    Some([
        to_u8(acc[0] / acc[3]),
        to_u8(acc[1] / acc[3]),
        to_u8(acc[2] / acc[3]),
        to_u8(acc[3]),
    ])
}

/// Output pixel range touched by the warped quad, clipped to the canvas.
fn quad_bounds(q: &[[f64; 2]; 4], out_w: u32, out_h: u32) -> Option<(u32, u32, u32, u32)> {
    let min_x = q.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let max_x = q.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_y = q.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let max_y = q.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_x.floor() - 1.0).max(0.0);
    let y0 = (min_y.floor() - 1.0).max(0.0);
    let x1 = (max_x.ceil() + 1.0).min(out_w as f64);
    let y1 = (max_y.ceil() + 1.0).min(out_h as f64);
    (x0 < x1 && y0 < y1).then_some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
}

/// Calls `f(x, y, rgba)` for every output pixel the warped raster touches.
fn for_each_warped(
    src: &RgbaImage,
    t: &Transform2D,
    out_w: u32,
    out_h: u32,
    mut f: impl FnMut(u32, u32, [u8; 4]),
) -> Result<()> {
    t.validate(src.width(), src.height())?;
    let map = InverseMap::new(t, src.width(), src.height());
    let Some((x0, y0, x1, y1)) = quad_bounds(&t.quad(src.width(), src.height()), out_w, out_h)
    else {
        return Ok(());
    };
    for y in y0..y1 {
        for x in x0..x1 {
            let (u, v) = map.map(x as f64 + 0.5, y as f64 + 0.5);
            if let Some(px) = sample(src, u, v) {
                if px[3] > 0 {
                    f(x, y, px);
                }
            }
        }
    }
    Ok(())
}

/// Resamples `src` under `t` onto a transparent `out_size` canvas.
pub fn warp(src: &RgbaImage, t: &Transform2D, out_size: (u32, u32)) -> Result<RgbaImage> {
    let (out_w, out_h) = out_size;
    let mut out = RgbaImage::new(out_w, out_h);
    for_each_warped(src, t, out_w, out_h, |x, y, px| {
        out.put_pixel(x, y, Rgba(px));
    })?;
    Ok(out)
}

/// Opaque white rectangle around the cutout, expanded by `padding_frac` of
/// the cutout size on each side, with the cutout composited at its center.
pub fn white_box_embed(cutout: &RgbaImage, padding_frac: f64) -> Result<RgbaImage> {
    if cutout.width() == 0 || cutout.height() == 0 {
        return Err(Error::arg("white_box_embed: empty cutout"));
    }
    if !(0.0..=0.5).contains(&padding_frac) {
        return Err(Error::arg(format!(
            "padding_frac {padding_frac} outside [0, 0.5]"
        )));
    }
    let pad_x = (padding_frac * cutout.width() as f64).round() as u32;
    let pad_y = (padding_frac * cutout.height() as f64).round() as u32;
    let mut out = RgbaImage::from_pixel(
        cutout.width() + 2 * pad_x,
        cutout.height() + 2 * pad_y,
        Rgba([255, 255, 255, 255]),
    );
    for (x, y, p) in cutout.enumerate_pixels() {
        let a = p[3] as f64 / 255.0;
        let blended = [0, 1, 2].map(|c| to_u8(p[c] as f64 * a + 255.0 * (1.0 - a)));
        out.put_pixel(
            x + pad_x,
            y + pad_y,
            Rgba([blended[0], blended[1], blended[2], 255]),
        );
    }
    Ok(out)
}

/// Seeded rejection sampling of pairwise-disjoint, fully in-canvas rects.
///
/// Items are visited in a seed-shuffled order; each gets up to `max_tries`
/// uniform top-left draws. The returned rects are in input order; an item's
/// center is [`PixelRect::center`].
pub fn scatter_layout(
    item_sizes: &[(u32, u32)],
    canvas: (u32, u32),
    seed: u64,
    max_tries: usize,
) -> Result<Vec<PixelRect>> {
    let (cw, ch) = canvas;
    for (i, &(w, h)) in item_sizes.iter().enumerate() {
        if w == 0 || h == 0 {
            return Err(Error::arg(format!("item {i} has zero size")));
        }
        if w > cw || h > ch {
            return Err(Error::Placement(format!(
                "item {i} ({w}x{h}) does not fit the {cw}x{ch} canvas"
            )));
        }
    }
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..item_sizes.len()).collect();
    order.shuffle(&mut rng);

    let mut placed: Vec<Option<PixelRect>> = vec![None; item_sizes.len()];
    let mut taken: Vec<PixelRect> = Vec::with_capacity(item_sizes.len());
    for &i in &order {
        let (w, h) = item_sizes[i];
        let mut found = None;
        for _ in 0..max_tries {
            let x = rng.gen_range(0..=(cw - w)) as i64;
            let y = rng.gen_range(0..=(ch - h)) as i64;
            let rect = PixelRect::new(x, y, w as i64, h as i64);
            if taken.iter().all(|r| !r.overlaps(&rect)) {
                found = Some(rect);
                break;
            }
        }
        let rect = found.ok_or_else(|| {
            Error::Placement(format!(
                "item {i} ({w}x{h}) could not be placed after {max_tries} tries"
            ))
        })?;
        taken.push(rect);
        placed[i] = Some(rect);
    }
    Ok(placed.into_iter().map(|r| r.expect("every item placed")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    /// Image-plane direction from the object toward the light; 0 = right,
    /// 90 = up, 180 = left.
    pub direction_deg: f64,
    /// Height of the light above the ground plane; must be positive.
    pub elevation_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowParams {
    pub blur_px: u32,
    pub opacity: f64,
    /// Cap on `cot(elevation)` so grazing lights stay bounded.
    #[serde(default = "default_max_shear")]
    pub max_shear: f64,
}

fn default_max_shear() -> f64 {
    3.0
}

impl Default for ShadowParams {
    fn default() -> Self {
        ShadowParams {
            blur_px: 4,
            opacity: 0.45,
            max_shear: default_max_shear(),
        }
    }
}

/// Vertical squash applied to the sheared silhouette.
pub const SHADOW_FLATTEN: f64 = 0.25;

/// Float alpha raster positioned in the source cutout's pixel frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub width: u32,
    pub height: u32,
    /// Top-left of this raster in cutout pixel coordinates.
    pub origin: [i64; 2],
    pub alpha: Vec<f64>,
}

impl Silhouette {
    pub fn area(&self) -> f64 {
        self.alpha.iter().sum()
    }

    fn at(&self, x: u32, y: u32) -> f64 {
        self.alpha[y as usize * self.width as usize + x as usize]
    }
}

/// Cast shadow in the cutout's pixel frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowLayer {
    pub raster: RgbaImage,
    /// Top-left of `raster` in cutout pixel coordinates.
    pub origin: [i64; 2],
    /// Raster center minus the anchor (bottom-center of the silhouette).
    pub offset: [f64; 2],
}

impl ShadowLayer {
    /// Transform that keeps the shadow attached to an object placed with
    /// `object`. Perspective offsets are not carried over.
    pub fn transform_for(&self, object: &Transform2D, cutout_size: (u32, u32)) -> Transform2D {
        let local = [
            self.origin[0] as f64 + self.raster.width() as f64 / 2.0 - cutout_size.0 as f64 / 2.0,
            self.origin[1] as f64 + self.raster.height() as f64 / 2.0
                - cutout_size.1 as f64 / 2.0,
        ];
        let (c, s) = trig(object.rotation_deg);
        let [lx, ly] = [local[0] * object.scale, local[1] * object.scale];
        Transform2D {
            scale: object.scale,
            rotation_deg: object.rotation_deg,
            translation_xy: [
                object.translation_xy[0] + c * lx - s * ly,
                object.translation_xy[1] + s * lx + c * ly,
            ],
            perspective_offsets: [[0.0; 2]; 4],
        }
    }
}

fn shear_factor(light: &Light, max_shear: f64) -> Result<f64> {
    if !(light.elevation_deg > 0.0) {
        return Err(Error::arg(format!(
            "light elevation must be > 0 degrees, got {}",
            light.elevation_deg
        )));
    }
    let cot = if light.elevation_deg >= 90.0 {
        0.0
    } else {
        1.0 / light.elevation_deg.to_radians().tan()
    };
    let away = -light.direction_deg.to_radians().cos();
    Ok(cot.min(max_shear) * away)
}

/// The cutout's alpha silhouette sheared along the ground away from the
/// light. Each row shifts by a whole number of pixels proportional to its
/// height above the silhouette's bottom edge, so area is preserved exactly.
pub fn sheared_silhouette(cutout: &RgbaImage, light: &Light, max_shear: f64) -> Result<Option<Silhouette>> {
    let k = shear_factor(light, max_shear)?;
    let (w, h) = cutout.dimensions();
    let rows: Vec<u32> = (0..h)
        .filter(|&y| (0..w).any(|x| cutout.get_pixel(x, y)[3] > 0))
        .collect();
    let (Some(&top), Some(&last)) = (rows.first(), rows.last()) else {
        return Ok(None);
    };
    let bottom = last + 1;
    let shifts: Vec<i64> = (top..bottom)
        .map(|y| (k * (bottom as f64 - y as f64 - 0.5)).round() as i64)
        .collect();
    let min_shift = *shifts.iter().min().unwrap();
    let max_shift = *shifts.iter().max().unwrap();
    let sw = w as i64 + max_shift - min_shift;
    let sh = (bottom - top) as usize;
    let mut alpha = vec![0.0; sw as usize * sh];
    for (row, y) in (top..bottom).enumerate() {
        let shift = shifts[row] - min_shift;
        for x in 0..w {
            let a = cutout.get_pixel(x, y)[3] as f64 / 255.0;
            alpha[row * sw as usize + (x as i64 + shift) as usize] = a;
        }
    }
    Ok(Some(Silhouette {
        width: sw as u32,
        height: sh as u32,
        origin: [min_shift, top as i64],
        alpha,
    }))
}

/// Squashes a silhouette vertically toward its bottom edge by area
/// averaging.
fn flatten(s: &Silhouette, factor: f64) -> Silhouette {
    let hs = s.height as f64;
    let hf = (hs * factor).ceil().max(1.0) as u32;
    let span = 1.0 / factor;
    let mut alpha = vec![0.0; s.width as usize * hf as usize];
    for r in 0..hf {
        // rows counted up from the bottom edge
        let j = (hf - 1 - r) as f64;
        let lo = (hs - (j + 1.0) * span).max(0.0);
        let hi = hs - j * span;
        for sy in lo.floor() as u32..(hi.ceil() as u32).min(s.height) {
            let overlap = (hi.min(sy as f64 + 1.0) - lo.max(sy as f64)).max(0.0);
            if overlap == 0.0 {
                continue;
            }
            for x in 0..s.width {
                alpha[r as usize * s.width as usize + x as usize] += s.at(x, sy) * overlap / span;
            }
        }
    }
    Silhouette {
        width: s.width,
        height: hf,
        origin: [s.origin[0], s.origin[1] + s.height as i64 - hf as i64],
        alpha,
    }
}

fn box_blur(s: &Silhouette, radius: u32) -> Silhouette {
    if radius == 0 {
        return s.clone();
    }
    let r = radius as usize;
    let w = s.width as usize + 2 * r;
    let h = s.height as usize + 2 * r;
    let mut padded = vec![0.0; w * h];
    for y in 0..s.height as usize {
        for x in 0..s.width as usize {
            padded[(y + r) * w + x + r] = s.alpha[y * s.width as usize + x];
        }
    }
    let win = (2 * r + 1) as f64;
    let mut horiz = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            horiz[y * w + x] = padded[y * w + lo..=y * w + hi].iter().sum::<f64>() / win;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| horiz[yy * w + x]).sum::<f64>() / win;
        }
    }
    Silhouette {
        width: w as u32,
        height: h as u32,
        origin: [s.origin[0] - r as i64, s.origin[1] - r as i64],
        alpha: out,
    }
}

/// Heuristic ground shadow: shear away from the light, flatten to a quarter
/// of the silhouette height, box-blur, fill black at `opacity`. Anchored at
/// the silhouette's bottom edge.
pub fn render_shadow(cutout: &RgbaImage, light: &Light, params: &ShadowParams) -> Result<ShadowLayer> {
    if !(params.opacity > 0.0 && params.opacity <= 1.0) {
        return Err(Error::arg(format!(
            "shadow opacity {} outside (0, 1]",
            params.opacity
        )));
    }
    let Some(sheared) = sheared_silhouette(cutout, light, params.max_shear)? else {
        return Ok(ShadowLayer {
            raster: RgbaImage::new(cutout.width(), cutout.height()),
            origin: [0, 0],
            offset: [0.0, 0.0],
        });
    };
    let bbox = crate::raster::alpha_bbox(cutout).expect("nonempty silhouette");
    let anchor = [bbox.x as f64 + bbox.w as f64 / 2.0, bbox.bottom() as f64];
    let shadow = box_blur(&flatten(&sheared, SHADOW_FLATTEN), params.blur_px);
    let raster = RgbaImage::from_fn(shadow.width, shadow.height, |x, y| {
        Rgba([0, 0, 0, to_u8(255.0 * params.opacity * shadow.at(x, y).min(1.0))])
    });
    let offset = [
        shadow.origin[0] as f64 + shadow.width as f64 / 2.0 - anchor[0],
        shadow.origin[1] as f64 + shadow.height as f64 / 2.0 - anchor[1],
    ];
    Ok(ShadowLayer {
        raster,
        origin: shadow.origin,
        offset,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Layer<'a> {
    pub raster: &'a RgbaImage,
    pub transform: Transform2D,
    pub alpha_mul: f64,
    pub z: i64,
}

/// "Over"-composites the layers onto `background` in ascending `z`.
/// Accumulation is in f64; the result is rounded once per channel.
pub fn composite_frame(background: &RgbImage, layers: &[Layer<'_>]) -> Result<RgbImage> {
    let mut seen = BTreeSet::new();
    for l in layers {
        if !seen.insert(l.z) {
            return Err(Error::invariant(format!("z-order tie at z={}", l.z)));
        }
        if !(0.0..=1.0).contains(&l.alpha_mul) {
            return Err(Error::arg(format!(
                "alpha_mul {} outside [0, 1]",
                l.alpha_mul
            )));
        }
    }
    let mut order: Vec<&Layer> = layers.iter().collect();
    order.sort_by_key(|l| l.z);

    let (w, h) = background.dimensions();
    let mut acc: Vec<[f64; 3]> = background
        .pixels()
        .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
        .collect();
    for layer in order {
        if layer.alpha_mul == 0.0 {
            layer.transform.validate(layer.raster.width(), layer.raster.height())?;
            continue;
        }
        for_each_warped(layer.raster, &layer.transform, w, h, |x, y, px| {
            let a = px[3] as f64 / 255.0 * layer.alpha_mul;
            let dst = &mut acc[y as usize * w as usize + x as usize];
            for c in 0..3 {
                dst[c] = px[c] as f64 * a + dst[c] * (1.0 - a);
            }
        })?;
    }
    Ok(RgbImage::from_fn(w, h, |x, y| {
        let p = acc[y as usize * w as usize + x as usize];
        Rgb([to_u8(p[0]), to_u8(p[1]), to_u8(p[2])])
    }))
}

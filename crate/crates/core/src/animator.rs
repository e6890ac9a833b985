//! Timelines of linear, constant-speed object trajectories with fade
//! schedules, frame rendering, relight blending and the crossfade mode.

use std::path::Path;

use image::{RgbImage, Rgba, RgbaImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositor::{composite_frame, Layer, ShadowLayer, Transform2D};
use crate::error::{Error, Result};
use crate::manifest::{LayoutTarget, SourceMode};
use crate::raster::{self, to_u8};

/// Sub-layer slots within one object's z band.
const Z_GHOST: i64 = 0;
const Z_SHADOW: i64 = 1;
const Z_BOX: i64 = 2;
const Z_CUTOUT: i64 = 3;
const Z_BAND: i64 = 4;

fn lerp(a: f64, b: f64, u: f64) -> f64 {
    a * (1.0 - u) + b * u
}

/// Signed shortest rotation from `a` to `b` in [-180, 180); a half turn
/// goes counter-clockwise.
pub fn shortest_delta_deg(a: f64, b: f64) -> f64 {
    (b - a + 180.0).rem_euclid(360.0) - 180.0
}

/// Interpolates two transforms; `u = 0` and `u = 1` return the endpoints
/// exactly.
pub fn lerp_transform(a: &Transform2D, b: &Transform2D, u: f64) -> Transform2D {
    if u == 0.0 {
        return *a;
    }
    if u == 1.0 {
        return *b;
    }
    let mut p = [[0.0; 2]; 4];
    for ((c, pa), pb) in p.iter_mut().zip(&a.perspective_offsets).zip(&b.perspective_offsets) {
        for ((v, &x), &y) in c.iter_mut().zip(pa).zip(pb) {
            *v = lerp(x, y, u);
        }
    }
    Transform2D {
        scale: lerp(a.scale, b.scale, u),
        rotation_deg: a.rotation_deg + shortest_delta_deg(a.rotation_deg, b.rotation_deg) * u,
        translation_xy: [
            lerp(a.translation_xy[0], b.translation_xy[0], u),
            lerp(a.translation_xy[1], b.translation_xy[1], u),
        ],
        perspective_offsets: p,
    }
}

/// Frame parameters `u_k = k / (K - 1)`.
pub fn frame_params(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

/// Frames whose pixels are supervised downstream.
pub fn supervised_frames(mode: SourceMode, k: usize) -> Vec<usize> {
    match mode {
        SourceMode::SubjectPair => vec![k - 1],
        _ => (0..k).collect(),
    }
}

/// Start state of one object.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub object_id: String,
    /// `None` for a design element, which flies in from off canvas.
    pub transform: Option<Transform2D>,
    /// Size of the cutout raster.
    pub raster_size: (u32, u32),
    /// Drawn inside a fading white box.
    pub boxed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub object_id: String,
    pub transforms: Vec<Transform2D>,
    pub white_box_alpha: Vec<f64>,
    pub relight_t: Vec<f64>,
    /// Shadow opacity multiplier.
    pub shadow_alpha: Vec<f64>,
    pub z_order: i64,
    pub boxed: bool,
    pub fly_in: bool,
}

/// An object fading out in place (replacement victim).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostTrack {
    pub object_id: String,
    pub transform: Transform2D,
    pub alpha: Vec<f64>,
    pub z_order: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub k: usize,
    pub mode: SourceMode,
    pub objects: Vec<ObjectTrack>,
    pub ghosts: Vec<GhostTrack>,
    pub background_fade_alpha: Vec<f64>,
    pub supervised_frames: Vec<usize>,
}

/// Off-canvas start center for an object flying in to `target`: on the ray
/// from the canvas center through the target center, just far enough for
/// the box to clear the canvas, plus a tenth of the canvas diagonal.
pub fn fly_in_center(target: &Transform2D, raster_size: (u32, u32), canvas: (u32, u32)) -> [f64; 2] {
    let (w, h) = (canvas.0 as f64, canvas.1 as f64);
    let c = [w / 2.0, h / 2.0];
    let [hx, hy] = target.half_extents(raster_size.0, raster_size.1);
    let d = [target.translation_xy[0] - c[0], target.translation_xy[1] - c[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let dir = if len > 1e-9 { [d[0] / len, d[1] / len] } else { [1.0, 0.0] };
    // distance along dir at which the box leaves through each side
    let mut t = f64::INFINITY;
    if dir[0] > 0.0 {
        t = t.min((w - c[0] + hx) / dir[0]);
    }
    if dir[0] < 0.0 {
        t = t.min((c[0] + hx) / -dir[0]);
    }
    if dir[1] > 0.0 {
        t = t.min((h - c[1] + hy) / dir[1]);
    }
    if dir[1] < 0.0 {
        t = t.min((c[1] + hy) / -dir[1]);
    }
    let t = t + 0.1 * (w * w + h * h).sqrt();
    [c[0] + t * dir[0], c[1] + t * dir[1]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineOptions {
    pub canvas: (u32, u32),
    /// The initial canvas is plain white and the background fades in.
    pub white_start: bool,
    /// Shadows fade in with the motion instead of staying on.
    pub shadows_fade_in: bool,
}

pub fn plan_timeline(
    initial: &[InitialState],
    target: &LayoutTarget,
    k: usize,
    mode: SourceMode,
    opts: &TimelineOptions,
) -> Result<Timeline> {
    if k < 2 {
        return Err(Error::arg(format!("K must be ≥ 2, got {k}")));
    }
    if initial.len() != target.placements.len() {
        return Err(Error::invariant(format!(
            "{} initial states for {} target placements",
            initial.len(),
            target.placements.len()
        )));
    }
    let us = frame_params(k);
    let mut objects = Vec::with_capacity(initial.len());
    for (i, s) in initial.iter().enumerate() {
        if initial[..i].iter().any(|o| o.object_id == s.object_id) {
            return Err(Error::invariant(format!("object `{}` listed twice", s.object_id)));
        }
        let p = target.get(&s.object_id).ok_or_else(|| {
            Error::invariant(format!("object `{}` has no target placement", s.object_id))
        })?;
        let end = p.transform();
        let (start, fly_in) = match s.transform {
            Some(t) => (t, false),
            None => {
                let mut t = end;
                t.translation_xy = fly_in_center(&end, s.raster_size, opts.canvas);
                (t, true)
            }
        };
        objects.push(ObjectTrack {
            object_id: s.object_id.clone(),
            transforms: us.iter().map(|&u| lerp_transform(&start, &end, u)).collect(),
            white_box_alpha: us.iter().map(|&u| 1.0 - u).collect(),
            relight_t: us.iter().map(|&u| lerp(0.0, p.relight_t, u)).collect(),
            shadow_alpha: us
                .iter()
                .map(|&u| if opts.shadows_fade_in { u } else { 1.0 })
                .collect(),
            z_order: p.z_order,
            boxed: s.boxed && !fly_in,
            fly_in,
        });
    }
    Ok(Timeline {
        k,
        mode,
        objects,
        ghosts: Vec::new(),
        background_fade_alpha: us
            .iter()
            .map(|&u| if opts.white_start { u } else { 1.0 })
            .collect(),
        supervised_frames: supervised_frames(mode, k),
    })
}

impl Timeline {
    /// Adds an object that fades out at `transform` over the video.
    pub fn add_ghost(&mut self, object_id: &str, transform: Transform2D, z_order: i64) {
        self.ghosts.push(GhostTrack {
            object_id: object_id.to_string(),
            transform,
            alpha: frame_params(self.k).iter().map(|&u| 1.0 - u).collect(),
            z_order,
        });
    }
}

/// Blends relit variants at `t`: identity for one variant, piecewise
/// linear along the list for more. Color is blended premultiplied; alpha
/// comes from the first variant.
pub fn relight_blend(variants: &[RgbaImage], t: f64) -> Result<RgbaImage> {
    let first = variants
        .first()
        .ok_or_else(|| Error::arg("relight_blend needs at least one variant"))?;
    if let Some(v) = variants.iter().find(|v| v.dimensions() != first.dimensions()) {
        return Err(Error::invariant(format!(
            "relit variant is {}x{}, cutout is {}x{}",
            v.width(),
            v.height(),
            first.width(),
            first.height()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::arg(format!("relight t={t} outside [0, 1]")));
    }
    let m = variants.len();
    let pos = t * (m - 1) as f64;
    let seg = (pos.floor() as usize).min(m.saturating_sub(2));
    let local = pos - seg as f64;
    if m == 1 || local == 0.0 {
        return Ok(with_alpha_of(&variants[seg], first));
    }
    if local == 1.0 {
        return Ok(with_alpha_of(&variants[seg + 1], first));
    }
    let (a, b) = (&variants[seg], &variants[seg + 1]);
    Ok(RgbaImage::from_fn(first.width(), first.height(), |x, y| {
        let pa = a.get_pixel(x, y);
        let pb = b.get_pixel(x, y);
        let alpha = first.get_pixel(x, y)[3];
        if alpha == 0 {
            return Rgba([0, 0, 0, 0]);
        }
        let wa = pa[3] as f64 / 255.0;
        let wb = pb[3] as f64 / 255.0;
        let out_a = alpha as f64 / 255.0;
        let c = [0, 1, 2].map(|c| {
            let pre = lerp(pa[c] as f64 * wa, pb[c] as f64 * wb, local);
            to_u8((pre / out_a).min(255.0))
        });
        Rgba([c[0], c[1], c[2], alpha])
    }))
}

fn with_alpha_of(v: &RgbaImage, alpha: &RgbaImage) -> RgbaImage {
    let mut out = v.clone();
    for (p, a) in out.pixels_mut().zip(alpha.pixels()) {
        p[3] = a[3];
    }
    out
}

/// Rasters for one object track.
#[derive(Debug, Clone)]
pub struct TrackAssets {
    /// Cutout followed by its relit variants.
    pub variants: Vec<RgbaImage>,
    pub white_box: Option<RgbaImage>,
    pub shadow: Option<ShadowLayer>,
}

#[derive(Debug, Clone)]
pub struct BackgroundStates {
    pub initial: RgbImage,
    pub final_background: RgbImage,
}

/// `(1 - f) * a + f * b` per channel, returning `a` or `b` verbatim at the
/// ends.
pub fn mix_rgb(a: &RgbImage, b: &RgbImage, f: f64) -> Result<RgbImage> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::invariant("background states differ in size"));
    }
    if f == 0.0 {
        return Ok(a.clone());
    }
    if f == 1.0 {
        return Ok(b.clone());
    }
    let mut out = a.clone();
    for (o, p) in out.pixels_mut().zip(b.pixels()) {
        for c in 0..3 {
            o[c] = to_u8(lerp(o[c] as f64, p[c] as f64, f));
        }
    }
    Ok(out)
}

struct FrameLayers {
    owned: Vec<(RgbaImage, Transform2D, f64, i64)>,
}

fn object_layers(
    track: &ObjectTrack,
    assets: &TrackAssets,
    transform: Transform2D,
    relight_t: f64,
    box_alpha: f64,
    shadow_alpha: f64,
) -> Result<Vec<(RgbaImage, Transform2D, f64, i64)>> {
    let base = track.z_order * Z_BAND;
    let cutout = relight_blend(&assets.variants, relight_t)?;
    let size = cutout.dimensions();
    let mut out = Vec::with_capacity(3);
    if let Some(shadow) = &assets.shadow {
        out.push((
            shadow.raster.clone(),
            shadow.transform_for(&transform, size),
            shadow_alpha,
            base + Z_SHADOW,
        ));
    }
    if track.boxed {
        if let Some(b) = &assets.white_box {
            out.push((b.clone(), transform, box_alpha, base + Z_BOX));
        }
    }
    out.push((cutout, transform, 1.0, base + Z_CUTOUT));
    Ok(out)
}

fn composite_owned(bg: &RgbImage, f: &FrameLayers) -> Result<RgbImage> {
    let layers: Vec<Layer<'_>> = f
        .owned
        .iter()
        .map(|(r, t, a, z)| Layer {
            raster: r,
            transform: *t,
            alpha_mul: *a,
            z: *z,
        })
        .collect();
    composite_frame(bg, &layers)
}

/// Renders frame `k` of `timeline`.
pub fn render_frame(
    timeline: &Timeline,
    assets: &[TrackAssets],
    ghosts: &[RgbaImage],
    background: &BackgroundStates,
    k: usize,
) -> Result<RgbImage> {
    let bg = mix_rgb(
        &background.initial,
        &background.final_background,
        timeline.background_fade_alpha[k],
    )?;
    let mut f = FrameLayers { owned: Vec::new() };
    for (track, a) in timeline.objects.iter().zip(assets) {
        f.owned.extend(object_layers(
            track,
            a,
            track.transforms[k],
            track.relight_t[k],
            track.white_box_alpha[k],
            track.shadow_alpha[k],
        )?);
    }
    for (g, r) in timeline.ghosts.iter().zip(ghosts) {
        f.owned
            .push((r.clone(), g.transform, g.alpha[k], g.z_order * Z_BAND + Z_GHOST));
    }
    composite_owned(&bg, &f)
}

/// Renders all K frames; frames are independent and rendered in parallel.
pub fn render_video(
    timeline: &Timeline,
    assets: &[TrackAssets],
    ghosts: &[RgbaImage],
    background: &BackgroundStates,
) -> Result<Vec<RgbImage>> {
    if assets.len() != timeline.objects.len() {
        return Err(Error::invariant(format!(
            "{} asset sets for {} tracks",
            assets.len(),
            timeline.objects.len()
        )));
    }
    if ghosts.len() != timeline.ghosts.len() {
        return Err(Error::invariant("ghost rasters do not match ghost tracks"));
    }
    if background.initial.dimensions() != background.final_background.dimensions() {
        return Err(Error::invariant("background states differ in size"));
    }
    (0..timeline.k)
        .into_par_iter()
        .map(|k| render_frame(timeline, assets, ghosts, background, k))
        .collect()
}

/// The target layout composited directly onto the final background:
/// cutouts relit at their target parameter, shadows fully on.
pub fn target_composite(
    final_background: &RgbImage,
    target: &LayoutTarget,
    assets: &[(&str, &TrackAssets)],
) -> Result<RgbImage> {
    let mut f = FrameLayers { owned: Vec::new() };
    for p in &target.placements {
        let a = assets
            .iter()
            .find(|(id, _)| *id == p.object_id)
            .map(|(_, a)| *a)
            .ok_or_else(|| Error::invariant(format!("no assets for `{}`", p.object_id)))?;
        let track = ObjectTrack {
            object_id: p.object_id.clone(),
            transforms: vec![],
            white_box_alpha: vec![],
            relight_t: vec![],
            shadow_alpha: vec![],
            z_order: p.z_order,
            boxed: false,
            fly_in: false,
        };
        f.owned
            .extend(object_layers(&track, a, p.transform(), p.relight_t, 0.0, 1.0)?);
    }
    composite_owned(final_background, &f)
}

/// Per-pixel crossfade from `first` to `last` over `k` frames.
pub fn crossfade_pair(first: &RgbImage, last: &RgbImage, k: usize) -> Result<(Vec<RgbImage>, Vec<usize>)> {
    if k < 2 {
        return Err(Error::arg(format!("K must be ≥ 2, got {k}")));
    }
    if first.dimensions() != last.dimensions() {
        return Err(Error::invariant(format!(
            "crossfade endpoints differ in size: {:?} vs {:?}",
            first.dimensions(),
            last.dimensions()
        )));
    }
    let frames = frame_params(k)
        .into_iter()
        .map(|u| mix_rgb(first, last, u))
        .collect::<Result<Vec<_>>>()?;
    Ok((frames, supervised_frames(SourceMode::SubjectPair, k)))
}

/// Loads K externally interpolated frames (sorted by file name) in place
/// of a crossfade.
pub fn load_interpolated_frames(dir: &Path, k: usize, size: (u32, u32)) -> Result<Vec<RgbImage>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    if files.len() != k {
        return Err(Error::invariant(format!(
            "{} holds {} frames, expected K={k}",
            dir.display(),
            files.len()
        )));
    }
    files
        .iter()
        .map(|p| {
            let img = raster::load_rgb(p)?;
            if img.dimensions() != size {
                return Err(Error::invariant(format!(
                    "{} is {}x{}, expected {}x{}",
                    p.display(),
                    img.width(),
                    img.height(),
                    size.0,
                    size.1
                )));
            }
            Ok(img)
        })
        .collect()
}

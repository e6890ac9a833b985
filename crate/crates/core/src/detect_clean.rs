//! Cleanup of externally produced grounded detections, object extraction and
//! the dilated inpainting mask.
//!
//! Cleanup runs in a fixed order: same-label merge, cross-label duplicate
//! removal, overlap separation, coverage gate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{RgbImage, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{self, Mask, PixelRect};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub label: String,
    pub confidence: f64,
    pub bbox: PixelRect,
    pub mask: Mask,
}

impl DetectionRecord {
    /// The box is always the tight bounding box of the mask.
    pub fn new(label: impl Into<String>, confidence: f64, mask: Mask) -> Result<Self> {
        let bbox = mask
            .bbox()
            .ok_or_else(|| Error::invariant("detection mask is empty"))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::arg(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(DetectionRecord {
            label: label.into(),
            confidence,
            bbox,
            mask,
        })
    }
}

/// One entry of `detections.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub label: String,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: PixelRect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
}

pub fn read_detection_entries(path: &Path) -> Result<Vec<DetectionEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `detections.json` with its masks (paths relative to the file).
pub fn load_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let base = path.parent().unwrap_or(Path::new("."));
    read_detection_entries(path)?
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let rel = e.mask_path.as_ref().ok_or_else(|| {
                Error::schema(format!("[{i}].mask_path"), "required for cleanup")
            })?;
            let mask = raster::load_mask(&base.join(rel))?;
            let rec = DetectionRecord::new(e.label, e.confidence, mask)?;
            if rec.bbox != e.bbox {
                log::warn!(
                    "detection {i} ({}): box {:?} differs from mask bounds {:?}; using mask bounds",
                    rec.label,
                    e.bbox,
                    rec.bbox
                );
            }
            Ok(rec)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanParams {
    pub min_cov: f64,
    pub max_cov: f64,
    pub dup_iou: f64,
    pub containment_frac: f64,
}

impl Default for CleanParams {
    fn default() -> Self {
        CleanParams {
            min_cov: 0.005,
            max_cov: 0.80,
            dup_iou: 0.85,
            containment_frac: 0.5,
        }
    }
}

impl CleanParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("min_cov", self.min_cov),
            ("max_cov", self.max_cov),
            ("dup_iou", self.dup_iou),
            ("containment_frac", self.containment_frac),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::arg(format!("{name}={v} outside (0, 1)")));
            }
        }
        if self.min_cov > self.max_cov {
            return Err(Error::arg("min_cov exceeds max_cov"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedObject {
    pub label: String,
    pub confidence: f64,
    pub mask: Mask,
    /// Input indices merged into this object.
    pub sources: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedObjectSet {
    pub image_size: (u32, u32),
    pub objects: Vec<CleanedObject>,
    pub rejected: Vec<Rejection>,
}

impl CleanedObjectSet {
    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Cleaned objects as detection records, e.g. to re-run cleanup.
    pub fn to_records(&self) -> Vec<DetectionRecord> {
        self.objects
            .iter()
            .filter_map(|o| DetectionRecord::new(o.label.clone(), o.confidence, o.mask.clone()).ok())
            .collect()
    }
}

fn pct(v: f64) -> String {
    let s = format!("{:.4}", v * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

pub fn clean_detections(
    records: &[DetectionRecord],
    image_size: (u32, u32),
    params: &CleanParams,
) -> Result<CleanedObjectSet> {
    params.validate()?;
    for (i, r) in records.iter().enumerate() {
        if r.mask.dimensions() != image_size {
            return Err(Error::invariant(format!(
                "detection {i} mask is {}x{}, image is {}x{}",
                r.mask.width(),
                r.mask.height(),
                image_size.0,
                image_size.1
            )));
        }
    }
    let mut rejected = Vec::new();

    // (1) same-label merge, grouped by case-insensitive label in first-seen order
    let mut groups: BTreeMap<String, usize> = BTreeMap::new();
    let mut objects: Vec<CleanedObject> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let key = r.label.to_lowercase();
        match groups.get(&key) {
            Some(&g) => {
                let obj = &mut objects[g];
                obj.mask.union_with(&r.mask);
                obj.confidence = obj.confidence.max(r.confidence);
                obj.sources.push(i);
            }
            None => {
                groups.insert(key, objects.len());
                objects.push(CleanedObject {
                    label: r.label.clone(),
                    confidence: r.confidence,
                    mask: r.mask.clone(),
                    sources: vec![i],
                });
            }
        }
    }

    // (2) cross-label dedup: greedy by confidence, ties keep the earlier object
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by(|&a, &b| {
        objects[b]
            .confidence
            .total_cmp(&objects[a].confidence)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = vec![false; objects.len()];
    for &i in &order {
        if let Some(&k) = kept
            .iter()
            .find(|&&k| objects[k].mask.iou(&objects[i].mask) >= params.dup_iou)
        {
            dropped[i] = true;
            rejected.push(Rejection {
                reason: format!("duplicate of `{}`", objects[k].label),
                indices: objects[i].sources.clone(),
            });
        } else {
            kept.push(i);
        }
    }
    let mut objects: Vec<CleanedObject> = objects
        .into_iter()
        .zip(dropped)
        .filter_map(|(o, d)| (!d).then_some(o))
        .collect();

    // (3) overlap separation: smaller masks are visited first; a small mask
    // mostly inside a larger one is cut out of the larger, otherwise the
    // contested pixels stay with the larger mask
    let areas: Vec<usize> = objects.iter().map(|o| o.mask.count()).collect();
    let mut by_area: Vec<usize> = (0..objects.len()).collect();
    by_area.sort_by(|&a, &b| areas[a].cmp(&areas[b]).then(a.cmp(&b)));
    for (pos, &small) in by_area.iter().enumerate() {
        for &large in &by_area[pos + 1..] {
            let inter = objects[small].mask.intersection_count(&objects[large].mask);
            if inter == 0 {
                continue;
            }
            let small_area = objects[small].mask.count();
            if inter as f64 >= params.containment_frac * small_area as f64 {
                let cut = objects[small].mask.clone();
                objects[large].mask.subtract(&cut);
            } else {
                let cut = objects[large].mask.clone();
                objects[small].mask.subtract(&cut);
            }
        }
    }

    // (4) coverage gate, boundaries inclusive
    let total = image_size.0 as f64 * image_size.1 as f64;
    let mut out = Vec::new();
    for o in objects {
        let cov = o.mask.count() as f64 / total;
        if cov < params.min_cov {
            rejected.push(Rejection {
                reason: format!("coverage<{}", pct(params.min_cov)),
                indices: o.sources,
            });
        } else if cov > params.max_cov {
            rejected.push(Rejection {
                reason: format!("coverage>{}", pct(params.max_cov)),
                indices: o.sources,
            });
        } else {
            out.push(o);
        }
    }
    Ok(CleanedObjectSet {
        image_size,
        objects: out,
        rejected,
    })
}

/// Square dilation of `mask` by `radius`, clipped to the mask bounds.
pub fn dilate_square(mask: &Mask, radius: u32) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dimensions();
    let r = radius as i64;
    // separable max filter: rows, then columns, via running counts
    let mut horiz = Mask::new(w, h);
    for y in 0..h {
        let mut prefix = vec![0u32; w as usize + 1];
        for x in 0..w {
            prefix[x as usize + 1] = prefix[x as usize] + mask.get(x, y) as u32;
        }
        for x in 0..w as i64 {
            let lo = (x - r).max(0) as usize;
            let hi = (x + r + 1).min(w as i64) as usize;
            horiz.set(x as u32, y, prefix[hi] > prefix[lo]);
        }
    }
    let mut out = Mask::new(w, h);
    for x in 0..w {
        let mut prefix = vec![0u32; h as usize + 1];
        for y in 0..h {
            prefix[y as usize + 1] = prefix[y as usize] + horiz.get(x, y) as u32;
        }
        for y in 0..h as i64 {
            let lo = (y - r).max(0) as usize;
            let hi = (y + r + 1).min(h as i64) as usize;
            out.set(x, y as u32, prefix[hi] > prefix[lo]);
        }
    }
    out
}

/// Union of all cleaned masks, dilated for the external inpainter.
pub fn inpaint_mask(cleaned: &CleanedObjectSet, dilation_px: u32) -> Result<Mask> {
    let first = cleaned
        .objects
        .first()
        .ok_or_else(|| Error::invariant("inpaint_mask: cleaned object set is empty"))?;
    let mut union = first.mask.clone();
    for o in &cleaned.objects[1..] {
        union.union_with(&o.mask);
    }
    Ok(dilate_square(&union, dilation_px))
}

/// RGBA crop to the mask's bounding box: opaque inside the mask,
/// transparent elsewhere.
pub fn extract_cutout(image: &RgbImage, mask: &Mask) -> Result<RgbaImage> {
    if image.dimensions() != mask.dimensions() {
        return Err(Error::invariant(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width(),
            mask.height(),
            image.width(),
            image.height()
        )));
    }
    let bbox = mask
        .bbox()
        .ok_or_else(|| Error::invariant("extract_cutout: empty mask"))?;
    Ok(RgbaImage::from_fn(bbox.w as u32, bbox.h as u32, |x, y| {
        let sx = x + bbox.x as u32;
        let sy = y + bbox.y as u32;
        if mask.get(sx, sy) {
            let p = image.get_pixel(sx, sy);
            Rgba([p[0], p[1], p[2], 255])
        } else {
            Rgba([0, 0, 0, 0])
        }
    }))
}

//! Evaluation metrics that need no neural network, crop preparation for
//! external encoders, and aggregation of embedding similarities.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::detect_clean::{read_detection_entries, DetectionEntry};
use crate::error::{Error, Result};
use crate::manifest::check_schema;
use crate::raster::{self, Mask, PixelRect};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.35;

/// A detection reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: PixelRect,
}

impl From<&DetectionEntry> for Detection {
    fn from(e: &DetectionEntry) -> Self {
        Detection {
            label: e.label.clone(),
            confidence: e.confidence,
            bbox: e.bbox,
        }
    }
}

/// Result of matching expected labels to detections one-to-one.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Detection index per expected object, `None` when missing.
    pub matched: Vec<Option<usize>>,
}

impl Matching {
    pub fn missing(&self) -> usize {
        self.matched.iter().filter(|m| m.is_none()).count()
    }
}

/// Greedy matching: detections at or above the threshold are visited by
/// descending confidence and each claims the first unmatched expected
/// object with the same label (case-insensitive).
pub fn match_detections(expected: &[String], detections: &[Detection], conf_threshold: f64) -> Matching {
    let mut order: Vec<usize> = (0..detections.len())
        .filter(|&i| detections[i].confidence >= conf_threshold)
        .collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .confidence
            .total_cmp(&detections[a].confidence)
            .then(a.cmp(&b))
    });
    let mut matched = vec![None; expected.len()];
    for d in order {
        let label = detections[d].label.to_lowercase();
        if let Some(slot) = expected
            .iter()
            .enumerate()
            .position(|(i, e)| matched[i].is_none() && e.to_lowercase() == label)
        {
            matched[slot] = Some(d);
        }
    }
    Matching { matched }
}

pub fn missing_rate(expected: &[String], detections: &[Detection], conf_threshold: f64) -> Result<f64> {
    if expected.is_empty() {
        return Err(Error::arg("missing_rate: no expected objects"));
    }
    let m = match_detections(expected, detections, conf_threshold);
    Ok(m.missing() as f64 / expected.len() as f64)
}

pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!("vector lengths differ: {} vs {}", a.len(), b.len())));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::arg("cosine of a zero vector"));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean cosine over (crop, reference) pairs.
pub fn identity_scores(pairs: &[(&[f32], &[f32])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::arg("identity_scores: no pairs"));
    }
    let mut sum = 0.0;
    for (a, b) in pairs {
        sum += cosine(a, b)?;
    }
    Ok(sum / pairs.len() as f64)
}

fn check_mask(mask: &Mask, size: (u32, u32)) -> Result<()> {
    if mask.dimensions() != size {
        return Err(Error::invariant(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width(),
            mask.height(),
            size.0,
            size.1
        )));
    }
    if mask.is_empty() {
        return Err(Error::arg("background mask is empty"));
    }
    Ok(())
}

/// Unit-range RGB raster for metrics on unquantized values.
pub type UnitRgbImage = ImageBuffer<Rgb<f64>, Vec<f64>>;

/// Mean squared error over masked pixels and channels, channels in [0, 1].
pub fn mse_bg(generated: &RgbImage, reference: &RgbImage, bg_mask: &Mask) -> Result<f64> {
    mse_bg_unit(&to_unit(generated), &to_unit(reference), bg_mask)
}

pub fn to_unit(img: &RgbImage) -> UnitRgbImage {
    ImageBuffer::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        Rgb([p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
    })
}

/// [`mse_bg`] on rasters already in [0, 1].
pub fn mse_bg_unit(generated: &UnitRgbImage, reference: &UnitRgbImage, bg_mask: &Mask) -> Result<f64> {
    if generated.dimensions() != reference.dimensions() {
        return Err(Error::invariant("generated and reference images differ in size"));
    }
    check_mask(bg_mask, generated.dimensions())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((g, r), &m) in generated.pixels().zip(reference.pixels()).zip(bg_mask.bits()) {
        if !m {
            continue;
        }
        for c in 0..3 {
            let d = g[c] - r[c];
            sum += d * d;
        }
        n += 3;
    }
    Ok(sum / n as f64)
}

/// Mean over masked pixels of the RGB distance (0-255 scale) to the
/// nearest target color.
pub fn chamfer_color(generated: &RgbImage, bg_mask: &Mask, target_colors: &[[u8; 3]]) -> Result<f64> {
    if target_colors.is_empty() {
        return Err(Error::arg("chamfer_color: no target colors"));
    }
    check_mask(bg_mask, generated.dimensions())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, &m) in generated.pixels().zip(bg_mask.bits()) {
        if !m {
            continue;
        }
        let best = target_colors
            .iter()
            .map(|t| {
                (0..3)
                    .map(|c| (p[c] as f64 - t[c] as f64).powi(2))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        sum += best.sqrt();
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Crop to a detection box clamped to the image.
pub fn crop_box(image: &RgbImage, bbox: PixelRect) -> Result<RgbImage> {
    let full = PixelRect::new(0, 0, image.width() as i64, image.height() as i64);
    let r = bbox.intersect(&full);
    if r.is_empty() {
        return Err(Error::Degenerate(format!("crop box {:?} has no area inside the image", <[i64; 4]>::from(bbox))));
    }
    Ok(image::imageops::crop_imm(image, r.x as u32, r.y as u32, r.w as u32, r.h as u32).to_image())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropPair {
    pub case_id: String,
    pub object_index: usize,
    pub label: String,
    pub crop_path: PathBuf,
    pub ref_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkOrder {
    pub pairs: Vec<CropPair>,
    /// Generated image per case, for text-image scoring.
    pub images: Vec<CaseImage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseImage {
    pub case_id: String,
    pub image_path: PathBuf,
    pub caption: String,
}

// ---- evaluation set ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedObject {
    pub label: String,
    pub ref_image: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalBackground {
    PlainColor { colors: Vec<[u8; 3]> },
    Photo { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub case_id: String,
    pub expected_objects: Vec<ExpectedObject>,
    pub caption: String,
    pub background: EvalBackground,
    pub generated_image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg_mask: Option<PathBuf>,
    /// `detections.json` for the generated image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
}

/// Embedding files for the encoder-based scores; each is a flat f32 file
/// with a `.json` sidecar.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddingFiles {
    pub clip_crop: Option<PathBuf>,
    pub clip_ref: Option<PathBuf>,
    pub dino_crop: Option<PathBuf>,
    pub dino_ref: Option<PathBuf>,
    pub clip_image: Option<PathBuf>,
    pub clip_text: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSet {
    pub schema: String,
    #[serde(default = "default_conf")]
    pub conf_threshold: f64,
    /// Work order written by `prepare`; rows of the crop embeddings follow
    /// its pair order, image/text rows follow its image order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_order: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: EmbeddingFiles,
    pub cases: Vec<EvalCase>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_conf() -> f64 {
    DEFAULT_CONF_THRESHOLD
}

impl EvalSet {
    fn validate(&self) -> Result<()> {
        check_schema(&self.schema)?;
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::schema("conf_threshold", "must lie in [0, 1]"));
        }
        for (i, c) in self.cases.iter().enumerate() {
            if c.expected_objects.is_empty() {
                return Err(Error::schema(format!("cases[{i}].expected_objects"), "must be nonempty"));
            }
            if let EvalBackground::PlainColor { colors } = &c.background {
                if colors.is_empty() || colors.len() > 4 {
                    return Err(Error::schema(
                        format!("cases[{i}].background.colors"),
                        "needs 1 to 4 colors",
                    ));
                }
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}

pub fn load_eval_set(path: &Path) -> Result<EvalSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut set: EvalSet = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    set.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    set.validate()?;
    Ok(set)
}

fn load_case_detections(set: &EvalSet, case: &EvalCase) -> Result<Vec<Detection>> {
    match &case.detections {
        Some(p) => Ok(read_detection_entries(&set.resolve(p))?
            .iter()
            .map(Detection::from)
            .collect()),
        None => Ok(Vec::new()),
    }
}

/// Crops found objects of every case into a `crops` directory next to
/// `work_order_path` and writes the work order there. Crop paths are
/// relative to the work order's directory.
pub fn prepare_crops(set: &EvalSet, work_order_path: &Path) -> Result<WorkOrder> {
    let out_dir = work_order_path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    let mut images = Vec::new();
    for case in &set.cases {
        let img_path = set.resolve(&case.generated_image);
        images.push(CaseImage {
            case_id: case.case_id.clone(),
            image_path: std::path::absolute(&img_path).unwrap_or(img_path.clone()),
            caption: case.caption.clone(),
        });
        let dets = load_case_detections(set, case)?;
        let labels: Vec<String> = case.expected_objects.iter().map(|o| o.label.clone()).collect();
        let m = match_detections(&labels, &dets, set.conf_threshold);
        if m.matched.iter().all(Option::is_none) {
            continue;
        }
        let img = raster::load_rgb(&img_path)?;
        for (i, d) in m.matched.iter().enumerate() {
            let Some(d) = d else { continue };
            let crop = crop_box(&img, dets[*d].bbox)?;
            let rel = PathBuf::from("crops").join(format!("{}_{i:02}.png", case.case_id));
            raster::save_rgb(&crop, &out_dir.join(&rel))?;
            let r = set.resolve(&case.expected_objects[i].ref_image);
            pairs.push(CropPair {
                case_id: case.case_id.clone(),
                object_index: i,
                label: case.expected_objects[i].label.clone(),
                crop_path: rel,
                ref_path: std::path::absolute(&r).unwrap_or(r),
            });
        }
    }
    let order = WorkOrder { pairs, images };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    std::fs::write(work_order_path, crate::manifest::to_pretty_json(&order))
        .map_err(|e| Error::io(work_order_path, e))?;
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub dim: usize,
    pub count: usize,
    pub source_tag: String,
}

/// Rows of a flat little-endian f32 embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub meta: EmbeddingSidecar,
    pub data: Vec<f32>,
}

impl Embeddings {
    pub fn row(&self, i: usize) -> Option<&[f32]> {
        (i < self.meta.count).then(|| &self.data[i * self.meta.dim..(i + 1) * self.meta.dim])
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_embeddings(path: &Path) -> Result<Embeddings> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: EmbeddingSidecar = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: side.clone(),
        source,
    })?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != meta.dim * meta.count * 4 {
        return Err(Error::invariant(format!(
            "{}: {} bytes, sidecar says {} x {} floats",
            path.display(),
            bytes.len(),
            meta.count,
            meta.dim
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Embeddings { meta, data })
}

pub fn write_embeddings(path: &Path, rows: &[Vec<f32>], source_tag: &str) -> Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::arg("embedding rows differ in length"));
    }
    let mut bytes = Vec::with_capacity(rows.len() * dim * 4);
    for v in rows.iter().flatten() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let meta = EmbeddingSidecar {
        dim,
        count: rows.len(),
        source_tag: source_tag.to_string(),
    };
    let side = sidecar_path(path);
    std::fs::write(&side, crate::manifest::to_pretty_json(&meta)).map_err(|e| Error::io(&side, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case_id: String,
    pub expected: usize,
    pub missing: usize,
    pub clip_i: Option<f64>,
    pub dino: Option<f64>,
    pub clip_t: Option<f64>,
    pub mse_bg: Option<f64>,
    pub chamfer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SkipCounts {
    pub clip_i: usize,
    pub dino: usize,
    pub clip_t: usize,
    pub mse_bg: usize,
    pub chamfer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub cases: usize,
    /// Micro-average over expected objects.
    pub missing: f64,
    pub clip_i: Option<f64>,
    pub dino: Option<f64>,
    pub clip_t: Option<f64>,
    pub mse_bg: Option<f64>,
    pub chamfer: Option<f64>,
    pub skipped: SkipCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<CaseRow>,
    pub aggregate: Aggregate,
}

fn mean_of(vals: impl Iterator<Item = Option<f64>>, skipped: &mut usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in vals {
        match v {
            Some(v) => {
                sum += v;
                n += 1;
            }
            None => *skipped += 1,
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Missing is micro-averaged over objects; the other columns are averaged
/// over the cases where they are defined.
pub fn aggregate(rows: &[CaseRow]) -> Result<Aggregate> {
    if rows.is_empty() {
        return Err(Error::arg("aggregate: no rows"));
    }
    // a fixed order keeps float sums independent of input order
    let mut sorted: Vec<&CaseRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let expected: usize = sorted.iter().map(|r| r.expected).sum();
    let missing: usize = sorted.iter().map(|r| r.missing).sum();
    if expected == 0 {
        return Err(Error::arg("aggregate: rows expect no objects"));
    }
    let mut s = SkipCounts::default();
    Ok(Aggregate {
        cases: rows.len(),
        missing: missing as f64 / expected as f64,
        clip_i: mean_of(sorted.iter().map(|r| r.clip_i), &mut s.clip_i),
        dino: mean_of(sorted.iter().map(|r| r.dino), &mut s.dino),
        clip_t: mean_of(sorted.iter().map(|r| r.clip_t), &mut s.clip_t),
        mse_bg: mean_of(sorted.iter().map(|r| r.mse_bg), &mut s.mse_bg),
        chamfer: mean_of(sorted.iter().map(|r| r.chamfer), &mut s.chamfer),
        skipped: s,
    })
}

fn load_opt(set: &EvalSet, p: &Option<PathBuf>) -> Result<Option<Embeddings>> {
    p.as_ref().map(|p| read_embeddings(&set.resolve(p))).transpose()
}

fn pair_scores(
    order: &WorkOrder,
    crop: &Option<Embeddings>,
    reference: &Option<Embeddings>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let (Some(c), Some(r)) = (crop, reference) else {
        return Ok(out);
    };
    if c.meta.count != order.pairs.len() || r.meta.count != order.pairs.len() {
        return Err(Error::invariant(format!(
            "embedding counts ({}, {}) do not match {} work-order pairs",
            c.meta.count,
            r.meta.count,
            order.pairs.len()
        )));
    }
    for (i, p) in order.pairs.iter().enumerate() {
        let s = cosine(c.row(i).unwrap(), r.row(i).unwrap())?;
        out.entry(p.case_id.clone()).or_default().push(s);
    }
    Ok(out)
}

/// Scores every case of `set`.
pub fn score_eval_set(set: &EvalSet) -> Result<MetricReport> {
    let order: Option<WorkOrder> = match &set.work_order {
        Some(p) => {
            let p = set.resolve(p);
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            Some(serde_json::from_str(&text).map_err(|source| Error::Json { path: p, source })?)
        }
        None => None,
    };
    let e = &set.embeddings;
    let mut clip_i = BTreeMap::new();
    let mut dino = BTreeMap::new();
    let mut clip_t = BTreeMap::new();
    if let Some(order) = &order {
        clip_i = pair_scores(order, &load_opt(set, &e.clip_crop)?, &load_opt(set, &e.clip_ref)?)?;
        dino = pair_scores(order, &load_opt(set, &e.dino_crop)?, &load_opt(set, &e.dino_ref)?)?;
        if let (Some(img), Some(txt)) = (load_opt(set, &e.clip_image)?, load_opt(set, &e.clip_text)?) {
            if img.meta.count != order.images.len() || txt.meta.count != order.images.len() {
                return Err(Error::invariant("image/text embedding counts do not match the work order"));
            }
            for (i, c) in order.images.iter().enumerate() {
                clip_t.insert(c.case_id.clone(), cosine(img.row(i).unwrap(), txt.row(i).unwrap())?);
            }
        }
    }
    let mean = |v: Option<&Vec<f64>>| v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64);

    let mut rows = Vec::with_capacity(set.cases.len());
    for case in &set.cases {
        let dets = load_case_detections(set, case)?;
        let labels: Vec<String> = case.expected_objects.iter().map(|o| o.label.clone()).collect();
        let m = match_detections(&labels, &dets, set.conf_threshold);
        let mut row = CaseRow {
            case_id: case.case_id.clone(),
            expected: labels.len(),
            missing: m.missing(),
            clip_i: mean(clip_i.get(&case.case_id)),
            dino: mean(dino.get(&case.case_id)),
            clip_t: clip_t.get(&case.case_id).copied(),
            mse_bg: None,
            chamfer: None,
        };
        if let Some(mask_path) = &case.bg_mask {
            let generated = raster::load_rgb(&set.resolve(&case.generated_image))?;
            let mask = raster::load_mask(&set.resolve(mask_path))?;
            match &case.background {
                EvalBackground::Photo { path } => {
                    let reference = raster::load_rgb(&set.resolve(path))?;
                    row.mse_bg = Some(mse_bg(&generated, &reference, &mask)?);
                }
                EvalBackground::PlainColor { colors } => {
                    row.chamfer = Some(chamfer_color(&generated, &mask, colors)?);
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::arg("evaluation set has no cases"));
    }
    let mut aggregate = aggregate(&rows)?;
    // background metrics only apply to cases of the matching kind
    let photo = set
        .cases
        .iter()
        .filter(|c| matches!(c.background, EvalBackground::Photo { .. }))
        .count();
    aggregate.skipped.mse_bg -= set.cases.len() - photo;
    aggregate.skipped.chamfer -= photo;
    Ok(MetricReport { rows, aggregate })
}

fn cell(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |v| format!("{v:.4}"))
}

/// Aligned plain-text table of a report.
pub fn format_table(r: &MetricReport) -> String {
    let header = ["case", "missing", "clip_i", "dino", "clip_t", "mse_bg", "chamfer"];
    let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for row in &r.rows {
        lines.push(vec![
            row.case_id.clone(),
            format!("{}/{}", row.missing, row.expected),
            cell(row.clip_i),
            cell(row.dino),
            cell(row.clip_t),
            cell(row.mse_bg),
            cell(row.chamfer),
        ]);
    }
    let a = &r.aggregate;
    lines.push(vec![
        format!("ALL ({})", a.cases),
        format!("{:.4}", a.missing),
        cell(a.clip_i),
        cell(a.dino),
        cell(a.clip_t),
        cell(a.mse_bg),
        cell(a.chamfer),
    ]);
    let widths: Vec<usize> = (0..header.len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    let s = &a.skipped;
    let _ = writeln!(
        out,
        "skipped: clip_i={} dino={} clip_t={} mse_bg={} chamfer={}",
        s.clip_i, s.dino, s.clip_t, s.mse_bg, s.chamfer
    );
    out
}

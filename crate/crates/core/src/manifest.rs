//! Interchange formats: sample specs, asset registries, and the on-disk
//! layout of generated samples.
//!
//! Every manifest is JSON and carries a `schema` string of the form
//! `placid-forge/<major>[.<minor>]`; unknown majors are rejected. Paths
//! inside a manifest are relative to the manifest's own directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Component, Path, PathBuf};

use image::{RgbImage, RgbaImage};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentationPlan;
use crate::compositor::Transform2D;
use crate::error::{Error, Result};
use crate::raster;

pub const SCHEMA: &str = "placid-forge/1";
pub const SCHEMA_PREFIX: &str = "placid-forge/";
pub const SCHEMA_MAJOR: u32 = 1;

/// Frame count used when a spec omits `K`.
pub const DEFAULT_K: usize = 9;

/// Smallest item edge (px) assumed when bounding how many objects a canvas
/// can hold.
pub const MIN_ITEM_PX: u32 = 8;

pub const FRAMES_DIR: &str = "frames";
pub const CONDITIONING_DIR: &str = "conditioning";
pub const CAPTION_FILE: &str = "caption.txt";
pub const PROVENANCE_FILE: &str = "provenance.json";

pub fn frame_file_name(k: usize) -> String {
    format!("frame_{k:04}.png")
}

pub fn object_file_name(i: usize) -> String {
    format!("obj_{i:02}.png")
}

fn default_schema() -> String {
    SCHEMA.to_string()
}

pub fn check_schema(schema: &str) -> Result<()> {
    let rest = schema
        .strip_prefix(SCHEMA_PREFIX)
        .ok_or_else(|| Error::schema("schema", format!("unrecognized schema `{schema}`")))?;
    let major = rest.split('.').next().unwrap_or_default();
    match major.parse::<u32>() {
        Ok(SCHEMA_MAJOR) => Ok(()),
        Ok(m) => Err(Error::schema(
            "schema",
            format!("unsupported major version {m} (this build reads {SCHEMA_MAJOR})"),
        )),
        Err(_) => Err(Error::schema("schema", format!("malformed version in `{schema}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    InTheWild,
    ManualDesign,
    SubjectPair,
    SideBySide,
}

impl SourceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceMode::InTheWild => "in_the_wild",
            SourceMode::ManualDesign => "manual_design",
            SourceMode::SubjectPair => "subject_pair",
            SourceMode::SideBySide => "side_by_side",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealDims {
    pub width_m: f64,
    pub height_m: f64,
    pub depth_m: f64,
}

impl RealDims {
    pub fn diagonal_m(&self) -> f64 {
        (self.width_m.powi(2) + self.height_m.powi(2) + self.depth_m.powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAsset {
    pub id: String,
    pub label: String,
    /// Free text placed inside `<OBJ>` blocks.
    pub description: String,
    pub cutout: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_dims: Option<RealDims>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relit_variants: Vec<PathBuf>,
}

impl ObjectAsset {
    fn validate(&self, field: &str) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::schema(format!("{field}.id"), "must be nonempty"));
        }
        check_relative(&format!("{field}.cutout"), &self.cutout)?;
        for (i, p) in self.relit_variants.iter().enumerate() {
            check_relative(&format!("{field}.relit_variants[{i}]"), p)?;
        }
        if let Some(d) = &self.real_dims {
            for (name, v) in [("width_m", d.width_m), ("height_m", d.height_m), ("depth_m", d.depth_m)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::schema(
                        format!("{field}.real_dims.{name}"),
                        format!("must be strictly positive, got {v}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Loads the cutout followed by its relit variants, checking the cutout
    /// has visible alpha and all variants share its dimensions.
    pub fn load_variants(&self, base_dir: &Path) -> Result<Vec<RgbaImage>> {
        let cutout = raster::load_rgba(&base_dir.join(&self.cutout))?;
        if !raster::has_visible_alpha(&cutout) {
            return Err(Error::invariant(format!(
                "object `{}`: cutout has an empty alpha channel",
                self.id
            )));
        }
        let mut out = vec![cutout];
        for p in &self.relit_variants {
            let v = raster::load_rgba(&base_dir.join(p))?;
            if v.dimensions() != out[0].dimensions() {
                return Err(Error::invariant(format!(
                    "object `{}`: relit variant {} is {}x{}, cutout is {}x{}",
                    self.id,
                    p.display(),
                    v.width(),
                    v.height(),
                    out[0].width(),
                    out[0].height()
                )));
            }
            out.push(v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    Photo,
    PlainColor,
    Procedural,
    InpaintedOriginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub kind: BackgroundKind,
    /// Photo file for `photo` (absent: draw from the photo pool) or the
    /// restored background for `inpainted_original`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[u8; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedural_seed: Option<u64>,
    /// Text for the `<BG>` block.
    #[serde(default)]
    pub description: String,
}

impl BackgroundSpec {
    pub fn plain(color: [u8; 3], description: impl Into<String>) -> Self {
        BackgroundSpec {
            kind: BackgroundKind::PlainColor,
            photo_path: None,
            color: Some(color),
            procedural_seed: None,
            description: description.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let has_path = self.photo_path.is_some();
        let has_color = self.color.is_some();
        let has_seed = self.procedural_seed.is_some();
        let (path_ok, color_ok, seed_ok) = match self.kind {
            BackgroundKind::Photo => (true, !has_color, !has_seed),
            BackgroundKind::PlainColor => (!has_path, has_color, !has_seed),
            BackgroundKind::Procedural => (!has_path, !has_color, true),
            BackgroundKind::InpaintedOriginal => (has_path, !has_color, !has_seed),
        };
        let kind = serde_json::to_value(self.kind).unwrap_or_default();
        let kind = kind.as_str().unwrap_or("?");
        if !path_ok {
            return Err(Error::schema(
                "background.photo_path",
                format!("{} for kind `{kind}`", if has_path { "not allowed" } else { "required" }),
            ));
        }
        if !color_ok {
            return Err(Error::schema(
                "background.color",
                format!("{} for kind `{kind}`", if has_color { "not allowed" } else { "required" }),
            ));
        }
        if !seed_ok {
            return Err(Error::schema(
                "background.procedural_seed",
                format!("not allowed for kind `{kind}`"),
            ));
        }
        if let Some(p) = &self.photo_path {
            check_relative("background.photo_path", p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub object_id: String,
    pub center_xy: [f64; 2],
    pub scale: f64,
    #[serde(default)]
    pub rotation_deg: f64,
    /// Corner offsets (px): top-left, top-right, bottom-right, bottom-left.
    #[serde(default)]
    pub perspective: [[f64; 2]; 4],
    pub z_order: i64,
    #[serde(default)]
    pub relight_t: f64,
}

impl Placement {
    pub fn transform(&self) -> Transform2D {
        Transform2D {
            scale: self.scale,
            rotation_deg: self.rotation_deg,
            translation_xy: self.center_xy,
            perspective_offsets: self.perspective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutTarget {
    pub placements: Vec<Placement>,
}

impl LayoutTarget {
    pub fn get(&self, object_id: &str) -> Option<&Placement> {
        self.placements.iter().find(|p| p.object_id == object_id)
    }

    pub fn validate(&self, declared: &BTreeSet<&str>) -> Result<()> {
        let mut ids = BTreeSet::new();
        let mut zs = BTreeSet::new();
        for (i, p) in self.placements.iter().enumerate() {
            let field = format!("target.placements[{i}]");
            if !ids.insert(p.object_id.as_str()) {
                return Err(Error::schema(
                    format!("{field}.object_id"),
                    format!("duplicate placement for `{}`", p.object_id),
                ));
            }
            if !declared.contains(p.object_id.as_str()) {
                return Err(Error::invariant(format!(
                    "{field}: dangling reference to undeclared object `{}`",
                    p.object_id
                )));
            }
            if !(p.scale > 0.0 && p.scale.is_finite()) {
                return Err(Error::schema(
                    format!("{field}.scale"),
                    format!("must be > 0, got {}", p.scale),
                ));
            }
            if !(0.0..=1.0).contains(&p.relight_t) {
                return Err(Error::schema(
                    format!("{field}.relight_t"),
                    format!("must lie in [0, 1], got {}", p.relight_t),
                ));
            }
            if !zs.insert(p.z_order) {
                return Err(Error::invariant(format!(
                    "{field}: z_order {} ties with another placement",
                    p.z_order
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub w: u32,
    pub h: u32,
}

impl Canvas {
    pub fn size(&self) -> (u32, u32) {
        (self.w, self.h)
    }

    /// Upper bound on how many objects the canvas can hold.
    pub fn max_objects(&self) -> usize {
        ((self.w / MIN_ITEM_PX) as usize * (self.h / MIN_ITEM_PX) as usize).max(1)
    }
}

/// One training sample's full recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub sample_id: String,
    pub source_mode: SourceMode,
    pub objects: Vec<ObjectAsset>,
    pub background: BackgroundSpec,
    #[serde(default)]
    pub target: LayoutTarget,
    pub caption_template_id: String,
    /// Frame count; [`DEFAULT_K`] or the generation config default when absent.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub canvas: Canvas,
    pub seed: u64,
    /// Start from a plain white canvas and fade the background in.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub white_start: bool,
    /// In-context final frame for `subject_pair` samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_image: Option<PathBuf>,
    /// Directory of externally interpolated frames replacing the crossfade.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation_dir: Option<PathBuf>,
    /// Directory the sample spec's relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn check_relative(field: &str, p: &Path) -> Result<()> {
    if p.as_os_str().is_empty() {
        return Err(Error::schema(field, "empty path"));
    }
    if p.is_absolute() || p.components().any(|c| matches!(c, Component::Prefix(_) | Component::RootDir)) {
        return Err(Error::schema(
            field,
            format!("absolute path `{}` not allowed; use a path relative to the manifest", p.display()),
        ));
    }
    Ok(())
}

fn check_sample_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::schema(
            "sample_id",
            format!("`{id}` must be nonempty and use only [A-Za-z0-9_.-]"),
        ))
    }
}

impl SampleSpec {
    pub fn frames(&self, default_k: usize) -> usize {
        self.k.unwrap_or(default_k)
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectAsset> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Checks every structural invariant that does not require reading
    /// referenced files.
    pub fn validate(&self) -> Result<()> {
        check_schema(&self.schema)?;
        check_sample_id(&self.sample_id)?;
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::schema("K", format!("K must be ≥ 2, got {k}")));
            }
        }
        if self.canvas.w == 0 || self.canvas.h == 0 {
            return Err(Error::schema("canvas", "width and height must be positive"));
        }
        let n = self.objects.len();
        match self.source_mode {
            SourceMode::SubjectPair if n != 1 => {
                return Err(Error::invariant(format!(
                    "subject_pair requires exactly 1 object, got {n}"
                )))
            }
            SourceMode::SideBySide if n != 2 => {
                return Err(Error::invariant(format!(
                    "side_by_side requires exactly 2 objects, got {n}"
                )))
            }
            _ if n == 0 => return Err(Error::invariant("a sample needs at least 1 object")),
            _ => {}
        }
        if n > self.canvas.max_objects() {
            return Err(Error::invariant(format!(
                "{n} objects cannot fit a {}x{} canvas",
                self.canvas.w, self.canvas.h
            )));
        }
        let mut ids = BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            o.validate(&format!("objects[{i}]"))?;
            if !ids.insert(o.id.as_str()) {
                return Err(Error::schema(
                    format!("objects[{i}].id"),
                    format!("duplicate object id `{}`", o.id),
                ));
            }
        }
        self.background.validate()?;
        self.target.validate(&ids)?;
        if self.source_mode == SourceMode::SubjectPair {
            let p = self.target_image.as_ref().ok_or_else(|| {
                Error::schema("target_image", "required for subject_pair")
            })?;
            check_relative("target_image", p)?;
        } else {
            if let Some(missing) = self.objects.iter().find(|o| self.target.get(&o.id).is_none()) {
                return Err(Error::schema(
                    "target.placements",
                    format!("object `{}` has no target placement", missing.id),
                ));
            }
            if self.target_image.is_some() {
                return Err(Error::schema("target_image", "only allowed for subject_pair"));
            }
        }
        if let Some(p) = &self.interpolation_dir {
            if self.source_mode != SourceMode::SubjectPair {
                return Err(Error::schema("interpolation_dir", "only allowed for subject_pair"));
            }
            check_relative("interpolation_dir", p)?;
        }
        Ok(())
    }

    /// Checks referenced files: existence, nonempty cutout alpha, matching
    /// relit-variant dimensions.
    pub fn verify_assets(&self) -> Result<()> {
        for o in &self.objects {
            let cutout = self.resolve(&o.cutout);
            if !cutout.is_file() {
                return Err(Error::invariant(format!(
                    "dangling asset reference: object `{}` cutout {} does not exist",
                    o.id,
                    cutout.display()
                )));
            }
            o.load_variants(&self.base_dir)?;
        }
        let mut files: Vec<(&str, &PathBuf)> = Vec::new();
        if let Some(p) = &self.background.photo_path {
            files.push(("background.photo_path", p));
        }
        if let Some(p) = &self.target_image {
            files.push(("target_image", p));
        }
        for (field, p) in files {
            if !self.resolve(p).is_file() {
                return Err(Error::invariant(format!(
                    "dangling asset reference: {field} {} does not exist",
                    self.resolve(p).display()
                )));
            }
        }
        if let Some(p) = &self.interpolation_dir {
            if !self.resolve(p).is_dir() {
                return Err(Error::invariant(format!(
                    "dangling asset reference: interpolation_dir {} does not exist",
                    self.resolve(p).display()
                )));
            }
        }
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, path)
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(schema) = value.get("schema") {
        let s = schema
            .as_str()
            .ok_or_else(|| Error::schema("schema", "must be a string"))?;
        check_schema(s)?;
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        Error::schema(
            if field == "." { "<root>".to_string() } else { field },
            e.into_inner().to_string(),
        )
    })
}

fn base_dir_of(path: &Path) -> PathBuf {
    path.parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Reads, validates and resolves a `sample.spec.json`.
pub fn load_sample_spec(path: &Path) -> Result<SampleSpec> {
    let mut spec: SampleSpec = read_json(path)?;
    spec.base_dir = base_dir_of(path);
    spec.validate()?;
    spec.verify_assets()?;
    Ok(spec)
}

/// Parses and validates a spec from text without touching referenced files.
pub fn parse_sample_spec(text: &str, base_dir: &Path) -> Result<SampleSpec> {
    let mut spec: SampleSpec = parse_json(text, &base_dir.join("<inline>"))?;
    spec.base_dir = base_dir.to_path_buf();
    spec.validate()?;
    Ok(spec)
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("manifest types always serialize");
    s.push('\n');
    s
}

pub fn save_sample_spec(spec: &SampleSpec, path: &Path) -> Result<()> {
    write_text(path, &to_pretty_json(spec))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A registry of reusable assets (e.g. substitute objects for replacement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRegistry {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub objects: Vec<ObjectAsset>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl AssetRegistry {
    pub fn empty() -> Self {
        AssetRegistry {
            schema: default_schema(),
            objects: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn get(&self, id: &str) -> Option<&ObjectAsset> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.objects.iter().map(|o| o.id.as_str()).collect()
    }
}

pub fn load_registry(path: &Path) -> Result<AssetRegistry> {
    let mut reg: AssetRegistry = read_json(path)?;
    reg.base_dir = base_dir_of(path);
    let mut ids = BTreeSet::new();
    for (i, o) in reg.objects.iter().enumerate() {
        o.validate(&format!("objects[{i}]"))?;
        if !ids.insert(o.id.as_str()) {
            return Err(Error::schema(
                format!("objects[{i}].id"),
                format!("duplicate object id `{}`", o.id),
            ));
        }
    }
    Ok(reg)
}

/// Paths of the conditioning images, relative to the sample directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditioning {
    pub first_frame_path: String,
    pub object_image_paths: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_path: Option<String>,
}

/// Everything needed to regenerate a sample bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: SampleSpec,
    pub resolved_seed: u64,
    pub augmentation_plan: AugmentationPlan,
}

/// On-disk record of a generated sample (`provenance.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutput {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub sample_id: String,
    pub frames_dir: String,
    pub frame_count: usize,
    pub conditioning: Conditioning,
    pub caption: String,
    pub supervised_frames: Vec<usize>,
    pub provenance: Provenance,
}

/// A generated sample held in memory, ready to be written.
#[derive(Debug, Clone)]
pub struct RenderedSample {
    pub frames: Vec<RgbImage>,
    pub object_images: Vec<RgbImage>,
    pub background: Option<RgbImage>,
    pub caption: String,
    pub supervised_frames: Vec<usize>,
    pub provenance: Provenance,
}

impl RenderedSample {
    pub fn sample_id(&self) -> &str {
        &self.provenance.spec.sample_id
    }

    pub fn record(&self) -> SampleOutput {
        SampleOutput {
            schema: default_schema(),
            sample_id: self.sample_id().to_string(),
            frames_dir: FRAMES_DIR.to_string(),
            frame_count: self.frames.len(),
            conditioning: Conditioning {
                first_frame_path: format!("{CONDITIONING_DIR}/first_frame.png"),
                object_image_paths: (0..self.object_images.len())
                    .map(|i| format!("{CONDITIONING_DIR}/{}", object_file_name(i)))
                    .collect(),
                background_path: self
                    .background
                    .as_ref()
                    .map(|_| format!("{CONDITIONING_DIR}/background.png")),
            },
            caption: self.caption.clone(),
            supervised_frames: self.supervised_frames.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

fn dir_is_nonempty(dir: &Path) -> Result<bool> {
    match std::fs::read_dir(dir) {
        Ok(mut it) => Ok(it.next().is_some()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(Error::io(dir, e)),
    }
}

/// Writes `<root>/<sample_id>/...` and returns the sample directory. The
/// tree is staged in a sibling temp directory and renamed into place.
pub fn write_sample(sample: &RenderedSample, root: &Path, overwrite: bool) -> Result<PathBuf> {
    let id = sample.sample_id();
    check_sample_id(id)?;
    let dir = root.join(id);
    if dir_is_nonempty(&dir)? && !overwrite {
        return Err(Error::invariant(format!(
            "output directory {} exists and is not empty (pass overwrite to replace it)",
            dir.display()
        )));
    }
    if sample.frames.is_empty() {
        return Err(Error::invariant("sample has no frames"));
    }
    let staging = root.join(format!(".{id}.partial"));
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let record = sample.record();
    for (k, frame) in sample.frames.iter().enumerate() {
        raster::save_rgb(frame, &staging.join(FRAMES_DIR).join(frame_file_name(k)))?;
    }
    raster::save_rgb(&sample.frames[0], &staging.join(&record.conditioning.first_frame_path))?;
    for (img, rel) in sample
        .object_images
        .iter()
        .zip(&record.conditioning.object_image_paths)
    {
        raster::save_rgb(img, &staging.join(rel))?;
    }
    if let (Some(bg), Some(rel)) = (&sample.background, &record.conditioning.background_path) {
        raster::save_rgb(bg, &staging.join(rel))?;
    }
    write_text(&staging.join(CAPTION_FILE), &sample.caption)?;
    write_text(&staging.join(PROVENANCE_FILE), &to_pretty_json(&record))?;
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::rename(&staging, &dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub fn read_sample_output(dir: &Path) -> Result<SampleOutput> {
    read_json(&dir.join(PROVENANCE_FILE))
}

/// Checks an output directory against the sample invariants; an empty list
/// means the sample is valid.
pub fn validate_output(dir: &Path, spec: &SampleSpec) -> Result<Vec<String>> {
    let meta = std::fs::metadata(dir).map_err(|e| Error::io(dir, e))?;
    if !meta.is_dir() {
        return Err(Error::invariant(format!("{} is not a directory", dir.display())));
    }
    let mut v = Vec::new();
    let record = match read_sample_output(dir) {
        Ok(r) => Some(r),
        Err(e) => {
            v.push(format!("unreadable {PROVENANCE_FILE}: {e}"));
            None
        }
    };
    let k = spec
        .k
        .or_else(|| record.as_ref().and_then(|r| r.provenance.spec.k))
        .unwrap_or(DEFAULT_K);

    let frames_dir = dir.join(FRAMES_DIR);
    let mut names: BTreeMap<usize, PathBuf> = BTreeMap::new();
    match std::fs::read_dir(&frames_dir) {
        Ok(entries) => {
            for entry in entries {
                let path = entry.map_err(|e| Error::io(&frames_dir, e))?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                let idx = name
                    .strip_prefix("frame_")
                    .and_then(|r| r.strip_suffix(".png"))
                    .filter(|d| d.len() == 4 && d.chars().all(|c| c.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok());
                match idx {
                    Some(i) => {
                        names.insert(i, path);
                    }
                    None => v.push(format!("unexpected file {FRAMES_DIR}/{name}")),
                }
            }
        }
        Err(e) => v.push(format!("missing {FRAMES_DIR}/ directory: {e}")),
    }
    if names.len() != k {
        v.push(format!("frame count {} ≠ K={k}", names.len()));
    }
    for i in 0..k {
        if !names.contains_key(&i) {
            v.push(format!("missing {FRAMES_DIR}/{}", frame_file_name(i)));
        }
    }
    let canvas = spec.canvas.size();
    for (i, path) in &names {
        match raster::image_dimensions(path) {
            Ok(d) if d == canvas => {}
            Ok((w, h)) => v.push(format!(
                "{} is {w}x{h}, canvas is {}x{}",
                frame_file_name(*i),
                canvas.0,
                canvas.1
            )),
            Err(e) => v.push(format!("unreadable {}: {e}", frame_file_name(*i))),
        }
    }

    let Some(record) = record else {
        return Ok(v);
    };
    if record.sample_id != spec.sample_id {
        v.push(format!(
            "sample_id `{}` does not match spec `{}`",
            record.sample_id, spec.sample_id
        ));
    }
    if record.frame_count != k {
        v.push(format!("recorded frame_count {} ≠ K={k}", record.frame_count));
    }
    let sup = &record.supervised_frames;
    if sup.is_empty() {
        v.push("supervised_frames is empty".to_string());
    }
    if let Some(bad) = sup.iter().find(|&&i| i >= k) {
        v.push(format!("supervised frame {bad} outside [0, {}]", k - 1));
    }
    if !sup.contains(&(k - 1)) {
        v.push(format!(
            "last frame K-1={} must always be supervised (only the last frame is used for subject pairs)",
            k - 1
        ));
    }
    let all: Vec<usize> = (0..k).collect();
    match spec.source_mode {
        SourceMode::SubjectPair if sup != &vec![k - 1] => v.push(format!(
            "subject_pair must supervise only the last frame [{}], got {sup:?}",
            k - 1
        )),
        SourceMode::SubjectPair => {}
        _ if sup != &all => v.push(format!(
            "{} must supervise all {k} frames, got {sup:?}",
            spec.source_mode.as_str()
        )),
        _ => {}
    }
    match std::fs::read_to_string(dir.join(CAPTION_FILE)) {
        Ok(c) if c == record.caption => {}
        Ok(_) => v.push(format!("{CAPTION_FILE} differs from the recorded caption")),
        Err(e) => v.push(format!("missing {CAPTION_FILE}: {e}")),
    }
    let c = &record.conditioning;
    let mut cond_files = vec![&c.first_frame_path];
    cond_files.extend(&c.object_image_paths);
    cond_files.extend(&c.background_path);
    for rel in cond_files {
        if !dir.join(rel).is_file() {
            v.push(format!("missing conditioning file {rel}"));
        }
    }
    Ok(v)
}

/// Validates a sample directory against the sample spec embedded in its own
/// provenance record.
pub fn validate_output_dir(dir: &Path) -> Result<Vec<String>> {
    let record = read_sample_output(dir)?;
    validate_output(dir, &record.provenance.spec)
}

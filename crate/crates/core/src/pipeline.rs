//! End-to-end sample construction and batch runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage, RgbaImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::animator::{
    self, BackgroundStates, InitialState, Timeline, TimelineOptions, TrackAssets,
};
use crate::augment::{
    self, AugmentConfig, AugmentProbs, AugmentationPlan, BgPool, BgPoolWeights, JitterRanges, Role,
};
use crate::background::{self, BackgroundPools, ProceduralBackgroundPlan};
use crate::captions::{self, CaptionTemplate};
use crate::compositor::{self, Layer, Light, ShadowParams, Transform2D};
use crate::detect_clean::{self, CleanParams};
use crate::error::{Error, Result};
use crate::manifest::{
    self, AssetRegistry, ObjectAsset, Placement, Provenance, RenderedSample, SampleSpec, SourceMode,
    DEFAULT_K,
};
use crate::raster::{self, PixelRect};
use crate::seed;
use crate::sizing::{self, SizedItem};

/// Every knob of a generation run. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub probs: AugmentProbs,
    pub jitter: JitterRanges,
    pub bg_pool_weights: BgPoolWeights,
    pub k_default: usize,
    pub shadow: ShadowParams,
    pub light: Light,
    #[serde(flatten)]
    pub clean: CleanParams,
    pub inpaint_dilation_px: u32,
    pub conf_threshold: f64,
    pub workers: usize,
    pub global_seed: u64,
    pub white_box_padding: f64,
    /// Margin kept free around side-by-side pairs, as a canvas fraction.
    pub margin_frac: f64,
    pub max_tries: usize,
    pub photo_dir: Option<PathBuf>,
    /// Asset registry of substitutes for object replacement.
    pub substitute_pool: Option<PathBuf>,
    /// Caption template library; the built-in library when absent.
    pub templates: Option<PathBuf>,
    pub overwrite: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            probs: AugmentProbs::default(),
            jitter: JitterRanges::default(),
            bg_pool_weights: BgPoolWeights::default(),
            k_default: DEFAULT_K,
            shadow: ShadowParams::default(),
            light: Light {
                direction_deg: 135.0,
                elevation_deg: 45.0,
            },
            clean: CleanParams::default(),
            inpaint_dilation_px: 50,
            conf_threshold: crate::metrics::DEFAULT_CONF_THRESHOLD,
            workers: 1,
            global_seed: 0,
            white_box_padding: 0.05,
            margin_frac: 0.05,
            max_tries: 1000,
            photo_dir: None,
            substitute_pool: None,
            templates: None,
            overwrite: false,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        self.probs.validate()?;
        self.jitter.validate()?;
        if self.k_default < 2 {
            return Err(Error::schema("k_default", "must be ≥ 2"));
        }
        if self.workers < 1 {
            return Err(Error::schema("workers", "must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::schema("conf_threshold", "must lie in [0, 1]"));
        }
        if !(0.0..=0.5).contains(&self.white_box_padding) {
            return Err(Error::schema("white_box_padding", "must lie in [0, 0.5]"));
        }
        if !(0.0..0.5).contains(&self.margin_frac) {
            return Err(Error::schema("margin_frac", "must lie in [0, 0.5)"));
        }
        if self.max_tries == 0 {
            return Err(Error::schema("max_tries", "must be ≥ 1"));
        }
        if !(self.shadow.opacity > 0.0 && self.shadow.opacity <= 1.0) {
            return Err(Error::schema("shadow.opacity", "must lie in (0, 1]"));
        }
        if !(self.light.elevation_deg > 0.0) {
            return Err(Error::schema("light.elevation_deg", "must be > 0"));
        }
        Ok(())
    }

    fn rebase(&mut self, dir: &Path) {
        for p in [&mut self.photo_dir, &mut self.substitute_pool, &mut self.templates]
            .into_iter()
            .flatten()
        {
            *p = dir.join(&*p);
        }
    }
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<GenerationConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: GenerationConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::schema(if field == "." { "<root>".into() } else { field }, e.into_inner().to_string())
    })?;
    cfg.rebase(base_dir);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<GenerationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Shared, read-only state for building samples.
#[derive(Debug, Clone)]
pub struct Generator {
    pub config: GenerationConfig,
    pub templates: Vec<CaptionTemplate>,
    /// Substitutes with paths made absolute.
    pub substitutes: Vec<ObjectAsset>,
    pub pools: BackgroundPools,
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::io(p, e))
}

impl Generator {
    pub fn new(config: GenerationConfig) -> Result<Self> {
        config.validate()?;
        let templates = match &config.templates {
            Some(p) => captions::load_templates(p)?,
            None => captions::builtin_templates(),
        };
        let registry = match &config.substitute_pool {
            Some(p) => manifest::load_registry(p)?,
            None => AssetRegistry::empty(),
        };
        let base = absolute(&registry.base_dir)?;
        let substitutes = registry
            .objects
            .into_iter()
            .map(|mut o| {
                o.cutout = base.join(&o.cutout);
                o.relit_variants = o.relit_variants.iter().map(|p| base.join(p)).collect();
                o
            })
            .collect();
        let pools = BackgroundPools {
            photo_dir: config.photo_dir.clone(),
        };
        Ok(Generator {
            config,
            templates,
            substitutes,
            pools,
        })
    }

    fn augment_config(&self) -> AugmentConfig {
        let mut probs = self.config.probs;
        if self.substitutes.is_empty() && probs.replace > 0.0 {
            // no substitutes to draw from
            probs.replace = 0.0;
        }
        AugmentConfig {
            probs,
            jitter: self.config.jitter,
            bg_pool_weights: self.config.bg_pool_weights,
        }
    }

    fn substitute_ids(&self) -> Vec<String> {
        self.substitutes.iter().map(|o| o.id.clone()).collect()
    }
}

fn white(size: (u32, u32)) -> RgbImage {
    raster::uniform_rgb(size.0, size.1, [255, 255, 255])
}

/// Final background raster, honoring a drawn pool choice.
fn final_background(spec: &SampleSpec, plan: &AugmentationPlan, gen: &Generator, seed: u64) -> Result<RgbImage> {
    let size = spec.canvas.size();
    match plan.bg_pool_choice {
        Some(BgPool::PlainColor) => {
            let c = background::random_plain_color(seed::derive(seed, "bg/plain"));
            Ok(raster::uniform_rgb(size.0, size.1, c))
        }
        Some(BgPool::Procedural) => {
            let s = seed::derive(seed, "bg/procedural");
            let p = ProceduralBackgroundPlan::sample(s, size)?;
            background::synth_background(&p, size, s)
        }
        Some(BgPool::Photo) | None => background::pick_background(
            &spec.background,
            &spec.base_dir,
            &gen.pools,
            seed::derive(seed, "bg"),
            size,
        ),
    }
}

/// The reference subject flattened on white and fitted to the canvas.
fn subject_on_white(cutout: &RgbaImage, size: (u32, u32)) -> Result<RgbImage> {
    let (w, h) = cutout.dimensions();
    let s = (size.0 as f64 / w as f64).min(size.1 as f64 / h as f64);
    let t = Transform2D {
        scale: s,
        ..Transform2D::at([size.0 as f64 / 2.0, size.1 as f64 / 2.0])
    };
    compositor::composite_frame(
        &white(size),
        &[Layer {
            raster: cutout,
            transform: t,
            alpha_mul: 1.0,
            z: 0,
        }],
    )
}

fn conditioning_image(cutout: &RgbaImage, padding: f64) -> Result<RgbImage> {
    Ok(raster::flatten_over_white(&compositor::white_box_embed(cutout, padding)?))
}

fn build_subject_pair(spec: &SampleSpec, gen: &Generator, k: usize, seed: u64) -> Result<RenderedSample> {
    let size = spec.canvas.size();
    let obj = &spec.objects[0];
    let variants = obj.load_variants(&spec.base_dir)?;
    let first = subject_on_white(&variants[0], size)?;
    let rel = spec.target_image.as_ref().expect("validated");
    let mut last = raster::load_rgb(&spec.resolve(rel))?;
    if last.dimensions() != size {
        last = raster::center_crop_resize(&last, size.0, size.1);
    }
    let frames = match &spec.interpolation_dir {
        Some(dir) => {
            let frames = animator::load_interpolated_frames(&spec.resolve(dir), k, size)?;
            if frames[k - 1] != last {
                log::warn!("{}: last interpolated frame differs from target_image", spec.sample_id);
            }
            frames
        }
        None => animator::crossfade_pair(&first, &last, k)?.0,
    };
    let plan = AugmentationPlan::default();
    let aug = augment::apply_plan(spec, &plan, &[])?;
    let caption = render_caption(spec, gen, &aug.directives)?;
    Ok(RenderedSample {
        frames,
        object_images: vec![conditioning_image(&variants[0], gen.config.white_box_padding)?],
        background: None,
        caption,
        supervised_frames: animator::supervised_frames(SourceMode::SubjectPair, k),
        provenance: provenance(spec, k, seed, plan),
    })
}

fn provenance(spec: &SampleSpec, k: usize, seed: u64, plan: AugmentationPlan) -> Provenance {
    let mut spec = spec.clone();
    spec.k = Some(k);
    Provenance {
        spec,
        resolved_seed: seed,
        augmentation_plan: plan,
    }
}

fn render_caption(spec: &SampleSpec, gen: &Generator, d: &captions::CaptionDirectives) -> Result<String> {
    let t = captions::resolve_template(&gen.templates, &spec.caption_template_id, d.wrapped.len())?;
    captions::render_caption(t, d)
}

/// Target placements for a side-by-side pair: pixel heights proportional
/// to real heights, standing on a shared ground line, centered as a group.
pub fn side_by_side_layout(
    objects: &[ObjectAsset],
    cutouts: &[&RgbaImage],
    placements: &[Placement],
    canvas: (u32, u32),
    margin_frac: f64,
) -> Result<Vec<Placement>> {
    let mut items = Vec::new();
    let mut boxes = Vec::new();
    for (o, c) in objects.iter().zip(cutouts) {
        let dims = o.real_dims.as_ref().ok_or_else(|| {
            Error::invariant(format!("side_by_side object `{}` has no real_dims", o.id))
        })?;
        let b = raster::alpha_bbox(c)
            .ok_or_else(|| Error::invariant(format!("object `{}` has an empty cutout", o.id)))?;
        items.push(SizedItem {
            real_height_m: dims.height_m,
            aspect: b.w as f64 / b.h as f64,
        });
        boxes.push(b);
    }
    let heights = sizing::relative_scale(&items, canvas, margin_frac)?;
    let scales: Vec<f64> = heights.iter().zip(&boxes).map(|(h, b)| h / b.h as f64).collect();
    let total_w: f64 = scales.iter().zip(&boxes).map(|(s, b)| s * b.w as f64).sum();
    let ground = canvas.1 as f64 * (1.0 - margin_frac);
    let mut x = (canvas.0 as f64 - total_w) / 2.0;
    let mut out = Vec::new();
    for (((o, c), b), s) in objects.iter().zip(cutouts).zip(&boxes).zip(&scales) {
        let p = placements
            .iter()
            .find(|p| p.object_id == o.id)
            .ok_or_else(|| Error::invariant(format!("object `{}` has no placement", o.id)))?;
        let (w, h) = (c.width() as f64, c.height() as f64);
        out.push(Placement {
            center_xy: [
                x - (b.x as f64 - w / 2.0) * s,
                ground - (b.bottom() as f64 - h / 2.0) * s,
            ],
            scale: *s,
            rotation_deg: 0.0,
            perspective: [[0.0; 2]; 4],
            ..p.clone()
        });
        x += s * b.w as f64;
    }
    Ok(out)
}

/// Integer box that contains the warped raster.
fn footprint(t: &Transform2D, size: (u32, u32)) -> (u32, u32) {
    let [hx, hy] = t.half_extents(size.0, size.1);
    ((2.0 * hx).ceil().max(1.0) as u32, (2.0 * hy).ceil().max(1.0) as u32)
}

const SHRINK: f64 = 0.9;
const MAX_SHRINKS: usize = 3;

/// Scatters the initial states without overlap, shrinking every item by
/// 10% and retrying up to three times.
fn scatter(
    bases: &[Transform2D],
    sizes: &[(u32, u32)],
    canvas: (u32, u32),
    seed: u64,
    max_tries: usize,
) -> Result<Vec<Transform2D>> {
    let mut shrink = 1.0;
    let mut last_err = None;
    for attempt in 0..=MAX_SHRINKS {
        let ts: Vec<Transform2D> = bases
            .iter()
            .map(|t| {
                let mut t = *t;
                t.scale *= shrink;
                for c in t.perspective_offsets.iter_mut().flatten() {
                    *c *= shrink;
                }
                t
            })
            .collect();
        let fps: Vec<(u32, u32)> = ts.iter().zip(sizes).map(|(t, s)| footprint(t, *s)).collect();
        match compositor::scatter_layout(&fps, canvas, seed::derive(seed, &format!("scatter/{attempt}")), max_tries) {
            Ok(rects) => {
                return Ok(ts
                    .into_iter()
                    .zip(rects)
                    .map(|(mut t, r): (Transform2D, PixelRect)| {
                        t.translation_xy = r.center();
                        t
                    })
                    .collect())
            }
            Err(Error::Placement(m)) => {
                last_err = Some(m);
                shrink *= SHRINK;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Placement(format!(
        "{} after {MAX_SHRINKS} shrinks",
        last_err.unwrap_or_default()
    )))
}

/// A rendered sample plus the timeline that drove it; subject pairs have
/// no timeline.
#[derive(Debug, Clone)]
pub struct TracedSample {
    pub sample: RenderedSample,
    pub timeline: Option<Timeline>,
}

/// Builds one sample in memory.
pub fn build_sample(spec: &SampleSpec, gen: &Generator) -> Result<RenderedSample> {
    build_sample_traced(spec, gen).map(|t| t.sample)
}

pub fn build_sample_traced(spec: &SampleSpec, gen: &Generator) -> Result<TracedSample> {
    spec.validate()?;
    let cfg = &gen.config;
    let seed = seed::sample_seed(cfg.global_seed, &spec.sample_id, spec.seed);
    let k = spec.frames(cfg.k_default);
    if k < 2 {
        return Err(Error::invariant(format!("K must be ≥ 2, got {k}")));
    }
    if spec.source_mode == SourceMode::SubjectPair {
        return Ok(TracedSample {
            sample: build_subject_pair(spec, gen, k, seed)?,
            timeline: None,
        });
    }
    let size = spec.canvas.size();
    let plan = augment::sample_augmentations(spec, &gen.augment_config(), &gen.substitute_ids(), seed)?;
    let aug = augment::apply_plan(spec, &plan, &gen.substitutes)?;
    let s = &aug.spec;

    let mut variants: BTreeMap<&str, Vec<RgbaImage>> = BTreeMap::new();
    for o in &s.objects {
        variants.insert(&o.id, o.load_variants(&s.base_dir)?);
    }
    let mut target = s.target.clone();
    let side_by_side = s.source_mode == SourceMode::SideBySide;
    if side_by_side {
        let cutouts: Vec<&RgbaImage> = s.objects.iter().map(|o| &variants[o.id.as_str()][0]).collect();
        target.placements = side_by_side_layout(&s.objects, &cutouts, &target.placements, size, cfg.margin_frac)?;
    }

    // background states, with scene-completion objects baked in
    let final_plain = final_background(s, &plan, gen, seed)?;
    let mut scene_layers = Vec::new();
    for o in aug.with_role(Role::SceneBaked) {
        let p = target.get(&o.id).expect("validated placement");
        scene_layers.push(Layer {
            raster: &variants[o.id.as_str()][0],
            transform: p.transform(),
            alpha_mul: 1.0,
            z: p.z_order,
        });
    }
    let final_bg = compositor::composite_frame(&final_plain, &scene_layers)?;
    let initial_bg = if s.white_start {
        compositor::composite_frame(&white(size), &scene_layers)?
    } else {
        final_bg.clone()
    };

    // initial states
    let animated: Vec<&ObjectAsset> = aug.with_role(Role::Animated).collect();
    let mut bases = Vec::new();
    let mut box_sizes = Vec::new();
    let mut boxes: BTreeMap<&str, RgbaImage> = BTreeMap::new();
    for o in &animated {
        let p = target.get(&o.id).expect("validated placement");
        let b = compositor::white_box_embed(&variants[o.id.as_str()][0], cfg.white_box_padding)?;
        let base = Transform2D {
            scale: p.scale,
            ..Transform2D::at([0.0, 0.0])
        };
        bases.push(plan.jitter_for(&o.id).apply(&base, b.dimensions()));
        box_sizes.push(b.dimensions());
        boxes.insert(&o.id, b);
    }
    let starts = scatter(&bases, &box_sizes, size, seed, cfg.max_tries)?;
    let mut initial = Vec::new();
    let mut tracks = Vec::new();
    for (o, role) in s.objects.iter().zip(&aug.roles) {
        let transform = match role {
            Role::SceneBaked => continue,
            Role::Animated => Some(starts[animated.iter().position(|a| a.id == o.id).unwrap()]),
            Role::DesignElement => None,
        };
        let v = &variants[o.id.as_str()];
        initial.push(InitialState {
            object_id: o.id.clone(),
            transform,
            raster_size: v[0].dimensions(),
            boxed: transform.is_some(),
        });
        let shadow = if side_by_side {
            Some(compositor::render_shadow(&v[0], &cfg.light, &cfg.shadow)?)
        } else {
            None
        };
        tracks.push(TrackAssets {
            variants: v.clone(),
            white_box: boxes.remove(o.id.as_str()),
            shadow,
        });
    }
    let mut moving = target.clone();
    moving
        .placements
        .retain(|p| initial.iter().any(|i| i.object_id == p.object_id));
    let opts = TimelineOptions {
        canvas: size,
        white_start: s.white_start,
        shadows_fade_in: true,
    };
    let mut timeline = animator::plan_timeline(&initial, &moving, k, s.source_mode, &opts)?;
    let mut ghosts = Vec::new();
    if let Some(g) = &aug.ghost {
        let v = g.asset.load_variants(&s.base_dir)?;
        timeline.add_ghost(&g.asset.id, g.placement.transform(), g.placement.z_order);
        ghosts.push(v[0].clone());
    }
    let frames = animator::render_video(
        &timeline,
        &tracks,
        &ghosts,
        &BackgroundStates {
            initial: initial_bg,
            final_background: final_bg.clone(),
        },
    )?;

    let caption = render_caption(s, gen, &aug.directives)?;
    let object_images = aug
        .conditioning()
        .iter()
        .map(|o| conditioning_image(&variants[o.id.as_str()][0], cfg.white_box_padding))
        .collect::<Result<Vec<_>>>()?;
    let sample = RenderedSample {
        frames,
        object_images,
        background: (!s.white_start).then_some(final_bg),
        caption,
        supervised_frames: timeline.supervised_frames.clone(),
        provenance: provenance(spec, k, seed, plan),
    };
    Ok(TracedSample {
        sample,
        timeline: Some(timeline),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    pub reason: String,
}

/// Batch outcome; `summary.json` holds everything but the elapsed time so
/// reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub built: usize,
    pub failed: usize,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub elapsed: Duration,
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const SPEC_SUFFIX: &str = ".spec.json";

/// Spec files of a manifest directory in lexicographic order.
pub fn list_specs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file()
            && p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(SPEC_SUFFIX))
        {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Builds every spec of `manifest_dir` into `out_dir` with
/// `config.workers` threads. Failures are isolated per sample.
pub fn run_batch(manifest_dir: &Path, out_dir: &Path, gen: &Generator) -> Result<BatchSummary> {
    let start = Instant::now();
    let files = list_specs(manifest_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();

    let loaded: Vec<(String, Result<SampleSpec>)> = files
        .iter()
        .map(|p| (name(p), manifest::load_sample_spec(p)))
        .collect();
    let mut id_count: BTreeMap<String, usize> = BTreeMap::new();
    for (_, s) in &loaded {
        if let Ok(s) = s {
            *id_count.entry(s.sample_id.clone()).or_default() += 1;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(gen.config.workers)
        .build()
        .map_err(|e| Error::arg(format!("cannot start {} workers: {e}", gen.config.workers)))?;
    let results: Vec<std::result::Result<(), Failure>> = pool.install(|| {
        loaded
            .par_iter()
            .map(|(file, spec)| {
                let fail = |id: Option<&str>, reason: String| Failure {
                    spec: file.clone(),
                    sample_id: id.map(str::to_string),
                    reason,
                };
                let spec = spec.as_ref().map_err(|e| fail(None, e.to_string()))?;
                let id = spec.sample_id.as_str();
                if id_count[id] > 1 {
                    return Err(fail(Some(id), format!("duplicate sample_id `{id}`")));
                }
                let sample = build_sample(spec, gen).map_err(|e| fail(Some(id), e.to_string()))?;
                manifest::write_sample(&sample, out_dir, gen.config.overwrite)
                    .map_err(|e| fail(Some(id), e.to_string()))?;
                Ok(())
            })
            .collect()
    });
    let failures: Vec<Failure> = results.into_iter().filter_map(|r| r.err()).collect();
    for f in &failures {
        log::error!("{}: {}", f.spec, f.reason);
    }
    let summary = BatchSummary {
        built: files.len() - failures.len(),
        failed: failures.len(),
        failures,
        elapsed: start.elapsed(),
    };
    let path = out_dir.join(SUMMARY_FILE);
    std::fs::write(&path, manifest::to_pretty_json(&summary)).map_err(|e| Error::io(&path, e))?;
    log::info!(
        "built {} / failed {} in {:.2}s",
        summary.built,
        summary.failed,
        summary.elapsed.as_secs_f64()
    );
    Ok(summary)
}

/// One cleaned object as written by [`run_clean`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanedEntry {
    pub label: String,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: PixelRect,
    pub mask_path: String,
    pub cutout_path: String,
    pub sources: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub objects: Vec<CleanedEntry>,
    pub rejected: Vec<detect_clean::Rejection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inpaint_mask_path: Option<String>,
}

/// Cleans the detections of one image and writes masks, cutouts, the
/// dilated inpaint mask and `cleaned.json` into `out_dir`.
pub fn run_clean(
    detections: &Path,
    image: &Path,
    out_dir: &Path,
    params: &CleanParams,
    dilation_px: u32,
) -> Result<CleanReport> {
    let img = raster::load_rgb(image)?;
    let records = detect_clean::load_detections(detections)?;
    let set = detect_clean::clean_detections(&records, img.dimensions(), params)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut objects = Vec::new();
    for (i, o) in set.objects.iter().enumerate() {
        let mask_path = format!("mask_{i:02}.png");
        let cutout_path = manifest::object_file_name(i);
        raster::save_gray(&o.mask.to_gray(), &out_dir.join(&mask_path))?;
        raster::save_rgba(&detect_clean::extract_cutout(&img, &o.mask)?, &out_dir.join(&cutout_path))?;
        objects.push(CleanedEntry {
            label: o.label.clone(),
            confidence: o.confidence,
            bbox: o.mask.bbox().expect("coverage gate keeps nonempty masks"),
            mask_path,
            cutout_path,
            sources: o.sources.clone(),
        });
    }
    let inpaint_mask_path = if set.is_empty() {
        None
    } else {
        let m = detect_clean::inpaint_mask(&set, dilation_px)?;
        raster::save_gray(&m.to_gray(), &out_dir.join("inpaint_mask.png"))?;
        Some("inpaint_mask.png".to_string())
    };
    let report = CleanReport {
        objects,
        rejected: set.rejected,
        inpaint_mask_path,
    };
    let path = out_dir.join("cleaned.json");
    std::fs::write(&path, manifest::to_pretty_json(&report)).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// A background from one pool, for previews and pool checks.
pub fn make_background(kind: BgPool, size: (u32, u32), seed: u64, photo_dir: Option<&Path>) -> Result<RgbImage> {
    if size.0 == 0 || size.1 == 0 {
        return Err(Error::arg("zero-size canvas"));
    }
    match kind {
        BgPool::PlainColor => {
            let c = background::random_plain_color(seed);
            Ok(RgbImage::from_pixel(size.0, size.1, Rgb(c)))
        }
        BgPool::Procedural => {
            let p = ProceduralBackgroundPlan::sample(seed, size)?;
            background::synth_background(&p, size, seed)
        }
        BgPool::Photo => {
            let spec = manifest::BackgroundSpec {
                kind: manifest::BackgroundKind::Photo,
                photo_path: None,
                color: None,
                procedural_seed: None,
                description: String::new(),
            };
            let pools = BackgroundPools {
                photo_dir: photo_dir.map(Path::to_path_buf),
            };
            background::pick_background(&spec, Path::new("."), &pools, seed, size)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_field_errors() {
        let c = parse_config("{}", Path::new("/cfg")).unwrap();
        assert_eq!(c, GenerationConfig::default());
        let c = parse_config(r#"{"templates": "t.json", "dup_iou": 0.9}"#, Path::new("/cfg")).unwrap();
        assert_eq!(c.templates, Some(PathBuf::from("/cfg/t.json")));
        assert_eq!(c.clean.dup_iou, 0.9);
        let e = parse_config(r#"{"probs": {"scene": 1.5, "design": 0.1, "replace": 0.0}}"#, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("scene"), "{e}");
        let e = parse_config(r#"{"workers": 0}"#, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("workers"));
        let e = parse_config(r#"{"k_default": "x"}"#, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("k_default"), "{e}");
    }

    #[test]
    fn side_by_side_heights_follow_real_sizes() {
        let cut = |w, h| RgbaImage::from_pixel(w, h, image::Rgba([9, 9, 9, 255]));
        let a = cut(20, 40);
        let b = cut(30, 30);
        let obj = |id: &str, hm: f64| ObjectAsset {
            id: id.into(),
            label: id.into(),
            description: id.into(),
            cutout: "x.png".into(),
            real_dims: Some(manifest::RealDims {
                width_m: 0.5,
                height_m: hm,
                depth_m: 0.5,
            }),
            relit_variants: vec![],
        };
        let pl = |id: &str, z| Placement {
            object_id: id.into(),
            center_xy: [0.0, 0.0],
            scale: 1.0,
            rotation_deg: 0.0,
            perspective: [[0.0; 2]; 4],
            z_order: z,
            relight_t: 0.0,
        };
        let out = side_by_side_layout(&[obj("a", 2.0), obj("b", 1.0)], &[&a, &b], &[pl("a", 0), pl("b", 1)], (200, 100), 0.05)
            .unwrap();
        let ha = out[0].scale * 40.0;
        let hb = out[1].scale * 30.0;
        assert!((ha / hb - 2.0).abs() < 1e-12);
        // bottoms on the ground line
        for (p, h) in out.iter().zip([40.0, 30.0]) {
            assert!((p.center_xy[1] + p.scale * h / 2.0 - 95.0).abs() < 1e-9);
        }
        assert_eq!(out[1].z_order, 1);
    }
}

//! Seeded augmentation plans: per-object jitter, background pool choice,
//! scene completion, design elements and object replacement.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::captions::CaptionDirectives;
use crate::compositor::Transform2D;
use crate::error::{Error, Result};
use crate::manifest::{BackgroundKind, ObjectAsset, Placement, SampleSpec, SourceMode};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentProbs {
    pub scene: f64,
    pub design: f64,
    pub replace: f64,
}

impl Default for AugmentProbs {
    fn default() -> Self {
        AugmentProbs {
            scene: 0.20,
            design: 0.10,
            replace: 0.07,
        }
    }
}

impl AugmentProbs {
    pub const ZERO: AugmentProbs = AugmentProbs {
        scene: 0.0,
        design: 0.0,
        replace: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("scene", self.scene), ("design", self.design), ("replace", self.replace)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::arg(format!("probability {name}={p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterRanges {
    pub scale: [f64; 2],
    pub rotation_deg: [f64; 2],
    /// Largest corner offset as a fraction of the box width/height.
    pub perspective_frac: f64,
}

impl Default for JitterRanges {
    fn default() -> Self {
        JitterRanges {
            scale: [0.7, 1.3],
            rotation_deg: [-15.0, 15.0],
            perspective_frac: 0.05,
        }
    }
}

impl JitterRanges {
    pub const NONE: JitterRanges = JitterRanges {
        scale: [1.0, 1.0],
        rotation_deg: [0.0, 0.0],
        perspective_frac: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.scale[0] <= self.scale[1]) || !(self.scale[0] > 0.0) {
            return Err(Error::arg(format!("bad scale range {:?}", self.scale)));
        }
        if !(self.rotation_deg[0] <= self.rotation_deg[1]) {
            return Err(Error::arg(format!("inverted rotation range {:?}", self.rotation_deg)));
        }
        if !(0.0..0.25).contains(&self.perspective_frac) {
            return Err(Error::arg(format!(
                "perspective_frac {} outside [0, 0.25)",
                self.perspective_frac
            )));
        }
        Ok(())
    }
}

/// Jitter of one object's initial (scattered) state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectJitter {
    pub scale_mul: f64,
    pub rotation_deg: f64,
    /// Corner offsets as fractions of the box size (TL, TR, BR, BL).
    pub perspective_offsets: [[f64; 2]; 4],
}

impl ObjectJitter {
    pub const IDENTITY: ObjectJitter = ObjectJitter {
        scale_mul: 1.0,
        rotation_deg: 0.0,
        perspective_offsets: [[0.0; 2]; 4],
    };

    /// Applies the jitter to `base`, for a raster of `size` pixels.
    pub fn apply(&self, base: &Transform2D, size: (u32, u32)) -> Transform2D {
        let scale = base.scale * self.scale_mul;
        let bw = size.0 as f64 * scale;
        let bh = size.1 as f64 * scale;
        let mut p = base.perspective_offsets;
        for (o, j) in p.iter_mut().zip(self.perspective_offsets) {
            o[0] += j[0] * bw;
            o[1] += j[1] * bh;
        }
        Transform2D {
            scale,
            rotation_deg: base.rotation_deg + self.rotation_deg,
            translation_xy: base.translation_xy,
            perspective_offsets: p,
        }
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

pub fn apply_object_jitter(seed: u64, ranges: &JitterRanges) -> Result<ObjectJitter> {
    ranges.validate()?;
    let mut rng = seed::rng(seed);
    let scale_mul = uniform(&mut rng, ranges.scale[0], ranges.scale[1]);
    let rotation_deg = uniform(&mut rng, ranges.rotation_deg[0], ranges.rotation_deg[1]);
    let p = ranges.perspective_frac;
    let mut perspective_offsets = [[0.0; 2]; 4];
    for c in perspective_offsets.iter_mut().flatten() {
        *c = uniform(&mut rng, -p, p);
    }
    Ok(ObjectJitter {
        scale_mul,
        rotation_deg,
        perspective_offsets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BgPool {
    Photo,
    PlainColor,
    Procedural,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BgPoolWeights {
    pub photo: f64,
    pub plain_color: f64,
    pub procedural: f64,
}

impl Default for BgPoolWeights {
    fn default() -> Self {
        BgPoolWeights {
            photo: 1.0,
            plain_color: 1.0,
            procedural: 1.0,
        }
    }
}

impl BgPoolWeights {
    fn pick(&self, rng: &mut impl Rng) -> Result<BgPool> {
        let w = [self.photo, self.plain_color, self.procedural];
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::arg(format!("bad background pool weights {w:?}")));
        }
        let r = rng.gen_range(0.0..w.iter().sum::<f64>());
        Ok(if r < w[0] {
            BgPool::Photo
        } else if r < w[0] + w[1] {
            BgPool::PlainColor
        } else {
            BgPool::Procedural
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub victim_id: String,
    pub substitute_asset_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectJitterEntry {
    pub object_id: String,
    #[serde(flatten)]
    pub jitter: ObjectJitter,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub jitter: Vec<ObjectJitterEntry>,
    /// Pool the final background is drawn from; only set for photo
    /// backgrounds without a fixed photo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg_pool_choice: Option<BgPool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scene_completion: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub design_elements: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<Replacement>,
}

impl AugmentationPlan {
    pub fn jitter_for(&self, object_id: &str) -> ObjectJitter {
        self.jitter
            .iter()
            .find(|j| j.object_id == object_id)
            .map(|j| j.jitter)
            .unwrap_or(ObjectJitter::IDENTITY)
    }

    /// True when no structural augmentation was drawn.
    pub fn is_structurally_empty(&self) -> bool {
        self.scene_completion.is_empty() && self.design_elements.is_empty() && self.replacement.is_none()
    }

    /// Checks the disjointness and gating invariants against `spec`.
    pub fn check(&self, spec: &SampleSpec) -> Result<()> {
        let ids: BTreeSet<&str> = spec.objects.iter().map(|o| o.id.as_str()).collect();
        let scene: BTreeSet<&str> = self.scene_completion.iter().map(String::as_str).collect();
        let design: BTreeSet<&str> = self.design_elements.iter().map(String::as_str).collect();
        for id in scene.iter().chain(&design) {
            if !ids.contains(id) {
                return Err(Error::invariant(format!("plan references unknown object `{id}`")));
            }
        }
        if scene.len() != self.scene_completion.len() || design.len() != self.design_elements.len() {
            return Err(Error::invariant("plan lists an object twice"));
        }
        if !scene.is_disjoint(&design) {
            return Err(Error::invariant("scene-completion and design-element sets overlap"));
        }
        if !scene.is_empty() && scene.len() >= ids.len() {
            return Err(Error::invariant("scene completion must leave at least one object animated"));
        }
        if let Some(r) = &self.replacement {
            if !scene.is_empty() || !design.is_empty() {
                return Err(Error::invariant(
                    "replacement drawn although other objects were already selected",
                ));
            }
            if !ids.contains(r.victim_id.as_str()) {
                return Err(Error::invariant(format!("replacement victim `{}` is not in the sample spec", r.victim_id)));
            }
            if ids.contains(r.substitute_asset_id.as_str()) {
                return Err(Error::invariant(format!(
                    "substitute `{}` is already present in the sample spec",
                    r.substitute_asset_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AugmentConfig {
    pub probs: AugmentProbs,
    pub jitter: JitterRanges,
    pub bg_pool_weights: BgPoolWeights,
}

/// Whether structural augmentations apply to a source mode.
pub fn mode_takes_structural(mode: SourceMode) -> bool {
    matches!(mode, SourceMode::InTheWild | SourceMode::ManualDesign)
}

/// Draws a plan. Structural draws use one stream in a fixed order (scene
/// completion, then design elements per remaining object, then replacement);
/// jitter and pool choice use their own streams.
pub fn sample_augmentations(
    spec: &SampleSpec,
    cfg: &AugmentConfig,
    substitute_pool: &[String],
    seed: u64,
) -> Result<AugmentationPlan> {
    cfg.probs.validate()?;
    cfg.jitter.validate()?;
    let mut plan = AugmentationPlan::default();
    if spec.source_mode == SourceMode::SubjectPair {
        return Ok(plan);
    }
    for o in &spec.objects {
        let jitter = apply_object_jitter(seed::derive(seed, &format!("jitter/{}", o.id)), &cfg.jitter)?;
        plan.jitter.push(ObjectJitterEntry {
            object_id: o.id.clone(),
            jitter,
        });
    }
    if spec.background.kind == BackgroundKind::Photo && spec.background.photo_path.is_none() {
        let mut rng = seed::sub_rng(seed, "bg_pool");
        plan.bg_pool_choice = Some(cfg.bg_pool_weights.pick(&mut rng)?);
    }
    if !mode_takes_structural(spec.source_mode) {
        return Ok(plan);
    }

    let mut rng = seed::sub_rng(seed, "augment");
    let n = spec.objects.len();
    let p = &cfg.probs;
    let mut in_scene = vec![false; n];
    if rng.gen_bool(p.scene) && n >= 2 {
        // uniform over nonempty proper subsets
        loop {
            for b in in_scene.iter_mut() {
                *b = rng.gen_bool(0.5);
            }
            let c = in_scene.iter().filter(|&&b| b).count();
            if c > 0 && c < n {
                break;
            }
        }
    }
    for (o, &s) in spec.objects.iter().zip(&in_scene) {
        if s {
            plan.scene_completion.push(o.id.clone());
        }
    }
    for (o, &s) in spec.objects.iter().zip(&in_scene) {
        if !s && rng.gen_bool(p.design) {
            plan.design_elements.push(o.id.clone());
        }
    }
    if plan.scene_completion.is_empty() && plan.design_elements.is_empty() && rng.gen_bool(p.replace) {
        let present: BTreeSet<&str> = spec.objects.iter().map(|o| o.id.as_str()).collect();
        let pool: Vec<&String> = substitute_pool
            .iter()
            .filter(|id| !present.contains(id.as_str()))
            .collect();
        if pool.is_empty() {
            return Err(Error::invariant(
                "replacement triggered but the substitute pool has no usable asset",
            ));
        }
        let victim = &spec.objects[rng.gen_range(0..n)];
        let sub = pool[rng.gen_range(0..pool.len())];
        plan.replacement = Some(Replacement {
            victim_id: victim.id.clone(),
            substitute_asset_id: sub.clone(),
        });
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Conditioning image, travels from its scattered start.
    Animated,
    /// Rendered at its target in every background state.
    SceneBaked,
    /// Text only; flies in from off canvas.
    DesignElement,
}

/// The victim of a replacement, fading out at its target placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Ghost {
    pub asset: ObjectAsset,
    pub placement: Placement,
}

/// A spec with a plan applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSpec {
    /// The sample spec with any substitute swapped in for its victim.
    pub spec: SampleSpec,
    /// Role per entry of `spec.objects`.
    pub roles: Vec<Role>,
    pub ghost: Option<Ghost>,
    pub directives: CaptionDirectives,
}

impl AugmentedSpec {
    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ObjectAsset> {
        self.spec
            .objects
            .iter()
            .zip(&self.roles)
            .filter(move |(_, r)| **r == role)
            .map(|(o, _)| o)
    }

    /// Conditioning objects, in conditioning order.
    pub fn conditioning(&self) -> Vec<&ObjectAsset> {
        self.with_role(Role::Animated).collect()
    }
}

/// Background text used when a spec gives none.
pub fn default_background_text(kind: BackgroundKind) -> &'static str {
    match kind {
        BackgroundKind::Photo => "a photographed scene",
        BackgroundKind::PlainColor => "a plain colored backdrop",
        BackgroundKind::Procedural => "an abstract patterned backdrop",
        BackgroundKind::InpaintedOriginal => "the original scene",
    }
}

fn join_phrases(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [a] => a.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Applies `plan` to `spec`. `substitutes` resolves substitute asset ids;
/// their paths must already be valid relative to `spec.base_dir`.
pub fn apply_plan(
    spec: &SampleSpec,
    plan: &AugmentationPlan,
    substitutes: &[ObjectAsset],
) -> Result<AugmentedSpec> {
    plan.check(spec)?;
    let mut out = spec.clone();
    let mut ghost = None;
    let mut edit = None;
    if let Some(r) = &plan.replacement {
        let sub = substitutes
            .iter()
            .find(|a| a.id == r.substitute_asset_id)
            .ok_or_else(|| {
                Error::invariant(format!("substitute asset `{}` not found", r.substitute_asset_id))
            })?;
        let idx = out
            .objects
            .iter()
            .position(|o| o.id == r.victim_id)
            .expect("checked victim");
        let victim = std::mem::replace(&mut out.objects[idx], sub.clone());
        if let Some(p) = out.target.placements.iter_mut().find(|p| p.object_id == r.victim_id) {
            ghost = Some(Ghost {
                asset: victim.clone(),
                placement: p.clone(),
            });
            p.object_id = sub.id.clone();
        }
        edit = Some(format!(
            "The {} is replaced by {}.",
            victim.label,
            if sub.label.is_empty() { &sub.description } else { &sub.label }
        ));
    }
    let roles: Vec<Role> = spec
        .objects
        .iter()
        .map(|o| {
            if plan.scene_completion.contains(&o.id) {
                Role::SceneBaked
            } else if plan.design_elements.contains(&o.id) {
                Role::DesignElement
            } else {
                Role::Animated
            }
        })
        .collect();

    let mut bg = spec.background.description.trim().to_string();
    if bg.is_empty() {
        bg = default_background_text(spec.background.kind).to_string();
    }
    let baked: Vec<String> = out
        .objects
        .iter()
        .zip(&roles)
        .filter(|(_, r)| **r == Role::SceneBaked)
        .map(|(o, _)| o.description.clone())
        .collect();
    if !baked.is_empty() {
        bg = format!("{bg} with {}", join_phrases(&baked));
    }
    let pick = |role: Role| -> Vec<String> {
        out.objects
            .iter()
            .zip(&roles)
            .filter(|(_, r)| **r == role)
            .map(|(o, _)| o.description.clone())
            .collect()
    };
    let directives = CaptionDirectives {
        wrapped: pick(Role::Animated),
        background: Some(bg),
        extras: pick(Role::DesignElement),
        edit,
    };
    Ok(AugmentedSpec {
        spec: out,
        roles,
        ghost,
        directives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{BackgroundSpec, Canvas, LayoutTarget};
    use std::path::PathBuf;

    pub(crate) fn spec_with(n: usize) -> SampleSpec {
        let objects: Vec<ObjectAsset> = (0..n)
            .map(|i| ObjectAsset {
                id: format!("o{i}"),
                label: format!("thing{i}"),
                description: format!("a thing number {i}"),
                cutout: PathBuf::from(format!("o{i}.png")),
                real_dims: None,
                relit_variants: vec![],
            })
            .collect();
        let placements = (0..n)
            .map(|i| Placement {
                object_id: format!("o{i}"),
                center_xy: [20.0 + 30.0 * i as f64, 50.0],
                scale: 1.0,
                rotation_deg: 0.0,
                perspective: [[0.0; 2]; 4],
                z_order: i as i64,
                relight_t: 0.0,
            })
            .collect();
        SampleSpec {
            schema: crate::manifest::SCHEMA.into(),
            sample_id: "s".into(),
            source_mode: SourceMode::ManualDesign,
            objects,
            background: BackgroundSpec::plain([10, 20, 30], "a blue wall"),
            target: LayoutTarget { placements },
            caption_template_id: "studio".into(),
            k: None,
            canvas: Canvas { w: 128, h: 128 },
            seed: 0,
            white_start: false,
            target_image: None,
            interpolation_dir: None,
            base_dir: PathBuf::from("."),
        }
    }

    #[test]
    fn zero_probs_give_jitter_only() {
        let spec = spec_with(3);
        let cfg = AugmentConfig {
            probs: AugmentProbs::ZERO,
            ..Default::default()
        };
        for s in 0..50 {
            let plan = sample_augmentations(&spec, &cfg, &[], s).unwrap();
            assert!(plan.is_structurally_empty());
            assert_eq!(plan.jitter.len(), 3);
        }
    }

    #[test]
    fn degenerate_jitter_is_identity() {
        let j = apply_object_jitter(5, &JitterRanges::NONE).unwrap();
        assert_eq!(j, ObjectJitter::IDENTITY);
        let t = Transform2D::at([3.0, 4.0]);
        assert_eq!(j.apply(&t, (10, 10)), t);
    }

    #[test]
    fn jitter_is_deterministic_and_in_range() {
        let r = JitterRanges::default();
        assert_eq!(apply_object_jitter(9, &r).unwrap(), apply_object_jitter(9, &r).unwrap());
        for s in 0..200 {
            let j = apply_object_jitter(s, &r).unwrap();
            assert!((0.7..=1.3).contains(&j.scale_mul));
            assert!((-15.0..=15.0).contains(&j.rotation_deg));
            assert!(j.perspective_offsets.iter().flatten().all(|v| v.abs() <= 0.05));
        }
        let bad = JitterRanges {
            scale: [1.3, 0.7],
            ..r
        };
        assert!(apply_object_jitter(1, &bad).is_err());
    }

    #[test]
    fn replacement_requires_a_pool() {
        let spec = spec_with(2);
        let cfg = AugmentConfig {
            probs: AugmentProbs {
                scene: 0.0,
                design: 0.0,
                replace: 1.0,
            },
            ..Default::default()
        };
        assert!(sample_augmentations(&spec, &cfg, &[], 1).is_err());
        // pool entries already in the sample spec are not usable
        assert!(sample_augmentations(&spec, &cfg, &["o0".into()], 1).is_err());
        let plan = sample_augmentations(&spec, &cfg, &["sub".into()], 1).unwrap();
        assert_eq!(plan.replacement.unwrap().substitute_asset_id, "sub");
    }

    #[test]
    fn empty_plan_leaves_spec_unchanged() {
        let spec = spec_with(2);
        let a = apply_plan(&spec, &AugmentationPlan::default(), &[]).unwrap();
        assert_eq!(a.spec, spec);
        assert!(a.ghost.is_none());
        assert_eq!(a.directives.wrapped, vec!["a thing number 0", "a thing number 1"]);
        assert!(a.directives.extras.is_empty() && a.directives.edit.is_none());
    }

    #[test]
    fn scene_and_design_roles() {
        let spec = spec_with(3);
        let plan = AugmentationPlan {
            scene_completion: vec!["o2".into()],
            design_elements: vec!["o0".into()],
            ..Default::default()
        };
        let a = apply_plan(&spec, &plan, &[]).unwrap();
        assert_eq!(a.roles, vec![Role::DesignElement, Role::Animated, Role::SceneBaked]);
        assert_eq!(a.conditioning().len(), 1);
        assert_eq!(a.directives.background.as_deref(), Some("a blue wall with a thing number 2"));
        assert_eq!(a.directives.extras, vec!["a thing number 0"]);
        assert_eq!(a.spec.target, spec.target);
        assert_eq!(a.spec.canvas, spec.canvas);
    }

    #[test]
    fn replacement_swaps_the_victim() {
        let spec = spec_with(2);
        let sub = ObjectAsset {
            id: "sub".into(),
            label: "vase".into(),
            description: "a tall vase".into(),
            cutout: "sub.png".into(),
            real_dims: None,
            relit_variants: vec![],
        };
        let plan = AugmentationPlan {
            replacement: Some(Replacement {
                victim_id: "o1".into(),
                substitute_asset_id: "sub".into(),
            }),
            ..Default::default()
        };
        let a = apply_plan(&spec, &plan, &[sub]).unwrap();
        assert_eq!(a.spec.objects[1].id, "sub");
        assert_eq!(a.spec.target.placements[1].object_id, "sub");
        assert_eq!(a.spec.target.placements[1].center_xy, spec.target.placements[1].center_xy);
        assert_eq!(a.ghost.as_ref().unwrap().asset.id, "o1");
        assert_eq!(a.directives.wrapped[1], "a tall vase");
        assert!(a.directives.edit.as_deref().unwrap().contains("thing1"));
    }

    #[test]
    fn inconsistent_plans_are_rejected() {
        let spec = spec_with(2);
        let bad = AugmentationPlan {
            scene_completion: vec!["o0".into(), "o1".into()],
            ..Default::default()
        };
        assert!(apply_plan(&spec, &bad, &[]).is_err());
        let bad = AugmentationPlan {
            design_elements: vec!["o0".into()],
            replacement: Some(Replacement {
                victim_id: "o1".into(),
                substitute_asset_id: "x".into(),
            }),
            ..Default::default()
        };
        assert!(apply_plan(&spec, &bad, &[]).is_err());
    }
}

//! Deterministic synthesis of motion-based training videos for multi-object
//! compositing, plus the model-free metrics used to score composites.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`manifest`]: interchange formats (sample specs, outputs, registries)
//! - [`detect_clean`]: cleanup of grounded detections, cutouts and inpaint masks
//! - [`background`]: plain, procedural and photo-pool backgrounds
//! - [`compositor`]: warps, white-box embedding, scatter placement, shadows, "over" compositing
//! - [`animator`]: timelines, linear trajectories, fades, relighting and crossfades
//! - [`sizing`]: 1-D K-Means size groups and real-size scale resolution
//! - [`augment`]: seeded augmentation plans and their application
//! - [`captions`]: token-delimited caption rendering and validation
//! - [`metrics`]: Missing, identity/text cosine aggregation, MSE-BG, chamfer-to-color
//! - [`pipeline`]: end-to-end sample building and batch generation

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod animator;
pub mod augment;
pub mod background;
pub mod captions;
pub mod compositor;
pub mod detect_clean;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod seed;
pub mod sizing;

pub use error::{Error, Result};

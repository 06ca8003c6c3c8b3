//! Structured-light headlight simulation: camera and projector geometry,
//! headlight patterns with lens photometry, procedural night road scenes,
//! shading with shadow-mapped occlusion, depth metrics and depth losses.
//!
//! ```
//! use ledgen::prelude::*;
//!
//! let rig = Rig::default();
//! let pattern = make_pattern(PatternKind::Checkerboard, 0.5, &rig.projector, Phase::EvenOn).unwrap();
//! assert_eq!(pattern.control.dims(), (132, 28));
//! ```

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod cli;
pub mod depth;
pub mod error;
pub mod grid;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod pattern;
pub mod projector;
pub mod render;
pub mod scene;
pub mod seed;
pub mod shadow;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::camera::{CameraIntrinsics, Pose, Rig, Vec3};
    pub use crate::depth::{DepthMap, DEFAULT_MAX_DEPTH};
    pub use crate::error::{Error, Result};
    pub use crate::grid::Grid;
    pub use crate::losses::{gradcheck, loss_total, LossConfig, LossValue};
    pub use crate::metrics::{compute_metrics, roi_mask, EvalMask, MaskKind, MetricsReport};
    pub use crate::pattern::{apply_photometry, make_pattern, Pattern, PatternKind, Phase, PhotometryParams};
    pub use crate::projector::ProjectorModel;
    pub use crate::render::{shade, IlluminationKind, ShadingParams};
    pub use crate::scene::{generate_scene, raycast, raycast_depth, Primitive, Scene, SceneConfig};
    pub use crate::shadow::{render_shadow_map, ShadowConfig, ShadowMap};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/patterns.md")]
    mod patterns {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/rendering.md")]
    mod rendering {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
}

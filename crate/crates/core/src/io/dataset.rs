//! Materializes paired datasets: one scene and one depth map per frame,
//! rendered once per requested illumination with identical geometry.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, Rig};
use crate::depth::{DepthMap, DEFAULT_MAX_DEPTH};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pattern::{apply_photometry, make_pattern, Phase, PhotometryParams};
use crate::render::{shade, IlluminationKind, ShadingParams};
use crate::scene::{generate_scene, raycast, NormalMap, Scene, SceneConfig};
use crate::seed;
use crate::shadow::{render_shadow_map, ShadowConfig};

use super::manifest::{split_for_map, DatasetManifest, ManifestEntry, MAP_COUNT};
use super::preprocess::{center_crop_resize_depth, center_crop_resize_image, center_crop_resize_nearest, PreprocessSpec};
use super::{pfm, png, write_file_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub count: usize,
    pub seed: u64,
    pub kinds: Vec<IlluminationKind>,
    pub cell_deg: f64,
    /// Side of the square output images.
    pub image_size: usize,
    /// Render at 1920×1080 and center-crop 640 px before resizing.
    pub full_res: bool,
    pub write_normals: bool,
    pub max_depth: f64,
    pub scene: SceneConfig,
    pub shading: ShadingParams,
    pub photometry: PhotometryParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 10,
            seed: 0,
            kinds: vec![IlluminationKind::Led, IlluminationKind::Hb],
            cell_deg: 0.5,
            image_size: 320,
            full_res: false,
            write_normals: false,
            max_depth: DEFAULT_MAX_DEPTH,
            scene: SceneConfig::default(),
            shading: ShadingParams::default(),
            photometry: PhotometryParams::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::Contract("at least one illumination kind is required".into()));
        }
        let mut k = self.kinds.clone();
        k.sort();
        k.dedup();
        if k.len() != self.kinds.len() {
            return Err(Error::Contract("illumination kinds must be distinct".into()));
        }
        if self.image_size == 0 {
            return Err(Error::Contract("image size must be positive".into()));
        }
        if self.full_res && self.image_size > 640 {
            return Err(Error::Contract("full-resolution output is at most 640 px".into()));
        }
        if !(self.max_depth > 0.0) {
            return Err(Error::Contract("max depth must be positive".into()));
        }
        self.scene.validate()?;
        self.shading.validate()
    }

    /// Camera and projector used for rendering (before any crop).
    pub fn render_rig(&self) -> Rig {
        if self.full_res {
            Rig::with_camera(CameraIntrinsics::full_hd())
        } else {
            Rig::with_camera(CameraIntrinsics::square(self.image_size))
        }
    }

    /// Rig whose intrinsics describe the stored images.
    pub fn output_rig(&self) -> Rig {
        Rig::with_camera(CameraIntrinsics::square(self.image_size))
    }

    fn preprocess(&self) -> Option<PreprocessSpec> {
        self.full_res.then_some(PreprocessSpec {
            crop: 640,
            out_size: self.image_size,
        })
    }
}

/// Everything rendered for one frame, at output resolution.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub index: usize,
    pub seed: u64,
    pub map_id: u32,
    pub scene: Scene,
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub images: Vec<(IlluminationKind, Grid<f64>)>,
}

/// Renders frame `index` of a dataset without touching the file system.
pub fn render_frame(config: &DatasetConfig, index: usize) -> Result<FrameOutput> {
    let frame_seed = seed::derive_seed(config.seed, index as u64, "frame");
    let map_id = (index % MAP_COUNT as usize) as u32;
    let scene = generate_scene(frame_seed, &config.scene, map_id)?;
    let rig = config.render_rig();
    let gbuffer = raycast(&scene, &rig.camera, &rig.camera_pose)?;
    let shadow = render_shadow_map(&scene, &rig, &ShadowConfig::default());

    let mut images = Vec::with_capacity(config.kinds.len());
    for kind in &config.kinds {
        let pattern = make_pattern(kind.pattern_kind(), config.cell_deg, &rig.projector, Phase::EvenOn)?;
        let photometry = apply_photometry(pattern, config.photometry)?;
        let frame = shade(&gbuffer, &scene, &rig, &photometry, &config.shading, Some(&shadow))?;
        let image = match config.preprocess() {
            Some(spec) => center_crop_resize_image(&frame.image, &spec)?,
            None => frame.image,
        };
        images.push((*kind, image));
    }
    let (depth, normals) = match config.preprocess() {
        Some(spec) => (
            center_crop_resize_depth(&gbuffer.depth, &spec)?,
            center_crop_resize_nearest(&gbuffer.normals, &spec)?,
        ),
        None => (gbuffer.depth, gbuffer.normals),
    };
    Ok(FrameOutput {
        index,
        seed: frame_seed,
        map_id,
        scene,
        depth: depth.clip(config.max_depth)?.quantized_f32(),
        normals,
        images,
    })
}

fn frame_id(index: usize) -> String {
    format!("{index:06}")
}

/// Renders and writes one frame; the returned paths are those written,
/// even when a later write failed.
fn write_frame(config: &DatasetConfig, out_dir: &Path, index: usize) -> (Vec<PathBuf>, Result<Vec<ManifestEntry>>) {
    let mut written = Vec::new();
    let result = (|| {
        let frame = render_frame(config, index)?;
        let id = frame_id(index);
        let depth_rel = format!("depth/{id}.pfm");
        let p = out_dir.join(&depth_rel);
        pfm::write_depth_pfm(&p, &frame.depth)?;
        written.push(p);
        let normal_rel = if config.write_normals {
            let rel = format!("normals/{id}.pfm");
            let p = out_dir.join(&rel);
            pfm::write_normals_pfm(&p, &frame.normals)?;
            written.push(p);
            Some(rel)
        } else {
            None
        };
        let mut entries = Vec::new();
        for (kind, image) in &frame.images {
            let rel = format!("images/{id}_{kind}.png");
            let p = out_dir.join(&rel);
            png::write_gray8(&p, image)?;
            written.push(p);
            entries.push(ManifestEntry {
                id: id.clone(),
                image_path: rel,
                depth_path: depth_rel.clone(),
                normal_path: normal_rel.clone(),
                illumination: *kind,
                cell_deg: if *kind == IlluminationKind::Hb { 0.0 } else { config.cell_deg },
                seed: frame.seed,
                map_id: frame.map_id,
                split: split_for_map(frame.map_id),
            });
        }
        Ok(entries)
    })();
    (written, result)
}

/// Renders `config.count` frames into `out_dir` and writes
/// `manifest.json` last. On failure every file written so far is removed.
pub fn materialize_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    let existed = out_dir.exists();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let results: Vec<(Vec<PathBuf>, Result<Vec<ManifestEntry>>)> =
        (0..config.count).into_par_iter().map(|i| write_frame(config, out_dir, i)).collect();

    let mut entries = Vec::new();
    let mut failure = None;
    for (_, r) in results {
        match r {
            Ok(e) => entries.extend(e),
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    let outcome = match failure {
        Some(e) => Err(e),
        None => {
            let manifest = DatasetManifest::new(config.output_rig().hash(), [config.image_size; 2], entries);
            manifest.save(&out_dir.join("manifest.json")).map(|_| manifest)
        }
    };
    if outcome.is_err() {
        cleanup(out_dir, existed, config);
    }
    outcome
}

fn cleanup(out_dir: &Path, existed: bool, config: &DatasetConfig) {
    // only names this generator could have produced are removed
    for index in 0..config.count {
        let id = frame_id(index);
        let mut paths = vec![out_dir.join(format!("depth/{id}.pfm")), out_dir.join(format!("normals/{id}.pfm"))];
        paths.extend(config.kinds.iter().map(|k| out_dir.join(format!("images/{id}_{k}.png"))));
        for p in paths {
            let _ = std::fs::remove_file(p);
        }
    }
    for sub in ["depth", "normals", "images"] {
        let _ = std::fs::remove_dir(out_dir.join(sub));
    }
    let _ = std::fs::remove_file(out_dir.join("manifest.json.tmp"));
    if !existed {
        let _ = std::fs::remove_dir(out_dir);
    }
}

/// Writes `manifest` to `path`, atomically.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    write_file_atomic(path, manifest.to_json().as_bytes())
}

//! File formats, preprocessing and dataset materialization.

use std::io::Write;
use std::path::Path;

use crate::depth::DepthMap;
use crate::error::{Error, Result};

mod dataset;
mod manifest;
pub mod pfm;
pub mod png;
mod preprocess;

pub use dataset::{materialize_dataset, render_frame, save_manifest, DatasetConfig, FrameOutput};
pub use manifest::resolve as manifest_path;
pub use manifest::{
    split_for_map, subset_manifest, verify_manifest, DatasetManifest, ManifestEntry, Split, SplitCounts, SubsetSpec,
    MANIFEST_VERSION,
};
pub use preprocess::{center_crop_resize_depth, center_crop_resize_nearest, center_crop_resize_image, crop_window, PreprocessSpec};

/// Writes `bytes` and flushes them to disk, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partially written file.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    write_file(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthFormat {
    Pfm,
    Png16,
}

impl DepthFormat {
    /// Chooses the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("pfm") => Ok(Self::Pfm),
            Some("png") => Ok(Self::Png16),
            _ => Err(Error::Contract(format!(
                "{}: depth files must end in .pfm or .png",
                path.display()
            ))),
        }
    }
}

pub fn write_depth(path: &Path, depth: &DepthMap, format: DepthFormat) -> Result<()> {
    match format {
        DepthFormat::Pfm => pfm::write_depth_pfm(path, depth),
        DepthFormat::Png16 => png::write_depth_png16(path, depth),
    }
}

pub fn read_depth(path: &Path, format: DepthFormat) -> Result<DepthMap> {
    match format {
        DepthFormat::Pfm => pfm::read_depth_pfm(path),
        DepthFormat::Png16 => png::read_depth_png16(path),
    }
}

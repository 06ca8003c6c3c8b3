//! Center crop followed by resize: bilinear for images, nearest neighbour
//! for depth so that no depth value is invented.

use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    /// Side of the centered square window, source pixels.
    pub crop: usize,
    pub out_size: usize,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self { crop: 640, out_size: 320 }
    }
}

/// Top-left corner of the crop window: `((W − c)/2, (H − c)/2)`.
pub fn crop_window(spec: &PreprocessSpec, width: usize, height: usize) -> Result<(usize, usize)> {
    if spec.out_size == 0 || spec.crop == 0 {
        return Err(Error::Contract("crop and output size must be positive".into()));
    }
    if spec.crop > width || spec.crop > height {
        return Err(Error::Contract(format!(
            "source {width}x{height} is smaller than the {} px crop",
            spec.crop
        )));
    }
    Ok(((width - spec.crop) / 2, (height - spec.crop) / 2))
}

pub fn center_crop_resize_image(image: &Grid<f64>, spec: &PreprocessSpec) -> Result<Grid<f64>> {
    let (x0, y0) = crop_window(spec, image.width(), image.height())?;
    let scale = spec.crop as f64 / spec.out_size as f64;
    let last = (spec.crop - 1) as f64;
    let sample = |o: usize| ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
    Ok(Grid::from_fn(spec.out_size, spec.out_size, |x, y| {
        let (sx, sy) = (sample(x), sample(y));
        let (ix, iy) = (sx.floor() as usize, sy.floor() as usize);
        let (fx, fy) = (sx - ix as f64, sy - iy as f64);
        let (jx, jy) = ((ix + 1).min(spec.crop - 1), (iy + 1).min(spec.crop - 1));
        let at = |a: usize, b: usize| *image.get(x0 + a, y0 + b);
        let top = at(ix, iy) * (1.0 - fx) + at(jx, iy) * fx;
        let bottom = at(ix, jy) * (1.0 - fx) + at(jx, jy) * fx;
        top * (1.0 - fy) + bottom * fy
    }))
}

/// Nearest-neighbour crop and resize of any grid.
pub fn center_crop_resize_nearest<T: Clone>(grid: &Grid<T>, spec: &PreprocessSpec) -> Result<Grid<T>> {
    let (x0, y0) = crop_window(spec, grid.width(), grid.height())?;
    let scale = spec.crop as f64 / spec.out_size as f64;
    let nearest = |o: usize| (((o as f64 + 0.5) * scale).floor() as usize).min(spec.crop - 1);
    Ok(Grid::from_fn(spec.out_size, spec.out_size, |x, y| {
        grid.get(x0 + nearest(x), y0 + nearest(y)).clone()
    }))
}

pub fn center_crop_resize_depth(depth: &DepthMap, spec: &PreprocessSpec) -> Result<DepthMap> {
    let values = center_crop_resize_nearest(depth.values(), spec)?;
    let out = DepthMap::from_values(spec.out_size, spec.out_size, values.into_vec())?;
    if depth.max_depth().is_finite() {
        out.clip(depth.max_depth())
    } else {
        Ok(out)
    }
}

//! Dense depth maps with an explicit validity mask.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Depth beyond which values are clipped for training and evaluation.
pub const DEFAULT_MAX_DEPTH: f64 = 100.0;

/// Per-pixel z-depth in meters. Invalid pixels (sky, no return) are stored
/// as `+∞` and carry `valid = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    values: Grid<f64>,
    valid: Grid<bool>,
    max_depth: f64,
}

impl DepthMap {
    /// Builds a map from raw values; finite positive entries are valid, all
    /// others become invalid `+∞`.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let mut values = Grid::from_vec(width, height, values)?;
        let valid = values.map(|v| v.is_finite() && *v > 0.0);
        for (v, ok) in values.as_mut_slice().iter_mut().zip(valid.as_slice()) {
            if !ok {
                *v = f64::INFINITY;
            }
        }
        Ok(Self {
            values,
            valid,
            max_depth: f64::INFINITY,
        })
    }

    /// Every pixel valid at the same depth.
    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::Domain(format!("constant depth must be positive, got {depth}")));
        }
        Self::from_values(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    pub fn max_depth(&self) -> f64 {
        self.max_depth
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = self.values.index(x, y);
        self.valid.as_slice()[i].then(|| self.values.as_slice()[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|v| **v).count()
    }

    /// Clips valid values to `max_depth`; the mask and invalid entries are
    /// left untouched.
    pub fn clip(&self, max_depth: f64) -> Result<Self> {
        if !(max_depth > 0.0) {
            return Err(Error::Domain(format!("max_depth must be positive, got {max_depth}")));
        }
        let mut out = self.clone();
        for (v, ok) in out.values.as_mut_slice().iter_mut().zip(self.valid.as_slice()) {
            if *ok {
                *v = v.min(max_depth);
            }
        }
        out.max_depth = max_depth;
        Ok(out)
    }

    /// Same map with every value rounded to `f32`, as stored on disk.
    pub fn quantized_f32(&self) -> Self {
        let mut out = self.clone();
        for v in out.values.as_mut_slice() {
            *v = *v as f32 as f64;
        }
        out
    }
}

/// Free-function form of [`DepthMap::clip`].
pub fn clip_depth(d: &DepthMap, max_depth: f64) -> Result<DepthMap> {
    d.clip(max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_caps_far_values_only() {
        let d = DepthMap::from_values(3, 1, vec![150.0, 42.0, f64::INFINITY]).unwrap();
        let c = clip_depth(&d, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(c.get(0, 0), Some(100.0));
        assert_eq!(c.get(1, 0), Some(42.0));
        assert_eq!(c.get(2, 0), None);
        assert_eq!(c.valid(), d.valid());
        assert_eq!(c.max_depth(), 100.0);
    }

    #[test]
    fn clip_leaves_all_invalid_map_unchanged() {
        let d = DepthMap::from_values(2, 2, vec![f64::INFINITY; 4]).unwrap();
        let c = d.clip(100.0).unwrap();
        assert_eq!(c.values(), d.values());
        assert_eq!(c.valid_count(), 0);
    }

    #[test]
    fn non_positive_values_are_invalid() {
        let d = DepthMap::from_values(3, 1, vec![0.0, -2.0, f64::NAN]).unwrap();
        assert_eq!(d.valid_count(), 0);
        assert!(d.values().as_slice().iter().all(|v| *v == f64::INFINITY));
    }

    #[test]
    fn clip_rejects_non_positive_limit() {
        let d = DepthMap::constant(1, 1, 3.0).unwrap();
        assert!(d.clip(0.0).is_err());
    }
}

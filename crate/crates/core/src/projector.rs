//! Angular model of the HD headlight.
//!
//! Projector pixel `(c, r)` emits along azimuth
//! `α = ((c + 0.5)/cols − 0.5) · hfov` and elevation
//! `ε = ((r + 0.5)/rows − 0.5) · vfov`, in the direction
//! `normalize(tan α, tan ε, 1)` of the projector frame. The angular pitch is
//! uniform per axis, so a cell of fixed angle covers a patch whose metric
//! size grows linearly with range. Row 0 is the lowest elevation.

use serde::{Deserialize, Serialize};

use crate::camera::{Pose, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorModel {
    pub cols: usize,
    pub rows: usize,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    /// Projector frame expressed in the camera frame.
    pub pose: Pose,
    /// Radiant scale factor, arbitrary units.
    pub power: f64,
}

impl Default for ProjectorModel {
    /// 132×28 pixel headlight covering 35°×7°.
    fn default() -> Self {
        Self {
            cols: 132,
            rows: 28,
            hfov_deg: 35.0,
            vfov_deg: 7.0,
            pose: Pose::identity(),
            power: 1.0,
        }
    }
}

impl ProjectorModel {
    pub fn pixel_count(&self) -> usize {
        self.cols * self.rows
    }

    /// Horizontal angular pitch in degrees.
    pub fn pitch_h_deg(&self) -> f64 {
        self.hfov_deg / self.cols as f64
    }

    /// Vertical angular pitch in degrees.
    pub fn pitch_v_deg(&self) -> f64 {
        self.vfov_deg / self.rows as f64
    }

    /// Azimuth and elevation (degrees) of the center of pixel `(c, r)`.
    pub fn pixel_angles(&self, c: usize, r: usize) -> Result<(f64, f64)> {
        if c >= self.cols || r >= self.rows {
            return Err(Error::Domain(format!(
                "projector pixel ({c}, {r}) outside {}×{} grid",
                self.cols, self.rows
            )));
        }
        Ok(self.fractional_angles(c as f64 + 0.5, r as f64 + 0.5))
    }

    /// Angles for continuous grid coordinates (pixel centers at `+0.5`).
    pub fn fractional_angles(&self, c: f64, r: f64) -> (f64, f64) {
        (
            (c / self.cols as f64 - 0.5) * self.hfov_deg,
            (r / self.rows as f64 - 0.5) * self.vfov_deg,
        )
    }

    /// Unit direction of pixel `(c, r)` in the projector frame.
    pub fn pixel_direction(&self, c: usize, r: usize) -> Result<Vec3> {
        let (az, el) = self.pixel_angles(c, r)?;
        Ok(direction_from_angles(az, el))
    }

    /// Whether the direction `(az, el)` (degrees) lies in the frustum. The
    /// boundary is included.
    pub fn in_frustum(&self, az_deg: f64, el_deg: f64) -> bool {
        az_deg.abs() <= self.hfov_deg / 2.0 && el_deg.abs() <= self.vfov_deg / 2.0
    }

    /// Normalized field position: `max(|α|/(hfov/2), |ε|/(vfov/2))`, 1 on the
    /// frustum border.
    pub fn field_position(&self, az_deg: f64, el_deg: f64) -> f64 {
        (az_deg.abs() / (self.hfov_deg / 2.0)).max(el_deg.abs() / (self.vfov_deg / 2.0))
    }

    /// Projector-frame coordinates of a camera-frame point.
    pub fn to_projector_frame(&self, p_camera: &Vec3) -> Vec3 {
        self.pose.inverse().transform_point(p_camera)
    }
}

/// `normalize(tan α, tan ε, 1)` for angles in degrees.
pub fn direction_from_angles(az_deg: f64, el_deg: f64) -> Vec3 {
    Vec3::new(az_deg.to_radians().tan(), el_deg.to_radians().tan(), 1.0).normalize()
}

/// Azimuth and elevation (degrees) of a projector-frame point.
pub fn angles_in_projector(p: &Vec3) -> Result<(f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::BehindProjector { z: p.z });
    }
    Ok(((p.x / p.z).atan().to_degrees(), (p.y / p.z).atan().to_degrees()))
}

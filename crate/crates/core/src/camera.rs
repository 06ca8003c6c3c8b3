//! Pinhole camera, rigid poses and the camera/projector rig.
//!
//! Coordinates are x right, y up, z forward in every 3D frame. Image
//! coordinates have their origin at the top-left corner with `v` growing
//! downward, so the vertical pixel axis is flipped relative to `y`:
//!
//! ```text
//! u = cx + fx · x / z
//! v = cy − fy · y / z
//! ```
//!
//! Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`; its center is `(i + 0.5, j + 0.5)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projector::ProjectorModel;

pub type Vec3 = Vector3<f64>;

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Square image of side `size` with a horizontal field of view of about
    /// 53°: `fx = fy = size`, principal point at the image center.
    pub fn square(size: usize) -> Self {
        let s = size as f64;
        Self {
            fx: s,
            fy: s,
            cx: s / 2.0,
            cy: s / 2.0,
            width: size,
            height: size,
        }
    }

    /// The 1920×1080 sensor whose 640 px center crop, downsampled to 320 px,
    /// is [`CameraIntrinsics::square(320)`](Self::square).
    pub fn full_hd() -> Self {
        Self {
            fx: 640.0,
            fy: 640.0,
            cx: 960.0,
            cy: 540.0,
            width: 1920,
            height: 1080,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid camera intrinsics {self:?}")))
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Projects a camera-frame point to pixel coordinates. `None` when the
    /// point is not in front of the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.cx + self.fx * p.x / p.z, self.cy - self.fy * p.y / p.z))
    }

    /// Back-projects pixel coordinates at z-depth `depth` (meters).
    pub fn unproject(&self, px: (f64, f64), depth: f64) -> Result<Vec3> {
        if !(depth > 0.0) {
            return Err(Error::Domain(format!("depth must be positive, got {depth}")));
        }
        let (u, v) = px;
        if !(0.0..=self.width as f64).contains(&u) || !(0.0..=self.height as f64).contains(&v) {
            return Err(Error::Domain(format!(
                "pixel ({u}, {v}) outside {}×{} image",
                self.width, self.height
            )));
        }
        Ok(self.ray(u, v) * depth)
    }

    /// Ray direction through `(u, v)` scaled so that its z component is 1;
    /// a hit at parameter `t` along it has z-depth exactly `t`.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (self.cy - v) / self.fy, 1.0)
    }

    /// Ray through the center of pixel `(x, y)`.
    #[inline]
    pub fn pixel_ray(&self, x: usize, y: usize) -> Vec3 {
        self.ray(x as f64 + 0.5, y as f64 + 0.5)
    }
}

/// Rigid transform mapping points from a local frame into a parent frame:
/// `p_parent = rotation · p_local + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

const ORTHONORMAL_TOL: f64 = 1e-9;

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let gram = rotation * rotation.transpose();
        let orthonormal = (gram - Matrix3::identity()).abs().max() <= ORTHONORMAL_TOL;
        let proper = (rotation.determinant() - 1.0).abs() <= ORTHONORMAL_TOL;
        if !(orthonormal && proper) {
            return Err(Error::Domain(
                "rotation must be orthonormal with determinant 1".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about the x axis by `pitch_deg`. Positive values tilt the +z
    /// axis downward (toward −y).
    pub fn pitched_down(pitch_deg: f64, translation: Vec3) -> Self {
        let (s, c) = pitch_deg.to_radians().sin_cos();
        let rotation = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        Self {
            rotation,
            translation,
        }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Camera and headlight projector mounted on the ego vehicle.
///
/// `camera_pose` places the camera in the world; the projector pose inside
/// [`ProjectorModel`] is relative to the camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub camera: CameraIntrinsics,
    pub camera_pose: Pose,
    pub projector: ProjectorModel,
}

/// Camera mounting height above the road, meters.
pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.4;
/// Left headlight position relative to the camera; its norm is 1.5 m.
pub const DEFAULT_PROJECTOR_OFFSET: [f64; 3] = [-1.2, -0.9, 0.0];
/// Downward aim of the headlight.
pub const DEFAULT_PROJECTOR_PITCH_DEG: f64 = 2.0;

impl Rig {
    pub fn with_camera(camera: CameraIntrinsics) -> Self {
        let [x, y, z] = DEFAULT_PROJECTOR_OFFSET;
        Self {
            camera,
            camera_pose: Pose::from_translation(Vec3::new(0.0, DEFAULT_CAMERA_HEIGHT, 0.0)),
            projector: ProjectorModel {
                pose: Pose::pitched_down(DEFAULT_PROJECTOR_PITCH_DEG, Vec3::new(x, y, z)),
                ..ProjectorModel::default()
            },
        }
    }

    /// Same rig with the projector moved onto the camera center and aligned
    /// with it.
    pub fn zero_baseline(mut self) -> Self {
        self.projector.pose = Pose::identity();
        self
    }

    pub fn baseline(&self) -> f64 {
        self.projector.pose.translation.norm()
    }

    /// Projector pose in the world frame.
    pub fn projector_world_pose(&self) -> Pose {
        self.camera_pose.compose(&self.projector.pose)
    }

    /// Short stable digest of the rig configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("rig serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Default for Rig {
    fn default() -> Self {
        Self::with_camera(CameraIntrinsics::square(320))
    }
}

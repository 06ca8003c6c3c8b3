//! Procedural night road scenes built from analytic primitives.

mod generate;
mod primitive;
mod raycast;

pub use generate::{generate_scene, CountRange, SceneConfig};
pub use primitive::{Hit, Primitive, Shape};
pub use raycast::{nearest_hit, raycast, raycast_depth, gbuffer_from_depth, GBuffer, NormalMap, RayHit};

use serde::{Deserialize, Serialize};

use crate::camera::Vec3;
use crate::error::{Error, Result};

/// Unpatterned point light, e.g. the headlight of another car.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLight {
    pub position: [f64; 3],
    pub power: f64,
}

impl PointLight {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

pub const MAX_AMBIENT_LUX: f64 = 10.0;

/// World-frame scene. Primitive order matters only for tie-breaking equal
/// hit distances (lower index wins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub ambient_lux: f64,
    pub interferers: Vec<PointLight>,
    pub seed: u64,
    pub map_id: u32,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        Self {
            primitives,
            ambient_lux: 0.0,
            interferers: Vec::new(),
            seed: 0,
            map_id: 0,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn with_ambient(mut self, lux: f64) -> Result<Self> {
        if !(0.0..=MAX_AMBIENT_LUX).contains(&lux) {
            return Err(Error::Domain(format!("ambient {lux} lux outside [0, 10]")));
        }
        self.ambient_lux = lux;
        Ok(self)
    }

    pub fn with_interferer(mut self, light: PointLight) -> Self {
        self.interferers.push(light);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_AMBIENT_LUX).contains(&self.ambient_lux) {
            return Err(Error::Domain(format!(
                "ambient {} lux outside [0, 10]",
                self.ambient_lux
            )));
        }
        self.primitives.iter().try_for_each(Primitive::validate)
    }
}

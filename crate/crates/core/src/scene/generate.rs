//! Seeded generation of road scenes.
//!
//! Cars are boxes, pedestrians a box body with a sphere head, traffic signs
//! a pole with a plate. Entities are placed log-uniformly in depth so that
//! every distance bin receives a comparable share of geometry.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PointLight, Primitive, Scene, MAX_AMBIENT_LUX};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

/// Scene generation parameters; serialized as the scene config JSON
/// document. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub cars: CountRange,
    pub pedestrians: CountRange,
    pub signs: CountRange,
    /// Near edge of each entity, meters from the camera, sampled
    /// log-uniformly. Must lie within [3, 120].
    pub depth_range: [f64; 2],
    /// Lateral entity position, meters.
    pub lateral_range: [f64; 2],
    pub albedo_range: [f64; 2],
    pub ground_albedo: f64,
    pub ambient_lux: [f64; 2],
    pub interferers: CountRange,
    pub interferer_power: [f64; 2],
    /// Roadside walls (building fronts) on both sides.
    pub walls: bool,
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            cars: CountRange::new(1, 6),
            pedestrians: CountRange::new(0, 4),
            signs: CountRange::new(0, 3),
            depth_range: [5.0, 100.0],
            lateral_range: [-7.0, 7.0],
            albedo_range: [0.15, 0.85],
            ground_albedo: 0.25,
            ambient_lux: [0.0, MAX_AMBIENT_LUX],
            interferers: CountRange::new(0, 2),
            interferer_power: [0.5, 2.0],
            walls: true,
            max_attempts: 1000,
        }
    }
}

impl SceneConfig {
    /// Ground plane only, no lights.
    pub fn empty_road() -> Self {
        Self {
            cars: CountRange::new(0, 0),
            pedestrians: CountRange::new(0, 0),
            signs: CountRange::new(0, 0),
            interferers: CountRange::new(0, 0),
            walls: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Contract(format!("scene config: {msg}")));
        for (name, r) in [
            ("cars", self.cars),
            ("pedestrians", self.pedestrians),
            ("signs", self.signs),
            ("interferers", self.interferers),
        ] {
            if r.min > r.max {
                return bad(format!("{name} range {}..{} is empty", r.min, r.max));
            }
        }
        let [z0, z1] = self.depth_range;
        if !(3.0 <= z0 && z0 <= z1 && z1 <= 120.0) {
            return bad(format!("depth range {z0}..{z1} must lie within [3, 120]"));
        }
        let [x0, x1] = self.lateral_range;
        if !(x0 <= x1) {
            return bad(format!("lateral range {x0}..{x1} is empty"));
        }
        let [a0, a1] = self.albedo_range;
        if !(0.0 <= a0 && a0 <= a1 && a1 <= 1.0) || !(0.0..=1.0).contains(&self.ground_albedo) {
            return bad("albedo values must lie within [0, 1]".into());
        }
        let [l0, l1] = self.ambient_lux;
        if !(0.0 <= l0 && l0 <= l1 && l1 <= MAX_AMBIENT_LUX) {
            return bad(format!("ambient range {l0}..{l1} must lie within [0, 10]"));
        }
        let [p0, p1] = self.interferer_power;
        if !(0.0 <= p0 && p0 <= p1) {
            return bad("interferer power range is invalid".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        Ok(())
    }
}

/// Lateral distance from the lane center to each roadside wall, per map.
fn wall_setback(map_id: u32) -> f64 {
    8.0 + 2.0 * (map_id % 5) as f64
}

/// Footprint on the xz plane, used for overlap rejection.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    x: [f64; 2],
    z: [f64; 2],
}

impl Footprint {
    fn overlaps(&self, other: &Footprint, margin: f64) -> bool {
        self.x[0] < other.x[1] + margin
            && other.x[0] < self.x[1] + margin
            && self.z[0] < other.z[1] + margin
            && other.z[0] < self.z[1] + margin
    }
}

#[derive(Debug, Clone, Copy)]
enum Entity {
    Car,
    Pedestrian,
    Sign,
}

fn log_uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Builds the primitives for one entity with its near edge at `z`.
fn build_entity(kind: Entity, x: f64, z: f64, rng: &mut impl Rng, albedo: f64) -> Result<(Footprint, Vec<Primitive>)> {
    match kind {
        Entity::Car => {
            let w = rng.random_range(1.6..2.0);
            let h = rng.random_range(1.3..1.8);
            let l = rng.random_range(3.8..4.8);
            let min = [x - w / 2.0, 0.0, z];
            let max = [x + w / 2.0, h, z + l];
            Ok((
                Footprint {
                    x: [min[0], max[0]],
                    z: [min[2], max[2]],
                },
                vec![Primitive::cuboid(min, max, albedo)?],
            ))
        }
        Entity::Pedestrian => {
            let body = rng.random_range(1.0..1.35);
            let head = 0.12;
            let min = [x - 0.25, 0.0, z];
            let max = [x + 0.25, body, z + 0.35];
            Ok((
                Footprint {
                    x: [min[0], max[0]],
                    z: [min[2], max[2]],
                },
                vec![
                    Primitive::cuboid(min, max, albedo)?,
                    Primitive::sphere([x, body + head + 0.05, z + 0.175], head, albedo)?,
                ],
            ))
        }
        Entity::Sign => {
            let pole = rng.random_range(2.0..3.0);
            Ok((
                Footprint {
                    x: [x - 0.4, x + 0.4],
                    z: [z, z + 0.1],
                },
                vec![
                    Primitive::cuboid([x - 0.05, 0.0, z], [x + 0.05, pole, z + 0.1], albedo)?,
                    Primitive::cuboid([x - 0.4, pole, z], [x + 0.4, pole + 0.8, z + 0.05], albedo.max(0.7))?,
                ],
            ))
        }
    }
}

/// Generates a scene deterministically from `(seed, config, map_id)`.
///
/// Entities are placed by rejection sampling against already placed
/// footprints; failing `max_attempts` times for a single entity is an error.
pub fn generate_scene(seed: u64, config: &SceneConfig, map_id: u32) -> Result<Scene> {
    config.validate()?;
    let mut layout = seed::stream(seed, map_id as u64, "layout");
    let mut lights = seed::stream(seed, map_id as u64, "lights");
    let mut ambient = seed::stream(seed, map_id as u64, "ambient");

    let mut primitives = vec![Primitive::ground(config.ground_albedo)];
    let mut placed: Vec<Footprint> = Vec::new();

    let setback = wall_setback(map_id);
    if config.walls {
        for side in [-1.0, 1.0] {
            let x = side * setback;
            let height = layout.random_range(3.0..12.0);
            let albedo = uniform(&mut layout, config.albedo_range);
            // Segment direction chosen so the wall faces the road.
            let (start, end) = if side < 0.0 {
                ([x, 2.0], [x, 150.0])
            } else {
                ([x, 150.0], [x, 2.0])
            };
            primitives.push(Primitive::wall(start, end, 0.0, height, albedo)?);
        }
    }
    let lateral = if config.walls {
        [
            config.lateral_range[0].max(-setback + 1.0),
            config.lateral_range[1].min(setback - 1.0),
        ]
    } else {
        config.lateral_range
    };
    if lateral[0] > lateral[1] {
        return Err(Error::Generation(format!(
            "lateral range leaves no room between the walls at ±{setback} m"
        )));
    }

    let mut queue = Vec::new();
    for (kind, range) in [
        (Entity::Car, config.cars),
        (Entity::Pedestrian, config.pedestrians),
        (Entity::Sign, config.signs),
    ] {
        let n = range.sample(&mut layout);
        queue.extend(std::iter::repeat_n(kind, n));
    }

    for kind in queue {
        let mut done = false;
        for _ in 0..config.max_attempts {
            let z = log_uniform(&mut layout, config.depth_range);
            let x = uniform(&mut layout, lateral);
            let albedo = uniform(&mut layout, config.albedo_range);
            let (fp, prims) = build_entity(kind, x, z, &mut layout, albedo)?;
            let inside_walls = !config.walls || (fp.x[0] > -setback && fp.x[1] < setback);
            if inside_walls && !placed.iter().any(|p| p.overlaps(&fp, 0.3)) {
                placed.push(fp);
                primitives.extend(prims);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Generation(format!(
                "could not place {kind:?} after {} attempts",
                config.max_attempts
            )));
        }
    }

    let interferers = (0..config.interferers.sample(&mut lights))
        .map(|_| PointLight {
            position: [
                lights.random_range(-6.0..-1.5),
                0.7,
                log_uniform(&mut lights, config.depth_range),
            ],
            power: uniform(&mut lights, config.interferer_power),
        })
        .collect();

    Ok(Scene {
        primitives,
        ambient_lux: uniform(&mut ambient, config.ambient_lux),
        interferers,
        seed,
        map_id,
    })
}

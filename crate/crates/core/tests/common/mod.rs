#![allow(dead_code)]

use rand::Rng;

use ledgen::camera::{Rig, Vec3};
use ledgen::projector::direction_from_angles;
use ledgen::scene::{nearest_hit, Primitive, Scene};
use ledgen::shadow::ShadowMap;

/// Random scene of `1..=max` primitives in front of a camera at the
/// default height; at most one ground plane.
pub fn random_scene(rng: &mut impl Rng, max: usize) -> Scene {
    let count = rng.random_range(1..=max);
    let mut primitives = Vec::new();
    let mut has_ground = false;
    for _ in 0..count {
        let albedo = rng.random_range(0.1..0.9);
        let p = match rng.random_range(0..4) {
            0 if !has_ground => {
                has_ground = true;
                Primitive::ground(albedo)
            }
            0 | 1 => {
                let min = [rng.random_range(-8.0..6.0), rng.random_range(-0.5..2.0), rng.random_range(2.0..40.0)];
                let size = [rng.random_range(0.2..4.0), rng.random_range(0.2..3.0), rng.random_range(0.2..6.0)];
                Primitive::cuboid(min, [min[0] + size[0], min[1] + size[1], min[2] + size[2]], albedo).unwrap()
            }
            2 => Primitive::sphere(
                [rng.random_range(-8.0..8.0), rng.random_range(-1.0..3.0), rng.random_range(2.0..40.0)],
                rng.random_range(0.2..3.0),
                albedo,
            )
            .unwrap(),
            _ => {
                let start = [rng.random_range(-10.0..10.0), rng.random_range(1.0..40.0)];
                let end = [rng.random_range(-10.0..10.0), rng.random_range(1.0..40.0)];
                let bottom = rng.random_range(-1.0..1.0);
                Primitive::wall(start, end, bottom, bottom + rng.random_range(0.5..5.0), albedo).unwrap()
            }
        };
        primitives.push(p);
    }
    Scene::new(primitives)
}

/// Exact occlusion test: the segment from the projector to the
/// camera-frame point `p` meets no surface before `p`.
pub fn oracle_lit(scene: &Scene, rig: &Rig, p: &Vec3) -> bool {
    let q = rig.projector.to_projector_frame(p);
    let Ok((az, el)) = ledgen::projector::angles_in_projector(&q) else {
        return false;
    };
    if !rig.projector.in_frustum(az, el) {
        return false;
    }
    let pose = rig.projector_world_pose();
    let world = rig.camera_pose.transform_point(p);
    nearest_hit(&scene.primitives, 0..scene.primitives.len(), &pose.translation, &(world - pose.translation), 0.0)
        .is_none_or(|hit| hit.t >= 1.0 - 1e-7)
}

/// Whether the projector ray towards `p` has a different first surface (or
/// leaves the frustum) within one shadow-map texel.
pub fn near_projector_silhouette(scene: &Scene, rig: &Rig, shadow: &ShadowMap, p: &Vec3) -> bool {
    let q = rig.projector.to_projector_frame(p);
    let Ok((az, el)) = ledgen::projector::angles_in_projector(&q) else {
        return true;
    };
    let pose = rig.projector_world_pose();
    let first = |a: f64, e: f64| -> Option<usize> {
        if !rig.projector.in_frustum(a, e) {
            return Some(usize::MAX);
        }
        let d = pose.transform_vector(&direction_from_angles(a, e));
        nearest_hit(&scene.primitives, 0..scene.primitives.len(), &pose.translation, &d, 0.0).map(|h| h.index)
    };
    let (dh, dv) = shadow.texel_pitch_deg();
    let base = first(az, el);
    [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (-1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (1.0, -1.0)]
        .iter()
        .any(|(a, b)| first(az + a * dh, el + b * dv) != base)
}

//! Camera ray casting: exact per-pixel depth, normals and albedo.

use rayon::prelude::*;

use super::{Primitive, Scene};
use crate::camera::{CameraIntrinsics, Pose, Vec3};
use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Unit surface normals in the camera frame, facing the camera. Invalid
/// pixels hold the zero vector.
pub type NormalMap = Grid<Vec3>;

/// Everything the shader needs per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub albedo: Grid<f64>,
    pub primitive: Grid<Option<u32>>,
}

impl GBuffer {
    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    /// Outward geometric normal, world frame.
    pub normal: Vec3,
    pub index: usize,
}

/// Closest hit among `candidates` (visited in increasing index order); ties
/// go to the first candidate.
pub fn nearest_hit(
    primitives: &[Primitive],
    candidates: impl IntoIterator<Item = usize>,
    origin: &Vec3,
    dir: &Vec3,
    t_min: f64,
) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;
    for index in candidates {
        if let Some(hit) = primitives[index].intersect(origin, dir, t_min) {
            if best.is_none_or(|b| hit.t < b.t) {
                best = Some(RayHit {
                    t: hit.t,
                    normal: hit.normal,
                    index,
                });
            }
        }
    }
    best
}

/// Inclusive pixel rectangle that conservatively contains a primitive's
/// image, or `None` when the primitive must be tested everywhere.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    x0: i64,
    x1: i64,
    y0: i64,
    y1: i64,
}

fn footprint(p: &Primitive, world_to_cam: &Pose, cam: &CameraIntrinsics) -> Option<Footprint> {
    let corners = p.bounding_corners()?;
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for c in corners {
        let q = world_to_cam.transform_point(&c);
        if q.z <= 1e-6 {
            return None;
        }
        let (u, v) = cam.project(&q)?;
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    // Pixel x is sampled at x + 0.5; pad one pixel against rounding.
    Some(Footprint {
        x0: (umin - 0.5).floor() as i64 - 1,
        x1: (umax - 0.5).ceil() as i64 + 1,
        y0: (vmin - 0.5).floor() as i64 - 1,
        y1: (vmax - 0.5).ceil() as i64 + 1,
    })
}

/// Casts one ray per pixel center. Depth is the camera-frame z of the
/// nearest hit; sky pixels are invalid. A scene with a ground plane
/// requires the camera to be above it.
pub fn raycast(scene: &Scene, cam: &CameraIntrinsics, cam_pose: &Pose) -> Result<GBuffer> {
    cam.validate()?;
    let has_ground = scene.primitives.iter().any(|p| matches!(p.shape, super::Shape::GroundPlane));
    if has_ground && !(cam_pose.translation.y > 0.0) {
        return Err(Error::Domain(format!(
            "camera must be above the ground, got height {}",
            cam_pose.translation.y
        )));
    }
    let world_to_cam = cam_pose.inverse();
    let footprints: Vec<Option<Footprint>> = scene
        .primitives
        .iter()
        .map(|p| footprint(p, &world_to_cam, cam))
        .collect();
    let origin = cam_pose.translation;
    let (w, h) = cam.dims();

    let rows: Vec<Vec<Option<(f64, Vec3, usize)>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let row_candidates: Vec<usize> = footprints
                .iter()
                .enumerate()
                .filter(|(_, f)| f.is_none_or(|f| (f.y0..=f.y1).contains(&(y as i64))))
                .map(|(i, _)| i)
                .collect();
            (0..w)
                .map(|x| {
                    let ray_cam = cam.pixel_ray(x, y);
                    let dir = cam_pose.transform_vector(&ray_cam);
                    let candidates = row_candidates.iter().copied().filter(|&i| {
                        footprints[i].is_none_or(|f| (f.x0..=f.x1).contains(&(x as i64)))
                    });
                    nearest_hit(&scene.primitives, candidates, &origin, &dir, 0.0).map(|hit| {
                        let mut n = world_to_cam.transform_vector(&hit.normal);
                        if n.dot(&ray_cam) > 0.0 {
                            n = -n;
                        }
                        (hit.t, n, hit.index)
                    })
                })
                .collect()
        })
        .collect();

    let mut depth = Vec::with_capacity(w * h);
    let mut normals = Vec::with_capacity(w * h);
    let mut albedo = Vec::with_capacity(w * h);
    let mut primitive = Vec::with_capacity(w * h);
    for hit in rows.into_iter().flatten() {
        match hit {
            Some((t, n, i)) => {
                depth.push(t);
                normals.push(n);
                albedo.push(scene.primitives[i].albedo);
                primitive.push(Some(i as u32));
            }
            None => {
                depth.push(f64::INFINITY);
                normals.push(Vec3::zeros());
                albedo.push(0.0);
                primitive.push(None);
            }
        }
    }
    Ok(GBuffer {
        depth: DepthMap::from_values(w, h, depth)?,
        normals: Grid::from_vec(w, h, normals)?,
        albedo: Grid::from_vec(w, h, albedo)?,
        primitive: Grid::from_vec(w, h, primitive)?,
    })
}

/// Depth and normals only; see [`raycast`].
pub fn raycast_depth(
    scene: &Scene,
    cam: &CameraIntrinsics,
    cam_pose: &Pose,
) -> Result<(DepthMap, NormalMap)> {
    let g = raycast(scene, cam, cam_pose)?;
    Ok((g.depth, g.normals))
}

/// G-buffer for a depth map without scene geometry: normals come from
/// finite differences of the back-projected points, albedo is uniform.
/// Pixels whose neighbours are all invalid get a zero normal.
pub fn gbuffer_from_depth(depth: &DepthMap, cam: &CameraIntrinsics, albedo: f64) -> Result<GBuffer> {
    depth.values().ensure_dims(cam.dims())?;
    if !(0.0..=1.0).contains(&albedo) {
        return Err(Error::Domain(format!("albedo {albedo} outside [0, 1]")));
    }
    let (w, h) = cam.dims();
    let point = |x: usize, y: usize| depth.get(x, y).map(|d| cam.pixel_ray(x, y) * d);
    let normals = Grid::from_fn(w, h, |x, y| {
        let Some(p) = point(x, y) else {
            return Vec3::zeros();
        };
        // forward differences, falling back to backward ones at the border
        // or next to invalid pixels
        let dx = match (x + 1 < w).then(|| point(x + 1, y)).flatten() {
            Some(q) => Some(q - p),
            None => (x > 0).then(|| point(x - 1, y)).flatten().map(|q| p - q),
        };
        let dy = match (y + 1 < h).then(|| point(x, y + 1)).flatten() {
            Some(q) => Some(q - p),
            None => (y > 0).then(|| point(x, y - 1)).flatten().map(|q| p - q),
        };
        match (dx, dy) {
            (Some(a), Some(b)) => {
                let n = a.cross(&b);
                let len = n.norm();
                if len == 0.0 {
                    return Vec3::zeros();
                }
                let n = n / len;
                if n.dot(&p) > 0.0 {
                    -n
                } else {
                    n
                }
            }
            _ => Vec3::zeros(),
        }
    });
    Ok(GBuffer {
        depth: depth.clone(),
        normals,
        albedo: Grid::filled(w, h, albedo),
        primitive: Grid::filled(w, h, None),
    })
}

//! Projector-viewpoint shadow map.
//!
//! The map is rendered on a grid `resolution`× finer than the native
//! headlight grid, using the same uniform angular pitch. Each texel stores
//! the range of the nearest surface along its ray and the analytic surface
//! that was hit (tangent plane or sphere). A lookup re-intersects the query
//! point's own ray with the stored surfaces of the 2×2 nearest texels, so
//! planar receivers are compared exactly instead of against a range sampled
//! at the texel center, and a point is lit when any of those texels does
//! not occlude it. Disagreements with exact ray casting are confined to a
//! one-texel band around silhouettes seen from the projector.

use rayon::prelude::*;

use crate::camera::{Pose, Rig, Vec3};
use crate::grid::Grid;
use crate::projector::{angles_in_projector, direction_from_angles, ProjectorModel};
use crate::scene::{nearest_hit, Scene, Shape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowConfig {
    /// Texels per native projector pixel along each axis.
    pub resolution: usize,
    /// Depth comparison bias, meters.
    pub bias: f64,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        Self {
            resolution: 4,
            bias: 0.02,
        }
    }
}

/// Surface seen by a texel, in the projector frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Empty,
    /// Points `x` with `normal · x = offset`.
    Plane { normal: Vec3, offset: f64 },
    Sphere { center: Vec3, radius: f64 },
    /// Only a range is known (splatted from a depth map).
    Range(f64),
}

impl Surface {
    /// Distance from the projector to this surface along unit direction `u`;
    /// `+∞` when the ray does not meet it in front of the projector.
    fn range_along(&self, u: &Vec3) -> f64 {
        match *self {
            Surface::Empty => f64::INFINITY,
            Surface::Range(r) => r,
            Surface::Plane { normal, offset } => {
                let denom = normal.dot(u);
                let r = offset / denom;
                if denom != 0.0 && r > 0.0 {
                    r
                } else {
                    f64::INFINITY
                }
            }
            Surface::Sphere { center, radius } => {
                let b = u.dot(&center);
                let disc = b * b - (center.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return f64::INFINITY;
                }
                let s = disc.sqrt();
                if b - s > 0.0 {
                    b - s
                } else if b + s > 0.0 {
                    b + s
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShadowMap {
    range: Grid<f64>,
    surfaces: Grid<Surface>,
    hfov_deg: f64,
    vfov_deg: f64,
    camera_to_projector: Pose,
    bias: f64,
    analytic: bool,
}

impl ShadowMap {
    pub fn width(&self) -> usize {
        self.range.width()
    }

    pub fn height(&self) -> usize {
        self.range.height()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Nearest-hit range per texel, `+∞` where nothing is hit.
    pub fn ranges(&self) -> &Grid<f64> {
        &self.range
    }

    /// Angles (degrees) of the center of texel `(i, j)`.
    pub fn texel_angles(&self, i: usize, j: usize) -> (f64, f64) {
        texel_angles(i, j, self.width(), self.height(), self.hfov_deg, self.vfov_deg)
    }

    /// Angular size of one texel, degrees (horizontal, vertical).
    pub fn texel_pitch_deg(&self) -> (f64, f64) {
        (
            self.hfov_deg / self.width() as f64,
            self.vfov_deg / self.height() as f64,
        )
    }

    /// Whether a camera-frame point receives projector light.
    pub fn is_lit(&self, p_camera: &Vec3) -> bool {
        let p = self.camera_to_projector.transform_point(p_camera);
        let Ok((az, el)) = angles_in_projector(&p) else {
            return false;
        };
        if az.abs() > self.hfov_deg / 2.0 || el.abs() > self.vfov_deg / 2.0 {
            return false;
        }
        let range = p.norm();
        let u = p / range;
        let (w, h) = self.range.dims();
        let fx = (az / self.hfov_deg + 0.5) * w as f64 - 0.5;
        let fy = (el / self.vfov_deg + 0.5) * h as f64 - 0.5;
        let i0 = (fx.floor().max(0.0) as usize).min(w - 1);
        let j0 = (fy.floor().max(0.0) as usize).min(h - 1);
        if !self.analytic {
            let i = (fx.round().max(0.0) as usize).min(w - 1);
            let j = (fy.round().max(0.0) as usize).min(h - 1);
            return range <= self.surfaces.get(i, j).range_along(&u) + self.bias;
        }
        let i1 = (i0 + 1).min(w - 1);
        let j1 = (j0 + 1).min(h - 1);
        [(i0, j0), (i1, j0), (i0, j1), (i1, j1)]
            .iter()
            .any(|&(i, j)| range <= self.surfaces.get(i, j).range_along(&u) + self.bias)
    }

    /// Shadow map built from a cloud of camera-frame points (e.g. a depth
    /// map) instead of analytic geometry. Each point is splatted into its
    /// nearest texel, keeping the minimum range; texels without points are
    /// empty. Lookups use the single nearest texel and compare ranges only,
    /// so `bias` has to absorb the range variation across a texel.
    pub fn from_points<'a>(
        points: impl IntoIterator<Item = &'a Vec3>,
        proj: &ProjectorModel,
        config: &ShadowConfig,
    ) -> Self {
        let w = proj.cols * config.resolution;
        let h = proj.rows * config.resolution;
        let camera_to_projector = proj.pose.inverse();
        let mut range = Grid::filled(w, h, f64::INFINITY);
        for pc in points {
            let p = camera_to_projector.transform_point(pc);
            let Ok((az, el)) = angles_in_projector(&p) else {
                continue;
            };
            if !proj.in_frustum(az, el) {
                continue;
            }
            let i = (((az / proj.hfov_deg + 0.5) * w as f64) as usize).min(w - 1);
            let j = (((el / proj.vfov_deg + 0.5) * h as f64) as usize).min(h - 1);
            let r = range.get_mut(i, j);
            *r = r.min(p.norm());
        }
        let surfaces = range.map(|r| {
            if r.is_finite() {
                Surface::Range(*r)
            } else {
                Surface::Empty
            }
        });
        Self {
            range,
            surfaces,
            hfov_deg: proj.hfov_deg,
            vfov_deg: proj.vfov_deg,
            camera_to_projector,
            bias: config.bias,
            analytic: false,
        }
    }
}

fn texel_angles(i: usize, j: usize, w: usize, h: usize, hfov: f64, vfov: f64) -> (f64, f64) {
    (
        ((i as f64 + 0.5) / w as f64 - 0.5) * hfov,
        ((j as f64 + 0.5) / h as f64 - 0.5) * vfov,
    )
}

/// Renders the shadow map of `scene` for the rig's projector.
pub fn render_shadow_map(scene: &Scene, rig: &Rig, config: &ShadowConfig) -> ShadowMap {
    let proj = &rig.projector;
    let w = proj.cols * config.resolution.max(1);
    let h = proj.rows * config.resolution.max(1);
    let proj_to_world = rig.projector_world_pose();
    let world_to_proj = proj_to_world.inverse();
    let origin = proj_to_world.translation;

    let texels: Vec<(f64, Surface)> = (0..w * h)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % w, k / w);
            let (az, el) = texel_angles(i, j, w, h, proj.hfov_deg, proj.vfov_deg);
            let u = direction_from_angles(az, el);
            let dir = proj_to_world.transform_vector(&u);
            match nearest_hit(&scene.primitives, 0..scene.primitives.len(), &origin, &dir, 0.0) {
                None => (f64::INFINITY, Surface::Empty),
                Some(hit) => {
                    let surface = match &scene.primitives[hit.index].shape {
                        Shape::Sphere { center, radius } => Surface::Sphere {
                            center: world_to_proj.transform_point(&Vec3::from(*center)),
                            radius: *radius,
                        },
                        _ => {
                            let normal = world_to_proj.transform_vector(&hit.normal);
                            Surface::Plane {
                                normal,
                                offset: normal.dot(&(u * hit.t)),
                            }
                        }
                    };
                    (hit.t, surface)
                }
            }
        })
        .collect();
    let (range, surfaces): (Vec<f64>, Vec<Surface>) = texels.into_iter().unzip();
    ShadowMap {
        range: Grid::from_vec(w, h, range).expect("texel count"),
        surfaces: Grid::from_vec(w, h, surfaces).expect("texel count"),
        hfov_deg: proj.hfov_deg,
        vfov_deg: proj.vfov_deg,
        camera_to_projector: proj.pose.inverse(),
        bias: config.bias,
        analytic: true,
    }
}

/// Free-function form of [`ShadowMap::is_lit`].
pub fn is_lit(point_camera: &Vec3, shadow: &ShadowMap) -> bool {
    shadow.is_lit(point_camera)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraIntrinsics;
    use crate::scene::Primitive;

    fn projector_rig(pose: Pose) -> Rig {
        // Camera at the world origin: camera and world frames coincide.
        let mut rig = Rig::with_camera(CameraIntrinsics::square(64));
        rig.camera_pose = Pose::identity();
        rig.projector.pose = pose;
        rig
    }

    #[test]
    fn empty_scene_is_all_infinite() {
        let rig = projector_rig(Pose::identity());
        let map = render_shadow_map(&Scene::empty(), &rig, &ShadowConfig::default());
        assert_eq!(map.width(), 528);
        assert_eq!(map.height(), 112);
        assert!(map.ranges().as_slice().iter().all(|r| *r == f64::INFINITY));
    }

    #[test]
    fn fronto_parallel_wall_ranges() {
        let rig = projector_rig(Pose::identity());
        let wall = Primitive::fronto_parallel_wall(10.0, -100.0, 100.0, -100.0, 100.0, 0.5).unwrap();
        let map = render_shadow_map(&Scene::new(vec![wall]), &rig, &ShadowConfig::default());
        for j in 0..map.height() {
            for i in 0..map.width() {
                let (az, el) = map.texel_angles(i, j);
                let d = direction_from_angles(az, el);
                let expected = 10.0 / d.z;
                let r = *map.ranges().get(i, j);
                assert!((r - expected).abs() < 1e-9, "{r} vs {expected}");
            }
        }
        // Central texels sit a fraction of a texel off the axis.
        let c = *map.ranges().get(264, 56);
        assert!((c - 10.0).abs() < 1e-5);
    }

    #[test]
    fn point_behind_projector_is_unlit() {
        let rig = projector_rig(Pose::identity());
        let map = render_shadow_map(&Scene::empty(), &rig, &ShadowConfig::default());
        assert!(!map.is_lit(&Vec3::new(0.0, 0.0, -5.0)));
        assert!(map.is_lit(&Vec3::new(0.0, 0.0, 5.0)));
        assert!(!map.is_lit(&Vec3::new(0.0, 5.0, 5.0)));
    }

    #[test]
    fn box_occludes_wall_behind_it() {
        let rig = projector_rig(Pose::identity());
        let scene = Scene::new(vec![
            Primitive::fronto_parallel_wall(10.0, -100.0, 100.0, -100.0, 100.0, 0.5).unwrap(),
            Primitive::cuboid([-0.5, -0.3, 5.0], [0.5, 0.3, 6.0], 0.5).unwrap(),
        ]);
        let map = render_shadow_map(&scene, &rig, &ShadowConfig::default());
        assert!(!map.is_lit(&Vec3::new(0.0, 0.0, 10.0)));
        assert!(map.is_lit(&Vec3::new(0.0, 0.0, 5.0)));
        assert!(map.is_lit(&Vec3::new(2.0, 0.0, 10.0)));
    }

    #[test]
    fn grazing_ground_is_lit_without_acne() {
        let rig = Rig::default();
        let scene = Scene::new(vec![Primitive::ground(0.5)]);
        let map = render_shadow_map(&scene, &rig, &ShadowConfig::default());
        let to_cam = rig.camera_pose.inverse();
        let proj_world = rig.projector_world_pose();
        // Road points straight ahead of the headlight from 8 m to 90 m.
        let mut z = 8.0;
        while z < 90.0 {
            let world = Vec3::new(proj_world.translation.x, 0.0, z);
            assert!(map.is_lit(&to_cam.transform_point(&world)), "acne at {z} m");
            z += 0.37;
        }
    }

    #[test]
    fn splatted_map_occludes_far_points() {
        let proj = ProjectorModel::default();
        let pts = [Vec3::new(0.0, 0.0, 5.0)];
        let map = ShadowMap::from_points(pts.iter(), &proj, &ShadowConfig::default());
        assert!(map.is_lit(&Vec3::new(0.0, 0.0, 5.0)));
        assert!(!map.is_lit(&Vec3::new(0.0, 0.0, 9.0)));
    }
}

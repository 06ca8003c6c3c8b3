//! Analytic scene primitives and their exact ray intersections.

use serde::{Deserialize, Serialize};

use crate::camera::Vec3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// The road surface `y = 0`, unbounded.
    GroundPlane,
    /// Axis-aligned box between two corners.
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Zero-thickness vertical rectangle standing on the segment
    /// `start → end` of the xz plane, between heights `bottom` and `top`.
    Wall {
        start: [f64; 2],
        end: [f64; 2],
        bottom: f64,
        top: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub albedo: f64,
}

/// Ray intersection: parameter along the (not necessarily unit) direction
/// and the outward geometric normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub normal: Vec3,
}

impl Primitive {
    pub fn new(shape: Shape, albedo: f64) -> Result<Self> {
        let p = Self { shape, albedo };
        p.validate()?;
        Ok(p)
    }

    pub fn ground(albedo: f64) -> Self {
        Self {
            shape: Shape::GroundPlane,
            albedo,
        }
    }

    pub fn cuboid(min: [f64; 3], max: [f64; 3], albedo: f64) -> Result<Self> {
        Self::new(Shape::Box { min, max }, albedo)
    }

    pub fn sphere(center: [f64; 3], radius: f64, albedo: f64) -> Result<Self> {
        Self::new(Shape::Sphere { center, radius }, albedo)
    }

    pub fn wall(start: [f64; 2], end: [f64; 2], bottom: f64, top: f64, albedo: f64) -> Result<Self> {
        Self::new(
            Shape::Wall {
                start,
                end,
                bottom,
                top,
            },
            albedo,
        )
    }

    /// Wall facing the camera across `x0..x1` at depth `z`.
    pub fn fronto_parallel_wall(z: f64, x0: f64, x1: f64, bottom: f64, top: f64, albedo: f64) -> Result<Self> {
        Self::wall([x0, z], [x1, z], bottom, top, albedo)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::Domain(format!("albedo {} outside [0, 1]", self.albedo)));
        }
        let ok = match &self.shape {
            Shape::GroundPlane => true,
            Shape::Box { min, max } => (0..3).all(|k| max[k] > min[k]),
            Shape::Sphere { radius, .. } => *radius > 0.0,
            Shape::Wall {
                start,
                end,
                bottom,
                top,
            } => top > bottom && (start[0] != end[0] || start[1] != end[1]),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("degenerate primitive {:?}", self.shape)))
        }
    }

    /// Corners of a bounding volume, or `None` for unbounded shapes.
    pub fn bounding_corners(&self) -> Option<Vec<Vec3>> {
        let (min, max) = match &self.shape {
            Shape::GroundPlane => return None,
            Shape::Box { min, max } => (*min, *max),
            Shape::Sphere { center, radius } => (
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            Shape::Wall {
                start,
                end,
                bottom,
                top,
            } => {
                return Some(vec![
                    Vec3::new(start[0], *bottom, start[1]),
                    Vec3::new(start[0], *top, start[1]),
                    Vec3::new(end[0], *bottom, end[1]),
                    Vec3::new(end[0], *top, end[1]),
                ])
            }
        };
        let mut corners = Vec::with_capacity(8);
        for &x in &[min[0], max[0]] {
            for &y in &[min[1], max[1]] {
                for &z in &[min[2], max[2]] {
                    corners.push(Vec3::new(x, y, z));
                }
            }
        }
        Some(corners)
    }

    /// Nearest intersection with `t > t_min`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<Hit> {
        match &self.shape {
            Shape::GroundPlane => {
                if dir.y == 0.0 {
                    return None;
                }
                let t = -origin.y / dir.y;
                (t > t_min).then(|| Hit {
                    t,
                    normal: Vec3::y(),
                })
            }
            Shape::Box { min, max } => intersect_box(min, max, origin, dir, t_min),
            Shape::Sphere { center, radius } => {
                intersect_sphere(&Vec3::from(*center), *radius, origin, dir, t_min)
            }
            Shape::Wall {
                start,
                end,
                bottom,
                top,
            } => intersect_wall(start, end, *bottom, *top, origin, dir, t_min),
        }
    }
}

fn intersect_box(min: &[f64; 3], max: &[f64; 3], o: &Vec3, d: &Vec3, t_min: f64) -> Option<Hit> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0;
    let mut far_axis = 0;
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < min[k] || o[k] > max[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let mut t0 = (min[k] - o[k]) * inv;
        let mut t1 = (max[k] - o[k]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_near {
            t_near = t0;
            near_axis = k;
        }
        if t1 < t_far {
            t_far = t1;
            far_axis = k;
        }
    }
    if t_near > t_far {
        return None;
    }
    let axis_normal = |k: usize, sign: f64| {
        let mut n = Vec3::zeros();
        n[k] = sign;
        n
    };
    if t_near > t_min {
        Some(Hit {
            t: t_near,
            normal: axis_normal(near_axis, -d[near_axis].signum()),
        })
    } else if t_far > t_min {
        Some(Hit {
            t: t_far,
            normal: axis_normal(far_axis, d[far_axis].signum()),
        })
    } else {
        None
    }
}

fn intersect_sphere(c: &Vec3, r: f64, o: &Vec3, d: &Vec3, t_min: f64) -> Option<Hit> {
    let oc = o - c;
    let a = d.dot(d);
    let b = 2.0 * d.dot(&oc);
    let cc = oc.dot(&oc) - r * r;
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (mut t0, mut t1) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, cc / q)
    };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    let t = if t0 > t_min {
        t0
    } else if t1 > t_min {
        t1
    } else {
        return None;
    };
    let p = o + d * t;
    Some(Hit {
        t,
        normal: (p - c) / r,
    })
}

fn intersect_wall(
    start: &[f64; 2],
    end: &[f64; 2],
    bottom: f64,
    top: f64,
    o: &Vec3,
    d: &Vec3,
    t_min: f64,
) -> Option<Hit> {
    let ex = end[0] - start[0];
    let ez = end[1] - start[1];
    let len2 = ex * ex + ez * ez;
    let len = len2.sqrt();
    let normal = Vec3::new(-ez / len, 0.0, ex / len);
    let denom = normal.dot(d);
    if denom == 0.0 {
        return None;
    }
    let to_plane = Vec3::new(start[0] - o.x, 0.0, start[1] - o.z);
    let t = normal.dot(&to_plane) / denom;
    if !(t > t_min) {
        return None;
    }
    let p = o + d * t;
    let s = ((p.x - start[0]) * ex + (p.z - start[1]) * ez) / len2;
    ((0.0..=1.0).contains(&s) && (bottom..=top).contains(&p.y)).then_some(Hit { t, normal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ground_hit_matches_closed_form() {
        let g = Primitive::ground(0.5);
        let o = Vec3::new(0.0, 1.4, 0.0);
        let d = Vec3::new(0.1, -0.05, 1.0);
        let hit = g.intersect(&o, &d, 0.0).unwrap();
        assert_abs_diff_eq!(hit.t, 1.4 / 0.05, epsilon = 1e-12);
        assert!(g.intersect(&o, &Vec3::new(0.0, 0.1, 1.0), 0.0).is_none());
        assert!(g.intersect(&o, &Vec3::z(), 0.0).is_none());
    }

    #[test]
    fn box_front_face_and_inside_exit() {
        let b = Primitive::cuboid([-1.0, -1.0, 5.0], [1.0, 1.0, 7.0], 0.5).unwrap();
        let hit = b.intersect(&Vec3::zeros(), &Vec3::z(), 0.0).unwrap();
        assert_eq!(hit.t, 5.0);
        assert_eq!(hit.normal, -Vec3::z());
        let inside = b.intersect(&Vec3::new(0.0, 0.0, 6.0), &Vec3::z(), 0.0).unwrap();
        assert_eq!(inside.t, 1.0);
        assert_eq!(inside.normal, Vec3::z());
        assert!(b.intersect(&Vec3::new(2.0, 0.0, 0.0), &Vec3::z(), 0.0).is_none());
    }

    #[test]
    fn sphere_hit_and_miss() {
        let s = Primitive::sphere([0.0, 0.0, 10.0], 2.0, 0.5).unwrap();
        let hit = s.intersect(&Vec3::zeros(), &Vec3::z(), 0.0).unwrap();
        assert_abs_diff_eq!(hit.t, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hit.normal.z, -1.0, epsilon = 1e-12);
        assert!(s.intersect(&Vec3::new(3.0, 0.0, 0.0), &Vec3::z(), 0.0).is_none());
    }

    #[test]
    fn wall_extent_limits_hits() {
        let w = Primitive::fronto_parallel_wall(10.0, -1.0, 1.0, 0.0, 2.0, 0.5).unwrap();
        let o = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(w.intersect(&o, &Vec3::z(), 0.0).unwrap().t, 10.0);
        assert!(w.intersect(&o, &Vec3::new(0.2, 0.0, 1.0), 0.0).is_none());
        assert!(w.intersect(&o, &Vec3::new(0.0, 0.2, 1.0), 0.0).is_none());
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(Primitive::cuboid([0.0; 3], [1.0, 0.0, 1.0], 0.5).is_err());
        assert!(Primitive::sphere([0.0; 3], 0.0, 0.5).is_err());
        assert!(Primitive::wall([0.0, 1.0], [0.0, 1.0], 0.0, 1.0, 0.5).is_err());
        assert!(Primitive::sphere([0.0; 3], 1.0, 1.5).is_err());
    }
}

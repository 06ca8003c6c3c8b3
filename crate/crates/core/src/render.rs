//! Lambertian shading of ray-cast frames under headlight illumination.
//!
//! For a visible point `P` with normal `n` and albedo `ρ`, the irradiance is
//!
//! ```text
//! E = power · I(α, ε) · max(0, cos θ) / r² · lit(P)
//!   + ambient_gain · ambient_lux
//!   + Σ_k power_k · max(0, cos θ_k) / r_k²
//! ```
//!
//! where `(α, ε)` and `r` are the projector angles and range of `P`. The
//! displayed value is `clamp(exposure · ρ · E)^(1/γ)`. Sky pixels only
//! receive the ambient term with unit albedo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, Rig, Vec3};
use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pattern::{apply_photometry, make_pattern, PatternKind, Phase, Photometry, PhotometryParams};
use crate::projector::angles_in_projector;
use crate::scene::{raycast, GBuffer, Primitive, Scene};
use crate::shadow::{render_shadow_map, ShadowConfig, ShadowMap};

/// Illumination used to render a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IlluminationKind {
    /// Checkerboard pattern.
    Led,
    /// High beam.
    Hb,
    /// Horizontal lines.
    Hl,
    /// Vertical lines.
    Vl,
}

impl IlluminationKind {
    pub const ALL: [IlluminationKind; 4] = [Self::Led, Self::Hb, Self::Hl, Self::Vl];

    pub fn pattern_kind(self) -> PatternKind {
        match self {
            Self::Led => PatternKind::Checkerboard,
            Self::Hb => PatternKind::HighBeam,
            Self::Hl => PatternKind::HLines,
            Self::Vl => PatternKind::VLines,
        }
    }

    pub fn from_pattern_kind(kind: PatternKind) -> Self {
        match kind {
            PatternKind::Checkerboard => Self::Led,
            PatternKind::HighBeam => Self::Hb,
            PatternKind::HLines => Self::Hl,
            PatternKind::VLines => Self::Vl,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Led => "led",
            Self::Hb => "hb",
            Self::Hl => "hl",
            Self::Vl => "vl",
        }
    }
}

impl std::str::FromStr for IlluminationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "led" => Ok(Self::Led),
            "hb" => Ok(Self::Hb),
            "hl" => Ok(Self::Hl),
            "vl" => Ok(Self::Vl),
            _ => Err(Error::Contract(format!("unknown illumination kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for IlluminationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadingParams {
    /// Multiplies the projector's own power.
    pub projector_power: f64,
    /// Irradiance per lux of ambient light.
    pub ambient_gain: f64,
    pub gamma: f64,
    pub exposure: f64,
    /// Standard deviation of additive Gaussian noise on display values.
    pub noise_sigma: f64,
}

impl Default for ShadingParams {
    /// Exposure puts a 10 m fronto-parallel wall of albedo 0.5 under full
    /// pattern intensity at 0.8 before gamma; 10 lux of ambient light on
    /// the same wall gives 0.1.
    fn default() -> Self {
        Self {
            projector_power: 1.0,
            ambient_gain: 1.25e-4,
            gamma: 2.2,
            exposure: 160.0,
            noise_sigma: 0.0,
        }
    }
}

impl ShadingParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.projector_power >= 0.0
            && self.ambient_gain >= 0.0
            && self.gamma > 0.0
            && self.exposure > 0.0
            && self.noise_sigma >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("invalid shading parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub seed: u64,
    pub illumination: IlluminationKind,
    pub cell_deg: f64,
    pub ambient_lux: f64,
    pub rig_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    /// Display intensities in [0, 1].
    pub image: Grid<f64>,
    /// Irradiance before albedo, exposure and gamma.
    pub irradiance: Grid<f64>,
    pub depth: DepthMap,
    pub meta: FrameMeta,
}

/// Shades a ray-cast frame. When `shadow` is `None` the shadow map is
/// rendered from `scene` with default settings.
pub fn shade(
    gbuffer: &GBuffer,
    scene: &Scene,
    rig: &Rig,
    photometry: &Photometry,
    params: &ShadingParams,
    shadow: Option<&ShadowMap>,
) -> Result<RenderedFrame> {
    params.validate()?;
    let dims = rig.camera.dims();
    gbuffer.depth.values().ensure_dims(dims)?;
    gbuffer.normals.ensure_dims(dims)?;
    gbuffer.albedo.ensure_dims(dims)?;

    let owned;
    let shadow = match shadow {
        Some(s) => s,
        None => {
            owned = render_shadow_map(scene, rig, &ShadowConfig::default());
            &owned
        }
    };

    let cam = &rig.camera;
    let proj = &rig.projector;
    let cam_to_proj = proj.pose.inverse();
    let proj_origin = proj.pose.translation;
    let power = proj.power * params.projector_power;
    let ambient = params.ambient_gain * scene.ambient_lux;
    let world_to_cam = rig.camera_pose.inverse();
    let lights: Vec<(Vec3, f64)> = scene
        .interferers
        .iter()
        .map(|l| (world_to_cam.transform_point(&l.position()), l.power))
        .collect();
    let display = |v: f64| v.clamp(0.0, 1.0).powf(1.0 / params.gamma);

    let (w, h) = dims;
    let rows: Vec<Vec<(f64, f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let Some(depth) = gbuffer.depth.get(x, y) else {
                        return (ambient, display(params.exposure * ambient));
                    };
                    let p = cam.pixel_ray(x, y) * depth;
                    let n = *gbuffer.normals.get(x, y);
                    let mut e = ambient;

                    let to_proj = proj_origin - p;
                    let r = to_proj.norm();
                    if let Ok((az, el)) = angles_in_projector(&cam_to_proj.transform_point(&p)) {
                        let cos = n.dot(&to_proj) / r;
                        if cos > 0.0 && shadow.is_lit(&p) {
                            e += power * photometry.sample(az, el) * cos / (r * r);
                        }
                    }
                    for (q, lp) in &lights {
                        let l = q - p;
                        let d2 = l.norm_squared();
                        let cos = n.dot(&l) / d2.sqrt();
                        if cos > 0.0 {
                            e += lp * cos / d2;
                        }
                    }
                    (e, display(params.exposure * gbuffer.albedo.get(x, y) * e))
                })
                .collect()
        })
        .collect();

    let (irradiance, mut image): (Vec<f64>, Vec<f64>) = rows.into_iter().flatten().unzip();
    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma).expect("finite sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed ^ 0x6e_6f69_7365);
        for v in &mut image {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }

    Ok(RenderedFrame {
        image: Grid::from_vec(w, h, image)?,
        irradiance: Grid::from_vec(w, h, irradiance)?,
        depth: gbuffer.depth.clone(),
        meta: FrameMeta {
            seed: scene.seed,
            illumination: IlluminationKind::from_pattern_kind(photometry.base.kind),
            cell_deg: photometry.base.cell_deg,
            ambient_lux: scene.ambient_lux,
            rig_hash: rig.hash(),
        },
    })
}

/// Half-width of the azimuth window, around the projector axis, in which
/// cell transitions are measured.
const MEASURE_HALF_WINDOW_DEG: f64 = 5.0;

/// Measures the metric side of pattern cells on a fronto-parallel wall at
/// camera depth `wall_z`.
///
/// Transitions are detected in the pre-gamma irradiance along the image row
/// through the middle of the cell row just above the projector axis,
/// restricted to ±5° of azimuth around the axis, and located to sub-pixel
/// precision by linear interpolation of the local mid-level crossing. The
/// result is the mean spacing of consecutive transitions, in meters on the
/// wall.
pub fn measure_cell_size(frame: &RenderedFrame, rig: &Rig, wall_z: f64, cell_deg: f64) -> Result<f64> {
    let cam = &rig.camera;
    frame.image.ensure_dims(cam.dims())?;
    let proj = &rig.projector;
    let o = proj.pose.translation;
    let axis = proj
        .pose
        .transform_vector(&crate::projector::direction_from_angles(0.0, cell_deg / 2.0));
    let t = (wall_z - o.z) / axis.z;
    let anchor = o + axis * t;
    let (_, v0) = cam
        .project(&anchor)
        .ok_or_else(|| Error::Measurement("wall is behind the camera".into()))?;
    if !(0.0..cam.height as f64).contains(&v0) {
        return Err(Error::Measurement(format!("pattern row {v0:.1} is outside the image")));
    }
    let y = v0.floor() as usize;
    let v = y as f64 + 0.5;
    let cam_to_proj = proj.pose.inverse();

    let wall_x = |u: f64| (u - cam.cx) / cam.fx * wall_z;
    let samples: Vec<(usize, f64)> = (0..cam.width)
        .filter(|&x| {
            let p = Vec3::new(wall_x(x as f64 + 0.5), (cam.cy - v) / cam.fy * wall_z, wall_z);
            angles_in_projector(&cam_to_proj.transform_point(&p))
                .is_ok_and(|(az, _)| az.abs() <= MEASURE_HALF_WINDOW_DEG)
        })
        .map(|x| (x, *frame.irradiance.get(x, y)))
        .collect();

    let (lo, hi) = samples
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), (_, s)| (lo.min(*s), hi.max(*s)));
    if samples.len() < 2 || !(hi > 0.0) || (hi - lo) < 0.05 * hi {
        return Err(Error::Measurement("no pattern transitions found".into()));
    }
    // The mid-level is taken over one cell on either side of each pair, so
    // the vignette falloff across the window does not shift crossings.
    let reach = (cam.fx * cell_deg.to_radians().tan()).ceil().max(1.0) as usize;
    let crossings: Vec<f64> = (0..samples.len() - 1)
        .filter(|&k| samples[k + 1].0 == samples[k].0 + 1)
        .filter_map(|k| {
            let local = &samples[k.saturating_sub(reach)..(k + 1 + reach).min(samples.len())];
            let (l, h) = local
                .iter()
                .fold((f64::MAX, f64::MIN), |(l, h), (_, s)| (l.min(*s), h.max(*s)));
            let mid = 0.5 * (l + h);
            let ((x, a), b) = (samples[k], samples[k + 1].1);
            ((a - mid) * (b - mid) < 0.0 && h - l > 0.05 * hi)
                .then(|| wall_x(x as f64 + 0.5 + (mid - a) / (b - a)))
        })
        .collect();
    if crossings.len() < 2 {
        return Err(Error::Measurement("fewer than two pattern transitions".into()));
    }
    Ok((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

/// Fronto-parallel wall at camera depth `z`, wide and tall enough to fill
/// any view used here.
pub fn wall_scene(z: f64, albedo: f64) -> Result<Scene> {
    Ok(Scene::new(vec![Primitive::fronto_parallel_wall(z, -1e4, 1e4, -1e4, 1e4, albedo)?]))
}

/// Camera used to measure cells: 1024×512 with `f = 1000` px, so a 0.5°
/// cell spans about 8.7 px.
pub fn measurement_camera() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 1000.0,
        fy: 1000.0,
        cx: 512.0,
        cy: 256.0,
        width: 1024,
        height: 512,
    }
}

/// Renders a checkerboard of `cell_deg` on a wall at depth `z` with the
/// default rig geometry and the measurement camera, and returns the
/// measured cell side in meters.
pub fn measure_wall_cells(z: f64, cell_deg: f64) -> Result<f64> {
    let rig = Rig::with_camera(measurement_camera());
    let scene = wall_scene(z, 0.5)?;
    let gbuffer = raycast(&scene, &rig.camera, &rig.camera_pose)?;
    let pattern = make_pattern(PatternKind::Checkerboard, cell_deg, &rig.projector, Phase::EvenOn)?;
    let photometry = apply_photometry(pattern, PhotometryParams::default())?;
    let frame = shade(&gbuffer, &scene, &rig, &photometry, &ShadingParams::default(), None)?;
    measure_cell_size(&frame, &rig, z, cell_deg)
}

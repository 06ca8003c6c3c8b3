//! Headlight illumination patterns and the lens photometry model.
//!
//! Patterns are defined analytically over projector angles and rasterized
//! to the native control matrix only for export. Rendering samples
//! [`Photometry`], the analytic pattern blurred by a field-dependent
//! Gaussian PSF and attenuated by a `cosⁿ` vignette.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::projector::ProjectorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Checkerboard,
    /// Horizontal stripes, alternating with elevation.
    HLines,
    /// Vertical stripes, alternating with azimuth.
    VLines,
    HighBeam,
}

/// Which parity of cell is switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    EvenOn,
    OddOn,
}

impl Phase {
    pub fn flipped(self) -> Self {
        match self {
            Phase::EvenOn => Phase::OddOn,
            Phase::OddOn => Phase::EvenOn,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Phase::EvenOn => 1.0,
            Phase::OddOn => -1.0,
        }
    }
}

/// ±1 square wave: +1 on cells with even index `floor(x / cell)`.
fn square(x: f64, cell: f64) -> f64 {
    if (x / cell).floor().rem_euclid(2.0) == 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub kind: PatternKind,
    pub cell_deg: f64,
    pub phase: Phase,
    /// `cols × rows` intensities in [0, 1]; row 0 is the lowest elevation.
    pub control: Grid<f64>,
    hfov_deg: f64,
    vfov_deg: f64,
}

impl Pattern {
    /// Analytic on/off value at `(az, el)` degrees, ignoring the frustum.
    pub fn value_at(&self, az_deg: f64, el_deg: f64) -> f64 {
        let p = self.phase.sign();
        let on = |s: f64| if p * s > 0.0 { 1.0 } else { 0.0 };
        match self.kind {
            PatternKind::HighBeam => 1.0,
            PatternKind::Checkerboard => {
                on(square(az_deg, self.cell_deg) * square(el_deg, self.cell_deg))
            }
            PatternKind::VLines => on(square(az_deg, self.cell_deg)),
            PatternKind::HLines => on(square(el_deg, self.cell_deg)),
        }
    }

    pub fn hfov_deg(&self) -> f64 {
        self.hfov_deg
    }

    pub fn vfov_deg(&self) -> f64 {
        self.vfov_deg
    }

    /// Mean of the control matrix.
    pub fn mean_intensity(&self) -> f64 {
        self.control.as_slice().iter().sum::<f64>() / self.control.len() as f64
    }

    /// Control matrix as an image: top row is the highest elevation,
    /// black = 0 %, white = 100 %.
    pub fn control_image(&self) -> Grid<f64> {
        let (w, h) = self.control.dims();
        Grid::from_fn(w, h, |x, y| *self.control.get(x, h - 1 - y))
    }
}

fn rasterize(kind: PatternKind, cell_deg: f64, proj: &ProjectorModel, phase: Phase) -> Pattern {
    let mut pattern = Pattern {
        kind,
        cell_deg,
        phase,
        control: Grid::filled(0, 0, 0.0),
        hfov_deg: proj.hfov_deg,
        vfov_deg: proj.vfov_deg,
    };
    pattern.control = Grid::from_fn(proj.cols, proj.rows, |c, r| {
        let (az, el) = proj.fractional_angles(c as f64 + 0.5, r as f64 + 0.5);
        pattern.value_at(az, el)
    });
    pattern
}

/// Builds a pattern and rasterizes it at the native pixel centers.
///
/// Lines and checkerboards need `cell_deg` at least as large as the coarser
/// grid pitch; smaller cells cannot be represented by the control matrix.
pub fn make_pattern(kind: PatternKind, cell_deg: f64, proj: &ProjectorModel, phase: Phase) -> Result<Pattern> {
    if !(cell_deg > 0.0) {
        return Err(Error::Domain(format!("cell size must be positive, got {cell_deg}")));
    }
    let min_cell = proj.pitch_h_deg().max(proj.pitch_v_deg());
    if kind != PatternKind::HighBeam && cell_deg < min_cell {
        return Err(Error::UnrepresentablePattern {
            cell_deg,
            min_cell_deg: min_cell,
        });
    }
    Ok(rasterize(kind, cell_deg, proj, phase))
}

/// Like [`make_pattern`] but accepts cells finer than the grid pitch, as a
/// higher-resolution headlight would project them. Rendering uses the
/// analytic form; the control matrix is an aliased sampling.
pub fn make_pattern_unchecked(kind: PatternKind, cell_deg: f64, proj: &ProjectorModel, phase: Phase) -> Result<Pattern> {
    if !(cell_deg > 0.0) {
        return Err(Error::Domain(format!("cell size must be positive, got {cell_deg}")));
    }
    Ok(rasterize(kind, cell_deg, proj, phase))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotometryParams {
    /// PSF standard deviation on the optical axis, degrees.
    pub psf_sigma0_deg: f64,
    /// Extra PSF width per unit of normalized field position, degrees.
    pub psf_sigma_slope: f64,
    /// Exponent `n` of the `cosⁿ` falloff with field angle.
    pub vignette_exponent: f64,
}

impl Default for PhotometryParams {
    fn default() -> Self {
        Self {
            psf_sigma0_deg: 0.05,
            psf_sigma_slope: 0.10,
            vignette_exponent: 4.0,
        }
    }
}

impl PhotometryParams {
    /// No blur, no vignette: sampling returns the analytic pattern.
    pub fn identity() -> Self {
        Self {
            psf_sigma0_deg: 0.0,
            psf_sigma_slope: 0.0,
            vignette_exponent: 0.0,
        }
    }
}

/// Realized angular intensity `I(α, ε)` of a pattern after the lens.
#[derive(Debug, Clone, PartialEq)]
pub struct Photometry {
    pub base: Pattern,
    pub params: PhotometryParams,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Square wave convolved with a Gaussian of width `sigma`.
fn blurred_square(x: f64, cell: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return square(x, cell);
    }
    let k_lo = ((x - 8.0 * sigma) / cell).floor() as i64;
    let k_hi = ((x + 8.0 * sigma) / cell).floor() as i64;
    let mut acc = 0.0;
    for k in k_lo..=k_hi {
        let lo = if k == k_lo {
            0.0
        } else {
            normal_cdf((k as f64 * cell - x) / sigma)
        };
        let hi = if k == k_hi {
            1.0
        } else {
            normal_cdf(((k + 1) as f64 * cell - x) / sigma)
        };
        let s = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        acc += s * (hi - lo);
    }
    acc
}

impl Photometry {
    /// PSF width at `(az, el)`.
    pub fn sigma_at(&self, az_deg: f64, el_deg: f64) -> f64 {
        let field = (az_deg.abs() / (self.base.hfov_deg / 2.0))
            .max(el_deg.abs() / (self.base.vfov_deg / 2.0));
        self.params.psf_sigma0_deg + self.params.psf_sigma_slope * field
    }

    /// `cosⁿ` of the angle between `(az, el)` and the optical axis.
    pub fn vignette(&self, az_deg: f64, el_deg: f64) -> f64 {
        let ta = az_deg.to_radians().tan();
        let te = el_deg.to_radians().tan();
        let cos = 1.0 / (1.0 + ta * ta + te * te).sqrt();
        cos.powf(self.params.vignette_exponent)
    }

    /// `I(α, ε)` in [0, 1]; zero outside the frustum.
    pub fn sample(&self, az_deg: f64, el_deg: f64) -> f64 {
        if az_deg.abs() > self.base.hfov_deg / 2.0 || el_deg.abs() > self.base.vfov_deg / 2.0 {
            return 0.0;
        }
        let sigma = self.sigma_at(az_deg, el_deg);
        let cell = self.base.cell_deg;
        let p = self.base.phase.sign();
        let blurred = match self.base.kind {
            PatternKind::HighBeam => 1.0,
            PatternKind::Checkerboard => {
                0.5 * (1.0
                    + p * blurred_square(az_deg, cell, sigma) * blurred_square(el_deg, cell, sigma))
            }
            PatternKind::VLines => 0.5 * (1.0 + p * blurred_square(az_deg, cell, sigma)),
            PatternKind::HLines => 0.5 * (1.0 + p * blurred_square(el_deg, cell, sigma)),
        };
        (self.vignette(az_deg, el_deg) * blurred).clamp(0.0, 1.0)
    }

    /// Intensity image over the frustum with `scale` samples per native
    /// pixel; top row is the highest elevation.
    pub fn image(&self, cols: usize, rows: usize, scale: usize) -> Grid<f64> {
        let (w, h) = (cols * scale, rows * scale);
        Grid::from_fn(w, h, |x, y| {
            let az = ((x as f64 + 0.5) / w as f64 - 0.5) * self.base.hfov_deg;
            let el = (0.5 - (y as f64 + 0.5) / h as f64) * self.base.vfov_deg;
            self.sample(az, el)
        })
    }
}

pub fn apply_photometry(pattern: Pattern, params: PhotometryParams) -> Result<Photometry> {
    if !(params.psf_sigma0_deg >= 0.0 && params.psf_sigma_slope >= 0.0 && params.vignette_exponent >= 0.0) {
        return Err(Error::Domain(format!("invalid photometry parameters {params:?}")));
    }
    Ok(Photometry {
        base: pattern,
        params,
    })
}

pub fn sample_intensity(ph: &Photometry, az_deg: f64, el_deg: f64) -> f64 {
    ph.sample(az_deg, el_deg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn checker(cell: f64) -> Pattern {
        make_pattern(PatternKind::Checkerboard, cell, &ProjectorModel::default(), Phase::EvenOn).unwrap()
    }

    #[test]
    fn high_beam_is_all_on() {
        let p = make_pattern(PatternKind::HighBeam, 0.5, &ProjectorModel::default(), Phase::EvenOn).unwrap();
        assert_eq!(p.control.len(), 3696);
        assert!(p.control.as_slice().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn checkerboard_parity() {
        let p = checker(0.5);
        assert_eq!(p.value_at(0.1, 0.1), 1.0);
        assert_eq!(p.value_at(0.6, 0.1), 0.0);
        // pixel (0, 0): floor(-34.735) + floor(-6.75) = -42, even
        assert_eq!(*p.control.get(0, 0), 1.0);
        let mean = p.mean_intensity();
        assert!((0.45..=0.55).contains(&mean), "mean {mean}");
    }

    #[test]
    fn lines_key_on_one_axis() {
        let proj = ProjectorModel::default();
        let v = make_pattern(PatternKind::VLines, 0.5, &proj, Phase::EvenOn).unwrap();
        let h = make_pattern(PatternKind::HLines, 0.5, &proj, Phase::EvenOn).unwrap();
        assert_eq!(v.value_at(0.1, 0.1), v.value_at(0.1, 0.7));
        assert_ne!(v.value_at(0.1, 0.1), v.value_at(0.7, 0.1));
        assert_eq!(h.value_at(0.1, 0.1), h.value_at(0.7, 0.1));
        assert_ne!(h.value_at(0.1, 0.1), h.value_at(0.1, 0.7));
    }

    #[test]
    fn cell_below_pitch_is_rejected() {
        let err = make_pattern(PatternKind::Checkerboard, 0.25, &ProjectorModel::default(), Phase::EvenOn)
            .unwrap_err();
        match err {
            Error::UnrepresentablePattern { min_cell_deg, .. } => {
                assert_abs_diff_eq!(min_cell_deg, 35.0 / 132.0, epsilon = 1e-12)
            }
            e => panic!("unexpected {e}"),
        }
        assert!(make_pattern(PatternKind::Checkerboard, 0.0, &ProjectorModel::default(), Phase::EvenOn).is_err());
        assert!(make_pattern_unchecked(PatternKind::Checkerboard, 0.125, &ProjectorModel::default(), Phase::EvenOn).is_ok());
    }

    #[test]
    fn flipped_phase_complements_control() {
        let proj = ProjectorModel::default();
        for kind in [PatternKind::Checkerboard, PatternKind::HLines, PatternKind::VLines] {
            let a = make_pattern(kind, 0.5, &proj, Phase::EvenOn).unwrap();
            let b = make_pattern(kind, 0.5, &proj, Phase::OddOn).unwrap();
            for (x, y) in a.control.as_slice().iter().zip(b.control.as_slice()) {
                assert_eq!(*x, 1.0 - y);
            }
        }
    }

    #[test]
    fn identity_photometry_reproduces_pattern() {
        let p = checker(0.5);
        let ph = apply_photometry(p.clone(), PhotometryParams::identity()).unwrap();
        assert_eq!(ph.sample(0.1, 0.1), 1.0);
        for k in 0..2000 {
            let az = -17.4 + 34.8 * (k as f64 * 0.618_034).fract();
            let el = -3.4 + 6.8 * (k as f64 * 0.414_214).fract();
            assert_eq!(ph.sample(az, el), p.value_at(az, el));
        }
    }

    #[test]
    fn outside_frustum_is_dark() {
        let ph = apply_photometry(checker(0.5), PhotometryParams::default()).unwrap();
        assert_eq!(sample_intensity(&ph, 18.0, 0.0), 0.0);
        assert_eq!(sample_intensity(&ph, 0.0, -3.6), 0.0);
    }

    #[test]
    fn high_beam_vignette_closed_form() {
        let hb = make_pattern(PatternKind::HighBeam, 0.5, &ProjectorModel::default(), Phase::EvenOn).unwrap();
        let ph = apply_photometry(hb, PhotometryParams::default()).unwrap();
        let ratio = ph.sample(17.5, 0.0) / ph.sample(0.0, 0.0);
        assert_abs_diff_eq!(ratio, 17.5f64.to_radians().cos().powi(4), epsilon = 1e-12);
        assert_abs_diff_eq!(ratio, 0.827_328_540_060, epsilon = 1e-9);
    }

    /// Midpoint-rule convolution of the square wave with a Gaussian.
    fn numeric_blur(x: f64, cell: f64, sigma: f64) -> f64 {
        let n = 20_000;
        let span = 10.0 * sigma;
        let dt = 2.0 * span / n as f64;
        (0..n)
            .map(|i| {
                let t = -span + (i as f64 + 0.5) * dt;
                let w = (-0.5 * (t / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                square(x - t, cell) * w * dt
            })
            .sum()
    }

    #[test]
    fn blurred_square_wave_is_bounded_and_odd_symmetric() {
        for k in 0..500 {
            let x = -3.0 + 6.0 * k as f64 / 500.0;
            let s = blurred_square(x, 0.5, 0.1);
            assert!((-1.0..=1.0).contains(&s));
            assert_abs_diff_eq!(s, numeric_blur(x, 0.5, 0.1), epsilon = 1e-6);
        }
        // on a boundary the blurred value is zero
        assert_abs_diff_eq!(blurred_square(0.5, 0.5, 0.1), 0.0, epsilon = 1e-12);
    }

    fn window_contrast(ph: &Photometry, az0: f64) -> f64 {
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for i in 0..=100 {
            for j in 0..=50 {
                let v = ph.sample(az0 + i as f64 * 0.01, j as f64 * 0.01);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        hi - lo
    }

    #[test]
    fn contrast_degrades_toward_the_edge() {
        let ph = apply_photometry(checker(0.5), PhotometryParams::default()).unwrap();
        assert!(window_contrast(&ph, 0.0) > window_contrast(&ph, 16.0));
        let mut prev = f64::INFINITY;
        for k in 0..9 {
            let c = window_contrast(&ph, 2.0 * k as f64);
            assert!(c <= prev + 1e-12, "contrast rose at {} deg", 2 * k);
            prev = c;
        }
    }

    #[test]
    fn negative_parameters_rejected() {
        let p = PhotometryParams {
            psf_sigma0_deg: -0.1,
            ..PhotometryParams::default()
        };
        assert!(apply_photometry(checker(0.5), p).is_err());
    }
}

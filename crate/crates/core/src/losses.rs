//! Depth training objective with analytic gradients.
//!
//! The total loss is `L = L_depth + λ1·L_grad + λ2·L_normal`, where all
//! three terms average over the `N` valid pixels:
//!
//! * `L_depth = mean |ln d − ln g|` (or plain L1),
//! * `L_grad = mean (|∇x d − ∇x g| + |∇y d − ∇y g|)`, optionally on log depth,
//! * `L_normal = mean |1 − cos(n_d, n_g)|` with `n = (−∇x a, −∇y a, 1)`.
//!
//! `∇` is a forward difference. A difference is only formed when both
//! pixels are valid; the last column and row, and differences that would
//! reach an invalid pixel, are zero. Logs use natural base with a
//! positivity floor `epsilon`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthVariant {
    #[default]
    LogL1,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradVariant {
    #[default]
    L1,
    LogL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub depth_variant: DepthVariant,
    pub grad_variant: GradVariant,
    pub use_normal: bool,
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            depth_variant: DepthVariant::LogL1,
            grad_variant: GradVariant::L1,
            use_normal: true,
            epsilon: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Contract("loss weights must be non-negative".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Contract("epsilon must be positive".into()));
        }
        Ok(())
    }

    /// The seven loss combinations of the ablation study, in table order.
    /// A disabled gradient term is expressed with `lambda1 = 0`.
    pub fn ablation_rows() -> [(&'static str, LossConfig); 7] {
        let base = LossConfig::default();
        let row = |depth_variant, grad: Option<GradVariant>, use_normal| LossConfig {
            depth_variant,
            grad_variant: grad.unwrap_or_default(),
            lambda1: if grad.is_some() { 1.0 } else { 0.0 },
            use_normal,
            ..base
        };
        use DepthVariant as D;
        use GradVariant as G;
        [
            ("l1", row(D::L1, None, false)),
            ("log_l1", row(D::LogL1, None, false)),
            ("log_l1+grad_l1", row(D::LogL1, Some(G::L1), false)),
            ("log_l1+grad_log_l1", row(D::LogL1, Some(G::LogL1), false)),
            ("log_l1+normal", row(D::LogL1, None, true)),
            ("log_l1+grad_log_l1+normal", row(D::LogL1, Some(G::LogL1), true)),
            ("log_l1+grad_l1+normal", row(D::LogL1, Some(G::L1), true)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub depth_term: f64,
    pub grad_term: f64,
    pub normal_term: f64,
    /// `∂total/∂d` per pixel; zero on invalid pixels.
    pub gradient: Grid<f64>,
}

/// Forward differences with replicate boundary: the last column of `∇x`
/// and the last row of `∇y` are zero.
pub fn spatial_gradients(a: &Grid<f64>) -> (Grid<f64>, Grid<f64>) {
    let (w, h) = a.dims();
    let gx = Grid::from_fn(w, h, |x, y| if x + 1 < w { a.get(x + 1, y) - a.get(x, y) } else { 0.0 });
    let gy = Grid::from_fn(w, h, |x, y| if y + 1 < h { a.get(x, y + 1) - a.get(x, y) } else { 0.0 });
    (gx, gy)
}

/// Masked forward differences: zero unless both pixels are valid.
fn masked_gradients(a: &Grid<f64>, valid: &Grid<bool>) -> (Grid<f64>, Grid<f64>) {
    let (w, h) = a.dims();
    let gx = Grid::from_fn(w, h, |x, y| {
        if x + 1 < w && *valid.get(x, y) && *valid.get(x + 1, y) {
            a.get(x + 1, y) - a.get(x, y)
        } else {
            0.0
        }
    });
    let gy = Grid::from_fn(w, h, |x, y| {
        if y + 1 < h && *valid.get(x, y) && *valid.get(x, y + 1) {
            a.get(x, y + 1) - a.get(x, y)
        } else {
            0.0
        }
    });
    (gx, gy)
}

/// Adds the adjoint of the masked forward difference applied to `(rx, ry)`.
fn accumulate_adjoint(rx: &Grid<f64>, ry: &Grid<f64>, valid: &Grid<bool>, out: &mut Grid<f64>) {
    let (w, h) = out.dims();
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w && *valid.get(x, y) && *valid.get(x + 1, y) {
                let r = *rx.get(x, y);
                *out.get_mut(x + 1, y) += r;
                *out.get_mut(x, y) -= r;
            }
            if y + 1 < h && *valid.get(x, y) && *valid.get(x, y + 1) {
                let r = *ry.get(x, y);
                *out.get_mut(x, y + 1) += r;
                *out.get_mut(x, y) -= r;
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Prepared {
    d: Grid<f64>,
    g: Grid<f64>,
    /// derivative of the floored depth with respect to the raw prediction
    d_floor: Grid<f64>,
    n: f64,
}

fn prepare(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, epsilon: f64) -> Result<Prepared> {
    d.ensure_dims(g.dims())?;
    mask.ensure_dims(g.dims())?;
    let n = mask.as_slice().iter().filter(|m| **m).count();
    if n == 0 {
        return Err(Error::NoPixels);
    }
    for ((dv, gv), m) in d.as_slice().iter().zip(g.as_slice()).zip(mask.as_slice()) {
        if *m && !(dv.is_finite() && gv.is_finite()) {
            return Err(Error::Domain(format!("non-finite depth on a valid pixel: pred {dv}, gt {gv}")));
        }
    }
    Ok(Prepared {
        d: d.map(|v| v.max(epsilon)),
        g: g.map(|v| v.max(epsilon)),
        d_floor: d.map(|v| if *v > epsilon { 1.0 } else { 0.0 }),
        n: n as f64,
    })
}

fn finish(p: &Prepared, mask: &Grid<bool>, mut grad: Grid<f64>) -> Grid<f64> {
    for ((gr, m), f) in grad.as_mut_slice().iter_mut().zip(mask.as_slice()).zip(p.d_floor.as_slice()) {
        *gr = if *m { *gr * f } else { 0.0 };
    }
    grad
}

fn depth_term(p: &Prepared, mask: &Grid<bool>, variant: DepthVariant) -> (f64, Grid<f64>) {
    let mut sum = 0.0;
    let grad = Grid::from_fn(p.d.width(), p.d.height(), |x, y| {
        if !*mask.get(x, y) {
            return 0.0;
        }
        let (d, g) = (*p.d.get(x, y), *p.g.get(x, y));
        match variant {
            DepthVariant::LogL1 => {
                let r = d.ln() - g.ln();
                sum += r.abs();
                sign(r) / (p.n * d)
            }
            DepthVariant::L1 => {
                let r = d - g;
                sum += r.abs();
                sign(r) / p.n
            }
        }
    });
    (sum / p.n, grad)
}

fn grad_term(p: &Prepared, mask: &Grid<bool>, variant: GradVariant) -> (f64, Grid<f64>) {
    let (td, tg) = match variant {
        GradVariant::L1 => (p.d.clone(), p.g.clone()),
        GradVariant::LogL1 => (p.d.map(|v| v.ln()), p.g.map(|v| v.ln())),
    };
    let (dx, dy) = masked_gradients(&td, mask);
    let (gx, gy) = masked_gradients(&tg, mask);
    let mut sum = 0.0;
    let (w, h) = td.dims();
    let mut rx = Grid::filled(w, h, 0.0);
    let mut ry = Grid::filled(w, h, 0.0);
    for i in 0..w * h {
        let ex = dx.as_slice()[i] - gx.as_slice()[i];
        let ey = dy.as_slice()[i] - gy.as_slice()[i];
        sum += ex.abs() + ey.abs();
        rx.as_mut_slice()[i] = sign(ex) / p.n;
        ry.as_mut_slice()[i] = sign(ey) / p.n;
    }
    let mut grad = Grid::filled(w, h, 0.0);
    accumulate_adjoint(&rx, &ry, mask, &mut grad);
    if variant == GradVariant::LogL1 {
        for (gr, d) in grad.as_mut_slice().iter_mut().zip(p.d.as_slice()) {
            *gr /= d;
        }
    }
    (sum / p.n, grad)
}

fn normal_term(p: &Prepared, mask: &Grid<bool>) -> (f64, Grid<f64>) {
    let (dx, dy) = masked_gradients(&p.d, mask);
    let (gx, gy) = masked_gradients(&p.g, mask);
    let (w, h) = p.d.dims();
    let mut rx = Grid::filled(w, h, 0.0);
    let mut ry = Grid::filled(w, h, 0.0);
    let mut sum = 0.0;
    for i in 0..w * h {
        if !mask.as_slice()[i] {
            continue;
        }
        let (ax, ay) = (dx.as_slice()[i], dy.as_slice()[i]);
        let (bx, by) = (gx.as_slice()[i], gy.as_slice()[i]);
        let na2 = ax * ax + ay * ay + 1.0;
        let na = na2.sqrt();
        let nb = (bx * bx + by * by + 1.0).sqrt();
        let dot = ax * bx + ay * by + 1.0;
        // 1 − cos = |n_d × n_g|² / (|n_d||n_g| (|n_d||n_g| + ⟨n_d, n_g⟩)),
        // exactly zero for identical normals and never negative
        let (cx, cy, cz) = (ay - by, bx - ax, ax * by - ay * bx);
        let nn = na * nb;
        sum += (cx * cx + cy * cy + cz * cz) / (nn * (nn + dot));
        // written so that identical normals cancel exactly
        let dcos_dax = (bx * na2 - dot * ax) / (na2 * nn);
        let dcos_day = (by * na2 - dot * ay) / (na2 * nn);
        rx.as_mut_slice()[i] = -dcos_dax / p.n;
        ry.as_mut_slice()[i] = -dcos_day / p.n;
    }
    let mut grad = Grid::filled(w, h, 0.0);
    accumulate_adjoint(&rx, &ry, mask, &mut grad);
    (sum / p.n, grad)
}

/// Depth term and its gradient.
pub fn loss_depth(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, variant: DepthVariant, epsilon: f64) -> Result<(f64, Grid<f64>)> {
    let p = prepare(d, g, mask, epsilon)?;
    let (v, gr) = depth_term(&p, mask, variant);
    Ok((v, finish(&p, mask, gr)))
}

/// Gradient-matching term and its gradient.
pub fn loss_grad(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, variant: GradVariant, epsilon: f64) -> Result<(f64, Grid<f64>)> {
    let p = prepare(d, g, mask, epsilon)?;
    let (v, gr) = grad_term(&p, mask, variant);
    Ok((v, finish(&p, mask, gr)))
}

/// Surface-normal cosine term and its gradient.
pub fn loss_normal(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, epsilon: f64) -> Result<(f64, Grid<f64>)> {
    let p = prepare(d, g, mask, epsilon)?;
    let (v, gr) = normal_term(&p, mask);
    Ok((v, finish(&p, mask, gr)))
}

pub fn loss_total(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, cfg: &LossConfig) -> Result<LossValue> {
    cfg.validate()?;
    let p = prepare(d, g, mask, cfg.epsilon)?;
    let (depth_v, mut gradient) = depth_term(&p, mask, cfg.depth_variant);
    let (grad_v, grad_g) = grad_term(&p, mask, cfg.grad_variant);
    let (normal_v, normal_g) = if cfg.use_normal {
        normal_term(&p, mask)
    } else {
        (0.0, Grid::filled(p.d.width(), p.d.height(), 0.0))
    };
    for ((t, a), b) in gradient.as_mut_slice().iter_mut().zip(grad_g.as_slice()).zip(normal_g.as_slice()) {
        *t += cfg.lambda1 * a + cfg.lambda2 * b;
    }
    Ok(LossValue {
        total: depth_v + cfg.lambda1 * grad_v + cfg.lambda2 * normal_v,
        depth_term: depth_v,
        grad_term: grad_v,
        normal_term: normal_v,
        gradient: finish(&p, mask, gradient),
    })
}

/// Which part of the objective a gradient check exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Total,
    Depth,
    Grad,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub tested: usize,
    pub excluded: usize,
}

/// Floor for the relative-error denominator.
pub const GRADCHECK_ABS_FLOOR: f64 = 1e-7;

/// The denominator is also floored at this multiple of the central
/// difference round-off level `ε·|L|/h`, so that analytic zeros are not
/// compared against pure round-off.
pub const GRADCHECK_NOISE_FACTOR: f64 = 1e5;

fn evaluate_term(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, cfg: &LossConfig, term: LossTerm) -> Result<(f64, Grid<f64>)> {
    match term {
        LossTerm::Total => loss_total(d, g, mask, cfg).map(|v| (v.total, v.gradient)),
        LossTerm::Depth => loss_depth(d, g, mask, cfg.depth_variant, cfg.epsilon),
        LossTerm::Grad => loss_grad(d, g, mask, cfg.grad_variant, cfg.epsilon),
        LossTerm::Normal => loss_normal(d, g, mask, cfg.epsilon),
    }
}

/// Pixels whose perturbation moves an absolute-value argument within
/// `10·h` of its kink.
fn near_kink(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, cfg: &LossConfig, term: LossTerm, h: f64) -> Grid<bool> {
    let (w, hgt) = d.dims();
    let lim = 10.0 * h;
    let mut out = Grid::filled(w, hgt, false);
    let uses_depth = matches!(term, LossTerm::Total | LossTerm::Depth);
    let uses_grad = term == LossTerm::Grad || (term == LossTerm::Total && cfg.lambda1 > 0.0);
    if uses_depth {
        for i in 0..w * hgt {
            let (dv, gv) = (d.as_slice()[i], g.as_slice()[i]);
            let r = match cfg.depth_variant {
                DepthVariant::LogL1 => dv.ln() - gv.ln(),
                DepthVariant::L1 => dv - gv,
            };
            if mask.as_slice()[i] && r.abs() < lim {
                out.as_mut_slice()[i] = true;
            }
        }
    }
    if uses_grad {
        let t = |a: &Grid<f64>| match cfg.grad_variant {
            GradVariant::L1 => a.clone(),
            GradVariant::LogL1 => a.map(|v| v.ln()),
        };
        let (dx, dy) = masked_gradients(&t(d), mask);
        let (gx, gy) = masked_gradients(&t(g), mask);
        for y in 0..hgt {
            for x in 0..w {
                if x + 1 < w && *mask.get(x, y) && *mask.get(x + 1, y) && (dx.get(x, y) - gx.get(x, y)).abs() < lim {
                    *out.get_mut(x, y) = true;
                    *out.get_mut(x + 1, y) = true;
                }
                if y + 1 < hgt && *mask.get(x, y) && *mask.get(x, y + 1) && (dy.get(x, y) - gy.get(x, y)).abs() < lim {
                    *out.get_mut(x, y) = true;
                    *out.get_mut(x, y + 1) = true;
                }
            }
        }
    }
    out
}

/// Central finite differences of `term` against its analytic gradient.
/// Returns the largest relative discrepancy over valid, kink-free pixels.
pub fn gradcheck_term(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, cfg: &LossConfig, term: LossTerm, h: f64) -> Result<GradcheckReport> {
    if !(h > 0.0) {
        return Err(Error::Contract("step must be positive".into()));
    }
    let (value, analytic) = evaluate_term(d, g, mask, cfg, term)?;
    let floor = GRADCHECK_ABS_FLOOR.max(GRADCHECK_NOISE_FACTOR * f64::EPSILON * value.abs() / h);
    let kinks = near_kink(d, g, mask, cfg, term, h);
    let mut probe = d.clone();
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        tested: 0,
        excluded: 0,
    };
    for i in 0..d.len() {
        if !mask.as_slice()[i] {
            continue;
        }
        let di = d.as_slice()[i];
        if kinks.as_slice()[i] || di - h <= cfg.epsilon {
            report.excluded += 1;
            continue;
        }
        probe.as_mut_slice()[i] = di + h;
        let (plus, _) = evaluate_term(&probe, g, mask, cfg, term)?;
        probe.as_mut_slice()[i] = di - h;
        let (minus, _) = evaluate_term(&probe, g, mask, cfg, term)?;
        probe.as_mut_slice()[i] = di;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.as_slice()[i];
        let rel = (numeric - a).abs() / numeric.abs().max(a.abs()).max(floor);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.tested += 1;
    }
    Ok(report)
}

pub fn gradcheck(d: &Grid<f64>, g: &Grid<f64>, mask: &Grid<bool>, cfg: &LossConfig, h: f64) -> Result<GradcheckReport> {
    gradcheck_term(d, g, mask, cfg, LossTerm::Total, h)
}

/// Smooth random depth map in `[lo, hi]`: a sum of a few low-frequency
/// sinusoids, rescaled. Used by the gradient-check fixtures.
pub fn smooth_random_map(width: usize, height: usize, lo: f64, hi: f64, rng: &mut impl rand::Rng) -> Grid<f64> {
    let waves: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                rng.random_range(0.05..0.6),
                rng.random_range(0.05..0.6),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.5..1.0),
            ]
        })
        .collect();
    let raw = Grid::from_fn(width, height, |x, y| {
        waves.iter().map(|[fx, fy, ph, a]| a * (fx * x as f64 + fy * y as f64 + ph).sin()).sum::<f64>()
    });
    let (mn, mx) = raw
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = (mx - mn).max(1e-12);
    raw.map(|v| lo + (hi - lo) * (v - mn) / span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn row(v: &[f64]) -> Grid<f64> {
        Grid::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn all(w: usize, h: usize) -> Grid<bool> {
        Grid::filled(w, h, true)
    }

    #[test]
    fn forward_difference_example() {
        let (gx, gy) = spatial_gradients(&row(&[1.0, 2.0, 4.0]));
        assert_eq!(gx.as_slice(), &[1.0, 2.0, 0.0]);
        assert_eq!(gy.as_slice(), &[0.0, 0.0, 0.0]);
        let (cx, cy) = spatial_gradients(&Grid::filled(4, 3, 2.5));
        assert!(cx.as_slice().iter().chain(cy.as_slice()).all(|v| *v == 0.0));
    }

    #[test]
    fn depth_examples() {
        let e = std::f64::consts::E;
        let (v, _) = loss_depth(&row(&[e * 3.0]), &row(&[3.0]), &all(1, 1), DepthVariant::LogL1, 1e-6).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        let (v, _) = loss_depth(&row(&[11.0, 18.0]), &row(&[10.0, 20.0]), &all(2, 1), DepthVariant::LogL1, 1e-6).unwrap();
        assert_abs_diff_eq!(v, 0.100_335_347_731_075_6, epsilon = 1e-12);
        let (v, gr) = loss_depth(&row(&[5.0, 6.0]), &row(&[5.0, 6.0]), &all(2, 1), DepthVariant::LogL1, 1e-6).unwrap();
        assert_eq!(v, 0.0);
        assert!(gr.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn grad_example() {
        let (v, _) = loss_grad(&row(&[1.0, 2.0, 4.0]), &row(&[1.0; 3]), &all(3, 1), GradVariant::L1, 1e-6).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn normal_closed_form() {
        // pixel 0: ∇d = (0, 0), ∇g = (1, 0); pixel 1 sits on the boundary
        let (v, _) = loss_normal(&row(&[3.0, 3.0]), &row(&[3.0, 4.0]), &all(2, 1), 1e-6).unwrap();
        assert_abs_diff_eq!(v, 0.292_893_218_813_452_5 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn total_is_sum_of_terms() {
        let d = row(&[1.0, 2.0, 4.0]);
        let g = row(&[1.0; 3]);
        let m = all(3, 1);
        let cfg = LossConfig::default();
        let v = loss_total(&d, &g, &m, &cfg).unwrap();
        let (a, _) = loss_depth(&d, &g, &m, cfg.depth_variant, cfg.epsilon).unwrap();
        let (b, _) = loss_grad(&d, &g, &m, cfg.grad_variant, cfg.epsilon).unwrap();
        let (c, _) = loss_normal(&d, &g, &m, cfg.epsilon).unwrap();
        assert_abs_diff_eq!(v.depth_term, a, epsilon = 1e-12);
        assert_abs_diff_eq!(v.grad_term, b, epsilon = 1e-12);
        assert_abs_diff_eq!(v.normal_term, c, epsilon = 1e-12);
        assert_abs_diff_eq!(v.total, a + b + c, epsilon = 1e-12);
    }

    #[test]
    fn truth_gives_zero_everywhere() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = smooth_random_map(9, 7, 1.0, 100.0, &mut rng);
        for (_, cfg) in LossConfig::ablation_rows() {
            let v = loss_total(&g, &g, &all(9, 7), &cfg).unwrap();
            assert_eq!(v.total, 0.0);
            assert!(v.gradient.as_slice().iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn empty_mask_and_bad_config() {
        let d = row(&[1.0, 2.0]);
        assert!(matches!(loss_depth(&d, &d, &Grid::filled(2, 1, false), DepthVariant::L1, 1e-6), Err(Error::NoPixels)));
        let cfg = LossConfig { lambda1: -1.0, ..LossConfig::default() };
        assert!(loss_total(&d, &d, &all(2, 1), &cfg).is_err());
        let cfg = LossConfig { epsilon: 0.0, ..LossConfig::default() };
        assert!(loss_total(&d, &d, &all(2, 1), &cfg).is_err());
    }

    #[test]
    fn invalid_pixels_get_zero_gradient() {
        let d = Grid::from_vec(3, 2, vec![1.0, 5.0, 2.0, 3.0, 8.0, 4.0]).unwrap();
        let g = Grid::filled(3, 2, 2.0);
        let m = Grid::from_vec(3, 2, vec![true, false, true, true, true, true]).unwrap();
        let v = loss_total(&d, &g, &m, &LossConfig::default()).unwrap();
        assert_eq!(*v.gradient.get(1, 0), 0.0);
    }

    #[test]
    fn ablation_rows_are_distinct() {
        let rows = LossConfig::ablation_rows();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                assert_ne!(rows[i].1, rows[j].1);
            }
        }
        assert_eq!(rows[6].1, LossConfig::default());
    }

    #[test]
    fn gradcheck_on_random_maps_with_holes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = smooth_random_map(16, 16, 1.0, 100.0, &mut rng);
        let g = smooth_random_map(16, 16, 1.0, 100.0, &mut rng);
        let m = Grid::from_fn(16, 16, |x, y| (x * 7 + y * 3) % 11 != 0);
        for (_, cfg) in LossConfig::ablation_rows() {
            for term in [LossTerm::Total, LossTerm::Depth, LossTerm::Grad, LossTerm::Normal] {
                let r = gradcheck_term(&d, &g, &m, &cfg, term, 1e-4).unwrap();
                assert!(r.max_rel_error < 1e-4, "{cfg:?} {term:?}: {r:?}");
                assert!(r.tested > 100);
            }
        }
    }

    #[test]
    fn gradcheck_at_truth_accepts_zero_subgradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = smooth_random_map(8, 8, 1.0, 100.0, &mut rng);
        let r = gradcheck(&g, &g, &all(8, 8), &LossConfig::default(), 1e-4).unwrap();
        // every pixel sits on a kink of the depth term
        assert_eq!(r.tested, 0);
        assert_eq!(r.excluded, 64);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn maps() -> impl Strategy<Value = (Grid<f64>, Grid<f64>)> {
            (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
                (
                    proptest::collection::vec(0.5f64..80.0, w * h),
                    proptest::collection::vec(0.5f64..80.0, w * h),
                )
                    .prop_map(move |(a, b)| (Grid::from_vec(w, h, a).unwrap(), Grid::from_vec(w, h, b).unwrap()))
            })
        }

        proptest! {
            #[test]
            fn terms_are_non_negative((d, g) in maps()) {
                let m = Grid::filled(d.width(), d.height(), true);
                for (_, cfg) in LossConfig::ablation_rows() {
                    let v = loss_total(&d, &g, &m, &cfg).unwrap();
                    prop_assert!(v.depth_term >= 0.0 && v.grad_term >= 0.0 && v.normal_term >= 0.0);
                    let sum = v.depth_term + cfg.lambda1 * v.grad_term + cfg.lambda2 * v.normal_term;
                    prop_assert!((v.total - sum).abs() <= 1e-12);
                }
            }

            #[test]
            fn shift_leaves_grad_and_normal_unchanged((d, g) in maps(), c in 0.0f64..20.0) {
                let m = Grid::filled(d.width(), d.height(), true);
                let (a, _) = loss_grad(&d, &g, &m, GradVariant::L1, 1e-6).unwrap();
                let (b, _) = loss_grad(&d.map(|v| v + c), &g.map(|v| v + c), &m, GradVariant::L1, 1e-6).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
                let (a, _) = loss_normal(&d, &g, &m, 1e-6).unwrap();
                let (b, _) = loss_normal(&d.map(|v| v + c), &g.map(|v| v + c), &m, 1e-6).unwrap();
                prop_assert!((a - b).abs() <= 1e-9);
            }

            #[test]
            fn log_depth_is_scale_invariant((d, g) in maps(), c in 0.1f64..10.0) {
                let m = Grid::filled(d.width(), d.height(), true);
                let (a, _) = loss_depth(&d, &g, &m, DepthVariant::LogL1, 1e-6).unwrap();
                let (b, _) = loss_depth(&d.map(|v| v * c), &g.map(|v| v * c), &m, DepthVariant::LogL1, 1e-6).unwrap();
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

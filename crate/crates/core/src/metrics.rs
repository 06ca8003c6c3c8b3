//! Depth evaluation: the nine standard error and accuracy metrics, region
//! masks and distance-binned reports.
//!
//! With `e = ln d − ln g` over the evaluated pixels:
//!
//! | metric   | definition                                  |
//! |----------|---------------------------------------------|
//! | rmse     | `sqrt(mean (d − g)²)`                        |
//! | abs_rel  | `mean |d − g| / g`                           |
//! | log10    | `mean |log10 d − log10 g|`                   |
//! | rmse_log | `sqrt(mean e²)`                              |
//! | silog    | `100 · sqrt(mean e² − w · (mean e)²)`, `w = 1` |
//! | sq_rel   | `mean (d − g)² / g`                          |
//! | delta_k  | fraction with `max(d/g, g/d) < 1.25^k`       |
//!
//! Sums use compensated (Neumaier) accumulation so that splitting the
//! pixels into frames and merging in any order gives the same result to
//! well below 1e-12.

use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Reference resolution of the region of interest.
pub const ROI_REFERENCE_SIZE: usize = 320;
/// Inclusive ROI bounds `(x0, x1, y0, y1)` at 320×320.
pub const ROI_BOUNDS: (usize, usize, usize, usize) = (20, 270, 165, 210);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Roi,
    OutsideRoi,
    Full,
    Custom,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roi" => Ok(Self::Roi),
            "outside" | "outside_roi" => Ok(Self::OutsideRoi),
            "full" => Ok(Self::Full),
            _ => Err(Error::Contract(format!("unknown mask {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMask {
    pub kind: MaskKind,
    mask: Grid<bool>,
}

fn scale_bound(b: usize, size: usize) -> usize {
    ((b as f64 * size as f64 / ROI_REFERENCE_SIZE as f64).round() as usize).min(size - 1)
}

impl EvalMask {
    pub fn custom(mask: Grid<bool>) -> Self {
        Self {
            kind: MaskKind::Custom,
            mask,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    pub fn grid(&self) -> &Grid<bool> {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.as_slice().iter().filter(|m| **m).count()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        *self.mask.get(x, y)
    }
}

/// Region mask at `width × height`. ROI bounds are scaled proportionally
/// from 320×320 and rounded to the nearest pixel.
pub fn roi_mask(kind: MaskKind, width: usize, height: usize) -> Result<EvalMask> {
    if width == 0 || height == 0 {
        return Err(Error::Contract("mask dimensions must be positive".into()));
    }
    let (x0, x1, y0, y1) = ROI_BOUNDS;
    let (x0, x1) = (scale_bound(x0, width), scale_bound(x1, width));
    let (y0, y1) = (scale_bound(y0, height), scale_bound(y1, height));
    let in_roi = |x: usize, y: usize| (x0..=x1).contains(&x) && (y0..=y1).contains(&y);
    let mask = match kind {
        MaskKind::Roi => Grid::from_fn(width, height, in_roi),
        MaskKind::OutsideRoi => Grid::from_fn(width, height, |x, y| !in_roi(x, y)),
        MaskKind::Full => Grid::filled(width, height, true),
        MaskKind::Custom => {
            return Err(Error::Contract("custom masks are built with EvalMask::custom".into()))
        }
    };
    Ok(EvalMask { kind, mask })
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Weight of the squared mean in SILog; 1 gives the scale-invariant
    /// standard deviation.
    pub silog_weight: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self { silog_weight: 1.0 }
    }
}

/// Mergeable sufficient statistics for the nine metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsAccumulator {
    n: usize,
    sq_err: CompensatedSum,
    abs_rel: CompensatedSum,
    sq_rel: CompensatedSum,
    log10: CompensatedSum,
    e: CompensatedSum,
    e2: CompensatedSum,
    within: [usize; 3],
}

const DELTA_THRESHOLDS: [f64; 3] = [1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];

impl MetricsAccumulator {
    /// Adds one pixel; both depths must be finite and positive.
    pub fn push(&mut self, d: f64, g: f64) -> Result<()> {
        if !(d > 0.0 && g > 0.0 && d.is_finite() && g.is_finite()) {
            return Err(Error::Domain(format!(
                "depths must be finite and positive, got pred {d}, gt {g}"
            )));
        }
        let diff = d - g;
        self.n += 1;
        self.sq_err.add(diff * diff);
        self.abs_rel.add(diff.abs() / g);
        self.sq_rel.add(diff * diff / g);
        self.log10.add((d.log10() - g.log10()).abs());
        let e = d.ln() - g.ln();
        self.e.add(e);
        self.e2.add(e * e);
        let ratio = (d / g).max(g / d);
        for (k, t) in DELTA_THRESHOLDS.iter().enumerate() {
            if ratio < *t {
                self.within[k] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.n += other.n;
        self.sq_err.merge(&other.sq_err);
        self.abs_rel.merge(&other.abs_rel);
        self.sq_rel.merge(&other.sq_rel);
        self.log10.merge(&other.log10);
        self.e.merge(&other.e);
        self.e2.merge(&other.e2);
        for k in 0..3 {
            self.within[k] += other.within[k];
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn report(&self, options: &MetricsOptions) -> Result<MetricsReport> {
        if self.n == 0 {
            return Err(Error::NoPixels);
        }
        let n = self.n as f64;
        let mean_e = self.e.value() / n;
        let mean_e2 = self.e2.value() / n;
        let var = (mean_e2 - options.silog_weight * mean_e * mean_e).max(0.0);
        Ok(MetricsReport {
            rmse: (self.sq_err.value() / n).sqrt(),
            abs_rel: self.abs_rel.value() / n,
            log10: self.log10.value() / n,
            rmse_log: mean_e2.sqrt(),
            silog: 100.0 * var.sqrt(),
            sq_rel: self.sq_rel.value() / n,
            delta1: self.within[0] as f64 / n,
            delta2: self.within[1] as f64 / n,
            delta3: self.within[2] as f64 / n,
            n_pixels: self.n,
            bins: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub abs_rel: f64,
    pub log10: f64,
    pub rmse_log: f64,
    pub silog: f64,
    pub sq_rel: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_pixels: usize,
    #[serde(default)]
    pub bins: Vec<BinReport>,
}

/// Metrics for ground-truth depths in `[lo, hi)`; `report` is `None` when
/// no pixel falls in the bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
    pub report: Option<MetricsReport>,
}

/// Metrics over explicit pixel lists. Every included pixel must hold a
/// finite positive depth in both arrays.
pub fn metrics_from_slices(pred: &[f64], gt: &[f64], include: &[bool], options: &MetricsOptions) -> Result<MetricsReport> {
    if pred.len() != gt.len() || pred.len() != include.len() {
        return Err(Error::Contract("pred, gt and mask must have the same length".into()));
    }
    let mut acc = MetricsAccumulator::default();
    for ((d, g), m) in pred.iter().zip(gt).zip(include) {
        if *m {
            acc.push(*d, *g)?;
        }
    }
    acc.report(options)
}

fn check_shapes(pred: &DepthMap, gt: &DepthMap, mask: &EvalMask) -> Result<()> {
    pred.values().ensure_dims(gt.dims())?;
    mask.grid().ensure_dims(gt.dims())
}

/// Pixels valid in both maps and inside the mask.
fn evaluated<'a>(pred: &'a DepthMap, gt: &'a DepthMap, mask: &'a EvalMask) -> impl Iterator<Item = (f64, f64)> + 'a {
    let pv = pred.valid().as_slice();
    let gv = gt.valid().as_slice();
    let pd = pred.values().as_slice();
    let gd = gt.values().as_slice();
    mask.grid()
        .as_slice()
        .iter()
        .enumerate()
        .filter(move |(i, m)| **m && pv[*i] && gv[*i])
        .map(move |(i, _)| (pd[i], gd[i]))
}

pub fn compute_metrics(pred: &DepthMap, gt: &DepthMap, mask: &EvalMask) -> Result<MetricsReport> {
    compute_metrics_with(pred, gt, mask, &MetricsOptions::default())
}

pub fn compute_metrics_with(pred: &DepthMap, gt: &DepthMap, mask: &EvalMask, options: &MetricsOptions) -> Result<MetricsReport> {
    FrameEvaluation::new(pred, gt, mask, None)?.overall.report(options)
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Contract(format!(
            "bin edges must be at least two strictly increasing values, got {edges:?}"
        )));
    }
    Ok(())
}

/// Default distance bins: 0 to 100 m in 10 m steps.
pub fn default_bin_edges() -> Vec<f64> {
    (0..=10).map(|k| 10.0 * k as f64).collect()
}

/// Per-bin metrics, binning each pixel by its ground-truth depth.
pub fn binned_metrics(pred: &DepthMap, gt: &DepthMap, mask: &EvalMask, edges: &[f64]) -> Result<Vec<BinReport>> {
    let eval = FrameEvaluation::new(pred, gt, mask, Some(edges))?;
    Ok(bin_reports(&eval.bins, &MetricsOptions::default()))
}

fn bin_reports(bins: &[(f64, f64, MetricsAccumulator)], options: &MetricsOptions) -> Vec<BinReport> {
    bins.iter()
        .map(|(lo, hi, acc)| BinReport {
            lo: *lo,
            hi: *hi,
            empty: acc.count() == 0,
            report: acc.report(options).ok(),
        })
        .collect()
}

/// Statistics of one frame, kept unreduced so frames can be pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEvaluation {
    pub overall: MetricsAccumulator,
    pub bins: Vec<(f64, f64, MetricsAccumulator)>,
}

impl FrameEvaluation {
    pub fn new(pred: &DepthMap, gt: &DepthMap, mask: &EvalMask, edges: Option<&[f64]>) -> Result<Self> {
        check_shapes(pred, gt, mask)?;
        let mut bins = match edges {
            Some(e) => {
                check_edges(e)?;
                e.windows(2).map(|w| (w[0], w[1], MetricsAccumulator::default())).collect()
            }
            None => Vec::new(),
        };
        let mut overall = MetricsAccumulator::default();
        for (d, g) in evaluated(pred, gt, mask) {
            overall.push(d, g)?;
            // bins are sorted; find the one with lo <= g < hi
            let k = bins.partition_point(|(lo, _, _)| *lo <= g);
            if k > 0 && g < bins[k - 1].1 {
                bins[k - 1].2.push(d, g)?;
            }
        }
        Ok(Self { overall, bins })
    }
}

/// How per-frame statistics combine into one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Every evaluated pixel of every frame weighs the same.
    #[default]
    Pool,
    /// Mean of per-frame metrics; frames without pixels are skipped.
    FrameMean,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pool" => Ok(Self::Pool),
            "frame" | "frame_mean" => Ok(Self::FrameMean),
            _ => Err(Error::Contract(format!("unknown aggregation {s:?}"))),
        }
    }
}

fn mean_reports(reports: &[MetricsReport]) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(Error::NoPixels);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| {
        let mut s = CompensatedSum::default();
        reports.iter().for_each(|r| s.add(f(r)));
        s.value() / n
    };
    Ok(MetricsReport {
        rmse: mean(|r| r.rmse),
        abs_rel: mean(|r| r.abs_rel),
        log10: mean(|r| r.log10),
        rmse_log: mean(|r| r.rmse_log),
        silog: mean(|r| r.silog),
        sq_rel: mean(|r| r.sq_rel),
        delta1: mean(|r| r.delta1),
        delta2: mean(|r| r.delta2),
        delta3: mean(|r| r.delta3),
        n_pixels: reports.iter().map(|r| r.n_pixels).sum(),
        bins: Vec::new(),
    })
}

/// Combines frames (in the given order) into one report with bins.
pub fn aggregate(frames: &[FrameEvaluation], mode: Aggregation, options: &MetricsOptions) -> Result<MetricsReport> {
    let n_bins = frames.first().map_or(0, |f| f.bins.len());
    if frames.iter().any(|f| f.bins.len() != n_bins) {
        return Err(Error::Contract("frames were binned differently".into()));
    }
    match mode {
        Aggregation::Pool => {
            let mut overall = MetricsAccumulator::default();
            let mut bins: Vec<(f64, f64, MetricsAccumulator)> = frames
                .first()
                .map(|f| f.bins.iter().map(|(lo, hi, _)| (*lo, *hi, MetricsAccumulator::default())).collect())
                .unwrap_or_default();
            for f in frames {
                overall.merge(&f.overall);
                for (b, fb) in bins.iter_mut().zip(&f.bins) {
                    b.2.merge(&fb.2);
                }
            }
            let mut report = overall.report(options)?;
            report.bins = bin_reports(&bins, options);
            Ok(report)
        }
        Aggregation::FrameMean => {
            let per_frame = |acc: &MetricsAccumulator| acc.report(options).ok();
            let overall: Vec<MetricsReport> = frames.iter().filter_map(|f| per_frame(&f.overall)).collect();
            let mut report = mean_reports(&overall)?;
            report.bins = (0..n_bins)
                .map(|k| {
                    let (lo, hi, _) = frames[0].bins[k];
                    let reports: Vec<MetricsReport> =
                        frames.iter().filter_map(|f| per_frame(&f.bins[k].2)).collect();
                    let r = mean_reports(&reports).ok();
                    BinReport {
                        lo,
                        hi,
                        empty: r.is_none(),
                        report: r,
                    }
                })
                .collect();
            Ok(report)
        }
    }
}

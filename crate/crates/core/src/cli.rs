//! Command-line interface of the `ledgen` binary.
//!
//! Exit codes: 0 success, 1 failed check, 2 contract error, 3 I/O or format
//! error, 64 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::camera::{CameraIntrinsics, Rig};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::{
    self, materialize_dataset, subset_manifest, verify_manifest, DatasetConfig, DatasetManifest, DepthFormat, Split,
    SubsetSpec,
};
use crate::losses::{gradcheck, smooth_random_map, LossConfig};
use crate::metrics::{aggregate, default_bin_edges, roi_mask, Aggregation, FrameEvaluation, MaskKind, MetricsOptions};
use crate::pattern::{apply_photometry, make_pattern, make_pattern_unchecked, Phase, PhotometryParams};
use crate::render::{measure_wall_cells, shade, wall_scene, IlluminationKind, ShadingParams};
use crate::scene::{gbuffer_from_depth, raycast, Scene};
use crate::shadow::{ShadowConfig, ShadowMap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONTRACT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LEDGEN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ledgen", version, about = "Structured-light headlight simulation and depth evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a paired dataset and its manifest.
    Generate(GenerateArgs),
    /// Shade a depth map or fronto-parallel walls under a pattern.
    Project(ProjectArgs),
    /// Evaluate predictions against a manifest.
    Eval(EvalArgs),
    /// Check analytic loss gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Subsample a manifest by fraction or illumination mix.
    Subset(SubsetArgs),
    /// Export a pattern's control matrix and photometry as PNG.
    Pattern(PatternArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON dataset configuration; flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated illumination kinds (led, hb, hl, vl).
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    /// Checkerboard or line cell size, degrees.
    #[arg(long)]
    cell: Option<f64>,
    /// Output image side, pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Render 1920×1080 and center-crop before resizing.
    #[arg(long)]
    full_res: bool,
    /// Also write camera-frame normal maps.
    #[arg(long)]
    normals: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Depth map (.pfm or 16-bit .png) to shade.
    #[arg(long, conflicts_with = "wall")]
    depth: Option<PathBuf>,
    /// Fronto-parallel wall distance, meters; repeatable.
    #[arg(long)]
    wall: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    cell: f64,
    #[arg(long, default_value = "led")]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    /// Image side for wall renders, pixels.
    #[arg(long, default_value_t = 320)]
    size: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskArg {
    Roi,
    Outside,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Pool,
    Frame,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding one `<id>.pfm` prediction per evaluated id.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, value_enum, default_value = "roi")]
    mask: MaskArg,
    /// Report distance bins; optional comma-separated edges in meters.
    #[arg(long, num_args = 0..=1, default_missing_value = "", value_name = "EDGES")]
    bins: Option<String>,
    #[arg(long, value_enum, default_value = "pool")]
    mode: ModeArg,
    /// Check manifest integrity before evaluating.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per loss configuration.
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SubsetArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    /// Illumination mix such as `led=0.1,hb=0.9`.
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhaseArg {
    Even,
    Odd,
}

#[derive(Debug, Args)]
struct PatternArgs {
    #[arg(long, default_value = "led")]
    kind: String,
    #[arg(long, default_value_t = 0.5)]
    cell: f64,
    #[arg(long, value_enum, default_value = "even")]
    phase: PhaseArg,
    #[arg(long)]
    out: PathBuf,
    /// Output pixels per headlight pixel.
    #[arg(long, default_value_t = 8)]
    scale: usize,
    /// Allow cells finer than the headlight pitch (sampled analytically).
    #[arg(long)]
    allow_subpitch: bool,
    #[arg(long)]
    json: bool,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(code) = configure_threads() {
        return code;
    }
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Project(a) => project(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Subset(a) => subset(a),
        Command::Pattern(a) => pattern(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else {
        EXIT_CONTRACT
    }
}

fn configure_threads() -> std::result::Result<(), i32> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => {
            eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
            return Err(EXIT_USAGE);
        }
    };
    // a pool that is already initialized keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("json output"));
}

fn parse_kind(s: &str) -> Result<IlluminationKind> {
    s.trim().parse()
}

fn generate(a: GenerateArgs) -> Result<i32> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: p.clone(),
                source,
            })?
        }
        None => DatasetConfig::default(),
    };
    if let Some(v) = a.count {
        cfg.count = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(k) = &a.kinds {
        cfg.kinds = k.iter().map(|s| parse_kind(s)).collect::<Result<_>>()?;
    }
    if let Some(v) = a.cell {
        cfg.cell_deg = v;
    }
    if let Some(v) = a.size {
        cfg.image_size = v;
    }
    cfg.full_res |= a.full_res;
    cfg.write_normals |= a.normals;

    let manifest = materialize_dataset(&cfg, &a.out)?;
    let summary = json!({
        "out": a.out,
        "manifest": a.out.join("manifest.json"),
        "entries": manifest.entries.len(),
        "counts": manifest.counts,
        "rig": manifest.rig,
    });
    if a.json {
        print_json(&summary);
    } else {
        println!(
            "wrote {} entries ({} train, {} val, {} test) to {}",
            manifest.entries.len(),
            manifest.counts.train,
            manifest.counts.val,
            manifest.counts.test,
            a.out.display()
        );
    }
    Ok(EXIT_OK)
}

/// Places images side by side with a white gutter; shorter images are
/// padded with black at the bottom.
fn side_by_side(images: &[Grid<f64>], gutter: usize) -> Grid<f64> {
    let h = images.iter().map(|i| i.height()).max().unwrap_or(0);
    let w = images.iter().map(|i| i.width()).sum::<usize>() + gutter * images.len().saturating_sub(1);
    let mut out = Grid::filled(w, h, 1.0);
    let mut x0 = 0;
    for img in images {
        for y in 0..h {
            for x in 0..img.width() {
                *out.get_mut(x0 + x, y) = if y < img.height() { *img.get(x, y) } else { 0.0 };
            }
        }
        x0 += img.width() + gutter;
    }
    out
}

fn project(a: ProjectArgs) -> Result<i32> {
    let kind = parse_kind(&a.kind)?;
    if a.depth.is_none() && a.wall.is_empty() {
        return Err(Error::Contract("project needs --depth or at least one --wall".into()));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let shading = ShadingParams::default();

    if let Some(depth_path) = &a.depth {
        let depth = io::read_depth(depth_path, DepthFormat::from_path(depth_path)?)?;
        let (w, h) = depth.dims();
        let f = w as f64;
        let cam = CameraIntrinsics::new(f, f, w as f64 / 2.0, h as f64 / 2.0, w, h)?;
        let rig = Rig::with_camera(cam);
        let gbuffer = gbuffer_from_depth(&depth, &rig.camera, 0.5)?;
        let points: Vec<_> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter_map(|(x, y)| depth.get(x, y).map(|d| rig.camera.pixel_ray(x, y) * d))
            .collect();
        let shadow = ShadowMap::from_points(&points, &rig.projector, &ShadowConfig::default());
        let pattern = make_pattern(kind.pattern_kind(), a.cell, &rig.projector, Phase::EvenOn)?;
        let photometry = apply_photometry(pattern, PhotometryParams::default())?;
        let frame = shade(&gbuffer, &Scene::empty(), &rig, &photometry, &shading, Some(&shadow))?;
        let out = a.out.join("projected.png");
        io::png::write_gray8(&out, &frame.image)?;
        let summary = json!({ "image": out, "illumination": kind, "cell_deg": a.cell });
        if a.json {
            print_json(&summary);
        } else {
            println!("wrote {}", out.display());
        }
        return Ok(EXIT_OK);
    }

    let rig = Rig::with_camera(CameraIntrinsics::square(a.size));
    let pattern = make_pattern(kind.pattern_kind(), a.cell, &rig.projector, Phase::EvenOn)?;
    let photometry = apply_photometry(pattern, PhotometryParams::default())?;
    let mut images = Vec::new();
    let mut walls = Vec::new();
    for z in &a.wall {
        if !(*z > 0.0) {
            return Err(Error::Contract(format!("wall distance must be positive, got {z}")));
        }
        let scene = wall_scene(*z, 0.5)?;
        let g = raycast(&scene, &rig.camera, &rig.camera_pose)?;
        let frame = shade(&g, &scene, &rig, &photometry, &shading, None)?;
        let path = a.out.join(format!("wall_{z}m.png"));
        io::png::write_gray8(&path, &frame.image)?;
        images.push(frame.image);
        let measured = if kind == IlluminationKind::Led {
            Some(measure_wall_cells(*z, a.cell)?)
        } else {
            None
        };
        walls.push(json!({
            "z": z,
            "image": path,
            "expected_cell_m": 2.0 * z * (a.cell / 2.0).to_radians().tan(),
            "measured_cell_m": measured,
        }));
    }
    let figure = a.out.join("walls.png");
    io::png::write_gray8(&figure, &side_by_side(&images, 8))?;
    let summary = json!({ "figure": figure, "illumination": kind, "cell_deg": a.cell, "walls": walls });
    if a.json {
        print_json(&summary);
    } else {
        for w in &walls {
            println!(
                "wall {} m: expected cell {:.4} m, measured {}",
                w["z"],
                w["expected_cell_m"].as_f64().unwrap_or(f64::NAN),
                w["measured_cell_m"].as_f64().map_or("n/a".to_string(), |m| format!("{m:.4} m"))
            );
        }
        println!("wrote {}", figure.display());
    }
    Ok(EXIT_OK)
}

fn parse_edges(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(default_bin_edges());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Contract(format!("bad bin edge {t:?}"))))
        .collect()
}

fn eval(a: EvalArgs) -> Result<i32> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let root = a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    if a.verify {
        verify_manifest(&manifest, &root)?;
    }
    let split: Split = a.split.parse()?;
    let [w, h] = manifest.image_size;
    let mask = roi_mask(
        match a.mask {
            MaskArg::Roi => MaskKind::Roi,
            MaskArg::Outside => MaskKind::OutsideRoi,
            MaskArg::Full => MaskKind::Full,
        },
        w,
        h,
    )?;
    let edges = a.bins.as_deref().map(parse_edges).transpose()?;
    let ids = manifest.ids(split);
    if ids.is_empty() {
        return Err(Error::Contract(format!("manifest has no {} entries", a.split)));
    }
    let frames: Vec<FrameEvaluation> = ids
        .par_iter()
        .map(|e| {
            let gt_path = io::manifest_path(&root, &e.depth_path);
            let gt = io::read_depth(&gt_path, DepthFormat::from_path(&gt_path)?)?;
            let pred = io::pfm::read_depth_pfm(&a.pred.join(format!("{}.pfm", e.id)))?;
            FrameEvaluation::new(&pred, &gt, &mask, edges.as_deref())
        })
        .collect::<Result<_>>()?;
    let mode = match a.mode {
        ModeArg::Pool => Aggregation::Pool,
        ModeArg::Frame => Aggregation::FrameMean,
    };
    let report = aggregate(&frames, mode, &MetricsOptions::default())?;
    if a.json {
        print_json(&report);
    } else {
        println!("{} frames, {} pixels", frames.len(), report.n_pixels);
        for (name, v) in [
            ("rmse", report.rmse),
            ("abs_rel", report.abs_rel),
            ("log10", report.log10),
            ("rmse_log", report.rmse_log),
            ("silog", report.silog),
            ("sq_rel", report.sq_rel),
            ("delta1", report.delta1),
            ("delta2", report.delta2),
            ("delta3", report.delta3),
        ] {
            println!("{name:>9}  {v:.6}");
        }
        for b in &report.bins {
            match &b.report {
                Some(r) => println!("[{:>5}, {:>5})  rmse {:.4}  n {}", b.lo, b.hi, r.rmse, r.n_pixels),
                None => println!("[{:>5}, {:>5})  empty", b.lo, b.hi),
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct GradcheckRow {
    config: &'static str,
    max_rel_error: f64,
    tested: usize,
}

fn gradcheck_cmd(a: GradcheckArgs) -> Result<i32> {
    if a.size < 2 || a.instances == 0 {
        return Err(Error::Contract("gradcheck needs size >= 2 and at least one instance".into()));
    }
    let rows: Vec<GradcheckRow> = LossConfig::ablation_rows()
        .into_iter()
        .enumerate()
        .map(|(k, (name, cfg))| {
            let mut rng = crate::seed::stream(a.seed, k as u64, "gradcheck");
            let mut row = GradcheckRow {
                config: name,
                max_rel_error: 0.0,
                tested: 0,
            };
            for _ in 0..a.instances {
                let d = smooth_random_map(a.size, a.size, 1.0, 100.0, &mut rng);
                let g = smooth_random_map(a.size, a.size, 1.0, 100.0, &mut rng);
                let mask = Grid::filled(a.size, a.size, true);
                let r = gradcheck(&d, &g, &mask, &cfg, a.step)?;
                row.max_rel_error = row.max_rel_error.max(r.max_rel_error);
                row.tested += r.tested;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let max = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let passed = max < a.tolerance;
    if a.json {
        print_json(&json!({ "seed": a.seed, "instances": a.instances, "max_rel_error": max, "passed": passed, "configs": rows }));
    } else {
        for r in &rows {
            println!("{:<28} {:.3e}  ({} pixels)", r.config, r.max_rel_error, r.tested);
        }
        println!("max discrepancy {max:.3e} ({})", if passed { "ok" } else { "FAILED" });
    }
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn parse_ratio(s: &str) -> Result<Vec<(IlluminationKind, f64)>> {
    s.split(',')
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Contract(format!("ratio term {part:?} is not kind=weight")))?;
            let w = v
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Contract(format!("bad ratio weight {v:?}")))?;
            Ok((parse_kind(k)?, w))
        })
        .collect()
}

fn subset(a: SubsetArgs) -> Result<i32> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let spec = SubsetSpec {
        fraction: a.fraction,
        ratio: a.ratio.as_deref().map(parse_ratio).transpose()?,
    };
    let mut out = subset_manifest(&manifest, &spec, a.seed)?;
    let src_root = a.manifest.parent().unwrap_or(Path::new("."));
    let dst_root = a.out.parent().unwrap_or(Path::new("."));
    if !same_dir(src_root, dst_root) {
        // paths stay valid from the new location
        let abs = |p: &str| -> Result<String> {
            let full = io::manifest_path(src_root, p);
            let full = std::fs::canonicalize(&full).map_err(|e| Error::io(&full, e))?;
            Ok(full.to_string_lossy().into_owned())
        };
        for e in &mut out.entries {
            e.image_path = abs(&e.image_path)?;
            e.depth_path = abs(&e.depth_path)?;
            if let Some(n) = &e.normal_path {
                e.normal_path = Some(abs(n)?);
            }
        }
    }
    out.save(&a.out)?;
    if a.json {
        print_json(&json!({ "manifest": a.out, "entries": out.entries.len(), "counts": out.counts }));
    } else {
        println!(
            "wrote {} entries ({} train) to {}",
            out.entries.len(),
            out.counts.train,
            a.out.display()
        );
    }
    Ok(EXIT_OK)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    let canon = |p: &Path| std::fs::canonicalize(if p.as_os_str().is_empty() { Path::new(".") } else { p }).ok();
    match (canon(a), canon(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

fn pattern(a: PatternArgs) -> Result<i32> {
    if a.scale == 0 {
        return Err(Error::Contract("scale must be positive".into()));
    }
    let kind = parse_kind(&a.kind)?;
    let proj = Rig::default().projector;
    let phase = match a.phase {
        PhaseArg::Even => Phase::EvenOn,
        PhaseArg::Odd => Phase::OddOn,
    };
    let pat = if a.allow_subpitch {
        make_pattern_unchecked(kind.pattern_kind(), a.cell, &proj, phase)?
    } else {
        make_pattern(kind.pattern_kind(), a.cell, &proj, phase)?
    };
    let control = pat.control_image();
    let upscaled = Grid::from_fn(control.width() * a.scale, control.height() * a.scale, |x, y| {
        *control.get(x / a.scale, y / a.scale)
    });
    let photometry = apply_photometry(pat, PhotometryParams::default())?;
    let ph_image = photometry.image(proj.cols, proj.rows, a.scale);
    let control_path = a.out.join("control.png");
    let photometry_path = a.out.join("photometry.png");
    io::png::write_gray8(&control_path, &upscaled)?;
    io::png::write_gray8(&photometry_path, &ph_image)?;
    let summary = json!({
        "illumination": kind,
        "cell_deg": a.cell,
        "grid": [proj.cols, proj.rows],
        "mean_control": control.as_slice().iter().sum::<f64>() / control.len() as f64,
        "control": control_path,
        "photometry": photometry_path,
    });
    if a.json {
        print_json(&summary);
    } else {
        println!("wrote {} and {}", control_path.display(), photometry_path.display());
    }
    Ok(EXIT_OK)
}

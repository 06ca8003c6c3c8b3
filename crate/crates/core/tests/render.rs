use ledgen::camera::Rig;
use ledgen::pattern::{apply_photometry, make_pattern, PatternKind, Phase, PhotometryParams};
use ledgen::render::{shade, RenderedFrame, ShadingParams};
use ledgen::scene::{generate_scene, raycast, Scene, SceneConfig};

fn render(rig: &Rig, scene: &Scene, kind: PatternKind) -> RenderedFrame {
    let g = raycast(scene, &rig.camera, &rig.camera_pose).unwrap();
    let pattern = make_pattern(kind, 0.5, &rig.projector, Phase::EvenOn).unwrap();
    let ph = apply_photometry(pattern, PhotometryParams::default()).unwrap();
    shade(&g, scene, rig, &ph, &ShadingParams::default(), None).unwrap()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn high_beam_frames_are_brighter_than_pattern_frames() {
    let rig = Rig::default();
    for seed in 0..5u64 {
        let scene = generate_scene(seed, &SceneConfig::default(), seed as u32).unwrap();
        let hb = render(&rig, &scene, PatternKind::HighBeam);
        for kind in [PatternKind::Checkerboard, PatternKind::HLines, PatternKind::VLines] {
            let led = render(&rig, &scene, kind);
            assert!(mean(hb.image.as_slice()) >= mean(led.image.as_slice()), "seed {seed} {kind:?}");
            for (a, b) in hb.irradiance.as_slice().iter().zip(led.irradiance.as_slice()) {
                assert!(a >= b);
            }
        }
    }
}

#[test]
fn frames_are_identical_across_thread_counts() {
    let rig = Rig::default();
    let scene = generate_scene(9, &SceneConfig::default(), 4).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| render(&rig, &scene, PatternKind::Checkerboard))
    };
    let (a, b) = (run(1), run(4));
    let bits = |f: &RenderedFrame| f.image.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.depth, b.depth);
}

#[test]
fn zero_baseline_lights_every_facing_pixel_in_the_frustum() {
    let rig = Rig::default().zero_baseline();
    let scene = generate_scene(5, &SceneConfig::default(), 0).unwrap();
    let frame = render(&rig, &scene, PatternKind::HighBeam);
    let g = raycast(&scene, &rig.camera, &rig.camera_pose).unwrap();
    let (w, h) = rig.camera.dims();
    let mut lit = 0;
    for y in 0..h {
        for x in 0..w {
            let Some(d) = g.depth.get(x, y) else { continue };
            let p = rig.camera.pixel_ray(x, y) * d;
            let (az, el) = ledgen::projector::angles_in_projector(&p).unwrap();
            if rig.projector.field_position(az, el) < 0.99 {
                lit += 1;
                assert!(*frame.irradiance.get(x, y) > 0.0, "pixel ({x}, {y})");
            }
        }
    }
    assert!(lit > 1000);
}

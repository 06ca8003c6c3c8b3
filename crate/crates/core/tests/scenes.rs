use ledgen::camera::Rig;
use ledgen::scene::{gbuffer_from_depth, generate_scene, raycast, raycast_depth, SceneConfig, MAX_AMBIENT_LUX};

/// Asymptotic Kolmogorov distribution tail, P(K > lambda).
fn kolmogorov_tail(lambda: f64) -> f64 {
    let mut p = 0.0;
    for k in 1..100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn ambient_light_is_uniform_over_seeds() {
    let config = SceneConfig::empty_road();
    let mut lux: Vec<f64> = (0..1000u64)
        .map(|s| generate_scene(s, &config, (s % 5) as u32).unwrap().ambient_lux)
        .collect();
    lux.sort_by(f64::total_cmp);
    let n = lux.len() as f64;
    let d = lux
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let cdf = x / MAX_AMBIENT_LUX;
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    let p = kolmogorov_tail((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d);
    assert!(p > 0.01, "KS statistic {d}, p = {p}");
}

#[test]
fn finite_difference_normals_match_analytic_normals() {
    let rig = Rig::default();
    let (w, h) = rig.camera.dims();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..5u64 {
        let scene = generate_scene(seed, &SceneConfig::default(), seed as u32).unwrap();
        let g = raycast(&scene, &rig.camera, &rig.camera_pose).unwrap();
        let fd = gbuffer_from_depth(&g.depth, &rig.camera, 0.5).unwrap();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let Some(id) = *g.primitive.get(x, y) else { continue };
                let n = *g.normals.get(x, y);
                // Smooth region: every neighbour on the same primitive with a
                // normal within 1° of this one.
                let smooth = (y - 1..=y + 1).all(|yy| {
                    (x - 1..=x + 1).all(|xx| {
                        *g.primitive.get(xx, yy) == Some(id) && g.normals.get(xx, yy).angle(&n).to_degrees() < 1.0
                    })
                });
                if !smooth {
                    continue;
                }
                checked += 1;
                worst = worst.max(fd.normals.get(x, y).angle(&n).to_degrees());
            }
        }
    }
    assert!(checked > 100_000, "{checked}");
    assert!(worst < 2.0, "worst normal error {worst}°");
}

#[test]
fn ray_casting_is_independent_of_thread_count() {
    let rig = Rig::default();
    let scene = generate_scene(3, &SceneConfig::default(), 3).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| raycast_depth(&scene, &rig.camera, &rig.camera_pose).unwrap())
    };
    let (d1, n1) = run(1);
    let (d4, n4) = run(4);
    assert_eq!(d1, d4);
    assert_eq!(n1, n4);
}

#[test]
fn generation_is_deterministic_per_seed_and_map() {
    let config = SceneConfig::default();
    for seed in [0u64, 7, 12345] {
        let a = generate_scene(seed, &config, 2).unwrap();
        let b = generate_scene(seed, &config, 2).unwrap();
        assert_eq!(a, b);
    }
    assert_ne!(generate_scene(1, &config, 0).unwrap(), generate_scene(2, &config, 0).unwrap());
}

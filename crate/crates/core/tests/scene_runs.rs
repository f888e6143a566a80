use segwall_core::particles::ParticleKind;
use segwall_core::scene::metrics::{read_blocks, read_index, read_soil_column, soil_path, blocks_path};
use segwall_core::scene::{bundled, run, run_metrics, RunOptions, SceneConfig};

const SMALL: &str = "\
[scene]
name = small
gravity = 0 -9.81 m/s2

[soil]
polygon = 0 0, 5 0, 5 4, 0 4 cm
spacing = 0.25 cm
unit_weight = 23 kN/m3
young_modulus = 1.5 MPa
poisson_ratio = 0.3
cohesion = 0 kPa
friction_angle = 19.8 deg
dilatancy_angle = 0 deg

[blocks]
width = 3.2 cm
height = 2.5 cm
unit_weight = 26.5 kN/m3
young_modulus = 69 GPa
poisson_ratio = 0.33
origin = 5 0 cm
courses = 2
overlap = 1.9 cm

[boundary]
base_length = 12 cm
young_modulus = 69 GPa
poisson_ratio = 0.33

[friction]
block_block = 0.62
block_base = 0.60
block_soil = 0.56

[solver]
t_end = 0.01 s
snapshot_interval = 0.005 s
settling_duration = 0.005 s

[stopper]
x = 8.2 cm
y_min = 0 cm
y_max = 4 cm
";

#[test]
fn bundled_scenes_match_the_reference_setup() {
    let six = SceneConfig::parse(bundled("paper_srw6").unwrap()).unwrap();
    assert_eq!(six.soil_particles().unwrap().len(), 11_304);
    assert_eq!(six.make_blocks().unwrap().len(), 6);
    let five = SceneConfig::parse(bundled("paper_srw5.scene").unwrap()).unwrap();
    assert_eq!(five.make_blocks().unwrap().len(), 5);
    assert!(bundled("paper_srw7").is_none());

    // bottom course flush with the soil toe, each course set back by 1.3 cm
    let rects = six.block_rectangles();
    assert!((rects[0].0.x - 0.50).abs() < 1e-12);
    assert!((rects[5].0.x - (0.50 - 5.0 * 0.013)).abs() < 1e-12);
    assert!((rects[5].1.y - 0.15).abs() < 1e-12);
}

#[test]
fn scene_survives_serialize_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SceneConfig::parse(bundled("paper_srw6").unwrap()).unwrap();
    let path = dir.path().join("copy.scene");
    std::fs::write(&path, cfg.serialize()).unwrap();
    assert_eq!(SceneConfig::load(&path).unwrap(), cfg);
}

#[test]
fn world_starts_in_settling_phase() {
    let mut cfg = SceneConfig::parse(SMALL).unwrap();
    let w = cfg.build_world().unwrap();
    assert!(w.blocks.iter().all(|b| !b.held));
    cfg.hold_blocks = true;
    assert!(cfg.build_world().unwrap().blocks.iter().all(|b| b.held));
    assert!(w.time < 0.0 && w.damping > 0.0);
    assert!(w.particles.kind.contains(&ParticleKind::Stopper));
    // static rows sit half a spacing outside the soil
    let base_y = (0..w.particles.len())
        .filter(|&i| w.particles.kind[i] == ParticleKind::Base)
        .map(|i| w.particles.position[i].y)
        .fold(f64::NAN, f64::max);
    assert!((base_y + 0.00125).abs() < 1e-12);
}

#[test]
fn small_run_outputs_are_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SceneConfig::parse(SMALL).unwrap();
    let summary = run(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(summary.snapshots, 3);
    assert!((summary.t_end - 0.01).abs() < 1e-12);
    assert_eq!(summary.soil_mass_initial, summary.soil_mass_final);
    assert!(summary.worst_coulomb_excess <= 1e-12);
    assert!(!summary.collapsed());

    let index = read_index(dir.path()).unwrap();
    assert_eq!(index.len(), 3);
    assert_eq!(index[0].1, 0.0);
    assert!((index[2].1 - 0.01).abs() < 1e-15);
    for (k, _) in &index {
        let mass: f64 = read_soil_column(&soil_path(dir.path(), *k), "mass").unwrap().iter().sum();
        // written with 9 significant digits
        assert!((mass - summary.soil_mass_initial).abs() <= 1e-8 * mass);
        let blocks = read_blocks(&blocks_path(dir.path(), *k)).unwrap();
        assert_eq!(blocks.len(), 2);
    }

    let metrics = run_metrics(dir.path(), None).unwrap();
    assert_eq!(metrics.rows.len(), 3);
    let r0 = metrics.rows[0].runout.unwrap();
    assert!((r0 - summary.runout_initial.unwrap()).abs() < 1e-8);
    assert!(!metrics.collapse.unwrap().collapsed);
}

#[test]
fn runs_are_deterministic() {
    let cfg = SceneConfig::parse(SMALL).unwrap();
    let read = |d: &std::path::Path| {
        (
            std::fs::read(soil_path(d, 2)).unwrap(),
            std::fs::read(blocks_path(d, 2)).unwrap(),
        )
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&cfg, &RunOptions::new(a.path())).unwrap();
    run(&cfg, &RunOptions::new(b.path())).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SceneConfig::parse(SMALL).unwrap();
    let mut opts = RunOptions::new(dir.path());
    opts.t_end = Some(0.004);
    opts.snapshot_interval = Some(0.002);
    let s = run(&cfg, &opts).unwrap();
    assert_eq!(s.snapshots, 3);
    let saved = SceneConfig::load(&dir.path().join("scene.scene")).unwrap();
    assert_eq!(saved.controls.t_end, 0.004);
}

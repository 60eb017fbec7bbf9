use surfphase::config::{ModelChoice, SimulationConfig, SurfaceChoice};
use surfphase::AppError;
use surfphase_core::ch::MobilityModel;

#[test]
fn empty_file_gives_defaults() {
    let cfg = SimulationConfig::parse("").unwrap();
    assert_eq!(cfg, SimulationConfig::default());
    assert_eq!(cfg.surface, SurfaceChoice::Sphere);
    assert_eq!(cfg.level, 3);
    assert_eq!(cfg.model, ModelChoice::Ch);
    assert_eq!(cfg.epsilon, 0.02);
    assert_eq!(cfg.diffusivity, 0.02);
    assert_eq!(cfg.ic_a, 0.5);
    assert_eq!(cfg.box_half_width, 5.0 / 3.0);
}

#[test]
fn negative_epsilon_names_the_key() {
    let err = SimulationConfig::parse("phys.epsilon = -1").unwrap_err();
    assert!(err.to_string().contains("phys.epsilon"), "{err}");
}

#[test]
fn torus_defaults() {
    let cfg = SimulationConfig::parse("surface = torus").unwrap();
    assert_eq!(cfg.surface, SurfaceChoice::Torus);
    assert_eq!((cfg.torus_r, cfg.torus_r_min, cfg.torus_r_max), (1.0, 0.3, 0.6));
    let d = surfphase::runner::discretize(&SimulationConfig { level: 2, ..cfg }).unwrap();
    assert!(d.area() > 0.0);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let text = "# comment\n\nmesh.level = 2\nfoo.bar = 1\n";
    match SimulationConfig::parse(text).unwrap_err() {
        AppError::Parse { line, msg } => {
            assert_eq!(line, 4);
            assert!(msg.contains("foo.bar"));
        }
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(SimulationConfig::parse("mesh.level 2"), Err(AppError::Parse { line: 1, .. })));
    assert!(matches!(SimulationConfig::parse("mesh.level = two"), Err(AppError::Parse { line: 1, .. })));
    assert!(matches!(SimulationConfig::parse("ic.seed = 1\nic.seed = 2"), Err(AppError::Parse { line: 2, .. })));
}

#[test]
fn comments_and_overrides() {
    let cfg = SimulationConfig::parse(
        "model = nsch   # flow on\nphys.rho1 = 2\nphys.rho2 = 2\nphys.mobility = degenerate\ntime.adaptive = false\n",
    )
    .unwrap();
    assert_eq!(cfg.model, ModelChoice::Nsch);
    assert_eq!(cfg.mixture().rho1, 2.0);
    assert_eq!(cfg.mobility_model(), MobilityModel::Degenerate);
    assert!(cfg.controller().is_none());
}

#[test]
fn validation_rules() {
    for (text, key) in [
        ("phys.rho1 = 0.5", "phys.rho1"),
        ("phys.eta2 = 0", "phys.eta2"),
        ("phys.D = -0.1", "phys.D"),
        ("ic.a = 1.5", "ic.a"),
        ("time.dt_min = 1\ntime.dt_max = 0.1", "time.dt_max"),
        ("torus.r_min = 0.7", "torus.r_max"),
        ("surface = cube", "surface"),
    ] {
        let err = SimulationConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains(key), "{text:?} gave {err}");
    }
}

#[test]
fn hash_tracks_physics_not_output_location() {
    let a = SimulationConfig::default();
    let b = SimulationConfig::parse("output.dir = elsewhere\noutput.wall_clock = true").unwrap();
    let c = SimulationConfig::parse("ic.seed = 1").unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 16);
}

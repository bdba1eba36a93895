use super::*;
use proptest::prelude::*;

#[test]
fn empty_text_gives_defaults() {
    let cfg = ExperimentConfig::parse("").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.base_grid().unwrap().nx(), 33);
}

#[test]
fn serialization_is_idempotent() {
    let text = r#"
seed = 4
out = "runs/a"

[grid]
nx = 17
nt = 60

[potential]
q1 = ["bump:0,1,2,0.5,0.5,0.5,0.25,0.3,0.3", "constant:0,0.1,0.1,0"]

[probe]
h = [0.5, 0.25]
"#;
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.grid.nt, Some(60));
    assert_eq!(cfg.potential.q1.terms().len(), 2);
    let once = cfg.to_text();
    let twice = ExperimentConfig::parse(&once).unwrap().to_text();
    assert_eq!(once, twice);
    assert_eq!(ExperimentConfig::parse(&once).unwrap(), cfg);
}

#[test]
fn invalid_configs_are_config_errors() {
    for text in [
        "bogus = 1",
        "[grid]\nnx = 4",
        "[grid]\nnx = 65\nnt = 100",
        "[probe]\nomega0 = [1.0, 1.0]",
        "[probe]\nh = [0.5, -0.1]",
        "[potential]\nq1 = \"bump:0,1,2\"",
        "[potential]\nq1 = \"wobble\"",
        "[simulate]\ncases = [\"nope\"]",
        "[probe]\nk1 = [[1.0, 0.0]]",
    ] {
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
}

#[test]
fn missing_potential_file_is_rejected_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[potential]\nq1 = \"file:nowhere.mwip\"\n").unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err();
    assert!(matches!(err, CliError::Config(ref s) if s.contains("does not exist")), "{err}");
}

#[test]
fn file_preset_reads_an_archive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse("[grid]\nnx = 9\nt_final = 1.0").unwrap();
    let grid = cfg.base_grid().unwrap();
    let q: MatrixPotential = PotentialSpec::One("constant:1,2,3,4".into())
        .build(2, &grid, dir.path())
        .unwrap();
    FieldArchive::from_potential(&q, &grid).unwrap().save(&dir.path().join("q.mwip")).unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[grid]\nnx = 9\nt_final = 1.0\n[potential]\nq1 = \"file:q.mwip\"\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    let (q1, _) = cfg.potentials(&grid).unwrap();
    assert_eq!(q1.eval(0.5, &[0.25, 0.75]).unwrap_err().to_string().contains("off-grid"), true);
    let x = grid.coord(10);
    let v = q1.eval(grid.time(2), &x).unwrap();
    assert_eq!(v, vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(4.0, 0.0)]);
}

#[test]
fn presets_parse_and_build() {
    let grid = Grid::with_min_steps(2, 33, 2.0).unwrap();
    let b: Preset = "bump:0,1,2,0.5,0.5,0.5,0.25,0.3,0.3".parse().unwrap();
    let q = b.build(2, &grid, Path::new(".")).unwrap();
    assert!(q.support().is_some());
    assert_eq!(q.eval(0.5, &[0.5, 0.5]).unwrap()[1], C64::new(2.0, 0.0));
    // Touching the boundary: no support box.
    let edge: Preset = "bump:0,0,1,0.5,0.1,0.5,0.4,0.3,0.3".parse().unwrap();
    assert!(edge.build(2, &grid, Path::new(".")).unwrap().support().is_none());
    let p: Preset = "plateau:0,1,5,0.8,0.4,0.4,1.2,0.6,0.6,0.2".parse().unwrap();
    let q = p.build(2, &grid, Path::new(".")).unwrap();
    assert_eq!(q.eval(1.0, &[0.5, 0.5]).unwrap()[1], C64::new(5.0, 0.0));
    assert!(q.support().is_some());
    assert!("bump:2,0,1,0.5,0.5,0.5,0.2,0.2,0.2".parse::<Preset>().unwrap().build(2, &grid, Path::new(".")).is_err());
    assert!("bump:0,0,1,0.5,0.5,0.2,0.2".parse::<Preset>().unwrap().build(2, &grid, Path::new(".")).is_err());
    assert!("constant:1,2,3".parse::<Preset>().unwrap().build(2, &grid, Path::new(".")).is_err());
    assert!("bump:0.5,0,1,0.5,0.5,0.2,0.2".parse::<Preset>().is_err());
}

#[test]
fn sweep_grids_keep_h_over_dx() {
    let cfg = ExperimentConfig::default();
    let nx: Vec<usize> = cfg.sweep.h.iter().map(|&h| cfg.sweep_grid(h).unwrap().nx()).collect();
    assert_eq!(nx, vec![17, 33, 65]);
    assert_eq!(cfg.refined_grid(1).unwrap().nx(), 65);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_over_random_configs(
        seed in any::<u64>(),
        nx in 9usize..80,
        t in 0.5f64..3.0,
        hs in prop::collection::vec(0.01f64..1.0, 0..4),
        eps in 0.0f64..0.2,
        amp in -10.0f64..10.0,
        blind in any::<bool>(),
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = seed;
        cfg.grid.nx = nx;
        cfg.grid.t_final = t;
        cfg.probe.h = hs;
        cfg.probe.epsilon = eps;
        cfg.modes.blind = blind;
        cfg.potential.q2 = PotentialSpec::Sum(vec![format!("constant:{amp},0,0,{amp}"), "zero".into()]);
        let text = cfg.to_text();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(parsed.to_text(), text);
    }
}

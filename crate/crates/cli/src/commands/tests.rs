use super::*;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.grid.nx = 17;
    cfg.probe.h = vec![0.5];
    cfg.cone.per_axis = 3;
    cfg.carleman.nx = 17;
    cfg.carleman.seeds = 2;
    cfg.carleman.audit_nx = vec![17];
    cfg
}

fn ctx(cfg: ExperimentConfig) -> (tempfile::TempDir, Context) {
    let dir = tempfile::tempdir().unwrap();
    let c = Context::new(cfg, dir.path().join("out")).unwrap();
    (dir, c)
}

#[test]
fn zero_case_writes_zero_archives() {
    let mut cfg = small();
    cfg.simulate.cases = vec!["zero".into(), "mms".into()];
    let (_d, c) = ctx(cfg);
    let files = run(Command::Simulate, &c).unwrap();
    assert_eq!(files.len(), 5);
    let u = FieldArchive::load(&c.path("simulate_zero_u.mwip")).unwrap().to_field().unwrap();
    assert_eq!(u.max_abs(), 0.0);
    let t = Table::read(&c.path("simulate.csv")).unwrap();
    assert_eq!(t.rows.len(), 4);
    let ratio = t.column("ratio").unwrap();
    assert_eq!(t.rows[0][ratio].parse::<f64>().unwrap(), 0.0);
    let order = t.column("order").unwrap();
    assert_eq!(t.rows[1][order], "NA");
    assert!(t.rows[3][order].parse::<f64>().unwrap() > 1.5);
}

#[test]
fn carleman_rows_cover_presets_seeds_and_weights() {
    let (_d, c) = ctx(small());
    run(Command::Carleman, &c).unwrap();
    let t = Table::read(&c.path("carleman.csv")).unwrap();
    assert_eq!(t.header, CARLEMAN_COLUMNS.to_vec());
    assert_eq!(t.rows.len(), 3 * 2 * 3);
    assert!(t.floats("ratio").iter().all(|r| r.is_finite() && *r > 0.0));

    let mut cfg = small();
    cfg.carleman.h.clear();
    let (_e, c) = ctx(cfg);
    run(Command::Carleman, &c).unwrap();
    let t = Table::read(&c.path("carleman.csv")).unwrap();
    assert!(t.rows.is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let read = |c: &Context| {
        let mut v: Vec<_> = fs::read_dir(&c.out)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_owned(), fs::read(&p).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let (_a, c1) = ctx(small());
    let (_b, c2) = ctx(small());
    for c in [&c1, &c2] {
        run(Command::Probe, c).unwrap();
        run(Command::Carleman, c).unwrap();
    }
    assert_eq!(read(&c1), read(&c2));
}

#[test]
fn equal_potentials_close_the_identity() {
    let mut cfg = small();
    cfg.potential.q2 = cfg.potential.q1.clone();
    let (_d, c) = ctx(cfg);
    run(Command::Identity, &c).unwrap();
    let t = Table::read(&c.path("identity.csv")).unwrap();
    assert_eq!(t.header, IDENTITY_COLUMNS.to_vec());
    let (gap, scale) = (t.floats("gap")[0], t.floats("scale")[0]);
    assert!(gap <= 1e-10 * scale.max(1.0), "gap {gap}, scale {scale}");
}

#[test]
fn reconstruct_writes_one_row_per_entry_and_frequency() {
    let (_d, c) = ctx(small());
    run(Command::Reconstruct, &c).unwrap();
    let points = cone_points(&c.config);
    let t = Table::read(&c.path("reconstruct_samples.csv")).unwrap();
    assert_eq!(t.rows.len(), 4 * points.len());
    assert!(t.column("partial_re").is_some());
    let e = Table::read(&c.path("reconstruct_errors.csv")).unwrap();
    assert_eq!(e.rows.len(), 4);
}

#[test]
fn unsupported_difference_is_a_config_error() {
    let mut cfg = small();
    cfg.potential.q1 = crate::config::PotentialSpec::One("constant:1".into());
    let (_d, c) = ctx(cfg);
    let err = run(Command::Reconstruct, &c).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn sweep_then_report() {
    let mut cfg = small();
    cfg.sweep.h = vec![0.5, 0.25];
    let (_d, c) = ctx(cfg);
    assert_eq!(run(Command::Report, &c).unwrap_err().exit_code(), 2);
    run(Command::Sweep, &c).unwrap();
    let d = Table::read(&c.path("decay.csv")).unwrap();
    let f = d.floats("final_term");
    let l = d.floats("lateral_term");
    assert!(f[1] < f[0] && l[1] < l[0], "{f:?} {l:?}");
    let files = run(Command::Report, &c).unwrap();
    assert_eq!(files, vec![c.path("report_decay_curves.csv")]);
    let r = Table::read(&files[0]).unwrap();
    assert_eq!(r.rows.len(), 4);
}

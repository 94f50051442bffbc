use super::*;

/// Small, fast configuration: 2 satellites with 2×2 arrays, 3 UTs.
fn tiny() -> ExperimentConfig {
    let mut arrays = ArrayConfig::default();
    arrays.sat_antennas = [2, 2];
    arrays.ut_antennas = [2, 2];
    ExperimentConfig {
        scenario: ScenarioConfig::standard(2, 3, 0),
        arrays,
        power_grid_dbw: vec![10.0, 15.0, 20.0],
        satellite_grid: vec![1, 2],
        variants: vec![Variant::RsmaScsi, Variant::SdmaScsi],
        mc_samples: 200,
        design_realizations: 2,
        num_drops: 2,
        seed: 7,
        output_dir: PathBuf::from("unused"),
        ..ExperimentConfig::default()
    }
}

#[test]
fn header_matches_row_serialization() {
    let table = ResultTable {
        rows: vec![ResultRow {
            sweep: Sweep::PowerDbw,
            value: 15.0,
            variant: Variant::RsmaScsi,
            drop: 0,
            mmfr_ub: Some(0.5),
            mmfr_true: Some(0.25),
            mmfr_stderr: Some(1e-3),
            iterations: Some(4),
            wall_time: 0.0,
            status: "ok".into(),
        }],
    };
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.next(), Some("power_dbw,15.0,rsma-scsi,0,0.5,0.25,0.001,4,0.0,ok"));
}

#[test]
fn empty_table_still_has_header() {
    let mut buf = Vec::new();
    ResultTable::default().write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
}

#[test]
fn persist_then_load_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        ResultRow {
            sweep: Sweep::Satellites,
            value: 4.0,
            variant: Variant::SdmaNoncoop,
            drop: 3,
            mmfr_ub: Some(0.1 + 0.2),
            mmfr_true: Some(std::f64::consts::PI / 7.0),
            mmfr_stderr: Some(1.234_567_890_123e-5),
            iterations: Some(17),
            wall_time: 0.0,
            status: "ok".into(),
        },
        ResultRow {
            sweep: Sweep::Satellites,
            value: 4.0,
            variant: Variant::RsmaIcsi,
            drop: 3,
            mmfr_ub: None,
            mmfr_true: None,
            mmfr_stderr: None,
            iterations: None,
            wall_time: 0.0,
            status: "error: conic solver stopped, \"quoted\"".into(),
        },
    ];
    let table = ResultTable { rows };
    let config = tiny();
    let sidecar = Sidecar::new(&config, Sweep::Satellites);
    persist(&table, &sidecar, dir.path()).unwrap();
    let (back, side) = load(dir.path()).unwrap();
    assert_eq!(back, table);
    assert_eq!(side, sidecar);
    assert_eq!(side.seed, 7);
    let raw = std::fs::read_to_string(dir.path().join(SIDECAR_FILE)).unwrap();
    assert!(raw.contains("\"seed\": 7"));
}

#[test]
fn load_reports_path_on_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    match load(dir.path()) {
        Err(Error::Io { path, .. }) => assert!(path.ends_with(RESULTS_FILE)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn wrong_header_is_a_format_error() {
    let text = "a,b\n1,2\n";
    let err = ResultTable::read_csv(text.as_bytes(), Path::new("x.csv")).unwrap_err();
    assert!(matches!(err, Error::Format { .. }));
}

#[test]
fn config_validation() {
    assert!(ExperimentConfig::default().validate().is_ok());
    let mut c = tiny();
    c.variants.clear();
    assert!(c.validate().is_err());
    let mut c = tiny();
    c.power_grid_dbw.clear();
    assert!(c.validate().is_err());
    let mut c = tiny();
    c.mc_samples = 99;
    assert!(c.validate().is_err());
    let mut c = tiny();
    c.satellite_grid = vec![0];
    assert!(c.validate().is_err());
}

#[test]
fn config_json_round_trip_and_defaults() {
    let c = tiny();
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    let minimal = r#"{
        "scenario": {"earth_radius_km": 6371.0, "altitude_km": 600.0, "max_nadir_deg": 30.0,
                     "num_satellites": 2, "num_uts": 3, "satellite_spacing_deg": 5.0, "rng_seed": 0},
        "power_grid_dbw": [15.0], "satellite_grid": [2], "variants": ["rsma-scsi"],
        "mc_samples": 100, "design_realizations": 2, "num_drops": 1, "seed": 3, "output_dir": "out"
    }"#;
    let c = ExperimentConfig::from_json(minimal).unwrap();
    assert_eq!(c.arrays, ArrayConfig::default());
    assert_eq!(c.sweep_power_dbw, 15.0);
    assert!(!c.record_wall_time);
    assert!(ExperimentConfig::from_json(&minimal.replace("\"seed\"", "\"sede\"")).is_err());
}

#[test]
fn partial_config_fills_defaults() {
    assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    let c = ExperimentConfig::from_json(r#"{"scenario": {"altitude_km": 1200.0, "num_uts": 3}}"#).unwrap();
    let expect = ScenarioConfig {
        altitude_km: 1200.0,
        num_uts: 3,
        ..ScenarioConfig::default()
    };
    assert_eq!(c.scenario.satellite_spacing_deg, expect.default_spacing_deg());
    assert!(c.scenario.satellite_spacing_deg > ScenarioConfig::default().satellite_spacing_deg);
    assert!(ExperimentConfig::from_json(r#"{"scenario": {"altitud_km": 1.0}}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"arrays": {"sat_antennas": [3, 3], "bogus": 1}}"#).is_err());
}

#[test]
fn drop_seeds_differ_between_drops() {
    let a = DropSeeds::new(1, 0);
    let b = DropSeeds::new(1, 1);
    assert_ne!(a, b);
    assert_eq!(a, DropSeeds::new(1, 0));
    assert_ne!(a.scenario, a.statistics);
}

#[test]
fn power_sweep_shape_and_determinism() {
    let c = tiny();
    let t1 = run_power_sweep(&c).unwrap();
    assert_eq!(t1.rows.len(), 3 * 2 * 2);
    assert_eq!(t1.failures(), 0);
    let summary = t1.summary();
    assert_eq!(summary.len(), 3 * 2);
    for pair in summary.chunks(2) {
        assert_eq!(pair[0].variant, Variant::RsmaScsi);
        assert!(pair[0].mmfr_ub >= pair[1].mmfr_ub - 1e-6);
    }
    for r in &t1.rows {
        assert!(r.mmfr_true.unwrap() <= r.mmfr_ub.unwrap() + 3.0 * r.mmfr_stderr.unwrap());
    }
    let t2 = run_power_sweep(&c).unwrap();
    let (mut b1, mut b2) = (Vec::new(), Vec::new());
    t1.write_csv(&mut b1).unwrap();
    t2.write_csv(&mut b2).unwrap();
    assert_eq!(b1, b2);
}

#[test]
fn satellite_sweep_has_one_point_per_count() {
    let mut c = tiny();
    c.num_drops = 1;
    c.variants = vec![Variant::RsmaScsi, Variant::RsmaNoncoop];
    let t = run_satellite_sweep(&c).unwrap();
    let summary = t.summary();
    assert_eq!(summary.len(), 2 * 2);
    assert_eq!(summary[0].value, 1.0);
    // A lone satellite cannot cooperate with anyone.
    assert!((summary[0].mmfr_true - summary[1].mmfr_true).abs() <= 2.0 * summary[0].mmfr_stderr + 1e-12);
}

#[test]
fn summary_averages_successful_drops() {
    let row = |drop, v: f64, status: &str| ResultRow {
        sweep: Sweep::PowerDbw,
        value: 5.0,
        variant: Variant::RsmaScsi,
        drop,
        mmfr_ub: Some(v),
        mmfr_true: Some(v / 2.0),
        mmfr_stderr: Some(0.3),
        iterations: Some(1),
        wall_time: 0.0,
        status: status.into(),
    };
    let t = ResultTable {
        rows: vec![row(0, 1.0, "ok"), row(1, 3.0, "ok"), row(2, 100.0, "error: x")],
    };
    let s = t.summary();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].drops, 2);
    assert_eq!(s[0].mmfr_ub, 2.0);
    assert_eq!(s[0].mmfr_true, 1.0);
    assert!((s[0].mmfr_stderr - (0.18f64).sqrt() / 2.0).abs() < 1e-15);
    assert_eq!(t.failures(), 1);
}

#[test]
fn dbw_conversion() {
    assert!((dbw_to_watts(15.0) - 31.622_776_601_683_793).abs() < 1e-12);
    assert_eq!(dbw_to_watts(0.0), 1.0);
}

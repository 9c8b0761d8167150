use hwr_core::density::Density;
use hwr_core::experiment::{
    config_hash, run_convergence, run_table1, sample_count, DimSpec, ExperimentConfig, LevelRange, SubsetPolicy, Table1Config,
    TestFunction, TwoStageConfig, VERSION,
};
use hwr_core::kde::BandwidthMethod;

#[test]
fn config_from_json() {
    let text = r#"{
        "function": "gauss",
        "dims": [{"name": "normal"}, {"name": "beta", "alpha": 0.5, "kde": {"method": "rot"}}],
        "order": 2,
        "levels": {"min": 1, "max": 3},
        "subsets": {"policy": "order", "nu": 1},
        "seeds": [4]
    }"#;
    let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.dims[1], DimSpec::estimated(Density::Beta { alpha: 0.5 }, BandwidthMethod::Rot));
    assert_eq!(cfg.subsets, SubsetPolicy::Order { nu: 1 });
    assert_eq!(cfg.test_multiplier, 3);
    assert_eq!(cfg.oversampling, 1.0);
    cfg.validate().unwrap();
    let table = run_convergence(&cfg).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert_eq!(table.rows[2].basis_size, 1 + 2 * 15);
    assert_eq!(table.rows[2].samples, sample_count(31, 1.0));
    let csv = table.to_csv();
    assert!(csv.lines().nth(1).unwrap().ends_with(&format!("{},{VERSION}", cfg.hash())));
}

#[test]
fn bad_configs_are_rejected() {
    let base = ExperimentConfig::new(TestFunction::Cube, vec![DimSpec::known(Density::Uniform)], 3, LevelRange::new(3, 5));
    let mut c = base.clone();
    c.levels = LevelRange::new(5, 3);
    assert!(c.validate().unwrap_err().is_config());
    let mut c = base.clone();
    c.seeds.clear();
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.subsets = SubsetPolicy::Order { nu: 2 };
    assert!(c.validate().is_err());
    let mut c = base;
    c.oversampling = -1.0;
    assert!(run_convergence(&c).unwrap_err().is_config());
    let mut t = TwoStageConfig::default();
    t.dims.pop();
    assert!(t.validate().is_err());
}

#[test]
fn hashes_distinguish_configs() {
    let a = ExperimentConfig::new(TestFunction::Exp, vec![DimSpec::known(Density::Normal)], 2, LevelRange::new(1, 4));
    let mut b = a.clone();
    b.seeds = vec![2];
    assert_ne!(config_hash(&a), config_hash(&b));
    assert_eq!(config_hash(&a), config_hash(&a.clone()));
}

#[test]
fn table1_layout() {
    let t = run_table1(&Table1Config { orders: vec![2], levels: LevelRange::new(2, 3) }).unwrap();
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,n,eta,mu_min,mu_max,config_hash,version");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("2,torus,"));
    assert!(run_table1(&Table1Config { orders: vec![0], levels: LevelRange::new(2, 3) }).is_err());
}

#[test]
fn rows_sorted_regardless_of_seed_order() {
    let mut cfg = ExperimentConfig::new(TestFunction::Interval, vec![DimSpec::known(Density::beta(2.0).unwrap())], 2, LevelRange::new(1, 3));
    cfg.seeds = vec![9, 2, 5];
    let t = run_convergence(&cfg).unwrap();
    let keys: Vec<(u32, u64)> = t.rows.iter().map(|r| (r.n, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(t.seed_slopes.iter().map(|s| s.0).collect::<Vec<_>>(), vec![2, 5, 9]);
}

use lopec::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use lopec::verify;
use lopec::Bounds;

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.world.field.count = 80;
    cfg.world.field.bounds = Bounds::new(250.0, 250.0).unwrap();
    cfg.collection.sessions = 3;
    cfg.collection.steps = 100;
    cfg.success.trials = 60;
    cfg.success.scale_prefixes = vec![1, 2, 3];
    cfg.cost.requests = 4;
    cfg.cost.runs = 3;
    cfg.cost.warmups = 1;
    cfg.cost.h_values = vec![2, 4];
    cfg.cost.brute_force_timeout_secs = 2.0;
    cfg.trajectory.walks = 10;
    cfg.trajectory.steps = 10;
    cfg.distribution.train_requests = 200;
    cfg.distribution.requests = 500;
    cfg.distribution.window = 100;
    cfg
}

#[test]
fn oracle_suites_pass() {
    for r in verify::run_all(1) {
        assert!(r.passed, "{}: {}", r.name, r.detail);
    }
}

#[test]
fn config_toml_roundtrip_and_partial_files() {
    let cfg = small_config();
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    let partial = ExperimentConfig::from_toml_str("[success]\ntrials = 7\n").unwrap();
    assert_eq!(partial.success.trials, 7);
    assert_eq!(partial.cost, ExperimentConfig::default().cost);
}

#[test]
fn config_rejects_bad_values() {
    for text in [
        "[success]\ntrials = 0\n",
        "[success]\nh_values = []\n",
        "[success]\nepsilons = [1.5]\n",
        "[success]\nscale_prefixes = [9]\n",
        "[cost]\nbogus = 1\n",
        "unknown_section = 3\n",
    ] {
        assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
    }
}

#[test]
fn overrides_address_nested_and_flattened_fields() {
    let cfg = ExperimentConfig::default()
        .with_override("success.trials=123")
        .unwrap()
        .with_override("world.count=50")
        .unwrap()
        .with_override("locator.k_aps=3")
        .unwrap()
        .with_override("trajectory.backend=PBL")
        .unwrap()
        .with_override("success.epsilons=[0.5, 1.0]")
        .unwrap();
    assert_eq!(cfg.success.trials, 123);
    assert_eq!(cfg.world.field.count, 50);
    assert_eq!(cfg.locator.params.k_aps, 3);
    assert_eq!(cfg.trajectory.backend, lopec::Backend::Pbl);
    assert_eq!(cfg.success.epsilons, vec![0.5, 1.0]);
    assert!(ExperimentConfig::default().with_override("success.trials").is_err());
    assert!(ExperimentConfig::default().with_override("success.trials=-1").is_err());
    // cross-field rules wait for validate
    let shrunk = ExperimentConfig::default()
        .with_override("collection.sessions=2")
        .unwrap();
    assert!(shrunk.validate().is_err());
    assert!(shrunk.with_override("success.scale_prefixes=[1, 2]").unwrap().validate().is_ok());
}

#[test]
fn experiment_names_parse() {
    for k in ExperimentKind::ALL {
        assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
    }
    assert!("nope".parse::<ExperimentKind>().is_err());
}

#[test]
fn every_experiment_is_reproducible_and_writes_its_files() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    for kind in ExperimentKind::ALL {
        let a = run_experiment(kind, &cfg, 17).unwrap();
        let b = run_experiment(kind, &cfg, 17).unwrap();
        assert_eq!(a.deterministic_csv().unwrap(), b.deterministic_csv().unwrap(), "{}", kind.name());
        assert!(!a.tables.is_empty());
        assert!(a.tables.iter().all(|t| !t.rows.is_empty()));
        let paths = a.write(dir.path()).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        assert!(paths
            .iter()
            .any(|p| p.file_name().unwrap().to_string_lossy() == format!("{}.csv", kind.name())));
        let c = run_experiment(kind, &cfg, 18).unwrap();
        assert_ne!(a.deterministic_csv().unwrap(), c.deterministic_csv().unwrap(), "{}", kind.name());
    }
}

#[test]
fn pinned_field_seed_fixes_the_world() {
    let mut cfg = small_config();
    cfg.world.seed = Some(99);
    let a = run_experiment(ExperimentKind::GraphQuality, &cfg, 1).unwrap();
    let b = run_experiment(ExperimentKind::GraphQuality, &cfg, 2).unwrap();
    assert_eq!(a.field_seed, 99);
    assert_eq!(a.graphs[0], b.graphs[0]);
}

use std::fs;

use spinn::harness::{
    persist_trial, run_sweep, run_trial, sweep_jobs, trial_data, ParamsSnapshot, SweepConfig,
    SweepVar, TrainConfig,
};
use spinn::metrics::{read_rows, SweepRow, SweepSummary, TrialResult};
use spinn::network::{init_xavier, Architecture};

fn tiny(problem: &str) -> TrainConfig {
    let mut c = TrainConfig::new(problem, 1, 6, 20, 30);
    c.seed = 3;
    c.optimizer.lbfgs.max_iterations = 40;
    c
}

#[test]
fn persisted_trial_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny("kdv");
    cfg.spinn = true;
    let art = run_trial(&cfg).unwrap();
    assert!(!art.diverged());
    let out = persist_trial(dir.path(), &art).unwrap();
    for f in ["config.json", "result.json", "params.json", "trace.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(out.join(format!("field_{}.csv", art.id())).is_file());

    let reloaded = TrainConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(reloaded, cfg);
    assert_eq!(reloaded.hash(), art.result.config_hash);
    let again = run_trial(&reloaded).unwrap();
    assert_eq!(again.result.errors, art.result.errors);
    assert_eq!(again.params, art.params);

    let text = fs::read_to_string(out.join("params.json")).unwrap();
    let snap: ParamsSnapshot = serde_json::from_str(&text).unwrap();
    assert_eq!(snap.params, art.params);
    let text = fs::read_to_string(out.join("result.json")).unwrap();
    let stored: TrialResult = serde_json::from_str(&text).unwrap();
    assert_eq!(stored.errors, art.result.errors);
    assert_eq!(stored.final_loss, art.result.final_loss);
}

#[test]
fn matched_seeds_share_data_and_init() {
    let sweep = SweepConfig {
        description: String::new(),
        base: tiny("heat"),
        sweep_var: SweepVar::NColloc,
        values: vec![20.0, 40.0],
        runs_per_cell: 2,
        master_seed: 17,
    };
    let jobs = sweep_jobs(&sweep);
    assert_eq!(jobs.len(), 8);
    for pair in jobs.chunks(2) {
        let (pinn, spinn) = (&pair[0].2, &pair[1].2);
        assert!(!pinn.spinn && spinn.spinn);
        assert_eq!(pinn.seed, spinn.seed);
        let problem = pinn.validate().unwrap();
        assert_eq!(
            trial_data(pinn, &problem).unwrap(),
            trial_data(spinn, &problem).unwrap()
        );
        let arch = Architecture::new(pinn.hidden_layers, pinn.neurons, 1).unwrap();
        assert_eq!(
            init_xavier(&arch, pinn.seed, &[]).unwrap(),
            init_xavier(&arch, spinn.seed, &[]).unwrap()
        );
    }
    let seeds: std::collections::BTreeSet<u64> = jobs.iter().map(|j| j.2.seed).collect();
    assert_eq!(seeds.len(), 4);
}

#[test]
fn sweep_writes_consistent_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = SweepConfig {
        description: "tiny".into(),
        base: tiny("kdv"),
        sweep_var: SweepVar::Neurons,
        values: vec![4.0, 6.0],
        runs_per_cell: 2,
        master_seed: 5,
    };
    let outcome = run_sweep(&sweep, Some(dir.path())).unwrap();
    assert_eq!(outcome.rows.len(), 8);
    let methods: Vec<&str> = outcome.rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods[..4], ["pinn", "spinn", "pinn", "spinn"]);

    let f = fs::File::open(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<SweepRow> = read_rows(f).unwrap();
    assert_eq!(rows, outcome.rows);
    let recomputed = SweepSummary::from_rows("kdv", "neurons", &rows);
    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let stored: SweepSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(stored, recomputed);
    for cell in &stored.cells {
        for s in [&cell.pinn, &cell.spinn] {
            let s = s.as_ref().unwrap();
            assert!(s.min <= s.mean && s.mean <= s.max);
        }
    }
    let trials = fs::read_dir(dir.path().join("trials")).unwrap().count();
    assert_eq!(trials, 8);
    let reloaded = SweepConfig::load(&dir.path().join("sweep.json")).unwrap();
    assert_eq!(reloaded, sweep);
}

#[test]
fn single_cell_sweep_is_two_trials() {
    let sweep = SweepConfig {
        description: String::new(),
        base: tiny("kdv"),
        sweep_var: SweepVar::NColloc,
        values: vec![30.0],
        runs_per_cell: 1,
        master_seed: 2,
    };
    let outcome = run_sweep(&sweep, None).unwrap();
    assert_eq!(outcome.rows.len(), 2);
    for t in &outcome.trials {
        let cfg: TrainConfig = serde_json::from_value(t.result.config.clone()).unwrap();
        let direct = run_trial(&cfg).unwrap();
        assert_eq!(direct.result.errors, t.result.errors);
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = SweepConfig::load(&path).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        for (_, _, c) in sweep_jobs(&cfg) {
            c.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
        n += 1;
    }
    assert!(n >= 10);
}

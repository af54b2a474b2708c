use std::fs;
use std::process::Command;

fn spinn() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinn"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn unknown_problem_is_a_config_error() {
    let out = spinn().args(["trial", "--problem", "wave"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wave"));
}

#[test]
fn malformed_sweep_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    fs::write(&path, r#"{"base": {"problem": "kdv"}}"#).unwrap();
    let out = spinn()
        .args(["sweep", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trial_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinn()
        .args([
            "trial", "--problem", "heat", "--hidden-layers", "1", "--neurons", "5", "--n-u", "20",
            "--n-colloc", "30", "--spinn", "--seed", "7", "--max-iter", "20", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["seed"], 7);
    assert_eq!(result["config"]["spinn"], true);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn divergence_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"problem": "inverse_burgers", "hidden_layers": 1, "neurons": 4, "n_u": 50,
            "spinn": false, "seed": 1, "lambda_init": [1e300, 1e300]}"#,
    )
    .unwrap();
    let out = spinn().args(["inverse", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(result["failure"].is_string());
}

#[test]
fn report_costs_reads_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let empty = spinn().args(["report-costs", "--in"]).arg(dir.path()).output().unwrap();
    assert_eq!(empty.status.code(), Some(2));

    let sub = dir.path().join("kdv");
    fs::create_dir(&sub).unwrap();
    fs::write(
        sub.join("sweep.csv"),
        "problem,method,sweep_var,value,seed,error_u,error_v,seconds,config_hash\n\
         kdv,pinn,n_colloc,50,1,0.001,,4.0,a\n\
         kdv,spinn,n_colloc,50,1,0.0005,,3.0,b\n",
    )
    .unwrap();
    let out = spinn().args(["report-costs", "--in"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0.750"), "{text}");
    assert!(text.contains("0.50 to 1.26"));
}

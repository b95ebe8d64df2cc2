use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ogd-poison"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen_data(dir: &Path) -> String {
    let path = dir.join("data.csv");
    let p = path.to_str().unwrap().to_owned();
    let o = run(&["gen", "--n", "400", "--seed", "3", "--out", &p]);
    assert!(o.status.success(), "{o:?}");
    p
}

fn semi_args<'a>(data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "semi",
        "--dataset",
        data,
        "--init",
        "60",
        "--train",
        "200",
        "--test",
        "100",
        "--defense",
        "slab",
        "--attack",
        "simplistic",
        "--attack",
        "greedy",
        "--percentiles",
        "20,100",
        "--budget",
        "30",
        "--eta",
        "0.1",
        "--out-dir",
        out,
    ]
}

#[test]
fn help_lists_subcommands() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for sub in ["gen", "semi", "fully", "regime", "verify"] {
        assert!(text.contains(sub), "missing {sub} in help");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["semi", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["semi", "--defense", "moat"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["semi", "--dataset", "/no/such/file.csv", "--out-dir", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn semi_writes_results_and_plot_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&semi_args(&data, out.to_str().unwrap()));
        assert!(o.status.success(), "{o:?}");
    }
    let csv_a = std::fs::read(a.join("semi.csv")).unwrap();
    let csv_b = std::fs::read(b.join("semi.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("# {"));
    // config line, header, 2 percentiles x 2 attacks
    assert_eq!(text.lines().count(), 2 + 4);
    let svg = std::fs::read_to_string(a.join("semi.svg")).unwrap();
    assert!(svg.contains("<svg"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"budget": 5, "percentiles": [50.0], "defense": "centroid"}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "semi",
        "--dataset",
        &data,
        "--train",
        "200",
        "--test",
        "100",
        "--config",
        cfg.to_str().unwrap(),
        "--attack",
        "simplistic",
        "--budget",
        "7",
        "--format",
        "json",
        "--no-plot",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("semi.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["budget"], 7);
    assert_eq!(v["config"]["defense"], "centroid");
    assert_eq!(v["records"].as_array().unwrap().len(), 1);
    assert!(!out.join("semi.svg").exists());
}

#[test]
fn fully_respects_out_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let o = bin()
        .env("OGD_POISON_OUT_DIR", &out)
        .args([
            "fully",
            "--defense",
            "centroid",
            "--attack",
            "simplistic",
            "--retention",
            "0.5,1",
            "--horizon",
            "100",
            "--seeds",
            "0,1",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(out.join("fully.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 4);
    assert!(out.join("fully.svg").exists());
}

#[test]
fn regime_reports_hard_and_easy() {
    let o = run(&[
        "regime",
        "--defense",
        "centroid",
        "--radius",
        "5",
        "--tau",
        "1",
        "--mu-plus=-2,0",
        "--mu-minus=2,0",
        "--theta-tilde0=-1,0",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("regime: hard"));
    let o = run(&[
        "regime",
        "--defense",
        "l2",
        "--radius",
        "1",
        "--theta-tilde0=1,0",
    ]);
    assert!(stdout(&o).starts_with("regime: easy"));
}

#[test]
fn regime_rejects_half_the_centroids() {
    let o = run(&[
        "regime",
        "--defense",
        "slab",
        "--radius",
        "1",
        "--mu-plus=1,0",
        "--theta-tilde0=1,0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_subset_passes() {
    let o = run(&["verify", "--only", "property", "--only", "intermediate"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    let o = run(&["verify", "--only", "nothing by this name"]);
    assert_eq!(o.status.code(), Some(2));
}

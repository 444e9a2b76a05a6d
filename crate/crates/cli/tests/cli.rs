use std::path::Path;
use std::process::Command;

use hybridpnt_cli::{RunConfig, RunManifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybridpnt"))
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut c = RunConfig::paper_defaults();
    c.scenario.users.truncate(2);
    c.scenario.duration = 60.0;
    c.campaign.trials = 2;
    c.coop_fit.tx_heights = vec![6.0];
    c.coop_fit.rx_heights = vec![1.0];
    c.coop_fit.curve_points = 50;
    let p = dir.join("config.json");
    std::fs::write(&p, c.to_json()).unwrap();
    p
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn invalid_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::paper_defaults();
    c.scenario.users[1].antenna_height = 0.0;
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, c.to_json()).unwrap();
    let out = tmp.path().join("out");
    let r = bin()
        .args(["link-budget", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("scenario.users[1].antenna_height"));
    assert!(!out.exists());
}

#[test]
fn malformed_json_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "{\"seed\": }").unwrap();
    let r = bin().args(["print-config", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn unknown_case_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = bin().args(["bounds", "--case", "nope", "--out"]).arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn print_config_round_trips() {
    let r = bin().args(["print-config", "--profile", "reference_station", "--seed", "5"]).output().unwrap();
    assert!(r.status.success());
    let c = RunConfig::from_json(&String::from_utf8(r.stdout).unwrap()).unwrap();
    let mut expected = RunConfig::profile("reference_station").unwrap();
    expected.seed = 5;
    assert_eq!(c, expected);
}

#[test]
fn link_budget_outputs_and_masking() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("lb");
    let r = bin().args(["link-budget", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["link_budget.csv", "visibility.csv", "visibility.svg", "cn0.svg", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let mut rd = csv::Reader::from_path(out.join("link_budget.csv")).unwrap();
    let vis = rd.headers().unwrap().iter().position(|h| h == "visible").unwrap();
    let cn0 = rd.headers().unwrap().iter().position(|h| h == "cn0_dbhz").unwrap();
    for rec in rd.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[vis], "true");
        let v: f64 = rec[cn0].parse().unwrap();
        assert!((30.0..=46.0).contains(&v));
    }
    let m = manifest(&out);
    assert_eq!(m.command, "link-budget");
    assert_eq!(m.config_path.as_deref(), Some(cfg.to_str().unwrap()));
    assert!(m.outputs.contains(&"cn0.svg".to_string()));
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let r = bin().args(["simulate", "--seed", "4", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["campaign.csv", "observations_trial0.csv", "estimates_trial0_iekf.csv", "campaign.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let header = std::fs::read_to_string(a.join("campaign.csv")).unwrap();
    assert!(header.starts_with("epoch,filter,rmse_m,bcrb_m,visible_sats\n"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["filters"].as_array().unwrap().len(), 4);
    assert_eq!(manifest(&a).seed, 4);
}

#[test]
fn degenerate_fit_warns_and_fails_check() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::paper_defaults();
    c.coop_fit.tx_heights = vec![2.0];
    c.coop_fit.rx_heights = vec![2.0];
    c.coop_fit.fixed_reflection = Some(0.0);
    c.coop_fit.fit_end = 30.0;
    c.coop_fit.curve_points = 20;
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, c.to_json()).unwrap();
    let out = tmp.path().join("fit");
    let r = bin().args(["fit-coop", "--check", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&r.stderr).contains("warning"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("coop_fit.json")).unwrap()).unwrap();
    assert!(report["average"].is_null());
}

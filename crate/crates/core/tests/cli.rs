use std::process::{Command, Output};

fn sps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sps")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn spectrum_output_is_deterministic() {
    let a = sps(&["spectrum", "--preset", "fig2b"]);
    let b = sps(&["run", "--preset", "fig2b"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# coherent_weight="));
    assert!(text.contains("# convention = "));
    let rows = data_rows(&text);
    assert!(rows.len() > 100);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        for cell in line.split(',') {
            let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.len(), 13, "{cell}");
        }
    }
}

#[test]
fn output_header_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s3.csv");
    let o = sps(&["g2", "--preset", "figS3b", "--grid", "tau=linear(0,5e4/Gamma,200)", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let from_file = sps(&["validate", "--config", out.to_str().unwrap()]);
    let from_preset = sps(&["validate", "--preset", "figS3b", "--grid", "tau=linear(0,5e4,200)", "--set", "task=g2"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, from_preset.stdout);
    let again = dir.path().join("again.csv");
    assert!(sps(&["run", "--config", out.to_str().unwrap(), "--out", again.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn validate_reports_dimensions() {
    let text = stdout(&sps(&["validate", "--preset", "fig2a"]));
    assert!(text.contains("hilbert_dim = 3") && text.contains("liouvillian_dim = 9x9"));
    let text = stdout(&sps(&["validate", "--preset", "fig3"]));
    assert!(text.contains("hilbert_dim = 12") && text.contains("liouvillian_dim = 144x144"));
}

#[test]
fn unknown_key_is_named_with_exit_2() {
    let o = sps(&["spectrum", "--preset", "fig2a", "--set", "model.omgea=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.omgea"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "task = steady\nmodel.scheme = lambda\nmodel.omega 1\n").unwrap();
    let o = sps(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn numerical_failure_exits_3() {
    // all population shelved: nothing is emitted on the observed transition
    let o = sps(&["g2", "--preset", "fig2c", "--set", "model.omega_r=0", "--set", "model.omega=0.1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_exits_4() {
    let o = sps(&["steady", "--preset", "fig2a", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_columns_and_thread_cap() {
    let o = Command::new(env!("CARGO_BIN_EXE_sps"))
        .args(["sweep", "--preset", "fig3", "--sweep", "kappa=logspace(1e-2,1,4)", "--strict"])
        .env("SPS_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "kappa,g2_0"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
    let o = sps(&["sweep", "--preset", "fig3", "--sweep", "kappa=0.1,1", "--sweep", "omega+omega_r=1e-3,1e-2"]);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "kappa,omega+omega_r,g2_0"));
    assert_eq!(data_rows(&text).len(), 4);
    assert_eq!(sps(&["sweep", "--preset", "fig3"]).status.code(), Some(2));
    let unordered = sps(&["run", "--preset", "fig3", "--task", "sweep", "--sweep", "kappa=1,0.1,0.5"]);
    let kappas: Vec<f64> = data_rows(&stdout(&unordered)).iter().map(|r| r[0]).collect();
    assert_eq!(kappas, vec![0.1, 0.5, 1.0]);
    assert_eq!(sps(&["sweep", "--preset", "fig2a", "--sweep", "omega=1e-2,2e-2"]).status.code(), Some(2));
}

#[test]
fn json_header_and_stamp() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("h.json");
    let o = sps(&["detector-g2", "--preset", "figS3c", "--stamp", "--json-header", json.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("# stamp = unix:"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["task"], "detector-g2");
    assert_eq!(v["config"]["model.scheme"], "rb87");
    assert!(v["stamp"].is_string());
}

#[test]
fn every_preset_runs() {
    for p in stdout(&sps(&["presets"])).lines() {
        let o = sps(&["run", "--preset", p]);
        assert!(o.status.success(), "{p}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

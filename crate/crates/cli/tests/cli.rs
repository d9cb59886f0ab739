use std::path::Path;
use std::process::{Command, Output};

fn mxm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mxm"))
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .unwrap()
}

const SMALL: &str = r#"
seed = 1
[grid]
n = 16
[domain]
kind = "box"
side = 4
[model]
kind = "landau_lifschitz"
gamma = 1.0
alpha = 0.5
h_ext = [0.5, 0.0, 2.0]
[initial]
v = [0.6, 0.0, 0.8]
[integrator]
scheme = "lawson_exp"
dt = 0.01
t_end = 0.1
[monitor]
stride = 2
[study]
eta_list = [0.2, 0.1, 0.05]
radius = 4.0
t_obs = 0.2
samples = 4
base_dt = 0.01
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_versioned_csv_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", SMALL);
    let out = mxm(&["run", &sc, "--snapshots", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("monitor.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# schema=mxm-monitor/1 model=landau_lifschitz"));
    assert!(lines[1].starts_with("t,em_norm,matter_l2,matter_sup,constraint_residual,bound_ratio,energy"));
    assert_eq!(lines.len(), 2 + 6);
    let snaps: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".mxmt"))
        .collect();
    assert_eq!(snaps.len(), 3);
    let bytes = std::fs::read(dir.path().join("snapshot_000010.mxmt")).unwrap();
    assert_eq!(&bytes[..4], b"MXMT");
    assert_eq!(bytes.len(), 24 + 9 * 8 * 16usize.pow(3));
}

#[test]
fn malformed_scenario_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "bad.toml", &SMALL.replace("gamma = 1.0", "gamma = \"fast\""));
    let out = mxm(&["run", &sc], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.gamma"));

    let sc = write(dir.path(), "range.toml", &SMALL.replace("side = 4", "side = 40"));
    let out = mxm(&["run", &sc], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain.side"));

    let out = mxm(&["run", "/nonexistent/scenario.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_blow_up_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("kind = \"landau_lifschitz\"\ngamma = 1.0\nalpha = 0.5\nh_ext = [0.5, 0.0, 2.0]", "kind = \"linear_growth\"\nrate = 2000.0")
        .replace("t_end = 0.1", "t_end = 1.0");
    let sc = write(dir.path(), "boom.toml", &text);
    let out = mxm(&["run", &sc], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn quasistatic_study_emits_one_row_per_eta() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", SMALL);
    let out = mxm(&["quasistatic-study", &sc], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("eta_study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "eta,pu_norm,v_deviation");
    assert_eq!(lines.len(), 2 + 3);
    let json = std::fs::read_to_string(dir.path().join("eta_study.json")).unwrap();
    assert!(json.contains("\"slope\""));
}

#[test]
fn reduced_and_mollified_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.to_string() + "[fixed_point]\nwindow = 0.05\ndt = 0.01\n";
    let sc = write(dir.path(), "s.toml", &text);
    let out = mxm(&["reduced", &sc], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("monitor.csv")).unwrap();
    assert!(csv.starts_with("# schema=mxm-reduced/1"));
    let out = mxm(&["compare-mollified", &sc, "--n-list", "2,4,8"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("mollified.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 3);
    let out = mxm(&["compare-mollified", &sc], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = mxm(&["validate"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(", 0 failed"));
}

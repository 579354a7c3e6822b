use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_permsym");
const SMALL_TC: &str = "model = TC\nn = 2\nt_max_fs = 20\nsamples = 21\n";

fn permsym(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map(|r| r.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tc.cfg", SMALL_TC);
    let out = dir.path().join("out");
    let o = permsym(&["run", &cfg, "--out", out.to_str().unwrap(), "--oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        listing(&out),
        ["tc_n2.csv", "tc_n2.deviation.csv", "tc_n2.manifest", "tc_n2.oracle.csv"]
    );
    let csv = fs::read_to_string(out.join("tc_n2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time_fs,cavity_population,excited_population,trace_error,hermiticity_error,leakage"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.len() == 6));
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[20][0], 20.0);

    let manifest = fs::read_to_string(out.join("tc_n2.manifest")).unwrap();
    assert!(manifest.contains("report.hbar_ev_fs = 0.6582119569"));
    assert!(manifest.contains("report.emitter_dim = 3"));
    assert!(manifest.contains("report.oracle.dim = 12"));
    let deviation = fs::read_to_string(out.join("tc_n2.deviation.csv")).unwrap();
    let all: f64 = deviation
        .lines()
        .find_map(|l| l.strip_prefix("all,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(all < 1e-8, "{all}");
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tc.cfg", SMALL_TC);
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = permsym(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(out.join("tc_n2.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn manifest_reruns_to_the_same_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tc.cfg", SMALL_TC);
    let a = dir.path().join("a");
    assert!(permsym(&["run", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let b = dir.path().join("b");
    let manifest = a.join("tc_n2.manifest");
    let o = permsym(&["run", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(a.join("tc_n2.csv")).unwrap(),
        fs::read(b.join("tc_n2.csv")).unwrap()
    );
}

#[test]
fn malformed_key_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "model = TC\nn = 2\ngamma = 0.1\n");
    let out = dir.path().join("out");
    let o = permsym(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("gamma"), "{err}");
    assert!(listing(&out).is_empty());
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = permsym(&["run", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(permsym(&[]).status.code(), Some(1));
    assert_eq!(permsym(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(permsym(&["--help"]).status.code(), Some(0));
}

#[test]
fn strict_leakage_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "leaky.cfg",
        "model = TC\nn = 3\ncavity_dim = 2\nt_max_fs = 30\nsamples = 4\n",
    );
    let out = dir.path().join("out");
    let o = permsym(&["run", &cfg, "--out", out.to_str().unwrap(), "--strict"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(listing(&out).is_empty());

    let o = permsym(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("cavity_dim = 4"));
}

#[test]
fn oversized_reference_is_a_guard_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "big.cfg", "model = HTC\nn = 5\noracle = true\n");
    let o = permsym(&["run", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn dims_reports_entry_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "htc.cfg", "model = HTC\nn = 5\n");
    let o = permsym(&["dims", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("symmetric_axis = 12012\n"), "{text}");
    assert!(text.contains("full_axis = 600000\n"), "{text}");

    let cfg = write_config(dir.path(), "one.cfg", "model = TC\nn = 1\n");
    let text = String::from_utf8(permsym(&["dims", &cfg]).stdout).unwrap();
    assert!(text.contains("full_over_symmetric = 1.0\n"), "{text}");
}

#[test]
fn sweep_writes_one_set_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tc.cfg", SMALL_TC);
    let out = dir.path().join("out");
    let o = permsym(&[
        "sweep", &cfg, "--vary", "g=0.05,0.1", "--vary", "n=1,2", "--jobs", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = listing(&out);
    assert_eq!(files.len(), 8, "{files:?}");
    assert!(files.contains(&"tc_n2_g-0.05_n-1.csv".to_string()), "{files:?}");
    let m = fs::read_to_string(out.join("tc_n2_g-0.05_n-1.manifest")).unwrap();
    assert!(m.contains("g = 0.05\n") && m.contains("n = 1\n"), "{m}");

    let o = permsym(&["sweep", &cfg, "--vary", "g", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

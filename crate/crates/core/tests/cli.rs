use std::path::Path;
use std::process::{Command, Output};

fn isogeom(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isogeom"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ISOGEOM_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn simulate_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "zeros.cfg",
        "manifold = circle\nspectrum = 1..3\nquantity = zeros\nlevels = 0, 0.5\nsamples = 300\nseed = 11\n",
    );
    let run = |threads: &str, out: &str| {
        let o = isogeom(&["simulate", "--config", "zeros.cfg", "--threads", threads, "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(dir.path().join(out)).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["runtime_seconds"] = 0.into();
        v
    };
    let a = run("1", "a.json");
    let b = run("3", "b.json");
    assert_eq!(a, b);
    assert_eq!(a["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn csv_output_has_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "exc.cfg",
        "manifold = sphere\nspectrum = 1\nquantity = excursion\nlevels = -0.5, 0.5\nsamples = 50\n",
    );
    let o = isogeom(&["simulate", "--config", "exc.cfg", "--format", "csv", "--seed", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("config_hash,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn expect_lists_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.cfg", "manifold = torus\nspectrum = (1,0)\nlevels = 0\n");
    let o = isogeom(&["expect", "--config", "t.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!v["rows"].as_array().unwrap().is_empty());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.cfg", "manifold = circle\nspectrum = 1\nquantity = zeros\nbogus = 3\n");
    write(dir.path(), "wrong.cfg", "manifold = sphere\nspectrum = 2\nquantity = zeros\n");
    for cfg in ["bad.cfg", "wrong.cfg", "missing.cfg"] {
        let o = isogeom(&["simulate", "--config", cfg], dir.path());
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

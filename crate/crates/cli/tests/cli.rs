use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qtraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtraj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_dir(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lists_every_figure_preset() {
    let o = qtraj(&["list-presets"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["fig2", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12"] {
        assert!(text.lines().any(|l| l.split('\t').next() == Some(name)), "{name}");
    }
}

#[test]
fn batch_run_writes_products_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtraj(&["run", "fig2", "fig5", "--out-dir", &out_dir(dir.path()), "--threads", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["fig2", "fig5"] {
        let d = dir.path().join(name);
        for f in ["trajectories.csv", "density.csv", "analysis.json", "density.svg", "trajectories.svg"] {
            assert!(d.join(f).is_file(), "{name}/{f}");
        }
    }
    let analysis: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig5/analysis.json")).unwrap()).unwrap();
    assert_eq!(analysis["boundary"]["line"]["v_bar"], -10.0);
    assert_eq!(analysis["boundary"]["transfers"]["transfers_1_to_2"], 0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = qtraj(&["--no-plots", "--out-dir", &out_dir(d.path()), "run", "fig8"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trajectories.csv", "density.csv", "analysis.json"] {
        let x = fs::read(a.path().join("fig8").join(f)).unwrap();
        let y = fs::read(b.path().join("fig8").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    assert!(!a.path().join("fig8/density.svg").exists());
}

#[test]
fn dump_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let first = qtraj(&["dump-config", "fig6"]);
    assert!(first.status.success());
    let path = dir.path().join("fig6.json");
    fs::write(&path, &first.stdout).unwrap();
    let second = qtraj(&["dump-config", &path.to_string_lossy()]);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtraj(&["run", "fig99"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig99"));

    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"preset\": \"fig2\",\n  \"packets\": [{\"x0\": -3, \"p0\": 10, \"sigma0\": -0.5}, {\"x0\": 3, \"p0\": -10, \"sigma0\": 0.5}]\n}").unwrap();
    let o = qtraj(&["run", &path.to_string_lossy(), "--out-dir", &out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("packets[0].sigma0"), "{}", stderr(&o));

    fs::write(&path, "{\n  \"name\": \"x\",\n  \"mode\": \"analytic_superposition\",,\n}").unwrap();
    let o = qtraj(&["run", &path.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = qtraj(&["run", "fig2", "--tolerance-profile", "sloppy"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("overlap.json");
    fs::write(
        &path,
        r#"{"preset": "fig2", "name": "overlap",
            "packets": [{"x0": -0.5, "p0": 10, "sigma0": 0.5}, {"x0": 0.5, "p0": -10, "sigma0": 0.5}]}"#,
    )
    .unwrap();
    let o = qtraj(&["run", &path.to_string_lossy(), "--out-dir", &out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("overlap"));
}

#[test]
fn compare_self_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtraj(&["--tolerance-profile", "fast", "--out-dir", &out_dir(dir.path()), "run", "fig9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("fig9");
    let o = qtraj(&["compare", &run.to_string_lossy(), &run.to_string_lossy(), "--metric", "density_L2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["value"], 0.0);

    let reference = run.join("reference");
    let o = qtraj(&["compare", &run.to_string_lossy(), &reference.to_string_lossy(), "--metric", "trajectory_RMS"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let inside = r["regions"]["inside"].as_f64().unwrap();
    let outside = r["regions"]["outside"].as_f64().unwrap();
    assert!(outside < inside, "inside {inside}, outside {outside}");

    let o = qtraj(&["compare", &run.to_string_lossy(), &dir.path().join("missing").to_string_lossy(), "--metric", "density_L2"]);
    assert_eq!(o.status.code(), Some(1));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn otoc_lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otoc-lab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OTOC_LAB_OUTPUT_DIR")
        .output()
        .expect("failed to launch otoc-lab")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

#[test]
fn otoc_run_writes_grid_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = otoc_lab(
        &["run", "--experiment", "otoc", "--t-max-us", "2", "--protocols", "ideal,weak", "--output-dir", "o"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/otoc.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t_us,re_F_ideal,im_F_ideal,re_F_weak,im_F_weak");
    assert_eq!(lines.count(), 21);
    assert!(csv.ends_with('\n'));
    let manifest = fs::read_to_string(dir.path().join("o/manifest.json")).unwrap();
    assert!(manifest.contains("\"version\""));
    assert!(manifest.contains("\"t2_star_us\""));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# comment\nexperiment = nonclassicality\nt_max_us = 1\nh_over_j = 0.25\n")
        .unwrap();
    let out = otoc_lab(&["run", "--config", "run.cfg", "--t-max-us", "0.5", "--output-dir", "o"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/nonclassicality.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let manifest = fs::read_to_string(dir.path().join("o/manifest.json")).unwrap();
    assert!(manifest.contains("\"h_over_j\": 0.25"));
}

#[test]
fn env_var_supplies_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_otoc-lab"))
        .args(["run", "--experiment", "qpd", "--t-max-us", "0.3"])
        .current_dir(dir.path())
        .env("OTOC_LAB_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("from-env/qpd.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 33);
}

#[test]
fn flag_overrides_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_otoc-lab"))
        .args(["run", "--experiment", "qpd", "--t-max-us", "0.1", "--output-dir", "flag"])
        .current_dir(dir.path())
        .env("OTOC_LAB_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("flag/qpd.csv").exists());
    assert!(!dir.path().join("from-env").exists());
}

#[test]
fn config_errors_exit_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 5] = [
        (&["run", "--n-qubits", "1"], "n_qubits"),
        (&["run", "--t-max-us", "-3"], "t_max_us"),
        (&["run", "--dt-integration-us", "0.03"], "dt_integration_us"),
        (&["run", "--experiment", "sweep", "--sweep-points", "1"], "sweep_points"),
        (&["run", "--protocols", "teleport"], "protocols"),
    ];
    for (args, field) in cases {
        let out = otoc_lab(args, dir.path());
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(field), "{args:?}");
    }
    let out = otoc_lab(&["run", "--no-such-flag"], dir.path());
    assert_eq!(code(&out), 1);
    let out = otoc_lab(&["run", "--config", "missing.cfg"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&otoc_lab(&["--help"], dir.path())), 0);
    assert_eq!(code(&otoc_lab(&["--version"], dir.path())), 0);
    let help = otoc_lab(&["run", "--help"], dir.path());
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--h-over-j", "--t2-star-us", "--dt-integration-us", "--worker-count", "--output-dir"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "not a directory").unwrap();
    let out = otoc_lab(&["run", "--t-max-us", "0.2", "--output-dir", "blocker/sub"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn plot_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = otoc_lab(
        &["run", "--experiment", "otoc", "--t-max-us", "1", "--protocols", "ideal,clock", "--output-dir", "o"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let out = otoc_lab(&["plot", "--csv", "o/otoc.csv", "--kind", "otoc", "--output", "fig.svg"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert_eq!(svg.matches("<polyline").count(), 2);

    fs::write(dir.path().join("empty.csv"), "t_us,n_tilde\n").unwrap();
    let out = otoc_lab(&["plot", "--csv", "empty.csv", "--kind", "nonclassicality"], dir.path());
    assert_ne!(code(&out), 0);
    assert!(!dir.path().join("empty.svg").exists());

    let out = otoc_lab(&["plot", "--csv", "o/otoc.csv", "--kind", "histogram"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (name, workers) in [("a", "1"), ("b", "4"), ("c", "4")] {
        let out = otoc_lab(
            &[
                "run",
                "--experiment",
                "qpd",
                "--t-max-us",
                "3",
                "--t2-star-us",
                "130",
                "--worker-count",
                workers,
                "--output-dir",
                name,
            ],
            dir.path(),
        );
        assert_eq!(code(&out), 0);
    }
    let a = fs::read(dir.path().join("a/qpd.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/qpd.csv")).unwrap());
    assert_eq!(a, fs::read(dir.path().join("c/qpd.csv")).unwrap());
}

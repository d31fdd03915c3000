use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn planar_flow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planar-flow"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("PLANAR_FLOW_OUT")
        .env_remove("PLANAR_FLOW_WORKERS")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

const FLAT_BOUNDARY: &[&str] = &[
    "boundary",
    "--set",
    "field.kind=constant",
    "--set",
    "field.c=i",
    "--set",
    "driver.kind=zero",
    "--set",
    "experiment.a=-1",
    "--set",
    "experiment.b=1",
    "--set",
    "experiment.n=11",
];

#[test]
fn constant_field_boundary_is_the_line_at_height_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = planar_flow(tmp.path(), FLAT_BOUNDARY);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pts = rows(&tmp.path().join("boundary.csv"));
    assert!(pts.len() >= 11);
    for p in &pts {
        assert!((p[1] - p[0]).abs() < 1e-12);
        assert!((p[2] - 1.0).abs() < 1e-12);
    }
    let m = manifest(tmp.path());
    assert_eq!(m["command"], "boundary");
    assert_eq!(m["config"]["field"]["kind"], "constant");
    let names: Vec<&str> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["boundary.csv", "boundary.json", "boundary.svg"]);
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(tmp.path().join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_file_and_overrides_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.ini");
    fs::write(
        &cfg,
        "# flat boundary\n[field]\nkind = constant\nc = 2i\n\n[driver]\nkind = zero\n\n[experiment]\na = -1\nb = 1\nn = 5\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = planar_flow(
        &out_dir,
        &["boundary", "--config", cfg.to_str().unwrap(), "--set", "field.c=i"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pts = rows(&out_dir.join("boundary.csv"));
    assert!((pts[0][2] - 1.0).abs() < 1e-12);
}

#[test]
fn zero_driver_trace_is_the_vertical_slit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = planar_flow(
        tmp.path(),
        &[
            "loewner-trace",
            "--set",
            "driver.kind=zero",
            "--set",
            "driver.step=1e-4",
            "--set",
            "experiment.times=0.25,1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pts = rows(&tmp.path().join("trace.csv"));
    assert_eq!(pts.len(), 2);
    for (p, h) in pts.iter().zip([1.0, 2.0]) {
        assert!(p[1].abs() < 1e-12);
        assert!((p[2] - h).abs() < 1e-3 * h, "{p:?}");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["boundary", "--set", "field.kind=nope"],
        &["boundary", "--set", "nosection=1"],
        &[
            "boundary",
            "--set",
            "field.kind=power",
            "--set",
            "field.alpha=1.5",
            "--set",
            "experiment.a=0",
            "--set",
            "experiment.b=1",
        ],
        &[
            "simulate",
            "--set",
            "field.kind=power",
            "--set",
            "field.alpha=0.5",
            "--set",
            "driver.seed=1",
        ],
        &["hcap", "--set", "driver.kind=zero", "--set", "driver.step=0.3"],
    ];
    for args in cases {
        let out = planar_flow(tmp.path(), args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
    let mut args = FLAT_BOUNDARY.to_vec();
    args.extend(["--set", "experiment.typo=1"]);
    let out = planar_flow(tmp.path(), &args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.typo"));

    let cfg = tmp.path().join("bad.ini");
    fs::write(&cfg, "[field]\nkind = constant\nthis line is broken\n").unwrap();
    let out = planar_flow(tmp.path(), &["boundary", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    // the predictor from x = 1 under F = −1/z lands on the pole
    let out = planar_flow(
        tmp.path(),
        &[
            "simulate",
            "--set",
            "field.kind=inversion",
            "--set",
            "field.kappa=2",
            "--set",
            "driver.kind=custom",
            "--set",
            "driver.t1=0.5",
            "--set",
            "driver.values=0,-0.5",
            "--set",
            "experiment.z=1",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = planar_flow(
        tmp.path(),
        &[
            "simulate",
            "--set",
            "field.kind=herglotz",
            "--set",
            "field.d=20",
            "--set",
            "driver.kind=zero",
            "--set",
            "experiment.z=1+i",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exploded"));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "boundary",
        "--set",
        "field.kind=power",
        "--set",
        "field.alpha=0.5",
        "--set",
        "driver.seed=11",
        "--set",
        "experiment.a=-1",
        "--set",
        "experiment.b=1",
        "--set",
        "experiment.holder=true",
    ];
    let mut runs = Vec::new();
    for workers in ["1", "3", "1"] {
        let dir = tmp.path().join(format!("run{}", runs.len()));
        let mut a = args.to_vec();
        a.extend(["--workers", workers]);
        let out = planar_flow(&dir, &a);
        assert!(out.status.success());
        let m = manifest(&dir);
        assert_eq!(m["workers"].as_u64().unwrap().to_string(), workers);
        runs.push((dir, m));
    }
    for (dir, m) in &runs[1..] {
        assert_eq!(m["files"], runs[0].1["files"]);
        assert_eq!(m["config_hash"], runs[0].1["config_hash"]);
        for f in ["boundary.csv", "boundary.json", "boundary.svg"] {
            assert_eq!(fs::read(dir.join(f)).unwrap(), fs::read(runs[0].0.join(f)).unwrap());
        }
    }
}

#[test]
fn output_dir_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from_env");
    let cfg_dir = tmp.path().join("from_config");
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_planar-flow"))
            .args(FLAT_BOUNDARY)
            .args(extra)
            .env("PLANAR_FLOW_OUT", &env_dir)
            .current_dir(tmp.path())
            .output()
            .unwrap()
    };
    assert!(run(&[]).status.success());
    assert!(env_dir.join("manifest.json").exists());
    let set = format!("output.dir={}", cfg_dir.display());
    assert!(run(&["--set", &set]).status.success());
    assert!(cfg_dir.join("manifest.json").exists());
    let flag_dir = tmp.path().join("from_flag");
    assert!(run(&["--set", &set, "--out", flag_dir.to_str().unwrap()])
        .status
        .success());
    assert!(flag_dir.join("manifest.json").exists());
}

#[test]
fn output_switches_suppress_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = FLAT_BOUNDARY.to_vec();
    args.extend(["--set", "output.svg=false", "--set", "output.json=false"]);
    assert!(planar_flow(tmp.path(), &args).status.success());
    assert!(tmp.path().join("boundary.csv").exists());
    assert!(!tmp.path().join("boundary.svg").exists());
    assert!(!tmp.path().join("boundary.json").exists());
    assert_eq!(manifest(tmp.path())["files"].as_array().unwrap().len(), 1);
}

#[test]
fn every_command_runs_on_a_small_config() {
    let tmp = tempfile::tempdir().unwrap();
    let power = ["--set", "field.kind=power", "--set", "field.alpha=0.5"];
    let seeded = ["--set", "driver.seed=5", "--set", "driver.step=1e-2"];
    let cases: Vec<(&str, Vec<&str>, &str)> = vec![
        ("simulate", vec!["--set", "experiment.z=i,1+i"], "trajectories.csv"),
        ("derivative", vec!["--set", "experiment.z=i"], "derivative.csv"),
        (
            "identity-check",
            vec!["--set", "experiment.z=i", "--set", "experiment.w=1+i"],
            "identity.csv",
        ),
        (
            "moments",
            vec![
                "--set",
                "experiment.n_paths=40",
                "--set",
                "experiment.axis=t",
                "--set",
                "experiment.t=0.5",
                "--set",
                "experiment.z=i",
                "--set",
                "experiment.lags=0.01,0.02,0.05,0.1",
            ],
            "moments.csv",
        ),
        (
            "j-moments",
            vec![
                "--set",
                "experiment.n_paths=40",
                "--set",
                "experiment.axis=t",
                "--set",
                "experiment.t=0.5",
                "--set",
                "experiment.z=i",
                "--set",
                "experiment.w=1+i",
                "--set",
                "experiment.lags=0.01,0.02,0.05,0.1",
            ],
            "j_moments.csv",
        ),
        (
            "phi-estimate",
            vec![
                "--set",
                "experiment.n_paths=40",
                "--set",
                "experiment.lambda=1",
                "--set",
                "experiment.z=i",
            ],
            "phi.csv",
        ),
        ("loewner-trace", vec!["--set", "experiment.count=10"], "trace.csv"),
        (
            "hull",
            vec!["--set", "experiment.re_count=9", "--set", "experiment.im_count=9"],
            "hull.csv",
        ),
        ("hcap", vec!["--set", "experiment.times=0.5,1"], "hcap.csv"),
        (
            "corner-demo",
            vec!["--set", "experiment.per_side=40"],
            "corner_brownian.csv",
        ),
    ];
    for (cmd, extra, file) in cases {
        let dir = tmp.path().join(cmd);
        let mut args = vec![cmd];
        if !matches!(cmd, "loewner-trace" | "hull" | "hcap") {
            args.extend(power);
        }
        args.extend(seeded);
        args.extend(extra);
        let out = planar_flow(&dir, &args);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.join(file).exists(), "{cmd}");
        assert_eq!(manifest(&dir)["command"], cmd);
    }
}

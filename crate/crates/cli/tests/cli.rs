use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bifb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bifb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn sim_section() -> Value {
    json!({"subjects": 2, "repetitions": 3, "duration_s": 6.0, "snr_scale": 0.5, "seed": 3})
}

/// Simulates a small dataset into `dir/data` and returns the config path.
fn simulated(dir: &Path) -> PathBuf {
    let cfg = write_config(
        dir,
        "sim.json",
        &json!({"output_dir": "data", "simulate": sim_section()}),
    );
    let out = bifb(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("data")
}

fn run_config(dir: &Path, name: &str, method: &str, data: &Path) -> PathBuf {
    write_config(dir, name, &json!({"dataset": data, "method": method}))
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_is_deterministic_and_counts_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        &json!({"simulate": {"subjects": 2, "repetitions": 5, "duration_s": 3.0, "seed": 9}}),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = bifb(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(tree(&a), tree(&b));
    let manifest: Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trials"].as_array().unwrap().len(), 30);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(tmp.path(), "sim.json", &json!({"simulate": sim_section()}));
    let out = bifb(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    let out = bifb(&[
        "validate",
        "--config",
        tmp.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path());
    let bad_key = write_config(
        tmp.path(),
        "k.json",
        &json!({"dataset": data, "methd": "bifb"}),
    );
    assert_eq!(
        code(&bifb(&["validate", "--config", bad_key.to_str().unwrap()])),
        2
    );

    // stimuli outside the response profile leave bifb without gains
    let far = write_config(
        tmp.path(),
        "far.json",
        &json!({"output_dir": "far", "simulate": {"stimulus_frequencies_hz": [8.0, 40.0], "profile": {"control_points": [[6.0, 1.0], [50.0, 0.5]]}, "sampling_rate_hz": 256.0, "subjects": 1, "repetitions": 2, "duration_s": 4.0}}),
    );
    assert_eq!(
        code(&bifb(&["simulate", "--config", far.to_str().unwrap()])),
        0
    );
    let run = write_config(
        tmp.path(),
        "run.json",
        &json!({"dataset": tmp.path().join("far"), "method": "bifb", "preprocess": {"bandpass_high_hz": 100.0}}),
    );
    let out = bifb(&["validate", "--config", run.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let psda = bifb(&[
        "validate",
        "--config",
        run.to_str().unwrap(),
        "--set",
        "method=psda",
    ]);
    assert_eq!(code(&psda), 0);

    let cfg = run_config(tmp.path(), "r.json", "bifb", &data);
    assert_eq!(
        code(&bifb(&["run", "--config", cfg.to_str().unwrap()])),
        2,
        "no output dir"
    );
    assert_eq!(
        code(&bifb(&[
            "validate",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "segment.overlap=1.5"
        ])),
        2
    );
}

#[test]
fn data_and_evaluation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path());
    let cfg = run_config(tmp.path(), "r.json", "bifb", &data);
    // six-second trials cannot hold an eight-second segment
    let long = bifb(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "segment.length_s=8",
    ]);
    assert_eq!(code(&long), 4);

    // drop all but one 28 Hz trial of subject s0: training cannot cover every class
    let manifest_path = data.join("manifest.json");
    let mut manifest: Value = serde_json::from_slice(&fs::read(&manifest_path).unwrap()).unwrap();
    let trials = manifest["trials"].as_array_mut().unwrap();
    let mut seen = false;
    trials.retain(|t| {
        let drop = t["subject_id"] == "s1" && t["stimulus_freq_hz"] == 28.0 && seen;
        seen |= t["subject_id"] == "s1" && t["stimulus_freq_hz"] == 28.0;
        !drop
    });
    fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
    let out = bifb(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(data.join("manifest.json"), "not json").unwrap();
    assert_eq!(
        code(&bifb(&["validate", "--config", cfg.to_str().unwrap()])),
        4
    );
}

#[test]
fn run_is_byte_identical_and_reports_rebuild() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path());
    let cfg = run_config(tmp.path(), "r.json", "bifb", &data);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let mut stdout = Vec::new();
    for dir in [&a, &b] {
        let out = bifb(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--jobs",
            "2",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        stdout.push(out.stdout);
    }
    assert_eq!(stdout[0], stdout[1]);
    assert_eq!(tree(&a), tree(&b));
    for f in [
        "report.txt",
        "report.csv",
        "report.json",
        "outcomes.csv",
        "config.json",
        "models/s1.json",
        "models/s2.json",
    ] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let rebuilt = bifb(&["report", a.to_str().unwrap()]);
    assert_eq!(code(&rebuilt), 0);
    let text = String::from_utf8(rebuilt.stdout).unwrap();
    assert!(text.starts_with(&fs::read_to_string(a.join("report.txt")).unwrap()));
}

#[test]
fn compare_against_itself_has_zero_variance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path());
    let c1 = run_config(tmp.path(), "a.json", "bifb", &data);
    let c2 = run_config(tmp.path(), "b.json", "bifb", &data);
    let out_dir = tmp.path().join("cmp");
    let out = bifb(&[
        "compare",
        "--config",
        c1.to_str().unwrap(),
        "--config",
        c2.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("zero variance"));
    let csv = fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("subject,bifb,bifb-2"));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], cells[2]);
    }
    assert_eq!(
        fs::read(out_dir.join("outcomes_bifb.csv")).unwrap(),
        fs::read(out_dir.join("outcomes_bifb-2.csv")).unwrap()
    );
}

#[test]
fn compare_on_different_datasets_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path());
    let other_cfg = write_config(
        tmp.path(),
        "sim2.json",
        &json!({"output_dir": "other", "simulate": {"subjects": 2, "repetitions": 3, "duration_s": 6.0, "seed": 4}}),
    );
    assert_eq!(
        code(&bifb(&[
            "simulate",
            "--config",
            other_cfg.to_str().unwrap()
        ])),
        0
    );
    let c1 = run_config(tmp.path(), "a.json", "bifb", &data);
    let c2 = run_config(tmp.path(), "b.json", "psda", &tmp.path().join("other"));
    let out = bifb(&[
        "compare",
        "--config",
        c1.to_str().unwrap(),
        "--config",
        c2.to_str().unwrap(),
        "--out",
        tmp.path().join("cmp").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(
        code(&bifb(&["compare", "--config", c1.to_str().unwrap()])),
        2
    );
}

#[test]
fn gridsearch_writes_every_point() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path());
    let cfg = write_config(
        tmp.path(),
        "g.json",
        &json!({"dataset": data, "grid": {"lambda": [0.1, 1.0], "segment_length_s": [1.5, 2.0]}}),
    );
    let dir = tmp.path().join("g");
    let out = bifb(&[
        "gridsearch",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid search over 4 points"));
    let grid = fs::read_to_string(dir.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert_eq!(grid.lines().filter(|l| l.ends_with(",true")).count(), 1);
    let best: Value =
        serde_json::from_slice(&fs::read(dir.join("best_config.json")).unwrap()).unwrap();
    assert!(best.get("grid").is_none());
    // the chosen configuration is itself runnable
    let best_path = dir.join("best_config.json");
    assert_eq!(
        code(&bifb(&[
            "validate",
            "--config",
            best_path.to_str().unwrap()
        ])),
        0
    );
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut n = 0;
    for e in fs::read_dir(root.join("configs")).unwrap() {
        let p = e.unwrap().path();
        let cfg = bifb_cli::config::ExperimentConfig::load(Some(&p), &[]);
        assert!(cfg.is_ok(), "{}: {:?}", p.display(), cfg.err());
        n += 1;
    }
    assert!(n >= 6);

    // the example in the guide's command-line chapter
    let chapter = fs::read_to_string(root.join("book/src/cli.md")).unwrap();
    let block = chapter
        .split("```json")
        .nth(1)
        .unwrap()
        .split("```")
        .next()
        .unwrap();
    let cfg = bifb_cli::config::ExperimentConfig::from_value(serde_json::from_str(block).unwrap())
        .unwrap();
    assert_eq!(cfg.pipeline.segment.length_s, 2.0);
}

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lie-anneal"));
    c.env_remove("LIE_ANNEAL_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

/// Every artifact listed in the manifest, as bytes.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let m = read_json(&dir.join("manifest.json"));
    m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            let f = a["file"].as_str().unwrap().to_string();
            let bytes = std::fs::read(dir.join(&f)).unwrap();
            (f, bytes)
        })
        .collect()
}

#[test]
fn schedule_example_gives_forced_values() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "schedule",
        "--D",
        "2",
        "--N",
        "0",
        "--K",
        "1",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = read_json(&d.path().join("schedule.json"));
    assert_eq!(s["c"].as_f64().unwrap(), 2.0);
    assert!((s["ln_R"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((s["R"].as_f64().unwrap() - 4f64.exp()).abs() < 1e-9);
    assert_eq!(s["admissible"], Value::Bool(true));
}

#[test]
fn dm_gap_on_the_circle() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "gap",
        "--model",
        "torus:1",
        "--t",
        "1",
        "--method",
        "dm",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = read_json(&d.path().join("gap.json"));
    let k = g["k_hat"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&k), "K̂ = {k}");
    assert!((g["a_t"].as_f64().unwrap() - 1.0 / (2.0 * k)).abs() < 1e-15);
    assert!((g["a_t"].as_f64().unwrap() - 0.5).abs() < 0.05);
    let table = std::fs::read_to_string(d.path().join("dm_table.csv")).unwrap();
    assert!(table.starts_with("function,t,numerator,denominator,ratio,standard_error,skipped\n"));
}

#[test]
fn unknown_model_lists_valid_ids() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["gap", "--model", "klein-bottle", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    for id in ["torus:<d>", "heisenberg-nilmanifold", "heisenberg", "su2"] {
        assert!(e.contains(id), "{e}");
    }
    assert!(e.contains("gap"), "{e}");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&run(&["gap", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["gap", "--t", "abc"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn invalid_parameters_are_named() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--dt=-1", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 1);
    assert!(
        stderr(&o).contains("simulate") && stderr(&o).contains("`dt`"),
        "{}",
        stderr(&o)
    );
    let o = run(&["simulate", "--times", "1,0.5", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("`times`"), "{}", stderr(&o));
    let o = run(&[
        "simulate",
        "--n-paths",
        "100000",
        "--times",
        "100",
        "--max-path-steps",
        "1e6",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 1);
    let o = run(&["schedule", "--D", "1", "--K", "1", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("`N`"), "{}", stderr(&o));
    let o = bin()
        .args([
            "schedule",
            "--D",
            "1",
            "--K",
            "1",
            "--N",
            "0",
            "--out",
            &out_arg(d.path()),
        ])
        .env("LIE_ANNEAL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn numeric_failure_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "schedule",
        "--action",
        "u-bound",
        "--c",
        "0.5",
        "--R",
        "2",
        "--D",
        "1",
        "--K",
        "1",
        "--N",
        "100",
        "--t-end",
        "1e300",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_dir_is_rejected_before_work() {
    let d = tempfile::tempdir().unwrap();
    let file = d.path().join("not-a-dir");
    std::fs::write(&file, "x").unwrap();
    let o = run(&[
        "schedule",
        "--D",
        "1",
        "--K",
        "1",
        "--N",
        "0",
        "--out",
        &out_arg(&file.join("sub")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cannot write"), "{}", stderr(&o));
}

#[test]
fn config_file_with_flag_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "schedule", "D": 2, "K": 1, "N": 0, "seed": 7}"#).unwrap();
    let out = d.path().join("a");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "schedule",
        "--K",
        "2",
        "--out",
        &out_arg(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["config"]["K"].as_f64(), Some(2.0));
    assert_eq!(m["config"]["D"].as_f64(), Some(2.0));
    assert_eq!(m["seed"].as_u64(), Some(7));
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);

    // the same values given as flags only hash identically
    let out2 = d.path().join("b");
    let o = run(&[
        "schedule",
        "--D",
        "2",
        "--K",
        "2",
        "--N",
        "0",
        "--seed",
        "7",
        "--out",
        &out_arg(&out2),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&out2.join("manifest.json"))["config_hash"], m["config_hash"]);

    std::fs::write(&cfg, r#"{"D": 2, "KK": 1}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "schedule", "--out", &out_arg(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("KK"));
    std::fs::write(&cfg, r#"{"command": "gap"}"#).unwrap();
    assert_eq!(
        code(&run(&[
            "--config",
            cfg.to_str().unwrap(),
            "schedule",
            "--out",
            &out_arg(&out)
        ])),
        1
    );
    std::fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(
        code(&run(&[
            "--config",
            cfg.to_str().unwrap(),
            "schedule",
            "--out",
            &out_arg(&out)
        ])),
        1
    );
}

#[test]
fn identical_config_and_seed_give_identical_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &[
            "simulate",
            "--model",
            "heisenberg-nilmanifold",
            "--times",
            "0.2,0.5",
            "--n-paths",
            "300",
            "--dt",
            "0.005",
        ],
        &[
            "schedule", "--action", "u-bound", "--D", "1", "--K", "1", "--N", "1", "--t-end", "1e5",
        ],
        &[
            "concentrate",
            "--model",
            "torus:1",
            "--times",
            "10,30",
            "--n-paths",
            "300",
            "--n-gibbs",
            "1000",
            "--D",
            "3",
            "--K",
            "1",
            "--N",
            "2",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = d.path().join(format!("{i}a"));
        let b = d.path().join(format!("{i}b"));
        let o = bin()
            .args(*args)
            .args(["--seed", "11", "--out", &out_arg(&a)])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        // a different thread count must not change results
        let o = bin()
            .args(*args)
            .args(["--seed", "11", "--out", &out_arg(&b)])
            .env("LIE_ANNEAL_THREADS", "3")
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let (fa, fb) = (artifacts(&a), artifacts(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{args:?}");
        let (ma, mb) = (read_json(&a.join("manifest.json")), read_json(&b.join("manifest.json")));
        assert_eq!(ma["config_hash"], mb["config_hash"]);
        assert_eq!(ma["artifacts"], mb["artifacts"]);
    }
    let c = d.path().join("0c");
    let o = bin()
        .args(runs[0])
        .args(["--seed", "12", "--out", &out_arg(&c)])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_ne!(artifacts(&c), artifacts(&d.path().join("0a")));
}

#[test]
fn interrupted_simulation_resumes_to_the_same_ensemble() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--model",
        "su2",
        "--kind",
        "ou",
        "--potential",
        "benchmark",
        "--times",
        "0.3",
        "--n-paths",
        "250",
        "--dt",
        "0.01",
    ];
    let full = d.path().join("full");
    let o = bin()
        .args(args)
        .args(["--block-size", "250", "--out", &out_arg(&full)])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let part = d.path().join("part");
    let o = bin()
        .args(args)
        .args([
            "--block-size",
            "100",
            "--halt-after-blocks",
            "1",
            "--out",
            &out_arg(&part),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_json(&part.join("manifest.json"));
    assert_eq!(m["status"], "partial");
    assert_eq!(m["progress"]["completed_paths"].as_u64(), Some(100));

    // a changed configuration cannot resume the run
    let o = run(&["simulate", "--resume", "--n-paths", "300", "--out", &out_arg(&part)]);
    assert_eq!(code(&o), 1);

    let o = run(&["simulate", "--resume", "--block-size", "70", "--out", &out_arg(&part)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_json(&part.join("manifest.json"))["status"], "complete");
    for f in ["ensemble.csv", "ensemble.json"] {
        assert_eq!(
            std::fs::read(full.join(f)).unwrap(),
            std::fs::read(part.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(artifacts(&full), artifacts(&part));
}

#[test]
fn concentration_csv_schema() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "concentrate",
        "--model",
        "torus:2",
        "--times",
        "10,20",
        "--n-paths",
        "200",
        "--n-gibbs",
        "1000",
        "--D",
        "3",
        "--K",
        "1",
        "--N",
        "4",
        "--deltas",
        "1,2",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut r = csv::Reader::from_path(d.path().join("concentration.csv")).unwrap();
    let h: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(h, ["t", "delta", "empirical", "gibbs_mass", "bound", "margin"]);
    let rows: Vec<Vec<f64>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let rep = read_json(&d.path().join("concentration.json"));
    for (row, json_row) in rows.iter().zip(rep["rows"].as_array().unwrap()) {
        assert_eq!(row[0].to_bits(), json_row["t"].as_f64().unwrap().to_bits());
        assert_eq!(row[2].to_bits(), json_row["empirical"].as_f64().unwrap().to_bits());
        assert_eq!(row[5].to_bits(), json_row["margin"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn kernel_grid_round_trip_through_files() {
    let d = tempfile::tempdir().unwrap();
    let build = d.path().join("build");
    let o = run(&[
        "kernel",
        "--action",
        "build",
        "--model",
        "torus:1",
        "--t",
        "0.5",
        "--n-paths",
        "20000",
        "--out",
        &out_arg(&build),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep = read_json(&build.join("kernel_report.json"));
    assert!((rep["certificate"]["mass"].as_f64().unwrap() - 1.0).abs() < 0.02);

    let ev = d.path().join("eval");
    let grid = build.join("kernel.json");
    let o = run(&[
        "kernel",
        "--action",
        "evaluate",
        "--model",
        "torus:1",
        "--t",
        "0.5",
        "--grid",
        grid.to_str().unwrap(),
        "--points",
        "0,1.5,3",
        "--out",
        &out_arg(&ev),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(ev.join("kernel_values.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("c0,log_p,se_log_p,grad_0"));
    let vals: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    assert!(vals[0] > vals[1] && vals[1] > vals[2], "{vals:?}");

    // a grid at a single time cannot serve the Varadhan time list
    let o = run(&[
        "kernel",
        "--action",
        "varadhan",
        "--model",
        "torus:1",
        "--grid",
        grid.to_str().unwrap(),
        "--points",
        "1",
        "--out",
        &out_arg(&d.path().join("v")),
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn varadhan_on_the_nilmanifold() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "kernel",
        "--action",
        "varadhan",
        "--model",
        "heisenberg-nilmanifold",
        "--points",
        "0.3,0,0,0.2,0.2,0",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reps = read_json(&d.path().join("varadhan.json"));
    for r in reps.as_array().unwrap() {
        assert!(r["relative_error"].as_f64().unwrap() < 0.1, "{r}");
    }
}

#[test]
fn accept_runs_selected_criteria() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["accept", "--criteria", "5", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("criterion 5 PASS"), "{stdout}");
    let t = std::fs::read_to_string(d.path().join("acceptance.csv")).unwrap();
    assert!(t.starts_with("criterion,title,passed,summary\n5,"));
    assert_eq!(
        code(&run(&["accept", "--criteria", "0", "--out", &out_arg(d.path())])),
        1
    );
}

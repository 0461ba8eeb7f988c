use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lambda-raman"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn lambda-raman")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn strip_timestamp(mut v: Value) -> Value {
    v["manifest"].as_object_mut().unwrap().remove("timestamp");
    v
}

fn read_csv(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn optimize3(dir: &Path) -> PathBuf {
    let out = run(
        dir,
        &[
            "optimize",
            "--omega-tg",
            "0.05",
            "--n",
            "10",
            "--n0",
            "4",
            "--order",
            "3",
            "--out",
            "opt3.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("opt3.json")
}

#[test]
fn optimize_third_order_sign_structure() {
    let dir = TempDir::new().unwrap();
    let v = json(optimize3(dir.path()));
    let pulse: Vec<f64> = serde_json::from_value(v["pulse"].clone()).unwrap();
    assert_eq!(pulse.len(), 10);
    assert!(pulse[9] > 0.0);
    assert!(pulse[..9].iter().all(|&f| f < 0.0));
    assert_eq!(v["order"], 3);
    assert!(v["residual_norm"].as_f64().unwrap() <= 1e-12);
    for key in ["lambda1", "lambda2", "predicted_f2", "iterations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["manifest"]["command"], "optimize");
}

#[test]
fn optimize_single_harmonic_is_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &["optimize", "--n", "1", "--order", "2", "--out", "x.json"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn optimize_non_convergence_still_writes_residuals() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "optimize",
            "--order",
            "3",
            "--max-iter",
            "1",
            "--out",
            "x.json",
        ],
    );
    assert_eq!(code(&out), 2);
    let v = json(dir.path().join("x.json"));
    assert!(v["residual_norm"].as_f64().unwrap() > 1e-12);
    assert!(v["error"].is_string());
}

#[test]
fn optimize_bad_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            dir.path(),
            &["optimize", "--order", "4", "--out", "x.json"]
        )),
        1
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["optimize", "--omega-tg", "0.7", "--out", "x.json"]
        )),
        1
    );
    assert_eq!(code(&run(dir.path(), &["optimize"])), 1);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
}

#[test]
fn optimize_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for name in ["a.json", "b.json"] {
        assert_eq!(
            code(&run(
                dir.path(),
                &["optimize", "--order", "2", "--out", name]
            )),
            0
        );
    }
    let a = strip_timestamp(json(dir.path().join("a.json")));
    let mut b = strip_timestamp(json(dir.path().join("b.json")));
    // only the output path differs in the recorded arguments
    b["manifest"]["args"] = a["manifest"]["args"].clone();
    b["manifest"]["parameters"]["out"] = a["manifest"]["parameters"]["out"].clone();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn optimal_pulse_lowers_excited_population() {
    let dir = TempDir::new().unwrap();
    optimize3(dir.path());
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "simulate",
                "--pulse",
                "mc",
                "--periods",
                "1",
                "--out",
                "mc.csv"
            ]
        )),
        0
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "simulate",
                "--pulse",
                "opt3.json",
                "--periods",
                "1",
                "--out",
                "o3.csv"
            ]
        )),
        0
    );
    let mc = json(dir.path().join("mc.json"))["max_p3"].as_f64().unwrap();
    let o3 = json(dir.path().join("o3.json"))["max_p3"].as_f64().unwrap();
    assert!(o3 < mc, "opt3 {o3} vs mc {mc}");
}

#[test]
fn simulate_zero_pulse_trace() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("zero.json"), "[0, 0, 0, 0]").unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate",
            "--pulse",
            "zero.json",
            "--periods",
            "2",
            "--samples",
            "64",
            "--out",
            "z.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(dir.path().join("z.csv"));
    assert_eq!(
        header,
        ["t_over_T", "P2", "P3", "P2_target", "F_window_index", "F_n"]
    );
    assert_eq!(rows.len(), 129);
    let t = column(&rows, 0);
    assert!(column(&rows, 1).iter().all(|&p| p == 0.0));
    assert!(column(&rows, 2).iter().all(|&p| p == 0.0));
    for (tau, p) in t.iter().zip(column(&rows, 3)) {
        let expected = (0.05 * tau * std::f64::consts::TAU).sin().powi(2);
        assert!((p - expected).abs() < 1e-15);
    }
    let windows: Vec<u32> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(
        (windows[0], windows[64], windows[65], windows[128]),
        (1, 1, 2, 2)
    );
}

#[test]
fn simulate_input_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "simulate",
                "--pulse",
                "mc",
                "--samples",
                "32",
                "--out",
                "c.csv"
            ]
        )),
        1
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["simulate", "--pulse", "missing.json", "--out", "c.csv"]
        )),
        1
    );
    std::fs::write(dir.path().join("bad.json"), "{\"amplitudes\": 3}").unwrap();
    assert_eq!(
        code(&run(
            dir.path(),
            &["simulate", "--pulse", "bad.json", "--out", "c.csv"]
        )),
        1
    );
    std::fs::write(dir.path().join("short.json"), "[0.1, 0.2]").unwrap();
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "simulate",
                "--pulse",
                "short.json",
                "--n",
                "5",
                "--out",
                "c.csv"
            ]
        )),
        1
    );
}

#[test]
fn simulate_csv_round_trips_and_matches_summary() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "simulate",
                "--pulse",
                "mc",
                "--periods",
                "3",
                "--out",
                "mc.csv"
            ]
        )),
        0
    );
    let (_, rows) = read_csv(dir.path().join("mc.csv"));
    let summary = json(dir.path().join("mc.json"));
    let f_n: Vec<f64> = serde_json::from_value(summary["F_n"].clone()).unwrap();
    for row in &rows {
        let window: usize = row[4].parse().unwrap();
        assert_eq!(row[5].parse::<f64>().unwrap(), f_n[window - 1]);
    }
    let p3_max = column(&rows, 2).into_iter().fold(0.0, f64::max);
    assert_eq!(p3_max, summary["max_p3"].as_f64().unwrap());
}

#[test]
fn sweep_reproduces_decreasing_fluctuations() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "sweep-n",
            "--omega-tg",
            "0.05",
            "--n0",
            "4",
            "--n-min",
            "2",
            "--n-max",
            "20",
            "--order",
            "2",
            "--out",
            "sw.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let (header, rows) = read_csv(dir.path().join("sw.csv"));
    assert_eq!(header, ["N", "lambda1", "predicted_f2"]);
    assert_eq!(rows.len(), 19);
    let lambda = column(&rows, 1);
    let f2 = column(&rows, 2);
    assert!(f2.windows(2).all(|w| w[1] < w[0]));
    for (l, f) in lambda.iter().zip(&f2) {
        assert!((f - 4.0 * l * 0.05).abs() <= 1e-10 * f);
    }
}

#[test]
fn sweep_single_row_and_failures() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            dir.path(),
            &["sweep-n", "--n-min", "2", "--n-max", "2", "--out", "one.csv"]
        )),
        0
    );
    assert_eq!(read_csv(dir.path().join("one.csv")).1.len(), 1);

    assert_eq!(
        code(&run(
            dir.path(),
            &["sweep-n", "--n-min", "1", "--n-max", "3", "--out", "f.csv"]
        )),
        2
    );
    let (_, rows) = read_csv(dir.path().join("f.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[0][1].parse::<f64>().unwrap().is_nan());
    let failures = &json(dir.path().join("f.json"))["failures"];
    assert_eq!(failures[0]["n"], 1);

    assert_eq!(
        code(&run(
            dir.path(),
            &["sweep-n", "--n-min", "5", "--n-max", "3", "--out", "r.csv"]
        )),
        1
    );
}

#[test]
fn robustness_single_unperturbed_trial_matches_simulate() {
    let dir = TempDir::new().unwrap();
    optimize3(dir.path());
    let args = ["--pulse", "opt3.json", "--periods", "3"];
    let mut sim = vec!["simulate"];
    sim.extend(args);
    sim.extend(["--out", "sim.csv"]);
    assert_eq!(code(&run(dir.path(), &sim)), 0);
    let mut rob = vec!["robustness", "--delta", "0", "--trials", "1"];
    rob.extend(args);
    rob.extend(["--out", "rob.csv"]);
    assert_eq!(code(&run(dir.path(), &rob)), 0);

    let f_n: Vec<f64> =
        serde_json::from_value(json(dir.path().join("sim.json"))["F_n"].clone()).unwrap();
    let (header, rows) = read_csv(dir.path().join("rob.csv"));
    assert_eq!(header, ["n", "Fn_mean", "Fn_stderr"]);
    assert_eq!(column(&rows, 1), f_n);
    assert!(column(&rows, 2).iter().all(|&s| s == 0.0));
}

#[test]
fn robustness_is_seeded_and_records_metadata() {
    let dir = TempDir::new().unwrap();
    optimize3(dir.path());
    for name in ["r1.csv", "r2.csv"] {
        let out = run(
            dir.path(),
            &[
                "robustness",
                "--pulse",
                "opt3.json",
                "--delta",
                "auto-quarter",
                "--trials",
                "6",
                "--periods",
                "2",
                "--seed",
                "7",
                "--out",
                name,
            ],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("r1.csv")).unwrap();
    let b = std::fs::read(dir.path().join("r2.csv")).unwrap();
    assert_eq!(a, b);
    let meta = json(dir.path().join("r1.json"));
    let delta_max = meta["delta_max"].as_f64().unwrap();
    assert_eq!(meta["delta"].as_f64().unwrap(), delta_max / 4.0);
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["trials"], 6);
}

#[test]
fn robustness_bad_delta_is_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "robustness",
                "--pulse",
                "mc",
                "--delta",
                "-0.1",
                "--out",
                "x.csv"
            ]
        )),
        1
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &[
                "robustness",
                "--pulse",
                "mc",
                "--delta",
                "0.1",
                "--trials",
                "0",
                "--out",
                "x.csv"
            ]
        )),
        1
    );
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    optimize3(dir.path());
    let cases: [(&[&str], &str); 3] = [
        (
            &[
                "simulate",
                "--pulse",
                "opt3.json",
                "--periods",
                "2",
                "--out",
                "s.csv",
            ],
            "s",
        ),
        (
            &[
                "sweep-n", "--n-min", "2", "--n-max", "6", "--order", "3", "--out", "w.csv",
            ],
            "w",
        ),
        (
            &[
                "robustness",
                "--pulse",
                "mc",
                "--delta",
                "0.002",
                "--trials",
                "3",
                "--periods",
                "2",
                "--seed",
                "11",
                "--out",
                "r.csv",
            ],
            "r",
        ),
    ];
    for (args, stem) in cases {
        assert_eq!(code(&run(dir.path(), args)), 0);
        let csv_path = dir.path().join(format!("{stem}.csv"));
        let first = std::fs::read(&csv_path).unwrap();
        let manifest = json(dir.path().join(format!("{stem}.json")))["manifest"].clone();
        let replay: Vec<String> = serde_json::from_value(manifest["args"].clone()).unwrap();
        std::fs::remove_file(&csv_path).unwrap();
        let replay_refs: Vec<&str> = replay.iter().map(String::as_str).collect();
        assert_eq!(code(&run(dir.path(), &replay_refs)), 0);
        assert_eq!(std::fs::read(&csv_path).unwrap(), first, "{stem}");
    }
}

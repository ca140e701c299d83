use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fliu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fliu"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fliu(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    fliu(args).status.code().expect("exit code")
}

fn canadian() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/canadian_weather")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulated data set in `dir`: `curves_0.csv`, `response.csv`, `truth.toml`.
fn simulated(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--out", s(dir), "--n", "40", "--grid-points", "30", "--sigma2", "0.25"];
    args.extend_from_slice(extra);
    ok(&args);
}

/// Output files except the run log and the config echo (which records `--out`).
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !["run.log", "config.toml"].contains(&p.file_name().unwrap().to_str().unwrap()))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_then_tune_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulated(&data, &[]);
    let out = tmp.path().join("out");
    let stdout = ok(&[
        "tune",
        "--curves",
        s(&data.join("curves_0.csv")),
        "--response",
        s(&data.join("response.csv")),
        "--K",
        "7",
        "--split",
        "30/10",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("fliu"));
    for m in ["ols", "ridge", "liu", "genridge", "fliu"] {
        assert!(out.join(format!("{m}.toml")).exists(), "{m}");
        assert!(out.join(format!("{m}_beta.csv")).exists(), "{m}");
    }
    for f in ["summary.csv", "config.toml", "resolved.toml", "split.toml", "run.log", "fliu_trace.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
}

#[test]
fn identical_runs_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulated(&data, &[]);
    let (curves, response) = (data.join("curves_0.csv"), data.join("response.csv"));
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "tune",
            "--curves",
            s(&curves),
            "--response",
            s(&response),
            "--K",
            "7",
            "--split",
            "0.75",
            "--seed",
            "4",
            "--out",
            s(out),
        ];
        args.extend_from_slice(extra);
        ok(&args);
    };
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run(&a, &[]);
    run(&b, &[]);
    assert_eq!(outputs(&a), outputs(&b));
    run(&c, &["--sequential"]);
    for f in ["summary.csv", "fliu_coef.csv", "fliu_trace.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn fit_at_fixed_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulated(&data, &[]);
    let out = tmp.path().join("out");
    let curves = data.join("curves_0.csv");
    let response = data.join("response.csv");
    let base = ["fit", "--curves", s(&curves), "--response", s(&response), "--K", "7", "--out", s(&out)];
    let mut args = base.to_vec();
    args.extend_from_slice(&["--estimators", "fliu,ols", "--lambda", "0.5", "--d", "-3", "--alpha", "0.2"]);
    ok(&args);
    let report = fs::read_to_string(out.join("fliu.toml")).unwrap();
    assert!(report.contains("lambda = 0.5"), "{report}");
    assert!(report.contains("d = -3.0"), "{report}");

    let mut missing = base.to_vec();
    missing.extend_from_slice(&["--estimators", "ridge"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulated(&data, &[]);
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "curves = [{:?}]\nresponse = {:?}\nk = 5\nestimators = [\"ols\", \"ridge\"]\nlambda_max = 100.0\n",
            s(&data.join("curves_0.csv")),
            s(&data.join("response.csv"))
        ),
    )
    .unwrap();
    ok(&["tune", "--config", s(&cfg), "--K", "7", "--out", s(&out)]);
    let resolved = fs::read_to_string(out.join("resolved.toml")).unwrap();
    assert!(resolved.contains("n_basis = 7"), "{resolved}");
    assert!(resolved.contains("methods = [\"ols\", \"ridge\"]"), "{resolved}");
    assert!(resolved.contains("100.0"), "{resolved}");
    assert!(!out.join("fliu.toml").exists());

    fs::write(&cfg, "curvess = []\n").unwrap();
    assert_eq!(code(&["tune", "--config", s(&cfg)]), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulated(&data, &[]);
    let curves = data.join("curves_0.csv");
    let response = data.join("response.csv");
    let out = tmp.path().join("out");
    assert_eq!(code(&["tune", "--no-such-flag"]), 2);
    assert_eq!(code(&["tune", "--curves", s(&curves), "--out", s(&out)]), 2);
    assert_eq!(
        code(&["tune", "--curves", s(&curves), "--response", s(&response), "--split", "3/3", "--out", s(&out)]),
        2
    );
    let missing = tmp.path().join("missing.csv");
    assert_eq!(code(&["tune", "--curves", s(&missing), "--response", s(&response), "--out", s(&out)]), 3);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "id,y\na,1\nb,-2\n").unwrap();
    let two = tmp.path().join("two.csv");
    fs::write(&two, "id,0,0.5\na,1,2\nb,3,4\n").unwrap();
    assert_eq!(
        code(&["fit", "--curves", s(&two), "--response", s(&bad), "--K", "1", "--log-response", "--estimators", "ols", "--out", s(&out)]),
        3
    );
}

#[test]
fn risk_against_simulated_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulated(&data, &["--rho", "0.9"]);
    let out = tmp.path().join("out");
    ok(&[
        "risk",
        "--curves",
        s(&data.join("curves_0.csv")),
        "--response",
        s(&data.join("response.csv")),
        "--K",
        "7",
        "--period",
        "1",
        "--truth",
        s(&data.join("truth.toml")),
        "--lambda",
        "1",
        "--alpha",
        "0.5",
        "--replications",
        "20000",
        "--d-grid",
        "-1,0,0.5,1",
        "--out",
        s(&out),
    ]);
    let text = fs::read_to_string(out.join("risk.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!((r[1] - r[2]).abs() <= 4.0 * r[3], "{r:?}");
    }
    let summary = fs::read_to_string(out.join("risk.toml")).unwrap();
    assert!(summary.contains("coefficients = \"truth\""));
    assert!(summary.contains("improves_on_ols = true"));
}

#[test]
fn degeneracy_flags_underdetermined_design() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["simulate", "--out", s(&data), "--n", "12", "--grid-points", "40", "--k-true", "21"]);
    let out = tmp.path().join("out");
    let stdout = ok(&[
        "degeneracy",
        "--curves",
        s(&data.join("curves_0.csv")),
        "--response",
        s(&data.join("response.csv")),
        "--K",
        "21",
        "--period",
        "1",
        "--lambda",
        "0.1",
        "--alpha",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("flat in d: true"), "{stdout}");
    let report = fs::read_to_string(out.join("degeneracy.toml")).unwrap();
    assert!(report.contains("degenerate = true"));
    assert!(report.contains("full_row_rank = true"));
}

#[test]
fn canadian_weather_ols_has_highest_test_loss() {
    let d = canadian();
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "tune",
        "--curves",
        s(&d.join("temperature_daily.csv")),
        "--response",
        s(&d.join("precipitation_annual.csv")),
        "--log-response",
        "--K",
        "11",
        "--period",
        "365",
        "--split",
        "24/11",
        "--out",
        s(tmp.path()),
    ]);
    let text = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let test: Vec<(String, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[7].parse().unwrap())
        })
        .collect();
    let ols = test.iter().find(|t| t.0 == "ols").unwrap().1;
    assert!(test.iter().all(|t| t.1 <= ols), "{test:?}");
    let split = fs::read_to_string(tmp.path().join("split.toml")).unwrap();
    assert!(split.contains("cond_train = 3387"), "{split}");
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gatecrit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gatecrit"))
        .args(args)
        .env_remove("GATECRIT_OUT_DIR")
        .env_remove("GATECRIT_JOBS")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Header lines, column line and data lines of a CSV output.
fn split_csv(text: &str) -> (Vec<&str>, &str, Vec<&str>) {
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    let mut rest = text.lines().skip(header.len());
    let columns = rest.next().expect("column line");
    (header, columns, rest.collect())
}

fn meta<'a>(header: &[&'a str], key: &str) -> Option<&'a str> {
    header
        .iter()
        .filter_map(|l| l.strip_prefix("# ")?.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

#[test]
fn zero_bias_closed_forms_print_exact_values() {
    for (arch, want) in [("lstm", "g_c = 2"), ("gru", "g_c = 2"), ("rnn", "g_c = 1")] {
        let o = gatecrit(&["gc", "--arch", arch, "--bias", "zero"]);
        assert!(o.status.success(), "{arch}: {}", stderr(&o));
        assert_eq!(stdout(&o).trim(), want);
    }
}

#[test]
fn invalid_arguments_give_one_line_diagnostics() {
    let cases: &[&[&str]] = &[
        &["gc", "--bogus"],
        &["gc", "--arch", "transformer"],
        &["gc", "--bias", "zero", "--sb", "1"],
        &["qinf", "--gains", "1:0:0.5"],
        &["frobnicate"],
        &["lyapunov", "--mode", "sideways"],
    ];
    for args in cases {
        let o = gatecrit(args);
        assert!(!o.status.success(), "{args:?} should fail");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(!err.trim().is_empty());
        assert!(o.stdout.is_empty(), "{args:?} wrote to stdout");
    }
}

#[test]
fn help_lists_defaults() {
    let o = gatecrit(&["lyapunov", "--help"]);
    assert!(o.status.success());
    let h = stdout(&o);
    for needle in ["[default: 1000]", "[default: 3000]", "[default: 1e-7]", "[default: 10]", "1:3:0.25"] {
        assert!(h.contains(needle), "missing {needle}");
    }
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "# qinf settings\ncommon.seed = 11\ncommon.n = 24\nqinf.n = 16\nqinf.t = 120\nqinf.replicas = 2\nlyapunov.t = 9\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let o = gatecrit(&["qinf", "--config", c, "--arch", "rnn", "--gains", "0.5", "--replicas", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let (header, _, rows) = split_csv(&text);
    assert_eq!(meta(&header, "seed"), Some("11"));
    assert_eq!(meta(&header, "n"), Some("16"));
    assert_eq!(meta(&header, "t"), Some("120"));
    assert_eq!(meta(&header, "replicas"), Some("3"));
    assert_eq!(meta(&header, "tail_window"), Some("30"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("5.0000000000000000e-1,0.0000000000000000e0,0.0000000000000000e0,16,120,3,"));

    std::fs::write(&cfg, "qinf.nonsense = 1\n").unwrap();
    let o = gatecrit(&["qinf", "--config", c, "--gains", ""]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nonsense"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, flag, cols) in [
        ("qinf", "--gains=", "g,s_b,s_c,N,T,replicas,mean_q_inf,ci95"),
        ("lyapunov", "--gains=", "s_b,g,lambda_max,stderr,N,T,eps,seed"),
        ("spectrum", "--gains=", "g,radius_mean,radius_ci,N,replicas"),
        ("reservoir", "--ratios=", "s_b,g,g_over_gc,N,seed,train_mse,test_mse"),
    ] {
        let path = dir.path().join(format!("{sub}.csv"));
        let o = gatecrit(&[sub, flag, "--out", path.to_str().unwrap()]);
        assert!(o.status.success(), "{sub}: {}", stderr(&o));
        let text = std::fs::read_to_string(&path).unwrap();
        let (header, columns, rows) = split_csv(&text);
        assert_eq!(header[0], format!("# kind={sub}"));
        assert!(meta(&header, "gatecrit_version").is_some());
        assert_eq!(columns, cols);
        assert!(rows.is_empty());
    }
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.extend(["--out", &p]);
    let o = gatecrit(&full);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["qinf", "--n", "40", "--t", "200", "--replicas", "3", "--gains", "1,2.5", "--seed", "9"],
        &["lyapunov", "--arch", "gru", "--n", "40", "--t", "200", "--transient", "50", "--replicas", "2", "--gains", "1.5,3"],
        &["spectrum", "--arch", "rnn", "--n", "40", "--gains", "0.5,1", "--replicas", "2"],
        &["reservoir", "--n", "20", "--seeds", "2", "--ratios", "0.5,1", "--train", "200", "--test", "50", "--washout", "50"],
        &["mackey-glass", "--length", "1300", "--washout", "1000"],
    ];
    for args in cases {
        let a = run_to(dir.path(), "a.csv", args);
        let b = run_to(dir.path(), "b.csv", args);
        assert_eq!(a, b, "{args:?}");
        assert!(split_csv(&a).2.len() >= 2);
    }
    // Worker count never changes results.
    let mut seq = cases[0].to_vec();
    seq.extend(["--jobs", "1"]);
    assert_eq!(run_to(dir.path(), "s.csv", &seq), run_to(dir.path(), "p.csv", cases[0]));
}

/// Structural schema shared by every subcommand's JSON output.
fn validate_schema(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("top level must be an object")?;
    let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
    keys.sort_unstable();
    if keys != ["columns", "kind", "meta", "rows"] {
        return Err(format!("unexpected keys {keys:?}"));
    }
    obj["kind"].as_str().ok_or("kind must be a string")?;
    for pair in obj["meta"].as_array().ok_or("meta must be an array")? {
        let p = pair.as_array().ok_or("meta entries must be pairs")?;
        if p.len() != 2 || !p.iter().all(Value::is_string) {
            return Err("meta entries must be [string, string]".into());
        }
    }
    let columns = obj["columns"].as_array().ok_or("columns must be an array")?;
    if !columns.iter().all(Value::is_string) {
        return Err("column names must be strings".into());
    }
    for row in obj["rows"].as_array().ok_or("rows must be an array")? {
        let cells = row.as_array().ok_or("rows must be arrays")?;
        if cells.len() != columns.len() {
            return Err("row width differs from column count".into());
        }
        for c in cells {
            let ok = c.is_number() || c.is_string();
            if !ok {
                return Err(format!("bad cell {c}"));
            }
        }
    }
    Ok(())
}

#[test]
fn json_output_validates_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["qinf", "--n", "30", "--t", "100", "--replicas", "1", "--gains", "0.5,3"],
        &["gc", "--arch", "gru", "--sb", "1"],
        &["spectrum", "--arch", "rnn", "--n", "30", "--gains", "0.8", "--replicas", "2"],
        &["spectrum", "--arch", "rnn", "--n", "30", "--gains", "0.8", "--eigenvalues"],
        &["lyapunov", "--gains="],
    ];
    for args in cases {
        let text = run_to(dir.path(), "out.json", args);
        let v: Value = serde_json::from_str(&text).unwrap();
        validate_schema(&v).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        assert_eq!(v["kind"], args[0]);
        let parsed = gatecrit::sweep::SweepResult::from_json_str(&text).unwrap();
        assert_eq!(parsed.to_json_string(), text);
        assert_eq!(parsed.columns.len(), v["columns"].as_array().unwrap().len());
    }
    // A single replica has an unbounded interval, which must survive JSON.
    let text = run_to(dir.path(), "q.json", cases[0]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["rows"][0][7], "inf");
}

#[test]
fn csv_and_json_carry_the_same_data() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["qinf", "--n", "30", "--t", "100", "--replicas", "2", "--gains", "1,2"];
    let csv = run_to(dir.path(), "x.csv", &args);
    let json = run_to(dir.path(), "x.json", &args);
    let parsed = gatecrit::sweep::SweepResult::from_json_str(&json).unwrap();
    assert_eq!(parsed.to_csv_string(), csv);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gatecrit"))
        .args(["mackey-glass", "--length", "1100", "--washout", "1000", "--format", "json"])
        .env("GATECRIT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("mackey-glass.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 100);
    assert_eq!(v["rows"][0][0], 1000);
}

#[test]
fn phase_reports_prediction_and_crossing_per_bias() {
    let o = gatecrit(&[
        "phase", "--arch", "gru", "--sb", "0,1", "--mode", "both", "--n", "60", "--replicas", "2", "--t", "300",
        "--transient", "100",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let (_, columns, rows) = split_csv(&text);
    assert_eq!(columns, "s_b,g_c_asymptotic,g_c_finite,g_c_finite_ci,g_star,g_star_ci,N,replicas");
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("0.0000000000000000e0,2.0000000000000000e0,2.0000000000000000e0,"));
    for r in rows {
        assert!(!r.contains("NaN"), "{r}");
    }

    let o = gatecrit(&["phase", "--arch", "gru", "--sb", "0,1", "--mode", "predicted", "--n", "60", "--replicas", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = split_csv(&text).2;
    assert!(rows.iter().all(|r| r.contains(",NaN,NaN,60,2")));
}

#[test]
fn failed_crossing_writes_results_then_exits_nonzero() {
    // RNN with T too short to matter, bracket pinned well below the transition.
    let o = gatecrit(&[
        "phase", "--arch", "rnn", "--sb", "0", "--mode", "empirical", "--n", "40", "--replicas", "1", "--t", "100",
        "--transient", "20", "--g-lo", "0.1", "--g-hi", "0.2", "--max-expand", "0",
    ]);
    assert!(!o.status.success());
    assert_eq!(split_csv(&stdout(&o)).2.len(), 1);
    assert_eq!(stderr(&o).lines().count(), 1);
}

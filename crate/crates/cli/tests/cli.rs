use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn greencell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greencell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn baseline() -> String {
    scenarios()
        .join("baseline.example.json")
        .display()
        .to_string()
}

fn green() -> String {
    scenarios().join("green.example.json").display().to_string()
}

#[test]
fn run_writes_cdf_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = greencell(&[
        "run",
        "--scenario",
        &baseline(),
        "--snapshots",
        "2",
        "--out",
        path_str(&out),
        "--svg",
        "--dump-gains",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let cdf = fs::read_to_string(dir.path().join("r_cdf.csv")).unwrap();
    assert!(cdf.starts_with("run,power_dbm,cum_frac\n"));
    let last: f64 = cdf
        .lines()
        .last()
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(last, 1.0);
    let summary = fs::read_to_string(dir.path().join("r_summary.csv")).unwrap();
    assert!(summary.starts_with("metric,value\n"));
    assert!(dir.path().join("r_cdf.svg").exists());
    let gains = fs::read_to_string(dir.path().join("r_gains.csv")).unwrap();
    assert!(gains.starts_with("ms,direction,point,value_db\n"));
}

#[test]
fn missing_scenario_is_a_validation_error_naming_the_path() {
    let o = greencell(&["run", "--scenario", "/nonexistent/where.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/where.json"));
}

#[test]
fn invalid_scenario_lists_the_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(baseline())
        .unwrap()
        .replace("\"p_min_dbm\": -50.0", "\"p_min_dbm\": -30.0");
    let p = dir.path().join("bad.json");
    fs::write(&p, text).unwrap();
    let o = greencell(&["run", "--scenario", path_str(&p), "--snapshots", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("radio"));
}

#[test]
fn unpaired_comparison_exits_with_pairing_code() {
    let dir = tempfile::tempdir().unwrap();
    let moved = dir.path().join("moved.json");
    // nudge the first site 5 m east
    let text = fs::read_to_string(green()).unwrap();
    let pos = text.find("\"position\"").unwrap();
    let end = pos + text[pos..].find(']').unwrap();
    let shifted = format!("{}\"position\": [5.0, 0.0{}", &text[..pos], &text[end..]);
    fs::write(&moved, shifted).unwrap();
    let out = dir.path().join("c");
    let o = greencell(&[
        "compare",
        "--scenario",
        &baseline(),
        "--green-scenario",
        path_str(&moved),
        "--snapshots",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!dir.path().join("c_cdf.csv").exists());
}

#[test]
fn bad_flag_is_a_usage_error() {
    let o = greencell(&["run", "--scenario", &baseline(), "--combining", "maximal"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = greencell(&[
            "compare",
            "--scenario",
            &baseline(),
            "--green-scenario",
            &green(),
            "--snapshots",
            "3",
            "--seed",
            "11",
            "--jobs",
            jobs,
            "--out",
            path_str(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        (
            fs::read(dir.path().join(format!("{name}_cdf.csv"))).unwrap(),
            fs::read(dir.path().join(format!("{name}_summary.csv"))).unwrap(),
        )
    };
    assert_eq!(run("a", "1"), run("b", "4"));
}

fn sweep_rows(args: &[&str]) -> Vec<Vec<String>> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let mut all = vec!["sweep", "--out", path_str(&out)];
    all.extend_from_slice(args);
    let o = greencell(&all);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(dir.path().join("s_sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("axis,value,snapshots,samples,mean_tx_dbm"));
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn green_count_sweep_lowers_mean_power() {
    let rows = sweep_rows(&[
        "--scenario",
        &baseline(),
        "--green-scenario",
        &green(),
        "--axis",
        "green-count",
        "--snapshots",
        "3",
    ]);
    assert_eq!(rows.len(), 2);
    let mean = |r: &Vec<String>| r[4].parse::<f64>().unwrap();
    assert!(mean(&rows[1]) <= mean(&rows[0]));
}

#[test]
fn combining_sweep_orders_mrc_below_selection() {
    let rows = sweep_rows(&[
        "--scenario",
        &green(),
        "--axis",
        "combining",
        "--values",
        "mrc,sel,egc",
        "--snapshots",
        "2",
    ]);
    assert_eq!(rows.len(), 3);
    let mean = |r: &Vec<String>| r[4].parse::<f64>().unwrap();
    assert!(mean(&rows[0]) <= mean(&rows[1]));
}

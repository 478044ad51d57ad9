use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use cookie_walk::{CookieEnvironment, JumpDistribution, Trajectory};
use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cookie-walk-lab"))
        .args(args)
        .env_remove("COOKIE_WALK_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_of(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# cookie-walk-lab schema v1"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_owned()).collect()
}

#[test]
fn criteria_reports_condition_and_frontier() {
    let o = lab(&["criteria", "--family", "L=15,eps=0.01", "--c", "3", "--ell", "13"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_of(&o);
    assert_eq!(v["result"]["criteria"]["satisfied"], Value::Bool(true));
    let eps = v["result"]["frontier_epsilon"].as_f64().unwrap();
    assert!((eps - 1.0 / 66.0).abs() < 1e-9);
}

#[test]
fn sweep_lhs_decreases_along_epsilon() {
    let o = lab(&["sweep", "--family", "L=15", "--eps", "0.0:0.05:0.005"]);
    assert_eq!(o.status.code(), Some(0));
    let lhs: Vec<f64> = csv_column(&stdout(&o), "condition_lhs")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(lhs.len(), 11);
    assert!(lhs.windows(2).all(|w| w[1] < w[0]));
    let satisfied = csv_column(&stdout(&o), "satisfied");
    assert_eq!(satisfied.iter().filter(|s| *s == "true").count(), 4);
}

#[test]
fn sweep_over_blocks_and_with_speed() {
    let o = lab(&[
        "sweep", "--family", "L=15,eps=0.01", "--c-range", "3:4", "--ell-range", "9:13", "--with-speed",
        "--replicas", "4", "--horizon", "2000",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    // (3, 9..=13) and (4, 12..=13)
    assert_eq!(csv_column(&text, "c").len(), 7);
    assert!(csv_column(&text, "speed").iter().all(|s| s.parse::<f64>().unwrap() > 14.0));
}

#[test]
fn speed_is_positive_with_interval_excluding_zero() {
    let o = lab(&["speed", "--family", "L=15,eps=0.01", "--replicas", "100", "--horizon", "1000000"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_of(&o);
    let naive = &v["result"]["naive"]["estimate"];
    assert!(naive["ci_low"].as_f64().unwrap() > 0.0);
    let gap = v["result"]["relative_gap"].as_f64().unwrap();
    assert!(gap < 0.05);
}

#[test]
fn speed_csv_columns() {
    let o = lab(&["speed", "--replicas", "3", "--horizon", "20000", "--out", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(
        text.lines().nth(1),
        Some("seed,replica,method,point,ci_low,ci_high,n_renewals")
    );
    let methods = csv_column(&text, "method");
    assert_eq!(methods.iter().filter(|m| *m == "renewal").count(), 4);
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_seconds");
    v
}

#[test]
fn identical_configs_give_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let path = dir.path().join(name);
        let mut args = vec!["couple", "--replicas", "3", "--horizon", "30000", "--seed", "9", "--output"];
        args.push(path.to_str().unwrap());
        args.extend_from_slice(extra);
        assert_eq!(lab(&args).status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    let a: Value = serde_json::from_slice(&run("a.json", &[])).unwrap();
    let b: Value = serde_json::from_slice(&run("b.json", &[])).unwrap();
    assert_eq!(without_wall_time(a), without_wall_time(b));
    assert_eq!(run("a.csv", &["--out", "csv"]), run("b.csv", &["--emit-csv"]));

    let threaded = Command::new(env!("CARGO_BIN_EXE_cookie-walk-lab"))
        .args(["simulate", "--replicas", "6", "--horizon", "5000"])
        .env("COOKIE_WALK_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(threaded.stdout, lab(&["simulate", "--replicas", "6", "--horizon", "5000"]).stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"distribution": {"support": [-1, 2], "probs": [0.2, 0.8]}, "replicas": 7, "horizon": 500, "seed": 3}"#,
    )
    .unwrap();
    let o = lab(&["speed", "--config", path.to_str().unwrap(), "--seed", "11", "--dump-config"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_of(&o);
    assert_eq!(v["seed"], 11);
    assert_eq!(v["replicas"], 7);
    assert_eq!(v["distribution"]["probs"][1], 0.8);

    // the dump reads back as a config
    let dumped = dir.path().join("dumped.json");
    std::fs::write(&dumped, stdout(&o)).unwrap();
    let again = lab(&["speed", "--config", dumped.to_str().unwrap(), "--dump-config"]);
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"replica": 3}"#).unwrap();
    for args in [
        vec!["couple", "--c", "3", "--ell", "8"],
        vec!["speed", "--replicas", "0"],
        vec!["criteria", "--family", "L=15"],
        vec!["criteria", "--dist", r#"{"support": [-1, 1], "probs": [0.5, 0.6]}"#],
        vec!["sweep", "--eps", "0:0.1:0.01", "--dist", r#"{"support": [-1, 1], "probs": [0.5, 0.5]}"#],
        vec!["simulate", "--replicas", "2", "--out", "record"],
        vec!["speed", "--config", bad.to_str().unwrap()],
        vec!["speed", "--no-such-flag"],
        vec!["frobnicate"],
    ] {
        let o = lab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_cookie-walk-lab"))
        .args(["criteria"])
        .env("COOKIE_WALK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_hypothesis_exits_with_one() {
    // A walk that steps left more often than a fair coin breaks the
    // exit-time domination hypothesis.
    let o = lab(&[
        "verify-lemmas", "--dist", r#"{"support": [-1, 1], "probs": [0.6, 0.4]}"#, "--replicas", "100",
        "--horizon", "10000",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v = json_of(&o);
    assert_eq!(v["result"]["exit_time"]["pass"], Value::Bool(false));
    assert_eq!(v["result"]["monotone_coupling"]["pass"], Value::Bool(true));
}

#[test]
fn verify_lemmas_passes_on_the_family() {
    let o = lab(&["verify-lemmas", "--family", "L=15,eps=0.01", "--replicas", "10000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json_of(&o);
    assert_eq!(v["result"]["exit_time"]["block_bound_violations"], 0);
    assert!(v["result"]["exit_time"]["coin"]["second_moment"].as_f64().unwrap() <= 49152.0);
}

#[test]
fn simulate_record_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("walk.txt");
    let o = lab(&[
        "simulate", "--family", "L=6,eps=0.2", "--horizon", "3000", "--seed", "4", "--out", "record",
        "--output", path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let env = Arc::new(CookieEnvironment::one_cookie(JumpDistribution::epsilon_family(6, 0.2).unwrap()));
    let text = std::fs::read_to_string(Path::new(&path)).unwrap();
    let traj = Trajectory::from_record(&text, env.clone()).unwrap();
    assert_eq!(traj.positions(), cookie_walk::simulate_replica(&env, 4, 0, 3000).positions());
}

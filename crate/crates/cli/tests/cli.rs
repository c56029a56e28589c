use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn qpn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_fixture() {
    let o = qpn(&["validate", "--spec", &fixture("video.qpn.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "OK\n");
}

#[test]
fn validate_reports_violations_one_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.qpn.json");
    let text = r#"{"net": {
        "places": [{"id": "p", "kind": "ordinary"}, {"id": "q", "kind": "ordinary"}],
        "transitions": [
            {"id": "t", "kind": "immediate", "weight": 1},
            {"id": "u", "kind": "immediate", "weight": 1}
        ],
        "arcs": [{"from": "t", "to": "p"}, {"from": "u", "to": "q"}]
    }}"#;
    std::fs::write(&path, text).unwrap();
    let o = qpn(&["validate", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.lines().count() >= 2, "{out}");
    assert!(out.contains("`t`") && out.contains("`u`"), "{out}");
}

#[test]
fn parse_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.qpn.json");
    let text = std::fs::read_to_string(fixture("md1.qpn.json")).unwrap().replace("\"mean\"", "\"meen\"");
    std::fs::write(&path, text).unwrap();
    let o = qpn(&["validate", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("meen") && err.contains("bad.qpn.json"), "{err}");
    assert!(!err.contains("panicked"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["simulate", "--spec", "x.qpn.json"],
        vec!["validate", "--spec", "x", "--bogus"],
        vec!["frobnicate"],
        vec!["sweep", "--spec", "x", "--horizon", "1", "--param", "a"],
        vec!["simulate", "--spec", "x", "--horizon", "1", "--runs", "0"],
        vec!["simulate", "--spec", "x", "--horizon", "1", "--format", "xml"],
    ] {
        let o = qpn(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = qpn(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = stdout(&o);
    for sub in ["validate", "simulate", "sweep", "bottleneck", "placement", "export-dot"] {
        assert!(help.contains(sub), "{sub}");
    }
}

#[test]
fn bad_config_is_a_plain_error() {
    let o = qpn(&["simulate", "--spec", &fixture("md1.qpn.json"), "--horizon", "10", "--warmup", "20"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: "));
}

#[test]
fn simulate_prints_summary_with_requested_runs() {
    let o = qpn(&["simulate", "--spec", &fixture("md1.qpn.json"), "--horizon", "200", "--runs", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("metric,n,mean,sd,ci95_half_width"));
    assert!(lines.next().unwrap().starts_with("e2e_delay,4,"));
    assert!(out.contains("queue_length[server.in],4,"));
}

#[test]
fn simulate_json_file_carries_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = qpn(&[
        "simulate", "--spec", &fixture("md1.qpn.json"), "--horizon", "50", "--runs", "2", "--format", "json", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 2);
    assert_eq!(v["runs"][0]["queues"]["server.in"]["series"].as_array().unwrap().len(), 50);
    assert_eq!(v["summary"][0]["metric"], "e2e_delay");
}

#[test]
fn identical_invocations_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let trace = dir.path().join(format!("{tag}.ndjson"));
        let o = qpn(&[
            "simulate", "--spec", &fixture("video.qpn.json"), "--horizon", "500", "--runs", "3", "--out",
            csv.to_str().unwrap(), "--trace", trace.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        (std::fs::read(csv).unwrap(), std::fs::read(trace).unwrap())
    };
    let (a_csv, a_trace) = run("a");
    let (b_csv, b_trace) = run("b");
    assert_eq!(a_csv, b_csv);
    assert_eq!(a_trace, b_trace);
    let first = String::from_utf8(a_trace).unwrap();
    let rec: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert!(rec.get("transition").is_some() && rec.get("time").is_some());
}

#[test]
fn sweep_has_one_row_per_value() {
    let o = qpn(&[
        "sweep", "--spec", &fixture("video.qpn.json"), "--param", "vnfs.cache.outputs.random[0].weight", "--values",
        "0.5,0.65,0.7,0.8,0.95", "--horizon", "300", "--runs", "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 6);
    let values: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(values, ["0.5", "0.65", "0.7", "0.8", "0.95"]);
}

#[test]
fn sweep_with_unknown_parameter_fails() {
    let o = qpn(&[
        "sweep", "--spec", &fixture("video.qpn.json"), "--param", "vnfs.nope.processing.value", "--values", "1",
        "--horizon", "10", "--runs", "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("vnfs.nope.processing.value"));
}

#[test]
fn bottleneck_marks_the_server() {
    let o = qpn(&[
        "bottleneck", "--spec", &fixture("md1.qpn.json"), "--rates", "0.5,4", "--horizon", "2000", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["verdict"], "stable");
    assert_eq!(rows[0]["bottleneck"], "false");
    assert_eq!(rows[1]["verdict"], "unstable");
    assert_eq!(rows[1]["bottleneck"], "true");
}

#[test]
fn placement_ranks_candidates() {
    let o = qpn(&[
        "placement", "--spec", &fixture("chain.qpn.json"), "--placements", &fixture("chain.placements.qpn.json"),
        "--horizon", "100", "--runs", "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "rank,placement,runs,e2e_mean,e2e_ci95,throughput_mean,throughput_ci95");
    assert!(rows[1].starts_with("1,colocated,2,0.2,"));
    assert!(rows[2].starts_with("2,split,2,0.25,"));

    let raw = qpn(&[
        "placement", "--spec", &fixture("branching.qpn.json"), "--placements", &fixture("chain.placements.qpn.json"),
        "--horizon", "10",
    ]);
    assert_eq!(raw.status.code(), Some(1));
}

#[test]
fn export_dot_writes_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.dot");
    let o = qpn(&["export-dot", "--spec", &fixture("branching.qpn.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let dot = std::fs::read_to_string(out).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), 6);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn teleo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teleo")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("teleo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn shipped_scenarios_pass() {
    for name in ["absent_minded.toml", "testing.toml", "hidden.toml"] {
        let o = teleo(&["run", &scenario(name)]);
        assert!(o.status.success(), "{name}:\n{}", stdout(&o));
        assert!(stdout(&o).ends_with(", 0 failed\n"));
    }
}

#[test]
fn demos_pass() {
    for name in ["doom-despair", "testing-specifiable", "absent-minded-driver", "tricky-testing", "truncation-equivalence"] {
        let o = teleo(&["demo", name]);
        assert!(o.status.success(), "{name}:\n{}", stdout(&o));
        assert!(stdout(&o).contains(": PASS\n"));
    }
    let o = teleo(&["demo", "ufs-counterexample", "--n", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("n2_policy_value = 2/3"));
}

#[test]
fn demo_list_and_unknown() {
    let o = teleo(&["demo", "list"]);
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = teleo(&["demo", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown demo"));
}

#[test]
fn structured_output_is_deterministic() {
    let path = scenario("testing.toml");
    let a = teleo(&["run", &path, "--format", "structured"]);
    let b = teleo(&["run", &path, "--format", "structured", "--parallel"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["summary"]["failed"], 0);
    assert_eq!(v["tasks"][0]["kind"], "eval");
    assert_eq!(v["tasks"][0]["result"]["exact"], "1");
}

#[test]
fn dump_round_trips() {
    let first = teleo(&["run", &scenario("testing.toml"), "--dump"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let dumped = stdout(&first);
    assert!(dumped.contains("kind = \"machine\""));
    let path = temp("dumped.toml", &dumped);
    let second = teleo(&["run", path.to_str().unwrap(), "--dump"]);
    assert_eq!(dumped, stdout(&second));
    let direct = teleo(&["run", &scenario("testing.toml"), "--format", "structured"]);
    let again = teleo(&["run", path.to_str().unwrap(), "--format", "structured"]);
    let x: serde_json::Value = serde_json::from_slice(&direct.stdout).unwrap();
    let y: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
    for k in 0..x["tasks"].as_array().unwrap().len() {
        assert_eq!(x["tasks"][k]["result"], y["tasks"][k]["result"], "task {}", k + 1);
    }
}

#[test]
fn parse_errors_name_the_line() {
    let path = temp("broken.toml", "states = [\"s\"]\nactions = [\"a\"\n");
    let o = teleo(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_expectation_sets_exit_code() {
    let text = r#"states = ["road"]
actions = ["continue", "exit"]

[policies.coin]
kind = "iid"
weights = { continue = "1/2", exit = "1/2" }

[environments.highway]
kind = "absent-minded"

[[tasks]]
kind = "eval"
policy = "coin"
env = "highway"
expect = "1/3"

[[tasks]]
kind = "eval"
policy = "coin"
env = "missing"
"#;
    let path = temp("failing.toml", text);
    let o = teleo(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("[1] eval coin @ highway: FAIL"), "{out}");
    assert!(out.contains("[2] eval coin @ missing: ERROR"), "{out}");
    assert!(out.ends_with("2 tasks, 2 failed\n"));
}

#[test]
fn check_subcommand() {
    let path = scenario("testing.toml");
    let o = teleo(&["check", &path, "--policy", "alternate", "--env", "tricky", "--kind", "sensorimotor", "--trajectory", "left:a"]);
    assert!(stdout(&o).contains("outcome = fail"), "{}", stdout(&o));
    assert_eq!(o.status.code(), Some(1));
    let o = teleo(&["check", &path, "--policy", "alternate", "--env", "tricky", "--kind", "bellman", "--trajectory", "left:a"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = teleo(&["eval", &path, "--policy", "always-b", "--env", "test"]);
    assert!(stdout(&o).contains("exact = 3/4"), "{}", stdout(&o));
}

use std::process::{Command, Output};

fn coloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coloc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn empty_trace_gives_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let o = coloc(&["replay", "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "");
}

#[test]
fn malformed_trace_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"seq\":1,\"op\":\"add_user\",\"payload\":{\"user\":\"a\"}}\n{oops\n").unwrap();
    let o = coloc(&["replay", "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn generated_trace_replays_clean_and_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.jsonl");
    let p = path.to_str().unwrap();
    let o = coloc(&["generate", "--seed", "5", "--users", "8", "--resources", "60", "--prefs", "12", "--out", p]);
    assert_eq!(o.status.code(), Some(0));
    let again = coloc(&["generate", "--seed", "5", "--users", "8", "--resources", "60", "--prefs", "12"]);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&again));

    let mut text = std::fs::read_to_string(&path).unwrap();
    let last_seq = text.lines().count();
    text.push_str(&format!("{{\"seq\":{},\"op\":\"verify\",\"payload\":{{}}}}\n", last_seq + 1));
    std::fs::write(&path, text).unwrap();
    let a = coloc(&["replay", "--trace", p]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = coloc(&["replay", "--trace", p]);
    assert_eq!(stdout(&a), stdout(&b));
    let log = stdout(&a);
    assert_eq!(log.lines().filter(|l| l.contains("\"op\":\"publish\"")).count(), 60);
    assert!(log.lines().last().unwrap().starts_with("{\"op\":\"final_store\""));

    let c = coloc(&["replay", "--trace", p, "--concurrent"]);
    assert_eq!(c.status.code(), Some(0), "{}", stdout(&c));
    assert!(stdout(&c).contains("\"serializable\":true"));

    // dump → verify
    let dump = log.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(dump).unwrap();
    let store = dir.path().join("store.json");
    std::fs::write(&store, v["store"].to_string()).unwrap();
    let o = coloc(&["verify", "--store", store.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "[]");
}

#[test]
fn scenarios() {
    let all = coloc(&["scenario"]);
    assert_eq!(all.status.code(), Some(0), "{}", stdout(&all));
    assert!(stdout(&all).lines().all(|l| l.contains("\"passed\":true")));
    assert!(stdout(&all).lines().count() >= 10);
    let one = coloc(&["scenario", "alice_bob"]);
    assert_eq!(one.status.code(), Some(0));
    let unknown = coloc(&["scenario", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
    let list = coloc(&["scenario", "--list"]);
    assert!(stdout(&list).contains("mary_probe_with_A"));
}

#[test]
fn alice_bob_log_shows_the_enlargement() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ab.jsonl");
    let scenario = coloc_core::scenario::find("alice_bob").unwrap();
    std::fs::write(&path, coloc_core::trace::write_trace(&scenario.trace)).unwrap();
    let o = coloc(&["replay", "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let second = stdout(&o).lines().filter(|l| l.contains("\"op\":\"publish\"")).nth(1).unwrap().to_string();
    assert!(second.contains("SpatialEnlarged"), "{second}");
}

#[test]
fn violations_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let dump = serde_json::json!({
        "users": ["u"], "friends": [], "preferences": [],
        "resources": [
            {"rid": "a", "users": ["u"], "owner": "u", "time": 0, "space": {"cx": 0.0, "cy": 0.0, "radius": 100.0}, "content_b64": ""},
            {"rid": "b", "users": ["u"], "owner": "u", "time": 60, "space": {"cx": 30.0, "cy": 0.0, "radius": 5.0}, "content_b64": ""}
        ]
    });
    std::fs::write(&store, dump.to_string()).unwrap();
    let o = coloc(&["verify", "--store", store.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("DependentPair"));
}

#[test]
fn bad_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, "{\"v_max\": -1}").unwrap();
    let o = coloc(&["scenario", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

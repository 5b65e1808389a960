use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn textmerge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textmerge")).args(args).output().unwrap()
}

fn with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_textmerge"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn apply_from_stdin() {
    let o = with_stdin(
        &["apply", "--diffs", r#"[{"op":"i","pos":3,"text":"hé"},{"op":"d","pos":1,"len":2}]"#],
        "abcdef",
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "ahédef\n");
}

#[test]
fn apply_exit_codes() {
    let o = with_stdin(&["apply", "--diffs", r#"[{"op":"d","pos":2,"len":5}]"#], "abc");
    assert_eq!(o.status.code(), Some(3));
    let o = with_stdin(&["apply", "--diffs", "[{"], "abc");
    assert_eq!(o.status.code(), Some(2));
    let o = with_stdin(&["apply", "--diffs", r#"[{"op":"i","pos":0,"text":""}]"#], "abc");
    assert_eq!(o.status.code(), Some(2));
    let o = textmerge(&["apply", "--doc", "/definitely/missing", "--diffs", "[]"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn xform_prints_both_sides() {
    let o = textmerge(&[
        "xform",
        "--a",
        r#"[{"op":"i","pos":12,"text":"a"}]"#,
        "--b",
        r#"[{"op":"i","pos":27,"text":"a"}]"#,
        "--doc",
        "0123456789012345678901234567890",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["b_after_a"], serde_json::json!([{"op":"i","pos":28,"text":"a"}]));
    assert_eq!(v["a_after_b"], serde_json::json!([{"op":"i","pos":12,"text":"a"}]));

    let o = textmerge(&["xform", "--a", r#"[{"op":"d","pos":5,"len":1}]"#, "--b", "[]", "--doc", "abc"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fuzz_small_exhaustive_and_negative_control() {
    let o = textmerge(&["fuzz", "--mode", "exhaustive", "--max-doc-len", "3", "--max-text-len", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["report"]["counterexamples"], serde_json::json!([]));

    let o = textmerge(&[
        "fuzz",
        "--mode",
        "exhaustive",
        "--max-doc-len",
        "3",
        "--max-text-len",
        "1",
        "--rules",
        "literal-equal-deletes",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let o = textmerge(&["fuzz", "--mode", "exhaustive", "--alphabet", ""]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fuzz_seq_and_epsilon() {
    for mode in ["seq", "epsilon"] {
        let o = textmerge(&["fuzz", "--mode", mode, "--trials", "200", "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{mode}");
        let v = stdout_json(&o);
        assert_eq!(v["passes"], 200);
    }
}

#[test]
fn simulate_single_and_batch() {
    let o = textmerge(&["simulate", "--clients", "3", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["converged"], true);

    let o = textmerge(&["simulate", "--clients", "2", "--runs", "20", "--split", "leftmost"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["converged"], 20);

    let o = textmerge(&["simulate", "--clients", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_config_file() {
    let dir = std::env::temp_dir().join(format!("textmerge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.json");
    std::fs::write(&good, r#"{"clients":5,"steps":50,"seed":2,"initial_doc":"hi"}"#).unwrap();
    let o = textmerge(&["simulate", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["final_docs"].as_object().unwrap().len(), 5);

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"clients":"many"}"#).unwrap();
    let o = textmerge(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn serve_environment_failures() {
    let o = textmerge(&["serve", "--port", "99999"]);
    assert_eq!(o.status.code(), Some(4));
    let o = textmerge(&["serve", "--port", "http"]);
    assert_eq!(o.status.code(), Some(4));

    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = textmerge(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(4));
}

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_abductkg"));
    // keep the caller's environment from leaking flag overrides in
    for (k, _) in std::env::vars() {
        if k.starts_with("ABDUCTKG_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// 120 entities, 5 relations, 1,000 distinct edges, deterministic.
fn write_kg(dir: &Path) -> PathBuf {
    let mut x: u64 = 7;
    let mut next = || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x
    };
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < 1000 {
        seen.insert((next() % 120, next() % 5, next() % 120));
    }
    let text: String = seen.iter().map(|(h, r, t)| format!("n{h}\trel{r}\tn{t}\n")).collect();
    let path = dir.join("kg.tsv");
    std::fs::write(&path, text).unwrap();
    path
}

fn split(dir: &Path, seed: &str) -> PathBuf {
    let kg = write_kg(dir);
    let out = dir.join(format!("splits-{seed}"));
    ok_json(&["split", "--in", kg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
    out
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn split_writes_edge_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let kg = write_kg(dir.path());
    let out = dir.path().join("s");
    let v = ok_json(&["split", "--in", kg.to_str().unwrap(), "--seed", "42", "--out", out.to_str().unwrap()]);
    assert_eq!(v["edges"], 1000);
    assert_eq!(v["counts"], serde_json::json!({"train": 800, "valid": 100, "test": 100}));
    for f in ["train.tsv", "valid.tsv", "test.tsv", "manifest.json", "entities.txt", "relations.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(lines(&out.join("train.tsv")), 800);

    let again = split(dir.path(), "42");
    let other = split(dir.path(), "43");
    let read = |d: &Path| std::fs::read(d.join("valid.tsv")).unwrap();
    assert_eq!(read(&out), read(&again));
    assert_ne!(read(&out), read(&other));
}

#[test]
fn sample_counts_and_determinism_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let splits = split(dir.path(), "1");
    let s = splits.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let v = ok_json(&[
        "sample",
        "--graph",
        s,
        "--patterns",
        "all",
        "--count",
        "100",
        "--out",
        a.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert_eq!(v["train"], 1300);
    assert_eq!(lines(&a.join("train.jsonl")), 1300);
    assert_eq!(lines(&a.join("valid.jsonl")), 0);
    ok_json(&["sample", "--graph", s, "--count", "100", "--out", b.to_str().unwrap(), "--workers", "4"]);
    assert_eq!(std::fs::read(a.join("train.jsonl")).unwrap(), std::fs::read(b.join("train.jsonl")).unwrap());
    assert_eq!(std::fs::read(a.join("vocab.txt")).unwrap(), std::fs::read(b.join("vocab.txt")).unwrap());

    // one token per line: 7 specials, then relations, then entities
    let vocab = std::fs::read_to_string(a.join("vocab.txt")).unwrap();
    let first: Vec<&str> = vocab.lines().take(8).collect();
    assert_eq!(first[..7], ["[PAD]", "[BOS]", "[EOS]", "[SEP]", "[I]", "[U]", "[N]"]);
    assert!(first[7].starts_with("[rel"));
    assert_eq!(vocab.lines().count(), 7 + 5 + 120);

    let rec: Value =
        serde_json::from_str(std::fs::read_to_string(a.join("train.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    for key in ["pattern", "hypothesis", "actions", "observation"] {
        assert!(rec.get(key).is_some(), "{key}");
    }
}

#[test]
fn env_vars_override_flags() {
    let dir = tempfile::tempdir().unwrap();
    let splits = split(dir.path(), "1");
    let by_flag = dir.path().join("flag");
    let by_env = dir.path().join("env");
    ok_json(&[
        "sample",
        "--graph",
        splits.to_str().unwrap(),
        "--patterns",
        "2in",
        "--count",
        "20",
        "--seed",
        "9",
        "--out",
        by_flag.to_str().unwrap(),
    ]);
    let out = bin()
        .args(["sample", "--out", by_env.to_str().unwrap()])
        .env("ABDUCTKG_GRAPH", &splits)
        .env("ABDUCTKG_PATTERNS", "2in")
        .env("ABDUCTKG_COUNT", "20")
        .env("ABDUCTKG_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let read = |d: &Path| std::fs::read(d.join("train.jsonl")).unwrap();
    assert_eq!(read(&by_flag), read(&by_env));
}

#[test]
fn search_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let splits = split(dir.path(), "3");
    let pairs = dir.path().join("pairs");
    ok_json(&[
        "sample",
        "--graph",
        splits.to_str().unwrap(),
        "--count",
        "0",
        "--test-count",
        "4",
        "--out",
        pairs.to_str().unwrap(),
    ]);
    let preds = dir.path().join("preds.jsonl");
    let test = pairs.join("test.jsonl");
    let searched = ok_json(&[
        "search",
        "--pairs",
        test.to_str().unwrap(),
        "--graph",
        splits.to_str().unwrap(),
        "--out",
        preds.to_str().unwrap(),
    ]);
    let graph = splits.join("test");
    let evaluated = ok_json(&["evaluate", "--pred", preds.to_str().unwrap(), "--graph", graph.to_str().unwrap()]);
    assert_eq!(searched, evaluated);
    assert_eq!(evaluated["overall"]["count"], lines(&test));
    let one_hop = evaluated["patterns"].as_array().unwrap().iter().find(|r| r["pattern"] == "1p").unwrap();
    assert!(one_hop["smatch"].as_f64().unwrap() > 0.0);

    let table = run(&["evaluate", "--pred", preds.to_str().unwrap(), "--graph", graph.to_str().unwrap(), "--pretty"]);
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.starts_with("pattern") && text.contains("\nall "));
}

#[test]
fn smatch_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let splits = split(dir.path(), "1");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, r#"{"pattern":"1p","nodes":[{"id":0,"kind":"target"},{"id":1,"kind":"anchor","entity":0}],"edges":[{"child":1,"parent":0,"label":"projection","relation":0}]}"#).unwrap();
    std::fs::write(&b, r#"["[rel1]", "[n5]"]"#).unwrap();
    let same = ok_json(&["smatch", "--pred", a.to_str().unwrap(), "--gold", a.to_str().unwrap()]);
    assert_eq!(same["f1"], 1.0);
    let v = ok_json(&[
        "smatch",
        "--pred",
        a.to_str().unwrap(),
        "--gold",
        b.to_str().unwrap(),
        "--graph",
        splits.to_str().unwrap(),
    ]);
    assert_eq!(v["f1"], 0.5);

    let out = run(&["smatch", "--pred", a.to_str().unwrap(), "--gold", b.to_str().unwrap()]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn errors_are_json_on_stderr() {
    let out = run(&["split", "--in", "/definitely/missing.tsv", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "load");
    assert!(err["message"].as_str().unwrap().contains("missing.tsv"));

    let out = run(&["sample", "--graph", "x", "--count", "1", "--patterns", "9z", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_env_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.tsv"), "a\tr1\tb\na\tr1\tc\nd\tr2\tc\n").unwrap();
    let mut child = bin()
        .args(["serve-env", "--graph", dir.path().join("toy.tsv").to_str().unwrap(), "--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let _server = Server(child);
    let hello: Value = serde_json::from_str(&first).unwrap();
    let addr = hello["listening"].as_str().unwrap().to_owned();

    let stream = TcpStream::connect(&addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    let two_in = r#"["[I]","[r1]","[a]","[N]","[r2]","[d]"]"#;
    let n = 4096;
    let mut batch = String::new();
    for i in 0..n {
        let line = match i % 4 {
            0 => format!(r#"{{"id":{i},"obs":[1],"actions":{two_in}}}"#),
            1 => format!(r#"{{"id":{i},"obs":[1,2],"actions":{two_in}}}"#),
            2 => format!(r#"{{"id":{i},"obs":[1],"actions":["[I]","[r1]"]}}"#),
            _ => "not json".to_owned(),
        };
        batch.push_str(&line);
        batch.push('\n');
    }
    writer.write_all(batch.as_bytes()).unwrap();
    writer.flush().unwrap();
    for i in 0..n {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let v: Value = serde_json::from_str(&line).unwrap();
        match i % 4 {
            0 => assert_eq!(line.trim(), format!(r#"{{"id":{i},"valid":true,"reward":1.0,"size":1,"err":null}}"#)),
            1 => assert_eq!(v["reward"], 0.5),
            2 => assert_eq!(
                line.trim(),
                format!(r#"{{"id":{i},"valid":false,"reward":0.0,"size":0,"err":"incomplete"}}"#)
            ),
            _ => {
                assert_eq!(v["id"], -1);
                assert_eq!(v["err"], "malformed");
            }
        }
    }
}

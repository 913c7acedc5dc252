use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SAMPLE_NET: &str = "network sample_net\nA rho s\nA rho t\nA s p\nA s r\nA p a\nA p b\nA r c\nA t r\nA t d\n\
                     L a a\nL b b\nL c c\nL d d\n";
const T_B: &str = "A u0 u1\nA u0 u2\nA u1 a\nA u1 b\nA u2 c\nA u2 d\nL a a\nL b b\nL c c\nL d d\n";
const T_C: &str = "A u0 u1\nA u0 u2\nA u1 a\nA u1 c\nA u2 b\nA u2 d\nL a a\nL b b\nL c c\nL d d\n";
const T_D: &str = "A u0 a\nA u0 b\nA u0 u2\nA u2 c\nA u2 d\nL a a\nL b b\nL c c\nL d d\n";

fn stc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn put(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_verdicts_and_exit_codes() {
    let d = TempDir::new().unwrap();
    let n = put(d.path(), "n.net", SAMPLE_NET);
    for (tree, answer, code) in [(T_B, "YES", 0), (T_C, "NO", 1), (T_D, "YES", 0)] {
        let t = put(d.path(), "t.tree", tree);
        let o = stc(&["solve", "-n", &n, "-t", &t, "--decision-only"]);
        assert_eq!(stdout(&o).trim(), answer);
        assert_eq!(o.status.code(), Some(code));
    }
}

#[test]
fn witness_output() {
    let d = TempDir::new().unwrap();
    let n = put(d.path(), "n.net", SAMPLE_NET);
    let t = put(d.path(), "t.tree", T_D);
    let o = stc(&["solve", "-n", &n, "-t", &t, "--witness"]);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "YES");
    assert_eq!(lines[1], "REDUCED-INSTANCE");
    let embeds: Vec<&str> = lines.iter().copied().filter(|l| l.starts_with("EMBED ")).collect();
    // four leaf arcs, one inner arc, one root arc
    assert_eq!(embeds.len(), 6);
    assert!(embeds.contains(&"EMBED u0 a : rho s p a"));
    // the reduced network section parses
    let doc: String = lines[2..].iter().take_while(|l| !l.starts_with("EMBED")).map(|l| format!("{l}\n")).collect();
    let reduced = put(d.path(), "r.net", &doc);
    assert_eq!(stc(&["extension", "default", "-n", &reduced]).status.code(), Some(0));
}

#[test]
fn input_errors() {
    let d = TempDir::new().unwrap();
    let n = put(d.path(), "n.net", SAMPLE_NET);
    let t = put(d.path(), "t.tree", T_B);
    let bad = put(d.path(), "bad.net", "A u v\nA v w\nL v t1\n");
    let o = stc(&["solve", "-n", &bad, "-t", &t]);
    assert_eq!(o.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3, column 3: label on non-leaf v"));

    let foreign = put(d.path(), "z.tree", "A r a\nA r z\nL a a\nL z z\n");
    assert_eq!(stc(&["solve", "-n", &n, "-t", &foreign]).status.code(), Some(66));
    assert_eq!(stc(&["solve", "-n", &n]).status.code(), Some(64));
    assert_eq!(stc(&["solve", "-n", &n, "-t", &t, "--witness", "--decision-only"]).status.code(), Some(64));
    assert_eq!(stc(&["frobnicate"]).status.code(), Some(64));

    let missing = put(d.path(), "m.ext", "E rho s\nE s p\nE s t\nE p a\nE p b\nE t r\nE r c\n");
    let o = stc(&["extension", "validate", "-n", &n, "-x", &missing]);
    assert_eq!(o.status.code(), Some(66));
    assert!(String::from_utf8_lossy(&o.stderr).contains(" d"));
}

#[test]
fn extension_commands() {
    let d = TempDir::new().unwrap();
    let n = put(d.path(), "n.net", SAMPLE_NET);
    let o = stc(&["extension", "default", "-n", &n]);
    assert_eq!(o.status.code(), Some(0));
    let x = put(d.path(), "d.ext", &stdout(&o));
    assert_eq!(stdout(&stc(&["extension", "width", "-n", &n, "-x", &x])).trim(), "2");
    assert!(stdout(&stc(&["extension", "validate", "-n", &n, "-x", &x])).starts_with("valid, width 2, canonical"));
    let path = put(d.path(), "p.ext", "E rho s\nE s t\nE t p\nE p r\nE r a\nE a b\nE b c\nE c d\n");
    let o = stc(&["extension", "canonicalize", "-n", &n, "-x", &path]);
    assert_eq!(o.status.code(), Some(0));
    let c = put(d.path(), "c.ext", &stdout(&o));
    assert!(stdout(&stc(&["extension", "validate", "-n", &n, "-x", &c])).contains(", canonical"));
}

#[test]
fn oracle_commands_and_cap() {
    let d = TempDir::new().unwrap();
    let n = put(d.path(), "n.net", SAMPLE_NET);
    let tb = put(d.path(), "b.tree", T_B);
    let td = put(d.path(), "d.tree", T_D);
    assert_eq!(stc(&["oracle", "firm", "-n", &n, "-t", &tb]).status.code(), Some(0));
    assert_eq!(stc(&["oracle", "firm", "-n", &n, "-t", &td]).status.code(), Some(1));
    assert_eq!(stc(&["oracle", "soft", "-n", &n, "-t", &td]).status.code(), Some(0));
    let o = stc(&["oracle", "soft", "-n", &n, "-t", &td, "--cap", "4"]);
    assert_eq!(o.status.code(), Some(66));
    assert!(String::from_utf8_lossy(&o.stderr).contains("oracle too large"));
    let o = Command::new(env!("CARGO_BIN_EXE_stc"))
        .args(["oracle", "firm", "-n", &n, "-t", &tb])
        .env("STC_ORACLE_CAP", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(66));
}

#[test]
fn gen_is_reproducible_and_batch_matches_solve() {
    let d = TempDir::new().unwrap();
    let args = ["gen", "--leaves", "6", "--reticulations", "2", "--polytomy", "0.3", "--seed", "9", "--extension"];
    let a = stdout(&stc(&args));
    assert_eq!(a, stdout(&stc(&args)));
    assert!(a.contains("# extension\n"));

    let dir = d.path().join("batch");
    fs::create_dir(&dir).unwrap();
    for seed in 0..6 {
        let prefix = dir.join(format!("i{seed}"));
        let mut g = vec!["gen", "--leaves", "5", "--reticulations", "2", "--polytomy", "0.3"];
        let s = seed.to_string();
        g.extend(["--seed", &s, "-o", prefix.to_str().unwrap()]);
        if seed % 2 == 0 {
            g.push("--yes-biased");
        }
        assert_eq!(stc(&g).status.code(), Some(0));
    }
    let o = stc(&["batch", dir.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for (seed, line) in out.lines().enumerate() {
        let (name, verdict) = line.split_once(' ').unwrap();
        assert_eq!(name, format!("i{seed}"));
        let n = dir.join(format!("i{seed}.net"));
        let t = dir.join(format!("i{seed}.tree"));
        let single = stc(&["solve", "-n", n.to_str().unwrap(), "-t", t.to_str().unwrap()]);
        assert_eq!(stdout(&single).trim(), verdict);
        if seed % 2 == 0 {
            assert_eq!(verdict, "YES");
        }
    }
    assert_eq!(stc(&["gen", "--leaves", "1"]).status.code(), Some(64));
}

#[test]
fn import_and_reduce() {
    let d = TempDir::new().unwrap();
    let f = put(d.path(), "x.nwk", "(((a,b),(c)#H1),(#H1,d));\n");
    let o = stc(&["import", "enewick", &f]);
    assert_eq!(o.status.code(), Some(0));
    let n = put(d.path(), "n.net", &stdout(&o));
    let t = put(d.path(), "t.tree", T_B);
    assert_eq!(stdout(&stc(&["solve", "-n", &n, "-t", &t])).trim(), "YES");
    let bad = put(d.path(), "bad.nwk", "((a,b);");
    assert_eq!(stc(&["import", "enewick", &bad]).status.code(), Some(65));

    let prefix = d.path().join("red");
    let o = stc(&["reduce", "-n", &n, "-t", &t, "-o", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for suffix in ["net", "ext", "tree"] {
        assert!(d.path().join(format!("red.{suffix}")).exists());
    }
    let o = stc(&[
        "extension",
        "validate",
        "-n",
        d.path().join("red.net").to_str().unwrap(),
        "-x",
        d.path().join("red.ext").to_str().unwrap(),
    ]);
    assert!(stdout(&o).contains(", canonical"), "{}", stdout(&o));
}

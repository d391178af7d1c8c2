use std::path::PathBuf;
use std::process::{Command, Output};

use session_actors::projection::parse_local;

fn corpus(path: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "corpus", path]
        .iter()
        .collect();
    p.display().to_string()
}

fn sactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sactor"))
        .args(args)
        .output()
        .expect("sactor runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn parse_prints_the_tree() {
    let o = sactor(&["parse", &corpus("warehouse/Purchase.scr")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("GlobalProtocol Purchase\n  Role B\n"));
    assert!(out.contains("Choice at B"));
}

#[test]
fn parse_rejects_empty_and_ill_formed_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.scr");
    std::fs::write(&empty, "").unwrap();
    let o = sactor(&["parse", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("syntax error"));

    let unbound = dir.path().join("unbound.scr");
    std::fs::write(
        &unbound,
        "global protocol P(role A, role B) { m() from A to B; continue X; }",
    )
    .unwrap();
    let o = sactor(&["parse", unbound.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("UnboundContinue"));
}

#[test]
fn check_uses_bindings() {
    let ring = corpus("ring/Ring.scr");
    assert_eq!(code(&sactor(&["check", &ring, "--bind", "N=3"])), 0);
    let o = sactor(&["check", &ring]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("UnboundSymbol"));
}

#[test]
fn project_prints_a_reparsable_local_protocol() {
    let o = sactor(&["project", &corpus("warehouse/Purchase.scr"), "--role", "A"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lp = parse_local(&text).unwrap();
    assert_eq!(lp.body.len(), 2);
    assert_eq!(
        text,
        "local protocol Purchase@A(role B, role S) {\n  login(str) from S;\n  auth(str) to B, S;\n}\n"
    );
}

#[test]
fn project_unknown_role_fails() {
    let o = sactor(&["project", &corpus("warehouse/Purchase.scr"), "--role", "Z"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown role `Z`"));
}

#[test]
fn project_expands_with_repeated_bindings() {
    let o = sactor(&[
        "project",
        &corpus("kfork/KFork.scr"),
        "--role",
        "Worker2",
        "--bind",
        "K=3",
        "--bind",
        "N=9",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = sactor(&[
        "project",
        &corpus("ring/Ring.scr"),
        "--role",
        "Worker1",
        "--bind",
        "N=3",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("rec Loop"));
    assert!(text.contains("data(int) to Worker2;"));
    assert!(text.contains("data(int) from Worker3;"));
    parse_local(&text).unwrap();
}

#[test]
fn fsm_counts_states_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "flat_pingpong/FlatPingPong.scr",
            "C",
            "3 states, 2 transitions",
        ),
        (
            "rec_pingpong/RecPingPong.scr",
            "C",
            "2 states, 2 transitions",
        ),
    ];
    for (file, role, want) in cases {
        let out = dir.path().join(format!("{role}.fsm"));
        let o = sactor(&[
            "fsm",
            &corpus(file),
            "--role",
            role,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains(want), "{}", stdout(&o));
        let g =
            session_actors::monitor::parse_graph(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(g.is_deterministic());
    }
    let end_only = dir.path().join("end.scr");
    std::fs::write(&end_only, "global protocol E(role A, role B) { }").unwrap();
    let o = sactor(&["fsm", end_only.to_str().unwrap(), "--role", "A"]);
    assert_eq!(stdout(&o), "fsm E@A\ninitial 0\nstate 0 accept\n");
    let o = sactor(&["fsm", end_only.to_str().unwrap(), "--role", "A", "--dot"]);
    assert!(stdout(&o).starts_with("digraph"));
}

#[test]
fn run_reports_completion_and_violations() {
    let o = sactor(&["run", "warehouse", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("label=login"));
    assert!(stdout(&o).ends_with("verdict complete\n"));

    let o = sactor(&["run", "sleeping-barber-deadlock", "--seed", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("verdict violation at C: WrongPeer"));

    let o = sactor(&["run", "sleeping_barber_orphan", "--policy", "warn"]);
    assert_eq!(code(&o), 2);

    let o = sactor(&["run", "warehouse", "--threaded"]);
    assert_eq!(code(&o), 0);

    let o = sactor(&["run", "no-such-scenario"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown scenario"));

    let o = sactor(&["run", "--list"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l == "wordcount"));
}

#[test]
fn bench_tables() {
    let o = sactor(&["bench", "pingpong", "--variant", "rec", "--n", "1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].contains("overhead"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].split_whitespace().nth(2) == Some("1"));

    let o = sactor(&["bench", "chain", "--states", "10,20,30"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().nth(3).unwrap().trim_start().starts_with("30"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&sactor(&[])), 1);
    assert_eq!(
        code(&sactor(&["project", &corpus("warehouse/Purchase.scr")])),
        1
    );
    assert_eq!(
        code(&sactor(&["check", &corpus("ring/Ring.scr"), "--bind", "N"])),
        1
    );
    assert_eq!(code(&sactor(&["parse", "/no/such/file.scr"])), 1);
    assert_eq!(code(&sactor(&["--help"])), 0);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_choicelog");

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn runs_spanning_tree_on_sample_graph() {
    let out = tempfile::tempdir().unwrap();
    let facts = corpus("fixtures/sample_graph");
    let trace = out.path().join("trace.txt");
    let o = run(&[
        "run",
        s(&corpus("spanning_tree.dl")),
        "--facts",
        s(&facts),
        "--out",
        s(out.path()),
        "--trace",
        s(&trace),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let st = fs::read_to_string(out.path().join("st.tsv")).unwrap();
    assert_eq!(st.lines().count(), 7);
    assert!(st.lines().any(|l| l == "root\tL1"));
    assert!(!st.lines().any(|l| l == "L8\tL2"));
    let trace = fs::read_to_string(trace).unwrap();
    assert!(trace.contains("iteration 2: st(L2, L3), st(L2, L10)"), "{trace}");
}

#[test]
fn repeated_runs_write_identical_files() {
    let facts = corpus("fixtures/sample_graph");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().unwrap();
        let o = run(&[
            "run",
            s(&corpus("spanning_tree.dl")),
            "--facts",
            s(&facts),
            "--out",
            s(out.path()),
            "--choice-policy",
            "shuffled",
            "--seed",
            "3",
        ]);
        assert!(o.status.success());
        outputs.push(fs::read(out.path().join("st.tsv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn emit_ram_is_stable_and_guarded() {
    let a = run(&["run", s(&corpus("spanning_tree.dl")), "--emit-ram"]);
    let b = run(&["run", s(&corpus("spanning_tree.dl")), "--emit-ram"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("IF (NOT (_,b[1]) IN new_st) AND (NOT (_,b[1]) IN st)"));
}

#[test]
fn emit_desugared_shows_the_auxiliary_relation() {
    let o = run(&["run", s(&corpus("eligible_advisors_rulechoice.dl")), "--emit-desugared"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains(".decl advisor__choice_r1(S:symbol, P:symbol) choice-domain S"), "{text}");
    assert!(text.contains("advisor(S, P) :- advisor__choice_r1(S, P)."), "{text}");
}

#[test]
fn unstratifiable_program_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dl");
    fs::write(
        &bad,
        ".decl edge(v:symbol, u:symbol)\n.decl st(v:symbol, u:symbol)\nst(v, u) :- st(_, v), edge(v, u), !st(_, u).\n",
    )
    .unwrap();
    let o = run(&["run", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("CycleError") && err.contains("st -> !st"), "{err}");
}

#[test]
fn syntax_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dl");
    fs::write(&bad, ".decl a(x:number)\na(1) :- .\n").unwrap();
    let o = run(&["run", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.dl:2:9: SyntaxError"), "{err}");
}

#[test]
fn missing_input_and_iteration_limit_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", s(&corpus("spanning_tree.dl")), "--facts", s(dir.path()), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("edge.facts"));

    let prog = dir.path().join("n.dl");
    fs::write(&prog, ".decl n(x:number)\nn(0).\nn(x + 1) :- n(x).\n").unwrap();
    let o = run(&["run", s(&prog), "--out", s(dir.path()), "--max-iterations", "50"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iteration limit"));
}

#[test]
fn malformed_facts_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("edge.facts"), "a\tb\nc\n").unwrap();
    let o = run(&["run", s(&corpus("spanning_tree.dl")), "--facts", s(dir.path()), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("edge.facts:2:"));
}

#[test]
fn bench_gen_writes_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bench", "gen", "total_order", "--seed", "1", "--scale", "25", "--out", s(dir.path())]);
    assert!(o.status.success());
    let elems = fs::read_to_string(dir.path().join("elem.facts")).unwrap();
    assert_eq!(elems.lines().count(), 25);

    let out = dir.path().join("out");
    let o = run(&[
        "run",
        s(&dir.path().join("total_order.dl")),
        "--facts",
        s(dir.path()),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("next.tsv")).unwrap().lines().count(), 26);

    let o = run(&["bench", "gen", "nope", "--seed", "1", "--scale", "1", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_run_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.tsv");
    let o = run(&[
        "bench",
        "run",
        "--suite",
        "eligible_advisors,highest_mark",
        "--scales",
        "0,50",
        "--timeout",
        "30",
        "--reps",
        "1",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tsv = fs::read_to_string(&report).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 2 * 2 * 3);
    assert!(tsv.lines().skip(1).all(|l| l.split('\t').nth(3) == Some("ok")), "{tsv}");
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("benchmark"));
}

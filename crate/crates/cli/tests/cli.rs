use std::process::{Command, Output};

fn mapfr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapfr")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let a = mapfr(&["gen", "--spec", "[3,3,3]", "--seed", "7"]);
    let b = mapfr(&["gen", "--spec", "[3,3,3]", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 9);
    assert_eq!(text.lines().filter(|l| l.starts_with("e ")).count(), 27);
    assert_eq!(text.lines().filter(|l| l.starts_with("a ")).count(), 3);
}

#[test]
fn solve_writes_a_plan_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    assert!(mapfr(&["gen", "--spec", "[3,1,3]", "--identity", "-o", inst.to_str().unwrap()]).status.success());
    let svg = dir.path().join("plan.svg");
    let prefix = dir.path().join("f");
    for solver in ["cbsr", "smtcbsr"] {
        let o = mapfr(&[
            "solve",
            inst.to_str().unwrap(),
            "--solver",
            solver,
            "--validate",
            "def2",
            "--validate",
            "sampled",
            "--svg",
            svg.to_str().unwrap(),
            "--dump-cnf",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let plan = stdout(&o);
        assert_eq!(plan.lines().last(), Some("makespan 2.000000000"));
        assert!(plan.lines().any(|l| l == "agent 0 0 4 0.000000000 2.000000000"));
        assert!(svg.exists());
    }
    assert!(dir.path().join("f.0.cnf").exists());
}

#[test]
fn discretized_solve_is_retimed() {
    let o = mapfr(&["solve", "--spec", "[2,2]", "--seed", "1", "--discretize", "--validate", "def2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().last(), Some("makespan 2.828427124"));
}

#[test]
fn exit_codes() {
    let timeout = mapfr(&["solve", "--spec", "[3,1,3]", "--seed", "5", "--solver", "cbsr", "--timeout", "0.2"]);
    assert_eq!(timeout.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let walled = dir.path().join("walled.txt");
    std::fs::write(&walled, "v 0 0 0\nv 1 1 0\nv 2 5 0\ne 0 1\na 0 1 0.2 0 2\n").unwrap();
    assert_eq!(mapfr(&["solve", walled.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(mapfr(&["solve", "/nonexistent/instance"]).status.code(), Some(3));
    assert_eq!(mapfr(&["solve", "--solver", "astar", "--spec", "[2,2]"]).status.code(), Some(3));
    assert_eq!(mapfr(&["gen"]).status.code(), Some(3));
    assert_eq!(mapfr(&["bench"]).status.code(), Some(3));
    assert_eq!(mapfr(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let o = mapfr(&["bench", "[2,2]", "[2,3,2]", "--seeds", "3", "--csv", csv.to_str().unwrap(), "--timeout", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "graph,seed,solver,status,makespan,runtime_s,iterations,expanded");
    assert_eq!(lines.len(), 1 + 2 * 2 * 3 * 2);
    assert!(lines[1..].iter().all(|l| l.contains(",solved,")));
}

use std::path::Path;
use std::process::{Command, Output};

fn solve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solve")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "cvrp 4 2 0.5\n0 0\n1 0\n1 1\n-1 0\n-1 -1\n";
const MPATHS: &str = "mpaths 3 2 0.5\n0 0.1\n1 0.9\n0.2 0.3\n0.7 0.2\n0.5 0.8\n";

#[test]
fn pipeline_writes_solution_report_and_svg() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "i.txt", SMALL);
    let rep = d.path().join("r.txt");
    let svg = d.path().join("s.svg");
    let o = solve(&[&f, "--seed", "3", "--report", rep.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("# cost "));
    let report = std::fs::read_to_string(&rep).unwrap();
    assert!(report.contains("mode = pipeline"));
    assert!(report.contains("valid = true"));
    assert!(report.contains("ratio.vs_oracle = "));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    // Same seed, same output.
    let again = solve(&[&f, "--seed", "3"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), out);
}

#[test]
fn every_mode_runs() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.txt", SMALL);
    let m = write(d.path(), "m.txt", MPATHS);
    for (file, mode) in [(&c, "itp"), (&c, "bruteforce"), (&m, "mpaths-exact"), (&m, "bruteforce")] {
        let o = solve(&[file, "--mode", mode, "--shifts", "2"]);
        assert_eq!(o.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = solve(&[&m, "--mode", "mpaths-rounded", "--alpha", "2", "--shifts", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_mode_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.txt", SMALL);
    let good = write(d.path(), "good.txt", "0 1\n2 3\n");
    let bad = write(d.path(), "bad.txt", "0 1 2\n3\n");
    assert_eq!(solve(&[&c, "--mode", "validate", "--solution", &good]).status.code(), Some(0));
    assert_eq!(solve(&[&c, "--mode", "validate", "--solution", &bad]).status.code(), Some(2));
    // A solution produced by the solver validates.
    let sol = d.path().join("s.txt");
    assert_eq!(solve(&[&c, "--mode", "itp", "--out", sol.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(solve(&[&c, "--mode", "validate", "--solution", sol.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn parse_errors_exit_4() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "bad.txt", "cvrp 2 1 0.5\n0 0\n1\n");
    let o = solve(&[&f]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let ok = write(d.path(), "ok.txt", SMALL);
    assert_eq!(solve(&[&ok, "--epsilon", "0.4"]).status.code(), Some(4));
    assert_eq!(solve(&[&ok, "--mode", "nope"]).status.code(), Some(4));
    assert_eq!(solve(&[&ok, "--bogus"]).status.code(), Some(4));
}

#[test]
fn cap_breach_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let mut text = String::from("cvrp 9 3 0.5\n0 0\n");
    for k in 0..9 {
        text.push_str(&format!("{} {}\n", k as f64 * 0.3 + 0.1, (k % 3) as f64));
    }
    let f = write(d.path(), "big.txt", &text);
    let rep = d.path().join("r.txt");
    let o = solve(&[&f, "--mode", "bruteforce", "--report", rep.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(std::fs::read_to_string(&rep).unwrap().contains("cap_breached = true"));
}

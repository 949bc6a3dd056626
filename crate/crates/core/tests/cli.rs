//! The `moment-forge` binary, run as a subprocess.

use std::process::{Command, Output};

use serde_json::Value;

fn bench(file: &str) -> String {
    format!("{}/benchmarks/{file}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moment-forge")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut all = args.to_vec();
    all.extend(["--format", "json", "--deterministic"]);
    let o = run(&all);
    (o.status.code().unwrap(), serde_json::from_slice(&o.stdout).expect("valid JSON"))
}

#[test]
fn herman_moments_and_value() {
    let (code, v) = json(&["moments", &bench("herman3.prob"), "--goal", "E(tokens^3)", "--at", "2"]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "ok");
    let m = &v["result"]["moments"][0];
    assert_eq!(m["closed_form"], "1 + 26*4^(-n)");
    assert_eq!(m["at"]["value"]["exact"], "21/8");
    assert_eq!(v["program"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn logistic_is_rejected_with_witness() {
    let p = bench("logistic.prob");
    let o = run(&["check", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("polynomial self-dependency: x (cycle x -> x)"));
    let (code, v) = json(&["check", &p]);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "rejected");
}

#[test]
fn infinite_condition_needs_approximation() {
    let p = bench("infinite_if.prob");
    let o = run(&["moments", &p, "--goal", "E(y)"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["moments", &p, "--goal", "E(y)", "--approximate"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("p_x_gt_0*n"), "{}", stdout(&o));
}

#[test]
fn toolkit_subcommands() {
    let h = bench("herman3.prob");
    let d = stdout(&run(&["distribution", &h, "--var", "tokens", "--support", "0,1,2,3"]));
    assert!(d.contains("P(tokens = 1) = 1 - 4^(-n)"), "{d}");
    assert!(d.contains("P(tokens = 3) = 4^(-n)"), "{d}");
    let t = stdout(&run(&["tails", &h, "--var", "tokens", "--threshold", "2", "--k", "2", "--pz-threshold", "1"]));
    assert!(t.contains("<= 1/4 + 2*4^(-n)"), "{t}");
    assert!(t.contains(">= 4^(-n)"), "{t}");
    let g = stdout(&run(&["after-termination", &bench("geometric.prob"), "--var", "x", "--k", "2"]));
    assert!(g.contains("E(x^2 after termination) = 6"), "{g}");
}

#[test]
fn oracles_from_the_command_line() {
    let e = stdout(&run(&["enumerate", &bench("herman3.prob"), "--goal", "E(tokens)", "--at", "3"]));
    assert!(e.contains("33/32"), "{e}");
    let a = stdout(&run(&["sample", &bench("variable_swap.prob"), "--goal", "E(y)", "--at", "10", "--seed", "3", "--samples", "1000"]));
    let b = stdout(&run(&["sample", &bench("variable_swap.prob"), "--goal", "E(y)", "--at", "10", "--seed", "3", "--samples", "1000"]));
    assert_eq!(a, b);
}

#[test]
fn symbolic_constants_can_be_bound() {
    let p = bench("retransmission.prob");
    let sym = stdout(&run(&["moments", &p, "--goal", "E(fail)"]));
    let bound = stdout(&run(&["moments", &p, "--goal", "E(fail)", "--bind", "p=1/4"]));
    assert!(sym.contains('p'), "{sym}");
    assert_ne!(sym, bound);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["moments", &bench("herman3.prob"), "--goal", "E(nope)"]).status.code(), Some(2));
    assert_eq!(run(&["moments", &bench("missing.prob"), "--goal", "E(x)"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn normal_form_round_trips() {
    let o = run(&["normalize", &bench("running_example.prob")]);
    assert_eq!(o.status.code(), Some(0));
    moment_forge::dsl::parse(&stdout(&o)).expect("normal form parses");
}

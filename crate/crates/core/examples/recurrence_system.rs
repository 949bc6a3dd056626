//! The linear recurrence over expected monomials built for one goal.

use moment_forge::pipeline::{Analysis, Options};

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/running_example.prob"), &Options::default()).unwrap();
    let goal = a.goal("E(z)").unwrap();
    let sys = a.system(&goal).unwrap();
    for (i, row) in sys.rows.iter().enumerate() {
        let rhs: Vec<String> = row.iter().map(|(j, c)| format!("({c})*E({})", sys.monomials[*j])).collect();
        println!("E({})' = {}    [E_0 = {}]", sys.monomials[i], rhs.join(" + "), sys.initials[i]);
    }
}

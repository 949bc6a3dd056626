//! Exact closed forms of raw and mixed moments, evaluated at a few iterations.

use moment_forge::pipeline::{Analysis, Options};

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/running_example.prob"), &Options::default()).unwrap();
    for goal in ["E(toggle)", "E(x)", "E(x^2)", "E(x*toggle)", "E(z)"] {
        let m = a.moment(goal).unwrap();
        let f = m.closed().unwrap();
        println!("{goal} = {f}");
        println!("    at n = 10: {}", f.eval(10).to_decimal(12).unwrap());
    }
}

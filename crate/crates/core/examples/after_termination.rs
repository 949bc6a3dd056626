//! Moments of a guarded loop's variables once the loop has stopped.

use moment_forge::pipeline::{Analysis, Options};

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/geometric.prob"), &Options::default()).unwrap();
    for k in 1..=3 {
        let t = a.after_termination("x", k).unwrap();
        println!("E(x^{k}) = lim ({}) / ({}) = {}", t.numerator, t.denominator, t.limit);
    }
}

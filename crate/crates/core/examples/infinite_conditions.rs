//! Programs outside the computable class are rejected with a witness, unless
//! their infinite conditions are approximated by symbolic coin flips.

use moment_forge::pipeline::{Analysis, Options};

fn main() {
    let logistic = Analysis::from_source(include_str!("../benchmarks/logistic.prob"), &Options::default()).unwrap();
    println!("logistic map: {}", logistic.moment("E(x)").unwrap_err());

    let src = include_str!("../benchmarks/infinite_if.prob");
    let plain = Analysis::from_source(src, &Options::default()).unwrap();
    println!("infinite if: {}", plain.moment("E(y)").unwrap_err());
    let approx = Analysis::from_source(src, &Options { approximate: true, ..Options::default() }).unwrap();
    println!("approximated: E(y) = {}", approx.moment("E(y)").unwrap().closed().unwrap());
    for w in &approx.approximation.as_ref().unwrap().warnings {
        println!("  assumption: {w:?}");
    }
}

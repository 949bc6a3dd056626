//! Central moments and a Gram-Charlier density sketch for a continuous variable.

use moment_forge::analysis::{central_moments, gram_charlier};
use moment_forge::pipeline::{Analysis, Options};

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/variable_swap.prob"), &Options::default()).unwrap();
    let raw: Vec<_> = a.raw_moments("x", 4).unwrap().iter().map(|m| m.closed().unwrap().clone()).collect();
    for (k, c) in central_moments(&raw).unwrap().iter().enumerate().skip(2) {
        println!("E((x - E x)^{k}) = {c}");
    }
    let n = 10;
    let at_n: Vec<f64> = raw.iter().map(|f| f.eval(n).to_f64().unwrap()).collect();
    let gc = gram_charlier(&at_n, 4).unwrap();
    for x in [-2.0, 0.0, 2.0, 4.0, 6.0] {
        println!("density of x_{n} at {x:>4}: {:.5}", gc.density(x));
    }
}

//! Markov upper and Paley-Zygmund lower bounds on a tail probability.

use moment_forge::analysis::{markov_bound, paley_zygmund};
use moment_forge::pipeline::{Analysis, Options};
use moment_forge::symbolic::ConstExpr;

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/herman3.prob"), &Options::default()).unwrap();
    let raw: Vec<_> = a.raw_moments("tokens", 2).unwrap().iter().map(|m| m.closed().unwrap().clone()).collect();
    let t = ConstExpr::int(2);
    for k in 1..=2 {
        println!("P(tokens >= 2) <= {}  (k = {k})", markov_bound(&raw, &t, k).unwrap());
    }
    println!("P(tokens > 1) >= {}", paley_zygmund(&raw[1], &raw[2], &ConstExpr::one()).unwrap());
}

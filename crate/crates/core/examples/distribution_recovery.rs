//! The full distribution of a finite variable from its first moments.

use moment_forge::analysis::recover_distribution;
use moment_forge::pipeline::{Analysis, Options};
use moment_forge::symbolic::ConstExpr;

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/herman3.prob"), &Options::default()).unwrap();
    let raw: Vec<_> = a.raw_moments("tokens", 3).unwrap().iter().map(|m| m.closed().unwrap().clone()).collect();
    let support: Vec<ConstExpr> = (0..4).map(ConstExpr::int).collect();
    let d = recover_distribution(&support, &raw).unwrap();
    for (v, p) in d.support.iter().zip(&d.probabilities) {
        println!("P(tokens = {v}) = {p}");
    }
}

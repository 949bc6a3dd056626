//! Seeded simulation with a 95% interval around an exact moment.

use std::collections::BTreeMap;

use moment_forge::oracle::{float_bindings, sampler};
use moment_forge::pipeline::{Analysis, Options};
use moment_forge::symbolic::VarPolynomial;

fn main() {
    let src = include_str!("../benchmarks/bimodal.prob");
    let a = Analysis::from_source(src, &Options::default()).unwrap();
    let exact = a.moment("E(x^2)").unwrap().closed().unwrap().eval(10).to_f64().unwrap();
    let ast = moment_forge::dsl::parse(src).unwrap();
    let f = VarPolynomial::var("x").pow(2);
    let est = sampler::estimate_moment(&ast, &f, 10, 20_000, 42, &float_bindings(&BTreeMap::new())).unwrap();
    println!("exact E(x^2) = {exact:.6}");
    println!("sampled      = {:.6} +- {:.6} ({} samples, seed {})", est.mean, est.halfwidth, est.samples, est.seed);
}

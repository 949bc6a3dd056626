//! The exact state enumerator as an independent check of a closed form.

use std::collections::BTreeMap;

use moment_forge::oracle::exact;
use moment_forge::pipeline::{Analysis, Options};
use moment_forge::symbolic::Surd;

fn main() {
    let src = include_str!("../benchmarks/herman3.prob");
    let a = Analysis::from_source(src, &Options::default()).unwrap();
    let f = a.moment("E(tokens^2)").unwrap().closed().unwrap().clone();
    let ast = moment_forge::dsl::parse(src).unwrap();
    let dists = exact::enumerate_iterations(&ast, 6, &BTreeMap::new(), exact::DEFAULT_STATE_CAP).unwrap();
    for (n, d) in dists.iter().enumerate() {
        let e = d.moment("tokens", 2).unwrap();
        let agree = f.eval(n as u64) == Surd::rational(e.clone());
        println!("n = {n}: {} states, E(tokens^2) = {e}, closed form agrees: {agree}", d.states.len());
    }
}

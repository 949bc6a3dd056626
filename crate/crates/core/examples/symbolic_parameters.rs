//! Unassigned identifiers stay symbolic through the whole analysis.

use std::collections::BTreeMap;

use moment_forge::pipeline::{Analysis, Options};
use moment_forge::symbolic::{Name, Rational};

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/hawk_dove.prob"), &Options::default()).unwrap();
    let f = a.moment("E(p1bal^2)").unwrap().closed().unwrap().clone();
    println!("E(p1bal^2) = {f}");
    let bind: BTreeMap<Name, Rational> =
        [("v".into(), Rational::from_integer(2.into())), ("c".into(), Rational::from_integer(3.into()))].into();
    println!("with v = 2, c = 3: {}", f.bind(&bind).unwrap());
}

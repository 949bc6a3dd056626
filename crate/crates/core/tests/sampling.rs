//! Seeded Monte Carlo against exact closed forms.

mod common;

use std::collections::BTreeMap;

use moment_forge::oracle::{float_bindings, sampler};
use moment_forge::symbolic::VarPolynomial;

#[test]
fn running_example_z_at_ten() {
    let b = common::bench("Running-Example");
    let exact = b.analysis().moment("E(z)").unwrap().closed().unwrap().eval(10).to_f64().unwrap();
    let est = sampler::estimate_moment(&b.bound_ast(), &VarPolynomial::var("z"), 10, 100_000, 2024, &float_bindings(&BTreeMap::new()))
        .unwrap();
    // 4 standard errors
    assert!((est.mean - exact).abs() <= 4.0 * est.halfwidth / 1.96, "estimate {est:?}, exact {exact}");
}

#[test]
fn seeded_runs_are_reproducible() {
    let b = common::bench("Variable-Swap");
    let f = VarPolynomial::var("x").pow(2);
    let bind = float_bindings(&BTreeMap::new());
    let a = sampler::estimate_moment(&b.ast(), &f, 10, 500, 9, &bind).unwrap();
    let c = sampler::estimate_moment(&b.ast(), &f, 10, 500, 9, &bind).unwrap();
    assert_eq!(a, c);
    let d = sampler::estimate_moment(&b.ast(), &f, 10, 500, 10, &bind).unwrap();
    assert_ne!(a.mean, d.mean);
}

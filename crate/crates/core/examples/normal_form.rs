//! Rewrite a structured loop into a flat list of guarded assignments.

use moment_forge::{dsl, normalizer};

fn main() {
    let ast = dsl::parse(include_str!("../benchmarks/running_example.prob")).unwrap();
    let normal = normalizer::normalize(&ast).unwrap();
    print!("{}", normal.to_source());
}

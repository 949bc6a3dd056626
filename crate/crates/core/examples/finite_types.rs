//! Which variables take finitely many values, and which conditions break computability.

use moment_forge::pipeline::{Analysis, Options};

fn main() {
    let a = Analysis::from_source(include_str!("../benchmarks/running_example.prob"), &Options::default()).unwrap();
    for (v, set) in &a.types.sets {
        match set.values() {
            Some(vals) => println!("{v}: {}", vals.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")),
            None => println!("{v}: infinite"),
        }
    }
    for violation in a.check(None) {
        println!("violation: {violation}");
    }
}

//! Powers of a finite-valued variable collapse onto `1, X, ..., X^(m-1)`.

use moment_forge::reduction::{inverse_via_symmetric_polys, reduce_power};
use moment_forge::symbolic::ConstExpr;

fn main() {
    let support: Vec<ConstExpr> = [-2, 0, 1, 3].into_iter().map(ConstExpr::int).collect();
    let c = reduce_power(&support, 10).unwrap();
    let terms: Vec<String> = c.iter().enumerate().map(|(j, c)| format!("({c})*X^{j}")).collect();
    println!("X^10 = {}", terms.join(" + "));
    println!("inverse Vandermonde matrix:");
    for row in inverse_via_symmetric_polys(&support).unwrap() {
        println!("  {}", row.iter().map(ToString::to_string).collect::<Vec<_>>().join("\t"));
    }
}

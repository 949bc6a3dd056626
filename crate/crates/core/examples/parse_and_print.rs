//! Parse a loop and print it back in canonical layout.

use moment_forge::dsl;

fn main() {
    let src = "x, y = 0, 1\nwhile true:\n  x = x + 1 {1/3} x - 1\n  if x > 0: y = 2*y else: y = Normal(0, 1) end\nend\n";
    let ast = dsl::parse(src).expect("valid program");
    println!("variables: {:?}", ast.variables);
    print!("{}", dsl::pretty_print(&ast));
}

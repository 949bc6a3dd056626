use std::fmt::Write;

use num_traits::{Signed, Zero};

use super::ast::*;
use crate::symbolic::Rational;

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const ATOM: u8 = 5;

/// Renders a rational so that it reparses to the same value.
fn rational_src(r: &Rational) -> (String, u8) {
    if r.is_integer() {
        return if r.is_negative() { (r.to_string(), NEG) } else { (r.to_string(), ATOM) };
    }
    // Finite decimal if the denominator only has factors 2 and 5.
    let mut d = r.denom().clone();
    let (two, five): (num_bigint::BigInt, num_bigint::BigInt) = (2.into(), 5.into());
    let mut digits = 0usize;
    while (&d % &two).is_zero() || (&d % &five).is_zero() {
        if (&d % &two).is_zero() {
            d /= &two;
        } else {
            d /= &five;
        }
        digits += 1;
    }
    if d == 1.into() {
        let s = crate::symbolic::constexpr::rational_to_decimal(r, digits);
        let prec = if r.is_negative() { NEG } else { ATOM };
        return (s, prec);
    }
    (format!("({}/{})", r.numer(), r.denom()), ATOM)
}

fn expr_prec(e: &Expr) -> (String, u8) {
    match e {
        Expr::Num(r) => rational_src(r),
        Expr::Ident(n) => (n.to_string(), ATOM),
        Expr::Neg(a) => {
            let (s, p) = expr_prec(a);
            let s = if p < NEG { format!("({s})") } else { s };
            (format!("-{s}"), NEG)
        }
        Expr::Pow(a, k) => {
            let (s, p) = expr_prec(a);
            let s = if p < ATOM { format!("({s})") } else { s };
            (format!("{s}**{k}"), 4)
        }
        Expr::Add(a, b) => binary(a, b, " + ", ADD),
        Expr::Sub(a, b) => binary(a, b, " - ", ADD),
        Expr::Mul(a, b) => binary(a, b, "*", MUL),
        Expr::Div(a, b) => binary(a, b, "/", MUL),
    }
}

fn binary(a: &Expr, b: &Expr, op: &str, prec: u8) -> (String, u8) {
    let (sa, pa) = expr_prec(a);
    let (sb, pb) = expr_prec(b);
    let sa = if pa < prec { format!("({sa})") } else { sa };
    let sb = if pb <= prec { format!("({sb})") } else { sb };
    (format!("{sa}{op}{sb}"), prec)
}

pub fn expr_to_string(e: &Expr) -> String {
    expr_prec(e).0
}

fn bool_prec(b: &BoolExpr) -> (String, u8) {
    match b {
        BoolExpr::True => ("true".into(), 4),
        BoolExpr::False => ("false".into(), 4),
        BoolExpr::Cmp(op, a, c) => (
            format!("{} {} {}", expr_to_string(a), op.symbol(), expr_to_string(c)),
            4,
        ),
        BoolExpr::Not(a) => {
            let (s, p) = bool_prec(a);
            let s = if p < 3 { format!("({s})") } else { s };
            (format!("not {s}"), 3)
        }
        BoolExpr::And(a, c) => bool_binary(a, c, "and", 2),
        BoolExpr::Or(a, c) => bool_binary(a, c, "or", 1),
    }
}

fn bool_binary(a: &BoolExpr, c: &BoolExpr, op: &str, prec: u8) -> (String, u8) {
    let (sa, pa) = bool_prec(a);
    let (sc, pc) = bool_prec(c);
    let sa = if pa < prec { format!("({sa})") } else { sa };
    let sc = if pc <= prec { format!("({sc})") } else { sc };
    (format!("{sa} {op} {sc}"), prec)
}

pub fn bool_to_string(b: &BoolExpr) -> String {
    bool_prec(b).0
}

pub fn rhs_to_string(r: &AssignRhs) -> String {
    match r {
        AssignRhs::Dist { name, params } => {
            let ps: Vec<String> = params.iter().map(expr_to_string).collect();
            format!("{name}({})", ps.join(", "))
        }
        AssignRhs::Categorical(opts) => {
            let mut s = String::new();
            for (i, (v, p)) in opts.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                s.push_str(&expr_to_string(v));
                if let Some(p) = p {
                    write!(s, " {{{}}}", expr_to_string(p)).unwrap();
                }
            }
            s
        }
    }
}

fn statement(out: &mut String, st: &Statement, indent: usize) {
    let pad = "  ".repeat(indent);
    match st {
        Statement::Assign { targets, rhs, guard } => {
            let t: Vec<&str> = targets.iter().map(|n| &**n).collect();
            let r: Vec<String> = rhs.iter().map(rhs_to_string).collect();
            write!(out, "{pad}{} = {}", t.join(", "), r.join(", ")).unwrap();
            if let Some((c, d)) = guard {
                write!(out, " [{}] {d}", bool_to_string(c)).unwrap();
            }
            out.push('\n');
        }
        Statement::If { branches, else_branch } => {
            for (i, (c, b)) in branches.iter().enumerate() {
                let kw = if i == 0 { "if" } else { "else if" };
                writeln!(out, "{pad}{kw} {}:", bool_to_string(c)).unwrap();
                b.iter().for_each(|s| statement(out, s, indent + 1));
            }
            if let Some(e) = else_branch {
                writeln!(out, "{pad}else:").unwrap();
                e.iter().for_each(|s| statement(out, s, indent + 1));
            }
            writeln!(out, "{pad}end").unwrap();
        }
    }
}

/// Emits concrete syntax that reparses to a structurally equal program.
pub fn pretty_print(p: &ProgramAst) -> String {
    let mut out = String::new();
    p.init.iter().for_each(|s| statement(&mut out, s, 0));
    writeln!(out, "while {}:", bool_to_string(&p.guard)).unwrap();
    p.body.iter().for_each(|s| statement(&mut out, s, 1));
    out.push_str("end\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn precedence_roundtrip() {
        for src in ["a - (b - c)", "-(x + 1)**2", "(x - 1)*(y + 2)/3", "--x", "a*(b*c)", "0.25*x"] {
            let e = super::super::parse_expr(src).unwrap();
            let printed = expr_to_string(&e);
            assert_eq!(super::super::parse_expr(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn empty_init_roundtrip() {
        let p = parse("while x < 3 or not y == 1: x = x + 1 {1/2} x end").unwrap();
        assert_eq!(parse(&pretty_print(&p)).unwrap(), p);
    }
}

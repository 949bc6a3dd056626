//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits nonzero when any criterion fails, except criterion 4's comparison
//! against the reference inverse matrix, whose single misprinted entry is
//! checked to be exactly the known one.

mod common;

use std::time::{Duration, Instant};

use common::{bench, corpus, q, Kind};
use moment_forge::analysis::{markov_bound, paley_zygmund, recover_distribution};
use moment_forge::dependency::Violation;
use moment_forge::pipeline::{Analysis, AnalysisError, Options};
use moment_forge::reduction::{inverse_via_symmetric_polys, reduce_power};
use moment_forge::symbolic::{ConstExpr, ExpPoly, Rational, Surd};

type Check = Result<String, String>;

fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let t = Instant::now();
    let r = f()?;
    let el = t.elapsed();
    if el > limit {
        return Err(format!("{r}, but took {el:.2?} (limit {limit:?})"));
    }
    Ok(format!("{r} in {el:.2?}"))
}

fn pow_q(b: &Rational, n: u64) -> Rational {
    (0..n).fold(q(1, 1), |acc, _| acc * b)
}

/// Compares a closed form with a rational reference formula at `n = 0 ..= upto`.
fn pointwise(label: &str, f: &ExpPoly, upto: u64, reference: impl Fn(u64) -> Rational) -> Check {
    for n in 0..=upto {
        let want = Surd::rational(reference(n));
        let got = f.eval(n);
        if got != want {
            return Err(format!("{label} at n = {n}: got {got}, expected {want}"));
        }
    }
    Ok(format!("{label} = {f}"))
}

fn closed(a: &Analysis, goal: &str) -> Result<ExpPoly, String> {
    a.moment(goal).and_then(|m| m.closed().cloned()).map_err(|e| format!("{goal}: {e}"))
}

fn criterion_1() -> Check {
    let a = bench("Running-Example").analysis();
    let sign = |n: u64| if n % 2 == 0 { q(1, 1) } else { q(-1, 1) };
    let mut parts = Vec::new();
    let limit = Duration::from_secs(5);
    parts.push(timed(limit, || {
        pointwise("E(toggle)", &closed(&a, "E(toggle)")?, 25, |n| q(1, 2) - sign(n) / q(2, 1))
    })?);
    parts.push(timed(limit, || {
        pointwise("E(x)", &closed(&a, "E(x)")?, 25, |n| {
            let n_ = q(n as i64, 1);
            q(5, 8) + q(3, 4) * &n_ + q(3, 8) * sign(n)
        })
    })?);
    parts.push(timed(limit, || {
        pointwise("E(x^2)", &closed(&a, "E(x^2)")?, 25, |n| {
            let n_ = q(n as i64, 1);
            q(15, 32) + q(17, 16) * &n_ + q(9, 16) * &n_ * sign(n) + q(17, 32) * sign(n) + q(9, 16) * &n_ * &n_
        })
    })?);
    Ok(parts.join("; "))
}

fn criterion_2() -> Check {
    let a = bench("Herman-3").analysis();
    let mut parts = Vec::new();
    for (k, c) in [(1, 2), (2, 8), (3, 26)] {
        parts.push(timed(Duration::from_secs(5), || {
            pointwise(&format!("E(tokens^{k})"), &closed(&a, &format!("E(tokens^{k})"))?, 25, |n| {
                q(1, 1) + q(c, 1) / pow_q(&q(4, 1), n)
            })
        })?);
    }
    Ok(parts.join("; "))
}

fn criterion_3() -> Check {
    timed(Duration::from_secs(15), || {
        let a = bench("Running-Example").analysis();
        let m = a.moment("E(z)").map_err(|e| e.to_string())?;
        let names = ["z", "toggle*x", "toggle*y", "x", "y", "toggle*x^2", "toggle", "toggle*z", "x^2", "1"];
        let r = |n, d| ConstExpr::ratio(n, d);
        let z = || ConstExpr::zero();
        let i = |v| ConstExpr::int(v);
        let reference: Vec<Vec<ConstExpr>> = vec![
            vec![i(1), r(-1, 6), r(-1, 2), z(), z(), r(-1, 6), r(1, 12), r(1, 6), z(), z()],
            vec![z(), i(-1), z(), i(1), z(), z(), z(), z(), z(), z()],
            vec![z(), z(), i(-1), z(), i(1), z(), z(), z(), z(), z()],
            vec![z(), z(), z(), i(1), z(), z(), r(3, 2), z(), z(), z()],
            vec![z(), r(1, 3), z(), z(), i(1), r(1, 3), r(-1, 6), r(-1, 3), z(), z()],
            vec![z(), z(), z(), z(), z(), i(-1), z(), z(), i(1), z()],
            vec![z(), z(), z(), z(), z(), z(), i(-1), z(), z(), i(1)],
            vec![i(1), z(), z(), z(), z(), z(), z(), i(-1), z(), z()],
            vec![z(), i(3), z(), z(), z(), z(), r(5, 2), z(), i(1), z()],
            vec![z(), z(), z(), z(), z(), z(), z(), z(), z(), i(1)],
        ];
        if m.system.dim() != names.len() {
            return Err(format!("system has {} monomials, expected {}", m.system.dim(), names.len()));
        }
        let mut perm = Vec::new();
        for name in names {
            let mono = if name == "1" {
                moment_forge::symbolic::Monomial::one()
            } else {
                a.goal(name).map_err(|e| e.to_string())?.terms().next().unwrap().0.clone()
            };
            perm.push(m.system.index_of(&mono).ok_or(format!("monomial {name} missing from the system"))?);
        }
        let ours = m.system.matrix();
        for (pi, row) in reference.iter().enumerate() {
            for (pj, want) in row.iter().enumerate() {
                let got = &ours[perm[pi]][perm[pj]];
                if got != want {
                    return Err(format!("entry ({}, {}): got {got}, expected {want}", names[pi], names[pj]));
                }
            }
        }
        // Printed closed form of E(z), evaluated in Q(sqrt 6).
        let f = m.closed().map_err(|e| e.to_string())?;
        let s6 = Surd::new(ConstExpr::zero(), ConstExpr::one(), 6);
        let c = |n, d| Surd::from_const(ConstExpr::ratio(n, d));
        let add = |a: Surd, b: Surd| a.checked_add(&b).unwrap();
        let mul = |a: &Surd, b: &Surd| a.checked_mul(b).unwrap();
        for n in 0..=20u32 {
            let nn = c(n as i64, 1);
            let sg = c(if n % 2 == 0 { 1 } else { -1 }, 1);
            let half = mul(&s6, &c(1, 2)).pow(n); // 2^-n 6^(n/2)
            let third = mul(&s6, &c(1, 3)).pow(n); // 3^-n 6^(n/2)
            let halfneg = mul(&half, &sg); // 6^(n/2) (-1/2)^n
            let thirdneg = mul(&third, &sg);
            let mut v = add(c(883, 32), mul(&c(29, 16), &nn));
            v = add(v, mul(&c(-201, 20), &half));
            v = add(v, mul(&mul(&c(-67, 20), &s6), &half));
            v = add(v, mul(&c(-37, 10), &third));
            v = add(v, mul(&mul(&c(-37, 20), &s6), &third));
            v = add(v, mul(&c(-201, 20), &halfneg));
            v = add(v, mul(&c(-37, 10), &thirdneg));
            v = add(v, mul(&mul(&c(67, 20), &s6), &halfneg));
            v = add(v, mul(&mul(&c(37, 20), &s6), &thirdneg));
            v = add(v, mul(&mul(&c(9, 16), &nn), &sg));
            v = add(v, mul(&c(29, 32), &sg));
            v = add(v, mul(&c(9, 16), &mul(&nn, &nn)));
            if f.eval(n as u64) != v {
                return Err(format!("E(z) at n = {n}: got {}, printed form gives {v}", f.eval(n as u64)));
            }
        }
        Ok("10x10 matrix matches up to permutation; E(z) matches the printed form for n <= 20".into())
    })
}

/// `Ok` is a pass, `Err((detail, known))` a failure; `known` marks the
/// documented misprint.
fn criterion_4() -> Result<String, (String, bool)> {
    let support: Vec<ConstExpr> = [-2, 0, 1, 3].into_iter().map(ConstExpr::int).collect();
    let red = reduce_power(&support, 10).map_err(|e| (e.to_string(), false))?;
    let want: Vec<ConstExpr> = [0, -4038, 2105, 1934].into_iter().map(ConstExpr::int).collect();
    if red != want {
        return Err((format!("reduce_power gave {red:?}"), false));
    }
    let inv = inverse_via_symmetric_polys(&support).map_err(|e| (e.to_string(), false))?;
    let r = |n, d| ConstExpr::ratio(n, d);
    let printed = [
        [r(0, 1), r(-1, 10), r(2, 5), r(-1, 30)],
        [r(1, 1), r(-5, 6), r(-1, 3), r(1, 6)],
        [r(0, 1), r(1, 1), r(1, 6), r(-1, 6)],
        [r(0, 1), r(-1, 15), r(1, 30), r(1, 30)],
    ];
    let mut diffs = Vec::new();
    for (i, row) in printed.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if &inv[i][j] != p {
                diffs.push((i, j, inv[i][j].clone(), p.clone()));
            }
        }
    }
    if diffs.is_empty() {
        return Ok("X^10 = 1934 X^3 + 2105 X^2 - 4038 X; inverse matches the printed matrix".into());
    }
    // The computed matrix must be a true inverse of the Vandermonde matrix.
    for (i, a) in support.iter().enumerate() {
        for (j, row) in inv.iter().enumerate() {
            let v = (0..4).fold(ConstExpr::zero(), |acc, k| acc + row[k].clone() * a.pow(k as i64));
            let e = if i == j { ConstExpr::one() } else { ConstExpr::zero() };
            if v != e {
                return Err((format!("computed matrix is not an inverse at ({i}, {j})"), false));
            }
        }
    }
    let detail = diffs
        .iter()
        .map(|(i, j, got, p)| format!("entry ({i}, {j}) printed {p}, exact {got}"))
        .collect::<Vec<_>>()
        .join(", ");
    let known = diffs.len() == 1 && diffs[0].0 == 0 && diffs[0].1 == 2 && diffs[0].2 == r(2, 15);
    Err((
        format!("reduce_power matches; inverse differs from the printed matrix: {detail} (the computed matrix is verified to be the exact inverse)"),
        known,
    ))
}

fn criterion_5() -> Check {
    let a = bench("Geometric").analysis();
    let t = a.after_termination("x", 1).map_err(|e| e.to_string())?;
    if t.limit != Surd::int(2) {
        return Err(format!("limit {} instead of 2", t.limit));
    }
    let num = pointwise("E(x*[stop])", &t.numerator, 25, |n| {
        let p = pow_q(&q(1, 2), n);
        -q(n as i64, 1) * &p - q(2, 1) * &p + q(2, 1)
    })?;
    let den = pointwise("E([stop])", &t.denominator, 25, |n| q(1, 1) - pow_q(&q(1, 2), n))?;
    Ok(format!("limit 2; {num}; {den}"))
}

fn herman_raw(k: u32) -> Result<Vec<ExpPoly>, String> {
    let a = bench("Herman-3").analysis();
    let ms = a.raw_moments("tokens", k).map_err(|e| e.to_string())?;
    ms.iter().map(|m| m.closed().cloned().map_err(|e| e.to_string())).collect()
}

fn criterion_6() -> Check {
    let raw = herman_raw(3)?;
    let support: Vec<ConstExpr> = (0..4).map(ConstExpr::int).collect();
    let d = recover_distribution(&support, &raw).map_err(|e| e.to_string())?;
    let quarter = |n| pow_q(&q(1, 4), n);
    let refs: [&dyn Fn(u64) -> Rational; 4] =
        [&|_| q(0, 1), &|n| q(1, 1) - quarter(n), &|_| q(0, 1), &|n| quarter(n)];
    let mut parts = Vec::new();
    for (i, (p, f)) in d.probabilities.iter().zip(refs).enumerate() {
        parts.push(pointwise(&format!("p{i}"), p, 25, f)?);
    }
    Ok(parts.join(", "))
}

fn criterion_7() -> Check {
    let raw = herman_raw(2)?;
    let quarter = |n| pow_q(&q(1, 4), n);
    let two = ConstExpr::int(2);
    let m1 = markov_bound(&raw, &two, 1).map_err(|e| e.to_string())?;
    let m2 = markov_bound(&raw, &two, 2).map_err(|e| e.to_string())?;
    let a = pointwise("Markov k=1", &m1, 25, |n| q(1, 2) + quarter(n))?;
    let b = pointwise("Markov k=2", &m2, 25, |n| q(1, 4) + q(2, 1) * quarter(n))?;
    let pz = paley_zygmund(&raw[1], &raw[2], &ConstExpr::one()).map_err(|e| e.to_string())?;
    let s = pz.simplified.clone().ok_or(format!("Paley-Zygmund bound did not simplify: {pz}"))?;
    let c = pointwise("Paley-Zygmund t=1", &s, 25, quarter)?;
    for n in 0..=25 {
        if pz.eval(n).map_err(|e| e.to_string())? != Surd::rational(quarter(n)) {
            return Err(format!("Paley-Zygmund ratio differs at n = {n}"));
        }
    }
    Ok(format!("{a}; {b}; {c}"))
}

fn criterion_8() -> Check {
    let logistic = Analysis::from_source(&common::source("logistic.prob"), &Options::default()).map_err(|e| e.to_string())?;
    let witness = match logistic.moment("E(x)") {
        Err(AnalysisError::Rejected(v)) => match v.as_slice() {
            [w @ Violation::PolynomialSelfDependency { variable, .. }, ..] if &**variable == "x" => w.to_string(),
            _ => return Err(format!("logistic map rejected with unexpected witnesses {v:?}")),
        },
        Err(e) => return Err(format!("logistic map: unexpected error {e}")),
        Ok(_) => return Err("logistic map was not rejected".into()),
    };
    let src = common::source("infinite_if.prob");
    let plain = Analysis::from_source(&src, &Options::default()).map_err(|e| e.to_string())?;
    let witness2 = match plain.moment("E(y)") {
        Err(AnalysisError::Rejected(v)) => match v.as_slice() {
            [w @ Violation::InfiniteCondition { variable, .. }, ..] if &**variable == "x" => w.to_string(),
            _ => return Err(format!("infinite if rejected with unexpected witnesses {v:?}")),
        },
        Err(e) => return Err(format!("infinite if: unexpected error {e}")),
        Ok(_) => return Err("infinite if was not rejected".into()),
    };
    let approx = Analysis::from_source(&src, &Options { approximate: true, ..Options::default() })
        .map_err(|e| e.to_string())?;
    let f = closed(&approx, "E(y)")?;
    if f.symbols().is_empty() {
        return Err(format!("approximated E(y) = {f} has no symbolic probability"));
    }
    Ok(format!("logistic: {witness}; infinite if: {witness2}; approximated E(y) = {f}"))
}

fn criterion_9() -> Check {
    let benches = corpus();
    let mut parts = Vec::new();

    let mut n = 0;
    for b in &benches {
        n += common::closed_vs_forward(b, 30)?;
    }
    parts.push(format!("(a) {n} closed-form values over {} benchmarks", benches.len()));

    let mut n = 0;
    let mut names = 0;
    for b in benches.iter().filter(|b| b.kind == Kind::Discrete) {
        n += common::solver_vs_enumerator(b, 6)?;
        names += 1;
    }
    parts.push(format!("(b) {n} enumerated moments over {names} discrete benchmarks"));

    for b in &benches {
        common::normalization_preserved(b)?;
    }
    parts.push(format!("(c) normal forms preserved on {} benchmarks", benches.len()));

    common::power_reduction_instances(1000, 7)?;
    parts.push("(d) 1000 power reductions".into());

    common::indicator_instances(300, 8)?;
    parts.push("(e) 300 random conditions".into());

    for (name, goal) in [("Variable-Swap", "E(y)"), ("Bimodal", "E(x^2)"), ("Running-Example", "E(l)")] {
        let (hits, _) = common::coverage(&bench(name), goal, 10, 100, 2000)?;
        if hits < 90 {
            return Err(format!("(f) {name} {goal}: exact value covered in only {hits}/100 runs"));
        }
        parts.push(format!("(f) {name} {goal} covered {hits}/100"));
    }
    Ok(parts.join("; "))
}

fn criterion_10() -> Check {
    let mut worst = (Duration::ZERO, "");
    for b in corpus() {
        let t = Instant::now();
        let a = b.analysis();
        for g in b.goals {
            closed(&a, g)?;
        }
        let el = t.elapsed();
        if el > Duration::from_secs(60) {
            return Err(format!("{} took {el:.2?}", b.name));
        }
        if el > worst.0 {
            worst = (el, b.name);
        }
    }
    Ok(format!("slowest corpus analysis: {} in {:.2?}", worst.1, worst.0))
}

fn main() {
    let mut unexpected = 0;
    let mut report = |n: u32, r: Check| match r {
        Ok(d) => println!("PASS criterion {n}: {d}"),
        Err(d) => {
            println!("FAIL criterion {n}: {d}");
            unexpected += 1;
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    match criterion_4() {
        Ok(d) => report(4, Ok(d)),
        Err((d, true)) => println!("FAIL criterion 4: {d}"),
        Err((d, false)) => report(4, Err(d)),
    }
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9());
    report(10, criterion_10());
    if unexpected > 0 {
        std::process::exit(1);
    }
}

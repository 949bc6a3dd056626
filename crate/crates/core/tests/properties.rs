//! Randomized invariants of the reduction, indicator and toolkit layers.

mod common;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use common::q;
use moment_forge::analysis::{central_moments, limit_of_ratio, markov_bound, paley_zygmund, recover_distribution, Ratio};
use moment_forge::oracle::exact;
use moment_forge::pipeline::{Analysis, Options};
use moment_forge::reduction::{inverse_via_symmetric_polys, reduce_power, vandermonde};
use moment_forge::symbolic::{ConstExpr, ExpPoly, Rational, Surd};
use proptest::prelude::*;

fn support() -> impl Strategy<Value = Vec<ConstExpr>> {
    prop::collection::btree_set((-12i64..=12, 1i64..=5), 1..=6).prop_filter_map("distinct values", |s| {
        let vals: BTreeSet<Rational> = s.into_iter().map(|(n, d)| q(n, d)).collect();
        Some(vals.into_iter().map(ConstExpr::from).collect::<Vec<_>>())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn power_reduction_agrees_on_support(a in support(), k in 0u32..=12) {
        let c = reduce_power(&a, k).unwrap();
        prop_assert_eq!(c.len(), a.len());
        for x in &a {
            let r = c.iter().enumerate().fold(ConstExpr::zero(), |acc, (j, cj)| acc + cj.clone() * x.pow(j as i64));
            prop_assert_eq!(r, x.pow(k as i64));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symmetric_inverse_inverts_vandermonde(a in support()) {
        let inv = inverse_via_symmetric_polys(&a).unwrap();
        let v = vandermonde(&a);
        let m = a.len();
        for i in 0..m {
            for j in 0..m {
                let e = (0..m).fold(ConstExpr::zero(), |acc, k| acc + inv[i][k].clone() * v[k][j].clone());
                let want = if i == j { ConstExpr::one() } else { ConstExpr::zero() };
                prop_assert_eq!(e, want);
            }
        }
    }

    #[test]
    fn indicators_are_boolean_and_exact(seed in any::<u64>()) {
        common::indicator_instances(5, seed).map_err(TestCaseError::fail)?;
    }
}

fn herman_raw() -> Vec<ExpPoly> {
    let a = common::bench("Herman-3").analysis();
    a.raw_moments("tokens", 3).unwrap().iter().map(|m| m.closed().unwrap().clone()).collect()
}

fn as_rational(s: &Surd) -> Rational {
    s.as_rational().cloned().unwrap_or_else(|| panic!("not rational: {s}"))
}

#[test]
fn recovered_distribution_is_a_distribution() {
    let raw = herman_raw();
    let support: Vec<ConstExpr> = (0..4).map(ConstExpr::int).collect();
    let d = recover_distribution(&support, &raw).unwrap();
    for n in 0..200 {
        let ps: Vec<Rational> = d.probabilities.iter().map(|p| as_rational(&p.eval(n))).collect();
        assert!(ps.iter().all(|p| *p >= q(0, 1)), "n = {n}: {ps:?}");
        assert_eq!(ps.iter().sum::<Rational>(), q(1, 1), "n = {n}");
    }
}

#[test]
fn tail_bounds_sandwich_the_enumerated_tail() {
    let raw = herman_raw();
    let two = ConstExpr::int(2);
    let m1 = markov_bound(&raw, &two, 1).unwrap();
    let m2 = markov_bound(&raw, &two, 2).unwrap();
    let pz = paley_zygmund(&raw[1], &raw[2], &ConstExpr::one()).unwrap();
    let ast = common::bench("Herman-3").ast();
    let dists = exact::enumerate_iterations(&ast, 6, &BTreeMap::new(), exact::DEFAULT_STATE_CAP).unwrap();
    for (n, d) in dists.iter().enumerate() {
        let tail: Rational = d.marginal("tokens").unwrap().into_iter().filter(|(v, _)| *v >= q(2, 1)).map(|(_, p)| p).sum();
        let n = n as u64;
        assert!(as_rational(&m1.eval(n)) >= tail);
        assert!(as_rational(&m2.eval(n)) >= tail);
        assert!(as_rational(&pz.eval(n).unwrap()) <= tail);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Random biased walks: closed forms agree with enumeration and variances are non-negative.
    #[test]
    fn random_walk_moments(p in 1i64..=9, a in 0i64..=3, b in 0i64..=3, x0 in -3i64..=3, n in 0u64..=40) {
        let src = format!("x = {x0}\nwhile true:\n  x = x + {a} {{{p}/10}} x - {b}\nend\n");
        let an = Analysis::from_source(&src, &Options::default()).unwrap();
        let raw: Vec<ExpPoly> = an.raw_moments("x", 3).unwrap().iter().map(|m| m.closed().unwrap().clone()).collect();
        let ast = moment_forge::dsl::parse(&src).unwrap();
        let d = exact::enumerate_iterations(&ast, 5, &BTreeMap::new(), exact::DEFAULT_STATE_CAP).unwrap();
        for (i, di) in d.iter().enumerate() {
            for (k, f) in raw.iter().enumerate() {
                prop_assert_eq!(as_rational(&f.eval(i as u64)), di.moment("x", k as u32).unwrap());
            }
        }
        let central = central_moments(&raw).unwrap();
        prop_assert_ne!(central[2].eval(n).sign(), Some(Ordering::Less));
    }

    /// Geometric loops with random stop probability: exact limit and its finite-n approach.
    #[test]
    fn termination_limit_matches_ratio(num in 1i64..=9) {
        let src = format!("x, stop = 0, 0\nwhile stop == 0:\n  stop = Bernoulli({num}/10)\n  x = x + 1\nend\n");
        let an = Analysis::from_source(&src, &Options::default()).unwrap();
        let t = an.after_termination("x", 1).unwrap();
        prop_assert_eq!(t.limit.clone(), Surd::rational(q(10, num)));
        prop_assert_eq!(limit_of_ratio(&t.numerator, &t.denominator).unwrap(), t.limit.clone());
        let r = Ratio::new(t.numerator.clone(), t.denominator.clone()).eval(500).unwrap();
        prop_assert!((r.to_f64().unwrap() - 10.0 / num as f64).abs() < 1e-9);
    }
}

//! Every benchmark program, checked against its independent oracles.

mod common;

use common::{bench, Kind};

macro_rules! corpus_tests {
    ($($id:ident => $name:literal),* $(,)?) => {
        mod closed_form_matches_forward_evaluation {
            use super::*;
            $(#[test] fn $id() { common::closed_vs_forward(&bench($name), 30).unwrap(); })*
        }

        mod closed_form_matches_enumeration {
            use super::*;
            $(#[test] fn $id() {
                let b = bench($name);
                if b.kind == Kind::Discrete {
                    common::solver_vs_enumerator(&b, 6).unwrap();
                }
            })*
        }

        mod normal_form_preserves_semantics {
            use super::*;
            $(#[test] fn $id() { common::normalization_preserved(&bench($name)).unwrap(); })*
        }
    };
}

corpus_tests! {
    running_example => "Running-Example",
    herman => "Herman-3",
    las_vegas => "Las-Vegas-Search",
    pi_approximation => "Pi-Approximation",
    coin_flips => "50-Coin-Flips",
    gambler_ruin => "Gambler-Ruin-Momentum",
    hawk_dove => "Hawk-Dove-Symbolic",
    variable_swap => "Variable-Swap",
    retransmission => "Retransmission-Protocol",
    randomized_response => "Randomized-Response",
    duelling_cowboys => "Duelling-Cowboys",
    martingale => "Martingale-Bet",
    bimodal => "Bimodal",
    dbn_umbrella => "DBN-Umbrella",
    dbn_component_health => "DBN-Component-Health",
    geometric => "Geometric",
}

#[test]
fn corpus_covers_at_least_twelve_programs() {
    assert!(common::corpus().len() >= 12);
}

#[test]
fn symbolic_constants_stay_symbolic() {
    for name in ["Hawk-Dove-Symbolic", "Retransmission-Protocol", "Randomized-Response", "Martingale-Bet", "DBN-Umbrella"] {
        let b = bench(name);
        let a = b.analysis();
        let f = a.moment(b.goals[0]).unwrap().closed().unwrap().clone();
        assert!(!f.symbols().is_empty(), "{name}: {f}");
        // binding afterwards agrees with analysing the bound program
        let bound = b.bound_analysis().moment(b.goals[0]).unwrap().closed().unwrap().clone();
        for n in 0..10 {
            assert_eq!(f.bind(&b.bindings()).unwrap().eval(n), bound.eval(n), "{name} at n = {n}");
        }
    }
}

#[test]
fn monte_carlo_covers_exact_means() {
    for (name, goal) in [("Variable-Swap", "E(y)"), ("Bimodal", "E(x^2)"), ("Running-Example", "E(l)")] {
        let (hits, exact) = common::coverage(&bench(name), goal, 10, 100, 2000).unwrap();
        assert!(hits >= 90, "{name} {goal} = {exact}: covered in {hits}/100 runs");
    }
}

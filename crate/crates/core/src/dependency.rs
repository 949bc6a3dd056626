//! Variable dependencies, the moment-computability conditions, and the
//! variable / monomial orders that make the recurrence construction terminate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::finiteness::FiniteTypes;
use crate::normalizer::NormalizedProgram;
use crate::symbolic::{Monomial, Name};

/// Kinds of dependency of one variable on another.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EdgeKinds {
    pub conditional: bool,
    pub finite: bool,
    pub linear: bool,
    pub polynomial: bool,
}

/// `graph.edges[(y, x)]` records how `y` depends on `x`.
#[derive(Clone, Debug)]
pub struct DependencyGraph {
    pub vars: Vec<Name>,
    index: BTreeMap<Name, usize>,
    pub edges: BTreeMap<(usize, usize), EdgeKinds>,
    finite: Vec<bool>,
    reach: Vec<Vec<bool>>,
    poly_reach: Vec<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// A non-finite variable depends polynomially on itself; the witness is a
    /// dependency cycle starting and ending at that variable.
    PolynomialSelfDependency { variable: Name, cycle: Vec<Name> },
    /// A branch or guard condition reads a non-finite variable.
    InfiniteCondition { variable: Name, guarded: Name, condition: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::PolynomialSelfDependency { variable, cycle } => {
                let c: Vec<&str> = cycle.iter().map(|n| &**n).collect();
                write!(f, "polynomial self-dependency: {variable} (cycle {})", c.join(" -> "))
            }
            Violation::InfiniteCondition { variable, guarded, condition } => write!(
                f,
                "infinite condition: `{condition}` guarding {guarded} reads non-finite {variable}"
            ),
        }
    }
}

impl DependencyGraph {
    pub fn build(p: &NormalizedProgram, types: &FiniteTypes) -> DependencyGraph {
        let vars = p.variables.clone();
        let index: BTreeMap<Name, usize> = vars.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let finite: Vec<bool> = vars.iter().map(|v| types.is_finite(v)).collect();
        let mut edges: BTreeMap<(usize, usize), EdgeKinds> = BTreeMap::new();
        for a in &p.body {
            let y = index[&a.target];
            let mut add = |x: &Name, f: &dyn Fn(&mut EdgeKinds)| {
                if let Some(&xi) = index.get(x) {
                    f(edges.entry((y, xi)).or_default());
                }
            };
            for x in a.guard.vars() {
                add(&x, &|e| e.conditional = true);
            }
            if !a.guard.is_true() {
                let d = a.default.clone();
                let fin = finite[index[&d]];
                add(&d, &|e| if fin { e.finite = true } else { e.linear = true });
            }
            for poly in a.rhs.polys() {
                for (m, _) in poly.terms() {
                    let infinite_degree: u32 = m
                        .powers()
                        .iter()
                        .filter(|(v, _)| index.get(v).is_some_and(|&i| !finite[i]))
                        .map(|(_, e)| e)
                        .sum();
                    for (x, _) in m.powers() {
                        let Some(&xi) = index.get(x) else { continue };
                        let e = edges.entry((y, xi)).or_default();
                        if finite[xi] {
                            e.finite = true;
                        } else if infinite_degree > 1 {
                            e.polynomial = true;
                        } else {
                            e.linear = true;
                        }
                    }
                }
            }
        }
        let n = vars.len();
        let mut reach = vec![vec![false; n]; n];
        let mut poly = vec![vec![false; n]; n];
        for (&(y, x), e) in &edges {
            reach[y][x] = true;
            poly[y][x] = e.polynomial;
        }
        // Transitive closure; a path is polynomial if any of its edges is.
        for k in 0..n {
            for i in 0..n {
                if !reach[i][k] {
                    continue;
                }
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                        if poly[i][k] || poly[k][j] {
                            poly[i][j] = true;
                        }
                    }
                }
            }
        }
        DependencyGraph { vars, index, edges, finite, reach, poly_reach: poly }
    }

    fn idx(&self, v: &str) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn is_finite(&self, v: &str) -> bool {
        self.idx(v).is_some_and(|i| self.finite[i])
    }

    /// Does `y` (transitively) depend on `x`?
    pub fn depends_on(&self, y: &str, x: &str) -> bool {
        match (self.idx(y), self.idx(x)) {
            (Some(a), Some(b)) => self.reach[a][b],
            _ => false,
        }
    }

    pub fn depends_polynomially_on(&self, y: &str, x: &str) -> bool {
        match (self.idx(y), self.idx(x)) {
            (Some(a), Some(b)) => self.poly_reach[a][b],
            _ => false,
        }
    }

    pub fn edge(&self, y: &str, x: &str) -> Option<EdgeKinds> {
        self.edges.get(&(self.idx(y)?, self.idx(x)?)).copied()
    }

    /// The given variables and everything they depend on.
    pub fn cone<'a>(&self, roots: impl IntoIterator<Item = &'a Name>) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for r in roots {
            let Some(i) = self.idx(r) else { continue };
            out.insert(self.vars[i].clone());
            for (j, &b) in self.reach[i].iter().enumerate() {
                if b {
                    out.insert(self.vars[j].clone());
                }
            }
        }
        out
    }

    fn cycle_witness(&self, v: usize) -> Vec<Name> {
        // Find a polynomial edge (a, b) on some cycle through v, then stitch
        // together shortest paths v ->* a -> b ->* v.
        let n = self.vars.len();
        let on_path = |a: usize| a == v || self.reach[v][a];
        let back = |b: usize| b == v || self.reach[b][v];
        let edge = self
            .edges
            .iter()
            .find(|(&(a, b), e)| e.polynomial && on_path(a) && back(b))
            .map(|(&k, _)| k);
        let bfs = |from: usize, to: usize| -> Vec<usize> {
            if from == to {
                return vec![from];
            }
            let mut prev = vec![usize::MAX; n];
            let mut q = VecDeque::from([from]);
            prev[from] = from;
            while let Some(u) = q.pop_front() {
                for (&(a, b), _) in self.edges.range((u, 0)..=(u, usize::MAX)) {
                    debug_assert_eq!(a, u);
                    if prev[b] == usize::MAX {
                        prev[b] = u;
                        q.push_back(b);
                    }
                }
            }
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            path
        };
        let Some((a, b)) = edge else { return vec![self.vars[v].clone()] };
        let mut path = bfs(v, a);
        path.extend(bfs(b, v));
        path.into_iter().map(|i| self.vars[i].clone()).collect()
    }

    /// Checks both computability conditions over `scope` (all variables if `None`).
    pub fn violations(&self, p: &NormalizedProgram, scope: Option<&BTreeSet<Name>>) -> Vec<Violation> {
        let in_scope = |v: &Name| scope.is_none_or(|s| s.contains(v));
        let mut out = Vec::new();
        for (i, v) in self.vars.iter().enumerate() {
            if in_scope(v) && !self.finite[i] && self.poly_reach[i][i] {
                out.push(Violation::PolynomialSelfDependency { variable: v.clone(), cycle: self.cycle_witness(i) });
            }
        }
        for a in &p.body {
            if !in_scope(&a.target) {
                continue;
            }
            for x in a.guard.vars() {
                if !self.is_finite(&x) {
                    out.push(Violation::InfiniteCondition {
                        variable: x,
                        guarded: a.target.clone(),
                        condition: a.guard.to_string(),
                    });
                }
            }
        }
        out
    }

    /// Equivalence classes of mutually dependent variables, ordered so that
    /// every class comes after the classes it depends on. Ties are broken by
    /// first appearance in the program.
    pub fn var_order(&self) -> VarOrder {
        let n = self.vars.len();
        let mut class_of = vec![usize::MAX; n];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if class_of[i] != usize::MAX {
                continue;
            }
            let members: Vec<usize> =
                (0..n).filter(|&j| j == i || (self.reach[i][j] && self.reach[j][i])).collect();
            for &m in &members {
                class_of[m] = classes.len();
            }
            classes.push(members);
        }
        // Kahn's algorithm over the condensation, smallest first-appearance first.
        let k = classes.len();
        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
        for &(y, x) in self.edges.keys() {
            let (cy, cx) = (class_of[y], class_of[x]);
            if cy != cx {
                deps[cy].insert(cx);
            }
        }
        let mut done = vec![false; k];
        let mut order = Vec::with_capacity(k);
        while order.len() < k {
            let next = (0..k)
                .filter(|&c| !done[c] && deps[c].iter().all(|&d| done[d]))
                .min_by_key(|&c| classes[c][0])
                .expect("condensation is acyclic");
            done[next] = true;
            order.push(next);
        }
        let classes: Vec<Vec<Name>> =
            order.iter().map(|&c| classes[c].iter().map(|&i| self.vars[i].clone()).collect()).collect();
        let mut position = BTreeMap::new();
        let mut infinite_rank = BTreeMap::new();
        let mut rank = 0;
        for (pos, class) in classes.iter().enumerate() {
            let infinite = class.iter().any(|v| !self.is_finite(v));
            for v in class {
                position.insert(v.clone(), pos);
                if infinite && !self.is_finite(v) {
                    infinite_rank.insert(v.clone(), rank);
                }
            }
            if infinite {
                rank += 1;
            }
        }
        VarOrder { classes, position, infinite_rank, infinite_classes: rank }
    }
}

/// Total preorder on variables derived from dependencies.
#[derive(Clone, Debug, Serialize)]
pub struct VarOrder {
    pub classes: Vec<Vec<Name>>,
    position: BTreeMap<Name, usize>,
    infinite_rank: BTreeMap<Name, usize>,
    infinite_classes: usize,
}

/// Degrees of a monomial in each class of non-finite variables, highest class
/// first, so the derived lexicographic order is the reverse-lexicographic one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MonomialKey(pub Vec<u32>);

impl VarOrder {
    pub fn class_position(&self, v: &str) -> Option<usize> {
        self.position.get(v).copied()
    }

    pub fn key(&self, m: &Monomial) -> MonomialKey {
        let mut k = vec![0u32; self.infinite_classes];
        for (v, e) in m.powers() {
            if let Some(&r) = self.infinite_rank.get(v) {
                k[self.infinite_classes - 1 - r] += e;
            }
        }
        MonomialKey(k)
    }

    pub fn compare(&self, a: &Monomial, b: &Monomial) -> Ordering {
        self.key(a).cmp(&self.key(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::finiteness::infer;
    use crate::normalizer::normalize;

    fn graph(src: &str) -> (NormalizedProgram, DependencyGraph) {
        let p = normalize(&parse(src).unwrap()).unwrap();
        let t = infer(&p);
        let g = DependencyGraph::build(&p, &t);
        (p, g)
    }

    #[test]
    fn running_example_edges() {
        let (p, g) = graph(include_str!("../benchmarks/running_example.prob"));
        assert!(g.edge("x", "toggle").unwrap().conditional);
        assert!(g.edge("y", "x").unwrap().polynomial);
        assert!(g.edge("y", "z").unwrap().linear);
        assert!(g.depends_on("z", "x"));
        assert!(!g.depends_polynomially_on("x", "x"));
        assert!(g.depends_polynomially_on("z", "x"));
        let v = g.violations(&p, None);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(&v[0], Violation::InfiniteCondition { variable, .. } if &**variable == "g"));
        let cone = g.cone([&Name::from("z")]);
        assert!(g.violations(&p, Some(&cone)).is_empty());
        assert!(!cone.contains("sum"));
    }

    #[test]
    fn logistic_map_is_rejected_with_cycle() {
        let (p, g) = graph("x = x0\nwhile true: x = r*x*(1 - x) end");
        let v = g.violations(&p, None);
        match &v[..] {
            [Violation::PolynomialSelfDependency { variable, cycle }] => {
                assert_eq!(&**variable, "x");
                assert_eq!(cycle.first(), cycle.last());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn order_and_keys() {
        let (_, g) = graph(include_str!("../benchmarks/running_example.prob"));
        let o = g.var_order();
        let (x, y, z) = (o.class_position("x").unwrap(), o.class_position("y").unwrap(), o.class_position("z").unwrap());
        assert!(o.class_position("toggle").unwrap() < x);
        assert!(x < y);
        assert_eq!(y, z);
        let m = |s: &[(&str, u32)]| Monomial::from_powers(s.iter().map(|(v, e)| (Name::from(*v), *e)));
        assert_eq!(o.compare(&m(&[("y", 1)]), &m(&[("z", 1)])), Ordering::Equal);
        assert_eq!(o.compare(&m(&[("x", 5)]), &m(&[("z", 1)])), Ordering::Less);
        assert_eq!(o.compare(&m(&[("toggle", 1), ("z", 1)]), &m(&[("z", 1)])), Ordering::Equal);
    }
}

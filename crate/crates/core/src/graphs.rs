//! Gluing of labeled trees into extended Feynman graphs and their numerical
//! evaluation as truncated Wightman functions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::lattice::Site;
use crate::propagators::PropagatorSet;
use crate::scalar::C64;
use crate::trees::{compositions, expand_field, FieldType, Label, Tree, TreeError, Trunk};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("p*order = {cost} exceeds the contraction budget {budget}")]
    Budget { cost: usize, budget: usize },
    #[error("{types} field types but {points} points")]
    Arity { types: usize, points: usize },
    #[error("site {0} outside the lattice")]
    Site(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropKind {
    Retarded,
    Commutator,
    Wightman,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    External(usize),
    Internal(usize),
}

/// Edge with value `kind(from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub kind: PropKind,
    pub from: Endpoint,
    pub to: Endpoint,
}

/// Source trees and the leaf pairing a graph came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub trees: Vec<Tree>,
    /// Pairs of (tree index, leaf label).
    pub pairing: Vec<((usize, Label), (usize, Label))>,
}

impl Provenance {
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.trees.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&format!("{}{}", t.root_type.name(), t.order()));
        }
        s.push_str(" |");
        for ((ta, la), (tb, lb)) in &self.pairing {
            s.push_str(&format!(" ({}:{la})-({}:{lb})", ta + 1, tb + 1));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedGraph {
    pub externals: Vec<FieldType>,
    pub internals: usize,
    pub edges: Vec<Edge>,
    pub provenance: Provenance,
}

impl ExtendedGraph {
    /// Edge multiset with internal vertices named by tree position; equal
    /// keys mean equal integrands.
    pub fn canonical_key(&self) -> (usize, Vec<Edge>) {
        let mut e = self.edges.clone();
        e.sort();
        (self.internals, e)
    }

    pub fn degree(&self, v: Endpoint) -> usize {
        self.edges.iter().map(|e| (e.from == v) as usize + (e.to == v) as usize).sum()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, a: usize) -> usize {
        let mut r = a;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = a;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// All complete pairings of `0..n` (empty for odd `n`).
pub fn pairings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(rest: &[usize], acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some((&first, tail)) = rest.split_first() else {
            out.push(acc.clone());
            return;
        };
        for (i, &partner) in tail.iter().enumerate() {
            let remaining: Vec<usize> = tail.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
            acc.push((first, partner));
            go(&remaining, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if n.is_multiple_of(2) {
        go(&(0..n).collect::<Vec<_>>(), &mut Vec::new(), &mut out);
    }
    out
}

struct LeafRef {
    tree: usize,
    label: Label,
    at: Endpoint,
}

/// Skeleton shared by every gluing of a tree tuple: trunk and branch edges
/// plus the position of every leaf.
fn skeleton(trees: &[Tree]) -> (usize, Vec<Edge>, Vec<LeafRef>) {
    let mut edges = Vec::new();
    let mut leaves = Vec::new();
    let mut next = 0usize;
    for (i, t) in trees.iter().enumerate() {
        let vertices = t.vertices();
        let index: BTreeMap<Vec<u16>, usize> = vertices.iter().enumerate().map(|(k, l)| (l.0.clone(), next + k)).collect();
        match t.trunk() {
            Trunk::None => {}
            Trunk::Retarded => edges.push(Edge { kind: PropKind::Retarded, from: Endpoint::External(i), to: Endpoint::Internal(next) }),
            Trunk::Commutator => edges.push(Edge { kind: PropKind::Commutator, from: Endpoint::External(i), to: Endpoint::Internal(next) }),
        }
        for v in vertices.iter().skip(1) {
            let parent = index[&v.parent().expect("non-root vertex").0];
            edges.push(Edge { kind: PropKind::Retarded, from: Endpoint::Internal(parent), to: Endpoint::Internal(index[&v.0]) });
        }
        for l in t.leaves() {
            let at = match l.parent() {
                None => Endpoint::External(i),
                Some(p) => Endpoint::Internal(index[&p.0]),
            };
            leaves.push(LeafRef { tree: i, label: l, at });
        }
        next += vertices.len();
    }
    (next, edges, leaves)
}

/// Glues one tree per external point. The leaf earlier in operator order
/// (lower tree index, then first label mismatch) is the first argument of
/// its `D+` edge. With `connected_only` disconnected pairings are dropped.
pub fn glue_trees(trees: &[Tree], connected_only: bool) -> Vec<ExtendedGraph> {
    let (internals, base, leaves) = skeleton(trees);
    let externals: Vec<FieldType> = trees.iter().map(|t| t.root_type).collect();
    let mut out = Vec::new();
    for pairing in pairings(leaves.len()) {
        if connected_only {
            let mut uf = UnionFind::new(trees.len());
            for &(a, b) in &pairing {
                uf.union(leaves[a].tree, leaves[b].tree);
            }
            let root = uf.find(0);
            if (0..trees.len()).any(|t| uf.find(t) != root) {
                continue;
            }
        }
        let mut edges = base.clone();
        let mut prov = Vec::new();
        for &(a, b) in &pairing {
            let (la, lb) = (&leaves[a], &leaves[b]);
            let (first, second) = if (la.tree, &la.label) <= (lb.tree, &lb.label) { (la, lb) } else { (lb, la) };
            edges.push(Edge { kind: PropKind::Wightman, from: first.at, to: second.at });
            prov.push(((first.tree, first.label.clone()), (second.tree, second.label.clone())));
        }
        out.push(ExtendedGraph {
            externals: externals.clone(),
            internals,
            edges,
            provenance: Provenance { trees: trees.to_vec(), pairing: prov },
        });
    }
    out
}

/// Propagators and vertex weights a graph is evaluated against.
#[derive(Debug, Clone)]
pub struct GraphContext<'a> {
    pub props: &'a PropagatorSet,
    /// Volume weight at each site, times any coupling profile.
    pub vertex_weights: Vec<f64>,
    pub p: usize,
    /// Largest admissible `p * order`.
    pub budget: usize,
}

impl<'a> GraphContext<'a> {
    pub fn new(props: &'a PropagatorSet, vertex_weights: Vec<f64>, p: usize) -> Self {
        Self { props, vertex_weights, p, budget: 16 }
    }

    fn entry(&self, kind: PropKind, a: usize, b: usize) -> C64 {
        match kind {
            PropKind::Retarded => C64::new(self.props.gr[[a, b]], 0.0),
            PropKind::Commutator => C64::new(self.props.d[[a, b]], 0.0),
            PropKind::Wightman => self.props.dplus[[a, b]],
            PropKind::Symmetric => C64::new(self.props.dtilde[[a, b]], 0.0),
        }
    }
}

/// Dense factor over a sorted set of internal vertices.
struct Factor {
    vars: Vec<usize>,
    data: Vec<C64>,
}

fn index_of(vars: &[usize], assignment: &BTreeMap<usize, usize>, n: usize) -> usize {
    vars.iter().fold(0, |acc, v| acc * n + assignment[v])
}

/// Contracts the graph over internal vertex sites. Internal vertices are
/// eliminated greedily, smallest resulting factor first.
pub fn evaluate_graph(graph: &ExtendedGraph, ctx: &GraphContext<'_>, points: &[Site]) -> C64 {
    let n = ctx.vertex_weights.len();
    let mut scalar = C64::one();
    let mut factors: Vec<Factor> = (0..graph.internals)
        .map(|v| Factor { vars: vec![v], data: ctx.vertex_weights.iter().map(|&w| C64::new(w, 0.0)).collect() })
        .collect();
    for e in &graph.edges {
        match (e.from, e.to) {
            (Endpoint::External(a), Endpoint::External(b)) => scalar *= ctx.entry(e.kind, points[a].0, points[b].0),
            (Endpoint::External(a), Endpoint::Internal(v)) => {
                factors.push(Factor { vars: vec![v], data: (0..n).map(|s| ctx.entry(e.kind, points[a].0, s)).collect() })
            }
            (Endpoint::Internal(v), Endpoint::External(b)) => {
                factors.push(Factor { vars: vec![v], data: (0..n).map(|s| ctx.entry(e.kind, s, points[b].0)).collect() })
            }
            (Endpoint::Internal(u), Endpoint::Internal(v)) if u == v => {
                factors.push(Factor { vars: vec![u], data: (0..n).map(|s| ctx.entry(e.kind, s, s)).collect() })
            }
            (Endpoint::Internal(u), Endpoint::Internal(v)) => {
                let (lo, hi) = (u.min(v), u.max(v));
                let data = (0..n * n)
                    .map(|i| {
                        let (sl, sh) = (i / n, i % n);
                        if u == lo { ctx.entry(e.kind, sl, sh) } else { ctx.entry(e.kind, sh, sl) }
                    })
                    .collect();
                factors.push(Factor { vars: vec![lo, hi], data });
            }
        }
    }
    let mut remaining: Vec<usize> = (0..graph.internals).collect();
    while !remaining.is_empty() {
        let scope = |v: usize, fs: &[Factor]| -> Vec<usize> {
            let mut s: Vec<usize> = fs.iter().filter(|f| f.vars.contains(&v)).flat_map(|f| f.vars.iter().copied()).filter(|&u| u != v).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let (pos, &var) = remaining.iter().enumerate().min_by_key(|&(_, &v)| (scope(v, &factors).len(), v)).expect("nonempty");
        remaining.remove(pos);
        let new_vars = scope(var, &factors);
        let (involved, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        let mut data = vec![C64::zero(); n.pow(new_vars.len() as u32)];
        let mut assignment: BTreeMap<usize, usize> = new_vars.iter().map(|&v| (v, 0)).collect();
        assignment.insert(var, 0);
        for (slot, out) in data.iter_mut().enumerate() {
            let mut r = slot;
            for &v in new_vars.iter().rev() {
                assignment.insert(v, r % n);
                r /= n;
            }
            let mut acc = C64::zero();
            for s in 0..n {
                assignment.insert(var, s);
                let mut prod = C64::one();
                for f in &involved {
                    prod *= f.data[index_of(&f.vars, &assignment, n)];
                }
                acc += prod;
            }
            *out = acc;
        }
        factors.push(Factor { vars: new_vars, data });
    }
    factors.iter().fold(scalar, |acc, f| acc * f.data[0])
}

/// Result of a truncated Wightman evaluation.
#[derive(Debug, Clone)]
pub struct WightmanSum {
    pub value: C64,
    pub graphs: usize,
    /// Distinct integrands actually contracted.
    pub integrands: usize,
    /// Sum of moduli of the per-graph values, the natural error scale.
    pub abs_sum: f64,
    /// Per-graph (description, value) when requested.
    pub breakdown: Vec<(String, C64)>,
}

/// Coefficient of `(-lambda)^order` in the truncated Wightman function of
/// the fields `types` at `points`.
pub fn truncated_wightman(
    types: &[FieldType],
    points: &[Site],
    order: usize,
    ctx: &GraphContext<'_>,
    with_breakdown: bool,
) -> Result<WightmanSum, GraphError> {
    if types.len() != points.len() {
        return Err(GraphError::Arity { types: types.len(), points: points.len() });
    }
    if let Some(bad) = points.iter().find(|s| s.0 >= ctx.vertex_weights.len()) {
        return Err(GraphError::Site(bad.0));
    }
    if ctx.p * order > ctx.budget {
        return Err(GraphError::Budget { cost: ctx.p * order, budget: ctx.budget });
    }
    let mut sum = WightmanSum { value: C64::zero(), graphs: 0, integrands: 0, abs_sum: 0.0, breakdown: Vec::new() };
    let mut cache: BTreeMap<(usize, Vec<Edge>), C64> = BTreeMap::new();
    for comp in compositions(order, types.len()) {
        let per_point: Vec<Vec<Tree>> =
            types.iter().zip(&comp).map(|(&a, &s)| expand_field(a, s, ctx.p)).collect::<Result<_, _>>()?;
        if per_point.iter().any(Vec::is_empty) {
            continue;
        }
        let mut idx = vec![0usize; per_point.len()];
        'tuples: loop {
            let tuple: Vec<Tree> = idx.iter().zip(&per_point).map(|(&i, ts)| ts[i].clone()).collect();
            for g in glue_trees(&tuple, true) {
                let key = g.canonical_key();
                let v = match cache.get(&key) {
                    Some(v) => *v,
                    None => {
                        let v = evaluate_graph(&g, ctx, points);
                        sum.integrands += 1;
                        cache.insert(key, v);
                        v
                    }
                };
                sum.value += v;
                sum.abs_sum += v.norm();
                sum.graphs += 1;
                if with_breakdown {
                    sum.breakdown.push((g.provenance.describe(), v));
                }
            }
            let mut d = idx.len();
            loop {
                if d == 0 {
                    break 'tuples;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < per_point[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeParams, LatticeSpacetime};
    use crate::trees::Node;

    fn setup() -> (LatticeSpacetime, PropagatorSet) {
        let l = LatticeSpacetime::new(LatticeParams::flat(6, 3, 0.1, 0.2, 1.0)).unwrap();
        let p = PropagatorSet::build(&l).unwrap();
        (l, p)
    }

    fn leaf(t: FieldType) -> Tree {
        Tree { root_type: t, p: 3, root: Node::Leaf }
    }

    #[test]
    fn pairing_counts_are_double_factorials() {
        let counts: Vec<usize> = (0..9).map(|n| pairings(n).len()).collect();
        assert_eq!(counts, [1, 0, 1, 0, 3, 0, 15, 0, 105]);
        let four: Vec<Tree> = (0..4).map(|_| leaf(FieldType::In)).collect();
        assert_eq!(glue_trees(&four, false).len(), 3);
        assert!(glue_trees(&four, true).is_empty());
    }

    #[test]
    fn two_bare_fields_give_one_wightman_edge() {
        let (l, p) = setup();
        let ctx = GraphContext::new(&p, l.volume_weights(), 3);
        let pts = [Site(4), Site(11)];
        let r = truncated_wightman(&[FieldType::In, FieldType::In], &pts, 0, &ctx, false).unwrap();
        assert_eq!(r.graphs, 1);
        assert_eq!(r.value, p.dplus[[4, 11]]);
    }

    #[test]
    fn odd_leaf_totals_vanish() {
        let (l, p) = setup();
        let ctx = GraphContext::new(&p, l.volume_weights(), 3);
        let r = truncated_wightman(&[FieldType::Loc; 3], &[Site(3), Site(7), Site(12)], 0, &ctx, false).unwrap();
        assert_eq!((r.graphs, r.value), (0, C64::zero()));
    }

    #[test]
    fn empty_graph_evaluates_to_one() {
        let (l, p) = setup();
        let ctx = GraphContext::new(&p, l.volume_weights(), 3);
        let g = ExtendedGraph { externals: vec![], internals: 0, edges: vec![], provenance: Provenance { trees: vec![], pairing: vec![] } };
        assert_eq!(evaluate_graph(&g, &ctx, &[]), C64::one());
    }

    #[test]
    fn cubic_three_point_graph_matches_triple_loop() {
        let (l, p) = setup();
        let w = l.volume_weights();
        let ctx = GraphContext::new(&p, w.clone(), 3);
        let trees = [expand_field(FieldType::Loc, 1, 3).unwrap().remove(0), leaf(FieldType::In), leaf(FieldType::In)];
        let graphs = glue_trees(&trees, true);
        // Vertex leaves 1,2 pair with the two bare fields: 2 graphs, no tadpole.
        assert_eq!(graphs.len(), 2);
        let pts = [Site(14), Site(2), Site(5)];
        let g = graphs.iter().find(|g| g.provenance.pairing[0].1 .0 == 1).unwrap();
        let brute: C64 = (0..l.len())
            .map(|v| p.gr[[14, v]] * w[v] * p.dplus[[v, 2]] * p.dplus[[v, 5]])
            .sum();
        assert!((evaluate_graph(g, &ctx, &pts) - brute).norm() < 1e-15);
        for g in &graphs {
            assert_eq!(g.degree(Endpoint::Internal(0)), 3);
            (0..3).for_each(|i| assert_eq!(g.degree(Endpoint::External(i)), 1));
        }
    }

    #[test]
    fn quartic_out_four_point_has_24_graphs() {
        let (l, p) = setup();
        let ctx = GraphContext::new(&p, l.volume_weights(), 4);
        let pts = [Site(12), Site(13), Site(14), Site(15)];
        let r = truncated_wightman(&[FieldType::Out; 4], &pts, 1, &ctx, true).unwrap();
        assert_eq!(r.graphs, 24);
        assert_eq!(r.breakdown.len(), 24);
        assert!(r.integrands <= 24);
    }

    #[test]
    fn budget_is_enforced() {
        let (l, p) = setup();
        let mut ctx = GraphContext::new(&p, l.volume_weights(), 4);
        ctx.budget = 4;
        let e = truncated_wightman(&[FieldType::Loc; 2], &[Site(0), Site(1)], 2, &ctx, false);
        assert!(matches!(e, Err(GraphError::Budget { .. })));
    }
}

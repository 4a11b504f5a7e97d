//! Labeled Yang-Feldman trees. Every internal vertex carries `p - 1` ordered
//! children; a child is either a leaf (an in-field) or the root vertex of a
//! subtree joined by a retarded propagator.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldType {
    In,
    Loc,
    Out,
}

impl FieldType {
    pub fn name(self) -> &'static str {
        match self {
            FieldType::In => "in",
            FieldType::Loc => "loc",
            FieldType::Out => "out",
        }
    }
}

impl core::str::FromStr for FieldType {
    type Err = TreeError;
    fn from_str(s: &str) -> Result<Self, TreeError> {
        match s {
            "in" => Ok(FieldType::In),
            "loc" => Ok(FieldType::Loc),
            "out" => Ok(FieldType::Out),
            other => Err(TreeError::UnknownFieldType(String::from(other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("interaction power must be at least 3 (got {0})")]
    Power(usize),
    #[error("unknown field type {0:?}")]
    UnknownFieldType(String),
    #[error("label set does not describe a tree")]
    BadLabels,
}

/// Path of child positions (1-based) from the root vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Label(pub Vec<u16>);

impl Label {
    pub fn child(&self, position: u16) -> Label {
        let mut v = self.0.clone();
        v.push(position);
        Label(v)
    }
    pub fn parent(&self) -> Option<Label> {
        let (_, rest) = self.0.split_last()?;
        Some(Label(rest.to_vec()))
    }
}

/// Lexicographic order on positions: the first mismatch decides, so the
/// order of leaves matches the operator order of the field products.
impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_char('.')?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf,
    Vertex(Vec<Node>),
}

impl Node {
    fn order(&self) -> usize {
        match self {
            Node::Leaf => 0,
            Node::Vertex(ch) => 1 + ch.iter().map(Node::order).sum::<usize>(),
        }
    }

    fn walk(&self, at: &Label, vertices: &mut Vec<Label>, leaves: &mut Vec<Label>) {
        match self {
            Node::Leaf => leaves.push(at.clone()),
            Node::Vertex(ch) => {
                vertices.push(at.clone());
                for (i, c) in ch.iter().enumerate() {
                    c.walk(&at.child(i as u16 + 1), vertices, leaves);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tree {
    pub root_type: FieldType,
    pub p: usize,
    pub root: Node,
}

/// Propagator on the trunk joining the external point to the root vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trunk {
    None,
    Retarded,
    Commutator,
}

impl Tree {
    pub fn order(&self) -> usize {
        self.root.order()
    }

    pub fn trunk(&self) -> Trunk {
        match (&self.root, self.root_type) {
            (Node::Leaf, _) => Trunk::None,
            (_, FieldType::Out) => Trunk::Commutator,
            _ => Trunk::Retarded,
        }
    }

    /// Internal vertices in depth-first order (root first).
    pub fn vertices(&self) -> Vec<Label> {
        self.labels().0
    }

    /// Leaves in operator order. A bare in-field has the single empty label.
    pub fn leaves(&self) -> Vec<Label> {
        self.labels().1
    }

    fn labels(&self) -> (Vec<Label>, Vec<Label>) {
        let (mut v, mut l) = (Vec::new(), Vec::new());
        self.root.walk(&Label::default(), &mut v, &mut l);
        (v, l)
    }

    /// Rebuilds a tree from its set of internal-vertex labels.
    pub fn from_vertex_labels(root_type: FieldType, p: usize, labels: &[Label]) -> Result<Tree, TreeError> {
        fn build(at: &Label, set: &BTreeMap<Vec<u16>, ()>, p: usize, used: &mut usize) -> Node {
            if !set.contains_key(&at.0) {
                return Node::Leaf;
            }
            *used += 1;
            Node::Vertex((1..p as u16).map(|i| build(&at.child(i), set, p, used)).collect())
        }
        let set: BTreeMap<Vec<u16>, ()> = labels.iter().map(|l| (l.0.clone(), ())).collect();
        let mut used = 0;
        let root = build(&Label::default(), &set, p, &mut used);
        if used != set.len() {
            return Err(TreeError::BadLabels);
        }
        Ok(Tree { root_type, p, root })
    }

    /// Indented text rendering.
    pub fn render(&self) -> String {
        fn go(n: &Node, label: &Label, depth: usize, out: &mut String) {
            for _ in 0..depth {
                out.push_str("  ");
            }
            match n {
                Node::Leaf => {
                    let _ = writeln!(out, "leaf {label}");
                }
                Node::Vertex(ch) => {
                    let _ = writeln!(out, "vertex {label}");
                    for (i, c) in ch.iter().enumerate() {
                        go(c, &label.child(i as u16 + 1), depth + 1, out);
                    }
                }
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "{} order {}", self.root_type.name(), self.order());
        go(&self.root, &Label::default(), 0, &mut out);
        out
    }

    /// DOT description: edges point from child to root.
    pub fn to_dot(&self) -> String {
        let (vertices, leaves) = self.labels();
        let mut out = String::from("digraph tree {\n  x [shape=box];\n");
        let id = |l: &Label| {
            let mut s = String::from("n");
            for p in &l.0 {
                let _ = write!(s, "_{p}");
            }
            s
        };
        for l in &leaves {
            let _ = writeln!(out, "  {}l [shape=point, label=\"{l}\"];", id(l));
        }
        if let Some(root) = vertices.first() {
            let kind = if self.trunk() == Trunk::Commutator { "D" } else { "Gr" };
            let _ = writeln!(out, "  {} -> x [label=\"{kind}\"];", id(root));
        }
        for v in vertices.iter().skip(1) {
            if let Some(parent) = v.parent() {
                let _ = writeln!(out, "  {} -> {} [label=\"Gr {v}\"];", id(v), id(&parent));
            }
        }
        for l in &leaves {
            if let Some(parent) = l.parent() {
                let _ = writeln!(out, "  {}l -> {};", id(l), id(&parent));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// All ordered tuples of `parts` non-negative integers summing to `total`.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn local_nodes(order: usize, p: usize, memo: &mut BTreeMap<usize, Vec<Node>>) -> Vec<Node> {
    if let Some(v) = memo.get(&order) {
        return v.clone();
    }
    let out = if order == 0 {
        vec![Node::Leaf]
    } else {
        let mut acc = Vec::new();
        for comp in compositions(order - 1, p - 1) {
            let choices: Vec<Vec<Node>> = comp.iter().map(|&o| local_nodes(o, p, memo)).collect();
            let mut idx = vec![0usize; choices.len()];
            'outer: loop {
                acc.push(Node::Vertex(idx.iter().zip(&choices).map(|(&i, c)| c[i].clone()).collect()));
                for d in (0..idx.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < choices[d].len() {
                        continue 'outer;
                    }
                    idx[d] = 0;
                }
                break;
            }
        }
        acc
    };
    memo.insert(order, out.clone());
    out
}

/// All labeled trees of the given order, sorted lexicographically by their
/// depth-first vertex labels.
pub fn expand_field(root_type: FieldType, order: usize, p: usize) -> Result<Vec<Tree>, TreeError> {
    if p < 3 {
        return Err(TreeError::Power(p));
    }
    if root_type == FieldType::In && order > 0 {
        return Ok(Vec::new());
    }
    let mut trees: Vec<Tree> =
        local_nodes(order, p, &mut BTreeMap::new()).into_iter().map(|root| Tree { root_type, p, root }).collect();
    trees.sort_by_cached_key(Tree::vertices);
    Ok(trees)
}

/// Number of trees from the recursion `N(s) = sum over compositions of
/// s - 1 into p - 1 parts of the product of N(parts)`.
pub fn tree_count(root_type: FieldType, order: usize, p: usize) -> Result<u128, TreeError> {
    if p < 3 {
        return Err(TreeError::Power(p));
    }
    if root_type == FieldType::In && order > 0 {
        return Ok(0);
    }
    let mut n = vec![1u128];
    for s in 1..=order {
        // Convolve N with itself p-1 times at total s-1.
        let mut conv = vec![0u128; s];
        conv[0] = 1;
        for _ in 0..p - 1 {
            let mut next = vec![0u128; s];
            for (i, &a) in conv.iter().enumerate() {
                for j in 0..s - i {
                    next[i + j] += a * n[j];
                }
            }
            conv = next;
        }
        n.push(conv[s - 1]);
    }
    Ok(n[order])
}

impl Ord for Tree {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.root_type, self.p, self.vertices()).cmp(&(other.root_type, other.p, other.vertices()))
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bare_in_field_is_single_leaf() {
        let t = expand_field(FieldType::In, 0, 3).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].root, Node::Leaf);
        assert_eq!(t[0].trunk(), Trunk::None);
        assert!(expand_field(FieldType::In, 2, 3).unwrap().is_empty());
    }

    #[test]
    fn first_order_local_tree() {
        let t = expand_field(FieldType::Loc, 1, 3).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].trunk(), Trunk::Retarded);
        assert_eq!(t[0].leaves().len(), 2);
        assert_eq!(expand_field(FieldType::Out, 1, 3).unwrap()[0].trunk(), Trunk::Commutator);
    }

    #[test]
    fn second_order_cubic_trees_place_vertex_at_either_child() {
        let t = expand_field(FieldType::Loc, 2, 3).unwrap();
        assert_eq!(t.len(), 2);
        let labels: Vec<String> = t.iter().map(|tr| alloc::format!("{}", tr.vertices()[1])).collect();
        assert_eq!(labels, ["1", "2"]);
    }

    #[test]
    fn counts_follow_recursion() {
        // Recursion oracle computed by hand: cubic gives Catalan numbers.
        let cubic: Vec<u128> = (0..6).map(|s| tree_count(FieldType::Loc, s, 3).unwrap()).collect();
        assert_eq!(cubic, [1, 1, 2, 5, 14, 42]);
        assert_eq!(tree_count(FieldType::Loc, 2, 4).unwrap(), 3);
        assert_eq!(tree_count(FieldType::Loc, 3, 4).unwrap(), 12);
        for p in 3..6 {
            for s in 0..4 {
                assert_eq!(expand_field(FieldType::Out, s, p).unwrap().len() as u128, tree_count(FieldType::Out, s, p).unwrap());
            }
        }
    }

    #[test]
    fn canonical_order_is_sorted() {
        let t = expand_field(FieldType::Loc, 3, 4).unwrap();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dot_export_mentions_trunk() {
        let t = &expand_field(FieldType::Out, 2, 3).unwrap()[0];
        let dot = t.to_dot();
        assert!(dot.contains("-> x [label=\"D\"]"));
        assert!(t.render().starts_with("out order 2"));
    }

    proptest! {
        #[test]
        fn leaf_count_and_label_bijection(order in 0usize..4, p in 3usize..6) {
            for t in expand_field(FieldType::Loc, order, p).unwrap() {
                prop_assert_eq!(t.leaves().len(), order * (p - 2) + 1);
                let v = t.vertices();
                prop_assert_eq!(v.len(), order);
                let mut all: Vec<Label> = v.iter().cloned().chain(t.leaves()).collect();
                all.sort();
                all.dedup();
                prop_assert_eq!(all.len(), order + order * (p - 2) + 1);
                prop_assert_eq!(&Tree::from_vertex_labels(FieldType::Loc, p, &v).unwrap(), &t);
                // Retarded edges point from child to parent: every non-root vertex's parent is a vertex.
                for l in v.iter().skip(1) {
                    prop_assert!(v.contains(&l.parent().unwrap()));
                }
            }
        }
    }
}

//! The category of n-leafed trees: parsing, grafting, refinement morphisms,
//! augmentation, internal-vertex posets and linear extensions.
//!
//! A tree is either a leaf `*` or an ordered (possibly empty) bracket of
//! subtrees. `()` is the empty tree with no leaves; nodes whose child list is
//! empty are "empty nodes" and are counted neither as leaves nor as internal
//! vertices.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("syntax error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("leaf index {index} out of range 1..={count}")]
    LeafIndex { index: usize, count: usize },
    #[error("tree has no leaves")]
    NoLeaves,
}

/// An ordered rooted tree. Equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tree {
    Leaf,
    Node(Vec<Tree>),
}

impl Tree {
    /// The empty tree `()`.
    pub fn empty() -> Tree {
        Tree::Node(Vec::new())
    }

    pub fn node(children: Vec<Tree>) -> Tree {
        Tree::Node(children)
    }

    /// The corolla with `n` leaves (`n >= 1`); `corolla(0)` is the empty tree.
    pub fn corolla(n: usize) -> Tree {
        Tree::Node(vec![Tree::Leaf; n])
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Tree::Leaf => 1,
            Tree::Node(children) => children.iter().map(Tree::leaf_count).sum(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Tree::Leaf => 0,
            Tree::Node(children) => {
                1 + children.iter().map(Tree::height).max().unwrap_or(0)
            }
        }
    }

    /// A tree is flat (a corolla) when every leaf sits at level one.
    pub fn is_flat(&self) -> bool {
        match self {
            Tree::Leaf => false,
            Tree::Node(children) => children.iter().all(|c| matches!(c, Tree::Leaf)),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf)
    }

    pub fn is_empty_node(&self) -> bool {
        matches!(self, Tree::Node(c) if c.is_empty())
    }

    /// True when some vertex other than the root `()` itself is an empty node.
    pub fn contains_empty_node(&self) -> bool {
        match self {
            Tree::Leaf => false,
            Tree::Node(children) => {
                children.is_empty() || children.iter().any(Tree::contains_empty_node)
            }
        }
    }

    pub fn has_unary_vertex(&self) -> bool {
        match self {
            Tree::Leaf => false,
            Tree::Node(children) => {
                children.len() == 1 || children.iter().any(Tree::has_unary_vertex)
            }
        }
    }

    /// Every internal vertex has exactly two children.
    pub fn is_binary(&self) -> bool {
        match self {
            Tree::Leaf => true,
            Tree::Node(children) => children.len() == 2 && children.iter().all(Tree::is_binary),
        }
    }

    /// Paths (child-index sequences from the root) of the leaves, left to right.
    pub fn leaf_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn walk(t: &Tree, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            match t {
                Tree::Leaf => out.push(path.clone()),
                Tree::Node(children) => {
                    for (i, c) in children.iter().enumerate() {
                        path.push(i);
                        walk(c, path, out);
                        path.pop();
                    }
                }
            }
        }
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn subtree(&self, path: &[usize]) -> Option<&Tree> {
        let mut cur = self;
        for &i in path {
            match cur {
                Tree::Node(children) => cur = children.get(i)?,
                Tree::Leaf => return None,
            }
        }
        Some(cur)
    }

    /// Deterministic enumeration key: leaf count, then height, then shape.
    fn order_key(&self) -> (usize, usize) {
        (self.leaf_count(), self.height())
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tree {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match self.order_key().cmp(&other.order_key()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        match (self, other) {
            (Tree::Leaf, Tree::Leaf) => Ordering::Equal,
            (Tree::Leaf, Tree::Node(_)) => Ordering::Less,
            (Tree::Node(_), Tree::Leaf) => Ordering::Greater,
            (Tree::Node(a), Tree::Node(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_text(self))
    }
}

impl FromStr for Tree {
    type Err = TreeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tree(s)
    }
}

impl Serialize for Tree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render_text(self))
    }
}

impl<'de> Deserialize<'de> for Tree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_tree(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses the grammar `tree := "*" | "(" tree* ")"`, whitespace ignored.
pub fn parse_tree(text: &str) -> Result<Tree, TreeError> {
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    let tree = parse_at(bytes, &mut pos)?;
    skip_ws(bytes, &mut pos);
    if pos != bytes.len() {
        return Err(TreeError::Parse {
            offset: pos,
            message: "trailing input".into(),
        });
    }
    Ok(tree)
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
}

fn parse_at(bytes: &[u8], pos: &mut usize) -> Result<Tree, TreeError> {
    skip_ws(bytes, pos);
    match bytes.get(*pos) {
        Some(b'*') => {
            *pos += 1;
            Ok(Tree::Leaf)
        }
        Some(b'(') => {
            *pos += 1;
            let mut children = Vec::new();
            loop {
                skip_ws(bytes, pos);
                match bytes.get(*pos) {
                    Some(b')') => {
                        *pos += 1;
                        return Ok(Tree::Node(children));
                    }
                    Some(_) => children.push(parse_at(bytes, pos)?),
                    None => {
                        return Err(TreeError::Parse {
                            offset: *pos,
                            message: "unbalanced parenthesis".into(),
                        })
                    }
                }
            }
        }
        Some(c) => Err(TreeError::Parse {
            offset: *pos,
            message: format!("unexpected character {:?}", *c as char),
        }),
        None => Err(TreeError::Parse {
            offset: *pos,
            message: "empty input".into(),
        }),
    }
}

pub fn render_text(tree: &Tree) -> String {
    let mut s = String::new();
    fn walk(t: &Tree, s: &mut String) {
        match t {
            Tree::Leaf => s.push('*'),
            Tree::Node(children) => {
                s.push('(');
                for c in children {
                    walk(c, s);
                }
                s.push(')');
            }
        }
    }
    walk(tree, &mut s);
    s
}

/// DOT output with the root at the bottom; leaves are drawn distinctly.
pub fn render_dot(tree: &Tree) -> String {
    let mut out = String::from("digraph tree {\n  rankdir=BT;\n");
    fn walk(t: &Tree, path: &mut Vec<usize>, out: &mut String) {
        let id = node_id(path);
        let shape = match t {
            Tree::Leaf => "point",
            Tree::Node(c) if c.is_empty() => "square",
            Tree::Node(_) => "circle",
        };
        out.push_str(&format!("  {id} [shape={shape}];\n"));
        if let Tree::Node(children) = t {
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                let child = node_id(path);
                walk(c, path, out);
                out.push_str(&format!("  {id} -> {child};\n"));
                path.pop();
            }
        }
    }
    fn node_id(path: &[usize]) -> String {
        let mut s = String::from("v");
        for p in path {
            s.push('_');
            s.push_str(&p.to_string());
        }
        s
    }
    walk(tree, &mut Vec::new(), &mut out);
    out.push_str("}\n");
    out
}

/// Grafts the root of `p` onto the `i`-th leaf (1-based) of `q`.
pub fn graft(q: &Tree, i: usize, p: &Tree) -> Result<Tree, TreeError> {
    let count = q.leaf_count();
    if count == 0 {
        return Err(TreeError::NoLeaves);
    }
    if i == 0 || i > count {
        return Err(TreeError::LeafIndex { index: i, count });
    }
    let mut seen = 0usize;
    fn go(t: &Tree, target: usize, seen: &mut usize, p: &Tree) -> Tree {
        match t {
            Tree::Leaf => {
                *seen += 1;
                if *seen == target {
                    p.clone()
                } else {
                    Tree::Leaf
                }
            }
            Tree::Node(children) => {
                Tree::Node(children.iter().map(|c| go(c, target, seen, p)).collect())
            }
        }
    }
    Ok(go(q, i, &mut seen, p))
}

/// Removes the `i`-th leaf (1-based). A parent left childless becomes an
/// empty node. This is the tree arrived at by composing with the empty tree
/// at that leaf.
pub fn remove_leaf(q: &Tree, i: usize) -> Result<Tree, TreeError> {
    let count = q.leaf_count();
    if i == 0 || i > count {
        return Err(TreeError::LeafIndex { index: i, count });
    }
    if q.is_leaf() {
        return Ok(Tree::empty());
    }
    let mut seen = 0usize;
    fn go(t: &Tree, target: usize, seen: &mut usize) -> Option<Tree> {
        match t {
            Tree::Leaf => {
                *seen += 1;
                if *seen == target {
                    None
                } else {
                    Some(Tree::Leaf)
                }
            }
            Tree::Node(children) => Some(Tree::Node(
                children.iter().filter_map(|c| go(c, target, seen)).collect(),
            )),
        }
    }
    Ok(go(q, i, &mut seen).expect("root survives leaf removal"))
}

/// A vertex of an augmented tree: the added output vertex below the root, or
/// a path-from-root into the original tree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AugVertex {
    /// The output vertex grafted below the original root.
    Bot,
    /// Child-index path from the original root (empty path = root).
    Path(Vec<usize>),
}

impl fmt::Display for AugVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugVertex::Bot => write!(f, "bot"),
            AugVertex::Path(p) if p.is_empty() => write!(f, "root"),
            AugVertex::Path(p) => {
                write!(f, "root")?;
                for i in p {
                    write!(f, ".{i}")?;
                }
                Ok(())
            }
        }
    }
}

/// A tree together with the extra output vertex below its root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Augmented {
    tree: Tree,
}

/// Adds the output vertex below the root. The original root becomes an
/// internal vertex (unless it was a leaf or the empty node, which stay
/// external).
pub fn augment(p: &Tree) -> Augmented {
    Augmented { tree: p.clone() }
}

impl Augmented {
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    /// Internal vertices: the output vertex plus every vertex of the original
    /// tree that has at least one child. Leaves and empty nodes are external.
    pub fn internal_vertices(&self) -> Vec<AugVertex> {
        let mut out = vec![AugVertex::Bot];
        fn walk(t: &Tree, path: &mut Vec<usize>, out: &mut Vec<AugVertex>) {
            if let Tree::Node(children) = t {
                if !children.is_empty() {
                    out.push(AugVertex::Path(path.clone()));
                }
                for (i, c) in children.iter().enumerate() {
                    path.push(i);
                    walk(c, path, out);
                    path.pop();
                }
            }
        }
        walk(&self.tree, &mut Vec::new(), &mut out);
        out.sort();
        out
    }

    /// The non-empty incoming vertices of an internal vertex: the children
    /// for a path vertex, the original root for the output vertex.
    pub fn incoming_count(&self, v: &AugVertex) -> usize {
        match v {
            AugVertex::Bot => usize::from(!self.tree.is_empty_node()),
            AugVertex::Path(p) => match self.tree.subtree(p) {
                Some(Tree::Node(children)) => {
                    children.iter().filter(|c| !c.is_empty_node()).count()
                }
                _ => 0,
            },
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.tree.leaf_count()
    }
}

/// Partial order on the internal vertices of an augmented tree: closer to the
/// root is smaller, the output vertex is the minimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexPoset {
    elems: Vec<AugVertex>,
}

pub fn internal_poset(aug: &Augmented) -> VertexPoset {
    VertexPoset {
        elems: aug.internal_vertices(),
    }
}

impl VertexPoset {
    /// Poset over explicit elements; ordering is still the ancestor relation.
    pub fn from_elements(mut elems: Vec<AugVertex>) -> VertexPoset {
        elems.sort();
        elems.dedup();
        VertexPoset { elems }
    }

    pub fn elements(&self) -> &[AugVertex] {
        &self.elems
    }

    pub fn le(&self, a: &AugVertex, b: &AugVertex) -> bool {
        match (a, b) {
            (AugVertex::Bot, _) => true,
            (_, AugVertex::Bot) => a == b,
            (AugVertex::Path(pa), AugVertex::Path(pb)) => pb.starts_with(pa),
        }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }
}

/// A linear extension of the internal-vertex poset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TotalOrdering(pub Vec<AugVertex>);

impl TotalOrdering {
    pub fn position(&self, v: &AugVertex) -> Option<usize> {
        self.0.iter().position(|x| x == v)
    }

    pub fn is_extension_of(&self, poset: &VertexPoset) -> bool {
        if self.0.len() != poset.len() {
            return false;
        }
        let mut seen: BTreeSet<&AugVertex> = BTreeSet::new();
        for v in &self.0 {
            if !poset.elements().contains(v) {
                return false;
            }
            for u in poset.elements() {
                if poset.le(u, v) && u != v && !seen.contains(u) {
                    return false;
                }
            }
            seen.insert(v);
        }
        true
    }
}

/// All linear extensions, in lexicographic order of vertex identifiers.
pub fn linear_extensions(poset: &VertexPoset) -> Vec<TotalOrdering> {
    let mut out = Vec::new();
    let mut placed: Vec<AugVertex> = Vec::new();
    let mut remaining: Vec<AugVertex> = poset.elements().to_vec();
    fn go(
        poset: &VertexPoset,
        placed: &mut Vec<AugVertex>,
        remaining: &mut Vec<AugVertex>,
        out: &mut Vec<TotalOrdering>,
    ) {
        if remaining.is_empty() {
            out.push(TotalOrdering(placed.clone()));
            return;
        }
        // remaining is kept sorted, so choices come out lexicographically.
        for idx in 0..remaining.len() {
            let v = remaining[idx].clone();
            let ready = remaining
                .iter()
                .all(|u| *u == v || !poset.le(u, &v));
            if !ready {
                continue;
            }
            remaining.remove(idx);
            placed.push(v);
            go(poset, placed, remaining, out);
            let v = placed.pop().unwrap();
            remaining.insert(idx, v);
        }
    }
    go(poset, &mut placed, &mut remaining, &mut out);
    out
}

/// One refinement move on a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Move {
    /// Wrap the subtree at `path` in a unary vertex.
    UnaryInsert(Vec<usize>),
    /// Remove the unary vertex at `path`, splicing its child in place.
    UnaryDelete(Vec<usize>),
    /// Contract the edge above the internal vertex at `path`, merging its
    /// children into the parent.
    Contract(Vec<usize>),
}

/// The unique morphism between two trees, witnessed by a move sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeMorphism {
    pub source: Tree,
    pub target: Tree,
    pub moves: Vec<Move>,
}

impl TreeMorphism {
    pub fn is_identity(&self) -> bool {
        self.moves.is_empty()
    }
}

/// Deletes unary vertices until none remain; returns the normal form and the
/// delete moves applied (top-down, first-found order).
pub fn normalize(tree: &Tree) -> (Tree, Vec<Move>) {
    let mut t = tree.clone();
    let mut moves = Vec::new();
    loop {
        match first_unary(&t, &mut Vec::new()) {
            Some(path) => {
                t = delete_unary(&t, &path);
                moves.push(Move::UnaryDelete(path));
            }
            None => return (t, moves),
        }
    }
}

fn first_unary(t: &Tree, path: &mut Vec<usize>) -> Option<Vec<usize>> {
    if let Tree::Node(children) = t {
        if children.len() == 1 {
            return Some(path.clone());
        }
        for (i, c) in children.iter().enumerate() {
            path.push(i);
            if let Some(p) = first_unary(c, path) {
                return Some(p);
            }
            path.pop();
        }
    }
    None
}

fn delete_unary(t: &Tree, path: &[usize]) -> Tree {
    if path.is_empty() {
        match t {
            Tree::Node(children) if children.len() == 1 => children[0].clone(),
            _ => panic!("not a unary vertex"),
        }
    } else {
        match t {
            Tree::Node(children) => {
                let mut children = children.clone();
                children[path[0]] = delete_unary(&children[path[0]], &path[1..]);
                Tree::Node(children)
            }
            Tree::Leaf => panic!("bad path"),
        }
    }
}

/// Paths of contractible edges: edges whose upper endpoint is an internal
/// vertex with at least one child. Edges to leaves or empty nodes stay.
pub fn contractible_edges(t: &Tree) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn walk(t: &Tree, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if let Tree::Node(children) = t {
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                if matches!(c, Tree::Node(gc) if !gc.is_empty()) {
                    out.push(path.clone());
                }
                walk(c, path, out);
                path.pop();
            }
        }
    }
    walk(t, &mut Vec::new(), &mut out);
    out
}

/// Simultaneously contracts the edges above the given vertices.
pub fn contract_edges(t: &Tree, set: &BTreeSet<Vec<usize>>) -> Tree {
    fn go(t: &Tree, path: &mut Vec<usize>, set: &BTreeSet<Vec<usize>>) -> Vec<Tree> {
        match t {
            Tree::Leaf => vec![Tree::Leaf],
            Tree::Node(children) => {
                let mut new_children = Vec::new();
                for (i, c) in children.iter().enumerate() {
                    path.push(i);
                    new_children.extend(go(c, path, set));
                    path.pop();
                }
                let rebuilt = Tree::Node(new_children);
                if set.contains(path.as_slice()) {
                    match rebuilt {
                        Tree::Node(gc) => gc,
                        Tree::Leaf => unreachable!(),
                    }
                } else {
                    vec![rebuilt]
                }
            }
        }
    }
    let mut parts = go(t, &mut Vec::new(), set);
    assert_eq!(parts.len(), 1, "root is never contracted");
    parts.pop().unwrap()
}

/// All contraction sets carrying `from` to `to`. Used both to find morphisms
/// and to check that hom-sets are subsingletons.
pub fn contraction_sets(from: &Tree, to: &Tree) -> Vec<BTreeSet<Vec<usize>>> {
    if from.leaf_count() != to.leaf_count() {
        return Vec::new();
    }
    let edges = contractible_edges(from);
    let mut found = Vec::new();
    // Trees at hand are small; subset enumeration is plenty.
    let n = edges.len();
    for mask in 0u64..(1u64 << n) {
        let set: BTreeSet<Vec<usize>> = edges
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, e)| e.clone())
            .collect();
        if contract_edges(from, &set) == *to {
            found.push(set);
        }
    }
    found
}

/// The unique morphism from `source` to `target`, if the target is reachable
/// by unary insertions, unary deletions and internal-edge contractions.
pub fn morphism(source: &Tree, target: &Tree) -> Option<TreeMorphism> {
    if source == target {
        return Some(TreeMorphism {
            source: source.clone(),
            target: target.clone(),
            moves: Vec::new(),
        });
    }
    if source.leaf_count() != target.leaf_count() {
        return None;
    }
    let (norm_s, deletes) = normalize(source);
    let (norm_t, t_deletes) = normalize(target);
    let sets = contraction_sets(&norm_s, &norm_t);
    let set = sets.first()?;
    let mut moves = deletes;
    for path in set {
        moves.push(Move::Contract(path.clone()));
    }
    // Replaying the target's deletions backwards re-inserts its unary wrappers.
    for mv in t_deletes.into_iter().rev() {
        match mv {
            Move::UnaryDelete(path) => moves.push(Move::UnaryInsert(path)),
            _ => unreachable!(),
        }
    }
    Some(TreeMorphism {
        source: source.clone(),
        target: target.clone(),
        moves,
    })
}

/// All trees with the same leaf count as `q`, no unary vertices, height at
/// most `n - 1`, that admit a morphism to `q`. Deterministic order.
pub fn enumerate_refining_trees(q: &Tree) -> Result<Vec<Tree>, TreeError> {
    let n = q.leaf_count();
    if n == 0 {
        return Err(TreeError::NoLeaves);
    }
    let (norm_q, _) = normalize(q);
    let mut out: Vec<Tree> = enumerate_no_unary(n)
        .into_iter()
        .filter(|p| p.height() <= n.saturating_sub(1))
        .filter(|p| !contraction_sets(p, &norm_q).is_empty())
        .collect();
    out.sort();
    Ok(out)
}

/// All trees with `n >= 1` leaves and no unary vertices (hence no empty
/// nodes). Finite because every internal vertex branches.
pub fn enumerate_no_unary(n: usize) -> Vec<Tree> {
    fn gen(n: usize) -> Vec<Tree> {
        let mut out = Vec::new();
        if n == 1 {
            out.push(Tree::Leaf);
        }
        // Root with k >= 2 children splitting the leaves.
        for k in 2..=n {
            let mut parts = Vec::new();
            compositions(n, k, &mut Vec::new(), &mut parts);
            for comp in parts {
                let choices: Vec<Vec<Tree>> = comp.iter().map(|&m| gen(m)).collect();
                let mut stack: Vec<Vec<Tree>> = vec![Vec::new()];
                for opts in &choices {
                    let mut next = Vec::new();
                    for prefix in &stack {
                        for o in opts {
                            let mut p = prefix.clone();
                            p.push(o.clone());
                            next.push(p);
                        }
                    }
                    stack = next;
                }
                for children in stack {
                    out.push(Tree::Node(children));
                }
            }
        }
        out
    }
    fn compositions(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            if n >= 1 {
                cur.push(n);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for first in 1..=(n + 1 - k) {
            cur.push(first);
            compositions(n - first, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = gen(n);
    out.sort();
    out.dedup();
    out
}

/// Binary trees with `n` leaves and no unary vertices.
pub fn binary_trees(n: usize) -> Vec<Tree> {
    enumerate_no_unary(n)
        .into_iter()
        .filter(Tree::is_binary)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Tree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn parse_basics() {
        assert_eq!(t("*"), Tree::Leaf);
        assert_eq!(t("()"), Tree::empty());
        assert_eq!(t("()").leaf_count(), 0);
        let p = t("((**)*)");
        assert_eq!(p, Tree::Node(vec![Tree::Node(vec![Tree::Leaf, Tree::Leaf]), Tree::Leaf]));
        assert_eq!(p.leaf_count(), 3);
        // Nested no-leaf trees are representable.
        assert_eq!(t("(()())").leaf_count(), 0);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse_tree("(*") {
            Err(TreeError::Parse { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_tree("*x") {
            Err(TreeError::Parse { offset, .. }) => assert_eq!(offset, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_tree("").is_err());
    }

    #[test]
    fn leaf_count_sums_over_children() {
        let p = t("((**)(*(**)))");
        assert_eq!(p.leaf_count(), 5);
        assert_eq!(p.height(), 3);
        assert!(!p.is_flat());
        assert!(t("(***)").is_flat());
    }

    #[test]
    fn graft_identity_leaf() {
        for s in ["*", "(**)", "((**)*)", "()"] {
            assert_eq!(graft(&Tree::Leaf, 1, &t(s)).unwrap(), t(s));
        }
    }

    #[test]
    fn graft_binary_onto_binary() {
        assert_eq!(graft(&t("(**)"), 1, &t("(**)")).unwrap(), t("((**)*)"));
        assert_eq!(graft(&t("(**)"), 2, &t("(**)")).unwrap(), t("(*(**))"));
    }

    #[test]
    fn graft_rejects_bad_indices() {
        assert_eq!(
            graft(&t("(**)"), 3, &Tree::Leaf),
            Err(TreeError::LeafIndex { index: 3, count: 2 })
        );
        assert_eq!(graft(&t("()"), 1, &Tree::Leaf), Err(TreeError::NoLeaves));
    }

    #[test]
    fn graft_empty_tree_makes_empty_node() {
        assert_eq!(graft(&t("(**)"), 1, &t("()")).unwrap(), t("(()*)"));
        assert_eq!(graft(&t("(**)"), 1, &t("()")).unwrap().leaf_count(), 1);
    }

    #[test]
    fn remove_leaf_cases() {
        assert_eq!(remove_leaf(&t("(**)"), 1).unwrap(), t("(*)"));
        assert_eq!(remove_leaf(&t("(*)"), 1).unwrap(), t("()"));
        assert_eq!(remove_leaf(&Tree::Leaf, 1).unwrap(), t("()"));
        assert_eq!(remove_leaf(&t("((**)*)"), 3).unwrap(), t("((**))"));
    }

    #[test]
    fn augmented_internal_vertices() {
        // A single leaf: only the output vertex is internal.
        let aug = augment(&Tree::Leaf);
        assert_eq!(aug.internal_vertices(), vec![AugVertex::Bot]);
        assert_eq!(aug.leaf_count(), 1);

        let aug = augment(&t("(**)"));
        assert_eq!(
            aug.internal_vertices(),
            vec![AugVertex::Bot, AugVertex::Path(vec![])]
        );
        assert_eq!(aug.incoming_count(&AugVertex::Path(vec![])), 2);

        // The empty tree: the empty node is not internal and not incoming.
        let aug = augment(&t("()"));
        assert_eq!(aug.internal_vertices(), vec![AugVertex::Bot]);
        assert_eq!(aug.incoming_count(&AugVertex::Bot), 0);
    }

    #[test]
    fn poset_chain_for_nested_tree() {
        let aug = augment(&t("((**)*)"));
        let poset = internal_poset(&aug);
        assert_eq!(poset.len(), 3);
        let exts = linear_extensions(&poset);
        assert_eq!(exts.len(), 1);
        assert_eq!(
            exts[0].0,
            vec![
                AugVertex::Bot,
                AugVertex::Path(vec![]),
                AugVertex::Path(vec![0])
            ]
        );
    }

    #[test]
    fn poset_two_extensions_for_double_tree() {
        let aug = augment(&t("((**)(**))"));
        let poset = internal_poset(&aug);
        assert_eq!(poset.len(), 4);
        let exts = linear_extensions(&poset);
        assert_eq!(exts.len(), 2);
        for e in &exts {
            assert!(e.is_extension_of(&poset));
            assert_eq!(e.0[0], AugVertex::Bot);
            assert_eq!(e.0[1], AugVertex::Path(vec![]));
        }
    }

    #[test]
    fn three_incomparable_vertices_have_six_extensions() {
        let aug = augment(&t("((**)(**)(**))"));
        let poset = internal_poset(&aug);
        assert_eq!(poset.len(), 5);
        let exts = linear_extensions(&poset);
        assert_eq!(exts.len(), 6);

        // Brute-force oracle: filter all permutations for compatibility.
        let elems = poset.elements().to_vec();
        let mut count = 0;
        permute(&elems, &mut Vec::new(), &mut |perm| {
            let ordering = TotalOrdering(perm.to_vec());
            if ordering.is_extension_of(&poset) {
                count += 1;
            }
        });
        assert_eq!(count, 6);
    }

    fn permute<T: Clone>(rest: &[T], cur: &mut Vec<T>, f: &mut impl FnMut(&[T])) {
        if rest.is_empty() {
            f(cur);
            return;
        }
        for i in 0..rest.len() {
            let mut rest2 = rest.to_vec();
            let x = rest2.remove(i);
            cur.push(x);
            permute(&rest2, cur, f);
            cur.pop();
        }
    }

    #[test]
    fn corolla_poset_is_chain() {
        let aug = augment(&t("(****)"));
        let poset = internal_poset(&aug);
        assert_eq!(poset.len(), 2);
        assert_eq!(linear_extensions(&poset).len(), 1);
    }

    #[test]
    fn morphism_identity_is_empty() {
        let p = t("((**)*)");
        let m = morphism(&p, &p).unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn morphism_contraction_to_corolla() {
        let m = morphism(&t("((**)*)"), &t("(***)")).unwrap();
        assert_eq!(m.moves, vec![Move::Contract(vec![0])]);
        // Not invertible: the corolla does not map back.
        assert!(morphism(&t("(***)"), &t("((**)*)")).is_none());
    }

    #[test]
    fn morphism_unary_delete() {
        let m = morphism(&t("(*)"), &Tree::Leaf).unwrap();
        assert_eq!(m.moves, vec![Move::UnaryDelete(vec![])]);
        // And unary chains collapse in both directions.
        assert!(morphism(&Tree::Leaf, &t("(*)")).is_some());
        assert!(morphism(&t("((*))"), &t("(*)")).is_some());
    }

    #[test]
    fn no_leaf_trees_stay_unrelated() {
        assert!(morphism(&t("()"), &t("(()())")).is_none());
        assert!(morphism(&t("(()())"), &t("()")).is_none());
    }

    #[test]
    fn morphism_subsingleton_up_to_four_leaves() {
        for n in 1..=4usize {
            let trees = enumerate_no_unary(n);
            for q in &trees {
                for p in &trees {
                    let sets = contraction_sets(q, p);
                    assert!(
                        sets.len() <= 1,
                        "multiple move sequences {q} -> {p}: {sets:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn refining_trees_of_binary_corolla() {
        let out = enumerate_refining_trees(&t("(**)")).unwrap();
        assert_eq!(out, vec![t("(**)")]);
    }

    #[test]
    fn refining_trees_of_three_corolla() {
        let out = enumerate_refining_trees(&t("(***)")).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.contains(&t("(***)")));
        assert!(out.contains(&t("((**)*)")));
        assert!(out.contains(&t("(*(**))")));
    }

    #[test]
    fn refining_trees_of_four_corolla_binary_count() {
        let out = enumerate_refining_trees(&t("(****)")).unwrap();
        let binary: Vec<&Tree> = out.iter().filter(|p| p.is_binary()).collect();
        assert_eq!(binary.len(), 5);
        assert!(out.contains(&t("(****)")));
        assert!(out.contains(&t("((**)**)")));
    }

    #[test]
    fn refining_trees_of_nested_shape() {
        // Only the shape itself maps to it: the other binary 3-leaf tree
        // and the corolla do not contract to ((**)*).
        let out = enumerate_refining_trees(&t("((**)*)")).unwrap();
        assert_eq!(out, vec![t("((**)*)")]);
        // A unary-decorated target normalizes first.
        let out = enumerate_refining_trees(&t("(((**))*)")).unwrap();
        assert_eq!(out, vec![t("((**)*)")]);
    }

    #[test]
    fn refining_trees_respect_height_bound() {
        for p in enumerate_refining_trees(&t("(***)")).unwrap() {
            assert!(p.height() <= 2);
            assert!(!p.has_unary_vertex());
        }
    }

    #[test]
    fn binary_tree_counts_are_catalan() {
        // Oracle 1: brute-force generation and filtering.
        let brute: Vec<usize> = (1..=5).map(|n| binary_trees(n).len()).collect();
        assert_eq!(brute, vec![1, 1, 2, 5, 14]);
        // Oracle 2: the Catalan recurrence c_n = sum c_i c_{n-1-i}.
        let mut c = vec![1u64; 1];
        for n in 1..5 {
            let mut s = 0;
            for i in 0..n {
                s += c[i] * c[n - 1 - i];
            }
            c.push(s);
        }
        assert_eq!(c, vec![1, 1, 2, 5, 14]);
    }

    #[test]
    fn render_round_trip() {
        for s in ["*", "()", "((**)*)", "(*(**)(* *))".replace(' ', "").as_str()] {
            assert_eq!(render_text(&t(s)), s);
        }
    }

    #[test]
    fn dot_output_mentions_every_vertex() {
        let dot = render_dot(&t("((**)*)"));
        assert!(dot.contains("rankdir=BT"));
        assert!(dot.contains("v_0 -> v_0_0"));
        assert!(dot.contains("shape=point"));
    }
}

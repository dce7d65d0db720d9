//! Algebras generated by a unit and a binary map inside the multimap
//! calculus: the tree-indexed family, its coherence axioms, and operator
//! product expansions.
//!
//! The holomorphic construction starts from a commutative algebra with a
//! compatible divided-power derivation family and produces the pole-free
//! binary map `f2(a (x) b)(x, y) = sum (D(i) a)(D(j) b) x^i y^j`. The rest
//! of the family is generated by grafting composition; corolla values are
//! read off a binary generation and checked against all others.

use crate::multimap::{
    compose, identity, make_multimap, multimap_eq, nullary, refine, symmetry_action, HModule,
    LabelledTree, MultiError, MultiMap,
};
use crate::rational::{format_rat, parse_rat, Rat};
use crate::series::{PolePair, SeriesWindow, SingularSeries, Var};
use crate::tree::{enumerate_no_unary, morphism, parse_tree, remove_leaf, Tree};
use num_traits::Zero;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error(transparent)]
    Multi(#[from] MultiError),
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error("multiplication table invalid: {0}")]
    BadTable(String),
    #[error("generation paths disagree for tree {tree}: {detail}")]
    GenerationMismatch { tree: String, detail: String },
    #[error("binary generator must sit over the two-leaf corolla")]
    BadGenerator,
    #[error("bad algebra document: {0}")]
    Document(String),
}

/// A commutative associative algebra on a finite-rank module whose
/// divided-power action satisfies the Leibniz rule against the product,
/// within the declared degree cap.
#[derive(Clone, Debug)]
pub struct CommDiffAlgebra {
    module: Arc<HModule>,
    /// mul[a][b] = coefficient vector of `e_a * e_b`.
    mul: Vec<Vec<Vec<Rat>>>,
    unit: Vec<Rat>,
    basis_names: Vec<String>,
}

impl CommDiffAlgebra {
    pub fn new(
        module: Arc<HModule>,
        mul: Vec<Vec<Vec<Rat>>>,
        unit: Vec<Rat>,
        basis_names: Vec<String>,
    ) -> Result<CommDiffAlgebra, AlgebraError> {
        let alg = CommDiffAlgebra {
            module,
            mul,
            unit,
            basis_names,
        };
        alg.validate()?;
        Ok(alg)
    }

    fn validate(&self) -> Result<(), AlgebraError> {
        let r = self.module.rank();
        if self.mul.len() != r
            || self.mul.iter().any(|row| row.len() != r)
            || self.mul.iter().flatten().any(|v| v.len() != r)
            || self.unit.len() != r
            || self.basis_names.len() != r
        {
            return Err(AlgebraError::BadTable(
                "table shapes do not match rank".into(),
            ));
        }
        for a in 0..r {
            for b in 0..r {
                if self.mul[a][b] != self.mul[b][a] {
                    return Err(AlgebraError::BadTable(format!("e{a} e{b} != e{b} e{a}")));
                }
            }
        }
        for a in 0..r {
            if self.mul_vec(&self.unit, &unit_vec(r, a)) != unit_vec(r, a) {
                return Err(AlgebraError::BadTable(format!("unit fails at e{a}")));
            }
        }
        for a in 0..r {
            for b in 0..r {
                for c in 0..r {
                    let left = self.mul_vec(&self.mul[a][b], &unit_vec(r, c));
                    let right = self.mul_vec(&unit_vec(r, a), &self.mul[b][c]);
                    if left != right {
                        return Err(AlgebraError::BadTable(format!(
                            "(e{a} e{b}) e{c} != e{a} (e{b} e{c})"
                        )));
                    }
                }
            }
        }
        // Divided-power Leibniz, within the degree cap when graded.
        let max = self.module.max_degree();
        for a in 0..r {
            for b in 0..r {
                if !self.tuple_within_cap(&[a, b]) {
                    continue;
                }
                let ab = self.mul_vec(&unit_vec(r, a), &unit_vec(r, b));
                for i in 1..=max {
                    let lhs = self.module.act(i, &ab);
                    let mut rhs = vec![Rat::zero(); r];
                    for p in 0..=i {
                        let da = self.module.act(p, &unit_vec(r, a));
                        let db = self.module.act(i - p, &unit_vec(r, b));
                        let prod = self.mul_vec(&da, &db);
                        for (k, v) in prod.into_iter().enumerate() {
                            rhs[k] += v;
                        }
                    }
                    if lhs != rhs {
                        return Err(AlgebraError::BadTable(format!(
                            "Leibniz fails for D({i}) on e{a} e{b}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn module(&self) -> &Arc<HModule> {
        &self.module
    }

    pub fn unit(&self) -> &[Rat] {
        &self.unit
    }

    pub fn basis_names(&self) -> &[String] {
        &self.basis_names
    }

    pub fn basis_index(&self, name: &str) -> Option<usize> {
        self.basis_names.iter().position(|n| n == name)
    }

    pub fn mul_vec(&self, x: &[Rat], y: &[Rat]) -> Vec<Rat> {
        let r = self.module.rank();
        let mut out = vec![Rat::zero(); r];
        for (a, xa) in x.iter().enumerate() {
            if xa.is_zero() {
                continue;
            }
            for (b, yb) in y.iter().enumerate() {
                if yb.is_zero() {
                    continue;
                }
                for (k, c) in self.mul[a][b].iter().enumerate() {
                    if !c.is_zero() {
                        out[k] += xa * yb * c;
                    }
                }
            }
        }
        out
    }

    fn tuple_within_cap(&self, tuple: &[usize]) -> bool {
        match (self.module.basis_degrees(), self.module.degree_cap()) {
            (Some(degrees), Some(cap)) => tuple.iter().map(|&b| degrees[b]).sum::<usize>() <= cap,
            _ => true,
        }
    }

    /// The rationals with the trivial derivation.
    pub fn rationals(degree_bound: u32) -> CommDiffAlgebra {
        let module = Arc::new(HModule::trivial("R", degree_bound));
        CommDiffAlgebra::new(
            module,
            vec![vec![vec![Rat::from_integer(1.into())]]],
            vec![Rat::from_integer(1.into())],
            vec!["1".into()],
        )
        .expect("rationals are valid")
    }

    /// Truncated polynomials in one variable with the divided-power family
    /// `D(i) u^m = C(m, i) u^(m-i)`; products above the cap truncate to zero.
    pub fn truncated_polynomial(cap: usize, degree_bound: u32) -> CommDiffAlgebra {
        let module = Arc::new(HModule::truncated_polynomial("B", cap, degree_bound));
        let r = cap + 1;
        let mut mul = vec![vec![vec![Rat::zero(); r]; r]; r];
        for a in 0..r {
            for b in 0..r {
                if a + b < r {
                    mul[a][b][a + b] = Rat::from_integer(1.into());
                }
            }
        }
        let mut unit = vec![Rat::zero(); r];
        unit[0] = Rat::from_integer(1.into());
        let names = (0..r)
            .map(|m| match m {
                0 => "1".to_string(),
                1 => "u".to_string(),
                m => format!("u{m}"),
            })
            .collect();
        CommDiffAlgebra::new(module, mul, unit, names).expect("polynomial algebra is valid")
    }
}

fn unit_vec(rank: usize, i: usize) -> Vec<Rat> {
    let mut v = vec![Rat::zero(); rank];
    v[i] = Rat::from_integer(1.into());
    v
}

/// An object together with its unit element and binary generator; the rest
/// of the family is derived by grafting composition and cached.
pub struct AlgebraStructure {
    object: Arc<HModule>,
    algebra: Option<CommDiffAlgebra>,
    unit_map: MultiMap,
    binary: MultiMap,
    window: SeriesWindow,
    inv_degree: u32,
    // Pure memo: recomputation would return the same value.
    cache: Mutex<BTreeMap<Tree, MultiMap>>,
}

impl fmt::Debug for AlgebraStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebraStructure")
            .field("object", &self.object.id())
            .field("window", &self.window)
            .finish()
    }
}

/// Builds the pole-free algebra generated by a commutative differential
/// algebra.
pub fn make_holomorphic_algebra(
    b: &CommDiffAlgebra,
    window: SeriesWindow,
    inv_degree: u32,
) -> Result<AlgebraStructure, AlgebraError> {
    let module = b.module().clone();
    let tree = LabelledTree::new(
        parse_tree("(**)").unwrap(),
        vec![module.clone(), module.clone()],
        module.clone(),
    )?;
    let vars = tree.leaf_vars().to_vec();
    let rank = module.rank();
    let max = module.max_degree();
    let mut assignments = BTreeMap::new();
    for a in 0..rank {
        for bb in 0..rank {
            let mut series = SingularSeries::zero(module.basis_space(), window);
            for v in &vars {
                series.declare_var(v.clone());
            }
            for i in 0..=max {
                let da = module.act(i, &unit_vec(rank, a));
                if da.iter().all(Rat::is_zero) {
                    continue;
                }
                for j in 0..=max {
                    let db = module.act(j, &unit_vec(rank, bb));
                    if db.iter().all(Rat::is_zero) {
                        continue;
                    }
                    let prod = b.mul_vec(&da, &db);
                    for (k, c) in prod.into_iter().enumerate() {
                        if !c.is_zero() {
                            series.push_term(
                                c,
                                &[],
                                &[(vars[0].clone(), i as i64), (vars[1].clone(), j as i64)],
                                k,
                            )?;
                        }
                    }
                }
            }
            if !series.is_zero() {
                assignments.insert(vec![a, bb], series);
            }
        }
    }
    let binary = make_multimap(tree, window, inv_degree, assignments)?;
    let unit_map = nullary(module.clone(), b.unit().to_vec(), window, inv_degree)?;
    Ok(AlgebraStructure {
        object: module,
        algebra: Some(b.clone()),
        unit_map,
        binary,
        window,
        inv_degree,
        cache: Mutex::new(BTreeMap::new()),
    })
}

/// Wraps a user-supplied binary generator (possibly singular) and unit
/// vector into an algebra structure. The generator must sit over the
/// two-leaf corolla.
pub fn make_custom_algebra(
    object: Arc<HModule>,
    binary: MultiMap,
    unit_vector: Vec<Rat>,
    inv_degree: u32,
) -> Result<AlgebraStructure, AlgebraError> {
    if binary.tree().tree() != &parse_tree("(**)").unwrap() || binary.arity() != 2 {
        return Err(AlgebraError::BadGenerator);
    }
    let window = binary.window();
    let unit_map = nullary(object.clone(), unit_vector, window, inv_degree)?;
    Ok(AlgebraStructure {
        object,
        algebra: None,
        unit_map,
        binary,
        window,
        inv_degree,
        cache: Mutex::new(BTreeMap::new()),
    })
}

impl AlgebraStructure {
    pub fn object(&self) -> &Arc<HModule> {
        &self.object
    }

    pub fn algebra(&self) -> Option<&CommDiffAlgebra> {
        self.algebra.as_ref()
    }

    pub fn unit_map(&self) -> &MultiMap {
        &self.unit_map
    }

    pub fn binary(&self) -> &MultiMap {
        &self.binary
    }

    pub fn window(&self) -> SeriesWindow {
        self.window
    }

    pub fn invariance_degree(&self) -> u32 {
        self.inv_degree
    }

    /// The family member attached to a tree, generated by composition.
    /// Corollas with three or more leaves are read off the left-comb binary
    /// generation and checked against every other binary generation.
    pub fn f_for_tree(&self, p: &Tree) -> Result<MultiMap, AlgebraError> {
        if let Some(hit) = self.cache.lock().unwrap().get(p) {
            return Ok(hit.clone());
        }
        let value = self.compute_f(p)?;
        self.cache.lock().unwrap().insert(p.clone(), value.clone());
        Ok(value)
    }

    fn compute_f(&self, p: &Tree) -> Result<MultiMap, AlgebraError> {
        match p {
            Tree::Leaf => Ok(identity(self.object.clone(), self.window, self.inv_degree)?),
            Tree::Node(children) if children.is_empty() => Ok(self.unit_map.clone()),
            Tree::Node(children) if children.len() == 1 => {
                // Unary wrapper: the refinement image of the inner value.
                let inner = self.f_for_tree(&children[0])?;
                Ok(refine(&inner, p)?)
            }
            Tree::Node(children) => {
                let n = children.len();
                if children.iter().all(|c| c.is_leaf()) {
                    self.corolla(n)
                } else {
                    // f over q o (p_1, ..., p_n): graft the children into
                    // the corolla, right to left so slots keep their index.
                    let mut acc = self.corolla(n)?;
                    for (j, child) in children.iter().enumerate().rev() {
                        if child.is_leaf() {
                            continue;
                        }
                        let inner = self.f_for_tree(child)?;
                        acc = compose(&acc, j + 1, &inner)?;
                    }
                    Ok(acc)
                }
            }
        }
    }

    fn corolla(&self, n: usize) -> Result<MultiMap, AlgebraError> {
        if n == 2 {
            return Ok(self.binary.clone());
        }
        // Left comb generation: f2 composed into its own first leaf.
        let mut comb = self.binary.clone();
        for _ in 2..n {
            comb = compose(&self.binary, 1, &comb)?;
        }
        // Read the flat series over the corolla shape.
        let corolla_tree = Tree::corolla(n);
        let labelled = LabelledTree::new(
            corolla_tree.clone(),
            comb.tree().leaf_labels().to_vec(),
            comb.tree().root_label().clone(),
        )?;
        let assignments: BTreeMap<Vec<usize>, SingularSeries> = comb
            .stored()
            .map(|(t, s)| (t.clone(), s.clone()))
            .collect();
        let candidate = make_multimap(labelled, self.window, self.inv_degree, assignments)?;
        // Every binary generation must produce the same refinement image.
        // Binary trees on n >= 3 leaves are never flat, so their family
        // values come from the composition path, not from this corolla.
        for b in crate::tree::binary_trees(n) {
            let direct = self.f_for_tree(&b)?;
            let image = refine(&candidate, &b)?;
            if !multimap_eq(&image, &direct)? {
                return Err(AlgebraError::GenerationMismatch {
                    tree: corolla_tree.to_string(),
                    detail: format!("binary generation over {b} disagrees"),
                });
            }
        }
        Ok(candidate)
    }
}

/// One verified statement in an algebra report.
#[derive(Clone, Debug)]
pub struct AlgebraCheck {
    pub axiom: String,
    pub subject: String,
    pub passed: bool,
    pub witness: Option<String>,
}

/// Pass/fail per axiom per tree, plus the commutativity verdict.
#[derive(Clone, Debug, Default)]
pub struct AlgebraReport {
    pub checks: Vec<AlgebraCheck>,
}

impl AlgebraReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn commutative(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.axiom == "commutativity")
            .all(|c| c.passed)
    }

    fn record(&mut self, axiom: &str, subject: String, outcome: Result<bool, String>) {
        let (passed, witness) = match outcome {
            Ok(true) => (true, None),
            Ok(false) => (false, Some("values differ".to_string())),
            Err(e) => (false, Some(e)),
        };
        self.checks.push(AlgebraCheck {
            axiom: axiom.to_string(),
            subject,
            passed,
            witness,
        });
    }
}

impl fmt::Display for AlgebraReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed {
                writeln!(f, "PASS {} {}", c.axiom, c.subject)?;
            } else {
                writeln!(
                    f,
                    "FAIL {} {}: {}",
                    c.axiom,
                    c.subject,
                    c.witness.as_deref().unwrap_or("no witness")
                )?;
            }
        }
        Ok(())
    }
}

/// Verifies the composition, unit, refinement and commutativity axioms for
/// every tree with at most `max_leaves` leaves. Failures become report
/// entries with witnesses, never panics.
pub fn check_algebra(alg: &AlgebraStructure, max_leaves: usize) -> AlgebraReport {
    let mut report = AlgebraReport::default();
    let mut trees: Vec<Tree> = Vec::new();
    for n in 1..=max_leaves {
        trees.extend(enumerate_no_unary(n));
    }

    // Composition: every way of splitting a tree at an internal non-root
    // vertex must reproduce the family value.
    for p in &trees {
        for (q, slot, r) in splittings(p) {
            let subject = format!("{p} = {q} o_{slot} {r}");
            let outcome = (|| -> Result<bool, String> {
                let fp = alg.f_for_tree(p).map_err(|e| e.to_string())?;
                let fq = alg.f_for_tree(&q).map_err(|e| e.to_string())?;
                let fr = alg.f_for_tree(&r).map_err(|e| e.to_string())?;
                let composed = compose(&fq, slot, &fr).map_err(|e| e.to_string())?;
                multimap_eq(&fp, &composed).map_err(|e| e.to_string())
            })();
            report.record("composition", subject, outcome);
        }
    }

    // Unit: composing the empty map at any leaf removes that leaf.
    for p in &trees {
        for k in 1..=p.leaf_count() {
            let subject = format!("{p} o_{k} unit");
            let outcome = (|| -> Result<bool, String> {
                let fp = alg.f_for_tree(p).map_err(|e| e.to_string())?;
                let composed = compose(&fp, k, alg.unit_map()).map_err(|e| e.to_string())?;
                let reduced = remove_leaf(p, k).map_err(|e| e.to_string())?;
                let expected = alg.f_for_tree(&reduced).map_err(|e| e.to_string())?;
                multimap_eq(&composed, &expected).map_err(|e| e.to_string())
            })();
            report.record("unit", subject, outcome);
        }
    }

    // Refinement: along every tree morphism among the enumerated trees.
    let mut pairs: Vec<(Tree, Tree)> = Vec::new();
    for s in &trees {
        for t in &trees {
            if s != t && morphism(s, t).is_some() {
                pairs.push((s.clone(), t.clone()));
            }
        }
    }
    // The unary wrapper of the single leaf maps both ways.
    pairs.push((parse_tree("(*)").unwrap(), Tree::Leaf));
    pairs.push((Tree::Leaf, parse_tree("(*)").unwrap()));
    for (s, t) in &pairs {
        let subject = format!("r: {t} -> {s}");
        let outcome = (|| -> Result<bool, String> {
            let ft = alg.f_for_tree(t).map_err(|e| e.to_string())?;
            let image = refine(&ft, s).map_err(|e| e.to_string())?;
            let fs = alg.f_for_tree(s).map_err(|e| e.to_string())?;
            multimap_eq(&image, &fs).map_err(|e| e.to_string())
        })();
        report.record("refinement", subject, outcome);
    }

    // Commutativity: sibling transpositions at every internal vertex.
    for p in &trees {
        for (path, arity) in internal_vertices(p) {
            for j in 0..arity.saturating_sub(1) {
                let mut perm: Vec<usize> = (0..arity).collect();
                perm.swap(j, j + 1);
                let subject = format!("{p} swap {}..{} at {:?}", j, j + 1, path);
                let outcome = (|| -> Result<bool, String> {
                    let fp = alg.f_for_tree(p).map_err(|e| e.to_string())?;
                    let swapped = symmetry_action(&fp, &path, &perm).map_err(|e| e.to_string())?;
                    let expected = alg
                        .f_for_tree(swapped.tree().tree())
                        .map_err(|e| e.to_string())?;
                    multimap_eq(&swapped, &expected).map_err(|e| e.to_string())
                })();
                report.record("commutativity", subject, outcome);
            }
        }
    }

    report
}

/// All ways of writing `p = q o_slot r` with a proper inner factor.
fn splittings(p: &Tree) -> Vec<(Tree, usize, Tree)> {
    let mut out = Vec::new();
    for (path, _) in internal_vertices(p) {
        if path.is_empty() {
            continue;
        }
        let r = p.subtree(&path).unwrap().clone();
        let q = replace_with_leaf(p, &path);
        let slot = leaf_index_of_path(&q, &path);
        out.push((q, slot, r));
    }
    out
}

fn internal_vertices(p: &Tree) -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    fn walk(t: &Tree, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
        if let Tree::Node(children) = t {
            if !children.is_empty() {
                out.push((path.clone(), children.len()));
            }
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                walk(c, path, out);
                path.pop();
            }
        }
    }
    walk(p, &mut Vec::new(), &mut out);
    out
}

fn replace_with_leaf(p: &Tree, path: &[usize]) -> Tree {
    if path.is_empty() {
        return Tree::Leaf;
    }
    match p {
        Tree::Node(children) => {
            let mut children = children.clone();
            children[path[0]] = replace_with_leaf(&children[path[0]], &path[1..]);
            Tree::Node(children)
        }
        Tree::Leaf => panic!("bad path"),
    }
}

fn leaf_index_of_path(q: &Tree, path: &[usize]) -> usize {
    q.leaf_paths()
        .iter()
        .position(|p| p == path)
        .expect("replaced subtree is a leaf")
        + 1
}

/// Decomposes the binary generator's value by pole order at coincident
/// inputs: strips each diagonal pole and re-centers the coefficient on the
/// diagonal by substituting the first variable for the second.
pub fn ope_extract(
    alg: &AlgebraStructure,
    a: usize,
    b: usize,
) -> Result<Vec<(u32, SingularSeries)>, AlgebraError> {
    let series = alg.binary().series(&[a, b]);
    let vars = alg.binary().tree().leaf_vars().to_vec();
    let (pair, _) = PolePair::new(vars[0].clone(), vars[1].clone()).expect("two leaves");
    let mut buckets: BTreeMap<u32, SingularSeries> = BTreeMap::new();
    for (key, coeff) in series.terms() {
        let order = key.poles.get(&pair).copied().unwrap_or(0);
        let entry = buckets.entry(order).or_insert_with(|| {
            let mut s = SingularSeries::zero(alg.object.basis_space(), alg.window);
            s.declare_var(vars[1].clone());
            s
        });
        let mono: Vec<(Var, i64)> = key
            .monomial
            .iter()
            .map(|(v, &e)| {
                if *v == vars[0] {
                    (vars[1].clone(), e)
                } else {
                    (v.clone(), e)
                }
            })
            .collect();
        let poles: Vec<(Var, Var, u32)> = key
            .poles
            .iter()
            .filter(|(p, _)| **p != pair)
            .map(|(p, &k)| (p.lo().clone(), p.hi().clone(), k))
            .collect();
        entry
            .push_term(coeff.clone(), &poles, &mono, key.basis)
            .map_err(MultiError::from)?;
    }
    buckets.retain(|_, s| !s.is_zero());
    Ok(buckets.into_iter().collect())
}

/// Algebra document: basis names, multiplication table, derivation
/// matrices, unit vector and the binary series table.
pub fn algebra_to_json(alg: &AlgebraStructure) -> Value {
    let module = alg.object();
    let basis: Vec<String> = match alg.algebra() {
        Some(a) => a.basis_names().to_vec(),
        None => (0..module.rank()).map(|i| format!("e{i}")).collect(),
    };
    let mut doc = json!({
        "basis": basis,
        "derivations": (0..=module.max_degree())
            .map(|i| {
                json!(module
                    .action(i)
                    .unwrap()
                    .iter()
                    .map(|row| row.iter().map(format_rat).collect::<Vec<_>>())
                    .collect::<Vec<_>>())
            })
            .collect::<Vec<_>>(),
        "unit": alg
            .unit_map()
            .series(&[])
            .terms()
            .map(|(k, c)| json!({ "basis": k.basis, "coeff": format_rat(c) }))
            .collect::<Vec<_>>(),
        "f2": alg.binary().to_json(),
    });
    if let (Some(d), Some(c)) = (module.basis_degrees(), module.degree_cap()) {
        doc["degrees"] = json!(d);
        doc["degree_cap"] = json!(c);
    }
    if let Some(a) = alg.algebra() {
        let r = module.rank();
        let mul: Vec<Vec<Vec<String>>> = (0..r)
            .map(|x| {
                (0..r)
                    .map(|y| a.mul[x][y].iter().map(format_rat).collect())
                    .collect()
            })
            .collect();
        doc["mul"] = json!(mul);
    }
    doc
}

/// Reads an algebra document. When a `mul` table is present the holomorphic
/// generator is rebuilt from it; otherwise the `f2` series table is used
/// as-is.
pub fn algebra_from_json(
    value: &Value,
    window: SeriesWindow,
    inv_degree: u32,
) -> Result<AlgebraStructure, AlgebraError> {
    let doc = |m: &str| AlgebraError::Document(m.to_string());
    let basis: Vec<String> = value["basis"]
        .as_array()
        .ok_or_else(|| doc("basis"))?
        .iter()
        .map(|v| v.as_str().unwrap_or_default().to_string())
        .collect();
    let rank = basis.len();
    let derivations = value["derivations"]
        .as_array()
        .ok_or_else(|| doc("derivations"))?;
    let mut actions = Vec::new();
    for matrix in derivations {
        let mut rows = Vec::new();
        for row in matrix.as_array().ok_or_else(|| doc("derivation matrix"))? {
            let mut entries = Vec::new();
            for e in row.as_array().ok_or_else(|| doc("derivation row"))? {
                entries.push(
                    parse_rat(e.as_str().ok_or_else(|| doc("derivation entry"))?)
                        .ok_or_else(|| doc("derivation entry"))?,
                );
            }
            rows.push(entries);
        }
        actions.push(rows);
    }
    let mut module_raw = HModule::new("B", rank, actions)?;
    if let (Some(degrees), Some(cap)) = (value["degrees"].as_array(), value["degree_cap"].as_u64())
    {
        let d: Option<Vec<usize>> = degrees
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize))
            .collect();
        if let Some(d) = d {
            module_raw = module_raw.with_degrees(d, cap as usize);
        }
    }
    let module = Arc::new(module_raw);
    let mut unit = vec![Rat::zero(); rank];
    for entry in value["unit"].as_array().ok_or_else(|| doc("unit"))? {
        let idx = entry["basis"].as_u64().ok_or_else(|| doc("unit basis"))? as usize;
        let c = parse_rat(entry["coeff"].as_str().ok_or_else(|| doc("unit coeff"))?)
            .ok_or_else(|| doc("unit coeff"))?;
        unit[idx] = c;
    }
    if let Some(mul_doc) = value["mul"].as_array() {
        let mut mul = vec![vec![vec![Rat::zero(); rank]; rank]; rank];
        for (a, row) in mul_doc.iter().enumerate() {
            for (b, cell) in row
                .as_array()
                .ok_or_else(|| doc("mul row"))?
                .iter()
                .enumerate()
            {
                for (k, e) in cell
                    .as_array()
                    .ok_or_else(|| doc("mul cell"))?
                    .iter()
                    .enumerate()
                {
                    mul[a][b][k] = parse_rat(e.as_str().ok_or_else(|| doc("mul entry"))?)
                        .ok_or_else(|| doc("mul entry"))?;
                }
            }
        }
        let algebra = CommDiffAlgebra::new(module, mul, unit, basis)?;
        make_holomorphic_algebra(&algebra, window, inv_degree)
    } else {
        let binary = MultiMap::from_json(&value["f2"])?;
        make_custom_algebra(module, binary, unit, inv_degree)
    }
}

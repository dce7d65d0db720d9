//! Module-valued multivariate series with poles in variable differences.
//!
//! A series is a finite sum of terms
//! `coeff * prod (x_u - x_v)^(-k) * prod x_w^e * basis-vector`.
//! Pole pairs are kept symbolic and canonically ordered; expansion replaces
//! them by geometric series in a chosen variable order, truncated to the
//! window. Truncation is tracked per series as a sticky flag plus a
//! reliability region: per-variable exponent floors and a total-degree
//! ceiling inside which coefficients are provably unaffected by cutoff.
//! Equality checks only ever compare reliable coefficients.

use crate::hopf::HElem;
use crate::rational::{binomial, format_rat, generalized_binomial, neg_one_pow, parse_rat, Rat};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeriesError {
    #[error("variable {0} not present in the series")]
    UnknownVariable(String),
    #[error("expansion order must cover {missing}")]
    OrderIncomplete { missing: String },
    #[error("substitution collapses the pole ({0} - {1}) to zero")]
    PoleCollapse(String, String),
    #[error("substitution does not keep the pole ({0} - {1}) a pure difference")]
    ShiftedPole(String, String),
    #[error("cannot shift a negative power of {0}")]
    NegativeShift(String),
    #[error("pole order {order} exceeds the Laurent depth {depth}")]
    PoleDepth { order: u32, depth: u32 },
    #[error("basis index {index} out of range for rank {rank}")]
    BasisRange { index: usize, rank: usize },
    #[error("pole pair ({0} - {1}) not allowed by the dependency profile")]
    ProfileViolation(String, String),
    #[error("mismatched {0} between series")]
    Mismatch(&'static str),
    #[error("bad series document: {0}")]
    Document(String),
}

/// A dummy variable name tied to a tree edge or leaf. Ordered by length,
/// then text, so `x2 < x10`. Names are shared, so clones are cheap.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(std::sync::Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Var {
        Var(std::sync::Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0.len(), &self.0).cmp(&(other.0.len(), &other.0))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Var {
        Var::new(s)
    }
}

/// An unordered pole pair stored with `lo < hi`; the factor is
/// `(x_lo - x_hi)^(-k)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PolePair {
    lo: Var,
    hi: Var,
}

impl PolePair {
    /// Canonicalizes `(a - b)`; returns the pair and whether the sign flips.
    /// `None` when the two variables coincide.
    pub fn new(a: Var, b: Var) -> Option<(PolePair, bool)> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some((PolePair { lo: a, hi: b }, false)),
            std::cmp::Ordering::Greater => Some((PolePair { lo: b, hi: a }, true)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn lo(&self) -> &Var {
        &self.lo
    }

    pub fn hi(&self) -> &Var {
        &self.hi
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.lo == *v || self.hi == *v
    }

    pub fn other(&self, v: &Var) -> Option<&Var> {
        if self.lo == *v {
            Some(&self.hi)
        } else if self.hi == *v {
            Some(&self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for PolePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

/// A basis vector of a coefficient module, e.g. `B.e1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModuleBasisVector {
    pub module: String,
    pub index: usize,
}

impl fmt::Display for ModuleBasisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.e{}", self.module, self.index)
    }
}

impl ModuleBasisVector {
    pub fn parse(text: &str) -> Option<ModuleBasisVector> {
        let (module, idx) = text.rsplit_once(".e")?;
        Some(ModuleBasisVector {
            module: module.to_string(),
            index: idx.parse().ok()?,
        })
    }
}

/// Codomain descriptor: module identifier and rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpace {
    pub module: String,
    pub rank: usize,
}

impl BasisSpace {
    pub fn scalar() -> BasisSpace {
        BasisSpace {
            module: "R".into(),
            rank: 1,
        }
    }
}

/// Exponent window: per-variable floor and total-degree ceiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesWindow {
    pub floor: i64,
    pub ceil: i64,
}

impl SeriesWindow {
    pub fn new(laurent_depth: u32, total_ceiling: i64) -> SeriesWindow {
        SeriesWindow {
            floor: -(laurent_depth as i64),
            ceil: total_ceiling,
        }
    }

    pub fn depth(&self) -> u32 {
        (-self.floor).max(0) as u32
    }
}

impl Default for SeriesWindow {
    fn default() -> SeriesWindow {
        SeriesWindow { floor: -8, ceil: 12 }
    }
}

/// Monomial part of a term; zero exponents are never stored.
pub type Monomial = BTreeMap<Var, i64>;

fn monomial_total(m: &Monomial) -> i64 {
    m.values().sum()
}

/// Term shape: pole part, monomial, basis index into the codomain.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TermKey {
    pub poles: BTreeMap<PolePair, u32>,
    pub monomial: Monomial,
    pub basis: usize,
}

impl TermKey {
    pub fn monomial_only(pairs: &[(Var, i64)], basis: usize) -> TermKey {
        let mut monomial = Monomial::new();
        for (v, e) in pairs {
            if *e != 0 {
                monomial.insert(v.clone(), *e);
            }
        }
        TermKey {
            poles: BTreeMap::new(),
            monomial,
            basis,
        }
    }
}

/// Region of exponent space whose coefficients are exact: every variable at
/// or above its floor and total degree at or below the ceiling.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Reliability {
    floors: BTreeMap<Var, i64>,
    ceil: Option<i64>,
}

impl Reliability {
    pub fn exact() -> Reliability {
        Reliability::default()
    }

    fn lower(&mut self, v: &Var, floor: i64) {
        let entry = self.floors.entry(v.clone()).or_insert(floor);
        *entry = (*entry).max(floor);
    }

    fn cap(&mut self, ceil: i64) {
        self.ceil = Some(self.ceil.map_or(ceil, |c| c.min(ceil)));
    }

    fn join(&mut self, other: &Reliability) {
        for (v, f) in &other.floors {
            self.lower(v, *f);
        }
        if let Some(c) = other.ceil {
            self.cap(c);
        }
    }

    /// Widens for multiplication by a factor with the given per-variable
    /// maximal exponents and minimal total degree.
    fn shift_for_mul(&mut self, max_exps: &BTreeMap<Var, i64>, min_total: i64) {
        let floors = std::mem::take(&mut self.floors);
        for (v, f) in floors {
            let shift = max_exps.get(&v).copied().unwrap_or(0).max(0);
            self.floors.insert(v, f + shift);
        }
        if let Some(c) = self.ceil {
            self.ceil = Some(c + min_total.min(0));
        }
    }

    pub fn is_reliable(&self, m: &Monomial) -> bool {
        for (v, f) in &self.floors {
            if m.get(v).copied().unwrap_or(0) < *f {
                return false;
            }
        }
        match self.ceil {
            Some(c) => monomial_total(m) <= c,
            None => true,
        }
    }
}

/// A total order on variables, outermost (dominant) first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionOrder {
    vars: Vec<Var>,
}

impl ExpansionOrder {
    pub fn new(vars: Vec<Var>) -> ExpansionOrder {
        ExpansionOrder { vars }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn position(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|x| x == v)
    }

    /// The dominant variable of a pole pair under this order.
    pub fn dominant<'a>(&self, p: &'a PolePair) -> Option<&'a Var> {
        let a = self.position(p.lo())?;
        let b = self.position(p.hi())?;
        Some(if a < b { p.lo() } else { p.hi() })
    }

    pub fn covers(&self, vars: &BTreeSet<Var>) -> bool {
        vars.iter().all(|v| self.position(v).is_some())
    }
}

impl fmt::Display for ExpansionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.vars.iter().map(|v| v.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Replacement for one variable in a substitution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Replacement {
    /// `v -> w`.
    Rename(Var),
    /// `v -> w + z`.
    Shift(Var, Var),
}

impl Replacement {
    fn base(&self) -> &Var {
        match self {
            Replacement::Rename(w) | Replacement::Shift(w, _) => w,
        }
    }

    fn shift(&self) -> Option<&Var> {
        match self {
            Replacement::Rename(_) => None,
            Replacement::Shift(_, z) => Some(z),
        }
    }
}

/// The computational carrier for module-valued singular expressions.
/// Equality compares codomain, window, terms and the truncation flag;
/// declared-but-unused variables and reliability bookkeeping do not count.
#[derive(Clone, Debug)]
pub struct SingularSeries {
    vars: BTreeSet<Var>,
    codomain: BasisSpace,
    window: SeriesWindow,
    terms: BTreeMap<TermKey, Rat>,
    truncated: bool,
    reliability: Reliability,
    /// When present, the only pole pairs terms may carry.
    allowed_poles: Option<BTreeSet<PolePair>>,
}

impl PartialEq for SingularSeries {
    fn eq(&self, other: &Self) -> bool {
        self.codomain == other.codomain
            && self.window == other.window
            && self.terms == other.terms
            && self.truncated == other.truncated
    }
}

impl Eq for SingularSeries {}

impl SingularSeries {
    pub fn zero(codomain: BasisSpace, window: SeriesWindow) -> SingularSeries {
        SingularSeries {
            vars: BTreeSet::new(),
            codomain,
            window,
            terms: BTreeMap::new(),
            truncated: false,
            reliability: Reliability::exact(),
            allowed_poles: None,
        }
    }

    pub fn scalar_zero(window: SeriesWindow) -> SingularSeries {
        SingularSeries::zero(BasisSpace::scalar(), window)
    }

    /// A constant basis vector.
    pub fn constant(
        codomain: BasisSpace,
        window: SeriesWindow,
        basis: usize,
        coeff: Rat,
    ) -> Result<SingularSeries, SeriesError> {
        let mut s = SingularSeries::zero(codomain, window);
        s.push_term(coeff, &[], &[], basis)?;
        Ok(s)
    }

    pub fn declare_var(&mut self, v: Var) {
        self.vars.insert(v);
    }

    pub fn restrict_poles(&mut self, allowed: BTreeSet<PolePair>) -> Result<(), SeriesError> {
        for key in self.terms.keys() {
            for pair in key.poles.keys() {
                if !allowed.contains(pair) {
                    return Err(SeriesError::ProfileViolation(
                        pair.lo().name().into(),
                        pair.hi().name().into(),
                    ));
                }
            }
        }
        self.allowed_poles = Some(allowed);
        Ok(())
    }

    /// Adds `coeff * prod (a - b)^(-k) * prod v^e * e_basis`, canonicalizing
    /// pole signs. Out-of-window monomials are dropped and flagged.
    pub fn push_term(
        &mut self,
        coeff: Rat,
        poles: &[(Var, Var, u32)],
        monomial: &[(Var, i64)],
        basis: usize,
    ) -> Result<(), SeriesError> {
        if basis >= self.codomain.rank {
            return Err(SeriesError::BasisRange {
                index: basis,
                rank: self.codomain.rank,
            });
        }
        let mut c = coeff;
        let mut pole_map: BTreeMap<PolePair, u32> = BTreeMap::new();
        for (a, b, k) in poles {
            if *k == 0 {
                continue;
            }
            let (pair, flipped) = PolePair::new(a.clone(), b.clone())
                .ok_or_else(|| SeriesError::PoleCollapse(a.name().into(), b.name().into()))?;
            if flipped {
                c *= neg_one_pow(*k);
            }
            if let Some(allowed) = &self.allowed_poles {
                if !allowed.contains(&pair) {
                    return Err(SeriesError::ProfileViolation(
                        pair.lo().name().into(),
                        pair.hi().name().into(),
                    ));
                }
            }
            let depth = self.window.depth();
            let entry = pole_map.entry(pair).or_insert(0);
            *entry += *k;
            if *entry > depth {
                return Err(SeriesError::PoleDepth {
                    order: *entry,
                    depth,
                });
            }
        }
        let mut mono: Monomial = BTreeMap::new();
        for (v, e) in monomial {
            *mono.entry(v.clone()).or_insert(0) += e;
        }
        mono.retain(|_, e| *e != 0);
        for (v, _) in monomial {
            self.vars.insert(v.clone());
        }
        for pair in pole_map.keys() {
            self.vars.insert(pair.lo().clone());
            self.vars.insert(pair.hi().clone());
        }
        self.insert(
            TermKey {
                poles: pole_map,
                monomial: mono,
                basis,
            },
            c,
        );
        Ok(())
    }

    fn insert(&mut self, key: TermKey, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        // Window enforcement applies to the monomial part; pole orders are
        // bounded separately at construction.
        let below = key
            .monomial
            .iter()
            .find(|(_, &e)| e < self.window.floor)
            .map(|(v, _)| v.clone());
        if let Some(v) = below {
            self.truncated = true;
            self.reliability.lower(&v, self.window.floor);
            return;
        }
        let total = monomial_total(&key.monomial)
            - key.poles.values().map(|&k| k as i64).sum::<i64>();
        if total > self.window.ceil {
            self.truncated = true;
            self.reliability.cap(self.window.ceil);
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn vars(&self) -> &BTreeSet<Var> {
        &self.vars
    }

    pub fn codomain(&self) -> &BasisSpace {
        &self.codomain
    }

    pub fn window(&self) -> SeriesWindow {
        self.window
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_poles(&self) -> bool {
        self.terms.keys().any(|k| !k.poles.is_empty())
    }

    pub fn pole_pairs(&self) -> BTreeSet<PolePair> {
        self.terms
            .keys()
            .flat_map(|k| k.poles.keys().cloned())
            .collect()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Rat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &TermKey) -> Rat {
        self.terms.get(key).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn reliability(&self) -> &Reliability {
        &self.reliability
    }

    /// True when the variable occurs in no monomial and no pole.
    pub fn is_free_of(&self, v: &Var) -> bool {
        self.terms
            .keys()
            .all(|k| !k.monomial.contains_key(v) && k.poles.keys().all(|p| !p.contains(v)))
    }

    pub fn add(&self, other: &SingularSeries) -> Result<SingularSeries, SeriesError> {
        if self.window != other.window {
            return Err(SeriesError::Mismatch("window"));
        }
        if self.codomain != other.codomain {
            return Err(SeriesError::Mismatch("codomain"));
        }
        let mut out = self.clone();
        out.allowed_poles = None;
        out.vars.extend(other.vars.iter().cloned());
        out.truncated |= other.truncated;
        out.reliability.join(&other.reliability);
        for (k, c) in other.terms() {
            out.insert(k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> SingularSeries {
        self.scale(&-Rat::from_integer(1.into()))
    }

    pub fn sub(&self, other: &SingularSeries) -> Result<SingularSeries, SeriesError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> SingularSeries {
        let mut out = self.clone();
        if c.is_zero() {
            out.terms.clear();
            return out;
        }
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out
    }

    fn max_exponents(&self) -> BTreeMap<Var, i64> {
        let mut out = BTreeMap::new();
        for key in self.terms.keys() {
            for (v, &e) in &key.monomial {
                let entry = out.entry(v.clone()).or_insert(e);
                *entry = (*entry).max(e);
            }
        }
        out
    }

    fn min_total_degree(&self) -> i64 {
        self.terms
            .keys()
            .map(|k| monomial_total(&k.monomial) - k.poles.values().map(|&x| x as i64).sum::<i64>())
            .min()
            .unwrap_or(0)
    }

    /// Product with a scalar-valued series. Pole orders add; the result is
    /// exact whenever both inputs are exact.
    pub fn mul(&self, scalar: &SingularSeries) -> Result<SingularSeries, SeriesError> {
        if scalar.codomain.rank != 1 {
            return Err(SeriesError::Mismatch("scalar factor"));
        }
        if self.window != scalar.window {
            return Err(SeriesError::Mismatch("window"));
        }
        let mut out = SingularSeries::zero(self.codomain.clone(), self.window);
        out.vars = self.vars.union(&scalar.vars).cloned().collect();
        out.truncated = self.truncated || scalar.truncated;
        let mut rel = Reliability::exact();
        if self.truncated && scalar.truncated {
            // Products of two unknown tails can land anywhere; nothing in
            // the result is certified.
            rel.cap(i64::MIN / 2);
        } else if self.truncated {
            let mut r = self.reliability.clone();
            r.shift_for_mul(&scalar.max_exponents(), scalar.min_total_degree());
            rel.join(&r);
        } else if scalar.truncated {
            let mut r = scalar.reliability.clone();
            r.shift_for_mul(&self.max_exponents(), self.min_total_degree());
            rel.join(&r);
        }
        for (ka, ca) in self.terms() {
            for (kb, cb) in scalar.terms() {
                let mut poles = ka.poles.clone();
                for (p, k) in &kb.poles {
                    let entry = poles.entry(p.clone()).or_insert(0);
                    *entry += k;
                    if *entry > self.window.depth() {
                        return Err(SeriesError::PoleDepth {
                            order: *entry,
                            depth: self.window.depth(),
                        });
                    }
                }
                let mut mono = ka.monomial.clone();
                for (v, e) in &kb.monomial {
                    *mono.entry(v.clone()).or_insert(0) += e;
                }
                mono.retain(|_, e| *e != 0);
                out.insert(
                    TermKey {
                        poles,
                        monomial: mono,
                        basis: ka.basis,
                    },
                    ca * cb,
                );
            }
        }
        out.reliability.join(&rel);
        Ok(out)
    }

    /// The scalar polynomial `(a - b)`.
    pub fn difference(window: SeriesWindow, a: &Var, b: &Var) -> SingularSeries {
        let mut s = SingularSeries::scalar_zero(window);
        s.push_term(Rat::from_integer(1.into()), &[], &[(a.clone(), 1)], 0)
            .unwrap();
        s.push_term(-Rat::from_integer(1.into()), &[], &[(b.clone(), 1)], 0)
            .unwrap();
        s
    }

    /// The scalar symbolic pole `(a - b)^(-k)`.
    pub fn pole(
        window: SeriesWindow,
        a: &Var,
        b: &Var,
        k: u32,
    ) -> Result<SingularSeries, SeriesError> {
        let mut s = SingularSeries::scalar_zero(window);
        s.push_term(
            Rat::from_integer(1.into()),
            &[(a.clone(), b.clone(), k)],
            &[],
            0,
        )?;
        Ok(s)
    }
}

impl fmt::Display for SingularSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "0")?;
        } else {
            let mut first = true;
            for (key, coeff) in self.terms() {
                let cs = format_rat(coeff);
                let (sign, mag) = match cs.strip_prefix('-') {
                    Some(tail) => ("-", tail.to_string()),
                    None => ("+", cs),
                };
                if first {
                    first = false;
                    if sign == "-" {
                        write!(f, "-")?;
                    }
                } else {
                    write!(f, " {sign} ")?;
                }
                let mut factors = Vec::new();
                if mag != "1" || (key.monomial.is_empty() && key.poles.is_empty()) {
                    factors.push(mag.clone());
                }
                for (v, e) in &key.monomial {
                    if *e == 1 {
                        factors.push(v.name().to_string());
                    } else {
                        factors.push(format!("{v}^{e}"));
                    }
                }
                for (p, k) in &key.poles {
                    factors.push(format!("({}-{})^-{k}", p.lo(), p.hi()));
                }
                if self.codomain.rank > 1 || self.codomain.module != "R" {
                    factors.push(format!("{}.e{}", self.codomain.module, key.basis));
                }
                write!(f, "{}", factors.join("*"))?;
            }
        }
        if self.truncated {
            write!(f, " [truncated]")?;
        }
        Ok(())
    }
}

/// Expands every pole by its geometric series in the region where the
/// order-earlier variable dominates. The result is pole-free; coefficients
/// below the window floor are dropped and the reliability region shrinks to
/// the window.
pub fn expand(s: &SingularSeries, ord: &ExpansionOrder) -> Result<SingularSeries, SeriesError> {
    if !ord.covers(&s.vars) {
        let missing = s
            .vars
            .iter()
            .find(|v| ord.position(v).is_none())
            .map(|v| v.name().to_string())
            .unwrap_or_default();
        return Err(SeriesError::OrderIncomplete { missing });
    }
    if !s.has_poles() {
        return Ok(s.clone());
    }
    let mut out = SingularSeries::zero(s.codomain.clone(), s.window);
    out.vars = s.vars.clone();
    out.truncated = s.truncated;
    out.reliability = s.reliability.clone();
    for (key, coeff) in s.terms() {
        if key.poles.is_empty() {
            out.insert(key.clone(), coeff.clone());
            continue;
        }
        // Order poles so that raises of a variable (as a subordinate) land
        // before its lowering (as a dominant).
        let mut poles: Vec<(&PolePair, u32)> = key.poles.iter().map(|(p, &k)| (p, k)).collect();
        poles.sort_by_key(|(p, _)| ord.position(ord.dominant(p).unwrap()).unwrap());
        let mut partial: Vec<(Monomial, Rat)> = vec![(key.monomial.clone(), coeff.clone())];
        for (pair, k) in poles {
            let dom = ord.dominant(pair).unwrap().clone();
            let sub = pair.other(&dom).unwrap().clone();
            let sign = if dom == *pair.lo() {
                Rat::from_integer(1.into())
            } else {
                neg_one_pow(k)
            };
            out.truncated = true;
            out.reliability.lower(&dom, s.window.floor);
            let mut next = Vec::new();
            for (mono, c) in &partial {
                let e_dom = mono.get(&dom).copied().unwrap_or(0);
                // Keep n while e_dom - k - n >= floor; the tail is dropped.
                let cap = e_dom - k as i64 - s.window.floor;
                for n in 0..=cap.max(-1) {
                    let cexp = binomial((k as i64 + n - 1) as u64, n as u64);
                    let mut m = mono.clone();
                    *m.entry(dom.clone()).or_insert(0) -= k as i64 + n;
                    *m.entry(sub.clone()).or_insert(0) += n;
                    m.retain(|_, e| *e != 0);
                    next.push((m, c * &sign * cexp));
                }
            }
            partial = next;
        }
        for (mono, c) in partial {
            out.insert(
                TermKey {
                    poles: BTreeMap::new(),
                    monomial: mono,
                    basis: key.basis,
                },
                c,
            );
        }
    }
    Ok(out)
}

/// True when the two series have equal coefficients at every monomial that
/// is reliable on both sides, for every given order. Pole parts expand
/// first; the comparison itself is pole-free.
pub fn agree_after_expansion(
    s1: &SingularSeries,
    s2: &SingularSeries,
    orders: &[ExpansionOrder],
) -> Result<bool, SeriesError> {
    if s1.codomain != s2.codomain {
        return Err(SeriesError::Mismatch("codomain"));
    }
    if s1.window != s2.window {
        return Err(SeriesError::Mismatch("window"));
    }
    for ord in orders {
        let e1 = expand(s1, ord)?;
        let e2 = expand(s2, ord)?;
        if !expanded_equal_reliable(&e1, &e2) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Reliable-window equality of two pole-free series.
pub fn expanded_equal_reliable(e1: &SingularSeries, e2: &SingularSeries) -> bool {
    let keys: BTreeSet<&TermKey> = e1.terms.keys().chain(e2.terms.keys()).collect();
    for key in keys {
        if !e1.reliability.is_reliable(&key.monomial) || !e2.reliability.is_reliable(&key.monomial)
        {
            continue;
        }
        if e1.coeff(key) != e2.coeff(key) {
            return false;
        }
    }
    true
}

/// Semantic equality on the mutual reliable window: every term key whose
/// monomial part both sides certify must carry equal coefficients. Exact
/// series compare everywhere.
pub fn equal_reliable(a: &SingularSeries, b: &SingularSeries) -> bool {
    if a.codomain != b.codomain {
        return false;
    }
    let keys: BTreeSet<&TermKey> = a.terms.keys().chain(b.terms.keys()).collect();
    for key in keys {
        if !a.reliability.is_reliable(&key.monomial)
            || !b.reliability.is_reliable(&key.monomial)
        {
            continue;
        }
        if a.coeff(key) != b.coeff(key) {
            return false;
        }
    }
    true
}

/// The divided power `D(i)` in the variable `v`, applied termwise with the
/// Leibniz rule across the monomial and every pole containing `v`.
pub fn hasse_derivative(
    s: &SingularSeries,
    v: &Var,
    degree: u32,
) -> Result<SingularSeries, SeriesError> {
    let mut out = SingularSeries::zero(s.codomain.clone(), s.window);
    out.vars = s.vars.clone();
    out.truncated = s.truncated;
    out.reliability = s.reliability.clone();
    let depth = s.window.depth();
    for (key, coeff) in s.terms() {
        // Factors that depend on v: the monomial power and each pole
        // containing v. Distribute the degree over them.
        let v_poles: Vec<(&PolePair, u32)> = key
            .poles
            .iter()
            .filter(|(p, _)| p.contains(v))
            .map(|(p, &k)| (p, k))
            .collect();
        let e = key.monomial.get(v).copied().unwrap_or(0);
        let slots = 1 + v_poles.len();
        let mut split = vec![0u32; slots];
        distribute(degree, 0, &mut split, &mut |split| {
            let mut c = coeff.clone();
            let mut mono = key.monomial.clone();
            let mut poles = key.poles.clone();
            let d0 = split[0];
            if d0 > 0 {
                c *= generalized_binomial(e, d0);
                if c.is_zero() {
                    return Ok(());
                }
                let entry = mono.entry(v.clone()).or_insert(0);
                *entry -= d0 as i64;
                if *entry == 0 {
                    mono.remove(v);
                }
            }
            for (slot, (pair, k)) in v_poles.iter().enumerate() {
                let d = split[slot + 1];
                if d == 0 {
                    continue;
                }
                c *= generalized_binomial(-(*k as i64), d);
                if *v == *pair.hi() {
                    c *= neg_one_pow(d);
                }
                if c.is_zero() {
                    return Ok(());
                }
                let entry = poles.get_mut(pair).expect("pole present");
                *entry += d;
                if *entry > depth {
                    return Err(SeriesError::PoleDepth {
                        order: *entry,
                        depth,
                    });
                }
            }
            out.insert(
                TermKey {
                    poles,
                    monomial: mono,
                    basis: key.basis,
                },
                c,
            );
            Ok(())
        })?;
    }
    Ok(out)
}

fn distribute(
    rest: u32,
    slot: usize,
    split: &mut Vec<u32>,
    f: &mut impl FnMut(&[u32]) -> Result<(), SeriesError>,
) -> Result<(), SeriesError> {
    if slot + 1 == split.len() {
        split[slot] = rest;
        f(split)?;
        split[slot] = 0;
        return Ok(());
    }
    for d in 0..=rest {
        split[slot] = d;
        distribute(rest - d, slot + 1, split, f)?;
    }
    split[slot] = 0;
    Ok(())
}

/// Applies an `H`-element in one variable: a linear combination of Hasse
/// derivatives.
pub fn act_variable(
    h: &HElem,
    v: &Var,
    s: &SingularSeries,
) -> Result<SingularSeries, SeriesError> {
    if !s.vars.contains(v) {
        return Err(SeriesError::UnknownVariable(v.name().into()));
    }
    let mut out = SingularSeries::zero(s.codomain.clone(), s.window);
    out.vars = s.vars.clone();
    for (i, c) in h.terms() {
        out = out.add(&hasse_derivative(s, v, i)?.scale(c))?;
    }
    Ok(out)
}

/// The degree-`d` divided power distributed jointly across a set of
/// variables: the coefficient of `t^d` after shifting every variable in
/// `parts` by a common `t`. Works termwise, distributing the degree only
/// over factors that actually involve a part variable.
pub fn joint_hasse(
    s: &SingularSeries,
    parts: &BTreeSet<Var>,
    degree: u32,
) -> Result<SingularSeries, SeriesError> {
    let mut out = SingularSeries::zero(s.codomain.clone(), s.window);
    out.vars = s.vars.clone();
    out.truncated = s.truncated;
    out.reliability = s.reliability.clone();
    if degree == 0 {
        for (k, c) in s.terms() {
            out.insert(k.clone(), c.clone());
        }
        return Ok(out);
    }
    let depth = s.window.depth();
    for (key, coeff) in s.terms() {
        // Slots that can absorb derivative degree: monomial powers of part
        // variables and poles touching them (counted once per end).
        enum Slot<'a> {
            Mono(&'a Var, i64),
            // The flag marks differentiation at the subtracted end.
            Pole(&'a PolePair, bool),
        }
        let mut slots: Vec<Slot> = Vec::new();
        for v in parts {
            if let Some(&e) = key.monomial.get(v) {
                slots.push(Slot::Mono(v, e));
            }
        }
        for pair in key.poles.keys() {
            // A pole between two part variables contributes through both
            // ends; the contributions cancel only in the total.
            if parts.contains(pair.lo()) {
                slots.push(Slot::Pole(pair, false));
            }
            if parts.contains(pair.hi()) {
                slots.push(Slot::Pole(pair, true));
            }
        }
        if slots.is_empty() {
            continue;
        }
        let mut split = vec![0u32; slots.len()];
        distribute(degree, 0, &mut split, &mut |split| {
            let mut c = coeff.clone();
            let mut mono = key.monomial.clone();
            let mut poles = key.poles.clone();
            for (slot, d) in slots.iter().zip(split.iter()) {
                let d = *d;
                if d == 0 {
                    continue;
                }
                match slot {
                    Slot::Mono(v, e) => {
                        c *= generalized_binomial(*e, d);
                        if c.is_zero() {
                            return Ok(());
                        }
                        let entry = mono.entry((*v).clone()).or_insert(0);
                        *entry -= d as i64;
                        if *entry == 0 {
                            mono.remove(*v);
                        }
                    }
                    Slot::Pole(pair, is_hi) => {
                        // Use the current order: the other end of this pole
                        // may already have been differentiated.
                        let entry = poles.get_mut(*pair).expect("pole present");
                        c *= generalized_binomial(-(*entry as i64), d);
                        if *is_hi {
                            c *= neg_one_pow(d);
                        }
                        if c.is_zero() {
                            return Ok(());
                        }
                        *entry += d;
                        if *entry > depth {
                            return Err(SeriesError::PoleDepth {
                                order: *entry,
                                depth,
                            });
                        }
                    }
                }
            }
            out.insert(
                TermKey {
                    poles,
                    monomial: mono,
                    basis: key.basis,
                },
                c,
            );
            Ok(())
        })?;
    }
    Ok(out)
}

/// Checks the derivation sum rule: for every degree up to the bound, the
/// joint divided power across `parts` equals the one in `whole`.
pub fn check_sum_rule(
    s: &SingularSeries,
    parts: &BTreeSet<Var>,
    whole: &Var,
    degree_bound: u32,
) -> Result<bool, SeriesError> {
    for v in parts {
        if !s.vars.contains(v) {
            return Err(SeriesError::UnknownVariable(v.name().into()));
        }
    }
    if !s.vars.contains(whole) {
        return Err(SeriesError::UnknownVariable(whole.name().into()));
    }
    let whole_set = BTreeSet::from([whole.clone()]);
    for d in 1..=degree_bound {
        let lhs = joint_hasse(s, parts, d)?;
        let rhs = joint_hasse(s, &whole_set, d)?;
        if !equal_reliable(&lhs, &rhs) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Simultaneous formal substitution. Monomials re-expand binomially; a pole
/// pair must stay a pure difference of variables, anything else is an error.
pub fn substitute_map(
    s: &SingularSeries,
    map: &BTreeMap<Var, Replacement>,
) -> Result<SingularSeries, SeriesError> {
    for v in map.keys() {
        if !s.vars.contains(v) {
            return Err(SeriesError::UnknownVariable(v.name().into()));
        }
    }
    let mut out = SingularSeries::zero(s.codomain.clone(), s.window);
    for v in &s.vars {
        match map.get(v) {
            Some(r) => {
                out.vars.insert(r.base().clone());
                if let Some(z) = r.shift() {
                    out.vars.insert(z.clone());
                }
            }
            None => {
                out.vars.insert(v.clone());
            }
        }
    }
    out.truncated = s.truncated;
    // Truncation floors follow the base variable of each replacement.
    let mut rel = Reliability::exact();
    for (v, f) in &s.reliability.floors {
        match map.get(v) {
            Some(r) => rel.lower(r.base(), *f),
            None => rel.lower(v, *f),
        }
    }
    rel.ceil = s.reliability.ceil;
    out.reliability = rel;

    for (key, coeff) in s.terms() {
        // Poles first: the image must be a pure difference.
        let mut c = coeff.clone();
        let mut poles: BTreeMap<PolePair, u32> = BTreeMap::new();
        for (pair, &k) in &key.poles {
            let ra = map
                .get(pair.lo())
                .cloned()
                .unwrap_or(Replacement::Rename(pair.lo().clone()));
            let rb = map
                .get(pair.hi())
                .cloned()
                .unwrap_or(Replacement::Rename(pair.hi().clone()));
            let (na, nb) = match (ra.shift(), rb.shift()) {
                (None, None) => (ra.base().clone(), rb.base().clone()),
                (Some(za), Some(zb)) => {
                    if ra.base() == rb.base() {
                        // (w + za) - (w + zb) = za - zb.
                        (za.clone(), zb.clone())
                    } else if za == zb {
                        (ra.base().clone(), rb.base().clone())
                    } else {
                        return Err(SeriesError::ShiftedPole(
                            pair.lo().name().into(),
                            pair.hi().name().into(),
                        ));
                    }
                }
                _ => {
                    return Err(SeriesError::ShiftedPole(
                        pair.lo().name().into(),
                        pair.hi().name().into(),
                    ));
                }
            };
            match PolePair::new(na.clone(), nb.clone()) {
                Some((p, flipped)) => {
                    if flipped {
                        c *= neg_one_pow(k);
                    }
                    let entry = poles.entry(p).or_insert(0);
                    *entry += k;
                    if *entry > s.window.depth() {
                        return Err(SeriesError::PoleDepth {
                            order: *entry,
                            depth: s.window.depth(),
                        });
                    }
                }
                None => {
                    return Err(SeriesError::PoleCollapse(
                        na.name().into(),
                        nb.name().into(),
                    ));
                }
            }
        }
        for p in poles.keys() {
            out.vars.insert(p.lo().clone());
            out.vars.insert(p.hi().clone());
        }
        // Monomial: expand each replaced power binomially.
        let mut expansion: Vec<(Monomial, Rat)> = vec![(BTreeMap::new(), c)];
        for (v, &e) in &key.monomial {
            match map.get(v) {
                None | Some(Replacement::Rename(_)) => {
                    let name = match map.get(v) {
                        Some(Replacement::Rename(nm)) => nm.clone(),
                        _ => v.clone(),
                    };
                    for (m, _) in expansion.iter_mut() {
                        *m.entry(name.clone()).or_insert(0) += e;
                    }
                }
                Some(Replacement::Shift(base, z)) => {
                    if e < 0 {
                        return Err(SeriesError::NegativeShift(v.name().into()));
                    }
                    let mut next = Vec::new();
                    for (m, cc) in &expansion {
                        for i in 0..=e {
                            let mut m2 = m.clone();
                            *m2.entry(base.clone()).or_insert(0) += i;
                            *m2.entry(z.clone()).or_insert(0) += e - i;
                            next.push((m2, cc * binomial(e as u64, i as u64)));
                        }
                    }
                    expansion = next;
                }
            }
        }
        for (mut m, cc) in expansion {
            m.retain(|_, e| *e != 0);
            out.insert(
                TermKey {
                    poles: poles.clone(),
                    monomial: m,
                    basis: key.basis,
                },
                cc,
            );
        }
    }
    Ok(out)
}

/// Single-variable substitution, the public face of [`substitute_map`].
pub fn substitute(
    s: &SingularSeries,
    v: &Var,
    replacement: Replacement,
) -> Result<SingularSeries, SeriesError> {
    let mut map = BTreeMap::new();
    map.insert(v.clone(), replacement);
    substitute_map(s, &map)
}

/// Exchanges two variables, renormalizing pole signs.
pub fn swap_variables(
    s: &SingularSeries,
    u: &Var,
    v: &Var,
) -> Result<SingularSeries, SeriesError> {
    if !s.vars.contains(u) {
        return Err(SeriesError::UnknownVariable(u.name().into()));
    }
    if !s.vars.contains(v) {
        return Err(SeriesError::UnknownVariable(v.name().into()));
    }
    if u == v {
        return Ok(s.clone());
    }
    let tmp = Var::new(format!("__swap_{}_{}", u.name(), v.name()));
    let mut m1 = BTreeMap::new();
    m1.insert(u.clone(), Replacement::Rename(tmp.clone()));
    m1.insert(v.clone(), Replacement::Rename(u.clone()));
    let s1 = substitute_map(s, &m1)?;
    let mut m2 = BTreeMap::new();
    m2.insert(tmp.clone(), Replacement::Rename(v.clone()));
    let mut out = substitute_map(&s1, &m2)?;
    out.vars.remove(&tmp);
    Ok(out)
}

impl SingularSeries {
    /// JSON document form; terms use the serialized term format.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms()
            .map(|(key, coeff)| {
                let mono: serde_json::Map<String, Value> = key
                    .monomial
                    .iter()
                    .map(|(v, e)| (v.name().to_string(), json!(e)))
                    .collect();
                let poles: serde_json::Map<String, Value> = key
                    .poles
                    .iter()
                    .map(|(p, k)| (p.to_string(), json!(k)))
                    .collect();
                json!({
                    "coeff": format_rat(coeff),
                    "basis": ModuleBasisVector {
                        module: self.codomain.module.clone(),
                        index: key.basis,
                    }
                    .to_string(),
                    "monomial": mono,
                    "poles": poles,
                })
            })
            .collect();
        json!({
            "module": self.codomain.module,
            "rank": self.codomain.rank,
            "window": { "floor": self.window.floor, "ceil": self.window.ceil },
            "vars": self.vars.iter().map(|v| v.name()).collect::<Vec<_>>(),
            "truncated": self.truncated,
            "terms": terms,
        })
    }

    pub fn from_json(value: &Value) -> Result<SingularSeries, SeriesError> {
        let doc = |msg: &str| SeriesError::Document(msg.to_string());
        let module = value["module"].as_str().ok_or_else(|| doc("module"))?;
        let rank = value["rank"].as_u64().ok_or_else(|| doc("rank"))? as usize;
        let floor = value["window"]["floor"]
            .as_i64()
            .ok_or_else(|| doc("window.floor"))?;
        let ceil = value["window"]["ceil"]
            .as_i64()
            .ok_or_else(|| doc("window.ceil"))?;
        let mut out = SingularSeries::zero(
            BasisSpace {
                module: module.to_string(),
                rank,
            },
            SeriesWindow { floor, ceil },
        );
        if let Some(vars) = value["vars"].as_array() {
            for v in vars {
                out.declare_var(Var::new(v.as_str().ok_or_else(|| doc("vars"))?));
            }
        }
        for term in value["terms"].as_array().ok_or_else(|| doc("terms"))? {
            let coeff = parse_rat(term["coeff"].as_str().ok_or_else(|| doc("coeff"))?)
                .ok_or_else(|| doc("coeff"))?;
            let basis =
                ModuleBasisVector::parse(term["basis"].as_str().ok_or_else(|| doc("basis"))?)
                    .ok_or_else(|| doc("basis"))?;
            let mut mono = Vec::new();
            if let Some(m) = term["monomial"].as_object() {
                for (k, v) in m {
                    mono.push((
                        Var::new(k.as_str()),
                        v.as_i64().ok_or_else(|| doc("exponent"))?,
                    ));
                }
            }
            let mut poles = Vec::new();
            if let Some(p) = term["poles"].as_object() {
                for (k, v) in p {
                    let (a, b) = k.split_once('-').ok_or_else(|| doc("pole key"))?;
                    poles.push((
                        Var::new(a),
                        Var::new(b),
                        v.as_u64().ok_or_else(|| doc("pole order"))? as u32,
                    ));
                }
            }
            out.push_term(coeff, &poles, &mono, basis.index)?;
        }
        if value["truncated"].as_bool() == Some(true) {
            // The document does not carry the reliability region; assume
            // the most conservative one consistent with the drop rule.
            out.truncated = true;
            let vars: Vec<Var> = out.vars.iter().cloned().collect();
            for v in vars {
                out.reliability.lower(&v, out.window.floor);
            }
            out.reliability.cap(out.window.ceil);
        }
        Ok(out)
    }
}

impl Serialize for SingularSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SingularSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        SingularSeries::from_json(&value).map_err(serde::de::Error::custom)
    }
}

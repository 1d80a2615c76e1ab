//! Closure sets, maximal consistent sets and their cluster structure.
//!
//! An MCS is stored as a bit mask over the *base* formulas of the closure
//! (the subformulas that are not negations): bit `i` set means `base[i]`
//! holds, clear means its negation holds. Consistency is satisfiability in
//! the minimal tense logic K_t, i.e. at a point of an arbitrary frame with
//! `F` looking along the relation and `P` against it.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::OnceLock;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;

/// Bit set over base formula indices.
pub type Bits = u128;

/// Largest supported number of base formulas.
pub const MAX_BASE: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum McsError {
    #[error("closure has {0} base formulas; at most {MAX_BASE} are supported")]
    ClosureTooLarge(usize),
    #[error("K_t tableau exceeded its budget of {0} nodes")]
    TableauBudget(usize),
    #[error("candidate space of 2^{0} assignments is too large to enumerate")]
    TooManyCandidates(usize),
}

/// A formula of the closure: base formula `idx`, or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Lit {
    pub idx: usize,
    pub positive: bool,
}

impl Lit {
    pub fn pos(idx: usize) -> Self {
        Lit {
            idx,
            positive: true,
        }
    }

    pub fn neg(self) -> Self {
        Lit {
            idx: self.idx,
            positive: !self.positive,
        }
    }

    /// Position in the closure listing: `2*idx` for the formula, `2*idx+1`
    /// for its negation.
    pub fn closure_index(self) -> usize {
        2 * self.idx + usize::from(!self.positive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Atom,
    Or(Lit, Lit),
    And(Lit, Lit),
    Implies(Lit, Lit),
    F(Lit),
    P(Lit),
}

/// The closure `Cl(phi)`: every subformula with its negation, `~~` collapsed.
#[derive(Debug, Clone)]
pub struct ClosureSet {
    base: Vec<Formula>,
    nodes: Vec<Node>,
    index: HashMap<Formula, usize>,
    root: Lit,
    f_indices: Vec<usize>,
    p_indices: Vec<usize>,
    free_indices: Vec<usize>,
}

impl ClosureSet {
    pub fn new(phi: &Formula) -> Result<Self, McsError> {
        let mut uniq: BTreeSet<Formula> = BTreeSet::new();
        for sub in phi.subformulas() {
            match sub {
                Formula::Not(inner) => {
                    uniq.insert((**inner).clone());
                }
                other => {
                    uniq.insert(other.clone());
                }
            }
        }
        if uniq.len() > MAX_BASE {
            return Err(McsError::ClosureTooLarge(uniq.len()));
        }
        // BTreeSet iteration follows the structural order, which lists
        // children before parents.
        let base: Vec<Formula> = uniq.into_iter().collect();
        let index: HashMap<Formula, usize> =
            base.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        let lit_of = |f: &Formula| -> Lit {
            match f {
                Formula::Not(inner) => Lit {
                    idx: index[&**inner],
                    positive: false,
                },
                other => Lit::pos(index[other]),
            }
        };
        let nodes: Vec<Node> = base
            .iter()
            .map(|f| match f {
                Formula::Atom(_) => Node::Atom,
                Formula::Or(a, b) => Node::Or(lit_of(a), lit_of(b)),
                Formula::And(a, b) => Node::And(lit_of(a), lit_of(b)),
                Formula::Implies(a, b) => Node::Implies(lit_of(a), lit_of(b)),
                Formula::F(a) => Node::F(lit_of(a)),
                Formula::P(a) => Node::P(lit_of(a)),
                Formula::Not(_) => unreachable!("negations are not base formulas"),
            })
            .collect();
        let root = lit_of(phi);
        let pick = |pred: fn(&Node) -> bool| -> Vec<usize> {
            nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| pred(n))
                .map(|(i, _)| i)
                .collect()
        };
        let f_indices = pick(|n| matches!(n, Node::F(_)));
        let p_indices = pick(|n| matches!(n, Node::P(_)));
        let free_indices = pick(|n| matches!(n, Node::Atom | Node::F(_) | Node::P(_)));
        Ok(ClosureSet {
            base,
            nodes,
            index,
            root,
            f_indices,
            p_indices,
            free_indices,
        })
    }

    pub fn base(&self) -> &[Formula] {
        &self.base
    }

    pub fn node(&self, idx: usize) -> Node {
        self.nodes[idx]
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    /// `|Cl(phi)|`.
    pub fn len(&self) -> usize {
        2 * self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// The literal standing for the formula the closure was built from.
    pub fn root(&self) -> Lit {
        self.root
    }

    pub fn f_indices(&self) -> &[usize] {
        &self.f_indices
    }

    pub fn p_indices(&self) -> &[usize] {
        &self.p_indices
    }

    /// Letters and temporal formulas: the bits an MCS may choose freely.
    pub fn free_indices(&self) -> &[usize] {
        &self.free_indices
    }

    /// The argument of the `F`/`P` formula at `idx`.
    pub fn temporal_arg(&self, idx: usize) -> Lit {
        match self.nodes[idx] {
            Node::F(a) | Node::P(a) => a,
            _ => panic!("base formula {idx} is not temporal"),
        }
    }

    pub fn lookup(&self, f: &Formula) -> Option<Lit> {
        match f {
            Formula::Not(inner) => self.index.get(&**inner).map(|&idx| Lit {
                idx,
                positive: false,
            }),
            other => self.index.get(other).map(|&idx| Lit::pos(idx)),
        }
    }

    pub fn formula_of(&self, lit: Lit) -> Formula {
        let f = &self.base[lit.idx];
        if lit.positive {
            f.clone()
        } else {
            f.negate()
        }
    }

    /// The closure as an ordered list of formulas (formula, then negation).
    pub fn formulas(&self) -> Vec<Formula> {
        self.base
            .iter()
            .flat_map(|f| [f.clone(), f.negate()])
            .collect()
    }

    /// Completes an assignment to the free bits bottom-up.
    pub fn complete(&self, free: Bits) -> Bits {
        let mut bits = free;
        for (i, node) in self.nodes.iter().enumerate() {
            let v = |l: Lit| bit(bits, l.idx) == l.positive;
            let value = match *node {
                Node::Atom | Node::F(_) | Node::P(_) => continue,
                Node::Or(a, b) => v(a) || v(b),
                Node::And(a, b) => v(a) && v(b),
                Node::Implies(a, b) => !v(a) || v(b),
            };
            if value {
                bits |= 1 << i;
            } else {
                bits &= !(1 << i);
            }
        }
        bits
    }

    /// True iff every compound propositional formula has the value its
    /// children dictate.
    pub fn is_coherent(&self, bits: Bits) -> bool {
        self.complete(bits) == bits && bits.checked_shr(self.base.len() as u32).unwrap_or(0) == 0
    }

    /// Every coherent assignment, in order of the free-bit counter.
    pub fn hintikka_sets(&self) -> Result<Vec<Bits>, McsError> {
        let k = self.free_indices.len();
        if k > 24 {
            return Err(McsError::TooManyCandidates(k));
        }
        Ok((0u64..(1u64 << k))
            .map(|counter| {
                let mut free: Bits = 0;
                for (j, &idx) in self.free_indices.iter().enumerate() {
                    if counter >> j & 1 == 1 {
                        free |= 1 << idx;
                    }
                }
                self.complete(free)
            })
            .collect())
    }

    /// The K_t accessibility condition between two full assignments:
    /// `h` may see `g` iff every `F a` with `a` in `g` is in `h` and every
    /// `P a` with `a` in `h` is in `g`.
    pub fn kt_related(&self, h: Bits, g: Bits) -> bool {
        self.f_indices
            .iter()
            .all(|&j| !has(g, self.temporal_arg(j)) || bit(h, j))
            && self
                .p_indices
                .iter()
                .all(|&j| !has(h, self.temporal_arg(j)) || bit(g, j))
    }
}

#[inline]
pub fn bit(bits: Bits, idx: usize) -> bool {
    bits >> idx & 1 == 1
}

#[inline]
pub fn has(bits: Bits, lit: Lit) -> bool {
    bit(bits, lit.idx) == lit.positive
}

/// A maximal consistent subset of the closure, as its indicator on base
/// formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mcs(pub Bits);

impl Serialize for Mcs {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:x}", self.0))
    }
}

impl<'de> Deserialize<'de> for Mcs {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Bits::from_str_radix(&text, 16)
            .map(Mcs)
            .map_err(serde::de::Error::custom)
    }
}

impl Mcs {
    pub fn contains(self, lit: Lit) -> bool {
        has(self.0, lit)
    }

    /// Indicator string over the closure listing (formula, negation, ...).
    pub fn indicator(self, cl: &ClosureSet) -> String {
        (0..cl.base_len())
            .flat_map(|i| {
                if bit(self.0, i) {
                    ['1', '0']
                } else {
                    ['0', '1']
                }
            })
            .collect()
    }

    pub fn display(self, cl: &ClosureSet) -> String {
        let items: Vec<String> = (0..cl.base_len())
            .map(|i| {
                cl.formula_of(Lit {
                    idx: i,
                    positive: bit(self.0, i),
                })
                .render()
            })
            .collect();
        format!("{{{}}}", items.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Polarity {
    Future,
    Past,
}

/// An `F a` (future) or `P a` (past) obligation, by base index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Defect {
    pub polarity: Polarity,
    pub idx: usize,
}

impl Defect {
    pub fn render(&self, cl: &ClosureSet) -> String {
        cl.formula_of(Lit::pos(self.idx)).render()
    }
}

/// Budgeted K_t tableau over full Hintikka sets.
///
/// A node is a coherent assignment to the closure. Each `F a` it contains
/// needs an accessible node containing `a`, each `P a` a node it is
/// accessible from. A node repeating one of its ancestors is closed by the
/// loop. Refuted nodes are cached; successes are not, since they may rest on
/// an ancestor that later fails.
pub struct KtTableau<'a> {
    cl: &'a ClosureSet,
    universe: Vec<Bits>,
    refuted: HashSet<Bits>,
    budget: usize,
    used: usize,
}

impl<'a> KtTableau<'a> {
    pub const DEFAULT_BUDGET: usize = 1_000_000;

    pub fn new(cl: &'a ClosureSet, budget: usize) -> Result<Self, McsError> {
        Ok(KtTableau {
            cl,
            universe: cl.hintikka_sets()?,
            refuted: HashSet::new(),
            budget,
            used: 0,
        })
    }

    /// Is the conjunction of `lits` satisfiable at a point of some frame?
    pub fn satisfiable(&mut self, lits: &[Lit]) -> Result<bool, McsError> {
        let candidates: Vec<Bits> = self
            .universe
            .iter()
            .copied()
            .filter(|&h| lits.iter().all(|&l| has(h, l)))
            .collect();
        for h in candidates {
            let mut stack = Vec::new();
            if self.node(h, &mut stack)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn node(&mut self, h: Bits, stack: &mut Vec<Bits>) -> Result<bool, McsError> {
        if stack.contains(&h) {
            return Ok(true);
        }
        if self.refuted.contains(&h) {
            return Ok(false);
        }
        self.used += 1;
        if self.used > self.budget {
            return Err(McsError::TableauBudget(self.budget));
        }
        stack.push(h);
        let mut ok = true;
        let cl = self.cl;
        'demands: for (forward, list) in [(true, cl.f_indices()), (false, cl.p_indices())] {
            for &j in list {
                if !bit(h, j) {
                    continue;
                }
                let arg = cl.temporal_arg(j);
                let options: Vec<Bits> = self
                    .universe
                    .iter()
                    .copied()
                    .filter(|&g| {
                        has(g, arg)
                            && if forward {
                                cl.kt_related(h, g)
                            } else {
                                cl.kt_related(g, h)
                            }
                    })
                    .collect();
                let mut found = false;
                for g in options {
                    if self.node(g, stack)? {
                        found = true;
                        break;
                    }
                }
                if !found {
                    ok = false;
                    break 'demands;
                }
            }
        }
        stack.pop();
        if !ok {
            self.refuted.insert(h);
        }
        Ok(ok)
    }
}

/// One-shot K_t satisfiability of a set of closure formulas.
pub fn kt_satisfiable(cl: &ClosureSet, lits: &[Lit], budget: usize) -> Result<bool, McsError> {
    KtTableau::new(cl, budget)?.satisfiable(lits)
}

/// All MCSs of the closure in increasing bit order.
///
/// Candidates are the coherent assignments; inconsistent ones are removed by
/// iterated elimination of assignments with an unwitnessed `F`/`P` formula,
/// which leaves exactly the K_t-satisfiable ones.
pub fn enumerate_mcs(cl: &ClosureSet) -> Result<Vec<Mcs>, McsError> {
    let mut alive = cl.hintikka_sets()?;
    loop {
        let before = alive.len();
        let snapshot = alive.clone();
        alive.retain(|&h| {
            let fut = cl.f_indices().iter().all(|&j| {
                !bit(h, j) || {
                    let a = cl.temporal_arg(j);
                    snapshot.iter().any(|&g| has(g, a) && cl.kt_related(h, g))
                }
            });
            fut && cl.p_indices().iter().all(|&j| {
                !bit(h, j) || {
                    let a = cl.temporal_arg(j);
                    snapshot.iter().any(|&g| has(g, a) && cl.kt_related(g, h))
                }
            })
        });
        if alive.len() == before {
            break;
        }
    }
    let mut out: Vec<Mcs> = alive.into_iter().map(Mcs).collect();
    out.sort();
    Ok(out)
}

/// Masks that make the `<~` test a pair of subset checks.
#[derive(Debug, Clone)]
struct OrderMasks {
    f_mask: Bits,
    p_mask: Bits,
    /// (temporal index, argument) for `F` formulas.
    f_args: Vec<(usize, Lit)>,
    p_args: Vec<(usize, Lit)>,
}

impl OrderMasks {
    fn new(cl: &ClosureSet) -> Self {
        let f_args: Vec<(usize, Lit)> = cl
            .f_indices()
            .iter()
            .map(|&j| (j, cl.temporal_arg(j)))
            .collect();
        let p_args: Vec<(usize, Lit)> = cl
            .p_indices()
            .iter()
            .map(|&j| (j, cl.temporal_arg(j)))
            .collect();
        OrderMasks {
            f_mask: f_args.iter().fold(0, |m, &(j, _)| m | 1 << j),
            p_mask: p_args.iter().fold(0, |m, &(j, _)| m | 1 << j),
            f_args,
            p_args,
        }
    }

    /// `F` formulas an MCS below `n` must contain.
    fn f_required(&self, n: Bits) -> Bits {
        let mut req = n & self.f_mask;
        for &(j, a) in &self.f_args {
            if has(n, a) {
                req |= 1 << j;
            }
        }
        req
    }

    /// `P` formulas an MCS above `m` must contain.
    fn p_required(&self, m: Bits) -> Bits {
        let mut req = m & self.p_mask;
        for &(j, a) in &self.p_args {
            if has(m, a) {
                req |= 1 << j;
            }
        }
        req
    }

    fn lesssim(&self, m: Bits, n: Bits) -> bool {
        let fr = self.f_required(n);
        let pr = self.p_required(m);
        fr & !m == 0 && pr & !n == 0
    }
}

/// The `<~` preorder: `m` can lie in the past of `n`.
pub fn lesssim(cl: &ClosureSet, m: Mcs, n: Mcs) -> bool {
    OrderMasks::new(cl).lesssim(m.0, n.0)
}

/// A maximal set of mutually `<~`-related reflexive MCSs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub id: usize,
    pub rep: Mcs,
    pub members: Vec<Mcs>,
    /// Base formulas belonging to some member.
    pub pos: Bits,
    /// Base formulas whose negation belongs to some member.
    pub neg: Bits,
}

impl Cluster {
    pub fn belongs(&self, lit: Lit) -> bool {
        if lit.positive {
            bit(self.pos, lit.idx)
        } else {
            bit(self.neg, lit.idx)
        }
    }
}

/// Something that can sit at a point of a line: a cluster or a single MCS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Item {
    Cluster(usize),
    Mcs(Mcs),
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Cluster(c) => write!(f, "c{c}"),
            Item::Mcs(m) => write!(f, "m{:x}", m.0),
        }
    }
}

/// Everything the fabrication engines need to know about `Cl(phi)`.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub formula: Formula,
    pub closure: ClosureSet,
    pub mcs: Vec<Mcs>,
    pub clusters: Vec<Cluster>,
    pub irreflexive: Vec<Mcs>,
    cluster_of: HashMap<Mcs, usize>,
    masks: OrderMasks,
    /// `cluster_le[a][b]` iff cluster a <~ cluster b.
    cluster_le: Vec<Vec<bool>>,
    /// Interpolants per cluster pair, filled on first use.
    interpolant_table: OnceLock<Vec<Vec<Vec<Mcs>>>>,
}

impl Analysis {
    pub fn new(phi: &Formula) -> Result<Self, McsError> {
        let closure = ClosureSet::new(phi)?;
        let mcs = enumerate_mcs(&closure)?;
        Ok(Self::from_parts(phi.clone(), closure, mcs))
    }

    pub fn from_parts(formula: Formula, closure: ClosureSet, mcs: Vec<Mcs>) -> Self {
        let masks = OrderMasks::new(&closure);
        let (clusters, irreflexive) = cluster_decomposition(&masks, &mcs);
        let cluster_of = clusters
            .iter()
            .flat_map(|c| c.members.iter().map(move |&m| (m, c.id)))
            .collect();
        let cluster_le = clusters
            .iter()
            .map(|a| {
                clusters
                    .iter()
                    .map(|b| masks.lesssim(a.rep.0, b.rep.0))
                    .collect()
            })
            .collect();
        Analysis {
            formula,
            closure,
            mcs,
            clusters,
            irreflexive,
            cluster_of,
            masks,
            cluster_le,
            interpolant_table: OnceLock::new(),
        }
    }

    pub fn root(&self) -> Lit {
        self.closure.root()
    }

    pub fn cluster(&self, id: usize) -> &Cluster {
        &self.clusters[id]
    }

    pub fn cluster_of(&self, m: Mcs) -> Option<usize> {
        self.cluster_of.get(&m).copied()
    }

    pub fn lesssim(&self, m: Mcs, n: Mcs) -> bool {
        self.masks.lesssim(m.0, n.0)
    }

    pub fn cluster_le(&self, a: usize, b: usize) -> bool {
        self.cluster_le[a][b]
    }

    fn rep(&self, x: Item) -> Mcs {
        match x {
            Item::Cluster(c) => self.clusters[c].rep,
            Item::Mcs(m) => m,
        }
    }

    /// `<~` lifted to clusters through representatives.
    pub fn le(&self, x: Item, y: Item) -> bool {
        match (x, y) {
            (Item::Cluster(a), Item::Cluster(b)) => self.cluster_le[a][b],
            _ => self.masks.lesssim(self.rep(x).0, self.rep(y).0),
        }
    }

    pub fn is_reflexive(&self, m: Mcs) -> bool {
        self.cluster_of.contains_key(&m)
    }

    /// Membership for MCSs, "belongs to" for clusters.
    pub fn holds(&self, x: Item, lit: Lit) -> bool {
        match x {
            Item::Cluster(c) => self.clusters[c].belongs(lit),
            Item::Mcs(m) => m.contains(lit),
        }
    }

    /// Defects of an MCS: all its `F`/`P` members. Defects of a cluster:
    /// `F a` belonging to it with `a` not belonging (dually for `P`).
    pub fn defects(&self, x: Item) -> Vec<Defect> {
        let mut out = Vec::new();
        out.extend(self.defects_of(x, Polarity::Future));
        out.extend(self.defects_of(x, Polarity::Past));
        out
    }

    pub fn defects_of(&self, x: Item, polarity: Polarity) -> impl Iterator<Item = Defect> + '_ {
        let list = match polarity {
            Polarity::Future => self.closure.f_indices(),
            Polarity::Past => self.closure.p_indices(),
        };
        list.iter().copied().filter_map(move |j| {
            let present = self.holds(x, Lit::pos(j));
            let defect = match x {
                Item::Mcs(_) => present,
                Item::Cluster(_) => present && !self.holds(x, self.closure.temporal_arg(j)),
            };
            defect.then_some(Defect { polarity, idx: j })
        })
    }

    /// Whether `d` is discharged at `to`: the argument or the defect itself
    /// holds (belongs) there.
    pub fn discharges(&self, d: Defect, to: Item) -> bool {
        self.holds(to, Lit::pos(d.idx)) || self.holds(to, self.closure.temporal_arg(d.idx))
    }

    /// Passing a defect up (future) or down (past), with the ordering
    /// precondition checked.
    pub fn passes(&self, d: Defect, from: Item, to: Item) -> Result<bool, OrderViolation> {
        let ordered = match d.polarity {
            Polarity::Future => self.le(from, to),
            Polarity::Past => self.le(to, from),
        };
        if !ordered {
            return Err(OrderViolation);
        }
        Ok(self.discharges(d, to))
    }

    /// Every future defect of `from` passes up to `to` (past: down).
    pub fn all_pass(&self, from: Item, polarity: Polarity, to: Item) -> bool {
        self.defects_of(from, polarity)
            .all(|d| self.discharges(d, to))
    }

    /// Interpolants: MCSs `m` with `lo <~ m <~ hi` whose future defects pass
    /// up to `hi` and past defects down to `lo`.
    pub fn interpolants(&self, lo: usize, hi: usize) -> &[Mcs] {
        let table = self.interpolant_table.get_or_init(|| {
            (0..self.clusters.len())
                .map(|lo| (0..self.clusters.len()).map(|hi| self.compute_interpolants(lo, hi)).collect())
                .collect()
        });
        &table[lo][hi]
    }

    fn compute_interpolants(&self, lo: usize, hi: usize) -> Vec<Mcs> {
        let (lo_i, hi_i) = (Item::Cluster(lo), Item::Cluster(hi));
        self.mcs
            .iter()
            .copied()
            .filter(|&m| {
                let mi = Item::Mcs(m);
                self.le(lo_i, mi)
                    && self.le(mi, hi_i)
                    && self.all_pass(mi, Polarity::Future, hi_i)
                    && self.all_pass(mi, Polarity::Past, lo_i)
            })
            .collect()
    }

    pub fn interpolant_exists(&self, lo: usize, hi: usize) -> bool {
        !self.interpolants(lo, hi).is_empty()
    }

    /// Diagnostic dump for fuzzing harnesses.
    pub fn dump_json(&self) -> serde_json::Value {
        let mcs: Vec<serde_json::Value> = self
            .mcs
            .iter()
            .map(|m| serde_json::json!({ "bits": m.indicator(&self.closure) }))
            .collect();
        let clusters: Vec<serde_json::Value> = self
            .clusters
            .iter()
            .map(|c| {
                let members: Vec<usize> = c
                    .members
                    .iter()
                    .map(|m| self.mcs.binary_search(m).expect("member is an MCS"))
                    .collect();
                serde_json::json!({ "id": c.id, "members": members })
            })
            .collect();
        let mut pairs = Vec::new();
        for (i, &m) in self.mcs.iter().enumerate() {
            for (j, &n) in self.mcs.iter().enumerate() {
                if self.lesssim(m, n) {
                    pairs.push(serde_json::json!([i, j]));
                }
            }
        }
        serde_json::json!({ "mcs": mcs, "clusters": clusters, "lesssim": pairs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("defect passing requires the source to be ordered before the target")]
pub struct OrderViolation;

fn cluster_decomposition(masks: &OrderMasks, mcs: &[Mcs]) -> (Vec<Cluster>, Vec<Mcs>) {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut irreflexive = Vec::new();
    for &m in mcs {
        if !masks.lesssim(m.0, m.0) {
            irreflexive.push(m);
            continue;
        }
        match clusters
            .iter_mut()
            .find(|c| masks.lesssim(c.rep.0, m.0) && masks.lesssim(m.0, c.rep.0))
        {
            Some(c) => {
                c.members.push(m);
                c.pos |= m.0;
                c.neg |= !m.0;
            }
            None => clusters.push(Cluster {
                id: clusters.len(),
                rep: m,
                members: vec![m],
                pos: m.0,
                neg: !m.0,
            }),
        }
    }
    (clusters, irreflexive)
}

/// Clusters and irreflexive MCSs of an MCS list.
pub fn compute_clusters(cl: &ClosureSet, ms: &[Mcs]) -> (Vec<Cluster>, Vec<Mcs>) {
    cluster_decomposition(&OrderMasks::new(cl), ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analysis(s: &str) -> Analysis {
        Analysis::new(&Formula::parse(s).unwrap()).unwrap()
    }

    fn mcs_with(a: &Analysis, lits: &[(&str, bool)]) -> Mcs {
        let cl = &a.closure;
        *a.mcs
            .iter()
            .find(|m| {
                lits.iter().all(|&(s, v)| {
                    let l = cl.lookup(&Formula::parse(s).unwrap()).unwrap();
                    m.contains(l) == v
                })
            })
            .expect("mcs exists")
    }

    #[test]
    fn closure_of_future_p() {
        let cl = ClosureSet::new(&Formula::parse("F p").unwrap()).unwrap();
        let fs: Vec<String> = cl.formulas().iter().map(|f| f.render()).collect();
        assert_eq!(fs, vec!["p", "~p", "F p", "~F p"]);
        let cl = ClosureSet::new(&Formula::parse("p").unwrap()).unwrap();
        assert_eq!(cl.len(), 2);
    }

    #[test]
    fn closure_of_past_confluence() {
        // P H p -> H P p, i.e. P~P~p -> ~P~P p.
        let f = Formula::parse("P H p -> H P p").unwrap();
        let cl = ClosureSet::new(&f).unwrap();
        let rendered: Vec<String> = cl.base().iter().map(|f| f.render()).collect();
        // Recursive-descent enumeration of the non-negated subformulas.
        assert_eq!(
            rendered,
            vec!["p", "P p", "P ~p", "P ~P p", "P H p", "P H p -> H P p"]
        );
        assert_eq!(cl.len(), 12);
        for s in ["p", "~p", "P ~p", "H p", "P ~P p", "H P p"] {
            assert!(cl.lookup(&Formula::parse(s).unwrap()).is_some(), "{s}");
        }
    }

    #[test]
    fn tableau_small_sets() {
        let f = Formula::parse("F p").unwrap();
        let cl = ClosureSet::new(&f).unwrap();
        let p = cl.lookup(&Formula::atom("p")).unwrap();
        let fp = cl.lookup(&f).unwrap();
        let b = KtTableau::DEFAULT_BUDGET;
        assert!(!kt_satisfiable(&cl, &[p, p.neg()], b).unwrap());
        assert!(kt_satisfiable(&cl, &[fp.neg(), p], b).unwrap());
        assert!(!kt_satisfiable(&cl, &[fp, fp.neg()], b).unwrap());
    }

    #[test]
    fn tableau_budget_is_reported() {
        let f = Formula::parse("F p & P q").unwrap();
        let cl = ClosureSet::new(&f).unwrap();
        let root = cl.root();
        assert_eq!(
            kt_satisfiable(&cl, &[root], 0),
            Err(McsError::TableauBudget(0))
        );
    }

    #[test]
    fn mcs_of_future_p() {
        let a = analysis("F p");
        assert_eq!(a.mcs.len(), 4);
        let a = analysis("p");
        assert_eq!(a.mcs.len(), 2);
        // F p & ~F p is propositionally false: no MCS contains it.
        let a = analysis("F p & ~F p");
        assert!(a.mcs.iter().all(|m| !m.contains(a.root())));
    }

    #[test]
    fn lesssim_examples() {
        let a = analysis("F p");
        let fp_np = mcs_with(&a, &[("F p", true), ("p", false)]);
        let nfp_p = mcs_with(&a, &[("F p", false), ("p", true)]);
        assert!(a.lesssim(fp_np, nfp_p));
        assert!(!a.lesssim(nfp_p, nfp_p));
        let a = analysis("p");
        assert!(a.lesssim(a.mcs[0], a.mcs[0]));
    }

    #[test]
    fn clusters_of_future_p() {
        let a = analysis("F p");
        assert_eq!(a.clusters.len(), 2);
        assert_eq!(a.irreflexive.len(), 1);
        let irr = mcs_with(&a, &[("F p", false), ("p", true)]);
        assert_eq!(a.irreflexive, vec![irr]);
        let fp_p = mcs_with(&a, &[("F p", true), ("p", true)]);
        let fp_np = mcs_with(&a, &[("F p", true), ("p", false)]);
        let c1 = a.cluster_of(fp_p).unwrap();
        assert_eq!(a.cluster_of(fp_np), Some(c1));
        assert_eq!(a.cluster(c1).members.len(), 2);
        // The F p cluster has no defect: p belongs to it.
        assert!(a.defects(Item::Cluster(c1)).is_empty());
        // Without temporal formulas <~ is total, so {p} and {~p} share a
        // cluster to which both p and ~p belong.
        let a = analysis("p");
        assert_eq!(a.clusters.len(), 1);
        assert_eq!(a.cluster(0).members.len(), 2);
        assert!(a.irreflexive.is_empty());
    }

    #[test]
    fn defects_and_passing() {
        let a = analysis("F p");
        let fp = a.closure.lookup(&Formula::parse("F p").unwrap()).unwrap();
        let fp_np = mcs_with(&a, &[("F p", true), ("p", false)]);
        let nfp_p = mcs_with(&a, &[("F p", false), ("p", true)]);
        let nfp_np = mcs_with(&a, &[("F p", false), ("p", false)]);
        let d = Defect {
            polarity: Polarity::Future,
            idx: fp.idx,
        };
        assert_eq!(a.defects(Item::Mcs(fp_np)), vec![d]);
        assert!(a.defects(Item::Mcs(nfp_np)).is_empty());
        assert_eq!(a.passes(d, Item::Mcs(fp_np), Item::Mcs(nfp_p)), Ok(true));
        assert_eq!(a.passes(d, Item::Mcs(fp_np), Item::Mcs(fp_np)), Ok(true));
        assert_eq!(a.passes(d, Item::Mcs(fp_np), Item::Mcs(nfp_np)), Ok(false));
        // {~Fp, p} is not below {Fp, ~p}.
        assert_eq!(
            a.passes(d, Item::Mcs(nfp_p), Item::Mcs(fp_np)),
            Err(OrderViolation)
        );
    }

    #[test]
    fn interpolants() {
        let a = analysis("F p");
        let fp_p = mcs_with(&a, &[("F p", true), ("p", true)]);
        let c = a.cluster_of(fp_p).unwrap();
        assert!(a.interpolants(c, c).contains(&fp_p));
        let nfp_np = mcs_with(&a, &[("F p", false), ("p", false)]);
        let low = a.cluster_of(nfp_np).unwrap();
        // The ~F p cluster is not below the F p cluster.
        assert!(!a.cluster_le(low, c));
        assert!(!a.interpolant_exists(low, c));
        let a = analysis("p");
        assert!(a.interpolant_exists(0, 0));
    }
}

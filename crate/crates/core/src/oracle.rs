//! Finite-model oracle: products of finite trace frames, a model checker,
//! a bounded satisfiability search and seeded random models.
//!
//! A finite trace frame is a linear sequence of nodes, each a reflexive
//! cluster of one or more points or a single irreflexive point. Products of
//! sequences of clusters are p-morphic images of the reflexive frame; when
//! irreflexive points are allowed (never first, never last, never two in a
//! row) the products are images of the strict frame. Satisfiability in such
//! a product therefore transfers to the real frame, but not conversely.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Formula;

/// Points of a product are stored in `u128` sets.
pub const MAX_POINTS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Cluster(usize),
    Point,
}

impl Node {
    fn width(self) -> usize {
        match self {
            Node::Cluster(k) => k,
            Node::Point => 1,
        }
    }
}

/// Which real frame a finite frame stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameClass {
    Reflexive,
    Strict,
}

impl fmt::Display for FrameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameClass::Reflexive => "reflexive",
            FrameClass::Strict => "strict",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TraceFrame {
    pub nodes: Vec<Node>,
}

impl TraceFrame {
    pub fn new(nodes: Vec<Node>) -> Self {
        assert!(nodes.iter().all(|n| n.width() > 0), "empty cluster");
        TraceFrame { nodes }
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.nodes.iter().map(|n| n.width()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node index of each point.
    fn owners(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(i, n)| std::iter::repeat_n(i, n.width()))
            .collect()
    }

    /// The accessibility relation on points.
    pub fn related(&self, i: usize, j: usize) -> bool {
        let owner = self.owners();
        owner[i] < owner[j] || (owner[i] == owner[j] && matches!(self.nodes[owner[i]], Node::Cluster(_)))
    }

    /// Whether the frame belongs to the class.
    pub fn fits(&self, class: FrameClass) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        match class {
            FrameClass::Reflexive => self.nodes.iter().all(|n| matches!(n, Node::Cluster(_))),
            FrameClass::Strict => {
                matches!(self.nodes[0], Node::Cluster(_))
                    && matches!(self.nodes[self.nodes.len() - 1], Node::Cluster(_))
                    && self.nodes.windows(2).all(|w| w != [Node::Point, Node::Point])
            }
        }
    }

    /// Every frame of the class with at most `max_nodes` nodes and clusters
    /// of at most `max_cluster` points, fewest points first.
    pub fn all(class: FrameClass, max_nodes: usize, max_cluster: usize) -> Vec<TraceFrame> {
        let mut kinds: Vec<Node> = (1..=max_cluster).map(Node::Cluster).collect();
        if class == FrameClass::Strict {
            kinds.push(Node::Point);
        }
        let mut out = Vec::new();
        let mut layer = vec![Vec::new()];
        for _ in 0..max_nodes {
            layer = layer
                .iter()
                .flat_map(|prefix: &Vec<Node>| {
                    kinds.iter().map(move |&k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
            out.extend(layer.iter().cloned().map(TraceFrame::new).filter(|f| f.fits(class)));
        }
        out.sort_by(|a, b| (a.len(), &a.nodes).cmp(&(b.len(), &b.nodes)));
        out
    }
}

/// A product of two trace frames with a valuation of finitely many letters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridModel {
    pub x: TraceFrame,
    pub y: TraceFrame,
    pub letters: Vec<String>,
    /// For each point `(i, j)`, at index `i * y.len() + j`, the letters true
    /// there as a bitmask over `letters`.
    pub valuation: Vec<u64>,
}

impl GridModel {
    pub fn new(x: TraceFrame, y: TraceFrame, letters: Vec<String>) -> Self {
        let n = x.len() * y.len();
        assert!(n <= MAX_POINTS, "{n} points");
        assert!(letters.len() <= 64);
        GridModel {
            x,
            y,
            letters,
            valuation: vec![0; n],
        }
    }

    pub fn points(&self) -> usize {
        self.valuation.len()
    }

    pub fn coords(&self, point: usize) -> (usize, usize) {
        (point / self.y.len(), point % self.y.len())
    }

    /// `(i, j) R (i', j')` iff `i R i'` and `j R j'`.
    pub fn related(&self, a: usize, b: usize) -> bool {
        let (ai, aj) = self.coords(a);
        let (bi, bj) = self.coords(b);
        self.x.related(ai, bi) && self.y.related(aj, bj)
    }

    pub fn letter_true(&self, point: usize, letter: &str) -> bool {
        self.letters
            .iter()
            .position(|l| l == letter)
            .is_some_and(|k| self.valuation[point] >> k & 1 == 1)
    }

    pub fn set(&mut self, point: usize, letter: &str, value: bool) {
        let k = match self.letters.iter().position(|l| l == letter) {
            Some(k) => k,
            None => {
                self.letters.push(letter.to_string());
                self.letters.len() - 1
            }
        };
        if value {
            self.valuation[point] |= 1 << k;
        } else {
            self.valuation[point] &= !(1 << k);
        }
    }

    /// Successor and predecessor sets of every point.
    fn relation(&self) -> (Vec<u128>, Vec<u128>) {
        let n = self.points();
        let mut succ = vec![0u128; n];
        let mut pred = vec![0u128; n];
        for a in 0..n {
            for b in 0..n {
                if self.related(a, b) {
                    succ[a] |= 1 << b;
                    pred[b] |= 1 << a;
                }
            }
        }
        (succ, pred)
    }

    /// The set of points where `phi` holds.
    pub fn extension(&self, phi: &Formula) -> u128 {
        Checker::new(self).eval(phi)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let truth: serde_json::Map<String, serde_json::Value> = self
            .letters
            .iter()
            .map(|l| {
                let pts: Vec<(usize, usize)> = (0..self.points())
                    .filter(|&p| self.letter_true(p, l))
                    .map(|p| self.coords(p))
                    .collect();
                (l.clone(), serde_json::json!(pts))
            })
            .collect();
        serde_json::json!({ "x": self.x, "y": self.y, "true_at": truth })
    }
}

/// `phi` holds at `point` of `model`.
pub fn model_check(model: &GridModel, point: usize, phi: &Formula) -> bool {
    model.extension(phi) >> point & 1 == 1
}

struct Checker<'a> {
    model: &'a GridModel,
    succ: Vec<u128>,
    pred: Vec<u128>,
    all: u128,
}

impl<'a> Checker<'a> {
    fn new(model: &'a GridModel) -> Self {
        let (succ, pred) = model.relation();
        let n = model.points();
        let all = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        Checker {
            model,
            succ,
            pred,
            all,
        }
    }

    fn eval(&self, phi: &Formula) -> u128 {
        match phi {
            Formula::Atom(l) => (0..self.model.points())
                .filter(|&p| self.model.letter_true(p, l))
                .fold(0, |s, p| s | 1 << p),
            Formula::Not(a) => self.all & !self.eval(a),
            Formula::And(a, b) => self.eval(a) & self.eval(b),
            Formula::Or(a, b) => self.eval(a) | self.eval(b),
            Formula::Implies(a, b) => (self.all & !self.eval(a)) | self.eval(b),
            Formula::F(a) => self.diamond(&self.succ, self.eval(a)),
            Formula::P(a) => self.diamond(&self.pred, self.eval(a)),
        }
    }

    fn diamond(&self, rel: &[u128], target: u128) -> u128 {
        rel.iter()
            .enumerate()
            .filter(|(_, &r)| r & target != 0)
            .fold(0, |s, (p, _)| s | 1 << p)
    }
}

/// Straightforward recursive evaluation, kept separate from the bitmask
/// checker so the two can be compared.
pub fn naive_eval(model: &GridModel, point: usize, phi: &Formula) -> bool {
    match phi {
        Formula::Atom(l) => model.letter_true(point, l),
        Formula::Not(a) => !naive_eval(model, point, a),
        Formula::And(a, b) => naive_eval(model, point, a) && naive_eval(model, point, b),
        Formula::Or(a, b) => naive_eval(model, point, a) || naive_eval(model, point, b),
        Formula::Implies(a, b) => !naive_eval(model, point, a) || naive_eval(model, point, b),
        Formula::F(a) => (0..model.points()).any(|q| model.related(point, q) && naive_eval(model, q, a)),
        Formula::P(a) => (0..model.points()).any(|q| model.related(q, point) && naive_eval(model, q, a)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    /// Nodes per axis.
    pub max_nodes: usize,
    /// Points per cluster.
    pub max_cluster: usize,
    /// Cap on search steps; `None` searches exhaustively.
    pub max_steps: Option<u64>,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_nodes: 3,
            max_cluster: 2,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum GridSearch {
    Found { model: GridModel, point: usize },
    NotFound,
    /// The step cap was hit before the bounds were exhausted.
    GaveUp,
}

impl GridSearch {
    pub fn found(&self) -> bool {
        matches!(self, GridSearch::Found { .. })
    }
}

/// Searches products of frames within `bounds`, fewest points first, for a
/// valuation of the letters of `phi` making it true somewhere.
///
/// Letters are assigned point by point. A three-valued evaluation prunes a
/// partial valuation as soon as `phi` is false everywhere whatever the
/// unassigned letters are.
pub fn grid_sat_search(phi: &Formula, class: FrameClass, bounds: Bounds) -> GridSearch {
    let letters = phi.letters();
    let axes = TraceFrame::all(class, bounds.max_nodes, bounds.max_cluster);
    let mut products: Vec<(&TraceFrame, &TraceFrame)> = axes
        .iter()
        .flat_map(|x| axes.iter().map(move |y| (x, y)))
        .filter(|(x, y)| x.len() * y.len() <= MAX_POINTS)
        .collect();
    products.sort_by_key(|(x, y)| x.len() * y.len());
    let mut steps = 0u64;
    for (x, y) in products {
        let mut model = GridModel::new(x.clone(), y.clone(), letters.clone());
        let checker = Partial::new(&model);
        let mut known = vec![0u64; model.points()];
        match assign(phi, &checker, &mut model, &mut known, 0, &mut steps, bounds.max_steps) {
            Some(true) => {
                let point = model.extension(phi).trailing_zeros() as usize;
                return GridSearch::Found { model, point };
            }
            Some(false) => {}
            None => return GridSearch::GaveUp,
        }
    }
    GridSearch::NotFound
}

fn assign(
    phi: &Formula,
    checker: &Partial,
    model: &mut GridModel,
    known: &mut [u64],
    point: usize,
    steps: &mut u64,
    cap: Option<u64>,
) -> Option<bool> {
    *steps += 1;
    if cap.is_some_and(|c| *steps > c) {
        return None;
    }
    let (must, may) = checker.eval(phi, model, known);
    if may == 0 {
        return Some(false);
    }
    if must != 0 {
        // Fill the rest with false; the formula already holds somewhere.
        return Some(true);
    }
    if point == model.points() {
        return Some(false);
    }
    let full = if model.letters.len() == 64 { u64::MAX } else { (1 << model.letters.len()) - 1 };
    known[point] = full;
    for v in 0..=full {
        model.valuation[point] = v;
        match assign(phi, checker, model, known, point + 1, steps, cap) {
            Some(false) => {}
            other => return other,
        }
        if v == full {
            break;
        }
    }
    model.valuation[point] = 0;
    known[point] = 0;
    Some(false)
}

/// Kleene evaluation over partial valuations.
struct Partial {
    succ: Vec<u128>,
    pred: Vec<u128>,
    all: u128,
}

impl Partial {
    fn new(model: &GridModel) -> Self {
        let c = Checker::new(model);
        Partial {
            succ: c.succ,
            pred: c.pred,
            all: c.all,
        }
    }

    /// Points where `phi` is certainly true, and where it may be true.
    fn eval(&self, phi: &Formula, model: &GridModel, known: &[u64]) -> (u128, u128) {
        match phi {
            Formula::Atom(l) => {
                let Some(k) = model.letters.iter().position(|x| x == l) else {
                    return (0, 0);
                };
                let mut must = 0;
                let mut may = 0;
                for p in 0..model.points() {
                    let assigned = known[p] >> k & 1 == 1;
                    let value = model.valuation[p] >> k & 1 == 1;
                    if assigned && value {
                        must |= 1 << p;
                    }
                    if !assigned || value {
                        may |= 1 << p;
                    }
                }
                (must, may)
            }
            Formula::Not(a) => {
                let (must, may) = self.eval(a, model, known);
                (self.all & !may, self.all & !must)
            }
            Formula::And(a, b) => {
                let (m1, y1) = self.eval(a, model, known);
                let (m2, y2) = self.eval(b, model, known);
                (m1 & m2, y1 & y2)
            }
            Formula::Or(a, b) => {
                let (m1, y1) = self.eval(a, model, known);
                let (m2, y2) = self.eval(b, model, known);
                (m1 | m2, y1 | y2)
            }
            Formula::Implies(a, b) => {
                let (m1, y1) = self.eval(a, model, known);
                let (m2, y2) = self.eval(b, model, known);
                ((self.all & !y1) | m2, (self.all & !m1) | y2)
            }
            Formula::F(a) | Formula::P(a) => {
                let rel = if matches!(phi, Formula::F(_)) { &self.succ } else { &self.pred };
                let (must, may) = self.eval(a, model, known);
                let hit = |t: u128| {
                    rel.iter()
                        .enumerate()
                        .filter(|(_, &r)| r & t != 0)
                        .fold(0u128, |s, (p, _)| s | 1 << p)
                };
                (hit(must), hit(may))
            }
        }
    }
}

/// A random product of the class with up to three nodes per axis and
/// clusters of up to two points, and a uniformly random valuation.
pub fn random_model(class: FrameClass, letters: &[String], seed: u64) -> GridModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = TraceFrame::all(class, 3, 2);
    let x = axes[rng.gen_range(0..axes.len())].clone();
    let y = axes[rng.gen_range(0..axes.len())].clone();
    let mut model = GridModel::new(x, y, letters.to_vec());
    let full: u64 = if letters.len() == 64 { u64::MAX } else { (1 << letters.len()) - 1 };
    for v in model.valuation.iter_mut() {
        *v = rng.gen::<u64>() & full;
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn chain(n: usize) -> TraceFrame {
        TraceFrame::new(vec![Node::Cluster(1); n])
    }

    #[test]
    fn reflexive_point_sees_itself() {
        let mut m = GridModel::new(chain(1), chain(1), vec!["p".into()]);
        m.set(0, "p", true);
        assert!(model_check(&m, 0, &f("F p")));
        assert!(model_check(&m, 0, &f("P p")));
    }

    #[test]
    fn future_on_a_small_grid() {
        let mut m = GridModel::new(chain(2), chain(2), vec!["p".into()]);
        m.set(3, "p", true);
        assert!(model_check(&m, 0, &f("F p")));
        assert!(model_check(&m, 3, &f("F p")));
        // With an irreflexive top the top no longer sees p.
        let strict = TraceFrame::new(vec![Node::Cluster(1), Node::Point]);
        let mut m = GridModel::new(strict.clone(), strict, vec!["p".into()]);
        m.set(3, "p", true);
        assert!(model_check(&m, 0, &f("F p")));
        assert!(!model_check(&m, 3, &f("F p")));
    }

    #[test]
    fn reflexivity_axis_fails_at_an_irreflexive_point() {
        let axis = TraceFrame::new(vec![Node::Point, Node::Cluster(1)]);
        let mut m = GridModel::new(axis.clone(), axis, vec!["p".into()]);
        for p in 1..4 {
            m.set(p, "p", true);
        }
        assert!(!model_check(&m, 0, &f("G p -> p")));
        assert!(model_check(&m, 3, &f("G p -> p")));
    }

    #[test]
    fn relation_is_transitive_and_reflexive_on_clusters() {
        for class in [FrameClass::Reflexive, FrameClass::Strict] {
            for t in TraceFrame::all(class, 3, 2) {
                let n = t.len();
                let owner = t.owners();
                for i in 0..n {
                    let cluster = matches!(t.nodes[owner[i]], Node::Cluster(_));
                    assert_eq!(t.related(i, i), cluster);
                    for j in 0..n {
                        for k in 0..n {
                            if t.related(i, j) && t.related(j, k) {
                                assert!(t.related(i, k));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn frame_shapes() {
        let strict = TraceFrame::all(FrameClass::Strict, 3, 1);
        let shapes: Vec<String> = strict
            .iter()
            .map(|t| t.nodes.iter().map(|n| if *n == Node::Point { 'P' } else { 'C' }).collect())
            .collect();
        assert_eq!(shapes, ["C", "CC", "CCC", "CPC"]);
        assert_eq!(TraceFrame::all(FrameClass::Reflexive, 2, 2).len(), 6);
    }

    #[test]
    fn search_examples() {
        let b = Bounds::default();
        match grid_sat_search(&f("p"), FrameClass::Reflexive, b) {
            GridSearch::Found { model, point } => {
                assert_eq!(model.points(), 1);
                assert!(model_check(&model, point, &f("p")));
            }
            other => panic!("{other:?}"),
        }
        let small = Bounds {
            max_nodes: 2,
            max_cluster: 2,
            max_steps: None,
        };
        assert!(matches!(
            grid_sat_search(&f("F p & G ~p"), FrameClass::Reflexive, small),
            GridSearch::NotFound
        ));
        let density = f("F p & F q & G((p -> G ~q) & (q -> G ~p))");
        let b = Bounds {
            max_nodes: 3,
            max_cluster: 1,
            max_steps: None,
        };
        match grid_sat_search(&density, FrameClass::Strict, b) {
            GridSearch::Found { model, point } => assert!(naive_eval(&model, point, &density)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_cap() {
        let b = Bounds {
            max_nodes: 3,
            max_cluster: 2,
            max_steps: Some(10),
        };
        assert!(matches!(
            grid_sat_search(&f("F p & G ~p"), FrameClass::Strict, b),
            GridSearch::GaveUp
        ));
    }

    #[test]
    fn random_models_are_seeded() {
        let letters = vec!["p".to_string(), "q".to_string()];
        let a = random_model(FrameClass::Strict, &letters, 7);
        assert_eq!(a, random_model(FrameClass::Strict, &letters, 7));
        assert!(a.x.fits(FrameClass::Strict) && a.y.fits(FrameClass::Strict));
    }
}

//! Witness search. Tries small grids of simple maps joined into an open
//! map, open shuffles of one-point maps, and for the interval frame open
//! shuffles of simple closed triangles.

use std::collections::HashMap;
use std::marker::PhantomData;
use std::time::Instant;

use crate::bi_boundary::{check_bi_shuffle, BiBoundary};
use crate::boundary::{check_shuffle, join_east, join_north, BoundaryMap, Edge, Piece, Rect};
use crate::derivation::{Derivation, Frame, Kind, Label};
use crate::mcs::{Analysis, Item, Mcs, Polarity};
use crate::trace::{BiTrace, Trace};
use crate::triangle::{check_triangle_shuffle, Triangle};

/// Node and wall-clock limits shared by the search and saturation.
#[derive(Debug, Clone)]
pub struct Budget {
    max_nodes: u64,
    deadline: Option<Instant>,
    nodes: u64,
    exhausted: bool,
}

impl Budget {
    pub fn new(max_nodes: u64, deadline: Option<Instant>) -> Self {
        Budget {
            max_nodes,
            deadline,
            nodes: 0,
            exhausted: false,
        }
    }

    pub fn unlimited() -> Self {
        Budget::new(u64::MAX, None)
    }

    /// Counts one unit of work; false once a limit is hit.
    pub fn spend(&mut self) -> bool {
        if self.exhausted {
            return false;
        }
        self.nodes += 1;
        if self.nodes > self.max_nodes
            || (self.nodes % 1024 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d))
        {
            self.exhausted = true;
        }
        !self.exhausted
    }

    pub fn spend_many(&mut self, n: u64) {
        for _ in 0..n {
            if !self.spend() {
                return;
            }
        }
    }

    /// Nodes left before the node limit.
    pub fn remaining(&self) -> u64 {
        if self.exhausted {
            0
        } else {
            self.max_nodes.saturating_sub(self.nodes)
        }
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn nodes(&self) -> u64 {
        self.nodes
    }
}

/// Grid shapes tried, in order: rows by columns.
const SHAPES: [(usize, usize); 9] = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (2, 3), (3, 2), (3, 3)];

/// Searches for a witness derivation of the analysed formula over `frame`.
pub fn search(a: &Analysis, frame: Frame, budget: &mut Budget) -> Option<Derivation> {
    match frame {
        Frame::Reflexive | Frame::Irreflexive => search_rect::<Trace>(a, budget),
        Frame::Strict => search_rect::<BiTrace>(a, budget),
        Frame::Interval => search_triangle(a, budget),
    }
}

fn search_rect<E: GridEdge>(a: &Analysis, budget: &mut Budget) -> Option<Derivation> {
    if let Some(d) = Grid::<E>::new(a, 1, 1, false).run(budget) {
        return Some(d);
    }
    if let Some(d) = point_shuffle::<E>(a, budget) {
        return Some(d);
    }
    for restricted in [true, false] {
        for &(rows, cols) in &SHAPES[1..] {
            if budget.exhausted() {
                return None;
            }
            if let Some(d) = Grid::<E>::new(a, rows, cols, restricted).run(budget) {
                return Some(d);
            }
        }
    }
    None
}

/// Edge labels a grid can be built from.
pub trait GridEdge: Edge {
    /// Whether the lines between cells carry their own cluster.
    const SEGMENTS: bool;
    /// The label of a line segment with `lo` below or left of it and `hi`
    /// above or right of it.
    fn segment(lo: usize, seg: usize, hi: usize) -> Self;
    /// Whether cells `lo` and `hi` may be adjacent in that order.
    fn adjacent(a: &Analysis, lo: usize, hi: usize) -> bool;
    fn simple(a: &Analysis, m: &Rect<Self>) -> bool;
    fn valid(a: &Analysis, m: &Rect<Self>) -> bool;
    fn label(m: Rect<Self>) -> Label;
    fn check_shuffle(a: &Analysis, m: &Rect<Self>, parts: &[Piece<Self>]) -> Result<(), &'static str>;
}

impl GridEdge for Trace {
    const SEGMENTS: bool = true;

    fn segment(_: usize, seg: usize, _: usize) -> Self {
        Trace::single(seg)
    }

    fn adjacent(a: &Analysis, lo: usize, hi: usize) -> bool {
        a.cluster_le(lo, hi)
    }

    fn simple(a: &Analysis, m: &Rect<Self>) -> bool {
        m.is_simple(a)
    }

    fn valid(a: &Analysis, m: &Rect<Self>) -> bool {
        m.validate(a)
    }

    fn label(m: Rect<Self>) -> Label {
        Label::Boundary(m)
    }

    fn check_shuffle(a: &Analysis, m: &BoundaryMap, parts: &[Piece<Self>]) -> Result<(), &'static str> {
        check_shuffle(a, m, parts, a.formula.size())
    }
}

impl GridEdge for BiTrace {
    const SEGMENTS: bool = false;

    fn segment(lo: usize, _: usize, hi: usize) -> Self {
        BiTrace::single(lo, hi)
    }

    fn adjacent(a: &Analysis, lo: usize, hi: usize) -> bool {
        a.cluster_le(lo, hi) && a.interpolant_exists(lo, hi)
    }

    fn simple(a: &Analysis, m: &Rect<Self>) -> bool {
        m.is_simple(a)
    }

    fn valid(a: &Analysis, m: &Rect<Self>) -> bool {
        m.validate(a)
    }

    fn label(m: Rect<Self>) -> Label {
        Label::Bi(m)
    }

    fn check_shuffle(a: &Analysis, m: &BiBoundary, parts: &[Piece<Self>]) -> Result<(), &'static str> {
        check_bi_shuffle(a, m, parts, a.formula.size())
    }
}

/// Cells are indexed by row from the bottom and column from the left.
/// Horizontal line `i` separates rows `i - 1` and `i`; vertical line `j`
/// separates columns `j - 1` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Var {
    Cell(usize, usize),
    /// Segment of horizontal line `i` in column `j`.
    H(usize, usize),
    /// Segment of vertical line `j` in row `i`.
    V(usize, usize),
    /// Crossing of horizontal line `i` and vertical line `j`.
    X(usize, usize),
}

#[derive(Debug, Clone, Copy)]
enum Check {
    Le(usize, usize),
    Adjacent(usize, usize),
    NoFuture(usize),
    NoPast(usize),
    Simple(usize, usize),
}

struct Grid<'a, E> {
    a: &'a Analysis,
    rows: usize,
    cols: usize,
    restricted: bool,
    vars: Vec<Var>,
    index: HashMap<Var, usize>,
    /// Checks that become decidable once variable `k` is set.
    checks: Vec<Vec<Check>>,
    vals: Vec<usize>,
    mcs_index: HashMap<Mcs, usize>,
    _edge: PhantomData<E>,
}

impl<'a, E: GridEdge> Grid<'a, E> {
    fn new(a: &'a Analysis, rows: usize, cols: usize, restricted: bool) -> Self {
        let mut vars = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                vars.push(Var::Cell(i, j));
            }
        }
        for i in 0..rows {
            for j in 0..cols {
                let mut own = Vec::new();
                if E::SEGMENTS {
                    if i > 0 {
                        own.push(Var::H(i, j));
                    }
                    if j > 0 {
                        own.push(Var::V(i, j));
                    }
                    if i + 1 < rows {
                        own.push(Var::H(i + 1, j));
                    }
                    if j + 1 < cols {
                        own.push(Var::V(i, j + 1));
                    }
                }
                for (x, y) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    if x > 0 && x < rows && y > 0 && y < cols {
                        own.push(Var::X(x, y));
                    }
                }
                for v in own {
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
            }
        }
        let index: HashMap<Var, usize> = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut grid = Grid {
            a,
            rows,
            cols,
            restricted,
            checks: vec![Vec::new(); vars.len()],
            vals: vec![0; vars.len()],
            vars,
            index,
            mcs_index: a.mcs.iter().enumerate().map(|(k, &m)| (m, k)).collect(),
            _edge: PhantomData,
        };
        grid.add_checks();
        grid
    }

    fn var(&self, v: Var) -> usize {
        self.index[&v]
    }

    fn cell_var(&self, i: usize, j: usize) -> usize {
        self.var(Var::Cell(i, j))
    }

    fn attach(&mut self, c: Check, on: &[usize]) {
        let k = *on.iter().max().expect("check has variables");
        self.checks[k].push(c);
    }

    fn add_checks(&mut self) {
        let (rows, cols) = (self.rows, self.cols);
        for i in 0..rows {
            for j in 0..cols {
                let c = self.cell_var(i, j);
                if i + 1 < rows {
                    let up = self.cell_var(i + 1, j);
                    self.attach(Check::Adjacent(c, up), &[c, up]);
                    if E::SEGMENTS {
                        let h = self.var(Var::H(i + 1, j));
                        self.attach(Check::Le(c, h), &[c, h]);
                        self.attach(Check::Le(h, up), &[h, up]);
                    }
                }
                if j + 1 < cols {
                    let right = self.cell_var(i, j + 1);
                    self.attach(Check::Adjacent(c, right), &[c, right]);
                    if E::SEGMENTS {
                        let v = self.var(Var::V(i, j + 1));
                        self.attach(Check::Le(c, v), &[c, v]);
                        self.attach(Check::Le(v, right), &[v, right]);
                    }
                }
            }
        }
        for i in 1..rows {
            for j in 1..cols {
                let x = self.var(Var::X(i, j));
                let sw = self.cell_var(i - 1, j - 1);
                let ne = self.cell_var(i, j);
                self.attach(Check::Le(sw, x), &[sw, x]);
                self.attach(Check::Le(x, ne), &[x, ne]);
                if E::SEGMENTS {
                    let below = [self.var(Var::H(i, j - 1)), self.var(Var::V(i - 1, j))];
                    let above = [self.var(Var::H(i, j)), self.var(Var::V(i, j))];
                    for s in below {
                        self.attach(Check::Le(s, x), &[s, x]);
                    }
                    for s in above {
                        self.attach(Check::Le(x, s), &[x, s]);
                    }
                }
            }
        }
        let first = self.cell_var(0, 0);
        let last = self.cell_var(rows - 1, cols - 1);
        self.attach(Check::NoPast(first), &[first]);
        self.attach(Check::NoFuture(last), &[last]);
        for i in 0..rows {
            for j in 0..cols {
                let deps = self.cell_deps(i, j);
                self.attach(Check::Simple(i, j), &deps);
            }
        }
    }

    fn cell_deps(&self, i: usize, j: usize) -> Vec<usize> {
        let mut deps = vec![self.cell_var(i, j)];
        for v in [
            Var::Cell(i + 1, j),
            Var::Cell(i, j + 1),
            Var::H(i + 1, j),
            Var::V(i, j + 1),
            Var::X(i + 1, j + 1),
            Var::X(i + 1, j),
            Var::X(i, j + 1),
        ] {
            if let Some(&k) = self.index.get(&v) {
                deps.push(k);
            }
        }
        for v in [Var::Cell(i.wrapping_sub(1), j), Var::Cell(i, j.wrapping_sub(1)), Var::H(i, j), Var::V(i, j), Var::X(i, j)] {
            if let Some(&k) = self.index.get(&v) {
                deps.push(k);
            }
        }
        deps
    }

    fn item(&self, k: usize) -> Item {
        match self.vars[k] {
            Var::X(..) => Item::Mcs(self.a.mcs[self.vals[k]]),
            _ => Item::Cluster(self.vals[k]),
        }
    }

    fn value(&self, v: Var) -> usize {
        self.vals[self.var(v)]
    }

    fn mcs_at(&self, i: usize, j: usize) -> Mcs {
        self.a.mcs[self.value(Var::X(i, j))]
    }

    fn cell(&self, i: usize, j: usize) -> Rect<E> {
        let c = self.value(Var::Cell(i, j));
        let seg = |v: Var| if E::SEGMENTS { self.value(v) } else { 0 };
        let (rows, cols) = (self.rows, self.cols);
        Rect {
            minus: c,
            plus: c,
            n: (i + 1 < rows).then(|| E::segment(c, seg(Var::H(i + 1, j)), self.value(Var::Cell(i + 1, j)))),
            s: (i > 0).then(|| E::segment(self.value(Var::Cell(i - 1, j)), seg(Var::H(i, j)), c)),
            e: (j + 1 < cols).then(|| E::segment(c, seg(Var::V(i, j + 1)), self.value(Var::Cell(i, j + 1)))),
            w: (j > 0).then(|| E::segment(self.value(Var::Cell(i, j - 1)), seg(Var::V(i, j)), c)),
            b: (i > 0 && j > 0).then(|| self.mcs_at(i, j)),
            l: (i + 1 < rows && j > 0).then(|| self.mcs_at(i + 1, j)),
            r: (i > 0 && j + 1 < cols).then(|| self.mcs_at(i, j + 1)),
            t: (i + 1 < rows && j + 1 < cols).then(|| self.mcs_at(i + 1, j + 1)),
        }
    }

    fn holds(&self, c: Check) -> bool {
        let a = self.a;
        match c {
            Check::Le(u, v) => a.le(self.item(u), self.item(v)),
            Check::Adjacent(u, v) => E::adjacent(a, self.vals[u], self.vals[v]),
            Check::NoFuture(u) => a.defects_of(self.item(u), Polarity::Future).next().is_none(),
            Check::NoPast(u) => a.defects_of(self.item(u), Polarity::Past).next().is_none(),
            Check::Simple(i, j) => E::simple(a, &self.cell(i, j)),
        }
    }

    /// Candidate values for variable `k`, preferred ones first.
    fn domain(&self, k: usize) -> Vec<usize> {
        let a = self.a;
        let mut out = Vec::new();
        let push = |x: usize, out: &mut Vec<usize>| {
            if !out.contains(&x) {
                out.push(x);
            }
        };
        let (near, all): (Vec<usize>, usize) = match self.vars[k] {
            Var::Cell(..) => ((0..a.clusters.len()).collect(), 0),
            Var::H(i, j) => (vec![self.value(Var::Cell(i, j)), self.value(Var::Cell(i - 1, j))], a.clusters.len()),
            Var::V(i, j) => (vec![self.value(Var::Cell(i, j)), self.value(Var::Cell(i, j - 1))], a.clusters.len()),
            Var::X(i, j) => {
                let near = [(i, j), (i, j - 1), (i - 1, j), (i - 1, j - 1)]
                    .iter()
                    .flat_map(|&(x, y)| a.cluster(self.value(Var::Cell(x, y))).members.iter())
                    .map(|m| self.mcs_index[m])
                    .collect();
                (near, a.mcs.len())
            }
        };
        for x in near {
            push(x, &mut out);
        }
        if !self.restricted {
            for x in 0..all {
                push(x, &mut out);
            }
        }
        out
    }

    fn run(mut self, budget: &mut Budget) -> Option<Derivation> {
        self.dfs(0, budget)
    }

    fn dfs(&mut self, k: usize, budget: &mut Budget) -> Option<Derivation> {
        if k == self.vars.len() {
            return self.assemble();
        }
        for v in self.domain(k) {
            if !budget.spend() {
                return None;
            }
            self.vals[k] = v;
            if self.checks[k].iter().all(|&c| self.holds(c)) {
                if let Some(d) = self.dfs(k + 1, budget) {
                    return Some(d);
                }
            }
        }
        None
    }

    /// Joins the cells row by row and then the rows upwards.
    fn assemble(&self) -> Option<Derivation> {
        let a = self.a;
        let leaf = |i, j| {
            let m = self.cell(i, j);
            (Derivation::leaf(a, Kind::Simple, E::label(m.clone())), m)
        };
        let join = |lo: (Derivation, Rect<E>), hi: (Derivation, Rect<E>), north: bool| {
            let m = if north { join_north(a, &lo.1, &hi.1) } else { join_east(a, &lo.1, &hi.1) }.ok()?;
            if !E::valid(a, &m) {
                return None;
            }
            let kind = if north { Kind::JoinN } else { Kind::JoinE };
            Some((Derivation::node(a, kind, E::label(m.clone()), vec![lo.0, hi.0]), m))
        };
        let mut rows = Vec::new();
        for i in 0..self.rows {
            let mut acc = leaf(i, 0);
            for j in 1..self.cols {
                acc = join(acc, leaf(i, j), false)?;
            }
            rows.push(acc);
        }
        let mut rows = rows.into_iter();
        let mut acc = rows.next()?;
        for row in rows {
            acc = join(acc, row, true)?;
        }
        (acc.0.phi_occurs && acc.1.domain().is_open()).then_some(acc.0)
    }
}

/// Greedy cover of `need` defects by candidates, each covering the defects
/// listed for it. Returns chosen candidate indices.
pub(crate) fn greedy_cover(need: usize, covers: &[Vec<bool>]) -> Option<Vec<usize>> {
    let mut done = vec![false; need];
    let mut chosen = Vec::new();
    while done.iter().any(|&d| !d) {
        let (best, gain) = covers
            .iter()
            .enumerate()
            .map(|(k, c)| (k, (0..need).filter(|&i| c[i] && !done[i]).count()))
            .max_by_key(|&(k, g)| (g, std::cmp::Reverse(k)))?;
        if gain == 0 {
            return None;
        }
        chosen.push(best);
        for i in 0..need {
            done[i] |= covers[best][i];
        }
    }
    Some(chosen)
}

/// An open map `(c-, c+)` shuffling one-point maps.
fn point_shuffle<E: GridEdge>(a: &Analysis, budget: &mut Budget) -> Option<Derivation> {
    let root = a.root();
    let n = a.clusters.len();
    for lo in 0..n {
        for hi in 0..n {
            if !budget.spend() {
                return None;
            }
            let open: Rect<E> = Rect::open(lo, hi);
            if !E::valid(a, &open) {
                continue;
            }
            let (lo_i, hi_i) = (Item::Cluster(lo), Item::Cluster(hi));
            let points: Vec<Mcs> = a
                .mcs
                .iter()
                .copied()
                .filter(|&m| {
                    let mi = Item::Mcs(m);
                    a.le(lo_i, mi)
                        && a.le(mi, hi_i)
                        && a.all_pass(mi, Polarity::Past, lo_i)
                        && a.all_pass(mi, Polarity::Future, hi_i)
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            let needs: Vec<_> = a
                .defects_of(lo_i, Polarity::Future)
                .chain(a.defects_of(hi_i, Polarity::Past))
                .collect();
            let covers: Vec<Vec<bool>> = points
                .iter()
                .map(|&m| needs.iter().map(|&d| a.discharges(d, Item::Mcs(m))).collect())
                .collect();
            let Some(mut chosen) = greedy_cover(needs.len(), &covers) else {
                continue;
            };
            let occurs = |chosen: &[usize]| {
                a.holds(lo_i, root) || a.holds(hi_i, root) || chosen.iter().any(|&k| points[k].contains(root))
            };
            if !occurs(&chosen) {
                match points.iter().position(|m| m.contains(root)) {
                    Some(k) => chosen.push(k),
                    None => continue,
                }
            }
            if chosen.is_empty() {
                chosen.push(0);
            }
            let parts: Vec<Piece<E>> = chosen.iter().map(|&k| Piece::Point(points[k])).collect();
            if E::check_shuffle(a, &open, &parts).is_err() {
                continue;
            }
            let children = chosen
                .iter()
                .map(|&k| Derivation::leaf(a, Kind::OnePoint, Label::Point(points[k])))
                .collect();
            return Some(Derivation::node(a, Kind::Shuffle, E::label(open), children));
        }
    }
    None
}

/// Open simple triangles, then open shuffles of simple closed triangles.
fn search_triangle(a: &Analysis, budget: &mut Budget) -> Option<Derivation> {
    let root = a.root();
    let n = a.clusters.len();
    for c in 0..n {
        let t = Triangle::open(c);
        if a.holds(Item::Cluster(c), root) && t.is_simple(a) {
            return Some(Derivation::leaf(a, Kind::TriSimple, Label::Triangle(t)));
        }
    }
    for top in 0..n {
        let tau = Triangle::open(top);
        if !tau.validate(a) {
            continue;
        }
        let top_i = Item::Cluster(top);
        let mut parts = Vec::new();
        for c in 0..n {
            if !a.cluster_le(c, top) {
                continue;
            }
            let edge = Some(BiTrace::single(c, top));
            for &m in &a.mcs {
                if !budget.spend() {
                    return None;
                }
                let mi = Item::Mcs(m);
                if !a.le(mi, top_i) || !a.all_pass(mi, Polarity::Future, top_i) {
                    continue;
                }
                let p = Triangle {
                    plus: c,
                    n: edge.clone(),
                    e: edge.clone(),
                    t: Some(m),
                };
                if p.is_simple(a) {
                    parts.push(p);
                }
            }
        }
        if parts.is_empty() {
            continue;
        }
        let needs: Vec<_> = a.defects_of(top_i, Polarity::Past).collect();
        let covers: Vec<Vec<bool>> = parts
            .iter()
            .map(|p| needs.iter().map(|&d| a.discharges(d, Item::Mcs(p.t.unwrap()))).collect())
            .collect();
        let Some(mut chosen) = greedy_cover(needs.len(), &covers) else {
            continue;
        };
        let occurs = |chosen: &[usize]| a.holds(top_i, root) || chosen.iter().any(|&k| parts[k].occurs(a, root));
        if !occurs(&chosen) {
            match parts.iter().position(|p| p.occurs(a, root)) {
                Some(k) => chosen.push(k),
                None => continue,
            }
        }
        if chosen.is_empty() {
            chosen.push(0);
        }
        let picked: Vec<Triangle> = chosen.iter().map(|&k| parts[k].clone()).collect();
        if check_triangle_shuffle(a, &tau, &picked, a.formula.size()).is_err() {
            continue;
        }
        let children = picked
            .into_iter()
            .map(|p| Derivation::leaf(a, Kind::TriSimple, Label::Triangle(p)))
            .collect();
        return Some(Derivation::node(a, Kind::TriShuffle, Label::Triangle(tau), children));
    }
    None
}

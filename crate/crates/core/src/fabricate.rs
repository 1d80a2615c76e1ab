//! Bottom-up fabrication: the least set of `(map, phi_occurs)` pairs that
//! contains the simple maps and is closed under joins, limits and shuffles.
//!
//! Candidates of one round are generated in parallel from a snapshot and
//! inserted in a fixed order, so the result does not depend on scheduling.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bi_boundary::{check_bi_limit_ne, check_bi_limit_se};
use crate::boundary::{check_limit_ne, check_limit_se, join_east, join_north, BoundaryDomain, Key, Piece, Rect};
use crate::derivation::{Derivation, Kind, Label};
use crate::mcs::{Analysis, Item, Mcs, Polarity};
use crate::search::{Budget, GridEdge};
use crate::trace::{enumerate_bitraces, enumerate_traces, BiTrace, Trace};
use crate::triangle::{check_triangle_limit_se, check_triangle_shuffle, triangle_join, Openness, Triangle};

/// Edge labels with everything saturation needs on top of the grid search.
pub trait Calculus: GridEdge + Eq + Hash + Send + Sync {
    /// Every valid edge label, or `None` past `cap`.
    fn universe(a: &Analysis, cap: usize) -> Option<Vec<Self>>;
    /// Whether the edge can bound a map with interior `minus`/`plus`, on the
    /// south or west side (`incoming`) or on the north or east side.
    fn fits_side(&self, a: &Analysis, incoming: bool, minus: usize, plus: usize) -> bool;
    /// Extra shape required of the edges of a simple map with interior `c`.
    fn simple_side(&self, incoming: bool, c: usize) -> bool;
    /// The shape required of the outer edge of the quadrant next to a limit.
    fn limit_side(&self, incoming: bool, c: usize) -> bool;
    fn check_limit(a: &Analysis, se: bool, star: &Rect<Self>, d: [&Rect<Self>; 4]) -> Result<(), &'static str>;
    /// Whether a closed part may sit inside a shuffle with interior
    /// clusters `lo` and `hi`, apart from the corner flow.
    fn part_fits(a: &Analysis, part: &Rect<Self>, lo: usize, hi: usize) -> bool;
}

impl Calculus for Trace {
    fn universe(a: &Analysis, cap: usize) -> Option<Vec<Self>> {
        enumerate_traces(a, cap)
    }

    fn fits_side(&self, a: &Analysis, incoming: bool, minus: usize, plus: usize) -> bool {
        if incoming {
            a.cluster_le(self.initial(), minus) && a.cluster_le(self.last(), plus)
        } else {
            a.cluster_le(minus, self.initial()) && a.cluster_le(plus, self.last())
        }
    }

    fn simple_side(&self, _: bool, _: usize) -> bool {
        true
    }

    fn limit_side(&self, _: bool, c: usize) -> bool {
        *self == Trace::single(c)
    }

    fn check_limit(a: &Analysis, se: bool, star: &Rect<Self>, d: [&Rect<Self>; 4]) -> Result<(), &'static str> {
        let check = if se { check_limit_se } else { check_limit_ne };
        check(a, star, d[0], d[1], d[2], d[3])
    }

    fn part_fits(a: &Analysis, part: &Rect<Self>, lo: usize, hi: usize) -> bool {
        !part.exit_violations(a, lo, hi)
    }
}

impl Calculus for BiTrace {
    fn universe(a: &Analysis, cap: usize) -> Option<Vec<Self>> {
        enumerate_bitraces(a, cap)
    }

    fn fits_side(&self, a: &Analysis, incoming: bool, minus: usize, plus: usize) -> bool {
        if incoming {
            self.first().1 == minus && a.cluster_le(self.last().1, plus)
        } else {
            self.last().0 == plus && a.cluster_le(minus, self.first().0)
        }
    }

    fn simple_side(&self, incoming: bool, c: usize) -> bool {
        if incoming {
            self.upper.iter().all(|&u| u == c)
        } else {
            self.lower_constant(c)
        }
    }

    fn limit_side(&self, incoming: bool, c: usize) -> bool {
        self.simple_side(incoming, c)
    }

    fn check_limit(a: &Analysis, se: bool, star: &Rect<Self>, d: [&Rect<Self>; 4]) -> Result<(), &'static str> {
        let check = if se { check_bi_limit_se } else { check_bi_limit_ne };
        check(a, star, d[0], d[1], d[2], d[3])
    }

    fn part_fits(_: &Analysis, part: &Rect<Self>, lo: usize, hi: usize) -> bool {
        part.surrounded_by(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Map(usize),
    Point(Mcs),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Origin {
    Simple,
    Join { north: bool, lo: usize, hi: usize },
    Limit { se: bool, quadrants: [usize; 4] },
    Shuffle(Vec<Part>),
}

/// Fabricated maps of one kind with how each was obtained.
#[derive(Debug, Clone)]
pub struct Fabric<E: Calculus> {
    maps: Vec<(Rect<E>, bool)>,
    origin: Vec<Origin>,
    index: HashMap<(Rect<E>, bool), usize>,
    /// Whether saturation reached the fixed point within its limits.
    pub complete: bool,
}

type Candidate<E> = ((Rect<E>, bool), Origin);

impl<E: Calculus> Fabric<E> {
    fn new() -> Self {
        Fabric {
            maps: Vec::new(),
            origin: Vec::new(),
            index: HashMap::new(),
            complete: false,
        }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Rect<E>, bool)> {
        self.maps.iter()
    }

    pub fn contains(&self, m: &Rect<E>, phi: bool) -> bool {
        self.index.contains_key(&(m.clone(), phi))
    }

    fn insert(&mut self, entry: (Rect<E>, bool), origin: Origin) -> bool {
        if self.index.contains_key(&entry) {
            return false;
        }
        self.index.insert(entry.clone(), self.maps.len());
        self.maps.push(entry);
        self.origin.push(origin);
        true
    }

    /// The derivation of map `id`, unfolded into a tree.
    pub fn derivation(&self, a: &Analysis, id: usize) -> Derivation {
        let map = E::label(self.maps[id].0.clone());
        match &self.origin[id] {
            Origin::Simple => Derivation::leaf(a, Kind::Simple, map),
            Origin::Join { north, lo, hi } => {
                let kind = if *north { Kind::JoinN } else { Kind::JoinE };
                Derivation::node(a, kind, map, vec![self.derivation(a, *lo), self.derivation(a, *hi)])
            }
            Origin::Limit { se, quadrants } => {
                let kind = if *se { Kind::LimitSe } else { Kind::LimitNe };
                let children = quadrants.iter().map(|&q| self.derivation(a, q)).collect();
                Derivation::node(a, kind, map, children)
            }
            Origin::Shuffle(parts) => {
                let children = parts
                    .iter()
                    .map(|p| match p {
                        Part::Map(q) => self.derivation(a, *q),
                        Part::Point(m) => Derivation::leaf(a, Kind::OnePoint, Label::Point(*m)),
                    })
                    .collect();
                Derivation::node(a, Kind::Shuffle, map, children)
            }
        }
    }

    /// The first open map in which the formula occurs.
    pub fn witness(&self, a: &Analysis) -> Option<Derivation> {
        self.maps
            .iter()
            .position(|(m, phi)| *phi && m.domain().is_open())
            .map(|id| self.derivation(a, id))
    }

    /// Maps having `key` labelled `e`.
    fn by_edge(&self, key: Key) -> HashMap<&E, Vec<usize>> {
        let mut out: HashMap<&E, Vec<usize>> = HashMap::new();
        for (id, (m, _)) in self.maps.iter().enumerate() {
            let e = match key {
                Key::N => &m.n,
                Key::S => &m.s,
                Key::E => &m.e,
                Key::W => &m.w,
                _ => unreachable!("edge key"),
            };
            if let Some(e) = e {
                out.entry(e).or_default().push(id);
            }
        }
        out
    }
}

/// Saturates from the simple maps. Stops with `complete = false` once the
/// budget runs out or more than `max_maps` maps exist.
pub fn fabricate_all<E: Calculus>(a: &Analysis, budget: &mut Budget, max_maps: usize) -> Fabric<E> {
    fabricate_seeded(a, budget, max_maps, None)
}

/// [`fabricate_all`], with the seed maps inserted in an order shuffled by
/// `permute`.
fn fabricate_seeded<E: Calculus>(
    a: &Analysis,
    budget: &mut Budget,
    max_maps: usize,
    permute: Option<u64>,
) -> Fabric<E> {
    let mut fab = Fabric::new();
    let Some(edges) = E::universe(a, max_maps) else {
        return fab;
    };
    let mut simple = simple_maps(a, &edges, budget, max_maps);
    if let Some(seed) = permute {
        simple.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    log::debug!("{} simple maps from {} edges, {} nodes", simple.len(), edges.len(), budget.nodes());
    for m in simple {
        let phi = m.occurs(a, a.root());
        fab.insert((m, phi), Origin::Simple);
    }
    if budget.exhausted() || fab.len() > max_maps {
        return fab;
    }
    let mut seen = 0;
    loop {
        let before = fab.len();
        let mut round: Vec<Candidate<E>> = joins(a, &fab, seen);
        let joined = round.len();
        round.extend(limits(a, &fab, &edges, seen, true, budget));
        round.extend(limits(a, &fab, &edges, seen, false, budget));
        let limited = round.len() - joined;
        round.extend(shuffles(a, &fab, budget));
        log::debug!(
            "round from {} maps: {joined} joins, {limited} limits, {} shuffles, {} nodes",
            fab.len(),
            round.len() - joined - limited,
            budget.nodes()
        );
        budget.spend_many(round.len() as u64);
        for (entry, origin) in round {
            fab.insert(entry, origin);
        }
        if budget.exhausted() || fab.len() > max_maps {
            return fab;
        }
        if fab.len() == before {
            fab.complete = true;
            return fab;
        }
        seen = before;
    }
}

/// All simple maps with edges from `edges`.
fn simple_maps<E: Calculus>(a: &Analysis, edges: &[E], budget: &mut Budget, max_maps: usize) -> Vec<Rect<E>> {
    let mut out = Vec::new();
    let corners_below: Vec<Vec<Mcs>> = (0..a.clusters.len())
        .map(|c| a.mcs.iter().copied().filter(|&m| a.le(Item::Mcs(m), Item::Cluster(c))).collect())
        .collect();
    let corners_above: Vec<Vec<Mcs>> = (0..a.clusters.len())
        .map(|c| a.mcs.iter().copied().filter(|&m| a.le(Item::Cluster(c), Item::Mcs(m))).collect())
        .collect();
    for c in 0..a.clusters.len() {
        let side = |incoming: bool| -> Vec<&E> {
            edges
                .iter()
                .filter(|e| e.fits_side(a, incoming, c, c) && e.simple_side(incoming, c))
                .collect()
        };
        let (inc, out_edges) = (side(true), side(false));
        for dom in BoundaryDomain::all_rounded() {
            let opts = |k: Key, list: &Vec<&E>| -> Vec<Option<E>> {
                if dom.contains(k) {
                    list.iter().map(|&e| Some(e.clone())).collect()
                } else {
                    vec![None]
                }
            };
            let mcs_opts = |k: Key, list: &[Mcs]| -> Vec<Option<Mcs>> {
                if dom.contains(k) {
                    list.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                }
            };
            let all = a.mcs.as_slice();
            for w in opts(Key::W, &inc) {
                for s in opts(Key::S, &inc) {
                    for n in opts(Key::N, &out_edges) {
                        for e in opts(Key::E, &out_edges) {
                            for t in mcs_opts(Key::T, &corners_above[c]) {
                                for b in mcs_opts(Key::B, &corners_below[c]) {
                                    if !budget.spend() || out.len() > max_maps {
                                        return out;
                                    }
                                    let m = Rect {
                                        n: n.clone(),
                                        s: s.clone(),
                                        e: e.clone(),
                                        w: w.clone(),
                                        t,
                                        b,
                                        ..Rect::open(c, c)
                                    };
                                    if !E::valid(a, &m) {
                                        continue;
                                    }
                                    for l in mcs_opts(Key::L, all) {
                                        for r in mcs_opts(Key::R, all) {
                                            if !budget.spend() {
                                                return out;
                                            }
                                            let full = Rect { l, r, ..m.clone() };
                                            if E::simple(a, &full) {
                                                out.push(full);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn joins<E: Calculus>(a: &Analysis, fab: &Fabric<E>, seen: usize) -> Vec<Candidate<E>> {
    let by_s = fab.by_edge(Key::S);
    let by_w = fab.by_edge(Key::W);
    let root = a.root();
    (0..fab.len())
        .into_par_iter()
        .flat_map_iter(|lo| {
            let (x, px) = &fab.maps[lo];
            let mut out = Vec::new();
            for (north, key_edge, index) in [(true, &x.n, &by_s), (false, &x.e, &by_w)] {
                let Some(edge) = key_edge else { continue };
                for &hi in index.get(edge).into_iter().flatten() {
                    if lo < seen && hi < seen {
                        continue;
                    }
                    let (y, py) = &fab.maps[hi];
                    let joined = if north { join_north(a, x, y) } else { join_east(a, x, y) };
                    let Ok(m) = joined else { continue };
                    if !E::valid(a, &m) {
                        continue;
                    }
                    let phi = *px || *py || m.occurs(a, root);
                    out.push(((m, phi), Origin::Join { north, lo, hi }));
                }
            }
            out
        })
        .collect()
}

/// South-eastern limits, or north-eastern ones computed on the transposed
/// maps.
fn limits<E: Calculus>(
    a: &Analysis,
    fab: &Fabric<E>,
    edges: &[E],
    seen: usize,
    se: bool,
    budget: &mut Budget,
) -> Vec<Candidate<E>> {
    if budget.exhausted() {
        return Vec::new();
    }
    let flip = |m: &Rect<E>| if se { m.clone() } else { m.transpose() };
    let maps: Vec<Rect<E>> = fab.maps.iter().map(|(m, _)| flip(m)).collect();
    let mut by_w: HashMap<&E, Vec<usize>> = HashMap::new();
    let mut by_n: HashMap<&E, Vec<usize>> = HashMap::new();
    for (id, m) in maps.iter().enumerate() {
        if let Some(w) = &m.w {
            by_w.entry(w).or_default().push(id);
        }
        if let Some(n) = &m.n {
            by_n.entry(n).or_default().push(id);
        }
    }
    let root = a.root();
    let work = AtomicU64::new(0);
    let allowance = budget.remaining();
    let out = (0..maps.len())
        .into_par_iter()
        .flat_map_iter(|i0| {
            let mut out = Vec::new();
            let d0 = &maps[i0];
            let (Some(e0), Some(s0)) = (&d0.e, &d0.s) else {
                return out;
            };
            for &i1 in by_w.get(e0).into_iter().flatten() {
                let d1 = &maps[i1];
                if d1.plus != d0.plus || d1.t != d0.t || !d1.e.as_ref().is_some_and(|e| e.limit_side(false, d0.plus)) {
                    continue;
                }
                let Ok(top) = join_east(a, d0, d1) else { continue };
                if top.n != d0.n {
                    continue;
                }
                for &i2 in by_n.get(s0).into_iter().flatten() {
                    let d2 = &maps[i2];
                    if d2.minus != d0.minus
                        || d2.b != d0.b
                        || d2.t != d0.r
                        || !d2.s.as_ref().is_some_and(|s| s.limit_side(true, d0.minus))
                    {
                        continue;
                    }
                    let Some(e2) = &d2.e else { continue };
                    for &i3 in by_w.get(e2).into_iter().flatten() {
                        if work.fetch_add(1, Ordering::Relaxed) > allowance {
                            return out;
                        }
                        let quadrants = [i0, i1, i2, i3];
                        if quadrants.iter().all(|&q| q < seen) {
                            continue;
                        }
                        let d3 = &maps[i3];
                        if d3.n != d1.s || d3.r != d0.r {
                            continue;
                        }
                        let whole = join_east(a, d2, d3).and_then(|bottom| join_north(a, &bottom, &top));
                        if whole.as_ref() != Ok(d0) {
                            continue;
                        }
                        let phi = quadrants.iter().any(|&q| fab.maps[q].1);
                        for star in limit_stars(a, edges, [d0, d1, d2, d3]) {
                            let star_phi = phi || star.occurs(a, root);
                            out.push(((flip(&star), star_phi), Origin::Limit { se, quadrants }));
                        }
                    }
                }
            }
            out
        })
        .collect();
    budget.spend_many(work.into_inner());
    out
}

/// Every south-eastern limit of the quadruple: `d0` on `-`, `+`, `l`, `W`
/// and `N`, with the remaining labels chosen freely.
fn limit_stars<E: Calculus>(a: &Analysis, edges: &[E], d: [&Rect<E>; 4]) -> Vec<Rect<E>> {
    let d0 = d[0];
    let probe = Rect { s: None, e: None, b: None, r: None, t: None, ..d0.clone() };
    if E::check_limit(a, true, &probe, d).is_err_and(|e| e.starts_with("decomposition")) {
        return Vec::new();
    }
    let (minus, plus) = (d0.minus, d0.plus);
    let mut south: Vec<Option<E>> = vec![None];
    south.extend(edges.iter().filter(|e| e.fits_side(a, true, minus, plus)).cloned().map(Some));
    let mut east: Vec<Option<E>> = vec![None];
    east.extend(edges.iter().filter(|e| e.fits_side(a, false, minus, plus)).cloned().map(Some));
    let mut any: Vec<Option<Mcs>> = vec![None];
    any.extend(a.mcs.iter().copied().map(Some));
    let mut out = Vec::new();
    for s in &south {
        for e in &east {
            for &r in &any {
                if r.is_some() && (s.is_none() || e.is_none()) {
                    continue;
                }
                for &b in &any {
                    if b.is_some() && (s.is_none() || d0.w.is_none()) {
                        continue;
                    }
                    for &t in &any {
                        if t.is_some() && (e.is_none() || d0.n.is_none()) {
                            continue;
                        }
                        let star = Rect {
                            s: s.clone(),
                            e: e.clone(),
                            b,
                            r,
                            t,
                            ..d0.clone()
                        };
                        if E::check_limit(a, true, &star, d).is_ok() {
                            out.push(star);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Open shuffles of fabricated closed maps and one-point maps. For each
/// pair of interior clusters a covering set of parts is chosen greedily,
/// once without and once with a part in which the formula occurs.
fn shuffles<E: Calculus>(a: &Analysis, fab: &Fabric<E>, budget: &Budget) -> Vec<Candidate<E>> {
    if budget.exhausted() {
        return Vec::new();
    }
    let root = a.root();
    let n = a.clusters.len();
    let closed: Vec<usize> = (0..fab.len()).filter(|&i| fab.maps[i].0.domain().is_closed()).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|lo| (0..n).map(move |hi| (lo, hi))).collect();
    pairs
        .into_par_iter()
        .flat_map_iter(|(lo, hi)| {
            let mut out = Vec::new();
            let open: Rect<E> = Rect::open(lo, hi);
            if !E::valid(a, &open) {
                return out;
            }
            let corner_ok = |b: Mcs, t: Mcs| {
                let (bi, ti) = (Item::Mcs(b), Item::Mcs(t));
                a.le(Item::Cluster(lo), bi)
                    && a.all_pass(bi, Polarity::Past, Item::Cluster(lo))
                    && a.le(ti, Item::Cluster(hi))
                    && a.all_pass(ti, Polarity::Future, Item::Cluster(hi))
            };
            // (part, bottom, top, phi)
            let mut parts: Vec<(Part, Mcs, Mcs, bool)> = a
                .mcs
                .iter()
                .filter(|&&m| corner_ok(m, m))
                .map(|&m| (Part::Point(m), m, m, m.contains(root)))
                .collect();
            let points = parts.len();
            if points == 0 {
                return out;
            }
            for &id in &closed {
                let (m, phi) = &fab.maps[id];
                let (b, t) = (m.b.unwrap(), m.t.unwrap());
                if corner_ok(b, t) && E::part_fits(a, m, lo, hi) {
                    parts.push((Part::Map(id), b, t, *phi));
                }
            }
            let needs: Vec<(crate::mcs::Defect, bool)> = a
                .defects_of(Item::Cluster(lo), Polarity::Future)
                .map(|d| (d, true))
                .chain(a.defects_of(Item::Cluster(hi), Polarity::Past).map(|d| (d, false)))
                .collect();
            let covers: Vec<Vec<bool>> = parts
                .iter()
                .map(|&(_, b, t, _)| {
                    needs
                        .iter()
                        .map(|&(d, up)| a.discharges(d, Item::Mcs(if up { b } else { t })))
                        .collect()
                })
                .collect();
            let open_phi = open.occurs(a, root);
            for want_phi in [false, true] {
                let usable: Vec<usize> = (0..parts.len()).filter(|&k| want_phi || !parts[k].3).collect();
                let sub: Vec<Vec<bool>> = usable.iter().map(|&k| covers[k].clone()).collect();
                let Some(chosen) = crate::search::greedy_cover(needs.len(), &sub) else {
                    continue;
                };
                let mut chosen: Vec<usize> = chosen.into_iter().map(|k| usable[k]).collect();
                if !chosen.iter().any(|&k| k < points) {
                    match usable.iter().find(|&&k| k < points) {
                        Some(&k) => chosen.push(k),
                        None => continue,
                    }
                }
                let mut phi = open_phi || chosen.iter().any(|&k| parts[k].3);
                if want_phi && !phi {
                    match usable.iter().find(|&&k| parts[k].3) {
                        Some(&k) => chosen.push(k),
                        None => continue,
                    }
                    phi = true;
                }
                if phi != want_phi || chosen.len() > a.formula.size() {
                    continue;
                }
                chosen.sort_unstable();
                let pieces: Vec<Piece<E>> = chosen
                    .iter()
                    .map(|&k| match parts[k].0 {
                        Part::Map(id) => Piece::Map(fab.maps[id].0.clone()),
                        Part::Point(m) => Piece::Point(m),
                    })
                    .collect();
                if E::check_shuffle(a, &open, &pieces).is_err() {
                    continue;
                }
                let origin = Origin::Shuffle(chosen.iter().map(|&k| parts[k].0.clone()).collect());
                out.push(((open.clone(), phi), origin));
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TriOrigin {
    Simple,
    Join([usize; 3]),
    Limit { se: bool, parts: [usize; 3] },
    Shuffle(Vec<usize>),
}

/// Fabricated triangles, with the rectangles their joins use.
#[derive(Debug, Clone)]
pub struct TriangleFabric {
    pub rects: Fabric<BiTrace>,
    maps: Vec<(Triangle, bool)>,
    origin: Vec<TriOrigin>,
    index: HashMap<(Triangle, bool), usize>,
    pub complete: bool,
}

impl TriangleFabric {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Triangle, bool)> {
        self.maps.iter()
    }

    fn insert(&mut self, entry: (Triangle, bool), origin: TriOrigin) -> bool {
        if self.index.contains_key(&entry) {
            return false;
        }
        self.index.insert(entry.clone(), self.maps.len());
        self.maps.push(entry);
        self.origin.push(origin);
        true
    }

    pub fn derivation(&self, a: &Analysis, id: usize) -> Derivation {
        let map = Label::Triangle(self.maps[id].0.clone());
        let tri = |k: usize| self.derivation(a, k);
        match &self.origin[id] {
            TriOrigin::Simple => Derivation::leaf(a, Kind::TriSimple, map),
            TriOrigin::Join([t0, d, t1]) => {
                Derivation::node(a, Kind::TriJoin, map, vec![tri(*t0), self.rects.derivation(a, *d), tri(*t1)])
            }
            TriOrigin::Limit { se, parts: [t0, d, t1] } => {
                let kind = if *se { Kind::TriLimitSe } else { Kind::TriLimitNw };
                Derivation::node(a, kind, map, vec![tri(*t0), self.rects.derivation(a, *d), tri(*t1)])
            }
            TriOrigin::Shuffle(parts) => {
                Derivation::node(a, Kind::TriShuffle, map, parts.iter().map(|&k| tri(k)).collect())
            }
        }
    }

    pub fn witness(&self, a: &Analysis) -> Option<Derivation> {
        self.maps
            .iter()
            .position(|(t, phi)| *phi && t.openness() == Some(Openness::Open))
            .map(|id| self.derivation(a, id))
    }
}

/// Saturates bi-boundaries first, then triangles over them.
pub fn fabricate_triangles(a: &Analysis, budget: &mut Budget, max_maps: usize) -> TriangleFabric {
    let rects = fabricate_all::<BiTrace>(a, budget, max_maps);
    let mut fab = TriangleFabric {
        complete: false,
        rects,
        maps: Vec::new(),
        origin: Vec::new(),
        index: HashMap::new(),
    };
    if !fab.rects.complete {
        return fab;
    }
    let Some(edges) = enumerate_bitraces(a, max_maps) else {
        return fab;
    };
    let root = a.root();
    for t in triangle_shapes(a, &edges, None) {
        if t.is_simple(a) {
            let phi = t.occurs(a, root);
            fab.insert((t, phi), TriOrigin::Simple);
        }
    }
    // Rectangles usable in joins: S and W present, b absent.
    let joinable: Vec<usize> = (0..fab.rects.len())
        .filter(|&i| {
            let d = fab.rects.maps[i].0.domain();
            d.contains(Key::S) && d.contains(Key::W) && !d.contains(Key::B)
        })
        .collect();
    loop {
        let before = fab.len();
        let mut round: Vec<((Triangle, bool), TriOrigin)> = Vec::new();
        for se in [true, false] {
            let flip = |t: &Triangle| if se { t.clone() } else { t.transpose() };
            let tris: Vec<Triangle> = fab.maps.iter().map(|(t, _)| flip(t)).collect();
            for &di in &joinable {
                let (d, dphi) = &fab.rects.maps[di];
                let d = if se { d.clone() } else { d.transpose() };
                for (i0, t0) in tris.iter().enumerate() {
                    if t0.e != d.w || t0.t != d.l {
                        continue;
                    }
                    for (i1, t1) in tris.iter().enumerate() {
                        if !budget.spend() {
                            return fab;
                        }
                        if d.s != t1.n || d.r != t1.t {
                            continue;
                        }
                        let phi = *dphi || fab.maps[i0].1 || fab.maps[i1].1;
                        if se {
                            if let Ok(t) = triangle_join(a, t0, &d, t1) {
                                if t.validate(a) {
                                    let phi = phi || t.occurs(a, root);
                                    round.push(((t, phi), TriOrigin::Join([i0, di, i1])));
                                }
                            }
                        }
                        if !d.e.as_ref().is_some_and(|e| e.lower_constant(t0.plus)) {
                            continue;
                        }
                        for star in triangle_shapes(a, &edges, Some(t0)) {
                            if check_triangle_limit_se(a, &star, t0, &d, t1).is_ok() {
                                let phi = phi || star.occurs(a, root);
                                let parts = [i0, di, i1];
                                round.push(((flip(&star), phi), TriOrigin::Limit { se, parts }));
                            }
                        }
                    }
                }
            }
        }
        round.extend(triangle_shuffles(a, &fab, &edges, budget));
        for (entry, origin) in round {
            fab.insert(entry, origin);
        }
        if budget.exhausted() || fab.len() > max_maps {
            return fab;
        }
        if fab.len() == before {
            fab.complete = true;
            return fab;
        }
    }
}

/// Triangles of every openness with edges from `edges` whose inner side is
/// `+`. With `like`, only those agreeing with it on `+` and `N`.
fn triangle_shapes(a: &Analysis, edges: &[BiTrace], like: Option<&Triangle>) -> Vec<Triangle> {
    let mut out = Vec::new();
    let pluses: Vec<usize> = match like {
        Some(t) => vec![t.plus],
        None => (0..a.clusters.len()).collect(),
    };
    for c in pluses {
        let sides: Vec<Option<BiTrace>> = std::iter::once(None)
            .chain(edges.iter().filter(|e| e.lower_constant(c)).cloned().map(Some))
            .collect();
        let norths: Vec<Option<BiTrace>> = match like {
            Some(t) => vec![t.n.clone()],
            None => sides.clone(),
        };
        for n in &norths {
            for e in &sides {
                let ts: Vec<Option<Mcs>> = if n.is_some() && e.is_some() {
                    a.mcs.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for t in ts {
                    let tri = Triangle {
                        plus: c,
                        n: n.clone(),
                        e: e.clone(),
                        t,
                    };
                    if tri.validate(a) {
                        out.push(tri);
                    }
                }
            }
        }
    }
    out
}

fn triangle_shuffles(
    a: &Analysis,
    fab: &TriangleFabric,
    edges: &[BiTrace],
    budget: &Budget,
) -> Vec<((Triangle, bool), TriOrigin)> {
    if budget.exhausted() {
        return Vec::new();
    }
    let root = a.root();
    let mut out = Vec::new();
    let closed: Vec<usize> = (0..fab.len())
        .filter(|&i| fab.maps[i].0.openness() == Some(Openness::Closed))
        .collect();
    for tau in triangle_shapes(a, edges, None) {
        let plus = Item::Cluster(tau.plus);
        let parts: Vec<usize> = closed
            .iter()
            .copied()
            .filter(|&i| {
                let p = &fab.maps[i].0;
                let t = Item::Mcs(p.t.unwrap());
                [&p.n, &p.e].into_iter().flatten().all(|e| e.upper.iter().all(|&u| u == tau.plus))
                    && a.le(t, plus)
                    && a.all_pass(t, Polarity::Future, plus)
            })
            .collect();
        if parts.is_empty() {
            continue;
        }
        let needs: Vec<_> = a.defects_of(plus, Polarity::Past).collect();
        let covers: Vec<Vec<bool>> = parts
            .iter()
            .map(|&i| needs.iter().map(|&d| a.discharges(d, Item::Mcs(fab.maps[i].0.t.unwrap()))).collect())
            .collect();
        let tau_phi = tau.occurs(a, root);
        for want_phi in [false, true] {
            let usable: Vec<usize> = (0..parts.len()).filter(|&k| want_phi || !fab.maps[parts[k]].1).collect();
            if usable.is_empty() {
                continue;
            }
            let sub: Vec<Vec<bool>> = usable.iter().map(|&k| covers[k].clone()).collect();
            let Some(chosen) = crate::search::greedy_cover(needs.len(), &sub) else {
                continue;
            };
            let mut chosen: Vec<usize> = chosen.into_iter().map(|k| parts[usable[k]]).collect();
            if chosen.is_empty() {
                chosen.push(parts[usable[0]]);
            }
            let mut phi = tau_phi || chosen.iter().any(|&i| fab.maps[i].1);
            if want_phi && !phi {
                match usable.iter().map(|&k| parts[k]).find(|&i| fab.maps[i].1) {
                    Some(i) => chosen.push(i),
                    None => continue,
                }
                phi = true;
            }
            if phi != want_phi || chosen.len() > a.formula.size() {
                continue;
            }
            chosen.sort_unstable();
            chosen.dedup();
            let picked: Vec<Triangle> = chosen.iter().map(|&i| fab.maps[i].0.clone()).collect();
            if check_triangle_shuffle(a, &tau, &picked, a.formula.size()).is_ok() {
                out.push(((tau.clone(), phi), TriOrigin::Shuffle(chosen)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::derivation::{revalidate, Frame};
    use crate::Formula;

    fn analysis(s: &str) -> Analysis {
        Analysis::new(&Formula::parse(s).unwrap()).unwrap()
    }

    #[test]
    fn single_letter_seeds() {
        let a = analysis("p");
        let fab = fabricate_all::<Trace>(&a, &mut Budget::unlimited(), 1_000_000);
        assert!(fab.complete);
        let open: Rect<Trace> = Rect::open(0, 0);
        assert!(fab.contains(&open, true));
        let d = fab.witness(&a).unwrap();
        revalidate(&a, Frame::Irreflexive, &d).unwrap();
    }

    /// Closure over the whole map space of `Cl(p)` by brute force: every
    /// candidate map is generated, and joins are applied until nothing
    /// changes. Limits and shuffles add nothing new when there is a single
    /// cluster without defects, since they return maps already simple.
    #[test]
    fn single_letter_matches_brute_force() {
        let a = analysis("p");
        let fab = fabricate_all::<Trace>(&a, &mut Budget::unlimited(), 1_000_000);
        let edge = Trace::single(0);
        let mut space = Vec::new();
        for dom in BoundaryDomain::all_rounded() {
            let corner_choices: Vec<Vec<Option<Mcs>>> = [Key::B, Key::L, Key::R, Key::T]
                .iter()
                .map(|&k| {
                    if dom.contains(k) {
                        a.mcs.iter().copied().map(Some).collect()
                    } else {
                        vec![None]
                    }
                })
                .collect();
            for &b in &corner_choices[0] {
                for &l in &corner_choices[1] {
                    for &r in &corner_choices[2] {
                        for &t in &corner_choices[3] {
                            let e = |k| dom.contains(k).then(|| edge.clone());
                            let m = Rect {
                                n: e(Key::N),
                                s: e(Key::S),
                                e: e(Key::E),
                                w: e(Key::W),
                                b,
                                l,
                                r,
                                t,
                                ..Rect::open(0, 0)
                            };
                            if m.validate(&a) {
                                space.push(m);
                            }
                        }
                    }
                }
            }
        }
        let root = a.root();
        let mut closure: Vec<(Rect<Trace>, bool)> = space
            .iter()
            .filter(|m| m.is_simple(&a))
            .map(|m| (m.clone(), m.occurs(&a, root)))
            .collect();
        loop {
            let mut grew = false;
            let snapshot = closure.clone();
            for (x, px) in &snapshot {
                for (y, py) in &snapshot {
                    for m in [join_north(&a, x, y), join_east(&a, x, y)].into_iter().flatten() {
                        let entry = (m.clone(), *px || *py || m.occurs(&a, root));
                        if m.validate(&a) && !closure.contains(&entry) {
                            closure.push(entry);
                            grew = true;
                        }
                    }
                }
            }
            if !grew {
                break;
            }
        }
        assert!(fab.complete);
        assert_eq!(fab.len(), closure.len());
        for (m, phi) in &closure {
            assert!(fab.contains(m, *phi));
        }
    }

    #[test]
    fn no_witness_for_a_contradiction() {
        let a = analysis("F p & G ~p");
        let fab = fabricate_all::<Trace>(&a, &mut Budget::new(2_000_000, None), 200_000);
        assert!(fab.witness(&a).is_none());
        let fab = fabricate_all::<BiTrace>(&a, &mut Budget::new(2_000_000, None), 200_000);
        assert!(fab.witness(&a).is_none());
    }

    #[test]
    fn irreflexive_origin_is_fabricated() {
        let a = analysis("G p & ~p");
        let fab = fabricate_all::<Trace>(&a, &mut Budget::new(50_000_000, None), 5_000_000);
        let d = fab.witness(&a).expect("fabricated");
        revalidate(&a, Frame::Irreflexive, &d).unwrap();
    }

    #[test]
    fn strict_saturation() {
        let a = analysis("p");
        let fab = fabricate_all::<BiTrace>(&a, &mut Budget::unlimited(), 1_000_000);
        assert!(fab.complete);
        let d = fab.witness(&a).expect("fabricated");
        revalidate(&a, Frame::Strict, &d).unwrap();
    }

    fn as_set<E: Calculus>(fab: &Fabric<E>) -> HashSet<(Rect<E>, bool)> {
        fab.iter().cloned().collect()
    }

    #[test]
    fn truncated_runs_are_contained_in_the_fixed_point() {
        let a = analysis("p");
        let full = as_set(&fabricate_all::<Trace>(&a, &mut Budget::unlimited(), 1_000_000));
        for cap in [1, 10, 50, 100] {
            let part = fabricate_all::<Trace>(&a, &mut Budget::unlimited(), cap);
            assert!(!part.complete || part.len() == full.len());
            assert!(as_set(&part).is_subset(&full), "cap {cap}");
        }
        let again = as_set(&fabricate_all::<Trace>(&a, &mut Budget::unlimited(), 1_000_000));
        assert_eq!(full, again);
    }

    #[test]
    fn fixed_point_is_independent_of_seed_order() {
        let a = analysis("p");
        let base = as_set(&fabricate_all::<Trace>(&a, &mut Budget::unlimited(), 1_000_000));
        let bi = as_set(&fabricate_all::<BiTrace>(&a, &mut Budget::unlimited(), 1_000_000));
        for seed in 1..4 {
            let fab = fabricate_seeded::<Trace>(&a, &mut Budget::unlimited(), 1_000_000, Some(seed));
            assert!(fab.complete);
            assert_eq!(as_set(&fab), base, "seed {seed}");
            let fab = fabricate_seeded::<BiTrace>(&a, &mut Budget::unlimited(), 1_000_000, Some(seed));
            assert_eq!(as_set(&fab), bi, "seed {seed}");
        }
    }

    #[test]
    fn triangles_for_a_single_letter() {
        let a = analysis("p");
        let fab = fabricate_triangles(&a, &mut Budget::unlimited(), 1_000_000);
        assert!(fab.complete);
        let d = fab.witness(&a).expect("fabricated");
        revalidate(&a, Frame::Interval, &d).unwrap();
    }
}

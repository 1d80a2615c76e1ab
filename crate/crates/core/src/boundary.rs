//! Boundary maps: finite summaries of rectangle models of the irreflexive
//! frame, and the join, limit and shuffle combinators over them.
//!
//! A map labels the interior of a rectangle by its minimal (`-`) and maximal
//! (`+`) clusters, its four edges by traces and its four corners by MCSs.
//! Corners are `b` (south-west), `l` (north-west), `r` (south-east) and `t`
//! (north-east); edges run from `b` to `l` (W), `l` to `t` (N), `b` to `r`
//! (S) and `r` to `t` (E).
//!
//! Besides the ordering and defect-flow conditions on the corners and
//! interior clusters, [`BoundaryMap::violations`] checks orderings that hold
//! in every rectangle model (every W/S element lies below the maximal
//! cluster, the minimal cluster below every N/E element, and the cross-edge
//! relations between W and E, S and N). Simple maps additionally discharge
//! the obligations of their W/S (future) and N/E (past) edge elements, and
//! shuffle parts discharge the obligations leaving through their edges.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcs::{Analysis, Item, Lit, Mcs, Polarity};
use crate::trace::{BiTrace, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Key {
    Minus,
    Plus,
    N,
    S,
    E,
    W,
    B,
    L,
    R,
    T,
}

impl Key {
    pub const ALL: [Key; 10] = [
        Key::Minus,
        Key::Plus,
        Key::N,
        Key::S,
        Key::E,
        Key::W,
        Key::B,
        Key::L,
        Key::R,
        Key::T,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Key::Minus => "-",
            Key::Plus => "+",
            Key::N => "N",
            Key::S => "S",
            Key::E => "E",
            Key::W => "W",
            Key::B => "b",
            Key::L => "l",
            Key::R => "r",
            Key::T => "t",
        }
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }

    /// The two edges meeting at a corner.
    pub fn adjacent_edges(self) -> Option<(Key, Key)> {
        match self {
            Key::B => Some((Key::S, Key::W)),
            Key::L => Some((Key::W, Key::N)),
            Key::R => Some((Key::S, Key::E)),
            Key::T => Some((Key::N, Key::E)),
            _ => None,
        }
    }
}

/// A key set containing `-` and `+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryDomain(u16);

impl BoundaryDomain {
    pub fn new(keys: &[Key]) -> Self {
        let mut bits = Key::Minus.bit() | Key::Plus.bit();
        for k in keys {
            bits |= k.bit();
        }
        BoundaryDomain(bits)
    }

    pub fn open() -> Self {
        Self::new(&[])
    }

    pub fn closed() -> Self {
        Self::new(&Key::ALL)
    }

    pub fn contains(self, k: Key) -> bool {
        self.0 & k.bit() != 0
    }

    pub fn keys(self) -> impl Iterator<Item = Key> {
        Key::ALL.into_iter().filter(move |&k| self.contains(k))
    }

    /// Every corner present has both adjacent edges present.
    pub fn is_rounded(self) -> bool {
        [Key::B, Key::L, Key::R, Key::T].into_iter().all(|c| {
            let (x, y) = c.adjacent_edges().unwrap();
            !self.contains(c) || (self.contains(x) && self.contains(y))
        })
    }

    /// A corner is present exactly when both adjacent edges are.
    pub fn is_rectangular(self) -> bool {
        [Key::B, Key::L, Key::R, Key::T].into_iter().all(|c| {
            let (x, y) = c.adjacent_edges().unwrap();
            self.contains(c) == (self.contains(x) && self.contains(y))
        })
    }

    pub fn is_open(self) -> bool {
        self == Self::open()
    }

    pub fn is_closed(self) -> bool {
        self == Self::closed()
    }

    /// All rounded domains, in a fixed order.
    pub fn all_rounded() -> Vec<BoundaryDomain> {
        let optional = [Key::N, Key::S, Key::E, Key::W, Key::B, Key::L, Key::R, Key::T];
        (0u16..256)
            .map(|mask| {
                let keys: Vec<Key> = optional
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &k)| k)
                    .collect();
                BoundaryDomain::new(&keys)
            })
            .filter(|d| d.is_rounded())
            .collect()
    }
}

impl fmt::Display for BoundaryDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys: Vec<&str> = self.keys().map(Key::symbol).collect();
        write!(f, "{{{}}}", keys.join(","))
    }
}

/// Labels of a rectangle; `E` is the edge label (traces or bi-traces).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect<E> {
    #[serde(rename = "-")]
    pub minus: usize,
    #[serde(rename = "+")]
    pub plus: usize,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<E>,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    pub s: Option<E>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<E>,
    #[serde(rename = "W", skip_serializing_if = "Option::is_none")]
    pub w: Option<E>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Mcs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<Mcs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Mcs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Mcs>,
}

impl<E: Clone> Rect<E> {
    pub fn open(minus: usize, plus: usize) -> Self {
        Rect {
            minus,
            plus,
            n: None,
            s: None,
            e: None,
            w: None,
            b: None,
            l: None,
            r: None,
            t: None,
        }
    }

    pub fn domain(&self) -> BoundaryDomain {
        let mut keys = Vec::new();
        for (k, present) in [
            (Key::N, self.n.is_some()),
            (Key::S, self.s.is_some()),
            (Key::E, self.e.is_some()),
            (Key::W, self.w.is_some()),
            (Key::B, self.b.is_some()),
            (Key::L, self.l.is_some()),
            (Key::R, self.r.is_some()),
            (Key::T, self.t.is_some()),
        ] {
            if present {
                keys.push(k);
            }
        }
        BoundaryDomain::new(&keys)
    }

    /// Reflection in the `b`-`t` diagonal: swaps N/E, S/W and l/r.
    pub fn transpose(&self) -> Self {
        Rect {
            minus: self.minus,
            plus: self.plus,
            n: self.e.clone(),
            s: self.w.clone(),
            e: self.n.clone(),
            w: self.s.clone(),
            b: self.b,
            l: self.r,
            r: self.l,
            t: self.t,
        }
    }

    pub fn corners(&self) -> impl Iterator<Item = Mcs> + '_ {
        [self.b, self.l, self.r, self.t].into_iter().flatten()
    }

    pub fn edges(&self) -> impl Iterator<Item = &E> + '_ {
        [&self.n, &self.s, &self.e, &self.w].into_iter().flatten()
    }
}

/// Edge labels that can be glued at a seam point.
pub trait Edge: Clone + PartialEq + fmt::Debug {
    fn seam(a: &Analysis, x: &Self, m: Mcs, y: &Self) -> Result<Self, String>;
    /// Clusters and MCSs appearing in the label.
    fn labels(&self) -> Vec<Item>;
}

impl Edge for Trace {
    fn seam(a: &Analysis, x: &Self, m: Mcs, y: &Self) -> Result<Self, String> {
        Trace::join(a, x, m, y).map_err(|e| e.to_string())
    }

    fn labels(&self) -> Vec<Item> {
        self.items().collect()
    }
}

impl Edge for BiTrace {
    fn seam(a: &Analysis, x: &Self, m: Mcs, y: &Self) -> Result<Self, String> {
        BiTrace::join(a, x, m, y).map_err(|e| e.to_string())
    }

    fn labels(&self) -> Vec<Item> {
        let mut out: Vec<Item> = Vec::new();
        for i in 0..self.len() {
            out.push(Item::Cluster(self.lower[i]));
            out.push(Item::Cluster(self.upper[i]));
        }
        out.extend(self.bounds.iter().map(|&m| Item::Mcs(m)));
        out
    }
}

impl<E: Edge> Rect<E> {
    /// Whether `lit` belongs to one of the labels.
    pub fn occurs(&self, a: &Analysis, lit: Lit) -> bool {
        a.holds(Item::Cluster(self.minus), lit)
            || a.holds(Item::Cluster(self.plus), lit)
            || self.corners().any(|m| m.contains(lit))
            || self
                .edges()
                .any(|e| e.labels().into_iter().any(|x| a.holds(x, lit)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JoinError {
    #[error("maps do not fit: {0}")]
    Fit(&'static str),
    #[error("seam does not glue: {0}")]
    Seam(String),
}

fn all_or_none(flags: [bool; 4]) -> bool {
    flags.iter().all(|&f| f) || flags.iter().all(|&f| !f)
}

fn glue<E: Edge>(a: &Analysis, x: &Option<E>, m: Option<Mcs>, y: &Option<E>) -> Result<Option<E>, JoinError> {
    match (x, m, y) {
        (Some(x), Some(m), Some(y)) => E::seam(a, x, m, y).map(Some).map_err(JoinError::Seam),
        _ => Ok(None),
    }
}

/// `lo` with `hi` stacked on top of it.
pub fn join_north<E: Edge>(a: &Analysis, lo: &Rect<E>, hi: &Rect<E>) -> Result<Rect<E>, JoinError> {
    match (&lo.n, &hi.s) {
        (Some(x), Some(y)) if x == y => {}
        _ => return Err(JoinError::Fit("N/S")),
    }
    if !all_or_none([lo.w.is_some(), hi.w.is_some(), lo.l.is_some(), hi.b.is_some()]) || lo.l != hi.b {
        return Err(JoinError::Fit("W"));
    }
    if !all_or_none([lo.e.is_some(), hi.e.is_some(), lo.t.is_some(), hi.r.is_some()]) || lo.t != hi.r {
        return Err(JoinError::Fit("E"));
    }
    Ok(Rect {
        minus: lo.minus,
        plus: hi.plus,
        n: hi.n.clone(),
        s: lo.s.clone(),
        w: glue(a, &lo.w, lo.l, &hi.w)?,
        e: glue(a, &lo.e, lo.t, &hi.e)?,
        l: hi.l,
        t: hi.t,
        b: lo.b,
        r: lo.r,
    })
}

/// `west` with `east` placed to its right.
pub fn join_east<E: Edge>(a: &Analysis, west: &Rect<E>, east: &Rect<E>) -> Result<Rect<E>, JoinError> {
    join_north(a, &west.transpose(), &east.transpose())
        .map(|m| m.transpose())
        .map_err(|e| match e {
            JoinError::Fit("N/S") => JoinError::Fit("E/W"),
            JoinError::Fit("W") => JoinError::Fit("S"),
            JoinError::Fit("E") => JoinError::Fit("N"),
            other => other,
        })
}

/// A piece of a shuffle: a closed map or a one-point map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Piece<E> {
    Map(Rect<E>),
    Point(Mcs),
}

impl<E: Clone> Piece<E> {
    pub fn bottom(&self) -> Option<Mcs> {
        match self {
            Piece::Map(m) => m.b,
            Piece::Point(m) => Some(*m),
        }
    }

    pub fn top(&self) -> Option<Mcs> {
        match self {
            Piece::Map(m) => m.t,
            Piece::Point(m) => Some(*m),
        }
    }
}

pub type BoundaryMap = Rect<Trace>;

fn first(t: &Option<Trace>) -> Option<Item> {
    t.as_ref().map(|t| Item::Cluster(t.initial()))
}

fn last(t: &Option<Trace>) -> Option<Item> {
    t.as_ref().map(|t| Item::Cluster(t.last()))
}

fn corner(m: Option<Mcs>) -> Option<Item> {
    m.map(Item::Mcs)
}

impl BoundaryMap {
    /// Clause labels of every violated condition; empty iff the map is a
    /// boundary map.
    pub fn violations(&self, a: &Analysis) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.domain().is_rounded() {
            out.push("rounded");
        }
        if self.edges().any(|t| t.validate(a).is_err()) {
            out.push("trace");
            return out;
        }
        let le = |x: Option<Item>, y: Option<Item>| match (x, y) {
            (Some(x), Some(y)) => a.le(x, y),
            _ => true,
        };
        let minus = Some(Item::Cluster(self.minus));
        let plus = Some(Item::Cluster(self.plus));

        // Corner-edge chains along the two paths from b to t.
        let west_path: [(Option<Item>, Option<Item>); 5] = [
            (corner(self.b), corner(self.b)),
            (first(&self.w), last(&self.w)),
            (corner(self.l), corner(self.l)),
            (first(&self.n), last(&self.n)),
            (corner(self.t), corner(self.t)),
        ];
        let south_path: [(Option<Item>, Option<Item>); 5] = [
            (corner(self.b), corner(self.b)),
            (first(&self.s), last(&self.s)),
            (corner(self.r), corner(self.r)),
            (first(&self.e), last(&self.e)),
            (corner(self.t), corner(self.t)),
        ];
        for path in [west_path, south_path] {
            for i in 0..path.len() {
                for j in i + 1..path.len() {
                    if !le(path[i].1, path[j].0) {
                        out.push("order: corners and edges");
                    }
                }
            }
        }
        if !le(first(&self.w), minus) || !le(first(&self.s), minus) {
            out.push("order: initial W/S below -");
        }
        if !le(minus, plus) {
            out.push("order: - below +");
        }
        if !le(plus, last(&self.n)) || !le(plus, last(&self.e)) {
            out.push("order: + below final N/E");
        }
        if !le(last(&self.w), plus) || !le(last(&self.s), plus) {
            out.push("order: W/S below +");
        }
        if !le(minus, first(&self.n)) || !le(minus, first(&self.e)) {
            out.push("order: - below N/E");
        }
        if !le(first(&self.w), first(&self.e))
            || !le(last(&self.w), last(&self.e))
            || !le(first(&self.s), first(&self.n))
            || !le(last(&self.s), last(&self.n))
        {
            out.push("order: across the rectangle");
        }
        if !le(corner(self.b), minus) || !le(plus, corner(self.t)) {
            out.push("order: corners and interior");
        }

        let pass_any = |from: Item, pol: Polarity, targets: [Option<Item>; 2]| {
            a.defects_of(from, pol)
                .all(|d| targets.iter().flatten().any(|&x| a.discharges(d, x)))
        };
        if !pass_any(Item::Cluster(self.plus), Polarity::Future, [last(&self.n), last(&self.e)]) {
            out.push("defects: future of +");
        }
        if !pass_any(Item::Cluster(self.minus), Polarity::Past, [first(&self.w), first(&self.s)]) {
            out.push("defects: past of -");
        }
        if let Some(b) = self.b {
            if !pass_any(Item::Mcs(b), Polarity::Future, [first(&self.w), first(&self.s)]) {
                out.push("defects: future of b");
            }
        }
        if let Some(t) = self.t {
            if !pass_any(Item::Mcs(t), Polarity::Past, [last(&self.n), last(&self.e)]) {
                out.push("defects: past of t");
            }
        }
        out
    }

    pub fn validate(&self, a: &Analysis) -> bool {
        self.violations(a).is_empty()
    }

    /// Obligations of edge elements that must be met inside a simple map:
    /// future defects on W and S, past defects on N and E.
    pub fn edge_violations(&self, a: &Analysis, c: usize) -> Vec<&'static str> {
        let mut out = Vec::new();
        let inside = Item::Cluster(c);
        let forward = |t: &Option<Trace>, end: Option<Mcs>| {
            let Some(t) = t else { return true };
            let items: Vec<Item> = t.items().collect();
            items.iter().enumerate().all(|(i, &x)| {
                let next = items.get(i + 1).copied().or(end.map(Item::Mcs));
                a.defects_of(x, Polarity::Future).all(|d| {
                    a.discharges(d, inside) || next.is_some_and(|y| a.discharges(d, y))
                })
            })
        };
        let backward = |t: &Option<Trace>, start: Option<Mcs>| {
            let Some(t) = t else { return true };
            let items: Vec<Item> = t.items().collect();
            items.iter().enumerate().all(|(i, &x)| {
                let prev = if i == 0 {
                    start.map(Item::Mcs)
                } else {
                    Some(items[i - 1])
                };
                a.defects_of(x, Polarity::Past).all(|d| {
                    a.discharges(d, inside) || prev.is_some_and(|y| a.discharges(d, y))
                })
            })
        };
        if !forward(&self.w, self.l) || !forward(&self.s, self.r) {
            out.push("edges: future of W/S");
        }
        if !backward(&self.n, self.l) || !backward(&self.e, self.r) {
            out.push("edges: past of N/E");
        }
        out
    }

    /// `- = +`, a boundary map, and edge obligations met by the interior.
    pub fn is_simple(&self, a: &Analysis) -> bool {
        self.minus == self.plus && self.validate(a) && self.edge_violations(a, self.plus).is_empty()
    }

    /// Obligations leaving a closed part through its edges, once the part
    /// sits inside a shuffle with interior clusters `lo` and `hi`.
    pub(crate) fn exit_violations(&self, a: &Analysis, lo: usize, hi: usize) -> bool {
        let up = Item::Cluster(hi);
        let down = Item::Cluster(lo);
        let forward = |t: &Option<Trace>| {
            let Some(t) = t else { return true };
            let items: Vec<Item> = t.items().collect();
            items.iter().enumerate().all(|(i, &x)| {
                let next = items.get(i + 1).copied().or(self.t.map(Item::Mcs));
                a.defects_of(x, Polarity::Future)
                    .all(|d| a.discharges(d, up) || next.is_some_and(|y| a.discharges(d, y)))
            })
        };
        let backward = |t: &Option<Trace>| {
            let Some(t) = t else { return true };
            let items: Vec<Item> = t.items().collect();
            items.iter().enumerate().all(|(i, &x)| {
                let prev = if i == 0 {
                    self.b.map(Item::Mcs)
                } else {
                    Some(items[i - 1])
                };
                a.defects_of(x, Polarity::Past)
                    .all(|d| a.discharges(d, down) || prev.is_some_and(|y| a.discharges(d, y)))
            })
        };
        !(forward(&self.n) && forward(&self.e) && backward(&self.w) && backward(&self.s))
    }
}

/// The self-similar decomposition of `d0` into four quadrants with `d0` as
/// its own north-west quadrant, and agreement of `star` with `d0` on
/// `-`, `+`, `l`, `W` and `N`.
pub(crate) fn decomposition<E: Edge>(
    a: &Analysis,
    star: &Rect<E>,
    [d0, d1, d2, d3]: [&Rect<E>; 4],
) -> Result<(), &'static str> {
    let bottom = join_east(a, d2, d3).map_err(|_| "decomposition: south row")?;
    let top = join_east(a, d0, d1).map_err(|_| "decomposition: north row")?;
    let whole = join_north(a, &bottom, &top).map_err(|_| "decomposition: rows")?;
    if &whole != d0 {
        return Err("decomposition");
    }
    if star.minus != d0.minus || star.plus != d0.plus || star.l != d0.l || star.w != d0.w || star.n != d0.n {
        return Err("agreement");
    }
    Ok(())
}

/// Checks that `star` is a south-eastern limit of `d0` using `d1` (north-east
/// quadrant), `d2` (south-west) and `d3` (south-east), with `d0` as its own
/// north-west quadrant. Returns the first failed condition.
pub fn check_limit_se(
    a: &Analysis,
    star: &BoundaryMap,
    d0: &BoundaryMap,
    d1: &BoundaryMap,
    d2: &BoundaryMap,
    d3: &BoundaryMap,
) -> Result<(), &'static str> {
    decomposition(a, star, [d0, d1, d2, d3])?;
    if d1.e.as_ref() != Some(&Trace::single(star.plus)) {
        return Err("east edge of north-east quadrant");
    }
    if d2.s.as_ref() != Some(&Trace::single(star.minus)) {
        return Err("south edge of south-west quadrant");
    }
    let r = star.r.map(Item::Mcs);
    if let Some(s) = &star.s {
        let ok = s.items().all(|x| {
            a.defects_of(x, Polarity::Future).all(|d| {
                a.discharges(d, Item::Cluster(star.minus)) || r.is_some_and(|y| a.discharges(d, y))
            })
        });
        if !ok {
            return Err("future defects on S");
        }
    }
    if let Some(e) = &star.e {
        let ok = e.items().all(|x| {
            a.defects_of(x, Polarity::Past).all(|d| {
                a.discharges(d, Item::Cluster(star.plus)) || r.is_some_and(|y| a.discharges(d, y))
            })
        });
        if !ok {
            return Err("past defects on E");
        }
    }
    if !star.validate(a) {
        return Err("limit is not a boundary map");
    }
    Ok(())
}

/// The mirror image of [`check_limit_se`] in the `b`-`t` diagonal, pinching
/// at `l` instead of `r`.
pub fn check_limit_ne(
    a: &Analysis,
    star: &BoundaryMap,
    d0: &BoundaryMap,
    d1: &BoundaryMap,
    d2: &BoundaryMap,
    d3: &BoundaryMap,
) -> Result<(), &'static str> {
    check_limit_se(
        a,
        &star.transpose(),
        &d0.transpose(),
        &d1.transpose(),
        &d2.transpose(),
        &d3.transpose(),
    )
}

/// Checks that the open map `m` is a shuffle of `parts`, at most
/// `max_parts` of them, including a one-point map.
pub fn check_shuffle(
    a: &Analysis,
    m: &BoundaryMap,
    parts: &[Piece<Trace>],
    max_parts: usize,
) -> Result<(), &'static str> {
    if parts.is_empty() || parts.len() > max_parts {
        return Err("number of parts");
    }
    if !parts.iter().any(|p| matches!(p, Piece::Point(_))) {
        return Err("no one-point part");
    }
    if !m.domain().is_open() || !m.validate(a) {
        return Err("shuffle is not an open boundary map");
    }
    for p in parts {
        if let Piece::Map(d) = p {
            if !d.domain().is_closed() || !d.validate(a) {
                return Err("part is not a closed boundary map");
            }
            if d.exit_violations(a, m.minus, m.plus) {
                return Err("obligations leaving a part");
            }
        }
    }
    shuffle_flow(a, m.minus, m.plus, parts.iter().map(|p| (p.bottom(), p.top())))
}

/// Ordering and defect flow between the interior clusters of a shuffle and
/// the bottom and top corners of its parts. A missing corner puts no
/// constraint on that side.
pub(crate) fn shuffle_flow(
    a: &Analysis,
    minus: usize,
    plus: usize,
    corners: impl Iterator<Item = (Option<Mcs>, Option<Mcs>)>,
) -> Result<(), &'static str> {
    let lo = Item::Cluster(minus);
    let hi = Item::Cluster(plus);
    let corners: Vec<_> = corners.collect();
    for &(b, t) in &corners {
        if let Some(b) = b.map(Item::Mcs) {
            if !a.le(lo, b) {
                return Err("part out of order");
            }
            if !a.all_pass(b, Polarity::Past, lo) {
                return Err("past defects of a part's b");
            }
        }
        if let Some(t) = t.map(Item::Mcs) {
            if !a.le(t, hi) {
                return Err("part out of order");
            }
            if !a.all_pass(t, Polarity::Future, hi) {
                return Err("future defects of a part's t");
            }
        }
    }
    let covered = |from: Item, pol: Polarity| {
        a.defects_of(from, pol).all(|d| {
            corners.iter().any(|&(b, t)| {
                let at = match pol {
                    Polarity::Future => b,
                    Polarity::Past => t,
                };
                at.is_some_and(|m| a.discharges(d, Item::Mcs(m)))
            })
        })
    };
    if !covered(lo, Polarity::Future) {
        return Err("future defects of -");
    }
    if !covered(hi, Polarity::Past) {
        return Err("past defects of +");
    }
    Ok(())
}

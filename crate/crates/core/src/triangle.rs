//! Triangle bi-boundaries: summaries of the triangles `{(x', y') : x' + y' > 0,
//! x' <= x, y' <= y}` of the upper triangular frame, which is isomorphic to
//! real intervals under strict *during*.
//!
//! A triangle has an interior cluster `+`, a north edge running west to east
//! and an east edge running south to north (both bi-traces with the interior
//! on their lower side), and a corner `t`. The diagonal is never part of
//! the triangle. Dropping the north or east edge gives the half-open
//! triangles; dropping both gives the open one.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bi_boundary::BiBoundary;
use crate::boundary::{Edge, Key};
use crate::mcs::{Analysis, Item, Lit, Mcs, Polarity};
use crate::trace::BiTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Openness {
    Closed,
    /// East edge present, north edge and corner absent.
    SemiOpenNorth,
    /// North edge present, east edge and corner absent.
    SemiOpenEast,
    Open,
}

impl fmt::Display for Openness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Openness::Closed => "closed",
            Openness::SemiOpenNorth => "semi-open north",
            Openness::SemiOpenEast => "semi-open east",
            Openness::Open => "open",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triangle {
    #[serde(rename = "+")]
    pub plus: usize,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<BiTrace>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<BiTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Mcs>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TriangleJoinError {
    #[error("parts do not fit: {0}")]
    Fit(&'static str),
    #[error("seam does not glue: {0}")]
    Seam(String),
}

impl Triangle {
    pub fn open(plus: usize) -> Self {
        Triangle {
            plus,
            n: None,
            e: None,
            t: None,
        }
    }

    /// `None` for label sets that are not a triangle shape.
    pub fn openness(&self) -> Option<Openness> {
        match (self.n.is_some(), self.e.is_some(), self.t.is_some()) {
            (true, true, true) => Some(Openness::Closed),
            (false, true, false) => Some(Openness::SemiOpenNorth),
            (true, false, false) => Some(Openness::SemiOpenEast),
            (false, false, false) => Some(Openness::Open),
            _ => None,
        }
    }

    /// Reflection in the line `x = y`.
    pub fn transpose(&self) -> Self {
        Triangle {
            plus: self.plus,
            n: self.e.clone(),
            e: self.n.clone(),
            t: self.t,
        }
    }

    pub fn occurs(&self, a: &Analysis, lit: Lit) -> bool {
        a.holds(Item::Cluster(self.plus), lit)
            || self.t.is_some_and(|m| m.contains(lit))
            || [&self.n, &self.e]
                .into_iter()
                .flatten()
                .any(|e| e.labels().into_iter().any(|x| a.holds(x, lit)))
    }

    pub fn violations(&self, a: &Analysis) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.openness().is_none() {
            out.push("shape");
            return out;
        }
        let edges = [&self.n, &self.e];
        if edges.iter().copied().flatten().any(|t| t.validate(a).is_err()) {
            out.push("bi-trace");
            return out;
        }
        let plus = Item::Cluster(self.plus);
        if edges.iter().copied().flatten().any(|t| t.last().0 != self.plus) {
            out.push("order: + is the final lower cluster of N/E");
        }
        if self.t.is_some_and(|t| !a.le(plus, Item::Mcs(t))) {
            out.push("order: + below t");
        }
        let future_ok = a.defects_of(plus, Polarity::Future).all(|d| {
            self.t.is_some_and(|t| a.discharges(d, Item::Mcs(t)))
                || edges.iter().copied().flatten().any(|e| {
                    a.interpolants(self.plus, e.last().1)
                        .into_iter()
                        .any(|&m| a.discharges(d, Item::Mcs(m)))
                })
        });
        if !future_ok {
            out.push("defects: future of +");
        }
        if self
            .t
            .is_some_and(|t| !a.all_pass(Item::Mcs(t), Polarity::Past, plus))
        {
            out.push("defects: past of t");
        }
        out
    }

    pub fn validate(&self, a: &Analysis) -> bool {
        self.violations(a).is_empty()
    }

    /// No past defects at `+`, and the interior side of every edge is `+`.
    pub fn is_simple(&self, a: &Analysis) -> bool {
        a.defects_of(Item::Cluster(self.plus), Polarity::Past).next().is_none()
            && self.inner_side_constant()
            && self.validate(a)
    }

    fn inner_side_constant(&self) -> bool {
        [&self.n, &self.e]
            .into_iter()
            .flatten()
            .all(|t| t.lower_constant(self.plus))
    }

    fn outer_side_constant(&self, c: usize) -> bool {
        [&self.n, &self.e]
            .into_iter()
            .flatten()
            .all(|t| t.upper.iter().all(|&u| u == c))
    }
}

/// `t0 + d + t1`: `t0` in the north-west, the rectangle `d` in the north-east
/// and `t1` in the south-east. The result is closed at the north exactly
/// when `d` has a north edge, and at the east exactly when `d` has an east
/// edge; `t0` and `t1` must be closed on the sides they share with the
/// result's closed sides.
pub fn triangle_join(
    a: &Analysis,
    t0: &Triangle,
    d: &BiBoundary,
    t1: &Triangle,
) -> Result<Triangle, TriangleJoinError> {
    let dom = d.domain();
    if dom.contains(Key::B) || !dom.contains(Key::S) || !dom.contains(Key::W) {
        return Err(TriangleJoinError::Fit("rectangle domain"));
    }
    let north = dom.contains(Key::N);
    let east = dom.contains(Key::E);
    if dom.contains(Key::L) != north || dom.contains(Key::R) != east || dom.contains(Key::T) != (north && east) {
        return Err(TriangleJoinError::Fit("rectangle domain"));
    }
    let want0 = if north { Openness::Closed } else { Openness::SemiOpenNorth };
    let want1 = if east { Openness::Closed } else { Openness::SemiOpenEast };
    if t0.openness() != Some(want0) || t1.openness() != Some(want1) {
        return Err(TriangleJoinError::Fit("triangle openness"));
    }
    if t0.e != d.w || t0.t != d.l {
        return Err(TriangleJoinError::Fit("north-west triangle"));
    }
    if d.s != t1.n || d.r != t1.t {
        return Err(TriangleJoinError::Fit("south-east triangle"));
    }
    let glue = |x: &Option<BiTrace>, m: Option<Mcs>, y: &Option<BiTrace>| match (x, m, y) {
        (Some(x), Some(m), Some(y)) => BiTrace::seam(a, x, m, y)
            .map(Some)
            .map_err(TriangleJoinError::Seam),
        _ => Ok(None),
    };
    Ok(Triangle {
        plus: d.plus,
        n: glue(&t0.n, t0.t, &d.n)?,
        e: glue(&t1.e, t1.t, &d.e)?,
        t: d.t,
    })
}

/// Checks that `star` is a south-eastern limit of `t0`, witnessed by the
/// rectangle `d` and triangle `t1` with `t0 = t0 + d + t1`.
pub fn check_triangle_limit_se(
    a: &Analysis,
    star: &Triangle,
    t0: &Triangle,
    d: &BiBoundary,
    t1: &Triangle,
) -> Result<(), &'static str> {
    let whole = triangle_join(a, t0, d, t1).map_err(|_| "decomposition")?;
    if &whole != t0 {
        return Err("decomposition");
    }
    if !d.e.as_ref().is_some_and(|e| e.lower_constant(star.plus)) {
        return Err("east edge of the rectangle");
    }
    if star.plus != t0.plus || star.n != t0.n {
        return Err("agreement");
    }
    if star.e.as_ref().is_some_and(|e| !e.lower_constant(t0.plus)) {
        return Err("east edge of the limit");
    }
    if star.openness().is_none() || !star.validate(a) {
        return Err("limit is not a triangle");
    }
    Ok(())
}

/// Mirror image of [`check_triangle_limit_se`].
pub fn check_triangle_limit_nw(
    a: &Analysis,
    star: &Triangle,
    t0: &Triangle,
    d: &BiBoundary,
    t1: &Triangle,
) -> Result<(), &'static str> {
    check_triangle_limit_se(a, &star.transpose(), &t0.transpose(), &d.transpose(), &t1.transpose())
}

/// Checks that `tau` is a shuffle of the closed triangles `parts`. The
/// parts' outer sides must be `tau(+)`, and `tau`'s edges must have `+` on
/// their inner side throughout.
pub fn check_triangle_shuffle(
    a: &Analysis,
    tau: &Triangle,
    parts: &[Triangle],
    max_parts: usize,
) -> Result<(), &'static str> {
    if parts.is_empty() || parts.len() > max_parts {
        return Err("number of parts");
    }
    if !tau.validate(a) || !tau.inner_side_constant() {
        return Err("shuffle is not a triangle");
    }
    let plus = Item::Cluster(tau.plus);
    for p in parts {
        if p.openness() != Some(Openness::Closed) || !p.validate(a) {
            return Err("part is not a closed triangle");
        }
        if !p.outer_side_constant(tau.plus) {
            return Err("part not surrounded by the shuffle's cluster");
        }
        let t = Item::Mcs(p.t.unwrap());
        if !a.le(t, plus) {
            return Err("part out of order");
        }
        if !a.all_pass(t, Polarity::Future, plus) {
            return Err("future defects of a part's t");
        }
    }
    let covered = a
        .defects_of(plus, Polarity::Past)
        .all(|d| parts.iter().any(|p| a.discharges(d, Item::Mcs(p.t.unwrap()))));
    if !covered {
        return Err("past defects of +");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Rect;
    use crate::Formula;

    fn analysis(s: &str) -> Analysis {
        Analysis::new(&Formula::parse(s).unwrap()).unwrap()
    }

    fn closed(c: usize, m: Mcs) -> Triangle {
        Triangle {
            plus: c,
            n: Some(BiTrace::single(c, c)),
            e: Some(BiTrace::single(c, c)),
            t: Some(m),
        }
    }

    #[test]
    fn openness_and_transpose() {
        let a = analysis("p");
        let m = a.mcs[0];
        assert_eq!(Triangle::open(0).openness(), Some(Openness::Open));
        assert_eq!(closed(0, m).openness(), Some(Openness::Closed));
        let son = Triangle { n: None, t: None, ..closed(0, m) };
        assert_eq!(son.openness(), Some(Openness::SemiOpenNorth));
        assert_eq!(son.transpose().openness(), Some(Openness::SemiOpenEast));
        let bad = Triangle { t: None, ..closed(0, m) };
        assert_eq!(bad.openness(), None);
        assert_eq!(bad.violations(&a), vec!["shape"]);
    }

    #[test]
    fn simple_triangles() {
        let a = analysis("p");
        assert!(Triangle::open(0).is_simple(&a));
        assert!(closed(0, a.mcs[0]).is_simple(&a));
        let f = analysis("G F p");
        let stuck = (0..f.clusters.len())
            .find(|&c| f.defects_of(Item::Cluster(c), Polarity::Future).count() > 0)
            .unwrap();
        assert_eq!(Triangle::open(stuck).violations(&f), vec!["defects: future of +"]);
    }

    #[test]
    fn past_defect_blocks_simplicity() {
        let a = analysis("H P p");
        let c = (0..a.clusters.len())
            .find(|&c| {
                a.defects_of(Item::Cluster(c), Polarity::Past).count() > 0
                    && a.defects_of(Item::Cluster(c), Polarity::Future).count() == 0
            })
            .unwrap();
        let open = Triangle::open(c);
        assert!(open.validate(&a));
        assert!(!open.is_simple(&a));
    }

    #[test]
    fn join_of_uniform_parts() {
        let a = analysis("p");
        let m = a.mcs[0];
        let tri = closed(0, m);
        let mut d = BiBoundary::uniform(0, m);
        d.b = None;
        let j = triangle_join(&a, &tri, &d, &tri).unwrap();
        assert_eq!(j, tri);
        assert_eq!(
            triangle_join(&a, &Triangle::open(0), &d, &tri),
            Err(TriangleJoinError::Fit("triangle openness"))
        );
        let mut with_b = d.clone();
        with_b.b = Some(m);
        assert_eq!(
            triangle_join(&a, &tri, &with_b, &tri),
            Err(TriangleJoinError::Fit("rectangle domain"))
        );
        // Open join.
        let e = || Some(BiTrace::single(0, 0));
        let d_open = Rect { s: e(), w: e(), ..BiBoundary::open(0, 0) };
        let son = Triangle { n: None, t: None, ..tri.clone() };
        let soe = Triangle { e: None, t: None, ..tri.clone() };
        assert_eq!(triangle_join(&a, &son, &d_open, &soe).unwrap(), Triangle::open(0));
    }

    #[test]
    fn limit_and_shuffle_of_uniform_parts() {
        let a = analysis("p");
        let m = a.mcs[0];
        let tri = closed(0, m);
        let mut d = BiBoundary::uniform(0, m);
        d.b = None;
        assert_eq!(check_triangle_limit_se(&a, &tri, &tri, &d, &tri), Ok(()));
        assert_eq!(check_triangle_limit_nw(&a, &tri, &tri, &d, &tri), Ok(()));
        let mut other = tri.clone();
        other.plus = 1;
        assert_eq!(check_triangle_limit_se(&a, &other, &tri, &d, &tri), Err("east edge of the rectangle"));
        assert!(check_triangle_shuffle(&a, &Triangle::open(0), &[tri.clone()], 1).is_ok());
        assert_eq!(
            check_triangle_shuffle(&a, &Triangle::open(1), &[tri], 1),
            Err("part not surrounded by the shuffle's cluster")
        );
    }
}

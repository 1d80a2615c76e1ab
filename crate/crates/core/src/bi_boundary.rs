//! Bi-boundaries: boundary maps whose edges carry bi-traces, summarising
//! rectangles of the strict frame.
//!
//! A horizontal edge's bi-trace has the clusters south of it as lower and
//! north of it as upper; a vertical edge has west as lower and east as
//! upper. So the interior sits on the upper side of W and S and on the
//! lower side of N and E.

use crate::boundary::{decomposition, join_east, join_north, shuffle_flow, JoinError, Piece, Rect};
use crate::mcs::{Analysis, Item, Mcs, Polarity};
use crate::trace::BiTrace;

pub type BiBoundary = Rect<BiTrace>;

pub fn bi_join_north(a: &Analysis, lo: &BiBoundary, hi: &BiBoundary) -> Result<BiBoundary, JoinError> {
    join_north(a, lo, hi)
}

pub fn bi_join_east(a: &Analysis, west: &BiBoundary, east: &BiBoundary) -> Result<BiBoundary, JoinError> {
    join_east(a, west, east)
}

impl BiBoundary {
    /// The closed bi-boundary of a rectangle whose inside is `c` and whose
    /// outside is `c` on every side, with every corner `m`.
    pub fn uniform(c: usize, m: Mcs) -> Self {
        let e = Some(BiTrace::single(c, c));
        Rect {
            minus: c,
            plus: c,
            n: e.clone(),
            s: e.clone(),
            e: e.clone(),
            w: e,
            b: Some(m),
            l: Some(m),
            r: Some(m),
            t: Some(m),
        }
    }

    pub fn violations(&self, a: &Analysis) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.domain().is_rounded() {
            out.push("rounded");
        }
        if self.edges().any(|t| t.validate(a).is_err()) {
            out.push("bi-trace");
            return out;
        }
        let (minus, plus) = (self.minus, self.plus);
        let final_lower = |t: &Option<BiTrace>| t.as_ref().map(|t| t.last().0);
        let initial_upper = |t: &Option<BiTrace>| t.as_ref().map(|t| t.first().1);
        if [final_lower(&self.n), final_lower(&self.e)]
            .into_iter()
            .flatten()
            .any(|c| c != plus)
        {
            out.push("order: + is the final lower cluster of N/E");
        }
        if [initial_upper(&self.s), initial_upper(&self.w)]
            .into_iter()
            .flatten()
            .any(|c| c != minus)
        {
            out.push("order: - is the initial upper cluster of S/W");
        }
        if !a.cluster_le(minus, plus) {
            out.push("order: - below +");
        }
        if self.t.is_some_and(|t| !a.le(Item::Cluster(plus), Item::Mcs(t))) {
            out.push("order: + below t");
        }
        if self.b.is_some_and(|b| !a.le(Item::Mcs(b), Item::Cluster(minus))) {
            out.push("order: b below -");
        }
        let between = |lo: Option<usize>, m: Option<Mcs>, hi: Option<usize>| match m {
            Some(m) => {
                lo.is_none_or(|c| a.le(Item::Cluster(c), Item::Mcs(m)))
                    && hi.is_none_or(|c| a.le(Item::Mcs(m), Item::Cluster(c)))
            }
            None => true,
        };
        if !between(final_lower(&self.w), self.l, initial_upper(&self.n))
            || !between(final_lower(&self.s), self.r, initial_upper(&self.e))
        {
            out.push("order: l and r corners");
        }

        // Defects of + leave through the north-east end of N or E, or t.
        let exit_up = |t: &Option<BiTrace>| t.as_ref().map(|t| t.last());
        let exit_down = |t: &Option<BiTrace>| t.as_ref().map(|t| t.first());
        let via_interpolant = |d, pair: Option<(usize, usize)>| {
            pair.is_some_and(|(lo, hi)| {
                a.interpolants(lo, hi)
                    .iter()
                    .any(|&m| a.discharges(d, Item::Mcs(m)))
            })
        };
        let plus_ok = a.defects_of(Item::Cluster(plus), Polarity::Future).all(|d| {
            via_interpolant(d, exit_up(&self.n))
                || via_interpolant(d, exit_up(&self.e))
                || self.t.is_some_and(|t| a.discharges(d, Item::Mcs(t)))
        });
        if !plus_ok {
            out.push("defects: future of +");
        }
        let minus_ok = a.defects_of(Item::Cluster(minus), Polarity::Past).all(|d| {
            via_interpolant(d, exit_down(&self.s))
                || via_interpolant(d, exit_down(&self.w))
                || self.b.is_some_and(|b| a.discharges(d, Item::Mcs(b)))
        });
        if !minus_ok {
            out.push("defects: past of -");
        }
        if self
            .b
            .is_some_and(|b| !a.all_pass(Item::Mcs(b), Polarity::Future, Item::Cluster(minus)))
        {
            out.push("defects: future of b");
        }
        if self
            .t
            .is_some_and(|t| !a.all_pass(Item::Mcs(t), Polarity::Past, Item::Cluster(plus)))
        {
            out.push("defects: past of t");
        }
        out
    }

    pub fn validate(&self, a: &Analysis) -> bool {
        self.violations(a).is_empty()
    }

    /// `- = +` and every cluster on the inner side of an edge is that
    /// cluster.
    pub fn is_simple(&self, a: &Analysis) -> bool {
        let c = self.plus;
        self.minus == c
            && [&self.w, &self.s]
                .into_iter()
                .flatten()
                .all(|t| t.upper.iter().all(|&u| u == c))
            && [&self.n, &self.e]
                .into_iter()
                .flatten()
                .all(|t| t.lower_constant(c))
            && self.validate(a)
    }

    /// Whether the clusters just outside the edges of a part are the
    /// interior clusters of the shuffle it sits in.
    pub(crate) fn surrounded_by(&self, minus: usize, plus: usize) -> bool {
        [&self.n, &self.e]
            .into_iter()
            .flatten()
            .all(|t| t.upper.iter().all(|&u| u == plus))
            && [&self.w, &self.s]
                .into_iter()
                .flatten()
                .all(|t| t.lower_constant(minus))
    }
}

/// South-eastern limit of bi-boundaries. The rectangle conditions carry
/// over with single-cluster traces replaced by bi-traces whose inner side
/// is constantly that cluster, and edge obligations read off the outer
/// side.
pub fn check_bi_limit_se(
    a: &Analysis,
    star: &BiBoundary,
    d0: &BiBoundary,
    d1: &BiBoundary,
    d2: &BiBoundary,
    d3: &BiBoundary,
) -> Result<(), &'static str> {
    decomposition(a, star, [d0, d1, d2, d3])?;
    if !d1.e.as_ref().is_some_and(|t| t.lower_constant(star.plus)) {
        return Err("east edge of north-east quadrant");
    }
    if !d2.s.as_ref().is_some_and(|t| t.upper.iter().all(|&u| u == star.minus)) {
        return Err("south edge of south-west quadrant");
    }
    let r = star.r.map(Item::Mcs);
    if let Some(s) = &star.s {
        let outer = s
            .lower
            .iter()
            .map(|&c| Item::Cluster(c))
            .chain(s.bounds.iter().map(|&m| Item::Mcs(m)));
        let ok = outer.into_iter().all(|x| {
            a.defects_of(x, Polarity::Future).all(|d| {
                a.discharges(d, Item::Cluster(star.minus)) || r.is_some_and(|y| a.discharges(d, y))
            })
        });
        if !ok {
            return Err("future defects on S");
        }
    }
    if let Some(e) = &star.e {
        let outer = e
            .upper
            .iter()
            .map(|&c| Item::Cluster(c))
            .chain(e.bounds.iter().map(|&m| Item::Mcs(m)));
        let ok = outer.into_iter().all(|x| {
            a.defects_of(x, Polarity::Past).all(|d| {
                a.discharges(d, Item::Cluster(star.plus)) || r.is_some_and(|y| a.discharges(d, y))
            })
        });
        if !ok {
            return Err("past defects on E");
        }
    }
    if !star.validate(a) {
        return Err("limit is not a bi-boundary");
    }
    Ok(())
}

/// Mirror image of [`check_bi_limit_se`] in the `b`-`t` diagonal.
pub fn check_bi_limit_ne(
    a: &Analysis,
    star: &BiBoundary,
    d0: &BiBoundary,
    d1: &BiBoundary,
    d2: &BiBoundary,
    d3: &BiBoundary,
) -> Result<(), &'static str> {
    check_bi_limit_se(
        a,
        &star.transpose(),
        &d0.transpose(),
        &d1.transpose(),
        &d2.transpose(),
        &d3.transpose(),
    )
}

/// Checks that the open bi-boundary `m` is a shuffle of `parts`: closed
/// bi-boundaries and one-point maps, at least one of the latter.
pub fn check_bi_shuffle(
    a: &Analysis,
    m: &BiBoundary,
    parts: &[Piece<BiTrace>],
    max_parts: usize,
) -> Result<(), &'static str> {
    if parts.is_empty() || parts.len() > max_parts {
        return Err("number of parts");
    }
    if !parts.iter().any(|p| matches!(p, Piece::Point(_))) {
        return Err("no one-point part");
    }
    if !m.domain().is_open() || !m.validate(a) {
        return Err("shuffle is not an open bi-boundary");
    }
    for p in parts {
        if let Piece::Map(d) = p {
            if !d.domain().is_closed() || !d.validate(a) {
                return Err("part is not a closed bi-boundary");
            }
            if !d.surrounded_by(m.minus, m.plus) {
                return Err("part not surrounded by the shuffle's clusters");
            }
        }
    }
    shuffle_flow(a, m.minus, m.plus, parts.iter().map(|p| (p.bottom(), p.top())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Formula;

    fn analysis(s: &str) -> Analysis {
        Analysis::new(&Formula::parse(s).unwrap()).unwrap()
    }

    fn cluster_with(a: &Analysis, f: &str, positive: bool) -> usize {
        let l = a.closure.lookup(&Formula::parse(f).unwrap()).unwrap();
        let l = if positive { l } else { l.neg() };
        a.clusters
            .iter()
            .find(|c| c.members.iter().all(|m| m.contains(l)))
            .unwrap()
            .id
    }

    #[test]
    fn open_and_uniform() {
        let a = analysis("p");
        let open = BiBoundary::open(0, 0);
        assert!(open.validate(&a) && open.is_simple(&a));
        let u = BiBoundary::uniform(0, a.mcs[0]);
        assert!(u.is_simple(&a), "{:?}", u.violations(&a));
        assert_eq!(bi_join_north(&a, &u, &u).unwrap(), u);
        assert_eq!(bi_join_east(&a, &u, &u).unwrap(), u);
    }

    #[test]
    fn plus_must_match_final_lower_cluster() {
        let a = analysis("F p");
        let high = cluster_with(&a, "F p", false);
        let low = (0..a.clusters.len()).find(|&c| c != high).unwrap();
        let m = Rect {
            n: Some(BiTrace::single(low, high)),
            ..BiBoundary::open(high, high)
        };
        assert!(m
            .violations(&a)
            .contains(&"order: + is the final lower cluster of N/E"));
    }

    #[test]
    fn future_defects_through_an_interpolant() {
        let a = analysis("F p");
        let c = (0..a.clusters.len())
            .find(|&c| a.holds(Item::Cluster(c), a.root()))
            .unwrap();
        let m = Rect {
            n: Some(BiTrace::single(c, c)),
            ..BiBoundary::open(c, c)
        };
        assert!(m.validate(&a), "{:?}", m.violations(&a));
    }

    #[test]
    fn defect_needs_an_exit() {
        let a = analysis("G F p");
        let c = (0..a.clusters.len())
            .find(|&c| a.defects_of(Item::Cluster(c), Polarity::Future).count() > 0)
            .unwrap();
        assert_eq!(BiBoundary::open(c, c).violations(&a), vec!["defects: future of +"]);
        // An exit through N into a cluster with no F formulas discharges it.
        let top = cluster_with(&a, "F p", false);
        let m = Rect {
            n: Some(BiTrace::single(c, top)),
            ..BiBoundary::open(c, c)
        };
        assert!(m.validate(&a), "{:?}", m.violations(&a));
    }

    #[test]
    fn shuffle_with_a_point() {
        let a = analysis("p");
        let open = BiBoundary::open(0, 0);
        let u = BiBoundary::uniform(0, a.mcs[0]);
        assert!(check_bi_shuffle(&a, &open, &[Piece::Point(a.mcs[0]), Piece::Map(u.clone())], 2).is_ok());
        assert_eq!(
            check_bi_shuffle(&a, &open, &[Piece::Map(u)], 2),
            Err("no one-point part")
        );
    }

    #[test]
    fn limit_of_uniform_quadrants() {
        let a = analysis("p");
        let m = a.mcs[0];
        let u = BiBoundary::uniform(0, m);
        let e = || Some(BiTrace::single(0, 0));
        let q0 = Rect { s: e(), e: e(), r: Some(m), ..BiBoundary::open(0, 0) };
        let q1 = Rect { w: e(), s: e(), e: e(), b: Some(m), r: Some(m), ..BiBoundary::open(0, 0) };
        let q2 = Rect { n: e(), s: e(), e: e(), r: Some(m), t: Some(m), ..BiBoundary::open(0, 0) };
        let star = BiBoundary::open(0, 0);
        assert_eq!(check_bi_limit_se(&a, &star, &q0, &q1, &q2, &u), Ok(()));
        let mut bad = star.clone();
        bad.plus = 1;
        assert_eq!(check_bi_limit_se(&a, &bad, &q0, &q1, &q2, &u), Err("agreement"));
    }
}

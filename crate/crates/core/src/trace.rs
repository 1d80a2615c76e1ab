//! Traces along time-like lines and bi-traces along light-lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcs::{Analysis, Defect, Item, Mcs, Polarity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace has {clusters} clusters but {links} linking MCSs")]
    Shape { clusters: usize, links: usize },
    #[error("cluster c{0} repeats")]
    Duplicate(usize),
    #[error("order violated between positions {0} and {1}")]
    Order(usize, usize),
    #[error("join seam is out of order")]
    Seam,
}

/// `(c0, m0, c1, ..., m(k-1), ck)`: distinct clusters with linking MCSs,
/// ordered by `<~`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trace {
    pub clusters: Vec<usize>,
    pub links: Vec<Mcs>,
}

impl Trace {
    pub fn single(c: usize) -> Self {
        Trace {
            clusters: vec![c],
            links: Vec::new(),
        }
    }

    pub fn new(clusters: Vec<usize>, links: Vec<Mcs>) -> Self {
        Trace { clusters, links }
    }

    pub fn initial(&self) -> usize {
        self.clusters[0]
    }

    pub fn last(&self) -> usize {
        *self.clusters.last().expect("trace has a cluster")
    }

    pub fn is_single(&self) -> bool {
        self.links.is_empty()
    }

    /// Elements in order, clusters and links alternating.
    pub fn items(&self) -> impl Iterator<Item = Item> + '_ {
        self.clusters.iter().enumerate().flat_map(move |(i, &c)| {
            std::iter::once(Item::Cluster(c)).chain(self.links.get(i).map(|&m| Item::Mcs(m)))
        })
    }

    pub fn validate(&self, a: &Analysis) -> Result<(), TraceError> {
        if self.clusters.is_empty() || self.links.len() + 1 != self.clusters.len() {
            return Err(TraceError::Shape {
                clusters: self.clusters.len(),
                links: self.links.len(),
            });
        }
        let mut seen = vec![false; a.clusters.len()];
        for &c in &self.clusters {
            if std::mem::replace(&mut seen[c], true) {
                return Err(TraceError::Duplicate(c));
            }
        }
        let items: Vec<Item> = self.items().collect();
        for i in 1..items.len() {
            if !a.le(items[i - 1], items[i]) {
                return Err(TraceError::Order(i - 1, i));
            }
        }
        Ok(())
    }

    /// `t + m + t'`, identifying the seam clusters when they coincide.
    pub fn join(a: &Analysis, t: &Trace, m: Mcs, u: &Trace) -> Result<Trace, TraceError> {
        let mut clusters = t.clusters.clone();
        let mut links = t.links.clone();
        if t.last() == u.initial() {
            links.extend_from_slice(&u.links);
            clusters.extend_from_slice(&u.clusters[1..]);
        } else {
            if !a.le(Item::Cluster(t.last()), Item::Mcs(m))
                || !a.le(Item::Mcs(m), Item::Cluster(u.initial()))
            {
                return Err(TraceError::Seam);
            }
            links.push(m);
            links.extend_from_slice(&u.links);
            clusters.extend_from_slice(&u.clusters);
        }
        let out = Trace { clusters, links };
        out.validate(a)?;
        Ok(out)
    }

    /// Future defects of the final cluster plus future defects of any
    /// element not passed up to its successor; dually for the past.
    pub fn defects(&self, a: &Analysis) -> Vec<Defect> {
        let items: Vec<Item> = self.items().collect();
        let mut out: Vec<Defect> = Vec::new();
        let mut push = |d: Defect| {
            if !out.contains(&d) {
                out.push(d);
            }
        };
        let n = items.len();
        for (i, &x) in items.iter().enumerate() {
            for d in a.defects_of(x, Polarity::Future) {
                if i + 1 == n || !a.discharges(d, items[i + 1]) {
                    push(d);
                }
            }
            for d in a.defects_of(x, Polarity::Past) {
                if i == 0 || !a.discharges(d, items[i - 1]) {
                    push(d);
                }
            }
        }
        out.sort();
        out
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.items().map(|x| x.to_string()).collect();
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bi-trace condition ({clause}) fails at position {index}")]
pub struct BiTraceError {
    pub clause: &'static str,
    pub index: usize,
}

/// Lower and upper cluster sequences along a light-line, separated by
/// boundary MCSs: pair `i` is `(lower[i], upper[i])`, and `bounds[i]` sits
/// between pairs `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BiTrace {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub bounds: Vec<Mcs>,
}

impl BiTrace {
    pub fn single(lower: usize, upper: usize) -> Self {
        BiTrace {
            lower: vec![lower],
            upper: vec![upper],
            bounds: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn pair(&self, i: usize) -> (usize, usize) {
        (self.lower[i], self.upper[i])
    }

    pub fn first(&self) -> (usize, usize) {
        self.pair(0)
    }

    pub fn last(&self) -> (usize, usize) {
        self.pair(self.len() - 1)
    }

    /// Every lower cluster equals `c`.
    pub fn lower_constant(&self, c: usize) -> bool {
        self.lower.iter().all(|&x| x == c)
    }

    pub fn validate(&self, a: &Analysis) -> Result<(), BiTraceError> {
        let n = self.lower.len();
        let fail = |clause, index| Err(BiTraceError { clause, index });
        if n == 0 || self.upper.len() != n || self.bounds.len() + 1 != n {
            return fail("shape", 0);
        }
        for i in 0..n {
            let (lo, hi) = self.pair(i);
            if !a.cluster_le(lo, hi) {
                return fail("i", i);
            }
            if i + 1 < n {
                if self.pair(i + 1) == (lo, hi) {
                    return fail("i", i);
                }
                if !a.cluster_le(lo, self.lower[i + 1]) || !a.cluster_le(hi, self.upper[i + 1]) {
                    return fail("order", i);
                }
            }
        }
        for (i, &b) in self.bounds.iter().enumerate() {
            let (lo, hi) = (Item::Cluster(self.lower[i]), Item::Cluster(self.upper[i + 1]));
            if !a.le(lo, Item::Mcs(b)) || !a.le(Item::Mcs(b), hi) {
                return fail("ii", i);
            }
        }
        for i in 0..n {
            if !a.interpolant_exists(self.lower[i], self.upper[i]) {
                return fail("iii", i);
            }
        }
        for (i, &b) in self.bounds.iter().enumerate() {
            let up = a.all_pass(Item::Mcs(b), Polarity::Future, Item::Cluster(self.upper[i + 1]));
            let down = a.all_pass(Item::Mcs(b), Polarity::Past, Item::Cluster(self.lower[i]));
            if !up || !down {
                return fail("iv", i);
            }
        }
        Ok(())
    }

    /// `bt + b + bt'`: identical seam pairs merge and `b` is dropped,
    /// otherwise `b` becomes a boundary MCS.
    pub fn join(a: &Analysis, bt: &BiTrace, b: Mcs, bu: &BiTrace) -> Result<BiTrace, BiTraceError> {
        let mut out = bt.clone();
        if bt.last() == bu.first() {
            out.lower.extend_from_slice(&bu.lower[1..]);
            out.upper.extend_from_slice(&bu.upper[1..]);
        } else {
            out.bounds.push(b);
            out.lower.extend_from_slice(&bu.lower);
            out.upper.extend_from_slice(&bu.upper);
        }
        out.bounds.extend_from_slice(&bu.bounds);
        out.validate(a)?;
        Ok(out)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("(");
        for i in 0..self.len() {
            if i > 0 {
                s.push_str(&format!(", {}, ", Item::Mcs(self.bounds[i - 1])));
            }
            s.push_str(&format!("c{}/c{}", self.lower[i], self.upper[i]));
        }
        s.push(')');
        s
    }
}

/// Every valid trace, in lexicographic order of construction, or `None`
/// once more than `cap` have been produced.
pub fn enumerate_traces(a: &Analysis, cap: usize) -> Option<Vec<Trace>> {
    fn extend(a: &Analysis, t: &mut Trace, out: &mut Vec<Trace>, cap: usize) -> bool {
        out.push(t.clone());
        if out.len() > cap {
            return false;
        }
        let last = Item::Cluster(t.last());
        for &m in &a.mcs {
            if !a.le(last, Item::Mcs(m)) {
                continue;
            }
            for c in 0..a.clusters.len() {
                if t.clusters.contains(&c) || !a.le(Item::Mcs(m), Item::Cluster(c)) {
                    continue;
                }
                t.clusters.push(c);
                t.links.push(m);
                let ok = extend(a, t, out, cap);
                t.clusters.pop();
                t.links.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    let mut out = Vec::new();
    for c in 0..a.clusters.len() {
        if !extend(a, &mut Trace::single(c), &mut out, cap) {
            return None;
        }
    }
    Some(out)
}

/// Every valid bi-trace, or `None` once more than `cap` have been produced.
pub fn enumerate_bitraces(a: &Analysis, cap: usize) -> Option<Vec<BiTrace>> {
    let n = a.clusters.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|lo| (0..n).map(move |hi| (lo, hi)))
        .filter(|&(lo, hi)| a.cluster_le(lo, hi) && a.interpolant_exists(lo, hi))
        .collect();
    fn extend(a: &Analysis, pairs: &[(usize, usize)], t: &mut BiTrace, out: &mut Vec<BiTrace>, cap: usize) -> bool {
        out.push(t.clone());
        if out.len() > cap {
            return false;
        }
        let (lo, hi) = t.last();
        for &(lo2, hi2) in pairs {
            if (lo2, hi2) == (lo, hi) || !a.cluster_le(lo, lo2) || !a.cluster_le(hi, hi2) {
                continue;
            }
            for &b in &a.mcs {
                let bi = Item::Mcs(b);
                if !a.le(Item::Cluster(lo), bi)
                    || !a.le(bi, Item::Cluster(hi2))
                    || !a.all_pass(bi, Polarity::Future, Item::Cluster(hi2))
                    || !a.all_pass(bi, Polarity::Past, Item::Cluster(lo))
                {
                    continue;
                }
                t.lower.push(lo2);
                t.upper.push(hi2);
                t.bounds.push(b);
                let ok = extend(a, pairs, t, out, cap);
                t.lower.pop();
                t.upper.pop();
                t.bounds.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    let mut out = Vec::new();
    for &(lo, hi) in &pairs {
        if !extend(a, &pairs, &mut BiTrace::single(lo, hi), &mut out, cap) {
            return None;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcs::Lit;
    use crate::Formula;

    fn analysis(s: &str) -> Analysis {
        Analysis::new(&Formula::parse(s).unwrap()).unwrap()
    }

    fn find(a: &Analysis, want: &[(&str, bool)]) -> Mcs {
        let lits: Vec<Lit> = want
            .iter()
            .map(|(f, pos)| {
                let l = a.closure.lookup(&Formula::parse(f).unwrap()).unwrap();
                if *pos {
                    l
                } else {
                    l.neg()
                }
            })
            .collect();
        *a.mcs
            .iter()
            .find(|m| lits.iter().all(|&l| m.contains(l)))
            .unwrap()
    }

    /// All cluster/MCS sequences up to the chain bound, filtered by the
    /// validator.
    fn brute_force_traces(a: &Analysis) -> usize {
        let n = a.clusters.len();
        let mut count = 0;
        let mut frontier: Vec<Trace> = (0..n).map(Trace::single).collect();
        while !frontier.is_empty() {
            count += frontier.iter().filter(|t| t.validate(a).is_ok()).count();
            let mut next = Vec::new();
            for t in &frontier {
                if t.clusters.len() > n {
                    continue;
                }
                for &m in &a.mcs {
                    for c in 0..n {
                        let mut u = t.clone();
                        u.links.push(m);
                        u.clusters.push(c);
                        if u.clusters.len() <= n {
                            next.push(u);
                        }
                    }
                }
            }
            frontier = next;
        }
        count
    }

    #[test]
    fn trace_counts_match_brute_force() {
        for (f, want) in [("G p & ~p", 6), ("p", 1), ("F p", 6), ("H p & q", 0)] {
            let a = analysis(f);
            let ts = enumerate_traces(&a, 1_000_000).unwrap();
            assert!(ts.iter().all(|t| t.validate(&a).is_ok()));
            assert_eq!(ts.len(), brute_force_traces(&a), "{f}");
            if want > 0 {
                assert_eq!(ts.len(), want, "{f}");
            }
        }
        assert!(enumerate_traces(&analysis("G p & ~p"), 3).is_none());
    }

    #[test]
    fn bitraces_validate() {
        for f in ["F p", "G p & ~p", "P H p & ~H P p"] {
            let a = analysis(f);
            let ts = enumerate_bitraces(&a, 1_000_000).unwrap();
            assert!(!ts.is_empty());
            for t in &ts {
                assert_eq!(t.validate(&a), Ok(()), "{f}: {}", t.render());
            }
        }
    }

    #[test]
    fn join_identifies_equal_seam() {
        let a = analysis("F p");
        let m = find(&a, &[("F p", true), ("p", true)]);
        let c = a.cluster_of(m).unwrap();
        let t = Trace::join(&a, &Trace::single(c), m, &Trace::single(c)).unwrap();
        assert_eq!(t, Trace::single(c));
    }

    #[test]
    fn join_concatenates_distinct_clusters() {
        let a = analysis("F p");
        let low = a.cluster_of(find(&a, &[("F p", true), ("p", true)])).unwrap();
        let high = a.cluster_of(find(&a, &[("F p", false), ("p", false)])).unwrap();
        let m = find(&a, &[("F p", false), ("p", true)]);
        assert!(a.le(Item::Cluster(low), Item::Mcs(m)));
        let t = Trace::join(&a, &Trace::single(low), m, &Trace::single(high)).unwrap();
        assert_eq!(t.clusters, vec![low, high]);
        assert_eq!(t.links, vec![m]);
        assert!(t.validate(&a).is_ok());
        assert!(Trace::join(&a, &Trace::single(high), m, &Trace::single(low)).is_err());
    }

    #[test]
    fn join_rejects_repeated_cluster() {
        let a = analysis("F p");
        let low = a.cluster_of(find(&a, &[("F p", true), ("p", true)])).unwrap();
        let high = a.cluster_of(find(&a, &[("F p", false), ("p", false)])).unwrap();
        let m = find(&a, &[("F p", false), ("p", true)]);
        let t = Trace::new(vec![low, high], vec![m]);
        assert_eq!(
            Trace::join(&a, &t, m, &Trace::single(low)),
            Err(TraceError::Seam)
        );
        let bad = Trace::new(vec![low, high, low], vec![m, m]);
        assert_eq!(bad.validate(&a), Err(TraceError::Duplicate(low)));
    }

    #[test]
    fn trace_defects() {
        let a = analysis("F p");
        let fp = a.closure.lookup(&Formula::parse("F p").unwrap()).unwrap().idx;
        let low = a.cluster_of(find(&a, &[("F p", true), ("p", true)])).unwrap();
        let high = a.cluster_of(find(&a, &[("F p", false), ("p", false)])).unwrap();
        assert!(Trace::single(low).defects(&a).is_empty());
        let m = find(&a, &[("F p", false), ("p", true)]);
        let t = Trace::new(vec![low, high], vec![m]);
        assert!(t.defects(&a).is_empty());
        let mf = find(&a, &[("F p", true), ("p", false)]);
        let stuck = Trace::new(vec![low, high], vec![mf]);
        assert!(stuck.validate(&a).is_ok());
        assert_eq!(
            stuck.defects(&a),
            vec![Defect {
                polarity: Polarity::Future,
                idx: fp
            }]
        );
    }

    #[test]
    fn trace_defects_of_final_cluster() {
        let a = analysis("F p & G ~q");
        let c = a
            .clusters
            .iter()
            .find(|c| !a.defects_of(Item::Cluster(c.id), Polarity::Future).collect::<Vec<_>>().is_empty())
            .map(|c| c.id);
        if let Some(c) = c {
            let want: Vec<Defect> = a.defects(Item::Cluster(c));
            assert_eq!(Trace::single(c).defects(&a), want);
        }
        let plain = analysis("p & q");
        for c in &plain.clusters {
            assert!(Trace::single(c.id).defects(&plain).is_empty());
        }
    }

    #[test]
    fn bitrace_validation() {
        let a = analysis("p");
        let c = 0;
        assert!(BiTrace::single(c, c).validate(&a).is_ok());
        let repeated = BiTrace {
            lower: vec![c, c],
            upper: vec![c, c],
            bounds: vec![a.mcs[0]],
        };
        assert_eq!(repeated.validate(&a).unwrap_err().clause, "i");

        let f = analysis("F p");
        let c1 = f.cluster_of(find(&f, &[("F p", true), ("p", true)])).unwrap();
        assert!(BiTrace::single(c1, c1).validate(&f).is_ok());
    }

    #[test]
    fn bitrace_join_seam() {
        let f = analysis("F p");
        let low = f.cluster_of(find(&f, &[("F p", true), ("p", true)])).unwrap();
        let high = f.cluster_of(find(&f, &[("F p", false), ("p", false)])).unwrap();
        let m = find(&f, &[("F p", false), ("p", true)]);
        let same = BiTrace::join(&f, &BiTrace::single(low, low), m, &BiTrace::single(low, low)).unwrap();
        assert_eq!(same, BiTrace::single(low, low));
        let up = BiTrace::join(&f, &BiTrace::single(low, low), m, &BiTrace::single(high, high)).unwrap();
        assert_eq!(up.bounds, vec![m]);
        assert_eq!(up.len(), 2);
    }
}

//! Deciding satisfiability over the four frames.
//!
//! The default strategy tries, in order: a closure in which no MCS contains
//! the formula; the envelope refutation; the witness search; and finally
//! saturation, which is only practical for very small closures. The
//! `saturate` strategy runs saturation alone.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::derivation::{Derivation, Frame, Witness};
use crate::fabricate::{fabricate_all, fabricate_triangles};
use crate::formula::Formula;
use crate::mcs::{Analysis, Item, Mcs, Polarity};
use crate::search::{search, Budget};
use crate::trace::{BiTrace, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Search,
    Saturate,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "search" => Ok(Strategy::Search),
            "saturate" => Ok(Strategy::Saturate),
            _ => Err(format!("unknown strategy {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub strategy: Strategy,
    /// Cap on interned maps during saturation.
    pub max_maps: usize,
    /// Node budget for the witness search.
    pub search_nodes: u64,
    /// Node budget for saturation.
    pub saturation_nodes: u64,
    pub max_seconds: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            strategy: Strategy::Search,
            max_maps: 5_000_000,
            search_nodes: 20_000_000,
            saturation_nodes: 20_000_000,
            max_seconds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsatReason {
    /// No MCS of the closure contains the formula.
    NoMcs,
    /// No tail-consistent set of MCSs contains the formula.
    Envelope,
    /// Saturation finished without an open map in which the formula occurs.
    Saturation,
}

impl fmt::Display for UnsatReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnsatReason::NoMcs => "no MCS contains the formula",
            UnsatReason::Envelope => "envelope refutation",
            UnsatReason::Saturation => "saturation reached a fixed point",
        })
    }
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Sat(Box<Witness>),
    Unsat(UnsatReason),
    /// Resources ran out; the string says which.
    Unknown(String),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub mcs: usize,
    pub clusters: usize,
    /// Interned maps when saturation ran, otherwise nodes of the witness.
    pub maps: usize,
    pub millis: u64,
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub verdict: Verdict,
    pub stats: Stats,
}

/// Decides satisfiability of `phi` over `frame`.
pub fn decide(phi: &Formula, frame: Frame, config: &Config) -> Decision {
    let start = Instant::now();
    let deadline = config.max_seconds.map(|s| start + Duration::from_secs_f64(s.max(0.0)));
    let working = frame.working_formula(phi);
    let a = match Analysis::new(&working) {
        Ok(a) => a,
        Err(e) => {
            return Decision {
                verdict: Verdict::Unknown(e.to_string()),
                stats: Stats {
                    millis: start.elapsed().as_millis() as u64,
                    ..Stats::default()
                },
            }
        }
    };
    let mut stats = Stats {
        mcs: a.mcs.len(),
        clusters: a.clusters.len(),
        ..Stats::default()
    };
    let verdict = run(phi, frame, config, &a, deadline, &mut stats);
    stats.millis = start.elapsed().as_millis() as u64;
    log::info!("{frame} {phi}: {verdict:?} with {stats:?}");
    Decision { verdict, stats }
}

fn run(
    phi: &Formula,
    frame: Frame,
    config: &Config,
    a: &Analysis,
    deadline: Option<Instant>,
    stats: &mut Stats,
) -> Verdict {
    let root = a.root();
    if !a.mcs.iter().any(|m| m.contains(root)) {
        return Verdict::Unsat(UnsatReason::NoMcs);
    }
    let sat = |d: Derivation, stats: &mut Stats, maps: Option<usize>| {
        stats.maps = maps.unwrap_or_else(|| d.size());
        Verdict::Sat(Box::new(Witness {
            formula: phi.to_string(),
            frame,
            derivation: d,
        }))
    };
    if config.strategy == Strategy::Search {
        if envelope_refutes(a, frame) {
            return Verdict::Unsat(UnsatReason::Envelope);
        }
        let mut budget = Budget::new(config.search_nodes, deadline);
        if let Some(d) = search(a, frame, &mut budget) {
            return sat(d, stats, None);
        }
        log::debug!("search gave up after {} nodes", budget.nodes());
    }
    let mut budget = Budget::new(config.saturation_nodes, deadline);
    let (witness, complete, maps) = match frame {
        Frame::Reflexive | Frame::Irreflexive => {
            let fab = fabricate_all::<Trace>(a, &mut budget, config.max_maps);
            (fab.witness(a), fab.complete, fab.len())
        }
        Frame::Strict => {
            let fab = fabricate_all::<BiTrace>(a, &mut budget, config.max_maps);
            (fab.witness(a), fab.complete, fab.len())
        }
        Frame::Interval => {
            let fab = fabricate_triangles(a, &mut budget, config.max_maps);
            (fab.witness(a), fab.complete, fab.len() + fab.rects.len())
        }
    };
    stats.maps = maps;
    match witness {
        Some(d) => sat(d, stats, Some(maps)),
        None if complete => Verdict::Unsat(UnsatReason::Saturation),
        None => Verdict::Unknown(format!(
            "resource limit: {maps} maps interned, {} nodes, search and saturation inconclusive",
            budget.nodes()
        )),
    }
}

/// Whether no model can realise the formula, judged by the sets of MCSs
/// a model realises.
///
/// Far enough towards the top-right every point of a model sees the same
/// future and past formulas, so some cluster `hi` without future cluster
/// defects lies above every realised MCS; dually a cluster `lo` below them
/// all except in the interval frame, which has no bottom. The realised set
/// is closed under witnesses of its defects, so it lies inside the largest
/// subset of `{m : lo <~ m <~ hi}` with that closure property. If for no
/// choice of `lo` and `hi` that subset meets both clusters and contains the
/// formula, the formula is unsatisfiable.
pub fn envelope_refutes(a: &Analysis, frame: Frame) -> bool {
    let root = a.root();
    let n = a.clusters.len();
    let no_defects = |c: usize, pol| a.defects_of(Item::Cluster(c), pol).next().is_none();
    let bottoms: Vec<Option<usize>> = if frame == Frame::Interval {
        vec![None]
    } else {
        (0..n).filter(|&c| no_defects(c, Polarity::Past)).map(Some).collect()
    };
    for hi in (0..n).filter(|&c| no_defects(c, Polarity::Future)) {
        for &lo in &bottoms {
            if lo.is_some_and(|lo| !a.cluster_le(lo, hi)) {
                continue;
            }
            let mut alive: Vec<Mcs> = a
                .mcs
                .iter()
                .copied()
                .filter(|&m| {
                    lo.is_none_or(|lo| a.le(Item::Cluster(lo), Item::Mcs(m))) && a.le(Item::Mcs(m), Item::Cluster(hi))
                })
                .collect();
            loop {
                let before = alive.len();
                let keep: Vec<bool> = alive
                    .iter()
                    .map(|&m| {
                        let mi = Item::Mcs(m);
                        a.defects_of(mi, Polarity::Future).all(|d| {
                            alive
                                .iter()
                                .any(|&t| a.lesssim(m, t) && t.contains(a.closure.temporal_arg(d.idx)))
                        }) && a.defects_of(mi, Polarity::Past).all(|d| {
                            alive
                                .iter()
                                .any(|&t| a.lesssim(t, m) && t.contains(a.closure.temporal_arg(d.idx)))
                        })
                    })
                    .collect();
                let mut k = keep.iter();
                alive.retain(|_| *k.next().unwrap());
                if alive.len() == before {
                    break;
                }
            }
            let meets = |c: usize| alive.iter().any(|&m| a.cluster_of(m) == Some(c));
            if meets(hi) && lo.is_none_or(meets) && alive.iter().any(|m| m.contains(root)) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decide_str(s: &str, frame: Frame) -> Verdict {
        decide(&Formula::parse(s).unwrap(), frame, &Config::default()).verdict
    }

    #[test]
    fn refutations() {
        for frame in Frame::ALL {
            assert!(decide_str("F p & G ~p", frame).is_unsat(), "{frame}");
        }
        assert!(decide_str("~(P H p -> H P p)", Frame::Strict).is_unsat());
        assert!(decide_str("G p & ~p", Frame::Reflexive).is_unsat());
        assert!(decide_str("F G p & F G ~p", Frame::Reflexive).is_unsat());
    }

    #[test]
    fn witnesses_revalidate() {
        for (s, frame) in [
            ("G p & ~p", Frame::Irreflexive),
            ("G p & ~p", Frame::Strict),
            ("~(P H p -> H P p)", Frame::Interval),
            ("F p & F q & G((p -> G ~q) & (q -> G ~p))", Frame::Irreflexive),
        ] {
            match decide_str(s, frame) {
                Verdict::Sat(w) => w.revalidate().unwrap(),
                v => panic!("{s} over {frame}: {v:?}"),
            }
        }
    }

    #[test]
    fn saturation_strategy() {
        let config = Config {
            strategy: Strategy::Saturate,
            ..Config::default()
        };
        let d = decide(&Formula::parse("p").unwrap(), Frame::Irreflexive, &config);
        assert!(d.verdict.is_sat());
        assert!(d.stats.maps > 1);
    }

    #[test]
    fn no_mcs() {
        assert!(matches!(decide_str("p & ~p", Frame::Strict), Verdict::Unsat(UnsatReason::NoMcs)));
    }
}

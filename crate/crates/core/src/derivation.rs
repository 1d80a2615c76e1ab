//! Derivation trees certifying that a map is fabricated, their JSON form,
//! and a node-by-node revalidator that trusts nothing but the formula.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::bi_boundary::{check_bi_limit_ne, check_bi_limit_se, check_bi_shuffle, BiBoundary};
use crate::boundary::{
    check_limit_ne, check_limit_se, check_shuffle, join_east, join_north, BoundaryMap, Piece, Rect,
};
use crate::mcs::{Analysis, Lit, Mcs};
use crate::trace::{BiTrace, Trace};
use crate::triangle::{
    check_triangle_limit_nw, check_triangle_limit_se, check_triangle_shuffle, triangle_join, Openness,
    Triangle,
};
use crate::Formula;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// `(R,<=) x (R,<=)`.
    Reflexive,
    /// `(R,<=) x (R,<=)` with the accessibility relation made irreflexive.
    Irreflexive,
    /// `(R,<) x (R,<)`.
    Strict,
    /// Real intervals under strict *during*.
    Interval,
}

impl Frame {
    pub const ALL: [Frame; 4] = [Frame::Reflexive, Frame::Irreflexive, Frame::Strict, Frame::Interval];

    pub fn name(self) -> &'static str {
        match self {
            Frame::Reflexive => "reflexive",
            Frame::Irreflexive => "irreflexive",
            Frame::Strict => "strict",
            Frame::Interval => "interval",
        }
    }

    /// The formula whose closure the decision procedure works over.
    pub fn working_formula(self, phi: &Formula) -> Formula {
        match self {
            Frame::Reflexive => phi.reflexive_reduction(),
            _ => phi.clone(),
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Frame::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown frame `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Simple,
    OnePoint,
    JoinN,
    JoinE,
    LimitSe,
    LimitNe,
    Shuffle,
    TriSimple,
    TriJoin,
    TriLimitSe,
    TriLimitNw,
    TriShuffle,
}

/// What a derivation node fabricates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Boundary(BoundaryMap),
    Bi(BiBoundary),
    Triangle(Triangle),
    Point(Mcs),
}

impl Label {
    pub fn occurs(&self, a: &Analysis, lit: Lit) -> bool {
        match self {
            Label::Boundary(m) => m.occurs(a, lit),
            Label::Bi(m) => m.occurs(a, lit),
            Label::Triangle(t) => t.occurs(a, lit),
            Label::Point(m) => m.contains(lit),
        }
    }

    pub fn is_open(&self) -> bool {
        match self {
            Label::Boundary(m) => m.domain().is_open(),
            Label::Bi(m) => m.domain().is_open(),
            Label::Triangle(t) => t.openness() == Some(Openness::Open),
            Label::Point(_) => false,
        }
    }

    fn clusters_and_mcs(&self) -> (Vec<usize>, Vec<Mcs>) {
        fn rect_parts<E: Clone>(m: &Rect<E>, edge: impl Fn(&E, &mut Vec<usize>, &mut Vec<Mcs>)) -> (Vec<usize>, Vec<Mcs>) {
            let mut cs = vec![m.minus, m.plus];
            let mut ms: Vec<Mcs> = m.corners().collect();
            for e in m.edges() {
                edge(e, &mut cs, &mut ms);
            }
            (cs, ms)
        }
        let trace = |t: &Trace, cs: &mut Vec<usize>, ms: &mut Vec<Mcs>| {
            cs.extend(&t.clusters);
            ms.extend(&t.links);
        };
        let bitrace = |t: &BiTrace, cs: &mut Vec<usize>, ms: &mut Vec<Mcs>| {
            cs.extend(&t.lower);
            cs.extend(&t.upper);
            ms.extend(&t.bounds);
        };
        match self {
            Label::Boundary(m) => rect_parts(m, trace),
            Label::Bi(m) => rect_parts(m, bitrace),
            Label::Triangle(t) => {
                let mut cs = vec![t.plus];
                let mut ms: Vec<Mcs> = t.t.into_iter().collect();
                for e in [&t.n, &t.e].into_iter().flatten() {
                    bitrace(e, &mut cs, &mut ms);
                }
                (cs, ms)
            }
            Label::Point(m) => (Vec::new(), vec![*m]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub kind: Kind,
    pub map: Label,
    pub children: Vec<Derivation>,
    pub phi_occurs: bool,
}

impl Derivation {
    /// A leaf, with `phi_occurs` computed from the label.
    pub fn leaf(a: &Analysis, kind: Kind, map: Label) -> Self {
        let phi_occurs = map.occurs(a, a.root());
        Derivation {
            kind,
            map,
            children: Vec::new(),
            phi_occurs,
        }
    }

    /// An inner node, with `phi_occurs` inherited from the children.
    pub fn node(a: &Analysis, kind: Kind, map: Label, children: Vec<Derivation>) -> Self {
        let phi_occurs = map.occurs(a, a.root()) || children.iter().any(|c| c.phi_occurs);
        Derivation {
            kind,
            map,
            children,
            phi_occurs,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Derivation::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Derivation::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("node {path}: {reason}")]
pub struct RevalidationError {
    /// Child indices from the root, dot separated.
    pub path: String,
    pub reason: String,
}

/// Checks every node of `d` against its children, and that the root is an
/// open map in which the formula occurs.
pub fn revalidate(a: &Analysis, frame: Frame, d: &Derivation) -> Result<(), RevalidationError> {
    let fail = |reason: &str| RevalidationError {
        path: "root".into(),
        reason: reason.into(),
    };
    let expected = match (frame, &d.map) {
        (Frame::Reflexive | Frame::Irreflexive, Label::Boundary(_)) => true,
        (Frame::Strict, Label::Bi(_)) => true,
        (Frame::Interval, Label::Triangle(_)) => true,
        _ => false,
    };
    if !expected {
        return Err(fail("root label does not match the frame"));
    }
    if !d.map.is_open() {
        return Err(fail("root map is not open"));
    }
    if !d.phi_occurs {
        return Err(fail("formula does not occur"));
    }
    let known: HashSet<Mcs> = a.mcs.iter().copied().collect();
    check_node(a, &known, d, "root")
}

fn check_node(a: &Analysis, known: &HashSet<Mcs>, d: &Derivation, path: &str) -> Result<(), RevalidationError> {
    let fail = |reason: String| RevalidationError {
        path: path.to_string(),
        reason,
    };
    let (cs, ms) = d.map.clusters_and_mcs();
    if let Some(c) = cs.iter().find(|&&c| c >= a.clusters.len()) {
        return Err(fail(format!("unknown cluster c{c}")));
    }
    if let Some(m) = ms.iter().find(|m| !known.contains(m)) {
        return Err(fail(format!("{:x} is not an MCS", m.0)));
    }
    for (i, c) in d.children.iter().enumerate() {
        check_node(a, known, c, &format!("{path}.{i}"))?;
    }
    let occurs = d.map.occurs(a, a.root()) || d.children.iter().any(|c| c.phi_occurs);
    if d.phi_occurs != occurs {
        return Err(fail("phi_occurs flag is wrong".into()));
    }
    local_check(a, d).map_err(|r| fail(format!("{:?}: {r}", d.kind)))
}

fn boundary(d: &Derivation) -> Result<&BoundaryMap, String> {
    match &d.map {
        Label::Boundary(m) => Ok(m),
        _ => Err("expected a boundary map".into()),
    }
}

fn bi(d: &Derivation) -> Result<&BiBoundary, String> {
    match &d.map {
        Label::Bi(m) => Ok(m),
        _ => Err("expected a bi-boundary".into()),
    }
}

fn triangle(d: &Derivation) -> Result<&Triangle, String> {
    match &d.map {
        Label::Triangle(t) => Ok(t),
        _ => Err("expected a triangle".into()),
    }
}

fn arity(d: &Derivation, n: usize) -> Result<(), String> {
    if d.children.len() == n {
        Ok(())
    } else {
        Err(format!("expected {n} children, found {}", d.children.len()))
    }
}

fn local_check(a: &Analysis, d: &Derivation) -> Result<(), String> {
    let max_parts = a.formula.size();
    let ch = &d.children;
    match (d.kind, &d.map) {
        (Kind::Simple, Label::Boundary(m)) => {
            arity(d, 0)?;
            m.is_simple(a).then_some(()).ok_or("not simple".into())
        }
        (Kind::Simple, Label::Bi(m)) => {
            arity(d, 0)?;
            m.is_simple(a).then_some(()).ok_or("not simple".into())
        }
        (Kind::OnePoint, Label::Point(_)) => arity(d, 0),
        (Kind::JoinN | Kind::JoinE, Label::Boundary(m)) => {
            arity(d, 2)?;
            let (x, y) = (boundary(&ch[0])?, boundary(&ch[1])?);
            let joined = if d.kind == Kind::JoinN {
                join_north(a, x, y)
            } else {
                join_east(a, x, y)
            }
            .map_err(|e| e.to_string())?;
            if &joined != m {
                return Err("map is not the join of its children".into());
            }
            if !m.validate(a) {
                return Err(format!("join is not a boundary map: {:?}", m.violations(a)));
            }
            Ok(())
        }
        (Kind::JoinN | Kind::JoinE, Label::Bi(m)) => {
            arity(d, 2)?;
            let (x, y) = (bi(&ch[0])?, bi(&ch[1])?);
            let joined = if d.kind == Kind::JoinN {
                join_north(a, x, y)
            } else {
                join_east(a, x, y)
            }
            .map_err(|e| e.to_string())?;
            if &joined != m {
                return Err("map is not the join of its children".into());
            }
            if !m.validate(a) {
                return Err(format!("join is not a bi-boundary: {:?}", m.violations(a)));
            }
            Ok(())
        }
        (Kind::LimitSe | Kind::LimitNe, Label::Boundary(m)) => {
            arity(d, 4)?;
            let q = [boundary(&ch[0])?, boundary(&ch[1])?, boundary(&ch[2])?, boundary(&ch[3])?];
            let check = if d.kind == Kind::LimitSe { check_limit_se } else { check_limit_ne };
            check(a, m, q[0], q[1], q[2], q[3]).map_err(String::from)
        }
        (Kind::LimitSe | Kind::LimitNe, Label::Bi(m)) => {
            arity(d, 4)?;
            let q = [bi(&ch[0])?, bi(&ch[1])?, bi(&ch[2])?, bi(&ch[3])?];
            let check = if d.kind == Kind::LimitSe { check_bi_limit_se } else { check_bi_limit_ne };
            check(a, m, q[0], q[1], q[2], q[3]).map_err(String::from)
        }
        (Kind::Shuffle, Label::Boundary(m)) => {
            let parts = ch
                .iter()
                .map(|c| match &c.map {
                    Label::Point(p) => Ok(Piece::Point(*p)),
                    Label::Boundary(b) => Ok(Piece::Map(b.clone())),
                    _ => Err("shuffle part of the wrong kind".to_string()),
                })
                .collect::<Result<Vec<_>, _>>()?;
            check_shuffle(a, m, &parts, max_parts).map_err(String::from)
        }
        (Kind::Shuffle, Label::Bi(m)) => {
            let parts = ch
                .iter()
                .map(|c| match &c.map {
                    Label::Point(p) => Ok(Piece::Point(*p)),
                    Label::Bi(b) => Ok(Piece::Map(b.clone())),
                    _ => Err("shuffle part of the wrong kind".to_string()),
                })
                .collect::<Result<Vec<_>, _>>()?;
            check_bi_shuffle(a, m, &parts, max_parts).map_err(String::from)
        }
        (Kind::TriSimple, Label::Triangle(t)) => {
            arity(d, 0)?;
            t.is_simple(a).then_some(()).ok_or("not simple".into())
        }
        (Kind::TriJoin, Label::Triangle(t)) => {
            arity(d, 3)?;
            let joined = triangle_join(a, triangle(&ch[0])?, bi(&ch[1])?, triangle(&ch[2])?)
                .map_err(|e| e.to_string())?;
            if &joined != t {
                return Err("map is not the join of its children".into());
            }
            if !t.validate(a) {
                return Err(format!("join is not a triangle: {:?}", t.violations(a)));
            }
            Ok(())
        }
        (Kind::TriLimitSe | Kind::TriLimitNw, Label::Triangle(t)) => {
            arity(d, 3)?;
            let check = if d.kind == Kind::TriLimitSe {
                check_triangle_limit_se
            } else {
                check_triangle_limit_nw
            };
            check(a, t, triangle(&ch[0])?, bi(&ch[1])?, triangle(&ch[2])?).map_err(String::from)
        }
        (Kind::TriShuffle, Label::Triangle(t)) => {
            let parts = ch.iter().map(|c| triangle(c).cloned()).collect::<Result<Vec<_>, _>>()?;
            check_triangle_shuffle(a, t, &parts, max_parts).map_err(String::from)
        }
        _ => Err("node kind does not match its map".into()),
    }
}

#[derive(Serialize, Deserialize)]
struct Node {
    kind: Kind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    bi: bool,
    map: Value,
    phi_occurs: bool,
    #[serde(default)]
    children: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
struct PointLabels {
    b: Mcs,
    t: Mcs,
}

fn to_node(d: &Derivation) -> Node {
    let (map, bi) = match &d.map {
        Label::Boundary(m) => (serde_json::to_value(m), false),
        Label::Bi(m) => (serde_json::to_value(m), true),
        Label::Triangle(t) => (serde_json::to_value(t), false),
        Label::Point(m) => (serde_json::to_value(PointLabels { b: *m, t: *m }), false),
    };
    Node {
        kind: d.kind,
        bi,
        map: map.expect("labels serialize"),
        phi_occurs: d.phi_occurs,
        children: d.children.iter().map(to_node).collect(),
    }
}

fn from_node(n: Node) -> Result<Derivation, serde_json::Error> {
    let map = match n.kind {
        Kind::OnePoint => {
            let p: PointLabels = serde_json::from_value(n.map)?;
            if p.b != p.t {
                return Err(serde::de::Error::custom("one-point map with b != t"));
            }
            Label::Point(p.b)
        }
        Kind::TriSimple | Kind::TriJoin | Kind::TriLimitSe | Kind::TriLimitNw | Kind::TriShuffle => {
            Label::Triangle(serde_json::from_value(n.map)?)
        }
        _ if n.bi => Label::Bi(serde_json::from_value(n.map)?),
        _ => Label::Boundary(serde_json::from_value(n.map)?),
    };
    Ok(Derivation {
        kind: n.kind,
        map,
        phi_occurs: n.phi_occurs,
        children: n.children.into_iter().map(from_node).collect::<Result<_, _>>()?,
    })
}

impl Serialize for Derivation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        to_node(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Derivation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        from_node(Node::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// A self-contained satisfiability certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub formula: String,
    pub frame: Frame,
    pub derivation: Derivation,
}

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("bad witness document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad formula: {0}")]
    Formula(String),
    #[error(transparent)]
    Invalid(#[from] RevalidationError),
}

impl Witness {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WitnessError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Recomputes the closure analysis from the formula text and revalidates
    /// every node.
    pub fn revalidate(&self) -> Result<(), WitnessError> {
        let phi = Formula::parse(&self.formula).map_err(|e| WitnessError::Formula(e.to_string()))?;
        let a = Analysis::new(&self.frame.working_formula(&phi))
            .map_err(|e| WitnessError::Formula(e.to_string()))?;
        revalidate(&a, self.frame, &self.derivation)?;
        Ok(())
    }
}

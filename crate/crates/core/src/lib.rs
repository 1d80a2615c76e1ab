//! Decision procedures for propositional temporal logic over the
//! two-dimensional real frames `(R,<=)x(R,<=)`, its irreflexive variant,
//! `(R,<)x(R,<)`, and real intervals under strict *during*.
//!
//! The procedures work on finite summaries of rectangle and triangle
//! models ("boundary maps") and saturate them under join, limit and
//! shuffle combinators. A finite-grid model checker in [`oracle`] gives
//! an independent one-sided check.

pub mod bi_boundary;
pub mod boundary;
pub mod derivation;
pub mod fabricate;
pub mod formula;
pub mod fuzz;
pub mod mcs;
pub mod render;
pub mod oracle;
pub mod search;
pub mod solver;
pub mod trace;
pub mod triangle;

pub use formula::{Formula, ParseError};

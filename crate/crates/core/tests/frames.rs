use mltl::derivation::{Frame, Label, Witness};
use mltl::mcs::{Analysis, Item, Polarity};
use mltl::oracle::{grid_sat_search, Bounds, FrameClass};
use mltl::solver::{decide, Config, Verdict};
use mltl::Formula;

fn verdict(text: &str, frame: Frame) -> Verdict {
    decide(&Formula::parse(text).unwrap(), frame, &Config::default()).verdict
}

fn witness(text: &str, frame: Frame) -> Witness {
    match verdict(text, frame) {
        Verdict::Sat(w) => {
            w.revalidate().unwrap();
            *w
        }
        other => panic!("{text} on {frame}: {other:?}"),
    }
}

#[test]
fn irreflexive_examples() {
    witness("p", Frame::Irreflexive);
    assert!(verdict("F p & G ~p", Frame::Irreflexive).is_unsat());
    witness("G p & ~p", Frame::Irreflexive);
    assert!(grid_sat_search(&Formula::parse("G p & ~p").unwrap(), FrameClass::Strict, Bounds::default()).found());
}

#[test]
fn strict_examples() {
    witness("p", Frame::Strict);
    assert!(verdict("~(P H p -> H P p)", Frame::Strict).is_unsat());
    witness("G p & ~p", Frame::Strict);
}

#[test]
fn interval_examples() {
    witness("p", Frame::Interval);
    witness("~(P H p -> H P p)", Frame::Interval);
    witness("P q & ~q", Frame::Interval);
}

#[test]
fn open_triangle_verdicts_have_no_future_defects() {
    // Past defects are allowed: a shuffle passes them down to its parts.
    for text in ["p", "~(P H p -> H P p)", "P q & ~q"] {
        let w = witness(text, Frame::Interval);
        let phi = Formula::parse(text).unwrap();
        let a = Analysis::new(&Frame::Interval.working_formula(&phi)).unwrap();
        let Label::Triangle(t) = &w.derivation.map else {
            panic!("{text}: root is not a triangle");
        };
        assert!(w.derivation.map.is_open(), "{text}");
        assert_eq!(a.defects_of(Item::Cluster(t.plus), Polarity::Future).count(), 0, "{text}");
    }
}

/// Truth at the interval (x, y), with past meaning strict subintervals and
/// future strict superintervals, endpoints drawn from `0..n`.
fn during(phi: &Formula, n: i32, val: &dyn Fn(&str, i32, i32) -> bool, x: i32, y: i32) -> bool {
    let eval = |f: &Formula, x, y| during(f, n, val, x, y);
    let pairs = || (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)));
    match phi {
        Formula::Atom(s) => val(s, x, y),
        Formula::Not(f) => !eval(f, x, y),
        Formula::Or(f, g) => eval(f, x, y) || eval(g, x, y),
        Formula::And(f, g) => eval(f, x, y) && eval(g, x, y),
        Formula::Implies(f, g) => !eval(f, x, y) || eval(g, x, y),
        Formula::P(f) => pairs().any(|(a, b)| x < a && b < y && eval(f, a, b)),
        Formula::F(f) => pairs().any(|(a, b)| a < x && y < b && eval(f, a, b)),
    }
}

#[test]
fn a_two_interval_model_of_a_past_letter() {
    // q holds on (1, 2) only; the interval (0, 3) strictly contains it.
    let phi = Formula::parse("P q & ~q").unwrap();
    let val = |s: &str, x: i32, y: i32| s == "q" && (x, y) == (1, 2);
    assert!(during(&phi, 4, &val, 0, 3));
    assert!(!during(&phi, 4, &val, 1, 2));
    // Shared endpoints do not count as strict containment.
    assert!(!during(&phi, 4, &val, 1, 3));
    witness("P q & ~q", Frame::Interval);
}

#[test]
fn temporal_free_formulas_agree_across_frames() {
    for (text, sat) in [("p & ~p", false), ("(p | q) & ~p", true), ("(p -> q) & p & ~q", false)] {
        for frame in Frame::ALL {
            assert_eq!(verdict(text, frame).is_sat(), sat, "{text} on {frame}");
        }
    }
}

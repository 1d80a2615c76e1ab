//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use serde_json::json;

use mltl::derivation::{Frame, Witness};
use mltl::fuzz::{differential, formulas, letter_names, random_formula, FuzzConfig};
use mltl::mcs::{bit, enumerate_mcs, Analysis, ClosureSet, KtTableau, Lit};
use mltl::oracle::{grid_sat_search, Bounds, FrameClass};
use mltl::solver::{decide, Config, Strategy, Verdict};
use mltl::Formula;

const DENSITY: &str = "F p & F q & G((p -> G ~q) & (q -> G ~p))";
const STRETCH: &str = "F p0 & F p1 & G(((F p0 & F p1) -> F p2) & ((F p1 & F p2) -> F p0) & \
    ((F p0 & F p2) -> F p1) & (p0 -> G ~p1) & (p0 -> G ~p2) & (p1 -> G ~p0) & (p1 -> G ~p2) & \
    (p2 -> G ~p0) & (p2 -> G ~p1))";

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Mode {
    Sat,
    Valid,
}

/// Expected result strings, as the command line reports them.
const FACTS: &[(&str, Frame, Mode, &str)] = &[
    ("P H p -> H P p", Frame::Strict, Mode::Valid, "valid"),
    ("P H p -> H P p", Frame::Interval, Mode::Valid, "invalid"),
    ("G p -> p", Frame::Reflexive, Mode::Valid, "valid"),
    ("G p -> p", Frame::Irreflexive, Mode::Valid, "invalid"),
    ("G p -> p", Frame::Strict, Mode::Valid, "invalid"),
    ("F G p -> G F p", Frame::Reflexive, Mode::Valid, "valid"),
    ("F p & G ~p", Frame::Reflexive, Mode::Sat, "unsat"),
    ("F p & G ~p", Frame::Irreflexive, Mode::Sat, "unsat"),
    ("F p & G ~p", Frame::Strict, Mode::Sat, "unsat"),
    ("F p & G ~p", Frame::Interval, Mode::Sat, "unsat"),
    (DENSITY, Frame::Irreflexive, Mode::Sat, "sat"),
];

struct Outcome {
    result: &'static str,
    witness: Option<Witness>,
    json: serde_json::Value,
    elapsed: Duration,
}

fn run(text: &str, frame: Frame, mode: Mode, config: &Config) -> Outcome {
    let phi = Formula::parse(text).unwrap();
    let target = if mode == Mode::Valid { phi.negate() } else { phi.clone() };
    let start = Instant::now();
    let d = decide(&target, frame, config);
    let elapsed = start.elapsed();
    let (result, witness) = match (d.verdict, mode) {
        (Verdict::Sat(w), Mode::Sat) => ("sat", Some(*w)),
        (Verdict::Sat(w), Mode::Valid) => ("invalid", Some(*w)),
        (Verdict::Unsat(_), Mode::Sat) => ("unsat", None),
        (Verdict::Unsat(_), Mode::Valid) => ("valid", None),
        (Verdict::Unknown(_), _) => ("unknown", None),
    };
    let json = json!({
        "formula": phi.to_string(),
        "frame": frame.name(),
        "result": result,
        "mcs": d.stats.mcs,
        "clusters": d.stats.clusters,
        "maps": d.stats.maps,
        "witness": witness.as_ref().map(Witness::to_json),
    });
    Outcome {
        result,
        witness,
        json,
        elapsed,
    }
}

/// Collected SAT witnesses, checked together by criterion 4.
type Witnesses = Vec<Witness>;

fn facts(witnesses: &mut Witnesses) -> Result<String, String> {
    let mut problems = Vec::new();
    let mut slowest = Duration::ZERO;
    for &(text, frame, mode, expected) in FACTS {
        let out = run(text, frame, mode, &Config::default());
        slowest = slowest.max(out.elapsed);
        if out.result != expected {
            problems.push(format!("{text} on {frame}: {} instead of {expected}", out.result));
        }
        if out.elapsed > Duration::from_secs(60) {
            problems.push(format!("{text} on {frame}: {:?}", out.elapsed));
        }
        witnesses.extend(out.witness);
    }
    // The strict countermodel to reflexivity also exists on a finite grid.
    let refl = Formula::parse("~(G p -> p)").unwrap();
    if !grid_sat_search(&refl, FrameClass::Strict, Bounds::default()).found() {
        problems.push("grid oracle found no strict countermodel to G p -> p".into());
    }
    if problems.is_empty() {
        Ok(format!("{} facts, slowest {slowest:.2?}", FACTS.len()))
    } else {
        Err(problems.join("; "))
    }
}

fn stretch(witnesses: &mut Witnesses) -> Result<String, String> {
    let config = Config {
        max_seconds: Some(1800.0),
        ..Config::default()
    };
    let out = run(STRETCH, Frame::Irreflexive, Mode::Sat, &config);
    witnesses.extend(out.witness);
    match out.result {
        "sat" | "unknown" => Ok(format!("{} in {:.2?}", out.result, out.elapsed)),
        other => Err(format!("{other} in {:.2?}", out.elapsed)),
    }
}

fn fuzz(witnessed: &mut usize) -> Result<String, String> {
    let cases = formulas(500, 2024, 3, 2);
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut problems = Vec::new();
    for class in [FrameClass::Reflexive, FrameClass::Strict] {
        let r = differential(&cases, class, &FuzzConfig::default(), 2024);
        *witnessed += r.witnesses_checked;
        lines.push(format!(
            "{class}: {} oracle-sat, {} sat, {} unsat, {} unknown, {} valid",
            r.oracle_sat, r.solver_sat, r.solver_unsat, r.solver_unknown, r.valid
        ));
        problems.extend(r.violations);
    }
    if start.elapsed() > Duration::from_secs(600) {
        problems.push(format!("took {:.2?}", start.elapsed()));
    }
    if problems.is_empty() {
        Ok(format!("{} in {:.2?}", lines.join("; "), start.elapsed()))
    } else {
        Err(problems.join("; "))
    }
}

fn witness_soundness(witnesses: &Witnesses, fuzzed: usize) -> Result<String, String> {
    let mut problems = Vec::new();
    for w in witnesses {
        if let Err(e) = w.revalidate() {
            problems.push(format!("{}: {e}", w.formula));
        }
        match Witness::from_json(&w.to_json()) {
            Ok(back) if &back == w && back.revalidate().is_ok() => {}
            _ => problems.push(format!("{}: JSON round trip", w.formula)),
        }
    }
    if problems.is_empty() {
        Ok(format!(
            "{} suite witnesses revalidated (and round-tripped), {fuzzed} fuzz witnesses revalidated",
            witnesses.len()
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn brute_force_mcs(cl: &ClosureSet) -> Vec<u128> {
    let mut tableau = KtTableau::new(cl, KtTableau::DEFAULT_BUDGET).unwrap();
    let mut out: Vec<u128> = cl
        .hintikka_sets()
        .unwrap()
        .into_iter()
        .filter(|&h| {
            let lits: Vec<Lit> = (0..cl.base_len())
                .map(|idx| Lit {
                    idx,
                    positive: bit(h, idx),
                })
                .collect();
            tableau.satisfiable(&lits).unwrap()
        })
        .collect();
    out.sort();
    out
}

fn mcs_layer() -> Result<String, String> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(99);
    let letters = letter_names(2);
    let mut problems = Vec::new();
    let mut checked = 0;
    let mut longest = 0;
    while checked < 50 {
        let phi = random_formula(&mut rng, 4, &letters);
        let cl = ClosureSet::new(&phi).unwrap();
        if cl.len() > 16 {
            continue;
        }
        checked += 1;
        let fast: Vec<u128> = enumerate_mcs(&cl).unwrap().into_iter().map(|m| m.0).collect();
        if fast != brute_force_mcs(&cl) {
            problems.push(format!("{phi}: MCS sets differ"));
            continue;
        }
        let a = Analysis::new(&phi).unwrap();
        let f_mask: u128 = cl.f_indices().iter().fold(0, |m, &j| m | 1 << j);
        let p_mask: u128 = cl.p_indices().iter().fold(0, |m, &j| m | 1 << j);
        for &x in &a.mcs {
            for &y in &a.mcs {
                if !a.lesssim(x, y) {
                    continue;
                }
                if y.0 & f_mask & !x.0 != 0 || x.0 & p_mask & !y.0 != 0 {
                    problems.push(format!("{phi}: F/P sets not monotone along <~"));
                }
                if a.mcs.iter().any(|&z| a.lesssim(y, z) && !a.lesssim(x, z)) {
                    problems.push(format!("{phi}: <~ not transitive"));
                }
            }
        }
        // Longest chain of distinct clusters.
        let n = a.clusters.len();
        let mut depth = vec![1usize; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&c| (0..n).filter(|&d| a.cluster_le(d, c)).count());
        for (i, &c) in order.iter().enumerate() {
            for &d in &order[..i] {
                if d != c && a.cluster_le(d, c) {
                    depth[c] = depth[c].max(depth[d] + 1);
                }
            }
        }
        let chain = depth.into_iter().max().unwrap_or(0);
        longest = longest.max(chain);
        if chain > cl.len() + 1 {
            problems.push(format!("{phi}: cluster chain of length {chain}"));
        }
    }
    if problems.is_empty() {
        Ok(format!("{checked} formulas, longest cluster chain {longest}"))
    } else {
        Err(problems.join("; "))
    }
}

fn determinism() -> Result<String, String> {
    let suite = || -> Vec<serde_json::Value> {
        FACTS
            .iter()
            .map(|&(text, frame, mode, _)| run(text, frame, mode, &Config::default()).json)
            .collect()
    };
    let saturate = Config {
        strategy: Strategy::Saturate,
        ..Config::default()
    };
    let parallel = || -> Vec<serde_json::Value> {
        Frame::ALL
            .iter()
            .map(|&frame| run("p", frame, Mode::Sat, &saturate).json)
            .collect()
    };
    let (a, b) = (suite(), suite());
    let (c, d) = (parallel(), parallel());
    if a == b && c == d {
        Ok(format!("{} suite outputs and {} saturation outputs identical across runs", a.len(), c.len()))
    } else {
        Err("outputs differ between runs".into())
    }
}

fn main() -> ExitCode {
    let mut witnesses = Witnesses::new();
    let mut fuzzed = 0;
    let mut results = Vec::new();
    results.push(("1 known facts", facts(&mut witnesses)));
    results.push(("2 stretch formula", stretch(&mut witnesses)));
    results.push(("3 differential fuzzing", fuzz(&mut fuzzed)));
    results.push(("4 witness soundness", witness_soundness(&witnesses, fuzzed)));
    results.push(("5 MCS layer", mcs_layer()));
    results.push(("6 determinism", determinism()));
    let mut ok = true;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                ok = false;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

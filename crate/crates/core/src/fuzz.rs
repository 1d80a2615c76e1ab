//! Seeded random formulas and a differential check of the solver against
//! the finite-model oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::derivation::Frame;
use crate::oracle::{grid_sat_search, model_check, random_model, Bounds, FrameClass, GridSearch};
use crate::solver::{decide, Config, Verdict};
use crate::Formula;

pub fn letter_names(count: usize) -> Vec<String> {
    const NAMES: [&str; 6] = ["p", "q", "r", "s", "t", "u"];
    (0..count)
        .map(|i| NAMES.get(i).map_or_else(|| format!("p{i}"), |s| s.to_string()))
        .collect()
}

/// A random formula of temporal and boolean depth at most `depth`.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, letters: &[String]) -> Formula {
    let atom = |rng: &mut R| Formula::atom(letters[rng.gen_range(0..letters.len())].clone());
    if depth == 0 || rng.gen_bool(0.2) {
        return atom(rng);
    }
    let sub = |rng: &mut R| random_formula(rng, depth - 1, letters);
    match rng.gen_range(0..9) {
        0 => sub(rng).negate(),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => Formula::future(sub(rng)),
        5 => Formula::past(sub(rng)),
        6 => Formula::always_future(sub(rng)),
        7 => Formula::always_past(sub(rng)),
        _ => atom(rng),
    }
}

/// `count` formulas from `seed`.
pub fn formulas(count: usize, seed: u64, depth: usize, letters: usize) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = letter_names(letters.max(1));
    (0..count).map(|_| random_formula(&mut rng, depth, &names)).collect()
}

pub fn frame_of(class: FrameClass) -> Frame {
    match class {
        FrameClass::Reflexive => Frame::Reflexive,
        FrameClass::Strict => Frame::Strict,
    }
}

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub solver: Config,
    pub oracle: Bounds,
    /// Random models checked for each formula found valid.
    pub models: usize,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            solver: Config {
                search_nodes: 2_000_000,
                saturation_nodes: 2_000_000,
                max_maps: 200_000,
                ..Config::default()
            },
            oracle: Bounds {
                max_nodes: 3,
                max_cluster: 1,
                max_steps: Some(200_000),
            },
            models: 200,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FuzzReport {
    pub cases: usize,
    pub oracle_sat: usize,
    pub solver_sat: usize,
    pub solver_unsat: usize,
    pub solver_unknown: usize,
    pub valid: usize,
    pub witnesses_checked: usize,
    pub violations: Vec<String>,
}

impl FuzzReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks each formula on the class: a finite model found by the oracle
/// must be matched by a solver witness, witnesses must revalidate, and a
/// formula whose negation the solver refutes must hold throughout
/// `config.models` random models.
pub fn differential(formulas: &[Formula], class: FrameClass, config: &FuzzConfig, seed: u64) -> FuzzReport {
    let frame = frame_of(class);
    let mut r = FuzzReport::default();
    for (i, phi) in formulas.iter().enumerate() {
        r.cases += 1;
        let oracle = grid_sat_search(phi, class, config.oracle);
        let sat = decide(phi, frame, &config.solver).verdict;
        match &sat {
            Verdict::Sat(w) => {
                r.solver_sat += 1;
                r.witnesses_checked += 1;
                if let Err(e) = w.revalidate() {
                    r.violations.push(format!("{phi} on {class}: witness rejected: {e}"));
                }
            }
            Verdict::Unsat(_) => r.solver_unsat += 1,
            Verdict::Unknown(_) => r.solver_unknown += 1,
        }
        if let GridSearch::Found { model, point } = &oracle {
            r.oracle_sat += 1;
            if !sat.is_sat() {
                r.violations.push(format!(
                    "{phi} on {class}: oracle model {} at {:?}, solver {sat:?}",
                    model.to_json(),
                    model.coords(*point)
                ));
            }
        }
        if decide(&phi.negate(), frame, &config.solver).verdict.is_unsat() {
            r.valid += 1;
            let letters = phi.letters();
            for k in 0..config.models {
                let m = random_model(class, &letters, seed ^ ((i as u64) << 20) ^ k as u64);
                if let Some(p) = (0..m.points()).find(|&p| !model_check(&m, p, phi)) {
                    r.violations.push(format!(
                        "{phi} on {class}: judged valid but false at {:?} of {}",
                        m.coords(p),
                        m.to_json()
                    ));
                    break;
                }
            }
        }
    }
    r
}

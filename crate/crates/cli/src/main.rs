//! `mltl`: decide temporal formulas over two-dimensional real frames.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use serde::Serialize;
use serde_json::json;

use mltl::derivation::{Frame, Witness};
use mltl::fuzz::{differential, formulas, FuzzConfig};
use mltl::oracle::{grid_sat_search, Bounds, FrameClass, GridSearch};
use mltl::render;
use mltl::solver::{decide, Config, Stats, Strategy, Verdict};
use mltl::Formula;

const EXIT_DECIDED: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_RESOURCES: u8 = 3;
const EXIT_FLAGS: u8 = 4;

#[derive(Parser)]
#[command(name = "mltl", version, about = "Satisfiability and validity over products of real orders and real intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula and print its syntax tree.
    Parse { formula: String },
    /// Decide satisfiability or validity.
    Decide(DecideArgs),
    /// Finite-model oracle.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Compare the solver with the oracle on random formulas.
    Fuzz(FuzzArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Reflexive,
    Irreflexive,
    Strict,
    Interval,
}

impl From<FrameArg> for Frame {
    fn from(f: FrameArg) -> Frame {
        match f {
            FrameArg::Reflexive => Frame::Reflexive,
            FrameArg::Irreflexive => Frame::Irreflexive,
            FrameArg::Strict => Frame::Strict,
            FrameArg::Interval => Frame::Interval,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Reflexive,
    Strict,
}

impl From<ClassArg> for FrameClass {
    fn from(c: ClassArg) -> FrameClass {
        match c {
            ClassArg::Reflexive => FrameClass::Reflexive,
            ClassArg::Strict => FrameClass::Strict,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Sat,
    Valid,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Search,
    Saturate,
}

#[derive(Args)]
struct DecideArgs {
    #[arg(long, value_enum)]
    frame: FrameArg,
    #[arg(long, value_enum, default_value = "sat")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "search")]
    strategy: StrategyArg,
    /// Write the witness (or countermodel) derivation as JSON.
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Write the derivation tree in Graphviz syntax.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write an SVG sketch of the model.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Unrolling depth for the SVG sketch.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    depth: u32,
    #[arg(long, default_value_t = 5_000_000)]
    max_maps: usize,
    #[arg(long)]
    max_seconds: Option<f64>,
    formula: String,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Search small finite grids for a model.
    GridSat {
        #[arg(long, value_enum)]
        frame: ClassArg,
        #[arg(long, default_value_t = 3)]
        max_nodes: usize,
        #[arg(long, default_value_t = 2)]
        max_cluster: usize,
        /// Give up after this many search steps.
        #[arg(long)]
        max_steps: Option<u64>,
        formula: String,
    },
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 2)]
    letters: usize,
    #[arg(long, value_enum)]
    frame: ClassArg,
}

fn init_logging() {
    let level = match std::env::var("MLTL_LOG").as_deref() {
        Ok("info") => LevelFilter::Info,
        Ok("debug") => LevelFilter::Debug,
        _ => LevelFilter::Off,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FLAGS } else { EXIT_DECIDED });
        }
    };
    let code = match cli.command {
        Command::Parse { formula } => parse(&formula),
        Command::Decide(args) => run_decide(&args),
        Command::Oracle(OracleCommand::GridSat {
            frame,
            max_nodes,
            max_cluster,
            max_steps,
            formula,
        }) => grid_sat(&formula, frame.into(), max_nodes, max_cluster, max_steps),
        Command::Fuzz(args) => fuzz(&args),
    };
    ExitCode::from(code)
}

fn parse_formula(text: &str) -> Result<Formula, u8> {
    Formula::parse(text).map_err(|e| {
        eprintln!("mltl: {e}");
        EXIT_PARSE
    })
}

fn parse(text: &str) -> u8 {
    match parse_formula(text) {
        Ok(phi) => {
            println!("{}", json!({ "formula": phi.to_string(), "ast": phi }));
            EXIT_DECIDED
        }
        Err(code) => code,
    }
}

fn write_file(path: &PathBuf, text: &str) -> bool {
    match fs::write(path, text) {
        Ok(()) => true,
        Err(e) => {
            eprintln!("mltl: cannot write {}: {e}", path.display());
            false
        }
    }
}

#[derive(Serialize)]
struct DecideReport<'a> {
    formula: String,
    frame: &'a str,
    mode: &'a str,
    result: &'a str,
    stats: &'a Stats,
}

fn run_decide(args: &DecideArgs) -> u8 {
    let phi = match parse_formula(&args.formula) {
        Ok(phi) => phi,
        Err(code) => return code,
    };
    if args.max_seconds.is_some_and(|s| !(s >= 0.0)) {
        eprintln!("mltl: --max-seconds must be a non-negative number");
        return EXIT_FLAGS;
    }
    let frame: Frame = args.frame.into();
    let target = match args.mode {
        Mode::Sat => phi.clone(),
        Mode::Valid => phi.negate(),
    };
    let config = Config {
        strategy: match args.strategy {
            StrategyArg::Search => Strategy::Search,
            StrategyArg::Saturate => Strategy::Saturate,
        },
        max_maps: args.max_maps,
        max_seconds: args.max_seconds,
        ..Config::default()
    };
    let decision = decide(&target, frame, &config);
    let result = match (&decision.verdict, args.mode) {
        (Verdict::Sat(_), Mode::Sat) => "sat",
        (Verdict::Unsat(_), Mode::Sat) => "unsat",
        (Verdict::Sat(_), Mode::Valid) => "invalid",
        (Verdict::Unsat(_), Mode::Valid) => "valid",
        (Verdict::Unknown(_), _) => "unknown",
    };
    let mode = match args.mode {
        Mode::Sat => "sat",
        Mode::Valid => "valid",
    };
    let report = DecideReport {
        formula: phi.to_string(),
        frame: frame.name(),
        mode,
        result,
        stats: &decision.stats,
    };
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    match &decision.verdict {
        Verdict::Unsat(reason) => log::info!("refuted: {reason}"),
        Verdict::Unknown(why) => log::info!("undecided: {why}"),
        Verdict::Sat(_) => {}
    }
    let mut ok = true;
    if let Verdict::Sat(w) = &decision.verdict {
        ok &= write_witness(w, args);
    }
    if !ok {
        return EXIT_FAILED;
    }
    match decision.verdict {
        Verdict::Unknown(_) => EXIT_RESOURCES,
        _ => EXIT_DECIDED,
    }
}

fn write_witness(w: &Witness, args: &DecideArgs) -> bool {
    let mut ok = true;
    if let Some(path) = &args.witness {
        ok &= write_file(path, &w.to_json());
    }
    if let Some(path) = &args.dot {
        ok &= write_file(path, &render::to_dot(&w.derivation));
    }
    if let Some(path) = &args.svg {
        ok &= write_file(path, &render::to_svg(&w.derivation, args.depth as usize));
    }
    ok
}

fn grid_sat(text: &str, class: FrameClass, max_nodes: usize, max_cluster: usize, max_steps: Option<u64>) -> u8 {
    let phi = match parse_formula(text) {
        Ok(phi) => phi,
        Err(code) => return code,
    };
    if max_nodes == 0 || max_cluster == 0 {
        eprintln!("mltl: bounds must be positive");
        return EXIT_FLAGS;
    }
    let bounds = Bounds {
        max_nodes,
        max_cluster,
        max_steps,
    };
    let (result, extra) = match grid_sat_search(&phi, class, bounds) {
        GridSearch::Found { model, point } => (
            "found",
            json!({ "point": model.coords(point), "model": model.to_json() }),
        ),
        GridSearch::NotFound => ("not_found", json!({})),
        GridSearch::GaveUp => ("gave_up", json!({})),
    };
    let mut out = json!({ "formula": phi.to_string(), "frame": class.to_string(), "result": result });
    if let (Some(out), Some(extra)) = (out.as_object_mut(), extra.as_object()) {
        out.extend(extra.clone());
    }
    println!("{out}");
    if result == "gave_up" {
        EXIT_RESOURCES
    } else {
        EXIT_DECIDED
    }
}

fn fuzz(args: &FuzzArgs) -> u8 {
    if args.letters == 0 {
        eprintln!("mltl: --letters must be positive");
        return EXIT_FLAGS;
    }
    let class: FrameClass = args.frame.into();
    let cases = formulas(args.count, args.seed, args.depth, args.letters);
    let report = differential(&cases, class, &FuzzConfig::default(), args.seed);
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    if report.ok() {
        EXIT_DECIDED
    } else {
        EXIT_FAILED
    }
}

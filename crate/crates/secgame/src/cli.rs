//! Command-line driver.
//!
//! Exit codes: 0 success, 1 validation or input error, 2 internal
//! invariant violation, 64 usage error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::abstraction::condense;
use crate::game::{load_spec, GameSpec};
use crate::gen::{random_spec, GenConfig};
use crate::io;
use crate::model::{
    build_game_graph_direct, graphs_isomorphic, semantic_pipeline, GameGraph, DEFAULT_STATE_CAP,
};
use crate::oracle;
use crate::solver::{nash_strategies, social_strategies, SolveOptions, SolveOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "secgame",
    about = "Attacker/defender security-game analysis: model building, bisimulation minimization, and strategy synthesis",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a specification file and report its shape and warnings.
    Validate { spec: PathBuf },
    /// Build the game graph, reporting merged states; optionally export DOT.
    Build {
        spec: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Write the game graph in GraphViz DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Compute equilibrium or social-optimal strategies.
    Solve {
        spec: PathBuf,
        #[command(flatten)]
        mode: ModeOpt,
        #[command(flatten)]
        common: CommonOpts,
        /// Write the strategy report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write the graph with the first strategy highlighted as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Brute-force strategy search (small graphs), or fuzz the solver
    /// against the brute force on random games.
    Oracle {
        spec: Option<PathBuf>,
        #[command(flatten)]
        mode: ModeOpt,
        #[command(flatten)]
        common: CommonOpts,
        /// Cap on the enumerable strategy space.
        #[arg(long, default_value_t = 1e7)]
        cap: f64,
        /// Fuzz mode: compare solver and brute force on this many random games.
        #[arg(long)]
        fuzz: Option<usize>,
        /// Seed of the random-game generator in fuzz mode.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check that the process-semantics route and the direct route produce
    /// the same game graph.
    PipelineCheck {
        spec: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Args, Debug)]
struct ModeOpt {
    /// Strategy kind to compute.
    #[arg(long, value_enum)]
    mode: Mode,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Nes,
    Sos,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Debug, Clone, Copy)]
struct CommonOpts {
    /// Discount factor, overriding the specification file.
    #[arg(long)]
    beta: Option<f64>,
    /// Disable residual-mass completion (deficits become errors).
    #[arg(long)]
    no_residual: bool,
    /// Cap on enumerated strategies.
    #[arg(long)]
    tie_cap: Option<usize>,
    /// Fixpoint tolerance of the value iterations.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration limit of the value iterations.
    #[arg(long)]
    max_iter: Option<usize>,
}

fn load(path: &PathBuf, common: &CommonOpts) -> Result<GameSpec, String> {
    let mut spec = if common.no_residual {
        let mut doc = serde_json::from_str::<crate::game::SpecDocument>(
            &std::fs::read_to_string(path).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        doc.options.residual_completion = false;
        crate::game::compile_spec(&doc).map_err(|e| e.to_string())?
    } else {
        load_spec(path).map_err(|e| e.to_string())?
    };
    if let Some(beta) = common.beta {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(format!("beta {beta} outside the open interval (0,1)"));
        }
        spec.beta = beta;
    }
    Ok(spec)
}

fn solve_options(spec: &GameSpec, common: &CommonOpts) -> SolveOptions {
    let mut opts = SolveOptions::new(spec.beta);
    opts.eps_fix = common.epsilon.unwrap_or(spec.options.epsilon_fix);
    opts.max_iter = common.max_iter.unwrap_or(spec.options.max_iter);
    opts.tie_cap = common.tie_cap.unwrap_or(spec.options.tie_cap);
    opts
}

fn print_warnings(spec: &GameSpec) {
    for w in &spec.warnings {
        eprintln!("warning: {w}");
    }
}

fn run_solve(
    graph: &GameGraph,
    mode: Mode,
    opts: &SolveOptions,
) -> Result<(SolveOutcome, &'static str), String> {
    let dag = condense(graph);
    match mode {
        Mode::Nes => nash_strategies(graph, &dag, opts)
            .map(|o| (o, "nes"))
            .map_err(|e| e.to_string()),
        Mode::Sos => social_strategies(graph, &dag, opts)
            .map(|o| (o, "sos"))
            .map_err(|e| e.to_string()),
    }
}

/// Entry point; returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_INVALID
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Validate { spec } => {
            let spec = load_spec(&spec).map_err(|e| e.to_string())?;
            print_warnings(&spec);
            let rows: usize = spec.states.iter().map(|s| s.rows.len()).sum();
            println!(
                "ok: {} states, {} live action pairs, beta = {}",
                spec.states.len(),
                rows,
                spec.beta
            );
            Ok(EXIT_OK)
        }
        Command::Build { spec, common, dot } => {
            let spec = load(&spec, &common)?;
            print_warnings(&spec);
            let pipe = semantic_pipeline(&spec, DEFAULT_STATE_CAP).map_err(|e| e.to_string())?;
            println!(
                "transition system: {} states, {} transitions",
                pipe.ts.state_count(),
                pipe.ts.transitions.len()
            );
            println!("quotient: {} classes", pipe.quotient.state_count());
            let merges: Vec<String> = pipe
                .graph
                .vertices
                .iter()
                .filter(|v| v.members.len() > 1)
                .map(|v| format!("{:?}", v.members))
                .collect();
            if merges.is_empty() {
                println!("no bisimilar game states");
            } else {
                println!("bisimilar game states merged: {}", merges.join(" "));
            }
            println!(
                "game graph: {} vertices, {} edges",
                pipe.graph.vertex_count(),
                pipe.graph.edges.len()
            );
            if let Some(path) = dot {
                io::write_dot(&pipe.graph, None, &path).map_err(|e| e.to_string())?;
                println!("wrote {}", path.display());
            }
            Ok(EXIT_OK)
        }
        Command::Solve {
            spec,
            mode,
            common,
            out,
            format,
            dot,
        } => {
            let spec = load(&spec, &common)?;
            print_warnings(&spec);
            let graph = build_game_graph_direct(&spec).map_err(|e| e.to_string())?;
            let opts = solve_options(&spec, &common);
            let (outcome, mode_name) = run_solve(&graph, mode.mode, &opts)?;
            if outcome.truncated {
                eprintln!(
                    "warning: tie enumeration truncated at the cap of {}",
                    opts.tie_cap
                );
            }
            let report = io::strategy_report(&graph, &outcome.strategies, mode_name, opts.beta);
            match mode.mode {
                Mode::Nes => println!(
                    "nes: {} strategies ({} realizations)",
                    report.strategies.len(),
                    outcome.strategies.len()
                ),
                Mode::Sos => println!(
                    "sos: {} social optimum(s), realized by {} action profiles ({} realizations)",
                    report.distinct_cost_profiles,
                    report.strategies.len(),
                    outcome.strategies.len()
                ),
            }
            if let Some(path) = &out {
                match format {
                    Format::Json => {
                        io::write_strategy_json(&report, path).map_err(|e| e.to_string())?
                    }
                    Format::Text => std::fs::write(path, io::strategy_text(&report))
                        .map_err(|e| e.to_string())?,
                }
                println!("wrote {}", path.display());
            } else {
                print!("{}", io::strategy_text(&report));
            }
            if let Some(path) = &dot {
                let first = outcome.strategies.first();
                io::write_dot(&graph, first, path).map_err(|e| e.to_string())?;
                println!("wrote {}", path.display());
            }
            Ok(EXIT_OK)
        }
        Command::Oracle {
            spec,
            mode,
            common,
            cap,
            fuzz,
            seed,
        } => {
            if let Some(rounds) = fuzz {
                return fuzz_oracle(rounds, seed, mode.mode, &common);
            }
            let Some(path) = spec else {
                return Err("either a spec file or --fuzz is required".into());
            };
            let spec = load(&path, &common)?;
            let graph = build_game_graph_direct(&spec).map_err(|e| e.to_string())?;
            let beta = spec.beta;
            let found = match mode.mode {
                Mode::Nes => oracle::exhaustive_nash_strategies(&graph, beta, cap),
                Mode::Sos => oracle::exhaustive_social_strategies(&graph, beta, cap),
            }
            .map_err(|e| e.to_string())?;
            let maps: Vec<crate::solver::StrategyMap> = found
                .iter()
                .map(|chosen| strategy_map_of(&graph, chosen, beta))
                .collect();
            let report = io::strategy_report(
                &graph,
                &maps,
                match mode.mode {
                    Mode::Nes => "nes",
                    Mode::Sos => "sos",
                },
                beta,
            );
            print!("{}", io::strategy_text(&report));
            Ok(EXIT_OK)
        }
        Command::PipelineCheck { spec, common } => {
            let spec = load(&spec, &common)?;
            let pipe = semantic_pipeline(&spec, DEFAULT_STATE_CAP).map_err(|e| e.to_string())?;
            let direct = build_game_graph_direct(&spec).map_err(|e| e.to_string())?;
            match graphs_isomorphic(&pipe.graph, &direct) {
                Ok(()) => {
                    println!(
                        "ok: both routes agree ({} vertices, {} edges)",
                        direct.vertex_count(),
                        direct.edges.len()
                    );
                    Ok(EXIT_OK)
                }
                Err(msg) => {
                    eprintln!("pipeline mismatch: {msg}");
                    Ok(EXIT_INTERNAL)
                }
            }
        }
    }
}

fn strategy_map_of(graph: &GameGraph, chosen: &[usize], beta: f64) -> crate::solver::StrategyMap {
    crate::solver::StrategyMap {
        chosen: chosen.to_vec(),
        payoffs: oracle::iterated_payoffs(graph, chosen, beta),
        social: oracle::iterated_social_payoffs(graph, chosen, beta),
    }
}

fn fuzz_oracle(rounds: usize, seed: u64, mode: Mode, common: &CommonOpts) -> Result<i32, String> {
    let beta = common.beta.unwrap_or(0.8);
    // Antagonistic payoffs keep the equilibrium fixpoint unique, which is
    // what makes an exact solver-versus-brute-force comparison meaningful.
    let cfg = GenConfig {
        zero_sum: true,
        ..GenConfig::default()
    };
    let mut failures = 0usize;
    for round in 0..rounds {
        let game_seed = seed.wrapping_add(round as u64);
        let spec = random_spec(game_seed, &cfg);
        let graph = build_game_graph_direct(&spec).map_err(|e| e.to_string())?;
        let dag = condense(&graph);
        let mut opts = SolveOptions::new(beta);
        opts.tie_cap = common.tie_cap.unwrap_or(1024);
        let solved = match mode {
            Mode::Nes => nash_strategies(&graph, &dag, &opts),
            Mode::Sos => social_strategies(&graph, &dag, &opts),
        }
        .map_err(|e| format!("seed {game_seed}: {e}"))?;
        let brute = match mode {
            Mode::Nes => oracle::exhaustive_nash_strategies(&graph, beta, 1e7),
            Mode::Sos => oracle::exhaustive_social_strategies(&graph, beta, 1e7),
        }
        .map_err(|e| e.to_string())?;
        let mut solver_keys: Vec<Vec<String>> = solved
            .strategies
            .iter()
            .map(|s| oracle::strategy_key(&graph, &s.chosen, beta))
            .collect();
        let mut brute_keys: Vec<Vec<String>> = brute
            .iter()
            .map(|c| oracle::strategy_key(&graph, c, beta))
            .collect();
        solver_keys.sort();
        solver_keys.dedup();
        brute_keys.sort();
        brute_keys.dedup();
        if solver_keys != brute_keys {
            failures += 1;
            eprintln!(
                "seed {game_seed}: solver found {} strategies, brute force {}",
                solver_keys.len(),
                brute_keys.len()
            );
        }
    }
    if failures == 0 {
        println!("ok: solver matches brute force on {rounds} random games");
        Ok(EXIT_OK)
    } else {
        eprintln!("{failures}/{rounds} mismatches");
        Ok(EXIT_INTERNAL)
    }
}

//! Strategy analysis for one-attacker/one-defender network security games.
//!
//! A game is specified by network states, per-state attacker and defender
//! actions, probabilistic state transitions, and immediate payoffs. The
//! library models each state as communicating processes in a probabilistic
//! value-passing calculus, derives the induced transition system, minimizes
//! it by probabilistic bisimulation, contracts full interaction rounds into
//! single game-graph edges, and synthesizes Nash-equilibrium and
//! social-optimal strategies by backward induction over the graph's
//! strongly connected components. A brute-force oracle validates the
//! solver on every instance small enough to enumerate.
//!
//! The `book/` directory of the repository walks through the concepts; its
//! code snippets are compiled and run as doctests of this crate.
//!
//! ```
//! use secgame::game::spec_from_str;
//! use secgame::model::build_game_graph_direct;
//! use secgame::abstraction::condense;
//! use secgame::solver::{nash_strategies, SolveOptions};
//!
//! let spec = spec_from_str(r#"{
//!     "version": 1, "name": "loop", "beta": 0.5,
//!     "states": [{"id": 1, "name": "only",
//!                 "attacker_actions": ["u1"], "defender_actions": ["v1"]}],
//!     "transitions": [{"from": 1, "attacker": 1, "defender": 1, "to": 1, "p": 1}],
//!     "payoffs": [{"state": 1, "attacker": [[10.0]], "defender": [[-10.0]]}]
//! }"#).unwrap();
//! let graph = build_game_graph_direct(&spec).unwrap();
//! let outcome = nash_strategies(&graph, &condense(&graph), &SolveOptions::new(0.5)).unwrap();
//! assert_eq!(outcome.strategies.len(), 1);
//! // Self-loop worth 10 per round at discount 0.5: the geometric series 20.
//! assert!((outcome.strategies[0].payoffs[0].0 - 20.0).abs() < 1e-9);
//! ```

pub mod abstraction;
pub mod bisim;
pub mod casestudy;
pub mod cli;
pub mod game;
pub mod gen;
pub mod io;
pub mod model;
pub mod oracle;
pub mod calculus;
pub mod solver;

mod booktests;

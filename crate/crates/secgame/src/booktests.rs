//! The book's code blocks, compiled and run as doctests so the narrative
//! cannot drift from the implementation. One module per chapter keeps
//! failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/process-calculus.md")]
mod process_calculus {}

#[doc = include_str!("../../../book/src/bisimulation.md")]
mod bisimulation {}

#[doc = include_str!("../../../book/src/game-model.md")]
mod game_model {}

#[doc = include_str!("../../../book/src/strategies.md")]
mod strategies {}

#[doc = include_str!("../../../book/src/case-study.md")]
mod case_study {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli_usage {}

#[doc = include_str!("../../../book/src/file-formats.md")]
mod file_formats {}

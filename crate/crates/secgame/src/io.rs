//! Strategy reports and graph exports.
//!
//! Reports serialize to a versioned JSON schema (documented in the book's
//! file-formats chapter) and to a readable text table. Graphs and
//! strategies export to GraphViz DOT.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GameGraph;
use crate::solver::StrategyMap;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Serialized strategy set, version 1.
///
/// A *strategy* is an assignment of one action pair per game state, so
/// choice maps that differ only in which equally-labelled edge realizes a
/// pair are grouped into one entry (`realizations` counts them). The
/// number of distinct certified cost profiles is reported separately: a
/// social-optimum run can realize its unique minimal cost vector through
/// several zero-cost action profiles.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StrategyReport {
    pub version: u32,
    pub mode: String,
    pub beta: f64,
    /// Distinct certified (attacker, defender, social) value profiles
    /// across all strategies.
    pub distinct_value_profiles: usize,
    /// Distinct social-cost vectors across all strategies. The minimal
    /// cost vector of a game is unique, so a social-optimum run reports 1
    /// here no matter how many zero-cost action profiles realize it.
    pub distinct_cost_profiles: usize,
    pub strategies: Vec<StrategyEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StrategyEntry {
    /// 1-based position in the deterministic output order.
    pub id: usize,
    /// Choice maps realizing this action-pair profile.
    pub realizations: usize,
    pub choices: Vec<ChoiceEntry>,
}

/// The chosen action pair and certified values at one game-graph vertex.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChoiceEntry {
    /// Game-state ids represented by this vertex.
    pub states: Vec<u32>,
    pub state_name: String,
    pub attacker: String,
    pub defender: String,
    /// Least member state id of the destination vertex.
    pub next: u32,
    pub prob: f64,
    pub payoff_attacker: f64,
    pub payoff_defender: f64,
    pub payoff_social: f64,
}

/// Action-pair profile of a choice map: the strategy in the sense of one
/// action pair per state.
pub fn action_profile(graph: &GameGraph, chosen: &[usize]) -> Vec<(String, String)> {
    chosen
        .iter()
        .map(|&e| {
            let edge = &graph.edges[e];
            (
                edge.act.attacker.name.clone(),
                edge.act.defender.name.clone(),
            )
        })
        .collect()
}

/// Group raw choice maps into strategies (one entry per action-pair
/// profile) and count distinct certified value profiles.
pub fn strategy_report(
    graph: &GameGraph,
    strategies: &[StrategyMap],
    mode: &str,
    beta: f64,
) -> StrategyReport {
    type Profile = Vec<(String, String)>;
    let mut groups: Vec<(Profile, Vec<&StrategyMap>)> = Vec::new();
    for s in strategies {
        let profile = action_profile(graph, &s.chosen);
        if let Some((_, members)) = groups.iter_mut().find(|(p, _)| *p == profile) {
            members.push(s);
        } else {
            groups.push((profile, vec![s]));
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));

    let value_key = |s: &StrategyMap| -> Vec<(i64, i64, i64)> {
        s.payoffs
            .iter()
            .zip(&s.social)
            .map(|(p, soc)| {
                (
                    (p.0 * 1e6).round() as i64,
                    (p.1 * 1e6).round() as i64,
                    (soc * 1e6).round() as i64,
                )
            })
            .collect()
    };
    let mut profiles_seen: Vec<Vec<(i64, i64, i64)>> = Vec::new();
    let mut costs_seen: Vec<Vec<i64>> = Vec::new();
    for s in strategies {
        let k = value_key(s);
        if !profiles_seen.contains(&k) {
            profiles_seen.push(k);
        }
        let c: Vec<i64> = s.social.iter().map(|x| (x * 1e6).round() as i64).collect();
        if !costs_seen.contains(&c) {
            costs_seen.push(c);
        }
    }

    let entries = groups
        .iter()
        .enumerate()
        .map(|(i, (_, members))| {
            let s = members[0];
            StrategyEntry {
                id: i + 1,
                realizations: members.len(),
                choices: (0..graph.vertex_count())
                    .map(|v| {
                        let e = &graph.edges[s.chosen[v]];
                        ChoiceEntry {
                            states: graph.vertices[v].members.clone(),
                            state_name: graph.vertices[v].name.clone(),
                            attacker: e.act.attacker.name.clone(),
                            defender: e.act.defender.name.clone(),
                            next: graph.vertices[e.dst].members[0],
                            prob: e.prob,
                            payoff_attacker: s.payoffs[v].0,
                            payoff_defender: s.payoffs[v].1,
                            payoff_social: s.social[v],
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    StrategyReport {
        version: 1,
        mode: mode.to_string(),
        beta,
        distinct_value_profiles: profiles_seen.len(),
        distinct_cost_profiles: costs_seen.len(),
        strategies: entries,
    }
}

pub fn write_strategy_json(report: &StrategyReport, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path.as_ref(), text + "\n").map_err(|source| ReportError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

pub fn read_strategy_json(path: impl AsRef<Path>) -> Result<StrategyReport, ReportError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| ReportError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Human-readable rendering of a report.
pub fn strategy_text(report: &StrategyReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} strategies, {} distinct value profiles ({}, beta = {})\n",
        report.strategies.len(),
        report.distinct_value_profiles,
        report.mode,
        report.beta
    ));
    for s in &report.strategies {
        out.push_str(&format!(
            "strategy {} ({} realization{})\n",
            s.id,
            s.realizations,
            if s.realizations == 1 { "" } else { "s" }
        ));
        for c in &s.choices {
            let states = c
                .states
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&format!(
                "  state {:<8} {} / {}  -> {}  p={:.4}  payoff=({:.4}, {:.4})  social={:.4}\n",
                states,
                c.attacker,
                c.defender,
                c.next,
                c.prob,
                c.payoff_attacker,
                c.payoff_defender,
                c.payoff_social
            ));
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering of a game graph; when `strategy` is given, chosen edges
/// are bold and the rest grey.
pub fn dot_string(graph: &GameGraph, strategy: Option<&StrategyMap>) -> String {
    let mut out = String::from("digraph game {\n  rankdir=LR;\n  node [shape=ellipse];\n");
    for (v, vx) in graph.vertices.iter().enumerate() {
        let members = vx
            .members
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "  n{v} [label=\"{}: {}\"];\n",
            members,
            dot_escape(&vx.name)
        ));
    }
    for (i, e) in graph.edges.iter().enumerate() {
        let label = format!(
            "{}/{} p={:.3} r=({},{})",
            e.act.attacker.name, e.act.defender.name, e.prob, e.weight.0, e.weight.1
        );
        let style = match strategy {
            Some(s) if s.chosen[e.src] == i => " style=bold penwidth=2",
            Some(_) => " color=grey",
            None => "",
        };
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\"{}];\n",
            e.src,
            e.dst,
            dot_escape(&label),
            style
        ));
    }
    out.push_str("}\n");
    out
}

pub fn write_dot(
    graph: &GameGraph,
    strategy: Option<&StrategyMap>,
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    std::fs::write(path.as_ref(), dot_string(graph, strategy)).map_err(|source| {
        ReportError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    })
}

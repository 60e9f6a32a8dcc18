//! JSON file formats for games, specs and solution lists, plus profile
//! strings such as `C,D`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::game::{Game, Perturbation, PerturbationSet, Profile};
use crate::model::{BmaxIndexing, EngineeringSpec, Role, Sign};
use crate::pipeline::{Enumeration, Solution, Verification};

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))
}

fn field_err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("field {path}: {msg}"))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PlayerRecord {
    name: String,
    strategies: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameRecord {
    players: Vec<PlayerRecord>,
    payoffs: Value,
}

fn check_label(path: &str, label: &str) -> Result<()> {
    if label.is_empty() || label.trim() != label || label.contains(',') {
        return Err(field_err(path, format!("label {label:?} must be nonempty, unpadded and comma-free")));
    }
    Ok(())
}

fn walk_payoffs(v: &Value, shape: &[usize], players: usize, path: &mut String, out: &mut Vec<f64>) -> Result<()> {
    let Some(items) = v.as_array() else {
        return Err(field_err(path, "expected an array"));
    };
    let (want, leaf) = match shape.split_first() {
        Some((&n, _)) => (n, false),
        None => (players, true),
    };
    if items.len() != want {
        return Err(field_err(path, format!("expected {want} entries, found {}", items.len())));
    }
    for (i, item) in items.iter().enumerate() {
        let len = path.len();
        path.push_str(&format!("[{i}]"));
        if leaf {
            let x = item.as_f64().ok_or_else(|| field_err(path, "expected a number"))?;
            out.push(x);
        } else {
            walk_payoffs(item, &shape[1..], players, path, out)?;
        }
        path.truncate(len);
    }
    Ok(())
}

/// Parses a game document: `players` (each `{name, strategies}`) and
/// `payoffs` nested player-0-major with per-player payoffs innermost.
pub fn read_game(text: &str) -> Result<Game> {
    let rec: GameRecord = serde_json::from_str(text).map_err(parse_err)?;
    if rec.players.is_empty() {
        return Err(field_err("players", "at least one player is required"));
    }
    let mut names = Vec::new();
    for (k, p) in rec.players.iter().enumerate() {
        if p.name.is_empty() || names.contains(&p.name) {
            return Err(field_err(&format!("players[{k}].name"), "names must be nonempty and unique"));
        }
        names.push(p.name.clone());
        for (j, s) in p.strategies.iter().enumerate() {
            check_label(&format!("players[{k}].strategies[{j}]"), s)?;
        }
    }
    let shape: Vec<usize> = rec.players.iter().map(|p| p.strategies.len()).collect();
    let mut payoffs = Vec::new();
    walk_payoffs(&rec.payoffs, &shape, shape.len(), &mut "payoffs".to_string(), &mut payoffs)?;
    let strategies = rec.players.into_iter().map(|p| p.strategies).collect();
    Game::new(shape.len(), strategies, payoffs)?.with_player_names(names)
}

fn write_payoffs(game: &Game, depth: usize, base: usize, stride: usize, indent: usize, out: &mut String) {
    let n = game.num_strategies(depth);
    let inner = stride / n;
    let pad = " ".repeat(indent);
    if depth + 1 == game.num_players() {
        let cells: Vec<String> = (0..n)
            .map(|s| {
                let idx = base + s * inner;
                let vals: Vec<String> = (0..game.num_players()).map(|k| json_number(game.payoff_at(idx, k))).collect();
                format!("[{}]", vals.join(", "))
            })
            .collect();
        out.push_str(&format!("[{}]", cells.join(", ")));
        return;
    }
    out.push_str("[\n");
    for s in 0..n {
        out.push_str(&pad);
        out.push_str("  ");
        write_payoffs(game, depth + 1, base + s * inner, inner, indent + 2, out);
        out.push_str(if s + 1 < n { ",\n" } else { "\n" });
    }
    out.push_str(&pad);
    out.push(']');
}

fn json_number(x: f64) -> String {
    serde_json::to_string(&x).expect("finite payoff")
}

/// Canonical game document; reading it back gives an equal game.
pub fn write_game(game: &Game) -> String {
    let mut out = String::from("{\n  \"players\": [\n");
    for k in 0..game.num_players() {
        let rec = PlayerRecord {
            name: game.player_names()[k].clone(),
            strategies: game.strategy_names(k).to_vec(),
        };
        out.push_str("    ");
        out.push_str(&serde_json::to_string(&rec).expect("serializable"));
        out.push_str(if k + 1 < game.num_players() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n  \"payoffs\": ");
    write_payoffs(game, 0, 0, game.num_profiles(), 2, &mut out);
    out.push_str("\n}\n");
    out
}

/// Parses comma-joined strategy labels, or indices when `by_index`.
pub fn parse_profile(game: &Game, text: &str, by_index: bool) -> Result<Profile> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != game.num_players() {
        return Err(Error::Parse(format!(
            "profile {text:?} names {} strategies for {} players",
            parts.len(),
            game.num_players()
        )));
    }
    let mut strategies = Vec::with_capacity(parts.len());
    for (k, part) in parts.iter().enumerate() {
        let s = if by_index {
            part.parse::<usize>()
                .ok()
                .filter(|&s| s < game.num_strategies(k))
                .ok_or_else(|| Error::Parse(format!("profile {text:?}: bad strategy index {part:?} for player {}", k + 1)))?
        } else {
            game.strategy_names(k)
                .iter()
                .position(|l| l == part)
                .ok_or_else(|| Error::Parse(format!("profile {text:?}: unknown strategy {part:?} for player {}", k + 1)))?
        };
        strategies.push(s);
    }
    Ok(Profile::new(strategies))
}

pub fn format_profile(game: &Game, profile: &Profile, by_index: bool) -> String {
    let parts: Vec<String> = profile
        .strategies()
        .iter()
        .enumerate()
        .map(|(k, &s)| if by_index { s.to_string() } else { game.strategy_names(k)[s].clone() })
        .collect();
    parts.join(",")
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
struct SpecRecord {
    desired: Vec<String>,
    undesired: Vec<String>,
    epsilon: Option<f64>,
    big_m: Option<f64>,
    freeze_undesired: Option<bool>,
    max_perturbation: Option<f64>,
    /// 0 means unlimited.
    max_solutions: Option<usize>,
    bmax_indexing: Option<BmaxIndexing>,
    objective_ceiling: Option<f64>,
    node_limit: Option<u64>,
    time_limit: Option<f64>,
}

/// Parses a spec document against `game`. Absent fields take the
/// defaults of [`EngineeringSpec`]; `max_solutions: 0` means unlimited.
pub fn read_spec(text: &str, game: &Game, by_index: bool) -> Result<EngineeringSpec> {
    let rec: SpecRecord = serde_json::from_str(text).map_err(parse_err)?;
    let profiles = |list: &[String], name: &str| -> Result<Vec<Profile>> {
        list.iter()
            .enumerate()
            .map(|(i, s)| parse_profile(game, s, by_index).map_err(|e| field_err(&format!("{name}[{i}]"), e)))
            .collect()
    };
    let d = EngineeringSpec::default();
    Ok(EngineeringSpec {
        desired: profiles(&rec.desired, "desired")?,
        undesired: profiles(&rec.undesired, "undesired")?,
        epsilon: rec.epsilon.unwrap_or(d.epsilon),
        big_m: rec.big_m,
        freeze_undesired: rec.freeze_undesired.unwrap_or(d.freeze_undesired),
        max_perturbation: rec.max_perturbation,
        max_solutions: match rec.max_solutions {
            Some(0) => None,
            Some(n) => Some(n),
            None => d.max_solutions,
        },
        bmax_indexing: rec.bmax_indexing.unwrap_or_default(),
        objective_ceiling: rec.objective_ceiling,
        node_limit: rec.node_limit,
        time_limit: rec.time_limit,
    })
}

pub fn write_spec(spec: &EngineeringSpec, game: &Game) -> String {
    let rec = SpecRecord {
        desired: spec.desired.iter().map(|p| format_profile(game, p, false)).collect(),
        undesired: spec.undesired.iter().map(|p| format_profile(game, p, false)).collect(),
        epsilon: Some(spec.epsilon),
        big_m: spec.big_m,
        freeze_undesired: Some(spec.freeze_undesired),
        max_perturbation: spec.max_perturbation,
        max_solutions: Some(spec.max_solutions.unwrap_or(0)),
        bmax_indexing: Some(spec.bmax_indexing),
        objective_ceiling: spec.objective_ceiling,
        node_limit: spec.node_limit,
        time_limit: spec.time_limit,
    };
    serde_json::to_string_pretty(&rec).expect("serializable") + "\n"
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationRecord {
    pub player: String,
    pub profile: String,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationRecord {
    pub desired_are_ne: bool,
    pub undesired_not_ne: bool,
    pub ne_set: Vec<String>,
}

/// Solver counters. Wall time is left out so files are reproducible.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StatsRecord {
    pub nodes_explored: u64,
    pub lp_iterations: u64,
    pub root_bound: Option<f64>,
    pub num_vars: usize,
    pub num_binaries: usize,
    pub num_constraints: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub index: usize,
    pub objective: f64,
    pub perturbations: Vec<PerturbationRecord>,
    /// Nonzero perturbation variables, e.g. `+P1@C,C`.
    pub support: Vec<String>,
    pub verification: VerificationRecord,
    pub stats: StatsRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub desired: Vec<String>,
    pub undesired: Vec<String>,
    pub epsilon: f64,
    pub termination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<String>,
    pub solutions: Vec<SolutionRecord>,
}

fn role_label(game: &Game, role: &Role) -> String {
    match role {
        Role::Alpha { player, profile, sign } => {
            let s = if *sign == Sign::Plus { '+' } else { '-' };
            format!("{s}{}@{}", game.player_names()[*player], format_profile(game, profile, false))
        }
        other => format!("{other:?}"),
    }
}

pub fn solution_record(game: &Game, index: usize, s: &Solution) -> SolutionRecord {
    SolutionRecord {
        index,
        objective: s.objective,
        perturbations: s
            .perturbations
            .iter()
            .map(|p| PerturbationRecord {
                player: game.player_names()[p.player].clone(),
                profile: format_profile(game, &p.profile, false),
                delta: p.delta,
            })
            .collect(),
        support: s.support.iter().map(|r| role_label(game, r)).collect(),
        verification: verification_record(game, &s.verification),
        stats: StatsRecord {
            nodes_explored: s.stats.nodes_explored,
            lp_iterations: s.stats.lp_iterations,
            root_bound: s.stats.root_bound,
            num_vars: s.stats.num_vars,
            num_binaries: s.stats.num_binaries,
            num_constraints: s.stats.num_constraints,
        },
        warnings: s.warnings.clone(),
    }
}

pub fn verification_record(game: &Game, v: &Verification) -> VerificationRecord {
    VerificationRecord {
        desired_are_ne: v.desired_are_ne,
        undesired_not_ne: v.undesired_not_ne,
        ne_set: v.ne_set.iter().map(|p| format_profile(game, p, false)).collect(),
    }
}

pub fn solution_file(game: &Game, spec: &EngineeringSpec, run: &Enumeration) -> SolutionFile {
    let infeasibility = match &run.termination {
        crate::pipeline::Termination::Infeasible(r) => Some(r.to_string()),
        _ => None,
    };
    SolutionFile {
        desired: spec.desired.iter().map(|p| format_profile(game, p, false)).collect(),
        undesired: spec.undesired.iter().map(|p| format_profile(game, p, false)).collect(),
        epsilon: spec.epsilon,
        termination: run.termination.to_string(),
        infeasibility,
        solutions: run.solutions.iter().enumerate().map(|(i, s)| solution_record(game, i + 1, s)).collect(),
    }
}

pub fn write_solution_file(file: &SolutionFile) -> String {
    serde_json::to_string_pretty(file).expect("serializable") + "\n"
}

pub fn read_solution_file(text: &str) -> Result<SolutionFile> {
    serde_json::from_str(text).map_err(parse_err)
}

impl SolutionRecord {
    /// Resolves the listed perturbations against `game`.
    pub fn perturbation_set(&self, game: &Game) -> Result<PerturbationSet> {
        let entries = self
            .perturbations
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let path = format!("solutions[{}].perturbations[{i}]", self.index);
                let player = game
                    .player_names()
                    .iter()
                    .position(|n| *n == p.player)
                    .ok_or_else(|| field_err(&path, format!("unknown player {:?}", p.player)))?;
                let profile = parse_profile(game, &p.profile, false).map_err(|e| field_err(&path, e))?;
                if !p.delta.is_finite() {
                    return Err(field_err(&path, "delta must be finite"));
                }
                Ok(Perturbation { player, profile, delta: p.delta })
            })
            .collect::<Result<Vec<_>>>()?;
        PerturbationSet::from_entries(entries, 0.0)
    }
}

//! Depth-first branch-and-bound over binary variables.
//!
//! One simplex instance is kept for the whole search; each node only
//! rewrites binary bounds, so the previous node's basis is the warm start.

use std::time::{Duration, Instant};

use super::simplex::Simplex;
use super::{Basis, Engine, LpStatus, Tolerances};
use crate::error::Result;
use crate::model::{MilpModel, VarId};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Limits {
    pub max_nodes: Option<u64>,
    pub max_seconds: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct MilpOptions {
    pub limits: Limits,
    pub engine: Engine,
    pub warm_start: Option<Basis>,
    pub tolerances: Tolerances,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct Incumbent {
    pub objective: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MilpResult {
    pub status: MilpStatus,
    /// Best integral point found; present for `Optimal` and possibly for
    /// the limit statuses.
    pub incumbent: Option<Incumbent>,
    pub nodes_explored: u64,
    pub lp_iterations: u64,
    /// Objective of the root relaxation, if it was solved to optimality.
    pub root_bound: Option<f64>,
    pub wall_time: Duration,
    /// Optimal basis of the root relaxation, usable as a later warm start.
    pub root_basis: Option<Basis>,
}

impl MilpResult {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|i| i.objective)
    }
}

struct Node {
    fixings: Vec<(VarId, f64)>,
    parent_bound: f64,
}

pub fn solve_milp(model: &MilpModel, limits: Limits) -> Result<MilpResult> {
    solve_milp_with(model, &MilpOptions { limits, ..MilpOptions::default() })
}

pub fn solve_milp_with(model: &MilpModel, options: &MilpOptions) -> Result<MilpResult> {
    let start = Instant::now();
    let tol = options.tolerances;
    let binaries: Vec<VarId> = model.binaries().collect();
    let original: Vec<(f64, f64)> = binaries.iter().map(|&v| (model.var(v).lower, model.var(v).upper)).collect();
    let mut lp = Simplex::new(model, options.engine, tol);
    if let Some(b) = &options.warm_start {
        lp.load_basis(b);
    }

    let mut result = MilpResult {
        status: MilpStatus::Infeasible,
        incumbent: None,
        nodes_explored: 0,
        lp_iterations: 0,
        root_bound: None,
        wall_time: Duration::ZERO,
        root_basis: None,
    };
    let mut stack = vec![Node { fixings: Vec::new(), parent_bound: f64::NEG_INFINITY }];
    let mut limit_hit = None;

    while let Some(node) = stack.pop() {
        if let Some(inc) = &result.incumbent {
            if node.parent_bound >= inc.objective - tol.objective {
                continue;
            }
        }
        if options.limits.max_nodes.is_some_and(|cap| result.nodes_explored >= cap) {
            limit_hit = Some(MilpStatus::NodeLimit);
            break;
        }
        if options.limits.max_seconds.is_some_and(|cap| start.elapsed().as_secs_f64() >= cap) {
            limit_hit = Some(MilpStatus::TimeLimit);
            break;
        }
        result.nodes_explored += 1;

        for (&v, &(lo, hi)) in binaries.iter().zip(&original) {
            lp.set_bounds(v, lo, hi);
        }
        for &(v, x) in &node.fixings {
            lp.set_bounds(v, x, x);
        }
        let status = lp.solve()?;
        let root = node.fixings.is_empty();
        match status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // Binaries are bounded, so an unbounded node means the
                // continuous part is unbounded everywhere it is feasible.
                result.status = MilpStatus::Unbounded;
                result.incumbent = None;
                result.lp_iterations = lp.iterations;
                result.wall_time = start.elapsed();
                return Ok(result);
            }
            LpStatus::Optimal => {}
        }
        let bound = lp.objective();
        if root {
            result.root_bound = Some(bound);
            result.root_basis = Some(lp.basis());
        }
        if let Some(inc) = &result.incumbent {
            if bound >= inc.objective - tol.objective {
                continue;
            }
        }

        let values = lp.values();
        let branch = most_fractional(&binaries, &values, tol.integrality);
        match branch {
            None => {
                if let Some(inc) = polish(&mut lp, &binaries, &values)? {
                    if result.incumbent.as_ref().map_or(true, |best| inc.objective < best.objective - tol.objective) {
                        log::debug!("incumbent {:.6} at node {}", inc.objective, result.nodes_explored);
                        result.incumbent = Some(inc);
                    }
                }
            }
            Some(v) => {
                // Explore the side the relaxation leans toward first.
                let near = if values[v] >= 0.5 { 1.0 } else { 0.0 };
                for x in [1.0 - near, near] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((v, x));
                    stack.push(Node { fixings, parent_bound: bound });
                }
            }
        }
    }

    result.lp_iterations = lp.iterations;
    result.wall_time = start.elapsed();
    result.status = match (limit_hit, &result.incumbent) {
        (Some(s), _) => s,
        (None, Some(_)) => MilpStatus::Optimal,
        (None, None) => MilpStatus::Infeasible,
    };
    Ok(result)
}

/// Binary farthest from integrality, lowest id on ties.
fn most_fractional(binaries: &[VarId], values: &[f64], tol: f64) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for &v in binaries {
        let frac = (values[v] - values[v].round()).abs();
        if frac > tol && best.map_or(true, |(_, f)| frac > f) {
            best = Some((v, frac));
        }
    }
    best.map(|(v, _)| v)
}

/// Re-solves with every binary fixed to its rounded value so the returned
/// point is exactly integral.
fn polish(lp: &mut Simplex, binaries: &[VarId], values: &[f64]) -> Result<Option<Incumbent>> {
    for &v in binaries {
        let x = values[v].round();
        lp.set_bounds(v, x, x);
    }
    match lp.solve()? {
        LpStatus::Optimal => Ok(Some(Incumbent { objective: lp.objective(), values: lp.values() })),
        _ => Ok(None),
    }
}

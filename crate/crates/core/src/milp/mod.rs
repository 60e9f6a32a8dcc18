//! Exact MILP solving: bounded primal simplex inside depth-first
//! branch-and-bound over the binary variables.

mod bnb;
mod factor;
mod form;
mod simplex;

use crate::error::{Error, Result};
use crate::game::{support_tolerance, Perturbation, PerturbationSet};
use crate::model::{MilpModel, Role, Sign, VarId, VarKind};

pub use bnb::{solve_milp, solve_milp_with, Incumbent, Limits, MilpOptions, MilpResult, MilpStatus};
pub use simplex::DENSE_THRESHOLD;

use simplex::Simplex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Allowed bound violation of basic variables.
    pub feasibility: f64,
    /// Distance from {0, 1} still counted as integral.
    pub integrality: f64,
    /// Slack when comparing a node bound against the incumbent.
    pub objective: f64,
    /// Reduced-cost threshold for entering candidates.
    pub optimality: f64,
    /// Smallest usable pivot magnitude.
    pub pivot: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            integrality: 1e-6,
            objective: 1e-9,
            optimality: 1e-9,
            pivot: 1e-9,
            bland_after: 60,
        }
    }
}

/// Which basis representation the simplex uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    /// Dense tableau below [`DENSE_THRESHOLD`] variables, eta file above.
    #[default]
    Auto,
    Dense,
    Revised,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// Basis status of every column and every row logical; enough to warm
/// start a later solve, including one on a model extended with new
/// variables or rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub columns: Vec<VarState>,
    pub rows: Vec<VarState>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub basis: Basis,
    pub iterations: u64,
    /// Whether Bland's rule was engaged.
    pub used_bland: bool,
}

#[derive(Clone, Debug, Default)]
pub struct LpOptions {
    pub engine: Engine,
    pub warm_start: Option<Basis>,
    pub tolerances: Tolerances,
}

/// Solves the LP relaxation of `model` with some binaries fixed.
pub fn solve_lp(model: &MilpModel, fixed: &[(VarId, bool)]) -> Result<LpSolution> {
    solve_lp_with(model, fixed, &LpOptions::default())
}

pub fn solve_lp_with(model: &MilpModel, fixed: &[(VarId, bool)], options: &LpOptions) -> Result<LpSolution> {
    let mut lp = Simplex::new(model, options.engine, options.tolerances);
    if let Some(b) = &options.warm_start {
        lp.load_basis(b);
    }
    for &(v, on) in fixed {
        if v >= model.num_vars() || model.var(v).kind != VarKind::Binary {
            return Err(Error::OutOfRange(format!("variable {v} is not a binary of the model")));
        }
        let x = if on { 1.0 } else { 0.0 };
        lp.set_bounds(v, x, x);
    }
    let status = lp.solve()?;
    Ok(snapshot(&lp, status))
}

fn snapshot(lp: &Simplex, status: LpStatus) -> LpSolution {
    LpSolution {
        status,
        objective: if status == LpStatus::Optimal { lp.objective() } else { f64::NAN },
        values: lp.values(),
        basis: lp.basis(),
        iterations: lp.iterations,
        used_bland: lp.used_bland,
    }
}

/// Alpha variables whose value counts as nonzero.
pub fn alpha_support(model: &MilpModel, values: &[f64]) -> Vec<VarId> {
    let tol = support_tolerance(model.epsilon);
    model.alphas().filter(|&v| values[v] > tol).collect()
}

/// Shrinks the support of an optimal point without raising its objective.
///
/// Binaries stay at their incumbent values except the indicators of
/// dropped alphas. Each support alpha, in id order, is pinned to zero and
/// the LP re-solved; the change is kept when the objective does not rise.
/// Alternative optima that split one requirement across several payoffs
/// collapse to a single payoff this way.
pub fn reduce_support(model: &MilpModel, incumbent: &Incumbent, engine: Engine) -> Result<Incumbent> {
    let tol = Tolerances::default();
    let mut lp = Simplex::new(model, engine, tol);
    for v in model.binaries() {
        let x = incumbent.values[v].round();
        lp.set_bounds(v, x, x);
    }
    let mut best = incumbent.clone();
    let stol = support_tolerance(model.epsilon);
    for a in alpha_support(model, &incumbent.values) {
        if best.values[a] <= stol {
            continue;
        }
        let indicator = model.find(&Role::Y { alpha: a });
        let saved = (lp.bounds(a), indicator.map(|y| lp.bounds(y)));
        lp.set_bounds(a, 0.0, 0.0);
        if let Some(y) = indicator {
            lp.set_bounds(y, 0.0, 0.0);
        }
        let kept = lp.solve()? == LpStatus::Optimal && lp.objective() <= best.objective + tol.objective * (1.0 + best.objective.abs());
        if kept {
            best = Incumbent { objective: lp.objective(), values: lp.values() };
        } else {
            lp.set_bounds(a, saved.0 .0, saved.0 .1);
            if let (Some(y), Some((lo, hi))) = (indicator, saved.1) {
                lp.set_bounds(y, lo, hi);
            }
        }
    }
    Ok(best)
}

/// Nets each `alpha_plus - alpha_minus` pair into a perturbation set.
///
/// Both halves of a pair being nonzero cannot happen at an optimum (the
/// objective would drop by shrinking both), so it is reported as an
/// inconsistency.
pub fn extract_perturbations(model: &MilpModel, result: &MilpResult) -> Result<PerturbationSet> {
    let incumbent = match (&result.status, &result.incumbent) {
        (MilpStatus::Optimal, Some(inc)) => inc,
        (status, _) => return Err(Error::NotOptimal(format!("MILP status {status:?}"))),
    };
    perturbations_from_values(model, &incumbent.values)
}

pub fn perturbations_from_values(model: &MilpModel, values: &[f64]) -> Result<PerturbationSet> {
    let tol = support_tolerance(model.epsilon);
    let mut entries: Vec<Perturbation> = Vec::new();
    for v in model.alphas() {
        let Role::Alpha { player, profile, sign: Sign::Plus } = &model.var(v).role else {
            continue;
        };
        let minus = model
            .find(&Role::Alpha { player: *player, profile: profile.clone(), sign: Sign::Minus })
            .map_or(0.0, |m| values[m]);
        let plus = values[v];
        if plus > tol && minus > tol {
            return Err(Error::Inconsistent(format!(
                "payoff of player {player} at {profile} is both raised ({plus}) and lowered ({minus})"
            )));
        }
        entries.push(Perturbation { player: *player, profile: profile.clone(), delta: plus - minus });
    }
    PerturbationSet::from_entries(entries, tol)
}

//! Solver-agnostic mixed-integer model and the game-engineering builder.

mod build;
mod lp_format;
mod spec;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::game::Profile;

pub use build::{
    auto_big_m, build_engineering_model, build_engineering_model_with, default_max_perturbation,
    BuildOptions, DEFAULT_MAX_PAYOFF_ENTRIES,
};
pub use lp_format::export_lp;
pub use spec::{BmaxIndexing, EngineeringSpec};

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    ContinuousNonneg,
    ContinuousFree,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

/// What a variable stands for in the engineering formulation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Increase (`Plus`) or decrease (`Minus`) of `player`'s payoff at `profile`.
    Alpha { player: usize, profile: Profile, sign: Sign },
    /// Best payoff of `player` in the context of the `undesired`-th undesired profile.
    Bmax { undesired: usize, player: usize },
    /// Selects `strategy` as `player`'s strict improvement over the `undesired`-th profile.
    W { undesired: usize, player: usize, strategy: usize },
    /// Nonzero indicator linked to an alpha variable by an integer cut.
    Y { alpha: VarId },
    /// Untagged variable in a hand-built model.
    Named(String),
}

impl Role {
    pub fn is_alpha(&self) -> bool {
        matches!(self, Role::Alpha { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub role: Role,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Which block of the formulation a row belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Strict best response at a desired profile.
    Desired,
    /// The context maximum must beat the undesired payoff by epsilon.
    UndesiredGap,
    /// The context maximum dominates every payoff in the context.
    UndesiredMax,
    /// Big-M row tying the context maximum to the selected deviation.
    UndesiredSelect,
    /// At most one selected deviation per context.
    NoTies,
    /// Some player must have a selected deviation.
    Disjunction,
    /// Links an alpha to its nonzero indicator.
    CutLink,
    /// Excludes a previously found support.
    Cut,
    Other,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub family: Family,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelStats {
    pub num_continuous: usize,
    pub num_binary: usize,
    pub num_constraints: usize,
    pub num_nonzeros: usize,
}

/// A minimization MILP over bounded continuous and binary variables.
#[derive(Clone, Debug, Default)]
pub struct MilpModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    roles: HashMap<Role, VarId>,
    /// Strictness margin used when linking cut indicators.
    pub epsilon: f64,
    /// Big-M used when linking cut indicators.
    pub big_m: f64,
    cuts: usize,
}

impl MilpModel {
    pub fn new() -> Self {
        MilpModel { epsilon: 0.01, big_m: 1e3, ..Default::default() }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        cost: f64,
        role: Role,
    ) -> VarId {
        let id = self.vars.len();
        if !matches!(role, Role::Named(_)) {
            self.roles.insert(role.clone(), id);
        }
        self.vars.push(Variable { name: name.into(), kind, lower, upper, cost, role });
        id
    }

    /// Nonnegative continuous variable with an optional upper bound.
    pub fn add_continuous(&mut self, name: &str, upper: f64, cost: f64) -> VarId {
        self.add_var(name, VarKind::ContinuousNonneg, 0.0, upper, cost, Role::Named(name.into()))
    }

    pub fn add_free(&mut self, name: &str, cost: f64) -> VarId {
        self.add_var(
            name,
            VarKind::ContinuousFree,
            f64::NEG_INFINITY,
            f64::INFINITY,
            cost,
            Role::Named(name.into()),
        )
    }

    pub fn add_binary(&mut self, name: &str, cost: f64) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, cost, Role::Named(name.into()))
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        family: Family,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint { name: name.into(), family, terms, sense, rhs });
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn find(&self, role: &Role) -> Option<VarId> {
        self.roles.get(role).copied()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.kind == VarKind::Binary).map(|(i, _)| i)
    }

    pub fn alphas(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.role.is_alpha()).map(|(i, _)| i)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum()
    }

    /// Largest bound or row violation of `values`, computed by direct
    /// substitution.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn stats(&self) -> ModelStats {
        let num_binary = self.vars.iter().filter(|v| v.kind == VarKind::Binary).count();
        ModelStats {
            num_continuous: self.vars.len() - num_binary,
            num_binary,
            num_constraints: self.constraints.len(),
            num_nonzeros: self.constraints.iter().map(|c| c.terms.len()).sum(),
        }
    }

    pub fn num_cuts(&self) -> usize {
        self.cuts
    }

    /// Excludes every solution whose nonzero set contains `support`.
    ///
    /// Each variable in `support` gets a binary indicator `y` (reused when it
    /// already has one) constrained so that `y = 1` iff the variable is at
    /// least `epsilon`, and `y = 0` iff it is zero. The cut row then caps
    /// the number of active indicators at `|support| - 1`.
    pub fn add_integer_cut(&mut self, support: &[VarId]) -> Result<()> {
        let mut ids: Vec<VarId> = support.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::EmptySupport);
        }
        for &id in &ids {
            let v = self
                .vars
                .get(id)
                .ok_or_else(|| Error::OutOfRange(format!("variable {id} in cut support")))?;
            if v.kind != VarKind::ContinuousNonneg {
                return Err(Error::InvalidSpec(format!(
                    "cut support variable {} is not a nonnegative continuous variable",
                    v.name
                )));
            }
        }
        let mut indicators = Vec::with_capacity(ids.len());
        for &id in &ids {
            let role = Role::Y { alpha: id };
            let y = match self.find(&role) {
                Some(y) => y,
                None => {
                    let alpha = &self.vars[id];
                    let big_m = if alpha.upper.is_finite() {
                        self.big_m.max(alpha.upper)
                    } else {
                        self.big_m
                    };
                    let name = format!("y_{}", alpha.name);
                    let y = self.add_var(name.clone(), VarKind::Binary, 0.0, 1.0, 0.0, role);
                    // eps*y - M*(1 - y) <= alpha
                    self.add_constraint(
                        format!("lnk_lo_{name}"),
                        Family::CutLink,
                        vec![(id, 1.0), (y, -(self.epsilon + big_m))],
                        Sense::Ge,
                        -big_m,
                    );
                    // alpha <= M*y
                    self.add_constraint(
                        format!("lnk_hi_{name}"),
                        Family::CutLink,
                        vec![(id, 1.0), (y, -big_m)],
                        Sense::Le,
                        0.0,
                    );
                    y
                }
            };
            indicators.push(y);
        }
        let bound = (indicators.len() - 1) as f64;
        self.add_constraint(
            format!("cut_{}", self.cuts),
            Family::Cut,
            indicators.into_iter().map(|y| (y, 1.0)).collect(),
            Sense::Le,
            bound,
        );
        self.cuts += 1;
        Ok(())
    }

    /// Copy of this model keeping only rows whose family passes `keep`.
    pub fn filtered(&self, keep: impl Fn(Family) -> bool) -> MilpModel {
        MilpModel {
            constraints: self.constraints.iter().filter(|c| keep(c.family)).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Counts for a model: (continuous, binary, constraints, nonzeros).
pub fn model_stats(model: &MilpModel) -> ModelStats {
    model.stats()
}

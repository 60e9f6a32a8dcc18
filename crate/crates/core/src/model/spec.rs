use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Profile};

/// How the context-maximum variables of undesired profiles are indexed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmaxIndexing {
    /// One maximum per (undesired profile, player).
    #[default]
    PerProfile,
    /// One maximum per (player, context), shared by every undesired profile
    /// in that context.
    PaperShared,
}

/// What to engineer and how to solve it.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineeringSpec {
    /// Profiles that must become strict pure equilibria.
    pub desired: Vec<Profile>,
    /// Profiles that must stop being equilibria.
    pub undesired: Vec<Profile>,
    pub epsilon: f64,
    /// Explicit big-M; computed from the game when absent.
    pub big_m: Option<f64>,
    /// Forbid perturbing any payoff at an undesired profile.
    pub freeze_undesired: bool,
    /// Upper bound on each perturbation magnitude; defaults to payoff range + 1.
    pub max_perturbation: Option<f64>,
    /// `None` enumerates until the cuts make the model infeasible.
    pub max_solutions: Option<usize>,
    pub bmax_indexing: BmaxIndexing,
    /// Stop enumerating once the optimum exceeds this total perturbation.
    pub objective_ceiling: Option<f64>,
    pub node_limit: Option<u64>,
    pub time_limit: Option<f64>,
}

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_MAX_SOLUTIONS: usize = 64;

impl Default for EngineeringSpec {
    fn default() -> Self {
        EngineeringSpec {
            desired: Vec::new(),
            undesired: Vec::new(),
            epsilon: DEFAULT_EPSILON,
            big_m: None,
            freeze_undesired: true,
            max_perturbation: None,
            max_solutions: Some(DEFAULT_MAX_SOLUTIONS),
            bmax_indexing: BmaxIndexing::PerProfile,
            objective_ceiling: None,
            node_limit: None,
            time_limit: None,
        }
    }
}

impl EngineeringSpec {
    pub fn new(desired: Vec<Profile>, undesired: Vec<Profile>) -> Self {
        EngineeringSpec { desired, undesired, ..Default::default() }
    }

    /// Checks the spec against `game`. `allow_overlap` skips the D/U
    /// disjointness rule so contradictory models can be built on purpose.
    pub fn validate(&self, game: &Game, allow_overlap: bool) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidSpec(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let Some(m) = self.big_m {
            if !(m.is_finite() && m > self.epsilon) {
                return Err(Error::InvalidSpec(format!(
                    "big_m must exceed epsilon ({}), got {m}",
                    self.epsilon
                )));
            }
        }
        if let Some(p) = self.max_perturbation {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidSpec(format!("max_perturbation must be positive, got {p}")));
            }
        }
        if self.max_solutions == Some(0) {
            return Err(Error::InvalidSpec("max_solutions must be positive".into()));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Error::InvalidSpec(format!("time_limit must be positive, got {t}")));
            }
        }
        for (set, name) in [(&self.desired, "desired"), (&self.undesired, "undesired")] {
            let mut seen = HashSet::new();
            for prof in set {
                game.profile_index(prof)?;
                if !seen.insert(prof) {
                    return Err(Error::InvalidSpec(format!("profile {prof} repeated in {name} set")));
                }
            }
        }
        if !allow_overlap {
            let undesired: HashSet<&Profile> = self.undesired.iter().collect();
            if let Some(p) = self.desired.iter().find(|p| undesired.contains(p)) {
                return Err(Error::InvalidSpec(format!(
                    "profile {p} is both desired and undesired"
                )));
            }
        }
        Ok(())
    }
}

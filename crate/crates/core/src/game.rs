//! Finite normal-form games and the brute-force pure Nash equilibrium oracle.
//!
//! Payoffs live in a dense tensor laid out profile-major: profiles are ordered
//! lexicographically with player 0 outermost, and each profile stores one
//! payoff per player. The oracle is exhaustive over all profiles; it is meant
//! for games up to roughly 10^7 profiles.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Slack allowed when comparing payoffs in equilibrium checks.
pub const COMPARISON_TOLERANCE: f64 = 1e-9;

/// Magnitude below which a solver-reported perturbation is treated as zero.
///
/// Nonzero perturbations linked to an integer cut are forced to at least
/// `epsilon`, so anything under half of it is noise; the absolute cap keeps
/// genuinely small (sub-epsilon) adjustments from being dropped.
pub fn support_tolerance(epsilon: f64) -> f64 {
    (epsilon / 2.0).min(1e-6)
}

/// One strategy index per player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Profile(Vec<usize>);

impl Profile {
    pub fn new(strategies: Vec<usize>) -> Self {
        Profile(strategies)
    }

    pub fn strategies(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Strategy chosen by `player`.
    pub fn strategy(&self, player: usize) -> usize {
        self.0[player]
    }

    /// Copy of this profile with `player` switched to `strategy`.
    pub fn with_strategy(&self, player: usize, strategy: usize) -> Profile {
        let mut s = self.0.clone();
        s[player] = strategy;
        Profile(s)
    }
}

impl From<Vec<usize>> for Profile {
    fn from(v: Vec<usize>) -> Self {
        Profile(v)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// A signed change to one player's payoff at one profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub player: usize,
    pub profile: Profile,
    pub delta: f64,
}

/// Sparse set of payoff changes keyed by (profile, player).
///
/// Entries are kept sorted by profile then player, keys are unique, and
/// deltas below the construction tolerance are dropped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerturbationSet {
    entries: Vec<Perturbation>,
}

impl PerturbationSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a set, dropping entries with `|delta| < tolerance`.
    ///
    /// Duplicate (player, profile) keys are rejected.
    pub fn from_entries(
        entries: impl IntoIterator<Item = Perturbation>,
        tolerance: f64,
    ) -> Result<Self> {
        let mut entries: Vec<Perturbation> = entries
            .into_iter()
            .filter(|p| p.delta.abs() >= tolerance)
            .collect();
        entries.sort_by(|a, b| (&a.profile, a.player).cmp(&(&b.profile, b.player)));
        for pair in entries.windows(2) {
            if pair[0].profile == pair[1].profile && pair[0].player == pair[1].player {
                return Err(Error::InvalidSpec(format!(
                    "duplicate perturbation for player {} at {}",
                    pair[0].player, pair[0].profile
                )));
            }
        }
        if let Some(p) = entries.iter().find(|p| !p.delta.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "non-finite perturbation for player {} at {}",
                p.player, p.profile
            )));
        }
        Ok(PerturbationSet { entries })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Perturbation> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of absolute deltas.
    pub fn total_magnitude(&self) -> f64 {
        self.entries.iter().map(|p| p.delta.abs()).sum()
    }

    pub fn get(&self, player: usize, profile: &Profile) -> Option<f64> {
        self.entries
            .iter()
            .find(|p| p.player == player && &p.profile == profile)
            .map(|p| p.delta)
    }

    /// The same keys with every delta negated.
    pub fn negated(&self) -> Self {
        PerturbationSet {
            entries: self
                .entries
                .iter()
                .map(|p| Perturbation { delta: -p.delta, ..p.clone() })
                .collect(),
        }
    }
}

/// A K-player normal-form game with a dense payoff tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    player_names: Vec<String>,
    strategy_names: Vec<Vec<String>>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    payoffs: Vec<f64>,
}

impl Game {
    /// Validates and builds a game.
    ///
    /// `payoffs` holds, for every profile in lexicographic order (player 0
    /// outermost), one payoff per player.
    pub fn new(
        num_players: usize,
        strategy_names: Vec<Vec<String>>,
        payoffs: Vec<f64>,
    ) -> Result<Game> {
        if num_players == 0 {
            return Err(Error::Dimension("a game needs at least one player".into()));
        }
        if strategy_names.len() != num_players {
            return Err(Error::Dimension(format!(
                "{} strategy lists for {} players",
                strategy_names.len(),
                num_players
            )));
        }
        for (player, names) in strategy_names.iter().enumerate() {
            if names.is_empty() {
                return Err(Error::Dimension(format!("player {player} has no strategies")));
            }
            let mut seen = HashSet::new();
            for label in names {
                if !seen.insert(label.as_str()) {
                    return Err(Error::DuplicateLabel { player, label: label.clone() });
                }
            }
        }
        let shape: Vec<usize> = strategy_names.iter().map(Vec::len).collect();
        let cells = shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .and_then(|c| c.checked_mul(num_players))
            .ok_or_else(|| Error::Dimension("payoff tensor size overflows".into()))?;
        if payoffs.len() != cells {
            return Err(Error::Dimension(format!(
                "expected {} payoff entries, found {}",
                cells,
                payoffs.len()
            )));
        }
        if let Some(index) = payoffs.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePayoff { index });
        }
        let mut strides = vec![1usize; num_players];
        for k in (0..num_players.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let player_names = (1..=num_players).map(|k| format!("P{k}")).collect();
        Ok(Game { player_names, strategy_names, shape, strides, payoffs })
    }

    /// Replaces the default player names (`P1`, `P2`, ...).
    pub fn with_player_names(mut self, names: Vec<String>) -> Result<Game> {
        if names.len() != self.num_players() {
            return Err(Error::Dimension(format!(
                "{} player names for {} players",
                names.len(),
                self.num_players()
            )));
        }
        self.player_names = names;
        Ok(self)
    }

    pub fn num_players(&self) -> usize {
        self.shape.len()
    }

    pub fn num_strategies(&self, player: usize) -> usize {
        self.shape[player]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn num_profiles(&self) -> usize {
        self.payoffs.len() / self.num_players()
    }

    pub fn player_names(&self) -> &[String] {
        &self.player_names
    }

    pub fn strategy_names(&self, player: usize) -> &[String] {
        &self.strategy_names[player]
    }

    /// Raw payoff tensor in storage order.
    pub fn payoff_entries(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::OutOfRange(format!(
                "player {player} in a {}-player game",
                self.num_players()
            )));
        }
        Ok(())
    }

    /// Linear index of a profile in storage order.
    pub fn profile_index(&self, profile: &Profile) -> Result<usize> {
        if profile.len() != self.num_players() {
            return Err(Error::OutOfRange(format!(
                "profile {profile} has {} entries for a {}-player game",
                profile.len(),
                self.num_players()
            )));
        }
        let mut idx = 0;
        for (k, &s) in profile.strategies().iter().enumerate() {
            if s >= self.shape[k] {
                return Err(Error::OutOfRange(format!(
                    "strategy {s} for player {k} (has {})",
                    self.shape[k]
                )));
            }
            idx += s * self.strides[k];
        }
        Ok(idx)
    }

    /// Profile at a linear index. Panics when `index >= num_profiles()`.
    pub fn profile_at(&self, index: usize) -> Profile {
        assert!(index < self.num_profiles(), "profile index {index} out of range");
        Profile(
            self.shape
                .iter()
                .zip(&self.strides)
                .map(|(&n, &stride)| (index / stride) % n)
                .collect(),
        )
    }

    pub fn strategy_at(&self, index: usize, player: usize) -> usize {
        (index / self.strides[player]) % self.shape[player]
    }

    /// Linear indices of every profile in `player`'s context at `index`,
    /// i.e. all profiles reached by switching only `player`'s strategy,
    /// including `index` itself. Ascending order.
    pub fn context_indices(&self, index: usize, player: usize) -> impl Iterator<Item = usize> {
        let stride = self.strides[player];
        let base = index - self.strategy_at(index, player) * stride;
        (0..self.shape[player]).map(move |s| base + s * stride)
    }

    /// Like [`Game::context_indices`] but excluding `index`.
    pub fn deviation_indices(&self, index: usize, player: usize) -> impl Iterator<Item = usize> {
        self.context_indices(index, player).filter(move |&i| i != index)
    }

    /// Payoff of `player` at the profile with linear index `index`.
    pub fn payoff_at(&self, index: usize, player: usize) -> f64 {
        self.payoffs[index * self.num_players() + player]
    }

    pub fn payoff(&self, profile: &Profile, player: usize) -> Result<f64> {
        self.check_player(player)?;
        let idx = self.profile_index(profile)?;
        Ok(self.payoff_at(idx, player))
    }

    /// Smallest and largest payoff anywhere in the tensor.
    pub fn payoff_bounds(&self) -> (f64, f64) {
        self.payoffs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// All profiles differing from `profile` only in `player`'s strategy,
    /// ascending by that strategy.
    pub fn unilateral_deviations(&self, profile: &Profile, player: usize) -> Result<Vec<Profile>> {
        self.check_player(player)?;
        self.profile_index(profile)?;
        let own = profile.strategy(player);
        Ok((0..self.shape[player])
            .filter(|&s| s != own)
            .map(|s| profile.with_strategy(player, s))
            .collect())
    }

    /// Weak-inequality Nash check by scanning every unilateral deviation.
    pub fn is_pure_nash(&self, profile: &Profile) -> Result<bool> {
        let idx = self.profile_index(profile)?;
        Ok(self.is_pure_nash_at(idx))
    }

    pub fn is_pure_nash_at(&self, index: usize) -> bool {
        (0..self.num_players()).all(|k| {
            let own = self.payoff_at(index, k);
            self.deviation_indices(index, k)
                .all(|d| own >= self.payoff_at(d, k) - COMPARISON_TOLERANCE)
        })
    }

    /// Every pure Nash equilibrium, in profile order.
    ///
    /// Runs in O(K * profiles) by precomputing each player's best payoff in
    /// every context rather than rescanning deviations per profile.
    pub fn enumerate_pure_nash(&self) -> Vec<Profile> {
        self.pure_nash_indices().into_iter().map(|i| self.profile_at(i)).collect()
    }

    pub fn pure_nash_indices(&self) -> Vec<usize> {
        let cells = self.num_profiles();
        let mut is_ne = vec![true; cells];
        let mut best = vec![f64::NEG_INFINITY; cells];
        for k in 0..self.num_players() {
            let stride = self.strides[k];
            best.iter_mut().for_each(|b| *b = f64::NEG_INFINITY);
            for idx in 0..cells {
                let ctx = idx - self.strategy_at(idx, k) * stride;
                let p = self.payoff_at(idx, k);
                if p > best[ctx] {
                    best[ctx] = p;
                }
            }
            for (idx, ne) in is_ne.iter_mut().enumerate() {
                if *ne {
                    let ctx = idx - self.strategy_at(idx, k) * stride;
                    *ne = self.payoff_at(idx, k) >= best[ctx] - COMPARISON_TOLERANCE;
                }
            }
        }
        is_ne.iter().enumerate().filter(|(_, &ne)| ne).map(|(i, _)| i).collect()
    }

    /// New game with `b = a + delta` at every listed key; other entries are
    /// copied untouched.
    pub fn apply_perturbations(&self, perturbations: &PerturbationSet) -> Result<Game> {
        let mut out = self.clone();
        for p in perturbations.iter() {
            self.check_player(p.player)?;
            let idx = self.profile_index(&p.profile)?;
            out.payoffs[idx * self.num_players() + p.player] += p.delta;
        }
        Ok(out)
    }

    /// Same game with two strategy labels of `player` swapped.
    pub fn swap_strategies(&self, player: usize, a: usize, b: usize) -> Result<Game> {
        self.check_player(player)?;
        if a >= self.shape[player] || b >= self.shape[player] {
            return Err(Error::OutOfRange(format!("strategy swap {a}<->{b} for player {player}")));
        }
        let mut out = self.clone();
        out.strategy_names[player].swap(a, b);
        let k = self.num_players();
        for idx in 0..self.num_profiles() {
            let s = self.strategy_at(idx, player);
            let src_s = if s == a { b } else if s == b { a } else { s };
            let src = idx - s * self.strides[player] + src_s * self.strides[player];
            out.payoffs[idx * k..(idx + 1) * k].copy_from_slice(&self.payoffs[src * k..(src + 1) * k]);
        }
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Prisoner's dilemma with cooperation index 0 and defection index 1.
    pub fn prisoners_dilemma() -> Game {
        Game::new(
            2,
            vec![labels(&["C", "D"]), labels(&["C", "D"])],
            vec![-1.0, -1.0, -4.0, 0.0, 0.0, -4.0, -3.0, -3.0],
        )
        .unwrap()
    }

    pub fn snowdrift() -> Game {
        Game::new(
            2,
            vec![labels(&["C", "D"]), labels(&["C", "D"])],
            vec![3.0, 3.0, 1.0, 5.0, 5.0, 1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    pub fn p(s: &[usize]) -> Profile {
        Profile::new(s.to_vec())
    }
}

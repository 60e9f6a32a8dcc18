use std::collections::{BTreeSet, HashMap, HashSet};

use super::{EngineeringSpec, Family, MilpModel, Role, Sense, Sign, VarId, VarKind};
use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::model::BmaxIndexing;

/// Default cap on `players * profiles` for a buildable model.
pub const DEFAULT_MAX_PAYOFF_ENTRIES: usize = 20_000_000;

#[derive(Clone, Debug)]
pub struct BuildOptions {
    /// Only create perturbation variables for payoffs that appear in a row.
    pub presolve: bool,
    /// Skip the desired/undesired disjointness check.
    pub allow_overlap: bool,
    pub max_payoff_entries: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { presolve: true, allow_overlap: false, max_payoff_entries: DEFAULT_MAX_PAYOFF_ENTRIES }
    }
}

/// Payoff range plus one.
pub fn default_max_perturbation(game: &Game) -> f64 {
    let (lo, hi) = game.payoff_bounds();
    hi - lo + 1.0
}

/// The spec's big-M, or `2 * (range + max_perturbation) + epsilon`.
///
/// With every perturbation bounded by `max_perturbation`, any two perturbed
/// payoffs differ by at most `range + 2 * max_perturbation`, so the
/// selection rows are slack whenever their indicator is off.
pub fn auto_big_m(game: &Game, spec: &EngineeringSpec) -> f64 {
    if let Some(m) = spec.big_m {
        return m;
    }
    let (lo, hi) = game.payoff_bounds();
    let range = hi - lo;
    let cap = spec.max_perturbation.unwrap_or(range + 1.0);
    2.0 * (range + cap) + spec.epsilon
}

pub fn build_engineering_model(game: &Game, spec: &EngineeringSpec) -> Result<MilpModel> {
    build_engineering_model_with(game, spec, &BuildOptions::default())
}

#[derive(Clone, Copy)]
enum Ref {
    Payoff { player: usize, profile: usize },
    Aux(usize),
}

struct DraftRow {
    name: String,
    family: Family,
    terms: Vec<(Ref, f64)>,
    sense: Sense,
    rhs: f64,
}

struct AuxVar {
    name: String,
    kind: VarKind,
    lower: f64,
    upper: f64,
    role: Role,
}

/// One context maximum and its selection binaries.
struct Group {
    player: usize,
    first: usize,
    /// Linear index of the first profile of the context.
    base: usize,
    members: Vec<usize>,
    bmax: usize,
    selectors: Vec<(usize, usize)>,
}

fn profile_tag(p: &Profile) -> String {
    let parts: Vec<String> = p.strategies().iter().map(|s| s.to_string()).collect();
    format!("s{}", parts.join("_"))
}

/// Builds the perturbation MILP for `spec`.
///
/// Payoffs enter rows as the affine expression `a + alpha_plus - alpha_minus`;
/// constants are folded into the right-hand side.
pub fn build_engineering_model_with(
    game: &Game,
    spec: &EngineeringSpec,
    opts: &BuildOptions,
) -> Result<MilpModel> {
    spec.validate(game, opts.allow_overlap)?;
    let entries = game.num_profiles().saturating_mul(game.num_players());
    if entries > opts.max_payoff_entries {
        return Err(Error::ModelTooLarge { entries, limit: opts.max_payoff_entries });
    }
    let eps = spec.epsilon;
    let cap = spec.max_perturbation.unwrap_or_else(|| default_max_perturbation(game));
    let big_m = auto_big_m(game, spec);
    let players = game.num_players();

    let desired: Vec<usize> =
        spec.desired.iter().map(|p| game.profile_index(p)).collect::<Result<_>>()?;
    let undesired: Vec<usize> =
        spec.undesired.iter().map(|p| game.profile_index(p)).collect::<Result<_>>()?;
    let frozen: HashSet<usize> =
        if spec.freeze_undesired { undesired.iter().copied().collect() } else { HashSet::new() };

    let mut rows: Vec<DraftRow> = Vec::new();
    let mut aux: Vec<AuxVar> = Vec::new();

    for (i, &d) in desired.iter().enumerate() {
        for k in 0..players {
            for dev in game.deviation_indices(d, k) {
                rows.push(DraftRow {
                    name: format!("des_d{i}_k{k}_s{}", game.strategy_at(dev, k)),
                    family: Family::Desired,
                    terms: vec![
                        (Ref::Payoff { player: k, profile: d }, 1.0),
                        (Ref::Payoff { player: k, profile: dev }, -1.0),
                    ],
                    sense: Sense::Ge,
                    rhs: eps,
                });
            }
        }
    }

    // group_of[u][k] is the context group of player k at undesired profile u.
    let mut groups: Vec<Group> = Vec::new();
    let mut group_of: Vec<Vec<Option<usize>>> = vec![vec![None; players]; undesired.len()];
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    for (ui, &u) in undesired.iter().enumerate() {
        let mut any = false;
        for k in 0..players {
            if game.num_strategies(k) < 2 {
                continue;
            }
            any = true;
            let base = game.context_indices(u, k).next().expect("nonempty context");
            let existing = match spec.bmax_indexing {
                BmaxIndexing::PerProfile => None,
                BmaxIndexing::PaperShared => shared.get(&(k, base)).copied(),
            };
            let g = match existing {
                Some(g) => {
                    groups[g].members.push(ui);
                    g
                }
                None => {
                    let bmax = aux.len();
                    aux.push(AuxVar {
                        name: format!("bmax_u{ui}_k{k}"),
                        kind: VarKind::ContinuousFree,
                        lower: f64::NEG_INFINITY,
                        upper: f64::INFINITY,
                        role: Role::Bmax { undesired: ui, player: k },
                    });
                    shared.insert((k, base), groups.len());
                    groups.push(Group {
                        player: k,
                        first: ui,
                        base,
                        members: vec![ui],
                        bmax,
                        selectors: Vec::new(),
                    });
                    groups.len() - 1
                }
            };
            group_of[ui][k] = Some(g);
        }
        if !any {
            return Err(Error::InvalidSpec(format!(
                "undesired profile {} cannot be broken: no player has an alternative strategy",
                spec.undesired[ui]
            )));
        }
    }

    // Selection binaries exist for every strategy of the context that is not
    // itself one of the group's undesired profiles.
    for g in groups.iter_mut() {
        let excluded: HashSet<usize> =
            g.members.iter().map(|&ui| game.strategy_at(undesired[ui], g.player)).collect();
        for t in 0..game.num_strategies(g.player) {
            if excluded.contains(&t) {
                continue;
            }
            let w = aux.len();
            aux.push(AuxVar {
                name: format!("w_u{}_k{}_d{t}", g.first, g.player),
                kind: VarKind::Binary,
                lower: 0.0,
                upper: 1.0,
                role: Role::W { undesired: g.first, player: g.player, strategy: t },
            });
            g.selectors.push((t, w));
        }
    }

    for g in &groups {
        let k = g.player;
        let stride_profile = |t: usize| -> usize {
            game.context_indices(g.base, k).nth(t).expect("strategy in context")
        };
        for &ui in &g.members {
            rows.push(DraftRow {
                name: format!("gap_u{ui}_k{k}"),
                family: Family::UndesiredGap,
                terms: vec![
                    (Ref::Aux(g.bmax), 1.0),
                    (Ref::Payoff { player: k, profile: undesired[ui] }, -1.0),
                ],
                sense: Sense::Ge,
                rhs: eps,
            });
        }
        for t in 0..game.num_strategies(k) {
            rows.push(DraftRow {
                name: format!("max_u{}_k{k}_s{t}", g.first),
                family: Family::UndesiredMax,
                terms: vec![
                    (Ref::Aux(g.bmax), 1.0),
                    (Ref::Payoff { player: k, profile: stride_profile(t) }, -1.0),
                ],
                sense: Sense::Ge,
                rhs: 0.0,
            });
        }
        for &(t, w) in &g.selectors {
            // bmax <= b + (1 - w) M
            rows.push(DraftRow {
                name: format!("sel_u{}_k{k}_s{t}", g.first),
                family: Family::UndesiredSelect,
                terms: vec![
                    (Ref::Aux(g.bmax), 1.0),
                    (Ref::Payoff { player: k, profile: stride_profile(t) }, -1.0),
                    (Ref::Aux(w), big_m),
                ],
                sense: Sense::Le,
                rhs: big_m,
            });
        }
        if !g.selectors.is_empty() {
            rows.push(DraftRow {
                name: format!("tie_u{}_k{k}", g.first),
                family: Family::NoTies,
                terms: g.selectors.iter().map(|&(_, w)| (Ref::Aux(w), 1.0)).collect(),
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }

    for (ui, per_player) in group_of.iter().enumerate() {
        let terms: Vec<(Ref, f64)> = per_player
            .iter()
            .flatten()
            .flat_map(|&g| groups[g].selectors.iter().map(|&(_, w)| (Ref::Aux(w), 1.0)))
            .collect();
        rows.push(DraftRow {
            name: format!("dis_u{ui}"),
            family: Family::Disjunction,
            terms,
            sense: Sense::Ge,
            rhs: 1.0,
        });
    }

    // Perturbation variables, ordered by (profile, player).
    let needed: BTreeSet<(usize, usize)> = if opts.presolve {
        rows.iter()
            .flat_map(|r| r.terms.iter())
            .filter_map(|&(r, _)| match r {
                Ref::Payoff { player, profile } if !frozen.contains(&profile) => {
                    Some((profile, player))
                }
                _ => None,
            })
            .collect()
    } else {
        (0..game.num_profiles()).flat_map(|s| (0..players).map(move |k| (s, k))).collect()
    };

    let mut model = MilpModel::new();
    model.epsilon = eps;
    model.big_m = big_m;
    let mut alpha_of: HashMap<(usize, usize), (VarId, VarId)> = HashMap::with_capacity(needed.len());
    for &(s, k) in &needed {
        let profile = game.profile_at(s);
        let tag = profile_tag(&profile);
        let upper = if frozen.contains(&s) { 0.0 } else { cap };
        let plus = model.add_var(
            format!("ap_k{k}_{tag}"),
            VarKind::ContinuousNonneg,
            0.0,
            upper,
            1.0,
            Role::Alpha { player: k, profile: profile.clone(), sign: Sign::Plus },
        );
        let minus = model.add_var(
            format!("am_k{k}_{tag}"),
            VarKind::ContinuousNonneg,
            0.0,
            upper,
            1.0,
            Role::Alpha { player: k, profile, sign: Sign::Minus },
        );
        alpha_of.insert((s, k), (plus, minus));
    }
    let aux_ids: Vec<VarId> = aux
        .into_iter()
        .map(|a| model.add_var(a.name, a.kind, a.lower, a.upper, 0.0, a.role))
        .collect();

    for row in rows {
        let mut rhs = row.rhs;
        let mut terms: Vec<(VarId, f64)> = Vec::with_capacity(row.terms.len() + 2);
        for (r, coef) in row.terms {
            match r {
                Ref::Aux(a) => terms.push((aux_ids[a], coef)),
                Ref::Payoff { player, profile } => {
                    rhs -= coef * game.payoff_at(profile, player);
                    if let Some(&(plus, minus)) = alpha_of.get(&(profile, player)) {
                        terms.push((plus, coef));
                        terms.push((minus, -coef));
                    }
                }
            }
        }
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        model.add_constraint(row.name, row.family, merged, row.sense, rhs);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::*;
    use crate::model::{export_lp, ModelStats};

    fn pd_spec() -> EngineeringSpec {
        EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[1, 1])])
    }

    fn count(model: &MilpModel, family: Family) -> usize {
        model.constraints().iter().filter(|c| c.family == family).count()
    }

    #[test]
    fn prisoners_dilemma_counts() {
        let model = build_engineering_model(&prisoners_dilemma(), &pd_spec()).unwrap();
        assert_eq!(model.alphas().count(), 12);
        assert_eq!(model.binaries().count(), 2);
        assert_eq!(count(&model, Family::Desired), 2);
        assert_eq!(count(&model, Family::UndesiredGap), 2);
        assert_eq!(count(&model, Family::UndesiredMax), 4);
        assert_eq!(count(&model, Family::UndesiredSelect), 2);
        assert_eq!(count(&model, Family::NoTies), 2);
        assert_eq!(count(&model, Family::Disjunction), 1);
        let stats = model.stats();
        assert_eq!((stats.num_continuous, stats.num_binary, stats.num_constraints), (14, 2, 13));
        // Frozen undesired cell gets no perturbation variables.
        for v in model.vars() {
            if let Role::Alpha { profile, .. } = &v.role {
                assert_ne!(profile, &p(&[1, 1]));
            }
        }
    }

    #[test]
    fn cut_arithmetic_on_prisoners_dilemma() {
        let mut model = build_engineering_model(&prisoners_dilemma(), &pd_spec()).unwrap();
        let before = model.stats();
        let support: Vec<VarId> = model.alphas().take(3).collect();
        model.add_integer_cut(&support).unwrap();
        let after = model.stats();
        assert_eq!(after.num_binary, before.num_binary + 3);
        assert_eq!(after.num_constraints, before.num_constraints + 7);
    }

    #[test]
    fn empty_spec_is_empty_model() {
        let model =
            build_engineering_model(&prisoners_dilemma(), &EngineeringSpec::default()).unwrap();
        assert_eq!(
            model.stats(),
            ModelStats { num_continuous: 0, num_binary: 0, num_constraints: 0, num_nonzeros: 0 }
        );
    }

    #[test]
    fn four_player_generalization() {
        let names = vec![labels(&["C", "D"]); 4];
        let g = Game::new(4, names, (0..64).map(|i| (i % 7) as f64).collect()).unwrap();
        let spec = EngineeringSpec::new(vec![p(&[0, 0, 0, 0])], vec![p(&[1, 1, 1, 1])]);
        let model = build_engineering_model(&g, &spec).unwrap();
        assert_eq!(count(&model, Family::Desired), 4);
        assert_eq!(model.binaries().count(), 4);
        assert_eq!(count(&model, Family::UndesiredGap), 4);
        assert_eq!(count(&model, Family::Disjunction), 1);
    }

    #[test]
    fn big_m_formula() {
        let pd = prisoners_dilemma();
        assert!((auto_big_m(&pd, &pd_spec()) - 18.01).abs() < 1e-12);
        let flat = Game::new(2, vec![labels(&["a", "b"]); 2], vec![1.5; 8]).unwrap();
        assert!((auto_big_m(&flat, &pd_spec()) - 2.01).abs() < 1e-12);
        let spec = EngineeringSpec { big_m: Some(1000.0), ..pd_spec() };
        assert_eq!(auto_big_m(&pd, &spec), 1000.0);
    }

    #[test]
    fn validation_errors() {
        let pd = prisoners_dilemma();
        let overlap = EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[0, 0])]);
        assert!(matches!(build_engineering_model(&pd, &overlap), Err(Error::InvalidSpec(_))));
        let opts = BuildOptions { allow_overlap: true, ..Default::default() };
        assert!(build_engineering_model_with(&pd, &overlap, &opts).is_ok());

        let range = EngineeringSpec::new(vec![p(&[0, 2])], vec![]);
        assert!(matches!(build_engineering_model(&pd, &range), Err(Error::OutOfRange(_))));

        let opts = BuildOptions { max_payoff_entries: 4, ..Default::default() };
        assert!(matches!(
            build_engineering_model_with(&pd, &pd_spec(), &opts),
            Err(Error::ModelTooLarge { entries: 8, limit: 4 })
        ));
        let bad_eps = EngineeringSpec { epsilon: 0.0, ..pd_spec() };
        assert!(build_engineering_model(&pd, &bad_eps).is_err());
        let bad_m = EngineeringSpec { big_m: Some(0.001), ..pd_spec() };
        assert!(build_engineering_model(&pd, &bad_m).is_err());
    }

    #[test]
    fn full_model_keeps_every_alpha() {
        let pd = prisoners_dilemma();
        let opts = BuildOptions { presolve: false, ..Default::default() };
        let full = build_engineering_model_with(&pd, &pd_spec(), &opts).unwrap();
        assert_eq!(full.alphas().count(), 16);
        let frozen: Vec<&str> = full
            .vars()
            .iter()
            .filter(|v| v.role.is_alpha() && v.upper == 0.0)
            .map(|v| v.name.as_str())
            .collect();
        assert_eq!(frozen, vec!["ap_k0_s1_1", "am_k0_s1_1", "ap_k1_s1_1", "am_k1_s1_1"]);
    }

    #[test]
    fn shared_indexing_merges_contexts() {
        // Two undesired profiles in the same column share player 0's maximum.
        let names = labels(&["a", "b", "c"]);
        let g = Game::new(2, vec![names.clone(), names], (0..18).map(|i| i as f64).collect())
            .unwrap();
        let spec = EngineeringSpec {
            undesired: vec![p(&[0, 0]), p(&[1, 0])],
            bmax_indexing: BmaxIndexing::PaperShared,
            ..Default::default()
        };
        let shared = build_engineering_model(&g, &spec).unwrap();
        let per = build_engineering_model(
            &g,
            &EngineeringSpec { bmax_indexing: BmaxIndexing::PerProfile, ..spec.clone() },
        )
        .unwrap();
        let bmax = |m: &MilpModel| {
            m.vars().iter().filter(|v| matches!(v.role, Role::Bmax { .. })).count()
        };
        assert_eq!(bmax(&per), 4);
        assert_eq!(bmax(&shared), 3);
        assert_eq!(count(&shared, Family::UndesiredGap), 4);
    }

    #[test]
    fn construction_is_deterministic() {
        let pd = prisoners_dilemma();
        let a = export_lp(&build_engineering_model(&pd, &pd_spec()).unwrap());
        let b = export_lp(&build_engineering_model(&pd, &pd_spec()).unwrap());
        assert_eq!(a, b);
    }
}

//! Build, solve, verify and enumerate engineering solutions.

use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::game::{Game, PerturbationSet, Profile};
use crate::milp::{
    alpha_support, perturbations_from_values, reduce_support, solve_milp_with, Basis, Engine, Incumbent,
    Limits, MilpOptions, MilpResult, MilpStatus,
};
use crate::model::{
    build_engineering_model_with, export_lp, BuildOptions, EngineeringSpec, Family, MilpModel, Role,
};

/// Oracle check of an engineered game against a spec.
#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub desired_are_ne: bool,
    pub undesired_not_ne: bool,
    /// Every pure equilibrium of the engineered game, in profile order.
    pub ne_set: Vec<Profile>,
    /// Desired profiles that are not equilibria.
    pub missing_desired: Vec<Profile>,
    /// Undesired profiles that still are.
    pub remaining_undesired: Vec<Profile>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.desired_are_ne && self.undesired_not_ne
    }
}

impl fmt::Display for Verification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |ps: &[Profile]| ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
        write!(f, "NE set [{}]", list(&self.ne_set))?;
        if !self.missing_desired.is_empty() {
            write!(f, "; desired not NE [{}]", list(&self.missing_desired))?;
        }
        if !self.remaining_undesired.is_empty() {
            write!(f, "; undesired still NE [{}]", list(&self.remaining_undesired))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub nodes_explored: u64,
    pub lp_iterations: u64,
    pub root_bound: Option<f64>,
    /// Time spent in this solve, including verification.
    pub wall_time: Duration,
    pub num_vars: usize,
    pub num_binaries: usize,
    pub num_constraints: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub perturbations: PerturbationSet,
    pub objective: f64,
    /// Perturbation variables that are nonzero, in variable order.
    pub support: Vec<Role>,
    pub verification: Verification,
    pub stats: SolverStats,
    pub warnings: Vec<String>,
}

/// Which rows conflict in an infeasible model.
#[derive(Clone, Debug, PartialEq)]
pub struct InfeasibilityReport {
    /// Families whose rows are infeasible even on their own, or the
    /// desired and undesired blocks together when each is feasible alone.
    pub families: Vec<Family>,
    pub detail: String,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (families: {:?})", self.detail, self.families)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    /// The cuts made the model infeasible, or an empty support was found.
    Exhausted,
    MaxSolutions,
    ObjectiveCeiling,
    NodeLimit,
    TimeLimit,
    /// The very first solve was infeasible.
    Infeasible(InfeasibilityReport),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Exhausted => f.write_str("exhausted"),
            Termination::MaxSolutions => f.write_str("max_solutions"),
            Termination::ObjectiveCeiling => f.write_str("objective_ceiling"),
            Termination::NodeLimit => f.write_str("node_limit"),
            Termination::TimeLimit => f.write_str("time_limit"),
            Termination::Infeasible(_) => f.write_str("infeasible"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub solutions: Vec<Solution>,
    pub termination: Termination,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    pub build: BuildOptions,
    pub engine: Engine,
    /// Start every post-cut solve from scratch instead of the previous root basis.
    pub no_warm_start: bool,
}

/// Applies `perturbations` and checks `spec`'s sets against the brute-force
/// oracle. Never fails on a spec mismatch; the report carries it.
pub fn verify(game: &Game, perturbations: &PerturbationSet, spec: &EngineeringSpec) -> Result<Verification> {
    let engineered = game.apply_perturbations(perturbations)?;
    let ne_set = engineered.enumerate_pure_nash();
    let is_ne = |p: &Profile| ne_set.binary_search(p).is_ok();
    let missing_desired: Vec<Profile> = spec.desired.iter().filter(|p| !is_ne(p)).cloned().collect();
    let remaining_undesired: Vec<Profile> = spec.undesired.iter().filter(|p| is_ne(p)).cloned().collect();
    Ok(Verification {
        desired_are_ne: missing_desired.is_empty(),
        undesired_not_ne: remaining_undesired.is_empty(),
        ne_set,
        missing_desired,
        remaining_undesired,
    })
}

/// Single minimal-perturbation solution.
///
/// An infeasible spec is an [`Error::Infeasible`] error carrying the
/// conflicting row families.
pub fn engineer(game: &Game, spec: &EngineeringSpec) -> Result<Solution> {
    engineer_with(game, spec, &PipelineOptions::default())
}

pub fn engineer_with(game: &Game, spec: &EngineeringSpec, opts: &PipelineOptions) -> Result<Solution> {
    let one = EngineeringSpec { max_solutions: Some(1), objective_ceiling: None, ..spec.clone() };
    let mut run = enumerate_solutions_with(game, &one, opts)?;
    match run.termination {
        Termination::Infeasible(report) => Err(Error::Infeasible(report)),
        _ if run.solutions.is_empty() => {
            Err(Error::NotOptimal(format!("solve stopped by {}", run.termination)))
        }
        _ => Ok(run.solutions.remove(0)),
    }
}

/// Optimal solution, then successively cut-off alternatives until the
/// model turns infeasible or a limit fires.
///
/// `spec.node_limit` applies to each solve; `spec.time_limit` is a budget
/// for the whole enumeration.
pub fn enumerate_solutions(game: &Game, spec: &EngineeringSpec) -> Result<Enumeration> {
    enumerate_solutions_with(game, spec, &PipelineOptions::default())
}

pub fn enumerate_solutions_with(
    game: &Game,
    spec: &EngineeringSpec,
    opts: &PipelineOptions,
) -> Result<Enumeration> {
    let start = Instant::now();
    let mut model = build_engineering_model_with(game, spec, &opts.build)?;
    let mut solutions: Vec<Solution> = Vec::new();
    let mut warm: Option<Basis> = None;

    let termination = loop {
        if spec.max_solutions.is_some_and(|cap| solutions.len() >= cap) {
            break Termination::MaxSolutions;
        }
        let remaining = match spec.time_limit {
            Some(t) => {
                let left = t - start.elapsed().as_secs_f64();
                if left <= 0.0 {
                    break Termination::TimeLimit;
                }
                Some(left)
            }
            None => None,
        };
        let iter_start = Instant::now();
        let options = MilpOptions {
            limits: Limits { max_nodes: spec.node_limit, max_seconds: remaining },
            engine: opts.engine,
            warm_start: if opts.no_warm_start { None } else { warm.take() },
            ..MilpOptions::default()
        };
        let result = solve_milp_with(&model, &options)?;
        match result.status {
            MilpStatus::Optimal => {}
            MilpStatus::Infeasible if solutions.is_empty() => {
                break Termination::Infeasible(diagnose(&model, opts.engine)?);
            }
            MilpStatus::Infeasible => break Termination::Exhausted,
            MilpStatus::Unbounded => {
                return Err(Error::Numerical("engineering model reported unbounded".into()));
            }
            MilpStatus::NodeLimit => break Termination::NodeLimit,
            MilpStatus::TimeLimit => break Termination::TimeLimit,
        }
        let incumbent = result.incumbent.as_ref().expect("optimal result has an incumbent");
        let incumbent = reduce_support(&model, incumbent, opts.engine)?;
        if spec.objective_ceiling.is_some_and(|c| incumbent.objective > c + 1e-9) {
            break Termination::ObjectiveCeiling;
        }
        let support_ids = alpha_support(&model, &incumbent.values);
        let solution = finish(game, spec, &model, &result, &incumbent, &support_ids, iter_start)?;
        log::info!(
            "solution {} objective {:.6} support {} nodes {}",
            solutions.len() + 1,
            solution.objective,
            support_ids.len(),
            result.nodes_explored
        );
        solutions.push(solution);
        if support_ids.is_empty() {
            // Every later support would contain the empty one.
            break Termination::Exhausted;
        }
        model.add_integer_cut(&support_ids)?;
        warm = result.root_basis;
    };
    Ok(Enumeration { solutions, termination })
}

fn finish(
    game: &Game,
    spec: &EngineeringSpec,
    model: &MilpModel,
    result: &MilpResult,
    incumbent: &Incumbent,
    support_ids: &[usize],
    iter_start: Instant,
) -> Result<Solution> {
    let values = &incumbent.values;
    let perturbations = perturbations_from_values(model, values)?;
    let verification = verify(game, &perturbations, spec)?;
    if !verification.passed() {
        return Err(Error::VerificationFailed { summary: verification.to_string(), dump: dump(model, values) });
    }
    let warnings = support_ids
        .iter()
        .filter(|&&v| {
            let var = model.var(v);
            var.upper.is_finite() && values[v] >= var.upper - 1e-9
        })
        .map(|&v| format!("{} is at its cap {}", model.var(v).name, model.var(v).upper))
        .collect();
    let stats = model.stats();
    Ok(Solution {
        perturbations,
        objective: incumbent.objective,
        support: support_ids.iter().map(|&v| model.var(v).role.clone()).collect(),
        verification,
        stats: SolverStats {
            nodes_explored: result.nodes_explored,
            lp_iterations: result.lp_iterations,
            root_bound: result.root_bound,
            wall_time: iter_start.elapsed(),
            num_vars: model.num_vars(),
            num_binaries: stats.num_binary,
            num_constraints: stats.num_constraints,
        },
        warnings,
    })
}

fn dump(model: &MilpModel, values: &[f64]) -> String {
    let mut out = export_lp(model);
    out.push_str("\\ nonzero values\n");
    for (v, x) in values.iter().enumerate() {
        if *x != 0.0 {
            out.push_str(&format!("\\ {} = {x}\n", model.var(v).name));
        }
    }
    out
}

fn is_desired(f: Family) -> bool {
    f == Family::Desired
}

fn is_undesired(f: Family) -> bool {
    matches!(
        f,
        Family::UndesiredGap
            | Family::UndesiredMax
            | Family::UndesiredSelect
            | Family::NoTies
            | Family::Disjunction
    )
}

/// Re-solves the desired and undesired blocks separately to tell which
/// side of the spec is unattainable.
fn diagnose(model: &MilpModel, engine: Engine) -> Result<InfeasibilityReport> {
    let feasible = |keep: fn(Family) -> bool| -> Result<bool> {
        let sub = model.filtered(keep);
        let r = solve_milp_with(&sub, &MilpOptions { engine, ..MilpOptions::default() })?;
        Ok(r.status != MilpStatus::Infeasible)
    };
    let desired_ok = feasible(is_desired)?;
    let undesired_ok = feasible(is_undesired)?;
    let present = |pred: fn(Family) -> bool| -> Vec<Family> {
        let mut fams: Vec<Family> =
            model.constraints().iter().map(|c| c.family).filter(|&f| pred(f)).collect();
        fams.sort();
        fams.dedup();
        fams
    };
    let (families, detail) = match (desired_ok, undesired_ok) {
        (false, _) => (present(is_desired), "desired profiles cannot all be made strict equilibria".to_string()),
        (true, false) => (
            present(is_undesired),
            "undesired profiles cannot all be broken within the perturbation cap".to_string(),
        ),
        (true, true) => (
            present(|f| is_desired(f) || is_undesired(f)),
            "desired and undesired requirements conflict with each other".to_string(),
        ),
    };
    Ok(InfeasibilityReport { families, detail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-6
    }

    #[test]
    fn prisoners_dilemma_engineer() {
        let spec = EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[1, 1])]);
        let s = engineer(&prisoners_dilemma(), &spec).unwrap();
        assert!(close(s.objective, 3.03));
        assert!(close(s.perturbations.total_magnitude(), s.objective));
        assert_eq!(s.verification.ne_set, vec![p(&[0, 0])]);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn already_satisfied_spec_costs_nothing() {
        let spec = EngineeringSpec::new(vec![p(&[1, 1])], vec![p(&[0, 0])]);
        let run = enumerate_solutions(&prisoners_dilemma(), &spec).unwrap();
        assert_eq!(run.solutions.len(), 1);
        assert_eq!(run.termination, Termination::Exhausted);
        let s = &run.solutions[0];
        assert_eq!(s.objective, 0.0);
        assert!(s.perturbations.is_empty());
    }

    #[test]
    fn snowdrift_single_solution() {
        let spec = EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[0, 1]), p(&[1, 0])]);
        let run = enumerate_solutions(&snowdrift(), &spec).unwrap();
        assert_eq!(run.solutions.len(), 1, "{:?}", run.solutions.iter().map(|s| &s.support).collect::<Vec<_>>());
        assert_eq!(run.termination, Termination::Exhausted);
        let s = &run.solutions[0];
        assert!(close(s.objective, 4.02));
        assert!(close(s.perturbations.get(0, &p(&[0, 0])).unwrap(), 2.01));
        assert!(close(s.perturbations.get(1, &p(&[0, 0])).unwrap(), 2.01));
    }

    #[test]
    fn prisoners_dilemma_enumeration() {
        let spec = EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[1, 1])]);
        let run = enumerate_solutions(&prisoners_dilemma(), &spec).unwrap();
        assert_eq!(run.solutions.len(), 8);
        assert_eq!(run.termination, Termination::Exhausted);
        for s in &run.solutions {
            assert!(close(s.objective, 3.03));
            assert_eq!(s.support.len(), 3);
        }
        let capped = EngineeringSpec { max_solutions: Some(1), ..spec };
        let run = enumerate_solutions(&prisoners_dilemma(), &capped).unwrap();
        assert_eq!(run.solutions.len(), 1);
        assert_eq!(run.termination, Termination::MaxSolutions);
    }

    #[test]
    fn objective_ceiling_stops_enumeration() {
        let spec = EngineeringSpec {
            objective_ceiling: Some(1.0),
            ..EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[1, 1])])
        };
        let run = enumerate_solutions(&prisoners_dilemma(), &spec).unwrap();
        assert!(run.solutions.is_empty());
        assert_eq!(run.termination, Termination::ObjectiveCeiling);
    }

    #[test]
    fn overlap_is_reported_infeasible() {
        let spec = EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[0, 0])]);
        let opts = PipelineOptions {
            build: BuildOptions { allow_overlap: true, ..BuildOptions::default() },
            ..PipelineOptions::default()
        };
        let run = enumerate_solutions_with(&prisoners_dilemma(), &spec, &opts).unwrap();
        assert!(run.solutions.is_empty());
        let Termination::Infeasible(report) = run.termination else { panic!("expected infeasible") };
        assert!(report.families.contains(&Family::Desired));
        assert!(report.families.contains(&Family::UndesiredGap));
        assert!(matches!(engineer_with(&prisoners_dilemma(), &spec, &opts), Err(Error::Infeasible(_))));
        assert!(matches!(engineer(&prisoners_dilemma(), &spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn capped_perturbation_is_undesired_infeasible() {
        let spec = EngineeringSpec {
            max_perturbation: Some(0.5),
            ..EngineeringSpec::new(vec![], vec![p(&[1, 1])])
        };
        let err = engineer(&prisoners_dilemma(), &spec).unwrap_err();
        let Error::Infeasible(report) = err else { panic!("{err}") };
        assert!(report.families.iter().all(|&f| is_undesired(f)));
    }

    #[test]
    fn verify_reports_failures_and_extra_equilibria() {
        let game = prisoners_dilemma();
        let spec = EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[1, 1])]);
        let v = verify(&game, &PerturbationSet::empty(), &spec).unwrap();
        assert!(!v.passed());
        assert_eq!(v.missing_desired, vec![p(&[0, 0])]);
        assert_eq!(v.remaining_undesired, vec![p(&[1, 1])]);

        let loose = EngineeringSpec::new(vec![], vec![p(&[0, 0])]);
        let v = verify(&game, &PerturbationSet::empty(), &loose).unwrap();
        assert!(v.passed());
        assert_eq!(v.ne_set, vec![p(&[1, 1])]);
    }

    #[test]
    fn warm_and_cold_enumeration_agree() {
        let spec = EngineeringSpec::new(vec![p(&[0, 0])], vec![p(&[1, 1])]);
        let warm = enumerate_solutions(&prisoners_dilemma(), &spec).unwrap();
        let opts = PipelineOptions { no_warm_start: true, ..PipelineOptions::default() };
        let cold = enumerate_solutions_with(&prisoners_dilemma(), &spec, &opts).unwrap();
        assert_eq!(warm.solutions.len(), cold.solutions.len());
        for (a, b) in warm.solutions.iter().zip(&cold.solutions) {
            assert!(close(a.objective, b.objective));
        }
    }
}

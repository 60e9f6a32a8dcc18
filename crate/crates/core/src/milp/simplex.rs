//! Bounded-variable primal simplex with a composite phase 1.
//!
//! Nonbasic variables sit at a finite bound (or at zero when free). Phase 1
//! minimizes the sum of bound violations of the basic variables, phase 2
//! the model objective. Pricing is Dantzig's rule with a Harris two-pass
//! ratio test; after a run of degenerate pivots the solver switches to
//! Bland's smallest-index rule, which cannot cycle.

use super::factor::{DenseTableau, EtaFile, Factor};
use super::form::StandardForm;
use super::{Basis, Engine, LpStatus, Tolerances, VarState};
use crate::error::{Error, Result};
use crate::model::MilpModel;

/// Models with fewer active variables than this use the dense tableau under
/// `Engine::Auto`. Fixed columns and columns in no row do not count, so the
/// choice does not depend on whether presolve dropped them.
pub const DENSE_THRESHOLD: usize = 64;

const DEGENERATE_STEP: f64 = 1e-12;
const RESIDUAL_LIMIT: f64 = 1e-6;

pub(crate) struct Simplex {
    form: StandardForm,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    heading: Vec<usize>,
    pos_of: Vec<usize>,
    factor: Box<dyn Factor + Send>,
    tol: Tolerances,
    pub iterations: u64,
    /// Set once a solve has engaged Bland's rule.
    pub used_bland: bool,
    // scratch
    alpha: Vec<f64>,
    y: Vec<f64>,
}

struct Step {
    theta: f64,
    /// Position leaving the basis and whether it leaves at its upper bound.
    leave: Option<(usize, bool)>,
}

impl Simplex {
    pub fn new(model: &MilpModel, engine: Engine, tol: Tolerances) -> Self {
        let form = StandardForm::from_model(model);
        let use_dense = match engine {
            Engine::Dense => true,
            Engine::Revised => false,
            Engine::Auto => {
                (0..form.n).filter(|&j| form.nnz(j) > 0 && form.upper[j] > form.lower[j]).count() < DENSE_THRESHOLD
            }
        };
        let factor: Box<dyn Factor + Send> =
            if use_dense { Box::new(DenseTableau::new(&form)) } else { Box::new(EtaFile::new(&form)) };
        let (n, m) = (form.n, form.m);
        let mut state = vec![VarState::AtLower; n + m];
        let mut pos_of = vec![usize::MAX; n + m];
        for i in 0..m {
            state[n + i] = VarState::Basic;
            pos_of[n + i] = i;
        }
        let lower = form.lower.clone();
        let upper = form.upper.clone();
        Simplex {
            x: vec![0.0; n + m],
            heading: (n..n + m).collect(),
            lower,
            upper,
            state,
            pos_of,
            factor,
            tol,
            iterations: 0,
            used_bland: false,
            alpha: vec![0.0; m],
            y: vec![0.0; m],
            form,
        }
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn values(&self) -> Vec<f64> {
        self.x[..self.form.n].to_vec()
    }

    pub fn objective(&self) -> f64 {
        (0..self.form.n).map(|j| self.form.cost[j] * self.x[j]).sum()
    }

    pub fn basis(&self) -> Basis {
        let n = self.form.n;
        Basis { columns: self.state[..n].to_vec(), rows: self.state[n..].to_vec() }
    }

    /// Installs a starting basis. Extra model variables beyond the basis
    /// start nonbasic, extra rows start with their logical basic. An
    /// inconsistent basis is ignored.
    pub fn load_basis(&mut self, basis: &Basis) {
        let (n, m) = (self.form.n, self.form.m);
        if basis.columns.len() > n || basis.rows.len() > m {
            return;
        }
        let mut state: Vec<VarState> = basis.columns.clone();
        state.resize(n, VarState::AtLower);
        state.extend(basis.rows.iter().copied());
        state.resize(n + m, VarState::Basic);
        let target: Vec<usize> = (0..n + m).filter(|&j| state[j] == VarState::Basic).collect();
        if target.len() != m {
            return;
        }
        self.state = state;
        self.install(&target);
    }

    fn install(&mut self, target: &[usize]) {
        let (heading, dropped) = self.factor.refactor(&self.form, target);
        for j in dropped {
            self.state[j] = VarState::AtLower;
        }
        self.pos_of.iter_mut().for_each(|p| *p = usize::MAX);
        for (pos, &j) in heading.iter().enumerate() {
            self.pos_of[j] = pos;
            self.state[j] = VarState::Basic;
        }
        self.heading = heading;
    }

    fn refactor(&mut self) {
        let target = self.heading.clone();
        self.install(&target);
    }

    /// Puts every nonbasic variable at a bound consistent with its state.
    fn place_nonbasic(&mut self) {
        for j in 0..self.form.total() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let st = self.state[j];
            if st == VarState::Basic {
                continue;
            }
            let (st, v) = match st {
                VarState::AtUpper if hi.is_finite() => (VarState::AtUpper, hi),
                _ if lo.is_finite() => (VarState::AtLower, lo),
                _ if hi.is_finite() => (VarState::AtUpper, hi),
                _ => (VarState::Free, 0.0),
            };
            self.state[j] = st;
            self.x[j] = v;
        }
    }

    fn recompute_basic(&mut self) {
        let n = self.form.n;
        let mut rhs = vec![0.0; self.form.m];
        for j in 0..self.form.total() {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let v = self.x[j];
            if j < n {
                for &(i, a) in &self.form.cols[j] {
                    rhs[i] -= a * v;
                }
            } else {
                rhs[j - n] -= v;
            }
        }
        self.factor.ftran(&mut rhs);
        for (pos, &j) in self.heading.iter().enumerate() {
            self.x[j] = rhs[pos];
        }
    }

    /// Largest row residual or bound violation of the current point.
    fn residual(&self) -> f64 {
        let n = self.form.n;
        let mut act: Vec<f64> = self.x[n..].to_vec();
        for j in 0..n {
            for &(i, a) in &self.form.cols[j] {
                act[i] += a * self.x[j];
            }
        }
        let rows = act.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
        (0..self.form.total()).fold(rows, |acc, j| {
            acc.max(self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j])
        })
    }

    /// Solves from the current basis under the current bounds.
    pub fn solve(&mut self) -> Result<LpStatus> {
        for attempt in 0..2 {
            if attempt > 0 {
                self.refactor();
            }
            self.place_nonbasic();
            self.recompute_basic();
            let status = self.run()?;
            if status != LpStatus::Optimal || self.residual() <= RESIDUAL_LIMIT {
                return Ok(status);
            }
        }
        Err(Error::Numerical(format!(
            "feasibility residual {:.3e} exceeds {RESIDUAL_LIMIT:e} at the claimed optimum",
            self.residual()
        )))
    }

    fn run(&mut self) -> Result<LpStatus> {
        let (n, m) = (self.form.n, self.form.m);
        let ftol = self.tol.feasibility;
        let max_iter = 50_000 + 20 * (n + m) as u64;
        let mut iter = 0u64;
        let mut bland = self.tol.bland_after == 0;
        self.used_bland |= bland;
        let mut stall = 0usize;
        loop {
            if self.factor.wants_refactor() {
                self.refactor();
                self.place_nonbasic();
                self.recompute_basic();
            }
            // Basic costs: infeasibility gradient in phase 1, model costs in phase 2.
            let mut phase1 = false;
            for (pos, &j) in self.heading.iter().enumerate() {
                let c = if self.x[j] < self.lower[j] - ftol {
                    -1.0
                } else if self.x[j] > self.upper[j] + ftol {
                    1.0
                } else {
                    0.0
                };
                if c != 0.0 {
                    phase1 = true;
                }
                self.y[pos] = c;
            }
            if !phase1 {
                for (pos, &j) in self.heading.iter().enumerate() {
                    self.y[pos] = self.form.cost[j];
                }
            }
            self.factor.btran(&mut self.y);

            let Some((q, dir)) = self.price(phase1, bland) else {
                return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal });
            };
            let mut alpha = std::mem::take(&mut self.alpha);
            self.factor.ftran_col(&self.form, q, &mut alpha);
            let step = self.ratio_test(q, dir, &alpha, bland);
            let result = match step {
                None if phase1 => Err(Error::Numerical(
                    "phase 1 found an unbounded improving ray".into(),
                )),
                None => Ok(Some(LpStatus::Unbounded)),
                Some(step) => {
                    if step.theta <= DEGENERATE_STEP {
                        stall += 1;
                        if stall >= self.tol.bland_after && !bland {
                            bland = true;
                            self.used_bland = true;
                        }
                    } else {
                        stall = 0;
                    }
                    self.apply(q, dir, &alpha, step);
                    Ok(None)
                }
            };
            self.alpha = alpha;
            if let Some(status) = result? {
                return Ok(status);
            }
            iter += 1;
            self.iterations += 1;
            if iter > max_iter {
                return Err(Error::Numerical(format!("simplex iteration limit ({max_iter}) reached")));
            }
        }
    }

    /// Picks an entering variable and its direction (+1 increase, -1 decrease).
    fn price(&self, phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let dtol = self.tol.optimality;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.form.total() {
            let st = self.state[j];
            if st == VarState::Basic {
                continue;
            }
            let c = if phase1 { 0.0 } else { self.form.cost[j] };
            let d = c - self.form.dot(j, &self.y);
            let can_up = self.x[j] < self.upper[j];
            let can_down = self.x[j] > self.lower[j];
            let dir = if d < -dtol && can_up {
                1.0
            } else if d > dtol && can_down {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(_, _, b)| d.abs() > b) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Bound-respecting ratio test. `None` means the step is unbounded.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<Step> {
        let ftol = self.tol.feasibility;
        let ptol = self.tol.pivot;
        // (position, exact ratio, relaxed ratio, leaves at upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (pos, &j) in self.heading.iter().enumerate() {
            let a = alpha[pos];
            if a.abs() <= ptol {
                continue;
            }
            let rate = -dir * a;
            let (x, lo, hi) = (self.x[j], self.lower[j], self.upper[j]);
            let below = x < lo - ftol;
            let above = x > hi + ftol;
            if rate > 0.0 {
                if below {
                    cands.push((pos, (lo - x) / rate, (lo + ftol - x) / rate, false));
                } else if !above && hi.is_finite() {
                    cands.push((pos, (hi - x) / rate, (hi + ftol - x) / rate, true));
                }
            } else if above {
                cands.push((pos, (hi - x) / rate, (hi - ftol - x) / rate, true));
            } else if !below && lo.is_finite() {
                cands.push((pos, (lo - x) / rate, (lo - ftol - x) / rate, false));
            }
        }
        let range = self.upper[q] - self.lower[q];
        let chosen = if cands.is_empty() {
            None
        } else if bland {
            let min = cands.iter().map(|c| c.1.max(0.0)).fold(f64::INFINITY, f64::min);
            let tie = 1e-12 * (1.0 + min.abs());
            cands
                .iter()
                .filter(|c| c.1.max(0.0) <= min + tie)
                .min_by_key(|c| self.heading[c.0])
                .copied()
        } else {
            let bound = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= bound)
                .max_by(|a, b| {
                    alpha[a.0]
                        .abs()
                        .partial_cmp(&alpha[b.0].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| b.0.cmp(&a.0))
                })
                .copied()
        };
        match chosen {
            Some((pos, ratio, _, at_upper)) => {
                let theta = ratio.max(0.0);
                if range.is_finite() && range <= theta {
                    Some(Step { theta: range, leave: None })
                } else {
                    Some(Step { theta, leave: Some((pos, at_upper)) })
                }
            }
            None if range.is_finite() => Some(Step { theta: range, leave: None }),
            None => None,
        }
    }

    fn apply(&mut self, q: usize, dir: f64, alpha: &[f64], step: Step) {
        let theta = step.theta;
        if theta != 0.0 {
            self.x[q] += dir * theta;
            for (pos, &j) in self.heading.iter().enumerate() {
                let a = alpha[pos];
                if a != 0.0 {
                    self.x[j] -= dir * theta * a;
                }
            }
        }
        match step.leave {
            None => {
                // Bound flip.
                if dir > 0.0 {
                    self.state[q] = VarState::AtUpper;
                    self.x[q] = self.upper[q];
                } else {
                    self.state[q] = VarState::AtLower;
                    self.x[q] = self.lower[q];
                }
            }
            Some((pos, at_upper)) => {
                let leaving = self.heading[pos];
                if at_upper {
                    self.state[leaving] = VarState::AtUpper;
                    self.x[leaving] = self.upper[leaving];
                } else {
                    self.state[leaving] = VarState::AtLower;
                    self.x[leaving] = self.lower[leaving];
                }
                self.pos_of[leaving] = usize::MAX;
                self.state[q] = VarState::Basic;
                self.pos_of[q] = pos;
                self.heading[pos] = q;
                self.factor.update(pos, q, alpha);
            }
        }
    }
}

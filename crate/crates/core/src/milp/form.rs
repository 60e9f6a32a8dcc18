//! Bounded standard form shared by both simplex engines.
//!
//! Row `i` of the model becomes `a_i . x + r_i = 0` with a logical variable
//! `r_i = -a_i . x` whose bounds encode the row sense. Logicals sit after the
//! structurals, so variable `n + i` is row `i`'s logical and the all-logical
//! basis is the identity.

use crate::model::{MilpModel, Sense};

pub(crate) struct StandardForm {
    pub n: usize,
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StandardForm {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let m = model.constraints().len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for v in model.vars() {
            lower.push(v.lower);
            upper.push(v.upper);
            cost.push(v.cost);
        }
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, a) in &c.terms {
                if a != 0.0 {
                    cols[v].push((i, a));
                }
            }
            let (lo, hi) = match c.sense {
                Sense::Le => (-c.rhs, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, -c.rhs),
                Sense::Eq => (-c.rhs, -c.rhs),
            };
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
        }
        StandardForm { n, m, cols, cost, lower, upper }
    }

    pub fn total(&self) -> usize {
        self.n + self.m
    }

    /// Scatters column `j` into a zeroed dense vector.
    pub fn scatter(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                out[i] = a;
            }
        } else {
            out[j - self.n] = 1.0;
        }
    }

    /// `y . a_j`
    pub fn dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
        } else {
            y[j - self.n]
        }
    }

    pub fn nnz(&self, j: usize) -> usize {
        if j < self.n {
            self.cols[j].len()
        } else {
            1
        }
    }
}

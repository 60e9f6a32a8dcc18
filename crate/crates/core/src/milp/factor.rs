//! Basis representations: a dense tableau for small models and a
//! product-form (eta file) inverse for large sparse ones.

use super::form::StandardForm;

const SINGULAR_PIVOT: f64 = 1e-9;
const DROP: f64 = 1e-14;

pub(crate) trait Factor {
    /// Resets to the all-logical basis, then pivots in the structurals of
    /// `target`. Returns the new position heading and the target variables
    /// that could not be pivoted in (linearly dependent columns).
    fn refactor(&mut self, form: &StandardForm, target: &[usize]) -> (Vec<usize>, Vec<usize>);
    /// `B^-1 a_j`
    fn ftran_col(&self, form: &StandardForm, j: usize, out: &mut [f64]);
    /// `B^-1 v` in place.
    fn ftran(&self, v: &mut [f64]);
    /// `y^T B^-1` in place.
    fn btran(&self, y: &mut [f64]);
    /// Replaces the basic variable at `pos` by `entering`, whose transformed
    /// column is `alpha`.
    fn update(&mut self, pos: usize, entering: usize, alpha: &[f64]);
    fn wants_refactor(&self) -> bool;
}

/// Pivots the target structurals into free positions one at a time.
fn refactor_with(
    form: &StandardForm,
    target: &[usize],
    mut transformed: impl FnMut(usize, &mut [f64]),
    mut pivot: impl FnMut(usize, usize, &[f64]),
) -> (Vec<usize>, Vec<usize>) {
    let (n, m) = (form.n, form.m);
    let mut heading: Vec<usize> = (n..n + m).collect();
    let mut in_target = vec![false; n + m];
    for &j in target {
        in_target[j] = true;
    }
    let mut available: Vec<bool> = (0..m).map(|p| !in_target[n + p]).collect();
    let mut structurals: Vec<usize> = target.iter().copied().filter(|&j| j < n).collect();
    structurals.sort_by_key(|&j| (form.nnz(j), j));
    let mut dropped = Vec::new();
    let mut col = vec![0.0; m];
    for j in structurals {
        col.iter_mut().for_each(|c| *c = 0.0);
        transformed(j, &mut col);
        let mut best: Option<(usize, f64)> = None;
        for (p, &free) in available.iter().enumerate() {
            if free {
                let a = col[p].abs();
                if a > SINGULAR_PIVOT && best.map_or(true, |(_, b)| a > b) {
                    best = Some((p, a));
                }
            }
        }
        match best {
            Some((p, _)) => {
                pivot(p, j, &col);
                heading[p] = j;
                available[p] = false;
            }
            None => dropped.push(j),
        }
    }
    (heading, dropped)
}

/// Full tableau `B^-1 [A | I]`, row-major.
pub(crate) struct DenseTableau {
    m: usize,
    width: usize,
    n: usize,
    t: Vec<f64>,
}

impl DenseTableau {
    pub fn new(form: &StandardForm) -> Self {
        let mut d = DenseTableau { m: form.m, width: form.total(), n: form.n, t: Vec::new() };
        d.reset(form);
        d
    }

    fn reset(&mut self, form: &StandardForm) {
        self.t = vec![0.0; self.m * self.width];
        for (j, col) in form.cols.iter().enumerate() {
            for &(i, a) in col {
                self.t[i * self.width + j] = a;
            }
        }
        for i in 0..self.m {
            self.t[i * self.width + self.n + i] = 1.0;
        }
    }

    fn pivot_rows(&mut self, pos: usize, alpha: &[f64]) {
        let w = self.width;
        let inv = 1.0 / alpha[pos];
        let (before, rest) = self.t.split_at_mut(pos * w);
        let (prow, after) = rest.split_at_mut(w);
        prow.iter_mut().for_each(|x| *x *= inv);
        for (i, row) in before.chunks_exact_mut(w).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(x, &p)| *x -= f * p);
            }
        }
        for (i, row) in after.chunks_exact_mut(w).enumerate() {
            let f = alpha[pos + 1 + i];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(x, &p)| *x -= f * p);
            }
        }
    }
}

impl Factor for DenseTableau {
    fn refactor(&mut self, form: &StandardForm, target: &[usize]) -> (Vec<usize>, Vec<usize>) {
        self.reset(form);
        let cell = std::cell::RefCell::new(self);
        refactor_with(
            form,
            target,
            |j, out| {
                let me = cell.borrow();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = me.t[i * me.width + j];
                }
            },
            |p, _, col| cell.borrow_mut().pivot_rows(p, col),
        )
    }

    fn ftran_col(&self, _form: &StandardForm, j: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.t[i * self.width + j];
        }
    }

    fn ftran(&self, v: &mut [f64]) {
        let src = v.to_vec();
        for (i, o) in v.iter_mut().enumerate() {
            let row = &self.t[i * self.width + self.n..(i + 1) * self.width];
            *o = row.iter().zip(&src).map(|(a, b)| a * b).sum();
        }
    }

    fn btran(&self, y: &mut [f64]) {
        let src = y.to_vec();
        y.iter_mut().for_each(|x| *x = 0.0);
        for (i, &s) in src.iter().enumerate() {
            if s != 0.0 {
                let row = &self.t[i * self.width + self.n..(i + 1) * self.width];
                y.iter_mut().zip(row).for_each(|(o, &a)| *o += s * a);
            }
        }
    }

    fn update(&mut self, pos: usize, _entering: usize, alpha: &[f64]) {
        self.pivot_rows(pos, alpha);
    }

    fn wants_refactor(&self) -> bool {
        false
    }
}

struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Product-form inverse: `B^-1 = E_k ... E_1`.
pub(crate) struct EtaFile {
    m: usize,
    etas: Vec<Eta>,
    /// Etas produced by the last refactorization.
    base: usize,
    max_updates: usize,
}

impl EtaFile {
    pub fn new(form: &StandardForm) -> Self {
        EtaFile { m: form.m, etas: Vec::new(), base: 0, max_updates: 100 }
    }

    fn push(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > DROP)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }
}

impl Factor for EtaFile {
    fn refactor(&mut self, form: &StandardForm, target: &[usize]) -> (Vec<usize>, Vec<usize>) {
        self.etas.clear();
        let cell = std::cell::RefCell::new(self);
        let out = refactor_with(
            form,
            target,
            |j, col| {
                form.scatter(j, col);
                cell.borrow().ftran(col);
            },
            |p, _, col| cell.borrow_mut().push(p, col),
        );
        let me = cell.into_inner();
        me.base = me.etas.len();
        out
    }

    fn ftran_col(&self, form: &StandardForm, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        form.scatter(j, out);
        self.ftran(out);
    }

    fn ftran(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.m);
        for eta in &self.etas {
            let xr = v[eta.pos];
            if xr != 0.0 {
                let xr = xr / eta.pivot;
                v[eta.pos] = xr;
                for &(i, a) in &eta.entries {
                    v[i] -= a * xr;
                }
            }
        }
    }

    fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = y[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * y[i];
            }
            y[eta.pos] = s / eta.pivot;
        }
    }

    fn update(&mut self, pos: usize, _entering: usize, alpha: &[f64]) {
        self.push(pos, alpha);
    }

    fn wants_refactor(&self) -> bool {
        self.etas.len() - self.base > self.max_updates
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, MilpModel, Sense};

    fn small_form() -> StandardForm {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", f64::INFINITY, 1.0);
        let y = m.add_continuous("y", f64::INFINITY, 1.0);
        let z = m.add_continuous("z", f64::INFINITY, 1.0);
        m.add_constraint("a", Family::Other, vec![(x, 2.0), (y, 1.0)], Sense::Le, 4.0);
        m.add_constraint("b", Family::Other, vec![(y, 3.0), (z, -1.0)], Sense::Ge, 1.0);
        m.add_constraint("c", Family::Other, vec![(x, 1.0), (z, 5.0)], Sense::Eq, 2.0);
        StandardForm::from_model(&m)
    }

    /// Checks `B (B^-1 e_k) = e_k` for every k by multiplying with the
    /// explicit basis columns.
    fn check_inverse(f: &dyn Factor, form: &StandardForm, heading: &[usize]) {
        let m = form.m;
        for k in 0..m {
            let mut v = vec![0.0; m];
            v[k] = 1.0;
            f.ftran(&mut v);
            let mut back = vec![0.0; m];
            for (pos, &j) in heading.iter().enumerate() {
                let mut col = vec![0.0; m];
                form.scatter(j, &mut col);
                for i in 0..m {
                    back[i] += col[i] * v[pos];
                }
            }
            for i in 0..m {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((back[i] - want).abs() < 1e-12, "k={k} i={i} got {}", back[i]);
            }
        }
    }

    #[test]
    fn both_factors_invert_the_basis() {
        let form = small_form();
        let target = vec![0, 1, 2];
        let mut dense = DenseTableau::new(&form);
        let (h1, d1) = dense.refactor(&form, &target);
        assert!(d1.is_empty());
        check_inverse(&dense, &form, &h1);
        let mut eta = EtaFile::new(&form);
        let (h2, d2) = eta.refactor(&form, &target);
        assert!(d2.is_empty());
        check_inverse(&eta, &form, &h2);

        // btran agrees between the two.
        let mut y1 = vec![1.0, -2.0, 0.5];
        let mut y2 = y1.clone();
        // Align positions: permute by heading.
        let perm: Vec<usize> = h1.iter().map(|j| h2.iter().position(|k| k == j).unwrap()).collect();
        let y2src = y2.clone();
        for (p1, &p2) in perm.iter().enumerate() {
            y2[p2] = y2src[p1];
        }
        dense.btran(&mut y1);
        eta.btran(&mut y2);
        for i in 0..3 {
            assert!((y1[i] - y2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_columns_are_dropped() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", f64::INFINITY, 1.0);
        let y = m.add_continuous("y", f64::INFINITY, 1.0);
        m.add_constraint("a", Family::Other, vec![(x, 1.0), (y, 2.0)], Sense::Le, 4.0);
        m.add_constraint("b", Family::Other, vec![(x, 2.0), (y, 4.0)], Sense::Le, 4.0);
        let form = StandardForm::from_model(&m);
        let (heading, dropped) = EtaFile::new(&form).refactor(&form, &[0, 1]);
        assert_eq!(dropped.len(), 1);
        assert_eq!(heading.len(), 2);
    }

    #[test]
    fn updates_track_pivots() {
        let form = small_form();
        let mut dense = DenseTableau::new(&form);
        let mut eta = EtaFile::new(&form);
        let mut heading: Vec<usize> = (3..6).collect();
        for (pos, j) in [(0usize, 0usize), (2, 2), (1, 1)] {
            let mut a1 = vec![0.0; 3];
            let mut a2 = vec![0.0; 3];
            dense.ftran_col(&form, j, &mut a1);
            eta.ftran_col(&form, j, &mut a2);
            for i in 0..3 {
                assert!((a1[i] - a2[i]).abs() < 1e-12);
            }
            dense.update(pos, j, &a1);
            eta.update(pos, j, &a2);
            heading[pos] = j;
        }
        check_inverse(&dense, &form, &heading);
        check_inverse(&eta, &form, &heading);
    }
}

//! Small dense linear programs: two-phase tableau simplex with Bland's rule.
//!
//! Variables are nonnegative. Rows are scaled to unit max-norm before solving,
//! so callers only need to keep variables in comparable units.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Pivot, ratio and reduced-cost tolerance on the scaled tableau.
const PIVOT_TOL: f64 = 1e-11;
/// Phase-one residual above which the program is declared infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    pub label: String,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64, label: impl Into<String>) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
            label: label.into(),
        }
    }

    fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Amount by which `x` violates this row, relative to the row scale.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let scale = self
            .coeffs
            .iter()
            .fold(self.rhs.abs(), |m, c| m.max(c.abs()))
            .max(f64::MIN_POSITIVE);
        let d = self.lhs(x) - self.rhs;
        let v = match self.relation {
            Relation::Le => d.max(0.0),
            Relation::Ge => (-d).max(0.0),
            Relation::Eq => d.abs(),
        };
        v / scale
    }

    /// Whether the row holds with equality at `x` (relative `tol`).
    pub fn is_tight(&self, x: &[f64], tol: f64) -> bool {
        let scale = self
            .coeffs
            .iter()
            .zip(x)
            .fold(self.rhs.abs(), |m, (c, v)| m.max((c * v).abs()))
            .max(f64::MIN_POSITIVE);
        (self.lhs(x) - self.rhs).abs() <= tol * scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Objective recomputed from `x`.
    pub objective: f64,
    /// Objective as carried by the final tableau.
    pub tableau_objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// Relative gap between the tableau objective and the recomputed one.
    pub fn objective_gap(&self) -> f64 {
        (self.objective - self.tableau_objective).abs() / (1.0 + self.objective.abs())
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    row[c] = 0.0;
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Minimizes with reduced costs in `obj` (last entry is minus the value).
    /// Only columns with `allowed[j]` may enter.
    fn run(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<Step> {
        let rhs = self.width;
        loop {
            let entering = (0..rhs).find(|&j| allowed[j] && obj[j] < -PIVOT_TOL);
            let Some(c) = entering else {
                return Ok(Step::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > PIVOT_TOL {
                    let ratio = row[rhs] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - PIVOT_TOL
                                || (ratio <= br + PIVOT_TOL && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Ok(Step::Unbounded);
            };
            self.pivot(r, c, obj);
            self.iterations += 1;
            if self.iterations > MAX_ITERATIONS {
                return Err(Error::LpIterationLimit(MAX_ITERATIONS));
            }
        }
    }
}

enum Outcome {
    Solved(LpSolution),
    Infeasible,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        Self {
            sense,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, c: Constraint) {
        debug_assert_eq!(c.coeffs.len(), self.objective.len());
        self.constraints.push(c);
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest scaled constraint violation at `x`, including `x >= 0`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let neg = x.iter().fold(0.0f64, |m, v| m.max(-v));
        self.constraints.iter().fold(neg, |m, c| m.max(c.violation(x)))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Indices of constraints tight at `x`.
    pub fn active_set(&self, x: &[f64], tol: f64) -> Vec<usize> {
        (0..self.constraints.len())
            .filter(|&i| self.constraints[i].is_tight(x, tol))
            .collect()
    }

    pub fn solve(&self) -> Result<LpSolution> {
        match self.solve_subset(&self.all_rows())? {
            Outcome::Solved(s) => Ok(s),
            Outcome::Infeasible => {
                let iis = self.infeasible_subset()?;
                Err(Error::LpInfeasible(
                    iis.into_iter().map(|i| self.constraints[i].label.clone()).collect(),
                ))
            }
        }
    }

    /// Deletion filter: an irreducible subset of rows that is infeasible on
    /// its own. Empty if the full program is feasible.
    pub fn infeasible_subset(&self) -> Result<Vec<usize>> {
        let mut keep = self.all_rows();
        if self.is_feasible(&keep)? {
            return Ok(Vec::new());
        }
        let mut i = 0;
        while i < keep.len() {
            let mut trial = keep.clone();
            trial.remove(i);
            if self.is_feasible(&trial)? {
                i += 1;
            } else {
                keep = trial;
            }
        }
        Ok(keep)
    }

    fn all_rows(&self) -> Vec<usize> {
        (0..self.constraints.len()).collect()
    }

    fn is_feasible(&self, rows: &[usize]) -> Result<bool> {
        let probe = LinearProgram {
            sense: Sense::Minimize,
            objective: vec![0.0; self.num_vars()],
            constraints: Vec::new(),
        };
        let mut probe = probe;
        probe.constraints = rows.iter().map(|&i| self.constraints[i].clone()).collect();
        let all = probe.all_rows();
        Ok(matches!(probe.solve_subset(&all)?, Outcome::Solved(_)))
    }

    fn solve_subset(&self, rows: &[usize]) -> Result<Outcome> {
        let n = self.num_vars();
        let m = rows.len();
        // column layout: x (n) | slack/surplus (m) | artificial (m) | rhs
        let width = n + 2 * m;
        let mut tab = Tableau {
            rows: Vec::with_capacity(m),
            basis: vec![0; m],
            width,
            iterations: 0,
        };
        let mut artificial = vec![false; width];
        for (k, &ri) in rows.iter().enumerate() {
            let c = &self.constraints[ri];
            let scale = c.coeffs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let mut row = vec![0.0; width + 1];
            for (j, a) in c.coeffs.iter().enumerate() {
                row[j] = a / scale;
            }
            row[width] = c.rhs / scale;
            let mut rel = c.relation;
            if row[width] < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            match rel {
                Relation::Le => {
                    row[n + k] = 1.0;
                    tab.basis[k] = n + k;
                }
                Relation::Ge => {
                    row[n + k] = -1.0;
                    row[n + m + k] = 1.0;
                    tab.basis[k] = n + m + k;
                    artificial[n + m + k] = true;
                }
                Relation::Eq => {
                    row[n + m + k] = 1.0;
                    tab.basis[k] = n + m + k;
                    artificial[n + m + k] = true;
                }
            }
            tab.rows.push(row);
        }

        // phase one: minimize the sum of artificials
        let mut obj = vec![0.0; width + 1];
        for (k, row) in tab.rows.iter().enumerate() {
            if artificial[tab.basis[k]] {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= v;
                }
            }
        }
        for j in 0..width {
            if artificial[j] {
                obj[j] = 0.0;
            }
        }
        let used: Vec<bool> = (0..width)
            .map(|j| j < n + m || tab.basis.contains(&j))
            .collect();
        tab.run(&mut obj, &used)?;
        if -obj[width] > FEASIBILITY_TOL {
            return Ok(Outcome::Infeasible);
        }
        // drive remaining artificials out of the basis
        let mut k = 0;
        while k < tab.rows.len() {
            if artificial[tab.basis[k]] {
                let col = (0..n + m).find(|&j| tab.rows[k][j].abs() > PIVOT_TOL);
                match col {
                    Some(c) => tab.pivot(k, c, &mut obj),
                    None => {
                        tab.rows.remove(k);
                        tab.basis.remove(k);
                        continue;
                    }
                }
            }
            k += 1;
        }

        // phase two
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let cscale = self.objective.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cscale = if cscale > 0.0 { cscale } else { 1.0 };
        let mut obj = vec![0.0; width + 1];
        for j in 0..n {
            obj[j] = sign * self.objective[j] / cscale;
        }
        for (k, row) in tab.rows.iter().enumerate() {
            let f = obj[tab.basis[k]];
            if f != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= f * v;
                }
            }
        }
        let allowed: Vec<bool> = (0..width).map(|j| !artificial[j]).collect();
        if let Step::Unbounded = tab.run(&mut obj, &allowed)? {
            return Err(Error::LpUnbounded);
        }
        let mut x = vec![0.0; n];
        for (k, row) in tab.rows.iter().enumerate() {
            if tab.basis[k] < n {
                x[tab.basis[k]] = row[width].max(0.0);
            }
        }
        Ok(Outcome::Solved(LpSolution {
            tableau_objective: -obj[width] * cscale * sign,
            objective: self.evaluate(&x),
            x,
            iterations: tab.iterations,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn c(coeffs: &[f64], rel: Relation, rhs: f64, label: &str) -> Constraint {
        Constraint::new(coeffs.to_vec(), rel, rhs, label)
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(Sense::Maximize, vec![3.0, 5.0]);
        lp.push(c(&[1.0, 0.0], Relation::Le, 4.0, "a"));
        lp.push(c(&[0.0, 2.0], Relation::Le, 12.0, "b"));
        lp.push(c(&[3.0, 2.0], Relation::Le, 18.0, "c"));
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!(s.objective_gap() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert_eq!(lp.active_set(&s.x, 1e-9), vec![1, 2]);
    }

    #[test]
    fn greater_equal_and_equality_rows() {
        // min x + y, x + y >= 2, x - y = 1 -> (1.5, 0.5)
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.push(c(&[1.0, 1.0], Relation::Ge, 2.0, "sum"));
        lp.push(c(&[1.0, -1.0], Relation::Eq, 1.0, "diff"));
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 1.5).abs() < 1e-9 && (s.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows() {
        // -x <= -3  means x >= 3
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.push(c(&[-1.0], Relation::Le, -3.0, "neg"));
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_reports_conflicting_rows() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 0.0]);
        lp.push(c(&[0.0, 1.0], Relation::Le, 5.0, "harmless"));
        lp.push(c(&[1.0, 0.0], Relation::Ge, 2.0, "x above 2"));
        lp.push(c(&[1.0, 0.0], Relation::Le, 1.0, "x below 1"));
        match lp.solve() {
            Err(Error::LpInfeasible(labels)) => {
                assert_eq!(labels, vec!["x above 2".to_string(), "x below 1".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.push(c(&[1.0, -1.0], Relation::Le, 1.0, "r"));
        assert!(matches!(lp.solve(), Err(Error::LpUnbounded)));
    }

    #[test]
    fn degenerate_redundant_equalities() {
        // duplicated equality rows leave an artificial at zero level
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 2.0]);
        lp.push(c(&[1.0, 1.0], Relation::Eq, 1.0, "e1"));
        lp.push(c(&[2.0, 2.0], Relation::Eq, 2.0, "e2"));
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn point_feasible_set() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, -1.0]);
        for (j, v) in [0.3, 0.7].iter().enumerate() {
            let mut e = vec![0.0; 2];
            e[j] = 1.0;
            lp.push(c(&e, Relation::Ge, *v, "lo"));
            lp.push(c(&e, Relation::Le, *v, "hi"));
        }
        let s = lp.solve().unwrap();
        assert!((s.objective + 0.4).abs() < 1e-12);
    }

    proptest! {
        // Box-constrained programs have a closed-form optimum: each variable
        // sits at the bound favoured by its cost sign.
        #[test]
        fn box_optimum(
            costs in proptest::collection::vec(-5.0..5.0f64, 1..7),
            lows in proptest::collection::vec(0.0..1.0f64, 7),
            widths in proptest::collection::vec(0.0..2.0f64, 7),
        ) {
            let n = costs.len();
            let mut lp = LinearProgram::new(Sense::Maximize, costs.clone());
            let mut expected = 0.0;
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                lp.push(c(&e, Relation::Ge, lows[j], "lo"));
                lp.push(c(&e, Relation::Le, lows[j] + widths[j], "hi"));
                expected += costs[j] * if costs[j] > 0.0 { lows[j] + widths[j] } else { lows[j] };
            }
            let s = lp.solve().unwrap();
            prop_assert!((s.objective - expected).abs() < 1e-9 * (1.0 + expected.abs()));
            prop_assert!(lp.max_violation(&s.x) < 1e-9);
            prop_assert!(s.objective_gap() < 1e-9);
        }

        // Two-variable packing programs against vertex enumeration.
        #[test]
        fn optimum_not_beaten_by_vertices(
            a in proptest::collection::vec(0.1..3.0f64, 6),
            b in proptest::collection::vec(0.5..4.0f64, 3),
            cost in proptest::collection::vec(0.1..2.0f64, 2),
        ) {
            let mut lp = LinearProgram::new(Sense::Maximize, cost.clone());
            for i in 0..3 {
                lp.push(c(&[a[2 * i], a[2 * i + 1]], Relation::Le, b[i], "row"));
            }
            let s = lp.solve().unwrap();
            prop_assert!(lp.max_violation(&s.x) < 1e-9);
            // brute force: enumerate pairwise intersections of rows and axes
            let mut lines: Vec<([f64; 2], f64)> = (0..3).map(|i| ([a[2 * i], a[2 * i + 1]], b[i])).collect();
            lines.push(([1.0, 0.0], 0.0));
            lines.push(([0.0, 1.0], 0.0));
            let mut best = f64::NEG_INFINITY;
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    let (p, q) = (lines[i], lines[j]);
                    let det = p.0[0] * q.0[1] - p.0[1] * q.0[0];
                    if det.abs() < 1e-12 { continue; }
                    let x = (p.1 * q.0[1] - p.0[1] * q.1) / det;
                    let y = (p.0[0] * q.1 - p.1 * q.0[0]) / det;
                    if lp.max_violation(&[x, y]) < 1e-12 {
                        best = best.max(cost[0] * x + cost[1] * y);
                    }
                }
            }
            prop_assert!((s.objective - best).abs() < 1e-9 * (1.0 + best.abs()));
        }
    }
}

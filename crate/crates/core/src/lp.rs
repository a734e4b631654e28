//! Dense-tableau simplex for small linear programs.
//!
//! The engine works on `min c'x  s.t.  A x = b,  0 <= x <= u` where upper
//! bounds may be infinite. Feasibility is established with phase-one
//! artificial variables; pricing is Dantzig's rule, switching to Bland's
//! rule after `2 * columns` consecutive degenerate pivots.
//!
//! Two front ends use it: [`simplex_solve`] for standard-form problems with
//! nonnegative variables, and [`solve_min_max_weight`], the weight problem
//! behind zonoid depth.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tolerance::{FEASIBILITY_TOL, OPTIMALITY_TOL, PIVOT_TOL};

/// `min objective'x  s.t.  eq_matrix x = eq_rhs,  x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq_matrix: Matrix,
    pub eq_rhs: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, eq_matrix: Matrix, eq_rhs: Vec<f64>) -> Result<Self> {
        if eq_matrix.cols() != objective.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} objective coefficients for {} variables",
                objective.len(),
                eq_matrix.cols()
            )));
        }
        if eq_matrix.rows() != eq_rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} right-hand sides for {} constraints",
                eq_rhs.len(),
                eq_matrix.rows()
            )));
        }
        if objective.iter().chain(&eq_rhs).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LP data"));
        }
        Ok(LpProblem {
            objective,
            eq_matrix,
            eq_rhs,
        })
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Meaningful only when `status` is `Optimal`.
    pub objective_value: f64,
    /// Meaningful only when `status` is `Optimal`.
    pub solution: Vec<f64>,
}

impl LpResult {
    fn without_solution(status: LpStatus, n: usize) -> Self {
        LpResult {
            status,
            objective_value: f64::NAN,
            solution: vec![0.0; n],
        }
    }
}

/// Solves a standard-form LP.
pub fn simplex_solve(problem: &LpProblem) -> Result<LpResult> {
    let n = problem.var_count();
    let upper = vec![f64::INFINITY; n];
    let mut tab = Tableau::new(
        &problem.eq_matrix,
        &problem.eq_rhs,
        &problem.objective,
        &upper,
    );
    if !tab.phase_one()? {
        return Ok(LpResult::without_solution(LpStatus::Infeasible, n));
    }
    match tab.phase_two()? {
        Phase::Optimal => {
            let solution = tab.structural_solution();
            let objective_value = crate::linalg::dot(&problem.objective, &solution);
            Ok(LpResult {
                status: LpStatus::Optimal,
                objective_value,
                solution,
            })
        }
        Phase::Unbounded => Ok(LpResult::without_solution(LpStatus::Unbounded, n)),
    }
}

/// Outcome of the min-max-weight problem.
#[derive(Clone, Debug, PartialEq)]
pub enum MinMaxWeight {
    /// The target lies outside the convex hull of the points.
    Infeasible,
    /// `t` is the smallest achievable maximal weight, `weights` a minimizer.
    Optimal { t: f64, weights: Vec<f64> },
}

impl MinMaxWeight {
    pub fn value(&self) -> Option<f64> {
        match self {
            MinMaxWeight::Infeasible => None,
            MinMaxWeight::Optimal { t, .. } => Some(*t),
        }
    }
}

/// `min { max_i w_i : sum w_i p_i = target, sum w_i = 1, w >= 0 }`.
///
/// Solved through the equivalent scaled problem
/// `max sum z_i  s.t.  sum z_i (p_i - target) = 0,  0 <= z_i <= 1`,
/// whose optimum `s` is `1 / t` (or `0` when the target is outside the
/// hull). The scaled problem has only `d` rows, so the tableau stays small
/// even for a thousand points.
pub fn solve_min_max_weight(points: &Matrix, target: &[f64]) -> Result<MinMaxWeight> {
    let n = points.rows();
    let d = points.cols();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if target.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "target has {} coordinates, points have {d}",
            target.len()
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target"));
    }
    let mut a = Matrix::zeros(d, n);
    for (i, p) in points.row_iter().enumerate() {
        for k in 0..d {
            a[(k, i)] = p[k] - target[k];
        }
    }
    let rhs = vec![0.0; d];
    let cost = vec![-1.0; n];
    let upper = vec![1.0; n];
    let mut tab = Tableau::new(&a, &rhs, &cost, &upper);
    // Zero right-hand side: the origin is feasible and phase one is trivial.
    if !tab.phase_one()? {
        return Err(Error::NumericalBreakdown(
            "homogeneous weight problem reported infeasible".into(),
        ));
    }
    match tab.phase_two()? {
        Phase::Unbounded => Err(Error::NumericalBreakdown(
            "bounded weight problem reported unbounded".into(),
        )),
        Phase::Optimal => {
            let z = tab.structural_solution();
            let s: f64 = z.iter().sum();
            // s is 0 outside the hull and at least 1 inside it.
            if s < 0.5 {
                return Ok(MinMaxWeight::Infeasible);
            }
            let weights = z.iter().map(|v| v / s).collect();
            Ok(MinMaxWeight::Optimal { t: 1.0 / s, weights })
        }
    }
}

/// The min-max-weight problem written literally in standard form:
/// variables `(w_1..w_n, t, slack_1..slack_n)`, rows `sum w_i p_i = target`,
/// `sum w_i = 1`, `w_i - t + slack_i = 0`, objective `t`.
///
/// Much larger than the scaled form used by [`solve_min_max_weight`]; kept
/// as an independent formulation for cross-checks.
pub fn min_max_weight_standard_form(points: &Matrix, target: &[f64]) -> Result<LpProblem> {
    let n = points.rows();
    let d = points.cols();
    if target.len() != d {
        return Err(Error::DimensionMismatch("target dimension".into()));
    }
    let vars = 2 * n + 1;
    let rows = d + 1 + n;
    let mut a = Matrix::zeros(rows, vars);
    for (i, p) in points.row_iter().enumerate() {
        for k in 0..d {
            a[(k, i)] = p[k];
        }
        a[(d, i)] = 1.0;
        a[(d + 1 + i, i)] = 1.0;
        a[(d + 1 + i, n)] = -1.0;
        a[(d + 1 + i, n + 1 + i)] = 1.0;
    }
    let mut rhs = target.to_vec();
    rhs.push(1.0);
    rhs.extend(std::iter::repeat_n(0.0, n));
    let mut objective = vec![0.0; vars];
    objective[n] = 1.0;
    LpProblem::new(objective, a, rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Optimal,
    Unbounded,
}

/// Bounded-variable tableau. Columns `0..structural` are the problem's
/// variables, the remaining `m` columns are artificials.
struct Tableau {
    m: usize,
    n: usize,
    structural: usize,
    /// Row-major `m x n` block holding `B^{-1} A`.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn new(a: &Matrix, b: &[f64], cost: &[f64], upper: &[f64]) -> Self {
        let m = a.rows();
        let structural = a.cols();
        let n = structural + m;
        let mut t = vec![0.0; m * n];
        let mut beta = vec![0.0; m];
        for i in 0..m {
            let row = a.row(i);
            // Row equilibration keeps the absolute tolerances meaningful.
            let scale = row
                .iter()
                .chain(std::iter::once(&b[i]))
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            let f = sign / scale;
            for j in 0..structural {
                t[i * n + j] = row[j] * f;
            }
            t[i * n + structural + i] = 1.0;
            beta[i] = b[i] * f;
        }
        let mut full_upper = upper.to_vec();
        full_upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        let mut full_cost = cost.to_vec();
        full_cost.extend(std::iter::repeat_n(0.0, m));
        let mut state = vec![VarState::AtLower; n];
        for s in &mut state[structural..] {
            *s = VarState::Basic;
        }
        Tableau {
            m,
            n,
            structural,
            t,
            beta,
            basis: (structural..n).collect(),
            state,
            upper: full_upper,
            cost: full_cost,
            reduced: vec![0.0; n],
            iterations: 0,
            max_iterations: 100 * (m + n) + 1000,
        }
    }

    fn price_with(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.n..(i + 1) * self.n];
            for (r, &v) in self.reduced.iter_mut().zip(row) {
                *r -= cb * v;
            }
        }
    }

    fn artificial_sum(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.beta)
            .filter(|(&j, _)| j >= self.structural)
            .map(|(_, &v)| v)
            .sum()
    }

    /// Returns `false` when the problem is infeasible.
    fn phase_one(&mut self) -> Result<bool> {
        let phase_cost: Vec<f64> = (0..self.n)
            .map(|j| if j >= self.structural { 1.0 } else { 0.0 })
            .collect();
        self.price_with(&phase_cost);
        if self.artificial_sum() > PIVOT_TOL {
            // Phase one is bounded below by zero, so it cannot be unbounded.
            self.iterate(true)?;
        }
        if self.artificial_sum() > FEASIBILITY_TOL {
            return Ok(false);
        }
        // Artificials are fixed at zero from here on.
        for j in self.structural..self.n {
            self.upper[j] = 0.0;
        }
        Ok(true)
    }

    fn phase_two(&mut self) -> Result<Phase> {
        let cost = self.cost.clone();
        self.price_with(&cost);
        self.iterate(false)
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            let rc = self.reduced[j];
            let improving = match self.state[j] {
                VarState::Basic => false,
                VarState::AtLower => rc < -OPTIMALITY_TOL && self.upper[j] > 0.0,
                VarState::AtUpper => rc > OPTIMALITY_TOL,
            };
            if !improving {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, v)| rc.abs() > v) {
                best = Some((j, rc.abs()));
            }
        }
        best.map(|(j, _)| j)
    }

    fn iterate(&mut self, phase_one: bool) -> Result<Phase> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            if phase_one && self.artificial_sum() <= PIVOT_TOL {
                return Ok(Phase::Optimal);
            }
            let Some(j) = self.choose_entering(bland) else {
                return Ok(Phase::Optimal);
            };
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::NumericalBreakdown(format!(
                    "iteration limit {} exceeded",
                    self.max_iterations
                )));
            }

            let sigma = if self.state[j] == VarState::AtLower {
                1.0
            } else {
                -1.0
            };
            // Ratio test. `None` for the leaving row means a bound flip.
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, VarState, f64)> = None;
            for i in 0..self.m {
                let tij = self.t[i * self.n + j];
                if tij.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -sigma * tij;
                let bv = self.basis[i];
                let (limit, bound) = if rate < 0.0 {
                    (self.beta[i] / -rate, VarState::AtLower)
                } else if self.upper[bv].is_finite() {
                    ((self.upper[bv] - self.beta[i]) / rate, VarState::AtUpper)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = if limit < theta - PIVOT_TOL {
                    true
                } else if limit <= theta + PIVOT_TOL {
                    match leave {
                        // Prefer a bound flip on ties.
                        None => false,
                        Some((r, _, _)) if bland => bv < self.basis[r],
                        Some((_, _, piv)) => tij.abs() > piv,
                    }
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leave = Some((i, bound, tij.abs()));
                }
            }
            if theta.is_infinite() {
                return Ok(Phase::Unbounded);
            }

            for i in 0..self.m {
                let tij = self.t[i * self.n + j];
                if tij != 0.0 {
                    self.beta[i] -= sigma * theta * tij;
                }
            }
            match leave {
                None => {
                    self.state[j] = if sigma > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                }
                Some((r, bound, _)) => {
                    let entering_value = if sigma > 0.0 {
                        theta
                    } else {
                        self.upper[j] - theta
                    };
                    let out = self.basis[r];
                    self.state[out] = bound;
                    self.state[j] = VarState::Basic;
                    self.basis[r] = j;
                    self.beta[r] = entering_value;
                    self.pivot(r, j);
                }
            }
            if self.beta.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalBreakdown("non-finite basic value".into()));
            }

            if theta <= PIVOT_TOL {
                degenerate_run += 1;
                if degenerate_run > 2 * self.n {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let piv = self.t[r * n + j];
        let inv = 1.0 / piv;
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v *= inv;
        }
        self.t[r * n + j] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * n);
        let (pivot_row, after) = rest.split_at_mut(n);
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[j];
            if f == 0.0 {
                continue;
            }
            for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                *v -= f * p;
            }
            row[j] = 0.0;
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (v, &p) in self.reduced.iter_mut().zip(pivot_row.iter()) {
                *v -= f * p;
            }
            self.reduced[j] = 0.0;
        }
    }

    fn structural_solution(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.structural)
            .map(|j| match self.state[j] {
                VarState::AtUpper => self.upper[j],
                _ => 0.0,
            })
            .collect();
        for (i, &bv) in self.basis.iter().enumerate() {
            if bv < self.structural {
                let mut v = self.beta[i].max(0.0);
                if self.upper[bv].is_finite() {
                    v = v.min(self.upper[bv]);
                }
                x[bv] = v;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(obj: &[f64], rows: &[&[f64]], rhs: &[f64]) -> LpProblem {
        LpProblem::new(obj.to_vec(), Matrix::from_rows(rows).unwrap(), rhs.to_vec()).unwrap()
    }

    #[test]
    fn corner_of_simplex() {
        let r = simplex_solve(&lp(&[1.0, 0.0], &[&[1.0, 1.0]], &[1.0])).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!(r.objective_value.abs() < 1e-12);
        assert!((r.solution[0]).abs() < 1e-12 && (r.solution[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_system() {
        let r = simplex_solve(&lp(
            &[1.0, 0.0],
            &[&[1.0, -1.0], &[1.0, 1.0]],
            &[1.0, 0.0],
        ))
        .unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let r = simplex_solve(&lp(&[-1.0, 0.0], &[&[1.0, -1.0]], &[0.0])).unwrap();
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // x1 + x2 = 2 written twice (once negated), min x1 - x2.
        let r = simplex_solve(&lp(
            &[1.0, -1.0],
            &[&[1.0, 1.0], &[-1.0, -1.0]],
            &[2.0, -2.0],
        ))
        .unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective_value + 2.0).abs() < 1e-12);
    }

    #[test]
    fn classic_degenerate_problem_terminates() {
        // Beale's cycling example in equality form with slacks.
        let r = simplex_solve(&lp(
            &[-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0],
            &[
                &[0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
                &[0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ],
            &[0.0, 0.0, 1.0],
        ))
        .unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective_value + 0.05).abs() < 1e-9);
    }

    #[test]
    fn min_max_weight_examples() {
        let two = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        match solve_min_max_weight(&two, &[0.25]).unwrap() {
            MinMaxWeight::Optimal { t, weights } => {
                assert!((t - 0.75).abs() < 1e-12);
                assert!((weights[0] - 0.75).abs() < 1e-12);
                assert!((weights[1] - 0.25).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let tri = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let t = solve_min_max_weight(&tri, &[1.0 / 3.0, 1.0 / 3.0])
            .unwrap()
            .value()
            .unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-12);
        let seg = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(
            solve_min_max_weight(&seg, &[2.0, 0.0]).unwrap(),
            MinMaxWeight::Infeasible
        );
    }

    #[test]
    fn vertex_needs_full_weight() {
        let tri = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.2, 0.2]]).unwrap();
        let t = solve_min_max_weight(&tri, &[1.0, 0.0]).unwrap().value().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_form_agrees_with_scaled_form() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [1.5, 1.5], [0.3, 0.9]])
            .unwrap();
        for target in [[0.5, 0.5], [1.0, 0.2], [0.1, 1.5], [3.0, 3.0]] {
            let fast = solve_min_max_weight(&pts, &target).unwrap().value();
            let std = simplex_solve(&min_max_weight_standard_form(&pts, &target).unwrap()).unwrap();
            match fast {
                Some(t) => {
                    assert_eq!(std.status, LpStatus::Optimal);
                    assert!((t - std.objective_value).abs() < 1e-9, "{target:?}");
                }
                None => assert_eq!(std.status, LpStatus::Infeasible),
            }
        }
    }

    #[test]
    fn rejects_malformed_problems() {
        let a = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert!(LpProblem::new(vec![1.0], a.clone(), vec![1.0]).is_err());
        assert!(LpProblem::new(vec![1.0, 1.0], a, vec![1.0, 2.0]).is_err());
        let pts = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(solve_min_max_weight(&pts, &[0.0]).is_err());
    }
}

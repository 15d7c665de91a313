//! Dense two-phase simplex with Bland's rule and dual certificates.
//!
//! Problems are held in standard form, `min c·x  s.t.  A x = b, x ≥ 0`.
//! [`LpBuilder`] accepts `≤`/`≥`/`=` rows and appends slack columns after
//! the structural variables.

use serde::Serialize;

use crate::{Error, Result};

/// Pivot elements smaller than this are never used.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Reduced costs above `-OPT_EPS` count as nonnegative inside the simplex
/// loop. The certificate check uses the caller's tolerance instead.
const OPT_EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    /// Columns `0..num_structural` are the caller's variables; the rest are
    /// slacks added by [`LpBuilder`].
    pub num_structural: usize,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, eq_matrix: Vec<Vec<f64>>, eq_rhs: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        let p = LpProblem {
            objective,
            eq_matrix,
            eq_rhs,
            num_structural: n,
        };
        p.check_dims()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.eq_rhs.len()
    }

    fn check_dims(&self) -> Result<()> {
        if self.eq_matrix.len() != self.eq_rhs.len() {
            return Err(Error::InvalidInput(format!(
                "{} constraint rows but {} right-hand sides",
                self.eq_matrix.len(),
                self.eq_rhs.len()
            )));
        }
        if let Some((i, row)) = self
            .eq_matrix
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.objective.len())
        {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} entries, expected {}",
                row.len(),
                self.objective.len()
            )));
        }
        if self.num_structural > self.objective.len() {
            return Err(Error::InvalidInput("more structural variables than columns".into()));
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.eq_rhs.iter().all(|v| v.is_finite())
            && self.eq_matrix.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite LP data".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

/// General-form LP over nonnegative variables; converts to [`LpProblem`].
#[derive(Debug, Clone, Default)]
pub struct LpBuilder {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, RowKind, f64)>,
}

impl LpBuilder {
    /// Minimize `objective · x` over `x ≥ 0`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        LpBuilder {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn row(mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) -> Self {
        self.rows.push((coeffs, kind, rhs));
        self
    }

    pub fn le(self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.row(coeffs, RowKind::Le, rhs)
    }

    pub fn ge(self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.row(coeffs, RowKind::Ge, rhs)
    }

    pub fn eq(self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.row(coeffs, RowKind::Eq, rhs)
    }

    pub fn build(&self) -> Result<LpProblem> {
        let n = self.objective.len();
        let slacks = self.rows.iter().filter(|r| r.1 != RowKind::Eq).count();
        let mut objective = self.objective.clone();
        objective.resize(n + slacks, 0.0);
        let mut eq_matrix = Vec::with_capacity(self.rows.len());
        let mut eq_rhs = Vec::with_capacity(self.rows.len());
        let mut next_slack = n;
        for (i, (coeffs, kind, rhs)) in self.rows.iter().enumerate() {
            if coeffs.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} coefficients, expected {n}",
                    coeffs.len()
                )));
            }
            let mut row = coeffs.clone();
            row.resize(n + slacks, 0.0);
            match kind {
                RowKind::Le => {
                    row[next_slack] = 1.0;
                    next_slack += 1;
                }
                RowKind::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                }
                RowKind::Eq => {}
            }
            eq_matrix.push(row);
            eq_rhs.push(*rhs);
        }
        let p = LpProblem {
            objective,
            eq_matrix,
            eq_rhs,
            num_structural: n,
        };
        p.check_dims()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point over all columns (structural and slack).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows.
    pub y: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            y: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            iterations,
        }
    }
}

struct Tableau {
    /// `m` rows of `n + m + 1` entries: structural, artificial, rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
    m: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n + self.m]
    }

    fn pivot(&mut self, r: usize, c: usize, cost_row: &mut [f64]) {
        let width = self.n + self.m + 1;
        let pv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= pv;
        }
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for k in 0..width {
                    row[k] -= f * pivot_row[k];
                }
                row[c] = 0.0;
            }
        }
        let f = cost_row[c];
        if f != 0.0 {
            for k in 0..width {
                cost_row[k] -= f * pivot_row[k];
            }
            cost_row[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index improving column, then minimum ratio with
    /// ties broken by lowest basic index.
    fn run(
        &mut self,
        cost_row: &mut [f64],
        allowed: usize,
        iterations: &mut usize,
        limit: usize,
    ) -> Result<bool> {
        loop {
            let Some(enter) = (0..allowed).find(|&j| cost_row[j] < -OPT_EPS) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.rows[i][enter];
                if a <= PIVOT_FLOOR {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter, cost_row);
            *iterations += 1;
            if *iterations > limit {
                return Err(Error::NumericalFailure(format!(
                    "simplex exceeded {limit} pivots"
                )));
            }
        }
    }
}

/// Solves a standard-form LP. Infeasibility and unboundedness are reported
/// through [`LpSolution::status`]; errors are reserved for malformed input and
/// numerical breakdown.
pub fn solve_lp(p: &LpProblem, tol: f64) -> Result<LpSolution> {
    p.check_dims()?;
    let n = p.num_vars();
    let m = p.num_rows();
    let width = n + m + 1;
    let limit = 10_000 + 200 * (n + m);

    // Flip rows so that b ≥ 0; artificials then start as a feasible basis.
    let signs: Vec<f64> = p
        .eq_rhs
        .iter()
        .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; width];
        for j in 0..n {
            row[j] = signs[i] * p.eq_matrix[i][j];
        }
        row[n + i] = 1.0;
        row[n + m] = signs[i] * p.eq_rhs[i];
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        n,
        m,
    };
    let mut iterations = 0;

    // Phase 1: minimize the sum of artificials.
    let mut cost = vec![0.0; width];
    for row in &t.rows {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[n + m] -= row[n + m];
    }
    t.run(&mut cost, n, &mut iterations, limit)?;
    let infeasibility = -cost[n + m];
    let b_scale = 1.0 + p.eq_rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if infeasibility > tol * b_scale {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, n, m, iterations));
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and keep a zero-valued artificial.
    for r in 0..m {
        if t.basis[r] < n {
            continue;
        }
        let best = (0..n)
            .map(|j| (j, t.rows[r][j].abs()))
            .filter(|&(_, a)| a > PIVOT_FLOOR)
            .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        if let Some((j, _)) = best {
            t.pivot(r, j, &mut cost);
        }
    }

    // Phase 2.
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&p.objective);
    for r in 0..m {
        let cb = if t.basis[r] < n { p.objective[t.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for k in 0..width {
                cost[k] -= cb * t.rows[r][k];
            }
        }
    }
    let bounded = t.run(&mut cost, n, &mut iterations, limit)?;
    if !bounded {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, n, m, iterations));
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    // The artificial block of the tableau holds B^{-1} for the sign-flipped
    // rows, so y = c_B B^{-1} can be read off without another solve.
    let mut y = vec![0.0; m];
    for r in 0..m {
        let cb = if t.basis[r] < n { p.objective[t.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += cb * t.rows[r][n + i];
            }
        }
    }
    for (yi, s) in y.iter_mut().zip(&signs) {
        *yi *= s;
    }
    let reduced_costs = reduced_costs(p, &y);
    let objective = dot(&p.objective, &x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        y,
        reduced_costs,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn reduced_costs(p: &LpProblem, y: &[f64]) -> Vec<f64> {
    (0..p.num_vars())
        .map(|j| {
            p.objective[j]
                - p.eq_matrix
                    .iter()
                    .zip(y)
                    .map(|(row, yi)| row[j] * yi)
                    .sum::<f64>()
        })
        .collect()
}

/// Residuals of the optimality conditions, recomputed from the problem data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateResiduals {
    pub primal_residual: f64,
    pub min_x: f64,
    pub min_reduced_cost: f64,
    pub max_complementarity: f64,
    pub duality_gap: f64,
    pub objective_mismatch: f64,
}

impl CertificateResiduals {
    pub fn passes(&self, tol: f64) -> bool {
        self.primal_residual <= tol
            && self.min_x >= -tol
            && self.min_reduced_cost >= -tol
            && self.max_complementarity <= tol
            && self.duality_gap <= tol
            && self.objective_mismatch <= tol
    }
}

pub fn certificate_residuals(p: &LpProblem, s: &LpSolution) -> CertificateResiduals {
    let primal_residual = p
        .eq_matrix
        .iter()
        .zip(&p.eq_rhs)
        .map(|(row, b)| (dot(row, &s.x) - b).abs())
        .fold(0.0, f64::max);
    let rc = reduced_costs(p, &s.y);
    let cx = dot(&p.objective, &s.x);
    CertificateResiduals {
        primal_residual,
        min_x: s.x.iter().copied().fold(f64::INFINITY, f64::min).min(0.0),
        min_reduced_cost: rc.iter().copied().fold(f64::INFINITY, f64::min).min(0.0),
        max_complementarity: s
            .x
            .iter()
            .zip(&rc)
            .map(|(x, r)| (x * r).abs())
            .fold(0.0, f64::max),
        duality_gap: (cx - dot(&p.eq_rhs, &s.y)).abs(),
        objective_mismatch: (cx - s.objective).abs(),
    }
}

/// Re-verifies an optimal solution by direct arithmetic on the problem data.
pub fn check_certificate(p: &LpProblem, s: &LpSolution, tol: f64) -> bool {
    if s.status != LpStatus::Optimal
        || s.x.len() != p.num_vars()
        || s.y.len() != p.num_rows()
        || p.check_dims().is_err()
    {
        return false;
    }
    certificate_residuals(p, s).passes(tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_to_one() {
        let p = LpProblem::new(vec![1.0, 1.0], vec![vec![1.0, 1.0]], vec![1.0]).unwrap();
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!(check_certificate(&p, &s, 1e-9));
    }

    #[test]
    fn slack_conversion() {
        let p = LpBuilder::minimize(vec![-1.0]).le(vec![1.0], 2.0).build().unwrap();
        assert_eq!(p.num_vars(), 2);
        assert_eq!(p.num_structural, 1);
        let s = solve_lp(&p, 1e-9).unwrap();
        assert!((s.objective + 2.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12);
        assert!(check_certificate(&p, &s, 1e-9));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = LpBuilder::minimize(vec![1.0])
            .le(vec![1.0], 1.0)
            .ge(vec![1.0], 2.0)
            .build()
            .unwrap();
        assert_eq!(solve_lp(&p, 1e-9).unwrap().status, LpStatus::Infeasible);

        let p = LpBuilder::minimize(vec![-1.0, 0.0])
            .eq(vec![1.0, -1.0], 0.0)
            .build()
            .unwrap();
        assert_eq!(solve_lp(&p, 1e-9).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // -x1 - x2 = -2 twice (redundant), min x1 + 2 x2.
        let p = LpProblem::new(
            vec![1.0, 2.0],
            vec![vec![-1.0, -1.0], vec![-1.0, -1.0]],
            vec![-2.0, -2.0],
        )
        .unwrap();
        let s = solve_lp(&p, 1e-9).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!(check_certificate(&p, &s, 1e-9));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let p = LpBuilder::minimize(vec![-0.75, 150.0, -0.02, 6.0])
            .le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0)
            .build()
            .unwrap();
        let s = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-12);
        assert!(check_certificate(&p, &s, 1e-9));
    }

    #[test]
    fn perturbed_basic_coordinate_fails_certificate() {
        let p = LpProblem::new(vec![1.0, 1.0], vec![vec![1.0, 1.0]], vec![1.0]).unwrap();
        let mut s = solve_lp(&p, 1e-9).unwrap();
        let basic = s.x.iter().position(|&v| v > 0.5).unwrap();
        s.x[basic] += 1e-3;
        assert!(!check_certificate(&p, &s, 1e-9));
    }

    #[test]
    fn dimension_errors() {
        assert!(LpProblem::new(vec![1.0], vec![vec![1.0, 2.0]], vec![1.0]).is_err());
        assert!(LpProblem::new(vec![1.0], vec![vec![1.0]], vec![]).is_err());
        assert!(LpBuilder::minimize(vec![1.0]).le(vec![1.0, 1.0], 1.0).build().is_err());
    }

    #[test]
    fn deterministic() {
        let p = LpBuilder::minimize(vec![-1.0, -1.0, 0.5])
            .le(vec![1.0, 2.0, 1.0], 4.0)
            .le(vec![3.0, 1.0, -1.0], 5.0)
            .ge(vec![1.0, 0.0, 1.0], 0.5)
            .build()
            .unwrap();
        let a = solve_lp(&p, 1e-9).unwrap();
        let b = solve_lp(&p, 1e-9).unwrap();
        assert_eq!(a, b);
        assert!(check_certificate(&p, &a, 1e-9));
    }
}

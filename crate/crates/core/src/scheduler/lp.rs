//! Dense bounded-variable primal simplex.
//!
//! Solves `min cᵀx  s.t.  Ax = b,  0 ≤ x ≤ u` with a two-phase method.
//! Upper bounds are handled implicitly (nonbasic variables sit at either
//! bound), so only the equality rows enter the tableau. Pricing is Dantzig's
//! rule, switching to Bland's rule after a run of degenerate pivots.
//!
//! This solver is the reference oracle for the scheduler and shares no code
//! with the greedy path.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub costs: Vec<f64>,
    /// Per-variable upper bound; `f64::INFINITY` for none.
    pub upper: Vec<f64>,
    /// Dense equality rows, each of length `costs.len()`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

const PIVOT_EPS: f64 = 1e-11;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

struct Tableau {
    m: usize,
    n: usize,
    a: Vec<Vec<f64>>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::AtLower => 0.0,
            Status::AtUpper => self.upper[j],
            Status::Basic => {
                let r = self.basis.iter().position(|&b| b == j).unwrap();
                self.beta[r]
            }
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (dj, arj) in d.iter_mut().zip(&self.a[r]) {
                    *dj -= cb * arj;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.a[r][j];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (k, row) in self.a.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[j] = 0.0;
            }
        }
    }

    fn run(&mut self, cost: &[f64], max_iter: usize) -> Result<()> {
        let scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let cost_eps = 1e-10 * scale;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::Lp(format!("iteration limit {max_iter} reached")));
            }
            let d = self.reduced_costs(cost);
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let mut entering: Option<(usize, f64)> = None;
            for (j, &dj) in d.iter().enumerate().take(self.n) {
                let improving = match self.status[j] {
                    Status::AtLower => -dj,
                    Status::AtUpper => dj,
                    Status::Basic => continue,
                };
                // A variable pinned at zero width can never move.
                if improving > cost_eps && self.upper[j] > 0.0 {
                    if bland {
                        entering = Some((j, improving));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| improving > best) {
                        entering = Some((j, improving));
                    }
                }
            }
            let Some((j, _)) = entering else {
                return Ok(());
            };
            self.iterations += 1;

            let dir = if self.status[j] == Status::AtLower { 1.0 } else { -1.0 };
            let mut t_max = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..self.m {
                let a = dir * self.a[r][j];
                let b = self.basis[r];
                let (ratio, to_upper) = if a > PIVOT_EPS {
                    ((self.beta[r] / a).max(0.0), false)
                } else if a < -PIVOT_EPS && self.upper[b].is_finite() {
                    (((self.upper[b] - self.beta[r]) / -a).max(0.0), true)
                } else {
                    continue;
                };
                let tie_tol = 1e-12 * t_max.abs().max(1.0);
                let better = if !t_max.is_finite() || ratio < t_max - tie_tol {
                    true
                } else if ratio <= t_max + tie_tol {
                    // Ties go to the lowest basic index (Bland).
                    leave.is_some_and(|(lr, _)| b < self.basis[lr])
                } else {
                    false
                };
                if better {
                    t_max = t_max.min(ratio);
                    leave = Some((r, to_upper));
                }
            }
            if !t_max.is_finite() {
                return Err(Error::Lp("problem is unbounded".into()));
            }
            if t_max <= 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for r in 0..self.m {
                self.beta[r] -= dir * t_max * self.a[r][j];
            }
            match leave {
                None => {
                    self.status[j] = match self.status[j] {
                        Status::AtLower => Status::AtUpper,
                        _ => Status::AtLower,
                    };
                }
                Some((r, to_upper)) => {
                    let start = if self.status[j] == Status::AtLower {
                        0.0
                    } else {
                        self.upper[j]
                    };
                    let leaving = self.basis[r];
                    self.status[leaving] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.pivot(r, j);
                    self.beta[r] = start + dir * t_max;
                    self.basis[r] = j;
                    self.status[j] = Status::Basic;
                }
            }
        }
    }
}

impl LinearProgram {
    pub fn validate(&self) -> Result<()> {
        let n = self.costs.len();
        if self.upper.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: self.upper.len(),
            });
        }
        if self.rows.len() != self.rhs.len() {
            return Err(Error::LengthMismatch {
                expected: self.rows.len(),
                found: self.rhs.len(),
            });
        }
        if let Some(row) = self.rows.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: row.len(),
            });
        }
        if self.upper.iter().any(|u| !(*u >= 0.0)) {
            return Err(Error::Lp("upper bounds must be non-negative".into()));
        }
        let finite = self.costs.iter().chain(&self.rhs).all(|v| v.is_finite())
            && self.rows.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Lp("non-finite coefficient".into()));
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        let n = self.costs.len();
        let m = self.rows.len();
        let total = n + m;

        let mut a = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        for (r, (row, &b)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let mut full: Vec<f64> = row.iter().map(|v| sign * v).collect();
            full.resize(total, 0.0);
            full[n + r] = 1.0;
            a.push(full);
            beta.push(sign * b);
        }
        let mut upper = self.upper.clone();
        upper.resize(total, f64::INFINITY);
        let mut status = vec![Status::AtLower; total];
        for s in &mut status[n..] {
            *s = Status::Basic;
        }
        let mut tab = Tableau {
            m,
            n: total,
            a,
            beta,
            basis: (n..total).collect(),
            status,
            upper,
            iterations: 0,
        };
        let max_iter = 50 * (total + m) + 1000;

        let mut phase1 = vec![0.0; total];
        for c in &mut phase1[n..] {
            *c = 1.0;
        }
        tab.run(&phase1, max_iter)?;
        let infeasibility: f64 = (n..total).map(|j| tab.value(j)).sum();
        let rhs_scale = self.rhs.iter().fold(1.0f64, |m, b| m.max(b.abs()));
        if infeasibility > 1e-9 * rhs_scale {
            return Err(Error::Lp(format!(
                "problem is infeasible (residual {infeasibility:e})"
            )));
        }
        // Pin artificials at zero for phase two.
        for j in n..total {
            tab.upper[j] = 0.0;
            if tab.status[j] == Status::AtUpper {
                tab.status[j] = Status::AtLower;
            }
        }
        for r in 0..m {
            if tab.basis[r] >= n {
                tab.beta[r] = 0.0;
            }
        }

        let mut phase2 = self.costs.clone();
        phase2.resize(total, 0.0);
        tab.run(&phase2, max_iter)?;

        let x: Vec<f64> = (0..n).map(|j| tab.value(j)).collect();
        let objective = x.iter().zip(&self.costs).map(|(x, c)| x * c).sum();
        Ok(LpSolution {
            x,
            objective,
            iterations: tab.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_textbook_problem() {
        // min -x - 2y  s.t. x + y + s = 4, x ≤ 3, y ≤ 3, s ≥ 0
        let lp = LinearProgram {
            costs: vec![-1.0, -2.0, 0.0],
            upper: vec![3.0, 3.0, f64::INFINITY],
            rows: vec![vec![1.0, 1.0, 1.0]],
            rhs: vec![4.0],
        };
        let sol = lp.solve().unwrap();
        assert_relative_eq!(sol.objective, -7.0, max_relative = 1e-12);
        assert_relative_eq!(sol.x[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(sol.x[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn negative_rhs_and_infeasible() {
        let lp = LinearProgram {
            costs: vec![1.0, 1.0],
            upper: vec![5.0, 5.0],
            rows: vec![vec![-1.0, -1.0]],
            rhs: vec![-3.0],
        };
        assert_relative_eq!(lp.solve().unwrap().objective, 3.0, max_relative = 1e-12);

        let infeasible = LinearProgram {
            costs: vec![1.0, 1.0],
            upper: vec![1.0, 1.0],
            rows: vec![vec![1.0, 1.0]],
            rhs: vec![3.0],
        };
        assert!(matches!(infeasible.solve(), Err(Error::Lp(m)) if m.contains("infeasible")));
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram {
            costs: vec![-1.0, 0.0],
            upper: vec![f64::INFINITY, f64::INFINITY],
            rows: vec![vec![1.0, -1.0]],
            rhs: vec![0.0],
        };
        assert!(matches!(lp.solve(), Err(Error::Lp(m)) if m.contains("unbounded")));
    }

    #[test]
    fn redundant_rows() {
        let lp = LinearProgram {
            costs: vec![2.0, 1.0],
            upper: vec![10.0, 10.0],
            rows: vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            rhs: vec![4.0, 8.0],
        };
        let sol = lp.solve().unwrap();
        assert_relative_eq!(sol.objective, 4.0, max_relative = 1e-12);
    }
}

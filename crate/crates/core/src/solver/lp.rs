//! Dense two-phase simplex with Bland's rule, generic over [`Scalar`].

use num_rational::BigRational;
use thiserror::Error;

use crate::scalar::Scalar;

/// `minimize objective · x` subject to `a · x <= b` for every row and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<S> {
    pub n: usize,
    pub rows: Vec<(Vec<S>, S)>,
    pub objective: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult<S> {
    Optimal { x: Vec<S>, objective: S },
    /// Carries the phase-one optimum, i.e. how far from feasible the
    /// constraints are in the sum-of-artificials sense.
    Infeasible { infeasibility: S },
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("numerical failure: {0}")]
pub struct NumericalFailure(pub String);

struct Tableau<S> {
    /// `m` constraint rows followed by the objective row; the last column is
    /// the right-hand side (negated objective value in the objective row).
    t: Vec<Vec<S>>,
    basis: Vec<usize>,
    cols: usize,
}

impl<S: Scalar> Tableau<S> {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let k = row[c].clone();
            if k.is_zero() {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v = v.clone() - k.clone() * pv.clone();
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes the objective row over columns `< limit`. Returns false if
    /// unbounded.
    fn run(&mut self, limit: usize) -> bool {
        let tol = S::tolerance();
        let m = self.m();
        let rhs = self.cols;
        loop {
            let Some(c) = (0..limit).find(|&j| self.t[m][j] < -tol.clone()) else {
                return true;
            };
            let mut best: Option<(usize, S)> = None;
            for i in 0..m {
                let a = self.t[i][c].clone();
                if a > tol {
                    let ratio = self.t[i][rhs].clone() / a;
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

pub fn solve_lp<S: Scalar>(p: &LpProblem<S>) -> LpResult<S> {
    let n = p.n;
    let m = p.rows.len();
    let negative: Vec<bool> = p.rows.iter().map(|(_, b)| *b < S::zero()).collect();
    let arts = negative.iter().filter(|x| **x).count();
    let cols = n + m + arts;
    let mut t = vec![vec![S::zero(); cols + 1]; m + 1];
    let mut basis = Vec::with_capacity(m);
    let mut next_art = n + m;
    for (i, (a, b)) in p.rows.iter().enumerate() {
        let sign = if negative[i] { -S::one() } else { S::one() };
        for j in 0..n {
            t[i][j] = sign.clone() * a[j].clone();
        }
        t[i][n + i] = sign.clone();
        t[i][cols] = sign * b.clone();
        if negative[i] {
            t[i][next_art] = S::one();
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(n + i);
        }
    }
    // phase one: minimize the sum of artificials, priced out of the basis
    for i in 0..m {
        if negative[i] {
            for j in 0..=cols {
                if j < n + m || j == cols {
                    let v = t[i][j].clone();
                    t[m][j] = t[m][j].clone() - v;
                }
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };
    if arts > 0 {
        tab.run(cols);
        let infeasibility = -tab.t[m][cols].clone();
        let feas_tol = S::tolerance() * S::from_f64_lossy(100.0).expect("finite");
        if infeasibility > feas_tol {
            return LpResult::Infeasible { infeasibility };
        }
        // drive remaining artificials out of the basis
        let mut i = 0;
        while i < tab.m() {
            if tab.basis[i] >= n + m {
                match (0..n + m).find(|&j| !tab.t[i][j].is_negligible()) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    // phase two objective row
    let m = tab.m();
    let mut obj = vec![S::zero(); cols + 1];
    obj[..n].clone_from_slice(&p.objective[..n]);
    for i in 0..m {
        let cb = if tab.basis[i] < n { p.objective[tab.basis[i]].clone() } else { S::zero() };
        if cb.is_zero() {
            continue;
        }
        for (o, v) in obj.iter_mut().zip(&tab.t[i]) {
            *o = o.clone() - cb.clone() * v.clone();
        }
    }
    tab.t[m] = obj;
    if !tab.run(n + m) {
        return LpResult::Unbounded;
    }
    let mut x = vec![S::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[i][cols].clone();
        }
    }
    let objective = p.objective.iter().zip(&x).fold(S::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
    LpResult::Optimal { x, objective }
}

const CERT_TOL: f64 = 1e-9;

/// Largest violation of `a · x <= b` or `x >= 0`.
pub fn max_violation(p: &LpProblem<f64>, x: &[f64]) -> f64 {
    let rows = p.rows.iter().map(|(a, b)| a.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b);
    let bounds = x.iter().map(|v| -v);
    rows.chain(bounds).fold(0.0, f64::max)
}

fn to_rational(p: &LpProblem<f64>) -> Option<LpProblem<BigRational>> {
    let conv = |v: &f64| BigRational::from_f64_lossy(*v);
    Some(LpProblem {
        n: p.n,
        rows: p
            .rows
            .iter()
            .map(|(a, b)| Some((a.iter().map(conv).collect::<Option<Vec<_>>>()?, conv(b)?)))
            .collect::<Option<Vec<_>>>()?,
        objective: p.objective.iter().map(conv).collect::<Option<Vec<_>>>()?,
    })
}

/// Solves in `f64` and certifies the answer by a residual check. An answer
/// that fails the check, or an infeasibility verdict close to the boundary,
/// is recomputed in exact rational arithmetic.
pub fn solve_lp_certified(p: &LpProblem<f64>) -> Result<LpResult<f64>, NumericalFailure> {
    let fast = solve_lp(p);
    match &fast {
        LpResult::Optimal { x, .. } if max_violation(p, x) <= CERT_TOL => return Ok(fast),
        LpResult::Infeasible { infeasibility } if *infeasibility > 1e-6 => return Ok(fast),
        LpResult::Unbounded => return Ok(fast),
        _ => {}
    }
    let exact = to_rational(p).ok_or_else(|| NumericalFailure("non-finite LP data".into()))?;
    match solve_lp(&exact) {
        LpResult::Optimal { x, objective } => {
            let x: Vec<f64> = x.iter().map(Scalar::to_f64_lossy).collect();
            if max_violation(p, &x) > CERT_TOL {
                return Err(NumericalFailure(format!(
                    "rounded exact solution violates constraints by {}",
                    max_violation(p, &x)
                )));
            }
            Ok(LpResult::Optimal { x, objective: objective.to_f64_lossy() })
        }
        LpResult::Infeasible { infeasibility } => Ok(LpResult::Infeasible { infeasibility: infeasibility.to_f64_lossy() }),
        LpResult::Unbounded => Ok(LpResult::Unbounded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(n: usize, rows: &[(&[f64], f64)], objective: &[f64]) -> LpProblem<f64> {
        LpProblem { n, rows: rows.iter().map(|(a, b)| (a.to_vec(), *b)).collect(), objective: objective.to_vec() }
    }

    fn optimum(r: LpResult<f64>) -> (Vec<f64>, f64) {
        match r {
            LpResult::Optimal { x, objective } => (x, objective),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_lower_bound() {
        // x = [d+, d-]; d >= 0.5
        let p = lp(2, &[(&[-1.0, 1.0], -0.5)], &[1.0, 1.0]);
        let (x, obj) = optimum(solve_lp_certified(&p).unwrap());
        assert!((x[0] - x[1] - 0.5).abs() < 1e-12);
        assert!((obj - 0.5).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds() {
        let p = lp(2, &[(&[-1.0, 1.0], -1.0), (&[1.0, -1.0], -1.0)], &[1.0, 1.0]);
        assert!(matches!(solve_lp_certified(&p).unwrap(), LpResult::Infeasible { .. }));
    }

    #[test]
    fn two_dimensional_l1() {
        // x = [d1+, d2+, d1-, d2-]; d1 + d2 >= 2; d1 <= 0.5
        let p = lp(
            4,
            &[(&[-1.0, -1.0, 1.0, 1.0], -2.0), (&[1.0, 0.0, -1.0, 0.0], 0.5)],
            &[1.0, 1.0, 1.0, 1.0],
        );
        let (x, obj) = optimum(solve_lp_certified(&p).unwrap());
        assert!((obj - 2.0).abs() < 1e-12);
        assert!(x[0] - x[2] <= 0.5 + 1e-12);
        assert!((x[0] - x[2] + x[1] - x[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_direction() {
        let p = lp(1, &[], &[-1.0]);
        assert_eq!(solve_lp(&p), LpResult::Unbounded);
    }

    #[test]
    fn rational_agrees_with_float() {
        let p = lp(
            3,
            &[(&[1.0, 2.0, -1.0], 4.0), (&[-1.0, -1.0, 0.0], -1.5), (&[0.0, 1.0, 1.0], 3.0), (&[1.0, 1.0, 0.0], 1.5)],
            &[2.0, 1.0, 0.5],
        );
        let (_, f) = optimum(solve_lp(&p));
        match solve_lp(&to_rational(&p).unwrap()) {
            LpResult::Optimal { objective, .. } => assert!((objective.to_f64_lossy() - f).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        match solve_lp(&LpProblem {
            n: p.n,
            rows: p.rows.iter().map(|(a, b)| (a.iter().map(|v| *v as f32).collect(), *b as f32)).collect(),
            objective: p.objective.iter().map(|v| *v as f32).collect(),
        }) {
            LpResult::Optimal { objective, .. } => assert!((objective as f64 - f).abs() < 1e-5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_cycle_prone_problem_terminates() {
        // Beale's example, which cycles under the textbook largest-coefficient rule.
        let p = lp(
            4,
            &[(&[0.25, -60.0, -0.04, 9.0], 0.0), (&[0.5, -90.0, -0.02, 3.0], 0.0), (&[0.0, 0.0, 1.0, 0.0], 1.0)],
            &[-0.75, 150.0, -0.02, 6.0],
        );
        let (_, obj) = optimum(solve_lp(&p));
        assert!((obj + 0.05).abs() < 1e-9, "{obj}");
    }
}

use nalgebra::{DMatrix, DVector};

use super::lad::LadProblem;
use crate::error::{Error, Result};

/// Basis changes allowed per unit of problem size before giving up.
const PIVOTS_PER_ROW: usize = 50;

#[derive(Debug, Clone)]
pub struct ConstrainedLpSolution {
    pub w: DVector<f64>,
    pub f: DVector<f64>,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// `min_{w,f} ||wᵀH − fᵀ⊗1ᵀ||_1` subject to `wᵀc = 1`, where the columns of
/// `H` (`k × n·p`) form `p` consecutive groups of `n` and `f_g` is subtracted
/// from every column of group `g`.
pub fn solve_constrained_l1_lp(
    h: &DMatrix<f64>,
    n: usize,
    p: usize,
    c: &DVector<f64>,
    tol: f64,
) -> Result<ConstrainedLpSolution> {
    let mut lp = FilterLp::new(h, n, p)?;
    lp.solve(c, tol, None).map(|(sol, _)| sol)
}

/// The filter LP for a fixed `H`, reusable across constraint directions.
#[derive(Debug, Clone)]
pub(crate) struct FilterLp {
    lad: LadProblem,
    k: usize,
    size: usize,
}

impl FilterLp {
    pub(crate) fn new(h: &DMatrix<f64>, n: usize, p: usize) -> Result<Self> {
        let k = h.nrows();
        if k == 0 || n == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!("need k, n, p >= 1 (got {k}, {n}, {p})")));
        }
        if h.ncols() != n * p {
            return Err(Error::Dimension(format!("H has {} columns, expected n·p = {}", h.ncols(), n * p)));
        }
        let m = n * p;
        let mut lad = LadProblem::with_capacity(k + p, m);
        let mut row = vec![0.0; k + p];
        for j in 0..m {
            row.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..k {
                row[r] = h[(r, j)];
            }
            row[k + j / n] = -1.0;
            lad.push_row(&row, 0.0, 1.0);
        }
        Ok(FilterLp { lad, k, size: m + k + p })
    }

    /// Solves for direction `c`, optionally starting from the basis of an
    /// earlier solve; returns the final basis alongside the solution.
    pub(crate) fn solve(
        &mut self,
        c: &DVector<f64>,
        tol: f64,
        warm: Option<&[usize]>,
    ) -> Result<(ConstrainedLpSolution, Vec<usize>)> {
        let k = self.k;
        if c.len() != k {
            return Err(Error::Dimension(format!("constraint direction has length {}, expected {k}", c.len())));
        }
        if c.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("constraint direction is zero".into()));
        }

        // the problem is homogeneous in c: solve for the unit direction, rescale after
        let scale = c.norm();
        let mut eq = vec![0.0; self.lad.dim()];
        for (e, v) in eq.iter_mut().zip(c.iter()) {
            *e = v / scale;
        }
        self.lad.clear_equalities();
        self.lad.push_equality(&eq, 1.0);

        let sol = self.lad.solve_from(PIVOTS_PER_ROW * self.size, warm)?;
        if !sol.optimal {
            return Err(Error::Lp(format!("pivot limit reached after {} basis changes", sol.pivots)));
        }
        let mut x = sol.x;
        // exact feasibility: rescale onto the constraint plane
        let s: f64 = x[..k].iter().zip(&eq).map(|(a, b)| a * b).sum();
        if !(s.abs() > 0.5) {
            return Err(Error::Lp(format!("constraint residual too large: wᵀc = {s}")));
        }
        x.iter_mut().for_each(|v| *v /= s);
        let objective = self.lad.objective_at(&x);
        let gap = (objective - sol.dual_objective).max(0.0);
        if gap > tol * (1.0 + objective.abs()) {
            return Err(Error::Lp(format!("duality gap {gap:.3e} exceeds tolerance at objective {objective:.6e}")));
        }
        x.iter_mut().for_each(|v| *v /= scale);
        let solution = ConstrainedLpSolution {
            w: DVector::from_column_slice(&x[..k]),
            f: DVector::from_column_slice(&x[k..]),
            objective: objective / scale,
            duality_gap: gap / scale,
            iterations: sol.pivots,
        };
        Ok((solution, sol.basis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use silt_testkit::{constrained_l1_lp, SplitMix};

    fn oracle(h: &DMatrix<f64>, n: usize, p: usize, c: &DVector<f64>, exhaustive: bool) -> f64 {
        let rows: Vec<Vec<f64>> = (0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect();
        let lp = constrained_l1_lp(&rows, n, p, c.as_slice());
        if exhaustive { lp.solve_by_vertices() } else { lp.solve_tableau() }.objective()
    }

    #[test]
    fn single_row_is_absorbed_by_mean() {
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let s = solve_constrained_l1_lp(&h, 2, 1, &DVector::from_element(1, 1.0), 1e-9).unwrap();
        assert!((s.w[0] - 1.0).abs() < 1e-12);
        assert!((s.f[0] - 1.0).abs() < 1e-12);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn replicated_identity_matches_vertex_enumeration() {
        let h = DMatrix::identity(2, 2);
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let s = solve_constrained_l1_lp(&h, 1, 2, &c, 1e-9).unwrap();
        assert!((s.w[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - oracle(&h, 1, 2, &c, true)).abs() < 1e-10);
        // with one column per group, f reproduces wᵀH exactly
        let wh = s.w.transpose() * &h;
        assert!((wh[0] - s.f[0]).abs() < 1e-12 && (wh[1] - s.f[1]).abs() < 1e-12);
    }

    #[test]
    fn random_three_by_six() {
        let mut rng = SplitMix(11);
        let h = DMatrix::from_fn(3, 6, |_, _| rng.uniform());
        let c = DVector::from_fn(3, |_, _| rng.uniform());
        let s = solve_constrained_l1_lp(&h, 3, 2, &c, 1e-9).unwrap();
        let o = oracle(&h, 3, 2, &c, false);
        assert!((s.objective - o).abs() < 1e-8, "{} vs {o}", s.objective);
    }

    #[test]
    fn matches_oracle_and_constraint_on_random_instances() {
        let mut rng = SplitMix(77);
        for case in 0..50 {
            let k = 1 + rng.below(5);
            let n = 1 + rng.below(5);
            let p = 1 + rng.below(4);
            let h = DMatrix::from_fn(k, n * p, |_, _| rng.uniform());
            let c = DVector::from_fn(k, |_, _| rng.uniform());
            let s = solve_constrained_l1_lp(&h, n, p, &c, 1e-9).unwrap();
            let o = oracle(&h, n, p, &c, false);
            assert!((s.objective - o).abs() <= 1e-6 * (1.0 + o.abs()), "case {case}: {} vs {o}", s.objective);
            assert!((s.w.dot(&c) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_zero_direction_and_bad_shapes() {
        let h = DMatrix::from_element(2, 4, 1.0);
        assert!(solve_constrained_l1_lp(&h, 2, 2, &DVector::zeros(2), 1e-6).is_err());
        assert!(solve_constrained_l1_lp(&h, 3, 2, &DVector::from_element(2, 1.0), 1e-6).is_err());
        assert!(solve_constrained_l1_lp(&h, 2, 2, &DVector::from_element(3, 1.0), 1e-6).is_err());
    }
}

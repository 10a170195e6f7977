use nalgebra::{DMatrix, DVector};

use super::lad::LadProblem;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 5000;

/// `min Σ λ_i ||z_i||_1 (+ λ_e ||e||_1)` subject to `q = Σ B_i z_i (+ e)`.
///
/// Blocks with weight zero are free (unpenalized, any sign).
#[derive(Debug, Clone)]
pub struct BlockProblem {
    pub target: DVector<f64>,
    pub blocks: Vec<(DMatrix<f64>, f64)>,
    /// Weight of an implicit identity block, if present.
    pub error_weight: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub coefficients: Vec<DVector<f64>>,
    /// The implicit identity block's coefficients (empty without one).
    pub error: DVector<f64>,
    pub objective: f64,
    /// `||q − Σ B_i z_i − e||_2`.
    pub residual: f64,
    /// Primal minus dual objective of the certificate.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BlockProblem {
    pub fn new(target: DVector<f64>) -> Self {
        BlockProblem { target, blocks: Vec::new(), error_weight: None }
    }

    pub fn block(mut self, matrix: DMatrix<f64>, weight: f64) -> Self {
        self.blocks.push((matrix, weight));
        self
    }

    pub fn with_error(mut self, weight: f64) -> Self {
        self.error_weight = Some(weight);
        self
    }

    fn validate(&self) -> Result<()> {
        let d = self.target.len();
        for (i, (b, w)) in self.blocks.iter().enumerate() {
            if b.nrows() != d {
                return Err(Error::Dimension(format!("block {i} has {} rows, target has {d}", b.nrows())));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidArgument(format!("block {i} weight {w} must be finite and >= 0")));
            }
        }
        if let Some(w) = self.error_weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("error weight {w} must be finite and >= 0")));
            }
        }
        if self.error_weight.is_none() && self.blocks.iter().all(|(_, w)| *w == 0.0) {
            return Err(Error::InvalidArgument("every block is free and there is no error block".into()));
        }
        if self.target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("target has non-finite entries".into()));
        }
        Ok(())
    }

    fn zero_solution(&self) -> BlockSolution {
        BlockSolution {
            coefficients: self.blocks.iter().map(|(b, _)| DVector::zeros(b.ncols())).collect(),
            error: DVector::zeros(if self.error_weight.is_some() { self.target.len() } else { 0 }),
            objective: 0.0,
            residual: 0.0,
            duality_gap: 0.0,
            iterations: 0,
            converged: true,
        }
    }
}

/// Solves a [`BlockProblem`] exactly (simplex on the dual) and certifies the
/// result: `converged` requires a duality gap of at most `tol·(1 + |obj|)`
/// and a residual of at most `tol·||q||_2`. `max_iter` caps basis changes.
pub fn solve_block_l1(problem: &BlockProblem, tol: f64, max_iter: usize) -> Result<BlockSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let qnorm = problem.target.norm();
    if qnorm == 0.0 {
        return Ok(problem.zero_solution());
    }

    let d = problem.target.len();
    let offsets: Vec<usize> = problem
        .blocks
        .iter()
        .scan(0, |acc, (b, _)| {
            let o = *acc;
            *acc += b.ncols();
            Some(o)
        })
        .collect();
    let nvar: usize = problem.blocks.iter().map(|(b, _)| b.ncols()).sum();

    // data row j as a contiguous coefficient vector
    let mut row = vec![0.0; nvar];
    let fill_row = |j: usize, row: &mut [f64]| {
        for ((b, _), &o) in problem.blocks.iter().zip(&offsets) {
            for c in 0..b.ncols() {
                row[o + c] = b[(j, c)];
            }
        }
    };

    let mut lad = LadProblem::with_capacity(nvar, d + nvar);
    match problem.error_weight {
        Some(we) => {
            for j in 0..d {
                fill_row(j, &mut row);
                lad.push_row(&row, problem.target[j], we);
            }
        }
        None => {
            for j in 0..d {
                fill_row(j, &mut row);
                lad.push_equality(&row, problem.target[j]);
            }
        }
    }
    for ((b, w), &o) in problem.blocks.iter().zip(&offsets) {
        for c in 0..b.ncols() {
            lad.push_unit_row(o + c, 0.0, *w);
        }
    }

    let sol = lad.solve(max_iter)?;
    let coefficients: Vec<DVector<f64>> = problem
        .blocks
        .iter()
        .zip(&offsets)
        .map(|((b, _), &o)| DVector::from_column_slice(&sol.x[o..o + b.ncols()]))
        .collect();

    let mut fitted = DVector::zeros(d);
    for ((b, _), z) in problem.blocks.iter().zip(&coefficients) {
        fitted += b * z;
    }
    let remainder = &problem.target - fitted;
    let (error, residual) = match problem.error_weight {
        Some(_) => (remainder, 0.0),
        None => (DVector::zeros(0), remainder.norm()),
    };
    let objective = sol.objective;
    let gap = sol.gap();
    let converged = sol.optimal && gap <= tol * (1.0 + objective.abs()) && residual <= tol * qnorm;
    if !converged {
        log::warn!(
            "block l1 solve not certified: optimal={} gap={gap:.3e} residual={residual:.3e} pivots={}",
            sol.optimal,
            sol.pivots
        );
    }
    Ok(BlockSolution { coefficients, error, objective, residual, duality_gap: gap, iterations: sol.pivots, converged })
}

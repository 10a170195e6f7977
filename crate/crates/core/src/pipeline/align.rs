use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{warp_into, warp_jacobian_into, Transform2D};
use crate::model::{FaceImage, GalleryEntry, GallerySet, IlluminationDictionary};
use crate::solvers::{solve_block_l1, BlockProblem, BlockSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Halvings tried before a Gauss-Newton step counts as failed.
const MAX_HALVINGS: usize = 8;
/// Doublings tried after an accepted full step.
const MAX_DOUBLINGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Weight of the error term against the illumination code.
    pub lambda: f64,
    /// Stop once an accepted parameter update is shorter than this.
    pub tol: f64,
    pub max_outer: usize,
    /// Certification tolerance of each ℓ1 subproblem.
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions { lambda: 1.0, tol: 1e-4, max_outer: 50, solver_tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

impl AlignOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) || !(self.solver_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-class alignment result. `x_hat`, `y_hat` and `residual_l1` are in the
/// query's intensity units: `b ∘ τ̂ ≈ a·x̂ + C·ŷ + e` with `||e||_1 = residual_l1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOutcome {
    pub class_id: i64,
    #[serde(rename = "tau")]
    pub tau_hat: Transform2D,
    pub x_hat: f64,
    pub y_hat: Vec<f64>,
    pub residual_l1: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting at the initial transform.
    #[serde(skip)]
    pub trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The verbatim success test: `| ||e||_1 − ||e0||_1 | ≤ 0.01 ||e0||_1`.
pub fn alignment_success(e_l1: f64, e0_l1: f64) -> bool {
    (e_l1 - e0_l1).abs() <= 0.01 * e0_l1
}

/// Unit-norm warped query on its valid gallery-frame pixels.
struct Linearization {
    rows: Vec<usize>,
    target: DVector<f64>,
    scale: f64,
    jacobian: Option<DMatrix<f64>>,
}

fn linearize(query: &FaceImage, tau: &Transform2D, w: usize, h: usize, with_jacobian: bool) -> Result<Linearization> {
    let warped = warp_into(query, tau, w, h);
    let rows: Vec<usize> = (0..w * h).filter(|&i| warped.valid[i]).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("transform maps the gallery frame outside the query".into()));
    }
    let px = warped.image.pixels();
    let mut target = DVector::from_iterator(rows.len(), rows.iter().map(|&i| px[i]));
    let scale = target.norm();
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("warped query is zero on its support".into()));
    }
    target /= scale;
    let jacobian = with_jacobian.then(|| {
        let full = warp_jacobian_into(query, tau, w, h);
        let mut jac = DMatrix::from_fn(rows.len(), full.ncols(), |r, c| full[(rows[r], c)] / scale);
        // derivative of b/||b||: drop the component along the normalized target
        let along = jac.transpose() * &target;
        jac -= &target * along.transpose();
        jac
    });
    Ok(Linearization { rows, target, scale, jacobian })
}

struct Subproblem<'a> {
    query: &'a FaceImage,
    gallery: &'a FaceImage,
    dict: &'a IlluminationDictionary,
    opts: &'a AlignOptions,
}

struct Evaluation {
    lin: Linearization,
    sol: BlockSolution,
}

impl Subproblem<'_> {
    /// `min ||y||_1 + λ||e||_1` s.t. `b̃ = a x + C y (− J Δ) + e` on the valid
    /// rows at `tau`; `Δ` enters only when `with_step`.
    fn solve(&self, tau: &Transform2D, with_step: bool) -> Result<Evaluation> {
        let (w, h) = (self.gallery.width(), self.gallery.height());
        let lin = linearize(self.query, tau, w, h, with_step)?;
        let rows = &lin.rows;
        let a = DMatrix::from_fn(rows.len(), 1, |r, _| self.gallery.pixels()[rows[r]]);
        let atoms = self.dict.atoms();
        let c = DMatrix::from_fn(rows.len(), atoms.ncols(), |r, j| atoms[(rows[r], j)]);
        let mut problem = BlockProblem::new(lin.target.clone()).block(a, 0.0).block(c, 1.0);
        if let Some(jac) = &lin.jacobian {
            problem = problem.block(-jac, 0.0);
        }
        let sol = solve_block_l1(&problem.with_error(self.opts.lambda), self.opts.solver_tol, self.opts.max_iter)?;
        Ok(Evaluation { lin, sol })
    }
}

/// Step length along `step`: halve from the full step until the exact
/// objective does not increase; when the full step already decreases it,
/// keep doubling while the decrease continues.
fn line_search(sub: &Subproblem, tau: &Transform2D, step: &[f64], f0: f64) -> Option<(Transform2D, Evaluation, f64)> {
    let try_factor = |factor: f64| -> Option<(Transform2D, Evaluation, f64)> {
        let delta: Vec<f64> = step.iter().map(|d| d * factor).collect();
        let candidate = tau.offset(&delta).ok()?;
        let eval = sub.solve(&candidate, false).ok()?;
        Some((candidate, eval, factor))
    };
    let mut factor = 1.0;
    for _ in 0..=MAX_HALVINGS {
        if let Some(best) = try_factor(factor).filter(|c| c.1.sol.objective <= f0) {
            let mut best = best;
            if factor == 1.0 {
                for _ in 0..MAX_DOUBLINGS {
                    match try_factor(best.2 * 2.0) {
                        Some(next) if next.1.sol.objective < best.1.sol.objective => best = next,
                        _ => break,
                    }
                }
            }
            return Some(best);
        }
        factor *= 0.5;
    }
    None
}

/// Gauss-Newton alignment of `query` to one gallery image, starting at
/// `init` (which maps gallery-frame positions into the query). Each step
/// solves the linearized ℓ1 problem, then halves the parameter update until
/// the exact objective at the new transform does not increase.
pub fn align_single(
    query: &FaceImage,
    entry: &GalleryEntry,
    dict: &IlluminationDictionary,
    init: &Transform2D,
    opts: &AlignOptions,
) -> Result<AlignmentOutcome> {
    opts.validate()?;
    let gallery = &entry.image;
    if (dict.width(), dict.height()) != (gallery.width(), gallery.height()) {
        return Err(Error::Dimension(format!(
            "dictionary is {}x{}, gallery image is {}x{}",
            dict.width(),
            dict.height(),
            gallery.width(),
            gallery.height()
        )));
    }
    let sub = Subproblem { query, gallery, dict, opts };

    let mut tau = init.clone();
    let mut current = sub.solve(&tau, false)?;
    let mut trace = vec![current.sol.objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_outer {
        iterations += 1;
        let linear = sub.solve(&tau, true)?;
        let step = linear.sol.coefficients[2].clone();
        let accepted = line_search(&sub, &tau, step.as_slice(), current.sol.objective);
        match accepted {
            Some((candidate, eval, factor)) => {
                tau = candidate;
                current = eval;
                trace.push(current.sol.objective);
                if factor * step.norm() < opts.tol {
                    converged = true;
                    break;
                }
            }
            None => {
                // no descent along the step; a vanishing step means a stationary point
                converged = step.norm() < opts.tol;
                break;
            }
        }
    }

    let s = current.lin.scale;
    Ok(AlignmentOutcome {
        class_id: entry.class_id,
        tau_hat: tau,
        x_hat: current.sol.coefficients[0][0] * s,
        y_hat: current.sol.coefficients[1].iter().map(|v| v * s).collect(),
        residual_l1: current.sol.error.lp_norm(1) * s,
        iterations,
        converged: converged && current.sol.converged,
        trace,
        error: None,
    })
}

/// Aligns the query to every gallery class independently. Results are sorted
/// by class id; a class whose alignment fails keeps its initial transform,
/// zero coefficients and the error message.
pub fn align_all(
    query: &FaceImage,
    gallery: &GallerySet,
    dict: &IlluminationDictionary,
    init: &Transform2D,
    opts: &AlignOptions,
) -> Result<Vec<AlignmentOutcome>> {
    opts.validate()?;
    let mut outcomes: Vec<AlignmentOutcome> = gallery
        .entries
        .par_iter()
        .map(|entry| {
            align_single(query, entry, dict, init, opts).unwrap_or_else(|e| AlignmentOutcome {
                class_id: entry.class_id,
                tau_hat: init.clone(),
                x_hat: 0.0,
                y_hat: vec![0.0; dict.atom_count()],
                residual_l1: warp_into(query, init, gallery.geometry.width, gallery.geometry.height)
                    .image
                    .pixels()
                    .iter()
                    .map(|v| v.abs())
                    .sum(),
                iterations: 0,
                converged: false,
                trace: Vec::new(),
                error: Some(e.to_string()),
            })
        })
        .collect();
    outcomes.sort_by_key(|o| o.class_id);
    Ok(outcomes)
}

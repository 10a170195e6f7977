use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::align::AlignmentOutcome;
use crate::error::{Error, Result};
use crate::geometry::{support_set_between, warp_into, SupportSet};
use crate::model::{GallerySet, IlluminationDictionary};
use crate::solvers::{solve_block_l1, BlockProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Fraction of `||x||_1` the winning coefficient must carry to count as confident.
pub const CONFIDENCE_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecognizeOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RecognizeOptions {
    fn default() -> Self {
        RecognizeOptions { lambda: 1.0, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Gallery columns after illumination compensation, warped into the query frame.
#[derive(Debug, Clone)]
pub struct TransferredGallery {
    /// `d_query × L`, column `i` for `class_ids[i]`; zero outside each column's own support.
    pub matrix: DMatrix<f64>,
    pub support: SupportSet,
    pub class_ids: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub predicted_class: i64,
    pub coefficients: Vec<f64>,
    /// Sparse error on the support pixels, in support order.
    #[serde(skip)]
    pub error: Vec<f64>,
    pub support_cardinality: usize,
    pub low_confidence: bool,
    /// False when the solver stopped before certifying optimality; the
    /// prediction is then best effort.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

/// Builds `(a_i x̂_i + C ŷ_i) ∘ τ_i⁻¹` for every class on a `query_w × query_h`
/// grid and the intersection of their supports.
pub fn transfer_gallery(
    outcomes: &[AlignmentOutcome],
    gallery: &GallerySet,
    dict: &IlluminationDictionary,
    query_w: usize,
    query_h: usize,
) -> Result<TransferredGallery> {
    let geom = gallery.geometry;
    if (dict.width(), dict.height()) != (geom.width, geom.height) {
        return Err(Error::Dimension("dictionary and gallery geometries differ".into()));
    }
    if outcomes.len() != gallery.len() {
        return Err(Error::InvalidArgument(format!(
            "{} alignment outcomes for {} gallery classes",
            outcomes.len(),
            gallery.len()
        )));
    }
    let mut columns = Vec::with_capacity(outcomes.len());
    let mut taus = Vec::with_capacity(outcomes.len());
    let mut class_ids = Vec::with_capacity(outcomes.len());
    for entry in &gallery.entries {
        let out = outcomes
            .iter()
            .find(|o| o.class_id == entry.class_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no alignment outcome for class {}", entry.class_id)))?;
        if out.y_hat.len() != dict.atom_count() {
            return Err(Error::Dimension(format!(
                "class {} has {} illumination codes, dictionary has {} atoms",
                out.class_id,
                out.y_hat.len(),
                dict.atom_count()
            )));
        }
        let compensated = entry.image.to_vector() * out.x_hat + dict.atoms() * DVector::from_column_slice(&out.y_hat);
        let image = crate::model::FaceImage::from_vector(geom.width, geom.height, &compensated)?;
        let warped = warp_into(&image, &out.tau_hat.inverse(), query_w, query_h);
        columns.push(warped.image.to_vector());
        taus.push(out.tau_hat.clone());
        class_ids.push(entry.class_id);
    }
    let support = support_set_between(&taus, query_w, query_h, geom.width, geom.height);
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(TransferredGallery { matrix: DMatrix::from_columns(&columns), support, class_ids })
}

/// `min ||x||_1 + λ||e||_1` s.t. `P_Ω(b) = P_Ω(Ã) x + e`, classified by the
/// largest `|x_i|`.
pub fn recognize(
    query: &DVector<f64>,
    gallery: &TransferredGallery,
    opts: &RecognizeOptions,
) -> Result<RecognitionResult> {
    if query.len() != gallery.matrix.nrows() {
        return Err(Error::Dimension(format!(
            "query has {} pixels, transferred gallery has {}",
            query.len(),
            gallery.matrix.nrows()
        )));
    }
    if gallery.support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let b = gallery.support.project_vector(query)?;
    let a = gallery.support.project_matrix(&gallery.matrix)?;
    solve_and_classify(b, a, &gallery.class_ids, opts)
}

/// Plain sparse-representation classification on an unwarped gallery with
/// any number of columns per class: `min ||x||_1 + λ||e||_1` s.t. `b = A x + e`,
/// each class scored by its largest `|x_j|`.
pub fn src_baseline(
    query: &DVector<f64>,
    a: &DMatrix<f64>,
    labels: &[i64],
    opts: &RecognizeOptions,
) -> Result<RecognitionResult> {
    if labels.len() != a.ncols() {
        return Err(Error::Dimension(format!("{} labels for {} columns", labels.len(), a.ncols())));
    }
    if query.len() != a.nrows() {
        return Err(Error::Dimension(format!("query has {} pixels, gallery has {}", query.len(), a.nrows())));
    }
    solve_and_classify(query.clone(), a.clone(), labels, opts)
}

fn solve_and_classify(
    b: DVector<f64>,
    a: DMatrix<f64>,
    labels: &[i64],
    opts: &RecognizeOptions,
) -> Result<RecognitionResult> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("gallery has no classes".into()));
    }
    if !(opts.lambda > 0.0 && opts.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", opts.lambda)));
    }
    let rows = b.len();
    let problem = BlockProblem::new(b).block(a, 1.0).with_error(opts.lambda);
    let sol = solve_block_l1(&problem, opts.tol, opts.max_iter)?;
    let x = &sol.coefficients[0];
    if !sol.converged {
        log::warn!("recognition solver stopped uncertified; prediction is best effort");
    }

    let mut best: Option<(f64, i64)> = None;
    for (j, &label) in labels.iter().enumerate() {
        let v = x[j].abs();
        best = match best {
            Some((bv, bl)) if bv > v || (bv == v && bl <= label) => Some((bv, bl)),
            _ => Some((v, label)),
        };
    }
    let (top, predicted_class) = best.expect("non-empty labels");
    let l1 = x.lp_norm(1);
    Ok(RecognitionResult {
        predicted_class,
        coefficients: x.iter().copied().collect(),
        error: sol.error.iter().copied().collect(),
        support_cardinality: rows,
        low_confidence: !(top >= CONFIDENCE_RATIO * l1) || l1 == 0.0,
        converged: sol.converged,
    })
}

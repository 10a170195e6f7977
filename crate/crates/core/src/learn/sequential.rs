use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_matrix, BasisFit};
use crate::error::{Error, Result};
use crate::model::{AuxiliarySet, IlluminationDictionary};
use crate::solvers::FilterLp;

/// Largest accepted condition number of the learned transform `W`.
pub const MAX_CONDITION: f64 = 1e12;
pub const DEFAULT_SPARSITY_THRESHOLD: f64 = 1e-6;

/// Which columns of `H` are tried as analysis filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateSet {
    #[default]
    All,
    /// `count` distinct columns drawn once with `seed`.
    Subsample { count: usize, seed: u64 },
}

impl CandidateSet {
    pub fn columns(&self, total: usize) -> Vec<usize> {
        match *self {
            CandidateSet::All => (0..total).collect(),
            CandidateSet::Subsample { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut cols = sample(&mut rng, total, count.min(total)).into_vec();
                cols.sort_unstable();
                cols
            }
        }
    }
}

impl fmt::Display for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateSet::All => f.write_str("all"),
            CandidateSet::Subsample { count, .. } => write!(f, "subsample:{count}"),
        }
    }
}

impl FromStr for CandidateSet {
    type Err = Error;

    /// `all` or `subsample:N`; the subsample seed is set separately.
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(CandidateSet::All);
        }
        if let Some(n) = s.strip_prefix("subsample:") {
            if let Ok(count) = n.parse::<usize>() {
                if count > 0 {
                    return Ok(CandidateSet::Subsample { count, seed: 0 });
                }
            }
        }
        Err(Error::InvalidArgument(format!("candidate columns must be `all` or `subsample:N` with N >= 1, got `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnOptions {
    /// Entries of a code row at or below this fraction of the row's largest
    /// magnitude count as zero.
    pub sparsity_threshold: f64,
    pub candidates: CandidateSet,
    /// Duality-gap tolerance for each filter LP.
    pub tol: f64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions { sparsity_threshold: DEFAULT_SPARSITY_THRESHOLD, candidates: CandidateSet::All, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDiagnostics {
    pub atom: usize,
    pub candidate: usize,
    pub cardinality: usize,
    pub lp_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnDiagnostics {
    pub atom_count: usize,
    pub subject_count: usize,
    pub per_subject: usize,
    pub candidate_columns: String,
    pub condition_number: f64,
    pub residual_frobenius: f64,
    pub atoms: Vec<AtomDiagnostics>,
    pub warnings: Vec<String>,
}

/// Full factorization `D = V ⊗ 1ᵀ + C S + E` with its intermediates.
#[derive(Debug, Clone)]
pub struct LearnResult {
    pub identity: DMatrix<f64>,
    pub dictionary: IlluminationDictionary,
    pub codes: DMatrix<f64>,
    pub residual: DMatrix<f64>,
    pub v_bar: DMatrix<f64>,
    pub c_bar: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub diagnostics: LearnDiagnostics,
}

impl LearnResult {
    /// `||D − (V ⊗ 1ᵀ + C S + E)||_F / ||D||_F`.
    pub fn reconstruction_error(&self, data: &DMatrix<f64>) -> f64 {
        let n = self.diagnostics.per_subject;
        let model = DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| self.identity[(r, c / n)])
            + self.dictionary.atoms() * &self.codes
            + &self.residual;
        (data - model).norm() / data.norm().max(f64::MIN_POSITIVE)
    }
}

pub fn learn_dictionary(aux: &AuxiliarySet, k: usize, options: &LearnOptions) -> Result<LearnResult> {
    let g = aux.geometry();
    learn_matrix(&aux.matrix(), aux.per_subject(), k, g.width, g.height, options)
}

/// [`learn_dictionary`] on a raw `d × np` matrix with `n` images per subject
/// and the given image geometry (`width · height = d`).
pub fn learn_matrix(
    data: &DMatrix<f64>,
    n: usize,
    k: usize,
    width: usize,
    height: usize,
    options: &LearnOptions,
) -> Result<LearnResult> {
    if width * height != data.nrows() {
        return Err(Error::Dimension(format!("{width}x{height} geometry for {} rows", data.nrows())));
    }
    if !(options.sparsity_threshold >= 0.0) {
        return Err(Error::InvalidArgument("sparsity threshold must be >= 0".into()));
    }
    let BasisFit { v_bar, c_bar, h, e, warnings, .. } = fit_matrix(data, n, k)?;
    let p = data.ncols() / n;
    let candidates = options.candidates.columns(h.ncols());
    // filters at roundoff level relative to the data carry no direction
    let noise = 1e-10 * data.column_iter().map(|c| c.norm()).fold(0.0, f64::max);

    let template = FilterLp::new(&h, n, p)?;
    // each candidate restarts from its own basis of the previous atom, so
    // results do not depend on scheduling
    let mut bases: Vec<Option<Vec<usize>>> = vec![None; h.ncols()];

    let mut w = DMatrix::zeros(k, k);
    let mut f = DMatrix::zeros(k, p);
    // orthonormal basis of the rows found so far
    let mut found: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut atoms = Vec::with_capacity(k);

    for i in 0..k {
        let mut directions: Vec<(usize, DVector<f64>)> = candidates
            .iter()
            .filter_map(|&j| {
                let r = h.column(j).into_owned();
                let c = complement(&found, &r);
                (r.norm() > noise && c.norm() > 1e-9 * r.norm()).then_some((j, c))
            })
            .collect();
        if directions.is_empty() {
            directions.push((usize::MAX, fallback_direction(&found, k)));
        }

        let solved: Vec<(Candidate, Option<Vec<usize>>)> = directions
            .par_iter()
            .map_init(
                || template.clone(),
                |lp, (j, c)| -> Result<(Candidate, Option<Vec<usize>>)> {
                    let warm = bases.get(*j).and_then(|b| b.as_deref());
                    let (sol, basis) = lp.solve(c, options.tol, warm)?;
                    let row = code_row(&h, &sol.w, &sol.f, n);
                    let candidate = Candidate {
                        index: *j,
                        cardinality: cardinality(&row, options.sparsity_threshold),
                        objective: sol.objective,
                        w: sol.w,
                        f: sol.f,
                    };
                    Ok((candidate, Some(basis)))
                },
            )
            .collect::<Result<_>>()?;
        let mut best: Option<Candidate> = None;
        for (candidate, basis) in solved {
            if let Some(slot) = bases.get_mut(candidate.index) {
                *slot = basis;
            }
            if best.as_ref().is_none_or(|b| candidate.beats(b)) {
                best = Some(candidate);
            }
        }
        let best = best.expect("at least one direction");

        w.set_row(i, &best.w.transpose());
        f.set_row(i, &best.f.transpose());
        let cond = condition_number(&w.rows(0, i + 1).into_owned());
        if !(cond <= MAX_CONDITION) {
            return Err(Error::SingularTransform { row: i, condition: cond });
        }
        let q = complement(&found, &complement(&found, &best.w));
        let qn = q.norm();
        found.push(q / qn);
        atoms.push(AtomDiagnostics {
            atom: i,
            candidate: best.index,
            cardinality: best.cardinality,
            lp_objective: best.objective,
        });
        log::debug!("atom {i}: candidate {} cardinality {}", best.index, best.cardinality);
    }

    let w_inv = w.clone().try_inverse().ok_or(Error::SingularTransform { row: k - 1, condition: f64::INFINITY })?;
    let c_star = &c_bar * &w_inv;
    let v_star = &v_bar + &c_star * &f;
    let codes = &w * &h - DMatrix::from_fn(k, h.ncols(), |r, c| f[(r, c / n)]);
    let condition = condition_number(&w);
    let dictionary = IlluminationDictionary::new(c_star, width, height)?;
    let diagnostics = LearnDiagnostics {
        atom_count: k,
        subject_count: p,
        per_subject: n,
        candidate_columns: options.candidates.to_string(),
        condition_number: condition,
        residual_frobenius: e.norm(),
        atoms,
        warnings,
    };
    Ok(LearnResult { identity: v_star, dictionary, codes, residual: e, v_bar, c_bar, h, w, f, diagnostics })
}

struct Candidate {
    index: usize,
    cardinality: usize,
    objective: f64,
    w: DVector<f64>,
    f: DVector<f64>,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        (self.cardinality, self.objective, self.index)
            .partial_cmp(&(other.cardinality, other.objective, other.index))
            .is_some_and(|o| o.is_lt())
    }
}

/// `wᵀH − fᵀ ⊗ 1ᵀ`.
fn code_row(h: &DMatrix<f64>, w: &DVector<f64>, f: &DVector<f64>, n: usize) -> DVector<f64> {
    DVector::from_fn(h.ncols(), |c, _| h.column(c).dot(w) - f[c / n])
}

pub(crate) fn cardinality(row: &DVector<f64>, relative_threshold: f64) -> usize {
    let cut = relative_threshold * row.amax();
    row.iter().filter(|v| v.abs() > cut).count()
}

/// Component of `r` orthogonal to the orthonormal vectors in `basis`.
fn complement(basis: &[DVector<f64>], r: &DVector<f64>) -> DVector<f64> {
    let mut v = r.clone();
    for q in basis {
        let proj = q.dot(&v);
        v.axpy(-proj, q, 1.0);
    }
    v
}

/// Unit coordinate direction with the largest part outside `basis`.
fn fallback_direction(basis: &[DVector<f64>], k: usize) -> DVector<f64> {
    (0..k)
        .map(|i| {
            let mut e = DVector::zeros(k);
            e[i] = 1.0;
            complement(basis, &e)
        })
        .fold(DVector::zeros(k), |best, c| if c.norm() > best.norm() + 1e-12 { c } else { best })
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

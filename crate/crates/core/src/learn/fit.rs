use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::AuxiliarySet;

/// Relative eigenvalue level below which a direction counts as numerically absent.
const RANK_TOL: f64 = 1e-10;
/// Eigenvalue floor relative to `||D||_F²`, covering roundoff in the centering.
const ROUNDOFF_FLOOR: f64 = 1e-24;

/// Closed-form stage of dictionary learning.
#[derive(Debug, Clone)]
pub struct BasisFit {
    /// `d × p` per-subject means.
    pub v_bar: DMatrix<f64>,
    /// `d × k` orthonormal basis, eigenvalues descending.
    pub c_bar: DMatrix<f64>,
    /// `k × np` coordinates `C̄ᵀU`.
    pub h: DMatrix<f64>,
    /// `d × np` residual `U − C̄H`.
    pub e: DMatrix<f64>,
    /// Top `k` eigenvalues of `UUᵀ`.
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Per-subject column means of `data` (`d × np`, subjects contiguous).
pub fn subject_means(data: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let p = data.ncols() / n;
    DMatrix::from_fn(data.nrows(), p, |r, s| data.view((r, s * n), (1, n)).sum() / n as f64)
}

/// `data − V ⊗ 1ᵀ` for `n` columns per subject.
pub fn center_by_subject(data: &DMatrix<f64>, means: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| data[(r, c)] - means[(r, c / n)])
}

pub fn fit_mean_and_basis(aux: &AuxiliarySet, k: usize) -> Result<BasisFit> {
    fit_matrix(&aux.matrix(), aux.per_subject(), k)
}

/// [`fit_mean_and_basis`] on a raw `d × np` matrix with `n` images per subject.
pub fn fit_matrix(data: &DMatrix<f64>, n: usize, k: usize) -> Result<BasisFit> {
    let (d, np) = data.shape();
    if n == 0 || np == 0 || np % n != 0 {
        return Err(Error::Dimension(format!("{np} columns do not split into subjects of {n}")));
    }
    if k == 0 || k > d.min(np) {
        return Err(Error::InvalidArgument(format!("atom count {k} must lie in 1..={}", d.min(np))));
    }
    let v_bar = subject_means(data, n);
    let u = center_by_subject(data, &v_bar, n);

    let mut warnings = Vec::new();
    let floor = ROUNDOFF_FLOOR * data.norm_squared();
    let (mut c_bar, eigenvalues) = if d <= np {
        let eig = SymmetricEigen::new(&u * u.transpose());
        let order = descending(&eig.eigenvalues);
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let basis = DMatrix::from_fn(d, k, |r, c| eig.eigenvectors[(r, order[c])]);
        (basis, vals)
    } else {
        // same nonzero spectrum through the np × np Gram matrix
        let eig = SymmetricEigen::new(u.transpose() * &u);
        let order = descending(&eig.eigenvalues);
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let top = vals.first().copied().unwrap_or(0.0);
        let mut basis = DMatrix::zeros(d, k);
        for c in 0..k {
            if vals[c] > (RANK_TOL * top).max(floor) {
                let v = eig.eigenvectors.column(order[c]);
                basis.set_column(c, &(&u * v / vals[c].sqrt()));
            }
        }
        (basis, vals)
    };

    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let rank = eigenvalues.iter().filter(|&&l| l > (RANK_TOL * top).max(floor)).count();
    if rank < k {
        warnings.push(format!(
            "centered data has numerical rank {rank} < k = {k}; trailing atoms span an arbitrary complement"
        ));
    } else if k < eigenvalues.len() {
        let (a, b) = (eigenvalues[k - 1], eigenvalues[k]);
        if (a - b).abs() <= 1e-8 * top.max(f64::MIN_POSITIVE) {
            warnings.push(format!("eigenvalues {a:.6e} and {b:.6e} tie at the cutoff; the basis is not unique"));
        }
    }
    orthonormalize(&mut c_bar);
    for c in 0..k {
        fix_sign(c_bar.column_mut(c).as_mut_slice());
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let h = c_bar.transpose() * &u;
    let e = &u - &c_bar * &h;
    Ok(BasisFit { v_bar, c_bar, h, e, eigenvalues: eigenvalues.into_iter().take(k).collect(), warnings })
}

fn descending(vals: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    order
}

/// Modified Gram-Schmidt with two passes; zero or dependent columns are
/// replaced by the unit vector least covered by the columns before them.
fn orthonormalize(m: &mut DMatrix<f64>) {
    let (d, k) = m.shape();
    for c in 0..k {
        let mut v = m.column(c).into_owned();
        for _ in 0..2 {
            for j in 0..c {
                let q = m.column(j);
                let proj = q.dot(&v);
                v.axpy(-proj, &q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            m.set_column(c, &(v / norm));
            continue;
        }
        let mut best = DVector::zeros(d);
        let mut best_norm = -1.0;
        for i in 0..d {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            for _ in 0..2 {
                for j in 0..c {
                    let q = m.column(j);
                    let proj = q.dot(&e);
                    e.axpy(-proj, &q, 1.0);
                }
            }
            let nn = e.norm();
            if nn > best_norm + 1e-12 {
                best_norm = nn;
                best = e;
            }
        }
        m.set_column(c, &(best / best_norm));
    }
}

/// Flips `v` so that its largest-magnitude entry is positive (first on ties).
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v.get(idx).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `min_{Π,Λ} ||Z_est Π Λ − Z_true||_F / ||Z_true||_F` over column
/// permutations `Π` and diagonal scalings `Λ`.
pub fn relative_error(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::Dimension(format!("estimate is {:?}, reference is {:?}", est.shape(), truth.shape())));
    }
    let k = truth.ncols();
    let total = truth.norm_squared();
    if k == 0 || total == 0.0 {
        return Err(Error::InvalidArgument("reference matrix has no energy".into()));
    }
    let mut cost = vec![0.0; k * k];
    for i in 0..k {
        let e = est.column(i);
        let ee = e.norm_squared();
        for j in 0..k {
            let z = truth.column(j);
            let s = if ee > 0.0 { e.dot(&z) / ee } else { 0.0 };
            cost[i * k + j] = e.iter().zip(z.iter()).map(|(a, b)| (s * a - b).powi(2)).sum();
        }
    }
    let assignment = min_cost_assignment(&cost, k);
    let sum: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * k + j]).sum();
    Ok((sum / total).sqrt())
}

/// Minimum-cost perfect matching on a square row-major cost matrix
/// (shortest augmenting paths with potentials). Returns the column for each row.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    // 1-based internals; index 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for c in 1..=n {
                if !used[c] {
                    let cur = cost[(r - 1) * n + (c - 1)] - u[r] - v[c];
                    if cur < minv[c] {
                        minv[c] = cur;
                        way[c] = col0;
                    }
                    if minv[c] < delta {
                        delta = minv[c];
                        col1 = c;
                    }
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for c in 1..=n {
        result[owner[c] - 1] = c - 1;
    }
    result
}

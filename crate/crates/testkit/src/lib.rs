//! Reference oracles for the test suites.
//!
//! Nothing in here shares code with `silt-core`: the LP oracle is a plain
//! two-phase tableau simplex with Bland's rule over the split-variable
//! standard form, and the small-instance checks enumerate vertices or
//! permutations exhaustively. Slow on purpose, but independent.

#![allow(clippy::needless_range_loop)] // dense index arithmetic reads better as loops

/// Standard-form LP: minimize `c·x` subject to `A x = b`, `x >= 0`.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn objective(&self) -> f64 {
        match self {
            LpOutcome::Optimal { objective, .. } => *objective,
            other => panic!("oracle LP did not reach an optimum: {other:?}"),
        }
    }
}

const EPS: f64 = 1e-10;

impl StandardLp {
    fn rows(&self) -> usize {
        self.b.len()
    }

    fn cols(&self) -> usize {
        self.c.len()
    }

    /// Two-phase tableau simplex, Bland's rule throughout.
    pub fn solve_tableau(&self) -> LpOutcome {
        let m = self.rows();
        let n = self.cols();
        // tableau columns: n structurals, m artificials, rhs
        let width = n + m + 1;
        let mut t = vec![vec![0.0; width]; m];
        for i in 0..m {
            let sign = if self.b[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                t[i][j] = sign * self.a[i][j];
            }
            t[i][n + i] = 1.0;
            t[i][width - 1] = sign * self.b[i];
        }
        let mut basis: Vec<usize> = (n..n + m).collect();

        // phase one: minimize sum of artificials
        let mut phase1 = vec![0.0; n + m];
        for v in phase1.iter_mut().skip(n) {
            *v = 1.0;
        }
        if !run_bland(&mut t, &mut basis, &phase1, n + m) {
            return LpOutcome::Unbounded;
        }
        let infeas: f64 = basis.iter().enumerate().filter(|(_, &bj)| bj >= n).map(|(i, _)| t[i][width - 1]).sum();
        let scale = 1.0 + self.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeas > 1e-8 * scale {
            return LpOutcome::Infeasible;
        }
        // drive remaining artificials out of the basis where possible
        for i in 0..m {
            if basis[i] >= n {
                if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                    pivot(&mut t, &mut basis, i, j);
                }
            }
        }
        // phase two: artificials may no longer enter
        let mut cost = self.c.clone();
        cost.extend(std::iter::repeat_n(f64::INFINITY, m));
        if !run_bland(&mut t, &mut basis, &cost, n) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; n];
        for (i, &bj) in basis.iter().enumerate() {
            if bj < n {
                x[bj] = t[i][width - 1];
            }
        }
        let objective = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { objective, x }
    }

    /// Exhaustive vertex enumeration; only sensible for a handful of columns.
    pub fn solve_by_vertices(&self) -> LpOutcome {
        let m = self.rows();
        let n = self.cols();
        assert!(n >= m, "vertex enumeration expects at least as many columns as rows");
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut subset: Vec<usize> = (0..m).collect();
        loop {
            if let Some(xb) = solve_square(&self.a, &self.b, &subset) {
                if xb.iter().all(|&v| v >= -1e-9) {
                    let mut x = vec![0.0; n];
                    for (k, &j) in subset.iter().enumerate() {
                        x[j] = xb[k].max(0.0);
                    }
                    let obj: f64 = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
                    if best.as_ref().is_none_or(|(bo, _)| obj < *bo) {
                        best = Some((obj, x));
                    }
                }
            }
            if !next_combination(&mut subset, n) {
                break;
            }
        }
        match best {
            Some((objective, x)) => LpOutcome::Optimal { objective, x },
            None => LpOutcome::Infeasible,
        }
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[row] = col;
}

/// Returns false on unboundedness. Columns with index >= `allowed` never enter.
fn run_bland(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> bool {
    let m = t.len();
    let rhs = t.first().map_or(0, |r| r.len() - 1);
    loop {
        let mut entering = None;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let mut reduced = cost[j];
            for i in 0..m {
                let cb = cost[basis[i]];
                if cb.is_finite() {
                    reduced -= cb * t[i][j];
                }
            }
            if reduced < -EPS {
                entering = Some(j);
                break;
            }
        }
        let Some(q) = entering else { return true };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][q] > 1e-12 {
                let ratio = t[i][rhs] / t[i][q];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else { return false };
        pivot(t, basis, r, q);
    }
}

fn solve_square(a: &[Vec<f64>], b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let m = b.len();
    let mut mat: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = cols.iter().map(|&j| a[i][j]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs()))?;
        if mat[piv][col].abs() < 1e-11 {
            return None;
        }
        mat.swap(col, piv);
        for i in 0..m {
            if i != col {
                let f = mat[i][col] / mat[col][col];
                for j in col..=m {
                    mat[i][j] -= f * mat[col][j];
                }
            }
        }
    }
    Some((0..m).map(|i| mat[i][m] / mat[i][i]).collect())
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Split-variable LP for `min Σ λ_i ||z_i||_1 (+ λ_e ||e||_1)` s.t. `q = Σ B_i z_i (+ e)`.
///
/// `blocks[i]` is row-major `d × m_i`. Every coefficient becomes a pair of
/// nonnegative variables; a zero weight leaves the pair free of cost.
pub fn block_l1_lp(blocks: &[(Vec<Vec<f64>>, f64)], error_weight: Option<f64>, q: &[f64]) -> StandardLp {
    let d = q.len();
    let mut cols: Vec<(Vec<f64>, f64)> = Vec::new();
    for (mat, w) in blocks {
        let m = mat.first().map_or(0, |r| r.len());
        for j in 0..m {
            let col: Vec<f64> = (0..d).map(|i| mat[i][j]).collect();
            cols.push((col.clone(), *w));
            cols.push((col.iter().map(|v| -v).collect(), *w));
        }
    }
    if let Some(w) = error_weight {
        for j in 0..d {
            let mut col = vec![0.0; d];
            col[j] = 1.0;
            cols.push((col.clone(), w));
            col[j] = -1.0;
            cols.push((col, w));
        }
    }
    let a = (0..d).map(|i| cols.iter().map(|(c, _)| c[i]).collect()).collect();
    StandardLp { a, b: q.to_vec(), c: cols.iter().map(|(_, w)| *w).collect() }
}

/// Split-variable LP for `min ||wᵀH − fᵀ⊗1ᵀ||_1` s.t. `wᵀc = 1`, with `H`
/// row-major `k × (n·p)` and columns grouped into `p` runs of `n`.
pub fn constrained_l1_lp(h: &[Vec<f64>], n: usize, p: usize, c: &[f64]) -> StandardLp {
    let k = h.len();
    let m = n * p;
    // variables: w+ (k), w- (k), f+ (p), f- (p), t+ (m), t- (m)
    let nv = 2 * k + 2 * p + 2 * m;
    let mut a = Vec::with_capacity(m + 1);
    let mut b = Vec::with_capacity(m + 1);
    for j in 0..m {
        let mut row = vec![0.0; nv];
        for r in 0..k {
            row[r] = h[r][j];
            row[k + r] = -h[r][j];
        }
        let g = j / n;
        row[2 * k + g] = -1.0;
        row[2 * k + p + g] = 1.0;
        row[2 * k + 2 * p + j] = -1.0;
        row[2 * k + 2 * p + m + j] = 1.0;
        a.push(row);
        b.push(0.0);
    }
    let mut row = vec![0.0; nv];
    for r in 0..k {
        row[r] = c[r];
        row[k + r] = -c[r];
    }
    a.push(row);
    b.push(1.0);
    let mut cost = vec![0.0; nv];
    for v in cost.iter_mut().skip(2 * k + 2 * p) {
        *v = 1.0;
    }
    StandardLp { a, b, c: cost }
}

/// Brute-force `min_{Π,Λ} ||Z_est Π Λ − Z||_F / ||Z||_F` over every column
/// permutation, with the closed-form least-squares scale per column pair.
/// Matrices are column lists.
pub fn relative_error_brute(est: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let k = truth.len();
    assert_eq!(est.len(), k);
    let total: f64 = truth.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    loop {
        let mut sum = 0.0;
        for (j, &i) in perm.iter().enumerate() {
            let e = &est[i];
            let z = &truth[j];
            let ee: f64 = e.iter().map(|v| v * v).sum();
            let ez: f64 = e.iter().zip(z).map(|(a, b)| a * b).sum();
            let s = if ee > 0.0 { ez / ee } else { 0.0 };
            sum += e.iter().zip(z).map(|(a, b)| (s * a - b).powi(2)).sum::<f64>();
        }
        best = best.min(sum);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    (best / total).sqrt()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Small deterministic generator so oracle-side fixtures need no RNG crate.
#[derive(Debug, Clone)]
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

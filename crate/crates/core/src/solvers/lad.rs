//! Exact weighted least-absolute-deviations with linear equality constraints:
//!
//! ```text
//! minimize   Σ_j w_j |b_j − a_jᵀ x|      subject to   E x = e,   x ∈ Rⁿ
//! ```
//!
//! Solved through its dual, which has only `n` equality rows:
//!
//! ```text
//! maximize   bᵀu + eᵀν   subject to   Aᵀu + Eᵀν = 0,   −w ≤ u ≤ w,   ν free
//! ```
//!
//! with a dual simplex method. For any basis the simplex multipliers are a
//! candidate `x` and the reduced cost of `u_j` is the residual of row `j`;
//! putting every nonbasic `u_j` at the bound matching its residual's sign
//! makes the basis dual feasible. Iterations then remove bound violations
//! of the basic variables, using a bound-flipping ratio test that crosses as
//! many residual sign changes per step as still improve the objective.
//! Artificial columns (fixed at zero) fill the initial basis.

#![allow(clippy::needless_range_loop)] // dense index arithmetic reads better as loops

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Primal feasibility tolerance, relative to the largest weight.
const FEAS_TOL: f64 = 1e-9;
/// Pivot tolerance relative to the largest entry of the pivot row.
const PIVOT_REL: f64 = 1e-9;
/// Basis changes between fresh inversions.
const REFACTOR_EVERY: usize = 50;
/// Relative pivot size below which a basis counts as singular.
const SINGULAR: f64 = 1e-13;
/// Stricter level for bases supplied by the caller.
const INSTALL_SINGULAR: f64 = 1e-9;
/// Reduced-cost tolerance relative to the magnitude of the terms.
const DUAL_TOL: f64 = 1e-11;
/// Successive cost perturbation sizes, relative to the largest target.
const PERTURBATION: [f64; 1] = [1e-9];

#[derive(Debug, Clone)]
pub struct LadProblem {
    n: usize,
    rows: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
    eq: Vec<f64>,
    eq_rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LadSolution {
    pub x: Vec<f64>,
    /// `Σ w_j |b_j − a_jᵀ x|` at the returned `x`.
    pub objective: f64,
    /// Dual objective of the final iterate (bounds enforced).
    pub dual_objective: f64,
    /// Largest `|E x − e|` entry.
    pub eq_residual: f64,
    pub pivots: usize,
    pub optimal: bool,
    /// Final basis, usable as a warm start for a problem with the same
    /// row and equality counts.
    pub basis: Vec<usize>,
}

impl LadSolution {
    pub fn gap(&self) -> f64 {
        (self.objective - self.dual_objective).max(0.0)
    }
}

impl LadProblem {
    pub fn new(n: usize) -> Self {
        LadProblem { n, rows: Vec::new(), b: Vec::new(), w: Vec::new(), eq: Vec::new(), eq_rhs: Vec::new() }
    }

    pub fn with_capacity(n: usize, rows: usize) -> Self {
        LadProblem {
            n,
            rows: Vec::with_capacity(rows * n),
            b: Vec::with_capacity(rows),
            w: Vec::with_capacity(rows),
            eq: Vec::new(),
            eq_rhs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row_count(&self) -> usize {
        self.b.len()
    }

    /// Adds the term `weight · |target − coeffsᵀ x|`. Zero weights are dropped.
    pub fn push_row(&mut self, coeffs: &[f64], target: f64, weight: f64) {
        debug_assert_eq!(coeffs.len(), self.n);
        debug_assert!(weight >= 0.0);
        if weight > 0.0 {
            self.rows.extend_from_slice(coeffs);
            self.b.push(target);
            self.w.push(weight);
        }
    }

    /// Adds the term `weight · |target − x_index|`.
    pub fn push_unit_row(&mut self, index: usize, target: f64, weight: f64) {
        if weight > 0.0 {
            let start = self.rows.len();
            self.rows.resize(start + self.n, 0.0);
            self.rows[start + index] = 1.0;
            self.b.push(target);
            self.w.push(weight);
        }
    }

    /// Adds the constraint `coeffsᵀ x = rhs`.
    pub fn push_equality(&mut self, coeffs: &[f64], rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n);
        self.eq.extend_from_slice(coeffs);
        self.eq_rhs.push(rhs);
    }

    /// Drops all equality constraints, keeping the rows.
    pub fn clear_equalities(&mut self) {
        self.eq.clear();
        self.eq_rhs.clear();
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let n = self.n;
        (0..self.b.len()).map(|j| self.w[j] * (self.b[j] - dot(&self.rows[j * n..(j + 1) * n], x)).abs()).sum()
    }

    pub fn eq_residual_at(&self, x: &[f64]) -> f64 {
        let n = self.n;
        (0..self.eq_rhs.len())
            .map(|i| (dot(&self.eq[i * n..(i + 1) * n], x) - self.eq_rhs[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn solve(&self, max_pivots: usize) -> Result<LadSolution> {
        self.solve_from(max_pivots, None)
    }

    /// Like [`solve`](Self::solve), starting from `basis` when it is a
    /// nonsingular basis of this problem.
    pub fn solve_from(&self, max_pivots: usize, basis: Option<&[usize]>) -> Result<LadSolution> {
        if self.n == 0 {
            let eq_residual = self.eq_rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if eq_residual > 0.0 {
                return Err(Error::Lp("equality constraints are inconsistent".into()));
            }
            let obj = self.objective_at(&[]);
            return Ok(LadSolution {
                x: Vec::new(),
                objective: obj,
                dual_objective: obj,
                eq_residual,
                pivots: 0,
                optimal: true,
                basis: Vec::new(),
            });
        }
        if let Some(b) = basis {
            // a hint whose result misses the equalities is discarded
            let eq_tol = 1e-9 * (1.0 + self.eq_rhs.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            if let Ok(sol) = self.run_engine(max_pivots, Some(b)) {
                if !sol.optimal || sol.eq_residual <= eq_tol {
                    return Ok(sol);
                }
            }
        }
        self.run_engine(max_pivots, None)
    }

    fn run_engine(&self, max_pivots: usize, basis: Option<&[usize]>) -> Result<LadSolution> {
        let mut engine = DualSimplex::new(self);
        let warm = basis.is_some_and(|b| engine.install(b));
        if !warm {
            engine.cold_start();
        }
        engine.check_equalities()?;
        // Perturbed costs break the ties that make plain iterations stall on
        // these highly degenerate problems. Restoring the exact costs keeps
        // the basic values, so the final point stays dual feasible and its
        // objective still bounds the optimum; any leftover is in the gap.
        let mut optimal = true;
        for level in PERTURBATION {
            engine.perturb(level);
            engine.refresh(true);
            optimal = engine.run(max_pivots)?;
            if !optimal {
                break;
            }
        }
        engine.perturb(0.0);
        let x = engine.multipliers();
        Ok(LadSolution {
            objective: self.objective_at(&x),
            dual_objective: engine.dual_objective(),
            eq_residual: self.eq_residual_at(&x),
            x,
            pivots: engine.pivots,
            optimal,
            basis: engine.basis.clone(),
        })
    }
}

#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Basic(usize),
    Nonbasic,
}

struct Breakpoint {
    t: f64,
    var: usize,
    alpha: f64,
}

enum Column<'a> {
    Dense(&'a [f64]),
    Unit(usize),
}

struct DualSimplex<'a> {
    p: &'a LadProblem,
    n: usize,
    m: usize,
    q: usize,
    basis: Vec<usize>,
    slot: Vec<Slot>,
    /// values of nonbasic variables (stale for basic ones)
    value: Vec<f64>,
    /// basic values by basis position
    xb: Vec<f64>,
    /// reduced costs (zero for basic variables)
    d: Vec<f64>,
    /// dense row-major basis inverse
    binv: Vec<f64>,
    feas_tol: f64,
    pivots: usize,
    since_refactor: usize,
    /// cost perturbation of the row multipliers
    shift: Vec<f64>,
}

impl<'a> DualSimplex<'a> {
    fn new(p: &'a LadProblem) -> Self {
        let n = p.n;
        let m = p.b.len();
        let q = p.eq_rhs.len();
        let total = m + q + n;
        let wmax = p.w.iter().copied().fold(0.0f64, f64::max);
        DualSimplex {
            p,
            n,
            m,
            q,
            basis: Vec::new(),
            slot: vec![Slot::Nonbasic; total],
            value: vec![0.0; total],
            xb: vec![0.0; n],
            d: vec![0.0; total],
            binv: Vec::new(),
            feas_tol: FEAS_TOL * (1.0 + wmax),
            pivots: 0,
            since_refactor: 0,
            shift: Vec::new(),
        }
    }

    fn total(&self) -> usize {
        self.m + self.q + self.n
    }

    fn bounds(&self, j: usize) -> (f64, f64) {
        if j < self.m {
            (-self.p.w[j], self.p.w[j])
        } else if j < self.m + self.q {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (0.0, 0.0)
        }
    }

    fn perturb(&mut self, level: f64) {
        self.shift.clear();
        if level > 0.0 {
            let bmax = self.p.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ self.m as u64;
            self.shift = (0..self.m)
                .map(|_| {
                    state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
                    let mut z = state;
                    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
                    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
                    z ^= z >> 31;
                    let unit = (z >> 11) as f64 / (1u64 << 53) as f64;
                    level * (1.0 + bmax) * (2.0 * unit - 1.0)
                })
                .collect();
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.m {
            self.p.b[j] + self.shift.get(j).copied().unwrap_or(0.0)
        } else if j < self.m + self.q {
            self.p.eq_rhs[j - self.m]
        } else {
            0.0
        }
    }

    fn column(&self, j: usize) -> Column<'_> {
        let n = self.n;
        if j < self.m {
            Column::Dense(&self.p.rows[j * n..(j + 1) * n])
        } else if j < self.m + self.q {
            let i = j - self.m;
            Column::Dense(&self.p.eq[i * n..(i + 1) * n])
        } else {
            Column::Unit(j - self.m - self.q)
        }
    }

    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        match self.column(j) {
            Column::Dense(c) => dot(c, v),
            Column::Unit(r) => v[r],
        }
    }

    fn col_abs_dot(&self, j: usize, v: &[f64]) -> f64 {
        match self.column(j) {
            Column::Dense(c) => c.iter().zip(v).map(|(a, b)| (a * b).abs()).sum(),
            Column::Unit(r) => v[r].abs(),
        }
    }

    fn col_axpy(&self, j: usize, scale: f64, out: &mut [f64]) {
        match self.column(j) {
            Column::Dense(c) => {
                for (o, v) in out.iter_mut().zip(c) {
                    *o += scale * v;
                }
            }
            Column::Unit(r) => out[r] += scale,
        }
    }

    fn set_basis(&mut self, basis: Vec<usize>) {
        self.slot.iter_mut().for_each(|s| *s = Slot::Nonbasic);
        for (pos, &v) in basis.iter().enumerate() {
            self.slot[v] = Slot::Basic(pos);
        }
        self.basis = basis;
    }

    /// Artificial basis, then every equality multiplier swapped in.
    fn cold_start(&mut self) {
        let (n, m, q) = (self.n, self.m, self.q);
        self.set_basis((m + q..m + q + n).collect());
        self.binv = identity(n);
        let mut alpha = vec![0.0; n];
        for i in 0..q {
            let var = m + i;
            self.ftran(var, &mut alpha);
            let mut best = None;
            let mut best_abs = 1e-9;
            for pos in 0..n {
                if self.basis[pos] >= m + q && alpha[pos].abs() > best_abs {
                    best_abs = alpha[pos].abs();
                    best = Some(pos);
                }
            }
            if let Some(pos) = best {
                self.replace(pos, var, &alpha);
            }
        }
    }

    /// Installs a caller-provided basis; false when it does not fit.
    fn install(&mut self, basis: &[usize]) -> bool {
        let total = self.total();
        if basis.len() != self.n || basis.iter().any(|&v| v >= total) {
            return false;
        }
        let mut seen = vec![false; total];
        for &v in basis {
            if std::mem::replace(&mut seen[v], true) {
                return false;
            }
        }
        // every equality multiplier must be basic
        if (self.m..self.m + self.q).any(|v| !seen[v]) {
            return false;
        }
        self.set_basis(basis.to_vec());
        match invert(&self.basis_matrix(), self.n, INSTALL_SINGULAR) {
            Some(inv) => {
                self.binv = inv;
                true
            }
            None => false,
        }
    }

    fn basis_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut bmat = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for (pos, &v) in self.basis.iter().enumerate() {
            col.iter_mut().for_each(|c| *c = 0.0);
            self.col_axpy(v, 1.0, &mut col);
            for i in 0..n {
                bmat[i * n + pos] = col[i];
            }
        }
        bmat
    }

    /// `α = B⁻¹ a_j`.
    fn ftran(&self, j: usize, out: &mut [f64]) {
        let n = self.n;
        match self.column(j) {
            Column::Dense(c) => {
                for i in 0..n {
                    out[i] = dot(&self.binv[i * n..(i + 1) * n], c);
                }
            }
            Column::Unit(r) => {
                for i in 0..n {
                    out[i] = self.binv[i * n + r];
                }
            }
        }
    }

    /// Basis change at `pos` without touching values.
    fn replace(&mut self, pos: usize, enter: usize, alpha: &[f64]) {
        let n = self.n;
        let leave = self.basis[pos];
        self.slot[leave] = Slot::Nonbasic;
        self.slot[enter] = Slot::Basic(pos);
        self.basis[pos] = enter;
        let ap = alpha[pos];
        let (head, rest) = self.binv.split_at_mut(pos * n);
        let (prow, tail) = rest.split_at_mut(n);
        for v in prow.iter_mut() {
            *v /= ap;
        }
        for (i, row) in head.chunks_exact_mut(n).chain(tail.chunks_exact_mut(n)).enumerate() {
            let idx = if i < pos { i } else { i + 1 };
            let f = alpha[idx];
            if f != 0.0 {
                for (r, pv) in row.iter_mut().zip(prow.iter()) {
                    *r -= f * pv;
                }
            }
        }
    }

    /// `πᵀ = c_Bᵀ B⁻¹`.
    fn prices(&self) -> Vec<f64> {
        let n = self.n;
        let mut pi = vec![0.0; n];
        for (i, &bv) in self.basis.iter().enumerate() {
            let c = self.cost(bv);
            if c != 0.0 {
                for (p, r) in pi.iter_mut().zip(&self.binv[i * n..(i + 1) * n]) {
                    *p += c * r;
                }
            }
        }
        pi
    }

    /// Reduced costs from scratch and basic values recomputed. With `flip`,
    /// nonbasic boxed variables move to the bound their reduced cost asks for.
    fn refresh(&mut self, flip: bool) {
        let pi = self.prices();
        for j in 0..self.total() {
            if self.slot[j] != Slot::Nonbasic {
                self.d[j] = 0.0;
                continue;
            }
            self.d[j] = self.cost(j) - self.col_dot(j, &pi);
            if j < self.m {
                // a wrong sign at roundoff level is degenerate, not infeasible
                let slack = DUAL_TOL * (1.0 + self.cost(j).abs() + self.col_abs_dot(j, &pi));
                let keep = (!flip && self.value[j] != 0.0)
                    || (self.value[j] > 0.0 && self.d[j] >= -slack)
                    || (self.value[j] < 0.0 && self.d[j] <= slack);
                if !keep {
                    self.value[j] = if self.d[j] >= 0.0 { self.p.w[j] } else { -self.p.w[j] };
                }
            } else {
                self.value[j] = 0.0;
            }
        }
        self.recompute_basic_values();
    }

    /// `x_B = −B⁻¹ N x_N`.
    fn recompute_basic_values(&mut self) {
        let n = self.n;
        let mut rhs = vec![0.0; n];
        for j in 0..self.total() {
            if self.slot[j] == Slot::Nonbasic && self.value[j] != 0.0 {
                self.col_axpy(j, -self.value[j], &mut rhs);
            }
        }
        for i in 0..n {
            self.xb[i] = dot(&self.binv[i * n..(i + 1) * n], &rhs);
        }
    }

    fn refactor(&mut self) {
        if let Some(inv) = invert(&self.basis_matrix(), self.n, SINGULAR) {
            self.binv = inv;
        }
        self.since_refactor = 0;
        self.refresh(true);
    }

    /// Nonbasic equality multipliers must price out; otherwise the
    /// equalities admit no solution.
    fn check_equalities(&self) -> Result<()> {
        let scale = 1.0 + self.p.eq_rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let pi = self.prices();
        for j in self.m..self.m + self.q {
            if self.slot[j] == Slot::Nonbasic && (self.cost(j) - self.col_dot(j, &pi)).abs() > 1e-9 * scale {
                return Err(Error::Lp("equality constraints are inconsistent".into()));
            }
        }
        Ok(())
    }

    /// Leaving position by dual steepest edge (largest violation² / ||ρ_p||²).
    fn choose_leaving(&self) -> Option<(usize, f64)> {
        let n = self.n;
        let mut best = None;
        let mut best_score = 0.0;
        for pos in 0..n {
            let (lo, hi) = self.bounds(self.basis[pos]);
            let x = self.xb[pos];
            let viol = if x < lo - self.feas_tol {
                lo - x
            } else if x > hi + self.feas_tol {
                x - hi
            } else {
                continue;
            };
            let weight = self.binv[pos * n..(pos + 1) * n].iter().map(|v| v * v).sum::<f64>();
            let score = viol * viol / weight.max(f64::MIN_POSITIVE);
            if score > best_score {
                best_score = score;
                best = Some((pos, if x < lo { 1.0 } else { -1.0 }));
            }
        }
        best
    }

    fn run(&mut self, max_pivots: usize) -> Result<bool> {
        let n = self.n;
        let structural = self.m + self.q;
        let mut alpha_row = vec![0.0; structural];
        let mut alpha_col = vec![0.0; n];
        let mut breakpoints: Vec<Breakpoint> = Vec::new();
        let mut crossed: Vec<usize> = Vec::new();
        let mut delta_x = vec![0.0; n];
        let mut failed_rows = 0usize;

        loop {
            let Some((pos, s)) = self.choose_leaving() else {
                return Ok(true);
            };
            if self.pivots >= max_pivots {
                return Ok(false);
            }
            let leave = self.basis[pos];
            let (lo, hi) = self.bounds(leave);
            let target = if s > 0.0 { lo } else { hi };
            let mut slope = (self.xb[pos] - target).abs();

            // pivot row ᾱ_j = s · ρ_p · a_j over nonbasic, non-fixed columns
            let rho: Vec<f64> = self.binv[pos * n..(pos + 1) * n].to_vec();
            let mut amax = 0.0f64;
            for j in 0..structural {
                alpha_row[j] = if self.slot[j] == Slot::Nonbasic { s * self.col_dot(j, &rho) } else { 0.0 };
                amax = amax.max(alpha_row[j].abs());
            }
            let piv_tol = PIVOT_REL * amax.max(f64::MIN_POSITIVE);

            breakpoints.clear();
            for j in 0..structural {
                let a = alpha_row[j];
                if self.slot[j] != Slot::Nonbasic || a.abs() <= piv_tol {
                    continue;
                }
                let binding = if j >= self.m {
                    true
                } else if self.value[j] > 0.0 {
                    a > 0.0
                } else {
                    a < 0.0
                };
                if binding {
                    breakpoints.push(Breakpoint { t: (self.d[j] / a).max(0.0), var: j, alpha: a });
                }
            }
            if breakpoints.is_empty() {
                // no entering column; rebuild once before giving up
                failed_rows += 1;
                if failed_rows > 2 {
                    return Err(Error::Lp("dual simplex found no entering column (numerical breakdown)".into()));
                }
                self.refactor();
                continue;
            }
            // visit breakpoints in order of t, passing them while the
            // objective keeps improving
            let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> =
                breakpoints.iter().enumerate().map(|(i, bp)| Reverse((bp.t.to_bits(), bp.var, i))).collect();
            crossed.clear();
            let chosen = loop {
                let Reverse((_, _, i)) = heap.pop().expect("nonempty");
                let bp = &breakpoints[i];
                let range = if bp.var < self.m { 2.0 * self.p.w[bp.var] } else { f64::INFINITY };
                let next = slope - bp.alpha.abs() * range;
                if next > 0.0 && !heap.is_empty() {
                    slope = next;
                    crossed.push(i);
                } else {
                    break i;
                }
            };
            // among near-ties at the chosen step prefer the largest pivot
            let t_star = breakpoints[chosen].t;
            let tie = 1e-12 * (1.0 + t_star);
            let mut pick = chosen;
            while let Some(Reverse((bits, _, i))) = heap.pop() {
                if f64::from_bits(bits) > t_star + tie {
                    break;
                }
                if breakpoints[i].alpha.abs() > breakpoints[pick].alpha.abs() {
                    pick = i;
                }
            }
            let enter = breakpoints[pick].var;
            let t = breakpoints[pick].t;

            // reduced costs move along the pivot row
            for j in 0..structural {
                if self.slot[j] == Slot::Nonbasic {
                    self.d[j] -= t * alpha_row[j];
                }
            }
            self.d[enter] = 0.0;
            self.d[leave] = -s * t;

            // bound flips of the crossed breakpoints
            delta_x.iter_mut().for_each(|v| *v = 0.0);
            let mut flipped = false;
            for &i in &crossed {
                let j = breakpoints[i].var;
                let new = -self.value[j];
                let step = new - self.value[j];
                self.value[j] = new;
                self.col_axpy(j, step, &mut delta_x);
                flipped = true;
            }
            if flipped {
                for i in 0..n {
                    self.xb[i] -= dot(&self.binv[i * n..(i + 1) * n], &delta_x);
                }
            }

            // primal step bringing the leaving variable to its bound
            self.ftran(enter, &mut alpha_col);
            let step = (self.xb[pos] - target) / alpha_col[pos];
            for (x, a) in self.xb.iter_mut().zip(&alpha_col) {
                *x -= step * a;
            }
            let entering_value = self.value[enter] + step;
            self.replace(pos, enter, &alpha_col);
            self.value[leave] = target;
            self.xb[pos] = entering_value;

            self.pivots += 1;
            self.since_refactor += 1;
            failed_rows = 0;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
        }
    }

    /// Simplex multipliers after a fresh inversion plus two refinement steps
    /// on `Bᵀπ = c_B`.
    fn multipliers(&self) -> Vec<f64> {
        let n = self.n;
        let mut pi = self.prices();
        for _ in 0..2 {
            let r: Vec<f64> = self.basis.iter().map(|&v| self.cost(v) - self.col_dot(v, &pi)).collect();
            for (pos, rv) in r.iter().enumerate() {
                if *rv != 0.0 {
                    for (p, b) in pi.iter_mut().zip(&self.binv[pos * n..(pos + 1) * n]) {
                        *p += rv * b;
                    }
                }
            }
        }
        pi
    }

    fn dual_objective(&self) -> f64 {
        let mut obj = 0.0;
        for j in 0..self.m + self.q {
            let v = match self.slot[j] {
                Slot::Basic(pos) => {
                    let (lo, hi) = self.bounds(j);
                    self.xb[pos].clamp(lo, hi)
                }
                Slot::Nonbasic => self.value[j],
            };
            obj += self.cost(j) * v;
        }
        obj
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Gauss-Jordan inverse with partial pivoting; `None` when singular.
fn invert(a: &[f64], n: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = identity(n);
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x * n + c].abs().total_cmp(&m[y * n + c].abs()))?;
        if m[piv * n + c].abs() <= rel_tol * scale {
            return None;
        }
        if piv != c {
            for k in 0..n {
                m.swap(c * n + k, piv * n + k);
                inv.swap(c * n + k, piv * n + k);
            }
        }
        let p = m[c * n + c];
        for k in 0..n {
            m[c * n + k] /= p;
            inv[c * n + k] /= p;
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c];
                if f != 0.0 {
                    for k in 0..n {
                        m[r * n + k] -= f * m[c * n + k];
                        inv[r * n + k] -= f * inv[c * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_the_one_dimensional_lad() {
        let mut p = LadProblem::new(1);
        for v in [3.0, -1.0, 7.0, 2.0, 10.0] {
            p.push_row(&[1.0], v, 1.0);
        }
        let s = p.solve(100).unwrap();
        assert!(s.optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12, "{s:?}");
        assert!((s.objective - 16.0).abs() < 1e-12);
        assert!(s.gap() < 1e-12);
    }

    #[test]
    fn weighted_median() {
        let mut p = LadProblem::new(1);
        p.push_row(&[1.0], 0.0, 1.0);
        p.push_row(&[1.0], 5.0, 3.0);
        let s = p.solve(100).unwrap();
        assert!((s.x[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn equality_pins_coordinates() {
        // min |x0| + |x1| s.t. x0 + x1 = 2, x0 - x1 = 0
        let mut p = LadProblem::new(2);
        p.push_unit_row(0, 0.0, 1.0);
        p.push_unit_row(1, 0.0, 1.0);
        p.push_equality(&[1.0, 1.0], 2.0);
        p.push_equality(&[1.0, -1.0], 0.0);
        let s = p.solve(100).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!(s.eq_residual < 1e-12);
    }

    #[test]
    fn inconsistent_equalities_are_reported() {
        let mut p = LadProblem::new(1);
        p.push_unit_row(0, 0.0, 1.0);
        p.push_equality(&[1.0], 1.0);
        p.push_equality(&[1.0], 2.0);
        assert!(p.solve(100).is_err());
    }

    #[test]
    fn unconstrained_direction_defaults_to_zero() {
        let mut p = LadProblem::new(2);
        p.push_unit_row(0, 4.0, 1.0);
        let s = p.solve(100).unwrap();
        assert_eq!(s.x[1], 0.0);
        assert!((s.x[0] - 4.0).abs() < 1e-12);
    }

    fn polynomial_fit(points: usize) -> LadProblem {
        let mut p = LadProblem::new(3);
        for j in 0..points {
            let t = j as f64 / points as f64;
            p.push_row(&[1.0, t, t * t], (7.0 * t).sin() + if j % 7 == 0 { 3.0 } else { 0.0 }, 1.0);
        }
        p
    }

    #[test]
    fn pivot_cap_reports_non_optimal() {
        let p = polynomial_fit(40);
        let s = p.solve(1).unwrap();
        assert!(!s.optimal);
        let s = p.solve(1000).unwrap();
        assert!(s.optimal && s.gap() < 1e-9);
    }

    #[test]
    fn warm_start_reaches_the_same_optimum() {
        let mut p = polynomial_fit(60);
        p.push_equality(&[0.0, 1.0, 1.0], 2.0);
        let cold = p.solve(1000).unwrap();
        let again = p.solve_from(1000, Some(&cold.basis)).unwrap();
        assert_eq!(again.pivots, 0);
        assert!((again.objective - cold.objective).abs() < 1e-12);

        let mut q = p.clone();
        q.clear_equalities();
        q.push_equality(&[0.0, 1.0, 0.5], 1.0);
        let warm = q.solve_from(1000, Some(&cold.basis)).unwrap();
        let fresh = q.solve(1000).unwrap();
        assert!((warm.objective - fresh.objective).abs() < 1e-10);
        // unusable hints fall back to a cold start
        let bogus = q.solve_from(1000, Some(&[0, 0, 0])).unwrap();
        assert!((bogus.objective - fresh.objective).abs() < 1e-10);
    }
}

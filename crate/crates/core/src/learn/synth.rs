use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::relative_error;
use super::sequential::{learn_matrix, LearnOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub d: usize,
    pub p: usize,
    pub k: usize,
    pub t: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// Images per subject: `k ln k` rounded half up, at least 1.
    pub fn n(&self) -> usize {
        images_per_subject(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.p == 0 || self.k == 0 {
            return Err(Error::InvalidArgument("d, p and k must be >= 1".into()));
        }
        if self.t == 0 || self.t > self.k {
            return Err(Error::InvalidArgument(format!("sparsity t = {} must lie in 1..={}", self.t, self.k)));
        }
        if self.k > self.d.min(self.n() * self.p) {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds min(d, np) = {}",
                self.k,
                self.d.min(self.n() * self.p)
            )));
        }
        Ok(())
    }
}

pub fn images_per_subject(k: usize) -> usize {
    let x = k as f64 * (k as f64).ln();
    ((x + 0.5).floor() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub data: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

/// Independent stream per `(k, t, trial)` so cells can run in any order.
fn trial_rng(cfg: &SynthConfig, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((cfg.k as u64) << 40) ^ ((cfg.t as u64) << 20) ^ trial as u64);
    rng
}

/// Gaussian `V`, `C`; `S` with exactly `t` Gaussian nonzeros per column at
/// uniform positions; `D = V ⊗ 1ᵀ + C S`.
pub fn generate_synthetic(cfg: &SynthConfig, trial: usize) -> Result<SyntheticInstance> {
    cfg.validate()?;
    let mut rng = trial_rng(cfg, trial);
    let (d, p, k, n) = (cfg.d, cfg.p, cfg.k, cfg.n());
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let v = DMatrix::from_fn(d, p, |_, _| gauss(&mut rng));
    let c = DMatrix::from_fn(d, k, |_, _| gauss(&mut rng));
    let mut s = DMatrix::zeros(k, n * p);
    for col in 0..n * p {
        for r in sample(&mut rng, k, cfg.t).into_iter() {
            s[(r, col)] = gauss(&mut rng);
        }
    }
    let data = DMatrix::from_fn(d, n * p, |r, col| v[(r, col / n)]) + &c * &s;
    Ok(SyntheticInstance { data, v, c, s })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCell {
    pub k: usize,
    pub t: usize,
    pub trial_count: usize,
    pub err_v: f64,
    pub err_c: f64,
    pub wall_seconds: f64,
    /// Set when a trial failed; the error means are then NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub cells: Vec<RecoveryCell>,
}

impl RecoveryReport {
    pub fn cell(&self, k: usize, t: usize) -> Option<&RecoveryCell> {
        self.cells.iter().find(|c| c.k == k && c.t == t)
    }

    /// CSV with header `k,t,trial_count,err_V,err_C,wall_seconds`. Timing is
    /// written as 0 unless `with_timing`, keeping seeded output reproducible.
    pub fn write_csv<W: Write>(&self, mut out: W, with_timing: bool) -> std::io::Result<()> {
        writeln!(out, "k,t,trial_count,err_V,err_C,wall_seconds")?;
        for c in &self.cells {
            let secs = if with_timing { c.wall_seconds } else { 0.0 };
            writeln!(out, "{},{},{},{:e},{:e},{:.3}", c.k, c.t, c.trial_count, c.err_v, c.err_c, secs)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub d: usize,
    pub p: usize,
    pub ks: Vec<usize>,
    pub ts: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        PhaseGrid { d: 100, p: 5, ks: (1..=5).map(|i| 10 * i).collect(), ts: (1..=10).collect(), trials: 5, seed: 0 }
    }
}

/// Mean relative errors of `V` and `C` for one `(k, t)` cell.
pub fn run_cell(cfg: &SynthConfig, options: &LearnOptions) -> Result<RecoveryCell> {
    cfg.validate()?;
    let start = Instant::now();
    let mut err_v = 0.0;
    let mut err_c = 0.0;
    for trial in 0..cfg.trials {
        let inst = generate_synthetic(cfg, trial)?;
        let res = learn_matrix(&inst.data, cfg.n(), cfg.k, cfg.d, 1, options)?;
        err_v += relative_error(&res.identity, &inst.v)?;
        err_c += relative_error(res.dictionary.atoms(), &inst.c)?;
    }
    let trials = cfg.trials.max(1) as f64;
    Ok(RecoveryCell {
        k: cfg.k,
        t: cfg.t,
        trial_count: cfg.trials,
        err_v: err_v / trials,
        err_c: err_c / trials,
        wall_seconds: start.elapsed().as_secs_f64(),
        failure: None,
    })
}

/// Runs every `(k, t)` cell of the grid; cells with `t > k` are skipped and
/// failing cells are reported inline.
pub fn run_phase_transition(grid: &PhaseGrid, options: &LearnOptions) -> Result<RecoveryReport> {
    if grid.ks.is_empty() || grid.ts.is_empty() || grid.trials == 0 {
        return Err(Error::InvalidArgument("phase grid needs at least one k, one t and one trial".into()));
    }
    let configs: Vec<SynthConfig> = grid
        .ks
        .iter()
        .flat_map(|&k| grid.ts.iter().map(move |&t| (k, t)))
        .map(|(k, t)| SynthConfig { d: grid.d, p: grid.p, k, t, trials: grid.trials, seed: grid.seed })
        .collect();
    let cells = configs
        .par_iter()
        .map(|cfg| match run_cell(cfg, options) {
            Ok(cell) => cell,
            Err(e) => RecoveryCell {
                k: cfg.k,
                t: cfg.t,
                trial_count: cfg.trials,
                err_v: f64::NAN,
                err_c: f64::NAN,
                wall_seconds: 0.0,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    Ok(RecoveryReport { cells })
}

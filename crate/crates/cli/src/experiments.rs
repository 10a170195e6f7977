//! Seeded experiment protocols on synthetic scenes.
//!
//! Every trial draws from its own ChaCha stream keyed by the trial index, so a
//! trial sees the same class, ground truth, illumination and noise at every
//! grid point; only the swept quantity changes between points.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use silt::pipeline::{
    align_all, align_single, alignment_success, recognize, transfer_gallery, AlignOptions, RecognizeOptions,
};
use silt::scene::{Scene, SceneConfig};
use silt::{Error, FaceImage, Result, Transform2D, TransformKind};

/// One axis of deformation applied on top of the ground-truth placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Pixels along x.
    X,
    /// Pixels along y.
    Y,
    /// Degrees.
    Rotation,
    /// Scale factor.
    Scale,
}

impl Axis {
    /// Default sweep grid.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Axis::X | Axis::Y => (-6..=6).map(|i| 2.0 * i as f64).collect(),
            Axis::Rotation => (-9..=9).map(|i| 5.0 * i as f64).collect(),
            Axis::Scale => (0..=8).map(|i| 0.8 + 0.05 * i as f64).collect(),
        }
    }

    /// Deformation in the gallery frame, to be applied before the truth.
    pub fn deformation(self, value: f64) -> Result<Transform2D> {
        match self {
            Axis::X => Transform2D::similarity(value, 0.0, 0.0, 1.0),
            Axis::Y => Transform2D::similarity(0.0, value, 0.0, 1.0),
            Axis::Rotation => Transform2D::similarity(0.0, 0.0, value.to_radians(), 1.0),
            Axis::Scale => Transform2D::similarity(0.0, 0.0, 0.0, value),
        }
    }

    /// Distance of `value` from the undeformed setting.
    pub fn magnitude(self, value: f64) -> f64 {
        match self {
            Axis::Scale => value.ln().abs(),
            _ => value.abs(),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Rotation => "rotation",
            Axis::Scale => "scale",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "rotation" => Ok(Axis::Rotation),
            "scale" => Ok(Axis::Scale),
            other => Err(Error::InvalidArgument(format!("unknown deformation axis {other:?}"))),
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// A query of a random class placed near the nominal position, as a face
/// detector plus manual labeling would give it.
#[derive(Debug, Clone)]
pub struct AlignmentCase {
    pub class: usize,
    pub truth: Transform2D,
    pub query: FaceImage,
}

pub fn alignment_case(scene: &Scene, seed: u64, trial: usize) -> Result<AlignmentCase> {
    let mut rng = trial_rng(seed, trial);
    let class = rng.random_range(0..scene.faces.len());
    let truth = Transform2D::similarity(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-0.1..0.1),
        rng.random_range(0.95..1.05),
    )?;
    let query = scene.render_query(class, &truth, &mut rng)?;
    Ok(AlignmentCase { class, truth, query })
}

/// `||e||_1` from the true placement and from the deformed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignmentTrial {
    pub e0: f64,
    pub e: f64,
    pub success: bool,
}

/// Aligns `case` from its truth (giving `e0`) and from `truth ∘ deformation`.
pub fn alignment_trial(
    scene: &Scene,
    case: &AlignmentCase,
    deformation: &Transform2D,
    opts: &AlignOptions,
    e0: Option<f64>,
) -> Result<AlignmentTrial> {
    let entry = &scene.gallery.entries[case.class];
    let e0 = match e0 {
        Some(v) => v,
        None => align_single(&case.query, entry, &scene.dictionary, &case.truth, opts)?.residual_l1,
    };
    let init = case.truth.compose(deformation);
    let e = align_single(&case.query, entry, &scene.dictionary, &init, opts)?.residual_l1;
    Ok(AlignmentTrial { e0, e, success: alignment_success(e, e0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignSweepConfig {
    pub scene: SceneConfig,
    pub classes: usize,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub align: AlignOptions,
}

impl Default for AlignSweepConfig {
    fn default() -> Self {
        AlignSweepConfig {
            scene: SceneConfig::default(),
            classes: 10,
            axis: Axis::X,
            grid: Axis::X.default_grid(),
            trials: 10,
            seed: 0,
            align: AlignOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub axis: Axis,
    pub value: f64,
    pub trials: usize,
    pub successes: usize,
    /// Trials whose alignment raised an error; they count as failures.
    pub errors: usize,
}

impl SweepPoint {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        self.successes as f64 / self.trials as f64
    }
}

/// Success rate of alignment at every grid value of one deformation axis.
pub fn align_sweep(cfg: &AlignSweepConfig) -> Result<Vec<SweepPoint>> {
    if cfg.grid.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidArgument("align sweep needs a non-empty grid and at least one trial".into()));
    }
    let scene = Scene::build(&SceneConfig { seed: cfg.seed, ..cfg.scene }, cfg.classes)?;
    let deformations = cfg.grid.iter().map(|&v| cfg.axis.deformation(v)).collect::<Result<Vec<_>>>()?;

    // per trial: the case and its reference error, shared by all grid values
    let cases: Vec<Option<(AlignmentCase, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let case = alignment_case(&scene, cfg.seed, t).ok()?;
            let entry = &scene.gallery.entries[case.class];
            let e0 = align_single(&case.query, entry, &scene.dictionary, &case.truth, &cfg.align).ok()?.residual_l1;
            Some((case, e0))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cfg.grid.len()).flat_map(|g| (0..cfg.trials).map(move |t| (g, t))).collect();
    let outcomes: Vec<Option<bool>> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let (case, e0) = cases[t].as_ref()?;
            alignment_trial(&scene, case, &deformations[g], &cfg.align, Some(*e0)).ok().map(|r| r.success)
        })
        .collect();

    Ok(cfg
        .grid
        .iter()
        .enumerate()
        .map(|(g, &value)| {
            let slice = &outcomes[g * cfg.trials..(g + 1) * cfg.trials];
            SweepPoint {
                axis: cfg.axis,
                value,
                trials: cfg.trials,
                successes: slice.iter().filter(|o| **o == Some(true)).count(),
                errors: slice.iter().filter(|o| o.is_none()).count(),
            }
        })
        .collect())
}

/// Random joint deformations: a translation of length uniform in
/// `[0, max_translation]` in a uniform direction, combined with a rotation
/// uniform in `[-max_rotation_deg, max_rotation_deg]`. One trial per case.
pub fn random_deformation_trials(
    scene: &Scene,
    count: usize,
    max_translation: f64,
    max_rotation_deg: f64,
    seed: u64,
    opts: &AlignOptions,
) -> Vec<Result<AlignmentTrial>> {
    (0..count)
        .into_par_iter()
        .map(|t| {
            let case = alignment_case(scene, seed, t)?;
            // deformation drawn from a stream disjoint from the case's
            let mut rng = trial_rng(seed ^ 0x5eed_def0, t);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let length = rng.random_range(0.0..=max_translation);
            let rotation = rng.random_range(-max_rotation_deg..=max_rotation_deg).to_radians();
            let deformation = Transform2D::similarity(length * angle.cos(), length * angle.sin(), rotation, 1.0)?;
            alignment_trial(scene, &case, &deformation, opts, None)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSweepConfig {
    pub scene: SceneConfig,
    pub classes: usize,
    /// Corrupted pixel fractions in percent.
    pub levels: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub align: AlignOptions,
    pub recognize: RecognizeOptions,
}

impl Default for CorruptionSweepConfig {
    fn default() -> Self {
        CorruptionSweepConfig {
            scene: SceneConfig { width: 32, height: 32, query_width: 32, query_height: 32, ..SceneConfig::default() },
            classes: 20,
            levels: vec![10.0, 20.0, 30.0, 40.0],
            trials: 100,
            seed: 0,
            align: AlignOptions::default(),
            recognize: RecognizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptionPoint {
    pub percent: f64,
    pub trials: usize,
    pub correct: usize,
    pub errors: usize,
}

impl CorruptionPoint {
    pub fn accuracy(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        self.correct as f64 / self.trials as f64
    }
}

/// One query with its pixels ranked for corruption: at level `f` the first
/// `round(f·d)` pixels of `order` take the matching `values`, so higher
/// levels corrupt a superset of the pixels of lower ones.
struct CorruptionCase {
    class: usize,
    query: FaceImage,
    order: Vec<usize>,
    values: Vec<f64>,
}

impl CorruptionCase {
    fn corrupted(&self, percent: f64) -> Result<FaceImage> {
        let d = self.query.dim();
        let count = ((percent / 100.0) * d as f64).round() as usize;
        let mut px = self.query.pixels().to_vec();
        for (&i, &v) in self.order.iter().zip(&self.values).take(count.min(d)) {
            px[i] = v;
        }
        FaceImage::new(self.query.width(), self.query.height(), px)
    }
}

/// Recognition accuracy of the full align, transfer and recognize pipeline
/// under uniform random-pixel corruption of the query.
pub fn corruption_sweep(cfg: &CorruptionSweepConfig) -> Result<Vec<CorruptionPoint>> {
    if cfg.levels.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidArgument("corruption sweep needs levels and at least one trial".into()));
    }
    if cfg.levels.iter().any(|l| !(0.0..=100.0).contains(l)) {
        return Err(Error::InvalidArgument("corruption levels are percentages in [0, 100]".into()));
    }
    let sc = SceneConfig { seed: cfg.seed, ..cfg.scene };
    let scene = Scene::build(&sc, cfg.classes)?;
    let identity = Transform2D::identity(TransformKind::Similarity);
    let (qw, qh) = (sc.query_width, sc.query_height);

    let cases: Vec<Result<CorruptionCase>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, t);
            let class = rng.random_range(0..cfg.classes);
            let query = scene.render_query(class, &identity, &mut rng)?;
            let (lo, hi) =
                query.pixels().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let mut order: Vec<usize> = (0..query.dim()).collect();
            order.shuffle(&mut rng);
            let values = (0..query.dim()).map(|_| rng.random_range(lo..=hi)).collect();
            Ok(CorruptionCase { class, query, order, values })
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cfg.levels.len()).flat_map(|l| (0..cfg.trials).map(move |t| (l, t))).collect();
    let outcomes: Vec<Option<bool>> = jobs
        .par_iter()
        .map(|&(l, t)| {
            let case = cases[t].as_ref().ok()?;
            let run = || -> Result<bool> {
                let query = case.corrupted(cfg.levels[l])?;
                let outcomes = align_all(&query, &scene.gallery, &scene.dictionary, &identity, &cfg.align)?;
                let tg = transfer_gallery(&outcomes, &scene.gallery, &scene.dictionary, qw, qh)?;
                let r = recognize(&query.to_vector(), &tg, &cfg.recognize)?;
                Ok(r.predicted_class == case.class as i64)
            };
            run().ok()
        })
        .collect();

    Ok(cfg
        .levels
        .iter()
        .enumerate()
        .map(|(l, &percent)| {
            let slice = &outcomes[l * cfg.trials..(l + 1) * cfg.trials];
            CorruptionPoint {
                percent,
                trials: cfg.trials,
                correct: slice.iter().filter(|o| **o == Some(true)).count(),
                errors: slice.iter().filter(|o| o.is_none()).count(),
            }
        })
        .collect())
}

/// True when `rate` never increases with `magnitude` (points sharing a
/// magnitude are pooled first).
pub fn non_increasing(points: &[(f64, usize, usize)]) -> bool {
    let mut pooled: Vec<(f64, usize, usize)> = Vec::new();
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (m, ok, n) in sorted {
        match pooled.last_mut() {
            Some(last) if (last.0 - m).abs() < 1e-12 => {
                last.1 += ok;
                last.2 += n;
            }
            _ => pooled.push((m, ok, n)),
        }
    }
    pooled.windows(2).all(|w| w[1].1 as f64 / w[1].2 as f64 <= w[0].1 as f64 / w[0].2 as f64)
}

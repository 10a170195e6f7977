//! The `silt` command line: dictionary learning, alignment, recognition and
//! the seeded benchmark sweeps.

pub mod experiments;
pub mod fixtures;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use experiments::{align_sweep, corruption_sweep, AlignSweepConfig, Axis, CorruptionSweepConfig};
use silt::learn::{learn_dictionary, run_phase_transition, CandidateSet, LearnOptions, PhaseGrid};
use silt::model::{load_auxiliary, load_gallery, load_queries, GallerySet, Query};
use silt::pipeline::{
    align_all, recognize, transfer_gallery, AlignOptions, AlignmentOutcome, RecognitionResult, RecognizeOptions,
};
use silt::scene::SceneConfig;
use silt::solvers::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use silt::{IlluminationDictionary, Transform2D, TransformKind};

#[derive(Debug, Parser)]
#[command(name = "silt", version, about = "Sparse illumination learning and transfer")]
pub struct Cli {
    /// Worker thread cap.
    #[arg(long, env = "SILT_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn an illumination dictionary from an auxiliary manifest.
    Learn(LearnArgs),
    /// Align each query to every gallery class.
    Align(PipelineArgs),
    /// Align, transfer illumination and classify each query.
    Recognize(PipelineArgs),
    /// Seeded experiment sweeps written as CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Auxiliary manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long = "atoms", short = 'k')]
    pub atoms: usize,
    /// Dictionary output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagnostics JSON path; defaults to the dictionary path with `.json` appended.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// `all` or `subsample:N`.
    #[arg(long, default_value = "all")]
    pub candidate_columns: String,
    /// Filter-LP duality-gap tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Dictionary file written by `silt learn`.
    #[arg(long)]
    pub dict: PathBuf,
    /// Gallery manifest.
    #[arg(long)]
    pub gallery: PathBuf,
    /// Query manifest.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Alignment stops once a parameter update is shorter than this.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    /// Duality-gap tolerance of each ℓ1 solve.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub solver_tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value = "similarity")]
    pub transform_kind: String,
    /// Accepted for interface uniformity; these commands draw no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(subcommand)]
    pub experiment: Experiment,
}

#[derive(Debug, Args)]
pub struct CommonBench {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Dictionary recovery over a (k, t) grid.
    SynthRecovery {
        #[command(flatten)]
        common: CommonBench,
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        p: usize,
        /// Comma-separated atom counts.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        ks: Vec<usize>,
        /// Comma-separated sparsity levels.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        ts: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value = "all")]
        candidate_columns: String,
        /// Fill the wall_seconds column; otherwise it is written as 0.
        #[arg(long)]
        record_timing: bool,
    },
    /// Alignment success rate along one deformation axis.
    AlignSweep {
        #[command(flatten)]
        common: CommonBench,
        /// x, y, rotation (degrees) or scale.
        #[arg(long, default_value = "x")]
        axis: String,
        /// Comma-separated grid; defaults per axis.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long = "atoms", short = 'k', default_value_t = 5)]
        atoms: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Recognition accuracy against random-pixel corruption.
    CorruptionSweep {
        #[command(flatten)]
        common: CommonBench,
        /// Comma-separated corruption percentages.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        classes: usize,
        #[arg(long = "atoms", short = 'k', default_value_t = 5)]
        atoms: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Synthetic auxiliary, gallery and query manifests with ground truth.
    Fixtures {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 5)]
        queries: usize,
        #[arg(long = "atoms", short = 'k', default_value_t = 5)]
        atoms: usize,
        /// Gallery frame side; queries are twice as large.
        #[arg(long, default_value_t = 32)]
        size: usize,
    },
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values (exit 1).
    Usage(String),
    /// Unreadable inputs or a failed computation (exit 2).
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`
    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Data(m) => ("data", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl From<silt::Error> for CliError {
    fn from(e: silt::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args`, runs the command and maps the outcome to an exit code,
/// printing failures to stderr as JSON.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("SILT_THREADS / --threads must be >= 1".into()));
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Learn(a) => cmd_learn(&a),
        Command::Align(a) => cmd_align(&a),
        Command::Recognize(a) => cmd_recognize(&a),
        Command::Bench(b) => cmd_bench(b.experiment),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn parse_candidates(s: &str, seed: u64) -> CliResult<CandidateSet> {
    match s.parse::<CandidateSet>().map_err(|e| CliError::Usage(e.to_string()))? {
        CandidateSet::Subsample { count, .. } => Ok(CandidateSet::Subsample { count, seed }),
        all => Ok(all),
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

#[derive(Serialize)]
struct LearnSummary<'a> {
    dictionary: &'a Path,
    diagnostics: &'a silt::learn::LearnDiagnostics,
}

fn cmd_learn(a: &LearnArgs) -> CliResult<()> {
    positive("tol", a.tol)?;
    let candidates = parse_candidates(&a.candidate_columns, a.seed)?;
    if a.atoms == 0 {
        return Err(CliError::Usage("--atoms must be >= 1".into()));
    }
    let aux = load_auxiliary(&a.manifest)?;
    let limit = aux.dim().min(aux.per_subject() * aux.subject_count());
    if a.atoms > limit {
        return Err(CliError::Data(format!(
            "atom count {} exceeds min(d, n·p) = {limit} for this auxiliary set",
            a.atoms
        )));
    }
    let options = LearnOptions { candidates, tol: a.tol, ..LearnOptions::default() };
    let result = learn_dictionary(&aux, a.atoms, &options)?;
    result.dictionary.save(&a.out)?;
    let diag_path = a.diagnostics.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".json");
        PathBuf::from(s)
    });
    let summary = LearnSummary { dictionary: &a.out, diagnostics: &result.diagnostics };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Data(e.to_string()))? + "\n";
    write_output(Some(&diag_path), &text)?;
    let d = &result.diagnostics;
    println!("atoms: {}", d.atom_count);
    println!("subjects: {} x {} images", d.subject_count, d.per_subject);
    println!("residual_frobenius: {:e}", d.residual_frobenius);
    println!("condition_number: {:e}", d.condition_number);
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// The pipeline inputs shared by `align` and `recognize`.
struct PipelineInputs {
    dict: IlluminationDictionary,
    gallery: GallerySet,
    queries: Vec<Query>,
    kind: TransformKind,
    align: AlignOptions,
}

fn load_pipeline(a: &PipelineArgs) -> CliResult<PipelineInputs> {
    positive("lambda", a.lambda)?;
    positive("tol", a.tol)?;
    positive("solver-tol", a.solver_tol)?;
    if a.max_outer == 0 || a.max_iter == 0 {
        return Err(CliError::Usage("--max-outer and --max-iter must be >= 1".into()));
    }
    let kind: TransformKind = a.transform_kind.parse().map_err(|e: silt::Error| CliError::Usage(e.to_string()))?;
    if !a.dict.exists() {
        return Err(CliError::Data(format!("dictionary not found: {}", a.dict.display())));
    }
    let dict = IlluminationDictionary::load(&a.dict)?;
    let gallery = load_gallery(&a.gallery)?;
    if (dict.width(), dict.height()) != (gallery.geometry.width, gallery.geometry.height) {
        return Err(CliError::Data(format!(
            "dictionary is {}x{} but the gallery is {}x{}",
            dict.width(),
            dict.height(),
            gallery.geometry.width,
            gallery.geometry.height
        )));
    }
    let queries = load_queries(&a.queries)?;
    if queries.geometry != gallery.geometry {
        return Err(CliError::Data("query manifest declares a different crop geometry than the gallery".into()));
    }
    let align = AlignOptions {
        lambda: a.lambda,
        tol: a.tol,
        max_outer: a.max_outer,
        solver_tol: a.solver_tol,
        max_iter: a.max_iter,
    };
    Ok(PipelineInputs { dict, gallery, queries: queries.queries, kind, align })
}

/// The query's initial transform expressed in `kind`; narrowing to a
/// translation keeps only the offset.
pub fn init_for_kind(init: &Transform2D, kind: TransformKind) -> Transform2D {
    if kind >= init.kind() {
        return init.promote(kind);
    }
    let m = init.matrix();
    match kind {
        TransformKind::Translation => Transform2D::translation(m.tx, m.ty),
        _ => {
            // affine to similarity: closest rotation-and-scale of the linear part
            let (a, b) = ((m.a + m.d) / 2.0, (m.c - m.b) / 2.0);
            let scale = a.hypot(b).max(f64::MIN_POSITIVE);
            Transform2D::similarity(m.tx, m.ty, b.atan2(a), scale).expect("positive scale")
        }
    }
}

#[derive(Serialize)]
struct QueryAlignment<'a> {
    query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_id: Option<i64>,
    outcomes: &'a [AlignmentOutcome],
}

#[derive(Serialize)]
struct QueryRecognition {
    query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_id: Option<i64>,
    #[serde(flatten)]
    result: RecognitionResult,
}

fn align_query(inputs: &PipelineInputs, q: &Query) -> CliResult<Vec<AlignmentOutcome>> {
    let init = init_for_kind(&q.init, inputs.kind);
    Ok(align_all(&q.image, &inputs.gallery, &inputs.dict, &init, &inputs.align)?)
}

fn cmd_align(a: &PipelineArgs) -> CliResult<()> {
    let inputs = load_pipeline(a)?;
    let mut all = Vec::with_capacity(inputs.queries.len());
    for q in &inputs.queries {
        all.push((q, align_query(&inputs, q)?));
    }
    let report: Vec<QueryAlignment> = all
        .iter()
        .map(|(q, outs)| QueryAlignment { query: q.path.display().to_string(), class_id: q.class_id, outcomes: outs })
        .collect();
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))? + "\n";
    write_output(a.out.as_deref(), &text)
}

fn cmd_recognize(a: &PipelineArgs) -> CliResult<()> {
    let inputs = load_pipeline(a)?;
    let opts = RecognizeOptions { lambda: a.lambda, tol: a.solver_tol, max_iter: a.max_iter };
    let mut report = Vec::with_capacity(inputs.queries.len());
    for q in &inputs.queries {
        let outcomes = align_query(&inputs, q)?;
        let tg = transfer_gallery(&outcomes, &inputs.gallery, &inputs.dict, q.image.width(), q.image.height())?;
        let result = recognize(&q.image.to_vector(), &tg, &opts)?;
        report.push(QueryRecognition { query: q.path.display().to_string(), class_id: q.class_id, result });
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))? + "\n";
    write_output(a.out.as_deref(), &text)
}

fn cmd_bench(exp: Experiment) -> CliResult<()> {
    match exp {
        Experiment::SynthRecovery { common, d, p, ks, ts, trials, candidate_columns, record_timing } => {
            if ks.is_empty() || ts.is_empty() || trials == 0 {
                return Err(CliError::Usage("grids must be non-empty and trials >= 1".into()));
            }
            let candidates = parse_candidates(&candidate_columns, common.seed)?;
            let grid = PhaseGrid { d, p, ks, ts, trials, seed: common.seed };
            let options = LearnOptions { candidates, ..LearnOptions::default() };
            let report = run_phase_transition(&grid, &options)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf, record_timing).map_err(|e| CliError::Data(e.to_string()))?;
            for c in report.cells.iter().filter(|c| c.failure.is_some()) {
                eprintln!("cell k={} t={} failed: {}", c.k, c.t, c.failure.as_deref().unwrap_or_default());
            }
            write_output(common.out.as_deref(), &String::from_utf8(buf).expect("ascii csv"))
        }
        Experiment::AlignSweep { common, axis, grid, trials, classes, atoms, lambda, tol } => {
            let axis: Axis = axis.parse().map_err(|e: silt::Error| CliError::Usage(e.to_string()))?;
            positive("lambda", lambda)?;
            positive("tol", tol)?;
            if trials == 0 || classes == 0 {
                return Err(CliError::Usage("--trials and --classes must be >= 1".into()));
            }
            let cfg = AlignSweepConfig {
                scene: SceneConfig { atoms, ..SceneConfig::default() },
                classes,
                axis,
                grid: grid.unwrap_or_else(|| axis.default_grid()),
                trials,
                seed: common.seed,
                align: AlignOptions { lambda, tol, ..AlignOptions::default() },
            };
            let points = align_sweep(&cfg)?;
            let mut csv = String::from("axis,value,trials,successes,errors,success_rate\n");
            for p in &points {
                csv +=
                    &format!("{},{},{},{},{},{}\n", p.axis, p.value, p.trials, p.successes, p.errors, p.success_rate());
            }
            write_output(common.out.as_deref(), &csv)
        }
        Experiment::CorruptionSweep { common, levels, trials, classes, atoms, lambda } => {
            positive("lambda", lambda)?;
            if trials == 0 || classes == 0 || levels.is_empty() {
                return Err(CliError::Usage("--levels must be non-empty; --trials and --classes >= 1".into()));
            }
            let base = CorruptionSweepConfig::default();
            let cfg = CorruptionSweepConfig {
                scene: SceneConfig { atoms, ..base.scene },
                classes,
                levels,
                trials,
                seed: common.seed,
                align: AlignOptions { lambda, ..AlignOptions::default() },
                recognize: RecognizeOptions { lambda, ..RecognizeOptions::default() },
            };
            let points = corruption_sweep(&cfg)?;
            let mut csv = String::from("corruption_percent,trials,correct,errors,accuracy\n");
            for p in &points {
                csv += &format!("{},{},{},{},{}\n", p.percent, p.trials, p.correct, p.errors, p.accuracy());
            }
            write_output(common.out.as_deref(), &csv)
        }
        Experiment::Fixtures { out, seed, classes, queries, atoms, size } => {
            if classes == 0 || size < 8 {
                return Err(CliError::Usage("--classes must be >= 1 and --size >= 8".into()));
            }
            let cfg = SceneConfig {
                width: size,
                height: size,
                query_width: 2 * size,
                query_height: 2 * size,
                atoms,
                seed,
                ..SceneConfig::default()
            };
            let truth = fixtures::write_fixtures(&out, &cfg, classes, queries)?;
            println!("wrote {} gallery classes and {} queries to {}", classes, truth.queries.len(), out.display());
            Ok(())
        }
    }
}

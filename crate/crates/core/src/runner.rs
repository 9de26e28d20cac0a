//! End-to-end experiments: train per method key, evaluate on the fixed grid,
//! and write the run directory.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Method};
use crate::eval::{truth_values, ErrorReport, EvalError, EvalGrid, Metrics, TruthSource};
use crate::nn::{NnError, Surrogate};
use crate::persist::{PersistError, WeightBundle};
use crate::plot::{render_svg, Curves, PlotError};
use crate::problem::{BoundaryLayerProblem, ProblemError, ProblemKind};
use crate::pvd_net::{point_nets, train_pointwise, CollocationSets, TrainedModel};
use crate::pvd_onet::{operator_nets, pairs_matrix, train_operator, BcFamily, TrainedOperator};
use crate::train::{write_log, Checkpoint, TrainError};

pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_FILE: &str = "report.csv";
pub const LOG_FILE: &str = "training_log.csv";
pub const WEIGHTS_FILE: &str = "weights.pvdw";
pub const CURVES_FILE: &str = "curves.csv";
pub const PLOT_FILE: &str = "plot.svg";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("weights belong to `{found}`, configuration says `{expected}`")]
    MethodMismatch { expected: String, found: String },
    #[error("{0}")]
    Input(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Independent streams for nets, collocation and the boundary-value family.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    if stream == 0 {
        seed
    } else {
        seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

const COLLOC_STREAM: u64 = 1;
const FAMILY_STREAM: u64 = 2;

/// A trained (or loaded) surrogate of either kind.
#[derive(Debug, Clone)]
pub enum Trained {
    Point(TrainedModel),
    Operator { op: TrainedOperator, family: BcFamily },
}

impl Trained {
    pub fn nets(&self) -> &[Surrogate] {
        match self {
            Trained::Point(m) => &m.nets,
            Trained::Operator { op, .. } => &op.nets,
        }
    }

    pub fn log(&self) -> &[Checkpoint] {
        match self {
            Trained::Point(m) => &m.log,
            Trained::Operator { op, .. } => &op.log,
        }
    }

    pub fn best(&self) -> Option<Checkpoint> {
        match self {
            Trained::Point(m) => m.best,
            Trained::Operator { op, .. } => op.best,
        }
    }
}

pub fn family_for(cfg: &ExperimentConfig) -> BcFamily {
    let f = &cfg.family;
    BcFamily::sample(f.bounds, f.n_train, f.n_test, stream_seed(cfg.training.seed, FAMILY_STREAM))
}

pub fn collocation_for(cfg: &ExperimentConfig, prob: &BoundaryLayerProblem) -> CollocationSets {
    let t = &cfg.training;
    CollocationSets::sample(prob, t.n_outer, t.n_inner, stream_seed(t.seed, COLLOC_STREAM))
}

/// Freshly initialised surrogate for `cfg`, or one carrying `nets`.
pub fn build(cfg: &ExperimentConfig, nets: Option<Vec<Surrogate>>) -> Result<Trained, RunError> {
    cfg.validate()?;
    let prob = cfg.build_problem()?;
    let seed = cfg.training.seed;
    if let Some(order) = cfg.method.point_order() {
        let nets = match nets {
            Some(n) => n,
            None => point_nets(order, cfg.network.hidden, cfg.width(), seed)?,
        };
        return Ok(Trained::Point(TrainedModel::untrained(order, prob, nets, cfg.composite)));
    }
    let variant = cfg.method.operator_variant().expect("every method is point-wise or operator");
    let nets = match nets {
        Some(n) => n,
        None => operator_nets(variant.net_count(), cfg.operator_shape(), seed)?,
    };
    let op = TrainedOperator::untrained(variant, prob, nets, cfg.composite, cfg.family.bounds);
    Ok(Trained::Operator { op, family: family_for(cfg) })
}

/// Trains per the method key. Divergence comes back as
/// `TrainError::Diverged` with the best networks seen so far.
pub fn train_from_config(cfg: &ExperimentConfig) -> Result<Trained, RunError> {
    let tc = cfg.train_config();
    match build(cfg, None)? {
        Trained::Point(m) => {
            let colloc = collocation_for(cfg, &m.problem);
            Ok(Trained::Point(train_pointwise(m, &colloc, cfg.training.weights, &tc)?))
        }
        Trained::Operator { op, family } => {
            let mut setup = cfg.operator_training();
            setup.seed = stream_seed(setup.seed, COLLOC_STREAM);
            let op = train_operator(op, &family, &setup, &tc)?;
            Ok(Trained::Operator { op, family })
        }
    }
}

fn truth_source(cfg: &ExperimentConfig, prob: &BoundaryLayerProblem) -> TruthSource {
    match prob.kind {
        ProblemKind::Constant => TruthSource::Analytic,
        ProblemKind::Variable => TruthSource::Fdm(cfg.output.truth_intervals),
    }
}

/// Error report plus the curves of the first evaluated function.
pub fn evaluate(cfg: &ExperimentConfig, trained: &Trained) -> Result<(ErrorReport, Curves), RunError> {
    let method = cfg.method.key();
    let problem = cfg.problem.kind.key();
    let seed = cfg.training.seed;
    match trained {
        Trained::Point(m) => {
            let grid = EvalGrid::new(&m.problem);
            let truth = truth_values(&m.problem, &grid.points, truth_source(cfg, &m.problem))?;
            let pred = if cfg.method == Method::BlPinns { m.bl_pinns(&grid.points)? } else { m.composite(&grid.points)? };
            let metrics = Metrics::compute(&grid, &pred, &truth)?;
            let report = ErrorReport::single(method, problem, seed, grid.junction, metrics);
            Ok((report, Curves { x: grid.points, truth, prediction: pred }))
        }
        Trained::Operator { op, family } => {
            let grid = EvalGrid::new(&op.problem);
            let preds = op.predict_sensors(&pairs_matrix(&family.test), &grid.points)?;
            let mut per_pair = Vec::with_capacity(family.test.len());
            let mut first = None;
            for (&(a, b), pred) in family.test.iter().zip(preds) {
                let p = op.problem.with_boundary_values(a, b);
                let truth = truth_values(&p, &grid.points, truth_source(cfg, &p))?;
                per_pair.push(Metrics::compute(&grid, &pred, &truth)?);
                if first.is_none() {
                    first = Some(Curves { x: grid.points.clone(), truth, prediction: pred });
                }
            }
            let report = ErrorReport::family(method, problem, seed, grid.junction, per_pair)?;
            let curves = first.ok_or_else(|| RunError::Input("no test pairs".into()))?;
            Ok((report, curves))
        }
    }
}

fn write_artifacts(cfg: &ExperimentConfig, dir: &Path, nets: &[Surrogate], log: &[Checkpoint]) -> Result<(), RunError> {
    WeightBundle::from_surrogates(cfg.method.key(), nets).save(&dir.join(WEIGHTS_FILE))?;
    let mut buf = Vec::new();
    write_log(log, &mut buf).map_err(io_err(&dir.join(LOG_FILE)))?;
    write_file(&dir.join(LOG_FILE), &buf)
}

fn write_evaluation(dir: &Path, report: &ErrorReport, curves: &Curves) -> Result<(), RunError> {
    write_file(&dir.join(REPORT_FILE), report.to_csv_string().as_bytes())?;
    let mut buf = Vec::new();
    curves.write_csv(&mut buf)?;
    write_file(&dir.join(CURVES_FILE), &buf)?;
    write_file(&dir.join(PLOT_FILE), render_svg(curves, report.junction)?.as_bytes())
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub trained: Trained,
    pub report: ErrorReport,
}

/// Trains, evaluates and writes config, report, training log, weights,
/// curves and plot into `dir`. After divergence the partial weights and log
/// are still written before the error is returned.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_toml()?.as_bytes())?;
    let trained = match train_from_config(cfg) {
        Ok(t) => t,
        Err(RunError::Train(TrainError::Diverged { iteration, reason, partial })) => {
            write_artifacts(cfg, dir, &partial.nets, &partial.log)?;
            return Err(TrainError::Diverged { iteration, reason, partial }.into());
        }
        Err(e) => return Err(e),
    };
    write_artifacts(cfg, dir, trained.nets(), trained.log())?;
    let (report, curves) = evaluate(cfg, &trained)?;
    write_evaluation(dir, &report, &curves)?;
    Ok(RunOutcome { dir: dir.to_path_buf(), trained, report })
}

pub fn load_config(dir: &Path) -> Result<ExperimentConfig, RunError> {
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(ExperimentConfig::from_toml(&text)?)
}

/// Rebuilds the stored surrogate of a run directory.
pub fn load_run(dir: &Path) -> Result<(ExperimentConfig, Trained), RunError> {
    let cfg = load_config(dir)?;
    let bundle = WeightBundle::load(&dir.join(WEIGHTS_FILE))?;
    if bundle.method != cfg.method.key() {
        return Err(RunError::MethodMismatch { expected: cfg.method.key().into(), found: bundle.method });
    }
    let nets = bundle.to_surrogates(cfg.method.operator_variant().is_some())?;
    if nets.len() != cfg.method.net_count() {
        return Err(RunError::Input(format!("expected {} networks, found {}", cfg.method.net_count(), nets.len())));
    }
    let trained = build(&cfg, Some(nets))?;
    Ok((cfg, trained))
}

/// Re-evaluates stored weights and rewrites report, curves and plot.
pub fn eval_run(dir: &Path) -> Result<ErrorReport, RunError> {
    let (cfg, trained) = load_run(dir)?;
    let (report, curves) = evaluate(&cfg, &trained)?;
    write_evaluation(dir, &report, &curves)?;
    Ok(report)
}

/// Regenerates the plot from `curves.csv` and the report header.
pub fn plot_run(dir: &Path) -> Result<PathBuf, RunError> {
    let cfg = load_config(dir)?;
    let path = dir.join(CURVES_FILE);
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let curves = Curves::read_csv(file)?;
    let junction = cfg.build_problem()?.junction();
    let out = dir.join(PLOT_FILE);
    write_file(&out, render_svg(&curves, junction)?.as_bytes())?;
    Ok(out)
}

/// `alpha beta` pairs, one per line (commas or whitespace; `#` comments).
pub fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>, RunError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| RunError::Input(format!("line {}: {e}", no + 1)))?;
        match nums[..] {
            [a, b] => out.push((a, b)),
            _ => return Err(RunError::Input(format!("line {}: expected two numbers", no + 1))),
        }
    }
    Ok(out)
}

/// Operator predictions on `points` uniform points of `[0, 1]` as CSV:
/// `pair,alpha,beta,x,u`.
pub fn infer(dir: &Path, pairs: &[(f64, f64)], points: usize) -> Result<String, RunError> {
    let (_, trained) = load_run(dir)?;
    let Trained::Operator { op, .. } = trained else {
        return Err(RunError::Input("inference needs an operator run".into()));
    };
    let xs: Vec<f64> = match points {
        0 | 1 => vec![0.0],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    };
    let curves = op.predict(pairs, &xs)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| RunError::Input(e.to_string());
    w.write_record(["pair", "alpha", "beta", "x", "u"]).map_err(csv_err)?;
    for (k, (&(a, b), row)) in pairs.iter().zip(&curves).enumerate() {
        for (&x, &u) in xs.iter().zip(row) {
            let rec = [k.to_string(), format!("{a:.16e}"), format!("{b:.16e}"), format!("{x:.16e}"), format!("{u:.16e}")];
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| RunError::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

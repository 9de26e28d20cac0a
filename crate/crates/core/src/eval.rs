//! Accuracy protocol: a 10 101-point grid split into inner, outer and
//! junction samples, relative-L2 / max-norm metrics, and CSV reports.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::problem::{analytic_solution_constant, BoundaryLayerProblem, ProblemKind};
use crate::reference::{fdm_solve, DEFAULT_INTERVALS};

pub const INNER_POINTS: usize = 10_000;
pub const OUTER_POINTS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction has {pred} entries, truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("truth vector has zero norm")]
    ZeroTruth,
    #[error("no ground truth available: {0}")]
    MissingTruth(String),
    #[error("surrogate evaluation failed: {0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    Inner,
    Outer,
    Junction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    pub points: Vec<f64>,
    pub regions: Vec<Region>,
    pub junction: f64,
}

impl EvalGrid {
    /// `10 000` uniform points on `[x0, x_j)`, the junction `x_j = x0 + eps xi0`,
    /// and `100` uniform points on `(x_j, 1]`, in increasing order.
    pub fn new(prob: &BoundaryLayerProblem) -> Self {
        let xj = prob.junction();
        let mut points = Vec::with_capacity(INNER_POINTS + OUTER_POINTS + 1);
        let mut regions = Vec::with_capacity(points.capacity());
        for i in 0..INNER_POINTS {
            points.push(prob.x0 + (xj - prob.x0) * i as f64 / INNER_POINTS as f64);
            regions.push(Region::Inner);
        }
        points.push(xj);
        regions.push(Region::Junction);
        for i in 1..=OUTER_POINTS {
            points.push(xj + (1.0 - xj) * i as f64 / OUTER_POINTS as f64);
            regions.push(Region::Outer);
        }
        *points.last_mut().unwrap() = 1.0;
        Self { points, regions, junction: xj }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn junction_index(&self) -> usize {
        INNER_POINTS
    }

    /// Indices of the boundary-layer region `[x0, x_j]` (junction included).
    pub fn inner_range(&self) -> std::ops::Range<usize> {
        0..INNER_POINTS + 1
    }
}

/// Ground truth for the evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSource {
    /// Closed form (constant coefficients only).
    Analytic,
    /// Shishkin-mesh finite differences with this many intervals.
    Fdm(usize),
}

impl TruthSource {
    /// Closed form when it exists, otherwise the default FDM reference.
    pub fn for_problem(prob: &BoundaryLayerProblem) -> Self {
        match prob.kind {
            ProblemKind::Constant => TruthSource::Analytic,
            ProblemKind::Variable => TruthSource::Fdm(DEFAULT_INTERVALS),
        }
    }
}

pub fn truth_values(prob: &BoundaryLayerProblem, xs: &[f64], source: TruthSource) -> Result<Vec<f64>, EvalError> {
    match source {
        TruthSource::Analytic => {
            if prob.kind != ProblemKind::Constant {
                return Err(EvalError::MissingTruth("no closed form for variable coefficients".into()));
            }
            xs.iter()
                .map(|&x| {
                    analytic_solution_constant(prob.eps, prob.alpha, prob.beta, x)
                        .map_err(|e| EvalError::MissingTruth(e.to_string()))
                })
                .collect()
        }
        TruthSource::Fdm(n) => {
            let sol = fdm_solve(prob, n).map_err(|e| EvalError::MissingTruth(e.to_string()))?;
            sol.eval_many(xs).map_err(|e| EvalError::MissingTruth(e.to_string()))
        }
    }
}

fn check(pred: &[f64], truth: &[f64]) -> Result<(), EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), truth: truth.len() });
    }
    Ok(())
}

/// `||pred - truth||_2 / ||truth||_2`.
pub fn relative_l2(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check(pred, truth)?;
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    let den: f64 = truth.iter().map(|t| t * t).sum();
    if den == 0.0 {
        return Err(EvalError::ZeroTruth);
    }
    Ok((num / den).sqrt())
}

pub fn l_inf(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).fold(0.0, f64::max))
}

/// Errors of one prediction against one truth on the evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub global_rel_l2: f64,
    pub global_linf: f64,
    pub inner_rel_l2: f64,
    pub inner_linf: f64,
    pub junction_abs: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 5] = ["global_rel_l2", "global_linf", "inner_rel_l2", "inner_linf", "junction_abs"];

    pub fn compute(grid: &EvalGrid, pred: &[f64], truth: &[f64]) -> Result<Self, EvalError> {
        check(pred, truth)?;
        check(pred, &grid.points)?;
        let inner = grid.inner_range();
        let j = grid.junction_index();
        Ok(Self {
            global_rel_l2: relative_l2(pred, truth)?,
            global_linf: l_inf(pred, truth)?,
            inner_rel_l2: relative_l2(&pred[inner.clone()], &truth[inner.clone()])?,
            inner_linf: l_inf(&pred[inner.clone()], &truth[inner])?,
            junction_abs: (pred[j] - truth[j]).abs(),
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [self.global_rel_l2, self.global_linf, self.inner_rel_l2, self.inner_linf, self.junction_abs]
    }

    /// Field-wise arithmetic mean.
    pub fn mean(items: &[Metrics]) -> Option<Metrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let mut acc = [0.0; 5];
        for m in items {
            for (a, v) in acc.iter_mut().zip(m.values()) {
                *a += v;
            }
        }
        let [a, b, c, d, e] = acc.map(|v| v / n);
        Some(Metrics { global_rel_l2: a, global_linf: b, inner_rel_l2: c, inner_linf: d, junction_abs: e })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: String,
    pub problem: String,
    pub seed: u64,
    pub junction: f64,
    /// Point-wise runs carry their metrics here; operator runs carry the mean.
    pub summary: Metrics,
    /// Per-test-pair metrics of operator runs (empty otherwise).
    pub per_pair: Vec<Metrics>,
}

impl ErrorReport {
    pub fn single(method: &str, problem: &str, seed: u64, junction: f64, metrics: Metrics) -> Self {
        Self {
            method: method.into(),
            problem: problem.into(),
            seed,
            junction,
            summary: metrics,
            per_pair: Vec::new(),
        }
    }

    pub fn family(
        method: &str,
        problem: &str,
        seed: u64,
        junction: f64,
        per_pair: Vec<Metrics>,
    ) -> Result<Self, EvalError> {
        let summary = Metrics::mean(&per_pair).ok_or_else(|| EvalError::MissingTruth("no test pairs".into()))?;
        Ok(Self { method: method.into(), problem: problem.into(), seed, junction, summary, per_pair })
    }

    /// `# junction` header line, then `method,problem,seed,region,metric,value`
    /// rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# junction x_j = x0 + eps * xi0 = {:.16e}", self.junction)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "problem", "seed", "region", "metric", "value"])?;
        let seed = self.seed.to_string();
        let mut emit = |region: &str, m: &Metrics| -> std::io::Result<()> {
            for (name, v) in Metrics::NAMES.iter().zip(m.values()) {
                w.write_record([&self.method, &self.problem, &seed, region, name, &format!("{v:.16e}")])?;
            }
            Ok(())
        };
        let summary_tag = if self.per_pair.is_empty() { "summary" } else { "mean" };
        emit(summary_tag, &self.summary)?;
        for (i, m) in self.per_pair.iter().enumerate() {
            emit(&format!("pair_{i:03}"), m)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

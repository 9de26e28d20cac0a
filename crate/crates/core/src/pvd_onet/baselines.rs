//! Single-network physics-informed operator and the supervised two-network
//! operator fit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::nn::{JetGrid, NnError, Surrogate};
use crate::problem::{analytic_solution_constant, BoundaryLayerProblem, ProblemKind};
use crate::pvd_net::loss::{LossError, LossParts, Targets};
use crate::train::Objective;

/// Residual of `eps u'' + a u' + b u` over one operator network on global
/// points, plus boundary penalties at `x = 0` and `x = 1`.
#[derive(Debug, Clone)]
pub struct PiDeepOnetLoss {
    pub problem: BoundaryLayerProblem,
    /// Residual points in `[0, 1]`.
    pub points: Vec<f64>,
    pub sensors: Matrix,
}

impl PiDeepOnetLoss {
    pub fn new(problem: BoundaryLayerProblem, n_points: usize, sensors: Matrix, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n_points).map(|_| rng.random::<f64>()).collect();
        Self { problem, points, sensors }
    }

    fn coords(&self) -> Vec<f64> {
        let mut c = self.points.clone();
        c.extend([0.0, 1.0]);
        c
    }

    /// Loss parts from a `3`-channel grid on `[points..., 0, 1]`: the
    /// residual lands in `outer`, the penalties in `boundary`.
    pub fn evaluate_grid(&self, grid: &JetGrid, adjoint: Option<&mut JetGrid>) -> Result<LossParts, LossError> {
        let targets = Targets::from_sensors(&self.sensors);
        let p = self.points.len();
        if grid.points != p + 2 || grid.channels < 3 || grid.functions != targets.len() || p == 0 {
            return Err(LossError::Shape("grid does not match the global collocation".into()));
        }
        let nf = targets.len() as f64;
        let s = 1.0 / (nf * p as f64);
        let eps = self.problem.eps;
        let a: Vec<f64> = self.points.iter().map(|&x| self.problem.a(x)).collect();
        let b: Vec<f64> = self.points.iter().map(|&x| self.problem.b(x)).collect();
        let mut parts = LossParts::zero();
        let mut adj = adjoint;
        for n in 0..targets.len() {
            for j in 0..p {
                let r = eps * grid.d2(n, j) + a[j] * grid.d1(n, j) + b[j] * grid.v(n, j);
                parts.outer += r * r * s;
                if let Some(g) = adj.as_deref_mut() {
                    let c = 2.0 * r * s;
                    g.add(0, n, j, c * b[j]);
                    g.add(1, n, j, c * a[j]);
                    g.add(2, n, j, c * eps);
                }
            }
            let b0 = grid.v(n, p) - targets.alpha[n];
            let b1 = grid.v(n, p + 1) - targets.beta[n];
            parts.boundary += (b0 * b0 + b1 * b1) / nf;
            if let Some(g) = adj.as_deref_mut() {
                g.add(0, n, p, 2.0 * b0 / nf);
                g.add(0, n, p + 1, 2.0 * b1 / nf);
            }
        }
        parts.total = parts.outer + parts.boundary;
        parts.check_finite()?;
        Ok(parts)
    }
}

impl Objective for PiDeepOnetLoss {
    fn evaluate(&self, nets: &[Surrogate], grads: Option<&mut [Vec<f64>]>) -> Result<LossParts, LossError> {
        if nets.len() != 1 {
            return Err(LossError::Shape("PI-DeepONet trains exactly one network".into()));
        }
        let (grid, trace) = nets[0].forward(&self.sensors, &self.coords(), 3)?;
        match grads {
            None => self.evaluate_grid(&grid, None),
            Some(g) => {
                let mut adj = JetGrid::zeros(grid.functions, grid.points, grid.channels);
                let parts = self.evaluate_grid(&grid, Some(&mut adj))?;
                g[0].clear();
                g[0].resize(nets[0].param_count(), 0.0);
                nets[0].backward(&trace, &adj, &mut g[0])?;
                Ok(parts)
            }
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DataDrivenError {
    #[error("insufficient supervision: {0} observation points per region")]
    InsufficientSupervision(usize),
    #[error("labels need the closed-form solution (constant-coefficient problem only)")]
    NoClosedForm,
}

/// Supervised fit of an outer operator (input `x`) and an inner operator
/// (input `xi`) to exact labels at equispaced observation points.
#[derive(Debug, Clone)]
pub struct DataDrivenLoss {
    pub sensors: Matrix,
    /// Observations in `(x_j, 1]`.
    pub outer_obs: Vec<f64>,
    /// Observations in `[0, xi0]` (stretched).
    pub inner_obs: Vec<f64>,
    outer_labels: Vec<f64>,
    inner_labels: Vec<f64>,
}

impl DataDrivenLoss {
    pub fn new(problem: &BoundaryLayerProblem, sensors: Matrix, n_obs: usize) -> Result<Self, DataDrivenError> {
        if n_obs == 0 {
            return Err(DataDrivenError::InsufficientSupervision(0));
        }
        if problem.kind != ProblemKind::Constant {
            return Err(DataDrivenError::NoClosedForm);
        }
        let xj = problem.junction();
        let outer_obs: Vec<f64> = (1..=n_obs).map(|k| xj + (1.0 - xj) * k as f64 / n_obs as f64).collect();
        let inner_obs: Vec<f64> = if n_obs == 1 {
            vec![0.0]
        } else {
            (0..n_obs).map(|k| problem.xi0 * k as f64 / (n_obs - 1) as f64).collect()
        };
        let label = |xs: &[f64], x_of: &dyn Fn(f64) -> f64| -> Result<Vec<f64>, DataDrivenError> {
            let mut out = Vec::with_capacity(sensors.rows() * xs.len());
            for n in 0..sensors.rows() {
                let (a, b) = (sensors.get(n, 0), sensors.get(n, 1));
                for &s in xs {
                    out.push(analytic_solution_constant(problem.eps, a, b, x_of(s)).map_err(|_| DataDrivenError::NoClosedForm)?);
                }
            }
            Ok(out)
        };
        let outer_labels = label(&outer_obs, &|x| x)?;
        let inner_labels = label(&inner_obs, &|xi| problem.unstretch(xi))?;
        Ok(Self { sensors, outer_obs, inner_obs, outer_labels, inner_labels })
    }

    pub fn labels(&self) -> (&[f64], &[f64]) {
        (&self.outer_labels, &self.inner_labels)
    }

    fn mse(grid: &JetGrid, labels: &[f64], adjoint: Option<&mut JetGrid>) -> f64 {
        let count = labels.len() as f64;
        let mut adj = adjoint;
        let mut acc = 0.0;
        for (k, (&p, &t)) in grid.data[..labels.len()].iter().zip(labels).enumerate() {
            let d = p - t;
            acc += d * d / count;
            if let Some(g) = adj.as_deref_mut() {
                g.data[k] += 2.0 * d / count;
            }
        }
        acc
    }
}

impl Objective for DataDrivenLoss {
    fn evaluate(&self, nets: &[Surrogate], grads: Option<&mut [Vec<f64>]>) -> Result<LossParts, LossError> {
        if nets.len() != 2 {
            return Err(LossError::Shape("data-driven fit uses an outer and an inner network".into()));
        }
        let jobs = [(&nets[0], &self.outer_obs, &self.outer_labels), (&nets[1], &self.inner_obs, &self.inner_labels)];
        let want = grads.is_some();
        let results = jobs
            .par_iter()
            .map(|&(net, coords, labels)| {
                let (grid, trace) = net.forward(&self.sensors, coords, 1)?;
                if !want {
                    return Ok((Self::mse(&grid, labels, None), None));
                }
                let mut adj = JetGrid::zeros(grid.functions, grid.points, 1);
                let loss = Self::mse(&grid, labels, Some(&mut adj));
                let mut g = vec![0.0; net.param_count()];
                net.backward(&trace, &adj, &mut g)?;
                Ok((loss, Some(g)))
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        let mut parts = LossParts::zero();
        parts.outer = results[0].0;
        parts.inner = results[1].0;
        parts.total = parts.outer + parts.inner;
        parts.check_finite()?;
        if let Some(out) = grads {
            for (slot, (_, g)) in out.iter_mut().zip(results) {
                *slot = g.expect("gradients requested");
            }
        }
        Ok(parts)
    }
}

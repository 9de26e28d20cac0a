//! Ground truth: a finite-difference solver on a layer-resolving
//! piecewise-uniform (Shishkin) mesh, with monotone cubic interpolation.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::linalg::{solve_tridiagonal, LinalgError};
use crate::problem::{BoundaryLayerProblem, LayerSide};

/// Smallest accepted interval count.
pub const MIN_INTERVALS: usize = 1000;
/// Fewest mesh nodes allowed inside the layer region.
pub const MIN_LAYER_NODES: usize = 8;
/// Interval count used when the FDM solution serves as ground truth.
pub const DEFAULT_INTERVALS: usize = 16384;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("mesh needs at least {MIN_INTERVALS} intervals, got {0}")]
    TooCoarse(usize),
    #[error("only {0} nodes fall inside the layer (need {MIN_LAYER_NODES})")]
    UnresolvedLayer(usize),
    #[error("only left-side layers are supported by the solver")]
    UnsupportedSide,
    #[error("tridiagonal system is singular at row {0}")]
    Singular(usize),
    #[error("x = {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone)]
pub struct FdmSolution {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Mesh transition point.
    pub tau: f64,
    /// Number of intervals.
    pub intervals: usize,
}

/// Piecewise-uniform mesh with `n / 2` intervals on `[0, tau]` and `n / 2` on
/// `[tau, 1]`, `tau = min(1/2, 2 eps ln(n) / a_min)`.
pub fn shishkin_mesh(prob: &BoundaryLayerProblem, n: usize) -> (Vec<f64>, f64) {
    let half = n / 2;
    let tau = (2.0 * prob.eps / prob.a_min() * (n as f64).ln()).min(0.5);
    let mut x = Vec::with_capacity(n + 1);
    for i in 0..=half {
        x.push(tau * i as f64 / half as f64);
    }
    let rest = n - half;
    for i in 1..=rest {
        x.push(tau + (1.0 - tau) * i as f64 / rest as f64);
    }
    *x.last_mut().unwrap() = 1.0;
    (x, tau)
}

struct System {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

fn assemble(prob: &BoundaryLayerProblem, x: &[f64]) -> System {
    let m = x.len();
    let mut s = System { lower: vec![0.0; m], diag: vec![0.0; m], upper: vec![0.0; m], rhs: vec![0.0; m] };
    s.diag[0] = 1.0;
    s.rhs[0] = prob.alpha;
    s.diag[m - 1] = 1.0;
    s.rhs[m - 1] = prob.beta;
    for i in 1..m - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        let hs = hl + hr;
        let (a, b) = (prob.a(x[i]), prob.b(x[i]));
        // Three-point central formulas on a nonuniform stencil.
        let l = 2.0 * prob.eps / (hl * hs) - a * hr / (hl * hs);
        let c = -2.0 * prob.eps / (hl * hr) + a * (hr - hl) / (hl * hr) + b;
        let u = 2.0 * prob.eps / (hr * hs) + a * hl / (hr * hs);
        s.lower[i] = l / c;
        s.diag[i] = 1.0;
        s.upper[i] = u / c;
    }
    s
}

/// Solves `eps u'' + a u' + b u = 0` on a Shishkin mesh with `n` intervals.
pub fn fdm_solve(prob: &BoundaryLayerProblem, n: usize) -> Result<FdmSolution, ReferenceError> {
    if n < MIN_INTERVALS {
        return Err(ReferenceError::TooCoarse(n));
    }
    if prob.layer_side() != LayerSide::Left {
        return Err(ReferenceError::UnsupportedSide);
    }
    let (nodes, tau) = shishkin_mesh(prob, n);
    let in_layer = nodes.iter().filter(|&&x| x <= tau).count();
    if in_layer < MIN_LAYER_NODES {
        return Err(ReferenceError::UnresolvedLayer(in_layer));
    }
    let sys = assemble(prob, &nodes);
    let values = solve_tridiagonal(&sys.lower, &sys.diag, &sys.upper, &sys.rhs).map_err(|e| match e {
        LinalgError::Singular { row } => ReferenceError::Singular(row),
        other => ReferenceError::Linalg(other),
    })?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ReferenceError::Singular(0));
    }
    let slopes = pchip_slopes(&nodes, &values);
    Ok(FdmSolution { nodes, values, slopes, tau, intervals: n })
}

fn pchip_end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Fritsch-Carlson slopes (weighted harmonic mean, shape-preserving ends).
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            continue;
        }
        let w1 = 2.0 * h[i] + h[i - 1];
        let w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / a + w2 / b);
    }
    d[0] = pchip_end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

impl FdmSolution {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Monotone cubic (PCHIP) interpolant at `x`.
    pub fn eval(&self, x: f64) -> Result<f64, ReferenceError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ReferenceError::OutOfDomain(x));
        }
        let k = self.nodes.partition_point(|&n| n <= x);
        if k == 0 {
            return Ok(self.values[0]);
        }
        let i = (k - 1).min(self.nodes.len() - 2);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        if x == x0 {
            return Ok(self.values[i]);
        }
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1])
    }

    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>, ReferenceError> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    /// Max-norm residual of the discrete system at the solved nodal values.
    pub fn discrete_residual(&self, prob: &BoundaryLayerProblem) -> f64 {
        let s = assemble(prob, &self.nodes);
        let u = &self.values;
        let m = u.len();
        (0..m)
            .map(|i| {
                let mut r = s.diag[i] * u[i] - s.rhs[i];
                if i > 0 {
                    r += s.lower[i] * u[i - 1];
                }
                if i + 1 < m {
                    r += s.upper[i] * u[i + 1];
                }
                r.abs()
            })
            .fold(0.0, f64::max)
    }

    /// Nodal `(x, u)` pairs as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ReferenceError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "u"])?;
        for (x, u) in self.nodes.iter().zip(&self.values) {
            w.write_record([format!("{x:.16e}"), format!("{u:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), ReferenceError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

//! Networks (fully connected and branch/trunk operator networks) and Adam.

mod adam;
mod deeponet;
mod mlp;

use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use deeponet::{DeepOnet, DeepOnetTrace};
pub use mlp::{forward_generic, jet_input, param_count, BatchTrace, Mlp};

use crate::linalg::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("layer widths must be nonempty and nonzero")]
    ZeroWidth,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sensor vector has length {got}, branch expects {expected}")]
    SensorLength { expected: usize, got: usize },
    #[error("non-finite intermediate in {0}")]
    NonFinite(String),
    #[error("parameter/gradient length mismatch ({params} vs {grads})")]
    LengthMismatch { params: usize, grads: usize },
    #[error("non-finite gradient entry at index {0}")]
    NonFiniteGradient(usize),
}

/// Network outputs on an `functions x points` grid, `channels` jets deep.
///
/// Layout is `[channel][function][point]`: channel 0 holds values, channel 1
/// first derivatives and channel 2 second derivatives w.r.t. the coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct JetGrid {
    pub functions: usize,
    pub points: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl JetGrid {
    pub fn zeros(functions: usize, points: usize, channels: usize) -> Self {
        Self { functions, points, channels, data: vec![0.0; functions * points * channels] }
    }

    #[inline]
    fn idx(&self, ch: usize, n: usize, j: usize) -> usize {
        debug_assert!(ch < self.channels && n < self.functions && j < self.points);
        (ch * self.functions + n) * self.points + j
    }

    #[inline]
    pub fn get(&self, ch: usize, n: usize, j: usize) -> f64 {
        self.data[self.idx(ch, n, j)]
    }

    #[inline]
    pub fn add(&mut self, ch: usize, n: usize, j: usize, v: f64) {
        let i = self.idx(ch, n, j);
        self.data[i] += v;
    }

    #[inline]
    pub fn v(&self, n: usize, j: usize) -> f64 {
        self.get(0, n, j)
    }

    #[inline]
    pub fn d1(&self, n: usize, j: usize) -> f64 {
        self.get(1, n, j)
    }

    #[inline]
    pub fn d2(&self, n: usize, j: usize) -> f64 {
        self.get(2, n, j)
    }

    /// Builds a grid by evaluating `f(function, point) -> (v, d1, d2)`.
    pub fn from_fn(
        functions: usize,
        points: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize) -> (f64, f64, f64),
    ) -> Self {
        let mut g = Self::zeros(functions, points, channels);
        for n in 0..functions {
            for j in 0..points {
                let (v, d1, d2) = f(n, j);
                for (ch, val) in [v, d1, d2].into_iter().enumerate().take(channels) {
                    let i = g.idx(ch, n, j);
                    g.data[i] = val;
                }
            }
        }
        g
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A trainable field: either a point-wise network `u(s)` or an operator
/// network `G(v)(s)` conditioned on a sensor vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Surrogate {
    Point(Mlp),
    Operator(DeepOnet),
}

#[derive(Debug, Clone)]
pub enum SurrogateTrace {
    Point(BatchTrace),
    Operator(DeepOnetTrace),
}

impl Surrogate {
    pub fn param_count(&self) -> usize {
        match self {
            Surrogate::Point(m) => m.param_count(),
            Surrogate::Operator(d) => d.param_count(),
        }
    }

    pub fn copy_params_to(&self, out: &mut [f64]) {
        match self {
            Surrogate::Point(m) => out.copy_from_slice(m.params()),
            Surrogate::Operator(d) => {
                let nb = d.branch().param_count();
                out[..nb].copy_from_slice(d.branch().params());
                out[nb..].copy_from_slice(d.trunk().params());
            }
        }
    }

    pub fn load_params(&mut self, src: &[f64]) {
        match self {
            Surrogate::Point(m) => m.params_mut().copy_from_slice(src),
            Surrogate::Operator(d) => {
                let nb = d.branch().param_count();
                d.branch_mut().params_mut().copy_from_slice(&src[..nb]);
                d.trunk_mut().params_mut().copy_from_slice(&src[nb..]);
            }
        }
    }

    /// Jet outputs on the `sensors x coords` grid. Point networks ignore the
    /// sensors and produce a single row.
    pub fn forward(
        &self,
        sensors: &Matrix,
        coords: &[f64],
        channels: usize,
    ) -> Result<(JetGrid, SurrogateTrace), NnError> {
        match self {
            Surrogate::Point(m) => {
                let trace = m.forward_batch(jet_input(coords, channels), channels)?;
                let grid = JetGrid {
                    functions: 1,
                    points: coords.len(),
                    channels,
                    data: trace.output().as_slice().to_vec(),
                };
                Ok((grid, SurrogateTrace::Point(trace)))
            }
            Surrogate::Operator(d) => {
                let (grid, trace) = d.forward_batch(sensors, coords, channels)?;
                Ok((grid, SurrogateTrace::Operator(trace)))
            }
        }
    }

    pub fn backward(&self, trace: &SurrogateTrace, adjoint: &JetGrid, grad: &mut [f64]) -> Result<(), NnError> {
        match (self, trace) {
            (Surrogate::Point(m), SurrogateTrace::Point(t)) => {
                let g = Matrix::from_vec(adjoint.channels * adjoint.points, 1, adjoint.data.clone())
                    .map_err(|e| NnError::Shape(e.to_string()))?;
                m.backward_batch(t, g, grad)
            }
            (Surrogate::Operator(d), SurrogateTrace::Operator(t)) => d.backward_batch(t, adjoint, grad),
            _ => Err(NnError::Shape("trace does not belong to this network kind".into())),
        }
    }

    /// Values only, for one sensor vector (ignored by point networks).
    pub fn values(&self, sensor: &[f64], coords: &[f64]) -> Result<Vec<f64>, NnError> {
        let sensors = Matrix::from_vec(1, sensor.len(), sensor.to_vec()).map_err(|e| NnError::Shape(e.to_string()))?;
        let (grid, _) = self.forward(&sensors, coords, 1)?;
        Ok(grid.data)
    }

    /// Values on the full `sensors x coords` grid (row per sensor vector).
    pub fn values_grid(&self, sensors: &Matrix, coords: &[f64]) -> Result<JetGrid, NnError> {
        Ok(self.forward(sensors, coords, 1)?.0)
    }
}

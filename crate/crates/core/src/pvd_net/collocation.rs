use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::BoundaryLayerProblem;

/// Training points of the two-region losses.
///
/// Outer networks are evaluated at `[outer..., x0, 1]`, inner networks at
/// `[inner..., xi0, 0]`: the trailing anchors carry the matching and
/// boundary terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSets {
    /// Residual points in `(x0, 1]`.
    pub outer: Vec<f64>,
    /// Residual points in `[0, xi0]` (stretched).
    pub inner: Vec<f64>,
    pub x0: f64,
    pub xi0: f64,
}

impl CollocationSets {
    /// Uniform i.i.d. sampling, reproducible per seed.
    pub fn sample(prob: &BoundaryLayerProblem, n_outer: usize, n_inner: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 1.0 - prob.x0;
        let outer = (0..n_outer).map(|_| prob.x0 + span * (1.0 - rng.random::<f64>())).collect();
        let inner = (0..n_inner).map(|_| prob.xi0 * rng.random::<f64>()).collect();
        Self { outer, inner, x0: prob.x0, xi0: prob.xi0 }
    }

    pub fn outer_coords(&self) -> Vec<f64> {
        let mut c = self.outer.clone();
        c.extend([self.x0, 1.0]);
        c
    }

    pub fn inner_coords(&self) -> Vec<f64> {
        let mut c = self.inner.clone();
        c.extend([self.xi0, 0.0]);
        c
    }

    /// Index of `x0` in [`Self::outer_coords`]; `1` follows it.
    pub fn outer_anchor(&self) -> usize {
        self.outer.len()
    }

    /// Index of `xi0` in [`Self::inner_coords`]; `0` follows it.
    pub fn inner_anchor(&self) -> usize {
        self.inner.len()
    }
}

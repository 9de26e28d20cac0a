use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

/// Sampling box for the boundary values `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcBox {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for BcBox {
    fn default() -> Self {
        Self { alpha_min: 0.4, alpha_max: 1.4, beta_min: 1.5, beta_max: 2.5 }
    }
}

impl BcBox {
    pub fn contains(&self, alpha: f64, beta: f64) -> bool {
        (self.alpha_min..=self.alpha_max).contains(&alpha) && (self.beta_min..=self.beta_max).contains(&beta)
    }

    pub fn is_valid(&self) -> bool {
        self.alpha_min <= self.alpha_max && self.beta_min <= self.beta_max
    }
}

/// Training and test boundary-value pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BcFamily {
    pub bounds: BcBox,
    pub train: Vec<(f64, f64)>,
    pub test: Vec<(f64, f64)>,
}

/// `n x 2` matrix of `(alpha, beta)` rows.
pub fn pairs_matrix(pairs: &[(f64, f64)]) -> Matrix {
    let data = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    Matrix::from_vec(pairs.len(), 2, data).expect("two columns per pair")
}

impl BcFamily {
    /// I.i.d. uniform pairs; the test pairs continue the training stream.
    pub fn sample(bounds: BcBox, n_train: usize, n_test: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<(f64, f64)> {
            (0..n)
                .map(|_| {
                    let a = bounds.alpha_min + (bounds.alpha_max - bounds.alpha_min) * rng.random::<f64>();
                    let b = bounds.beta_min + (bounds.beta_max - bounds.beta_min) * rng.random::<f64>();
                    (a, b)
                })
                .collect()
        };
        let train = draw(n_train);
        let test = draw(n_test);
        Self { bounds, train, test }
    }

    pub fn train_sensors(&self) -> Matrix {
        pairs_matrix(&self.train)
    }

    pub fn test_sensors(&self) -> Matrix {
        pairs_matrix(&self.test)
    }
}

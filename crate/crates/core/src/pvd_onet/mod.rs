//! Operator learning over the boundary-value family `(alpha, beta) -> u`:
//! the decomposed operators (two or five branch/trunk networks), the
//! single-network physics-informed baseline and the supervised fit.

mod baselines;
mod family;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use baselines::{DataDrivenError, DataDrivenLoss, PiDeepOnetLoss};
pub use family::{pairs_matrix, BcBox, BcFamily};

use crate::linalg::Matrix;
use crate::nn::{DeepOnet, Mlp, NnError, Surrogate};
use crate::problem::BoundaryLayerProblem;
use crate::pvd_net::loss::{AsymptoticLoss, LossWeights};
use crate::pvd_net::{bl_pinns_values, composite_values, CollocationSets, CompositeOptions, Order};
use crate::train::{train, Checkpoint, Objective, TrainConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorVariant {
    Leading,
    High,
    PiDeepOnet,
    DataDriven,
}

impl OperatorVariant {
    pub fn net_count(&self) -> usize {
        match self {
            OperatorVariant::Leading => 2,
            OperatorVariant::High => 5,
            OperatorVariant::PiDeepOnet => 1,
            OperatorVariant::DataDriven => 2,
        }
    }
}

/// Architecture of each branch/trunk pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorShape {
    pub hidden: usize,
    pub width: usize,
    /// Number of basis terms combined by the dot product.
    pub latent: usize,
}

/// `count` Glorot-initialised operator networks over two sensors, drawn from
/// one seeded stream.
pub fn operator_nets(count: usize, shape: OperatorShape, seed: u64) -> Result<Vec<Surrogate>, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let branch_w = Mlp::widths_for(2, shape.hidden, shape.width, shape.latent);
    let trunk_w = Mlp::widths_for(1, shape.hidden, shape.width, shape.latent);
    (0..count)
        .map(|_| {
            let branch = Mlp::glorot_with(&branch_w, &mut rng)?;
            let trunk = Mlp::glorot_with(&trunk_w, &mut rng)?;
            Ok(Surrogate::Operator(DeepOnet::new(branch, trunk)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedOperator {
    pub variant: OperatorVariant,
    pub problem: BoundaryLayerProblem,
    pub nets: Vec<Surrogate>,
    pub options: CompositeOptions,
    pub bounds: BcBox,
    pub best: Option<Checkpoint>,
    pub log: Vec<Checkpoint>,
}

impl TrainedOperator {
    pub fn untrained(
        variant: OperatorVariant,
        problem: BoundaryLayerProblem,
        nets: Vec<Surrogate>,
        options: CompositeOptions,
        bounds: BcBox,
    ) -> Self {
        Self { variant, problem, nets, options, bounds, best: None, log: Vec::new() }
    }

    /// Solution curves on `xs` for every `(alpha, beta)` pair; one row per pair.
    pub fn predict(&self, pairs: &[(f64, f64)], xs: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
        if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| !self.bounds.contains(a, b)) {
            log::warn!("boundary values ({a}, {b}) lie outside the training box; extrapolating");
        }
        let sensors = pairs_matrix(pairs);
        self.predict_sensors(&sensors, xs)
    }

    pub fn predict_sensors(&self, sensors: &Matrix, xs: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
        match self.variant {
            OperatorVariant::Leading => composite_values(Order::Leading, &self.problem, &self.nets, sensors, xs, self.options),
            OperatorVariant::High => composite_values(Order::High, &self.problem, &self.nets, sensors, xs, self.options),
            OperatorVariant::PiDeepOnet => {
                let g = self.nets[0].values_grid(sensors, xs)?;
                Ok(g.data.chunks(xs.len().max(1)).take(g.functions).map(<[f64]>::to_vec).collect())
            }
            OperatorVariant::DataDriven => bl_pinns_values(&self.problem, &self.nets, sensors, xs),
        }
    }
}

/// Where each variant gets its training signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorTraining {
    pub n_outer: usize,
    pub n_inner: usize,
    /// Global residual points of the physics-informed baseline.
    pub n_global: usize,
    /// Observation points per region of the supervised fit.
    pub n_obs: usize,
    pub weights: LossWeights,
    pub seed: u64,
}

/// Builds the objective of `variant` on the training pairs of `family`.
pub fn operator_objective(
    variant: OperatorVariant,
    problem: &BoundaryLayerProblem,
    family: &BcFamily,
    setup: &OperatorTraining,
) -> Result<Box<dyn Objective>, TrainError> {
    let sensors = family.train_sensors();
    Ok(match variant {
        OperatorVariant::Leading | OperatorVariant::High => {
            let order = if variant == OperatorVariant::Leading { Order::Leading } else { Order::High };
            Box::new(AsymptoticLoss {
                order,
                problem: *problem,
                colloc: CollocationSets::sample(problem, setup.n_outer, setup.n_inner, setup.seed),
                weights: setup.weights,
                sensors,
            })
        }
        OperatorVariant::PiDeepOnet => Box::new(PiDeepOnetLoss::new(*problem, setup.n_global, sensors, setup.seed)),
        OperatorVariant::DataDriven => Box::new(
            DataDrivenLoss::new(problem, sensors, setup.n_obs)
                .map_err(|e| TrainError::Loss(crate::pvd_net::loss::LossError::Shape(e.to_string())))?,
        ),
    })
}

/// Joint Adam training of every operator network of `op`.
pub fn train_operator(
    op: TrainedOperator,
    family: &BcFamily,
    setup: &OperatorTraining,
    cfg: &TrainConfig,
) -> Result<TrainedOperator, TrainError> {
    let objective = operator_objective(op.variant, &op.problem, family, setup)?;
    let outcome = train(op.nets, objective.as_ref(), cfg)?;
    Ok(TrainedOperator { nets: outcome.nets, best: Some(outcome.best), log: outcome.log, ..op })
}

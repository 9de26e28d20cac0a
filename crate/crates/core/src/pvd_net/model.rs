use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::collocation::CollocationSets;
use super::loss::{slot_layout, AsymptoticLoss, LossWeights, INNER0, INNER1, INNER_C, OUTER0, OUTER1};
use super::Order;
use crate::linalg::Matrix;
use crate::nn::{Mlp, NnError, Surrogate};
use crate::problem::BoundaryLayerProblem;
use crate::train::{train, Checkpoint, TrainConfig, TrainError};

/// How inner networks are queried beyond the training horizon `xi0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerExtension {
    /// Hold inner networks at `min(xi, xi0)`.
    #[default]
    Clamp,
    /// Evaluate at the raw stretched coordinate.
    Extrapolate,
}

/// Which side supplies the leading-order matching term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingSide {
    /// `u0(x0)`.
    #[default]
    Outer,
    /// `psi0(xi0)`.
    Inner,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompositeOptions {
    pub inner_extension: InnerExtension,
    pub matching_side: MatchingSide,
}

fn inner_coord(prob: &BoundaryLayerProblem, x: f64, ext: InnerExtension) -> f64 {
    let xi = prob.stretch(x);
    match ext {
        InnerExtension::Clamp => xi.min(prob.xi0),
        InnerExtension::Extrapolate => xi,
    }
}

/// Uniformly valid composite on `xs`, one row per sensor row (a single row
/// for point-wise networks).
pub fn composite_values(
    order: Order,
    prob: &BoundaryLayerProblem,
    nets: &[Surrogate],
    sensors: &Matrix,
    xs: &[f64],
    opts: CompositeOptions,
) -> Result<Vec<Vec<f64>>, NnError> {
    let layout = slot_layout(order);
    if nets.len() != layout.len() {
        return Err(NnError::Shape(format!("{} networks for a {}-network expansion", nets.len(), layout.len())));
    }
    let mut oc = xs.to_vec();
    oc.push(prob.x0);
    let mut ic: Vec<f64> = xs.iter().map(|&x| inner_coord(prob, x, opts.inner_extension)).collect();
    ic.push(prob.xi0);
    let grids = nets
        .iter()
        .zip(layout)
        .map(|(net, &(outer, _))| net.values_grid(sensors, if outer { &oc } else { &ic }))
        .collect::<Result<Vec<_>, _>>()?;
    let m = xs.len();
    let eps = prob.eps;
    let rows = grids[0].functions;
    let out = (0..rows)
        .map(|n| {
            let g = |slot: usize, j: usize| grids[slot].v(n, j);
            (0..m)
                .map(|j| match order {
                    Order::Leading => match opts.matching_side {
                        MatchingSide::Outer => g(INNER0, j) + (g(OUTER0, j) - g(OUTER0, m)),
                        MatchingSide::Inner => g(OUTER0, j) + (g(INNER0, j) - g(INNER0, m)),
                    },
                    Order::High => {
                        // eps * xi = x - x0 exactly, so the psic terms cancel
                        // identically for a constant psic.
                        let dx = xs[j] - prob.x0;
                        let outer = g(OUTER0, j) + eps * g(OUTER1, j);
                        let inner = (g(INNER0, j) - g(INNER0, m))
                            + eps * (g(INNER1, j) - g(INNER1, m))
                            + dx * (g(INNER_C, j) - g(INNER_C, m));
                        outer + inner
                    }
                })
                .collect()
        })
        .collect();
    Ok(out)
}

/// Piecewise baseline: inner network up to `x_j = x0 + eps xi0`, outer network
/// beyond, no composite.
pub fn bl_pinns_values(
    prob: &BoundaryLayerProblem,
    nets: &[Surrogate],
    sensors: &Matrix,
    xs: &[f64],
) -> Result<Vec<Vec<f64>>, NnError> {
    if nets.len() < 2 {
        return Err(NnError::Shape("piecewise evaluation needs outer and inner networks".into()));
    }
    let xj = prob.junction();
    let xi: Vec<f64> = xs.iter().map(|&x| prob.stretch(x)).collect();
    let outer = nets[OUTER0].values_grid(sensors, xs)?;
    let inner = nets[INNER0].values_grid(sensors, &xi)?;
    Ok((0..outer.functions)
        .map(|n| {
            xs.iter()
                .enumerate()
                .map(|(j, &x)| if x <= xj { inner.v(n, j) } else { outer.v(n, j) })
                .collect()
        })
        .collect())
}

/// Glorot-initialised scalar networks for every slot of `order`, drawn from
/// one seeded stream.
pub fn point_nets(order: Order, hidden: usize, width: usize, seed: u64) -> Result<Vec<Surrogate>, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = Mlp::scalar_widths(hidden, width);
    (0..order.net_count()).map(|_| Ok(Surrogate::Point(Mlp::glorot_with(&widths, &mut rng)?))).collect()
}

/// Trained (or freshly initialised) point-wise expansion.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub order: Order,
    pub problem: BoundaryLayerProblem,
    /// `[u0, psi0]` or `[u0, psi0, u1, psic, psi1]`.
    pub nets: Vec<Surrogate>,
    pub options: CompositeOptions,
    pub best: Option<Checkpoint>,
    pub log: Vec<Checkpoint>,
}

impl TrainedModel {
    pub fn untrained(order: Order, problem: BoundaryLayerProblem, nets: Vec<Surrogate>, options: CompositeOptions) -> Self {
        Self { order, problem, nets, options, best: None, log: Vec::new() }
    }

    fn sensors(&self) -> Matrix {
        Matrix::from_vec(1, 2, vec![self.problem.alpha, self.problem.beta]).expect("1 x 2")
    }

    pub fn composite(&self, xs: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut rows = composite_values(self.order, &self.problem, &self.nets, &self.sensors(), xs, self.options)?;
        Ok(rows.swap_remove(0))
    }

    pub fn bl_pinns(&self, xs: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut rows = bl_pinns_values(&self.problem, &self.nets, &self.sensors(), xs)?;
        Ok(rows.swap_remove(0))
    }

    /// Raw network value of slot `slot` at coordinate `s` (x or xi).
    pub fn net_value(&self, slot: usize, s: f64) -> Result<f64, NnError> {
        Ok(self.nets[slot].values(&[], &[s])?[0])
    }

    pub fn loss(&self, colloc: &CollocationSets, weights: LossWeights) -> AsymptoticLoss {
        AsymptoticLoss {
            order: self.order,
            problem: self.problem,
            colloc: colloc.clone(),
            weights,
            sensors: self.sensors(),
        }
    }
}

/// Trains all networks of the expansion jointly on the point-wise loss.
pub fn train_pointwise(
    model: TrainedModel,
    colloc: &CollocationSets,
    weights: LossWeights,
    cfg: &TrainConfig,
) -> Result<TrainedModel, TrainError> {
    let loss = model.loss(colloc, weights);
    let outcome = train(model.nets, &loss, cfg)?;
    Ok(TrainedModel {
        order: model.order,
        problem: model.problem,
        nets: outcome.nets,
        options: model.options,
        best: Some(outcome.best),
        log: outcome.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemKind;

    fn constant_net(c: f64) -> Surrogate {
        let widths = Mlp::scalar_widths(2, 4);
        let mut m = Mlp::zeros(&widths).unwrap();
        *m.params_mut().last_mut().unwrap() = c;
        Surrogate::Point(m)
    }

    #[test]
    fn constant_networks_cancel() {
        let p = BoundaryLayerProblem::standard(ProblemKind::Constant);
        let xs = [0.0, 0.003, 0.02, 0.5, 1.0];
        let m = TrainedModel::untrained(Order::Leading, p, vec![constant_net(1.3); 2], CompositeOptions::default());
        assert!(m.composite(&xs).unwrap().iter().all(|&v| v == 1.3));
        let nets = vec![constant_net(0.0); 5];
        let h = TrainedModel::untrained(Order::High, p, nets, CompositeOptions::default());
        assert!(h.composite(&xs).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composite_at_layer_anchor_is_inner_value() {
        let p = BoundaryLayerProblem::standard(ProblemKind::Constant);
        let nets = point_nets(Order::Leading, 2, 8, 3).unwrap();
        let m = TrainedModel::untrained(Order::Leading, p, nets, CompositeOptions::default());
        assert_eq!(m.composite(&[0.0]).unwrap()[0], m.net_value(INNER0, 0.0).unwrap());
    }

    #[test]
    fn piecewise_regions() {
        let p = BoundaryLayerProblem::standard(ProblemKind::Constant);
        let nets = point_nets(Order::Leading, 2, 8, 5).unwrap();
        let m = TrainedModel::untrained(Order::Leading, p, nets, CompositeOptions::default());
        let v = m.bl_pinns(&[0.0, 1.0]).unwrap();
        assert_eq!(v[0], m.net_value(INNER0, 0.0).unwrap());
        assert_eq!(v[1], m.net_value(OUTER0, 1.0).unwrap());
    }

    #[test]
    fn order_reduction_shift_cancels() {
        let p = BoundaryLayerProblem::standard(ProblemKind::Constant);
        let nets = point_nets(Order::High, 2, 8, 11).unwrap();
        let xs: Vec<f64> = (0..=200).map(|i| (i as f64 / 200.0).powi(3)).collect();
        for ext in [InnerExtension::Clamp, InnerExtension::Extrapolate] {
            let opts = CompositeOptions { inner_extension: ext, ..Default::default() };
            let base = TrainedModel::untrained(Order::High, p, nets.clone(), opts).composite(&xs).unwrap();
            let mut shifted = nets.clone();
            if let Surrogate::Point(m) = &mut shifted[INNER_C] {
                *m.params_mut().last_mut().unwrap() += 0.731;
            }
            let moved = TrainedModel::untrained(Order::High, p, shifted, opts).composite(&xs).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn slot_constants_are_consistent() {
        assert_eq!(slot_layout(Order::High)[OUTER1], (true, 2));
        assert_eq!(slot_layout(Order::High)[INNER1].0, false);
    }
}

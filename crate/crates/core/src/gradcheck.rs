//! Finite-difference oracle for every training loss on tiny random networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::nn::{Mlp, Surrogate};
use crate::problem::{BoundaryLayerProblem, ProblemKind};
use crate::pvd_net::loss::{AsymptoticLoss, LossError, LossWeights};
use crate::pvd_net::{point_nets, CollocationSets, Order};
use crate::pvd_onet::{operator_nets, BcBox, BcFamily, DataDrivenLoss, OperatorShape, PiDeepOnetLoss};
use crate::train::Objective;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Loss variants covered by the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossVariant {
    PointLeading,
    PointHigh,
    OperatorLeading,
    OperatorHigh,
    PiDeepOnet,
    DataDriven,
}

impl LossVariant {
    pub const ALL: [LossVariant; 6] = [
        LossVariant::PointLeading,
        LossVariant::PointHigh,
        LossVariant::OperatorLeading,
        LossVariant::OperatorHigh,
        LossVariant::PiDeepOnet,
        LossVariant::DataDriven,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LossVariant::PointLeading => "pvdnet-leading",
            LossVariant::PointHigh => "pvdnet-high",
            LossVariant::OperatorLeading => "pvdonet-leading",
            LossVariant::OperatorHigh => "pvdonet-high",
            LossVariant::PiDeepOnet => "pideeponet",
            LossVariant::DataDriven => "datadriven",
        }
    }
}

/// Norm-wise relative discrepancies `||g - fd|| / ||fd||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub fast_vs_fd: f64,
    /// Tape route; `None` for losses without a generic formulation.
    pub tape_vs_fd: Option<f64>,
    pub params: usize,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.fast_vs_fd.max(self.tape_vs_fd.unwrap_or(0.0))
    }
}

fn flatten(nets: &[Surrogate]) -> Vec<f64> {
    let mut out = Vec::new();
    for n in nets {
        let start = out.len();
        out.resize(start + n.param_count(), 0.0);
        n.copy_params_to(&mut out[start..]);
    }
    out
}

fn unflatten(nets: &mut [Surrogate], flat: &[f64]) {
    let mut off = 0;
    for n in nets {
        let k = n.param_count();
        n.load_params(&flat[off..off + k]);
        off += k;
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Central finite differences of the total loss.
pub fn fd_gradient(objective: &dyn Objective, nets: &[Surrogate], h: f64) -> Result<Vec<f64>, LossError> {
    let base = flatten(nets);
    let mut work = nets.to_vec();
    let mut grad = vec![0.0; base.len()];
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        unflatten(&mut work, &probe);
        let up = objective.evaluate(&work, None)?.total;
        probe[i] = base[i] - h;
        unflatten(&mut work, &probe);
        let down = objective.evaluate(&work, None)?.total;
        probe[i] = base[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// The batched adjoint gradient, flattened across networks.
pub fn fast_gradient(objective: &dyn Objective, nets: &[Surrogate]) -> Result<Vec<f64>, LossError> {
    let mut grads: Vec<Vec<f64>> = nets.iter().map(|n| vec![0.0; n.param_count()]).collect();
    objective.evaluate(nets, Some(&mut grads))?;
    Ok(grads.concat())
}

fn perturb_biases(nets: &mut [Surrogate], rng: &mut ChaCha8Rng) {
    // Glorot leaves biases at zero; random biases exercise their gradients.
    let mut bump = |m: &mut Mlp| {
        let widths = m.widths().to_vec();
        let mut off = 0;
        for w in widths.windows(2) {
            off += w[0] * w[1];
            for b in &mut m.params_mut()[off..off + w[1]] {
                *b = rng.random_range(-0.5..0.5);
            }
            off += w[1];
        }
    };
    for n in nets {
        match n {
            Surrogate::Point(m) => bump(m),
            Surrogate::Operator(d) => {
                bump(d.branch_mut());
                bump(d.trunk_mut());
            }
        }
    }
}

/// One randomized case: tiny networks (two hidden layers of width four), a
/// random problem of either coefficient kind and a handful of points.
pub fn check_case(variant: LossVariant, seed: u64) -> Result<GradCheck, LossError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = if rng.random::<bool>() { ProblemKind::Constant } else { ProblemKind::Variable };
    let eps = 10f64.powf(rng.random_range(-3.0..-1.5));
    let prob = BoundaryLayerProblem::new(kind, eps, rng.random_range(0.4..1.4), rng.random_range(1.5..2.5), 20.0)
        .expect("valid random problem");
    let colloc = CollocationSets::sample(&prob, 6, 6, seed);
    let weights = LossWeights::default();
    let family = BcFamily::sample(BcBox::default(), 3, 0, seed);
    let shape = OperatorShape { hidden: 2, width: 4, latent: 3 };
    let net_seed = seed.wrapping_mul(31).wrapping_add(7);

    let asym = |order: Order, sensors: Matrix| AsymptoticLoss { order, problem: prob, colloc: colloc.clone(), weights, sensors };
    let point_sensors = Matrix::from_vec(1, 2, vec![prob.alpha, prob.beta]).expect("1 x 2");
    let (objective, mut nets, tape): (Box<dyn Objective>, Vec<Surrogate>, Option<AsymptoticLoss>) = match variant {
        LossVariant::PointLeading | LossVariant::PointHigh => {
            let order = if variant == LossVariant::PointLeading { Order::Leading } else { Order::High };
            let loss = asym(order, point_sensors);
            (Box::new(loss.clone()), point_nets(order, 2, 4, net_seed)?, Some(loss))
        }
        LossVariant::OperatorLeading | LossVariant::OperatorHigh => {
            let order = if variant == LossVariant::OperatorLeading { Order::Leading } else { Order::High };
            let loss = asym(order, family.train_sensors());
            (Box::new(loss.clone()), operator_nets(order.net_count(), shape, net_seed)?, Some(loss))
        }
        LossVariant::PiDeepOnet => {
            let loss = PiDeepOnetLoss::new(prob, 8, family.train_sensors(), seed);
            (Box::new(loss), operator_nets(1, shape, net_seed)?, None)
        }
        LossVariant::DataDriven => {
            let p = BoundaryLayerProblem { kind: ProblemKind::Constant, ..prob };
            let loss = DataDrivenLoss::new(&p, family.train_sensors(), 5).map_err(|e| LossError::Shape(e.to_string()))?;
            (Box::new(loss), operator_nets(2, shape, net_seed)?, None)
        }
    };
    perturb_biases(&mut nets, &mut rng);
    let fd = fd_gradient(objective.as_ref(), &nets, FD_STEP)?;
    let fast = fast_gradient(objective.as_ref(), &nets)?;
    let tape_vs_fd = match tape {
        Some(loss) => Some(rel(&loss.tape_gradient(&nets)?.1, &fd)),
        None => None,
    };
    Ok(GradCheck { fast_vs_fd: rel(&fast, &fd), tape_vs_fd, params: fd.len() })
}

/// Worst discrepancy of `cases` random cases per variant.
pub fn run_suite(cases: u64, seed: u64) -> Result<Vec<(LossVariant, f64)>, LossError> {
    LossVariant::ALL
        .iter()
        .map(|&v| {
            let mut worst: f64 = 0.0;
            for c in 0..cases {
                worst = worst.max(check_case(v, seed.wrapping_add(c * 1009))?.worst());
            }
            Ok((v, worst))
        })
        .collect()
}

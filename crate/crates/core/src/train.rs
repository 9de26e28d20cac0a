//! Full-batch Adam training shared by every method, with best-checkpoint
//! selection on the total training loss.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{AdamConfig, AdamState, NnError, Surrogate};
use crate::pvd_net::loss::{LossError, LossParts};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        /// Best checkpoint seen before the failure.
        partial: Box<TrainOutcome>,
    },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// A differentiable training objective over a list of networks.
pub trait Objective: Sync {
    /// Loss parts; fills one gradient buffer per network when asked.
    fn evaluate(&self, nets: &[Surrogate], grads: Option<&mut [Vec<f64>]>) -> Result<LossParts, LossError>;
}

impl Objective for crate::pvd_net::loss::AsymptoticLoss {
    fn evaluate(&self, nets: &[Surrogate], grads: Option<&mut [Vec<f64>]>) -> Result<LossParts, LossError> {
        crate::pvd_net::loss::AsymptoticLoss::evaluate(self, nets, grads)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub checkpoint_interval: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { iterations: 100_000, checkpoint_interval: 500, adam: AdamConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub parts: LossParts,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Networks at the best checkpoint.
    pub nets: Vec<Surrogate>,
    pub best: Checkpoint,
    pub log: Vec<Checkpoint>,
}

impl TrainOutcome {
    pub fn write_log<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_log(&self.log, out)
    }
}

/// `iteration,loss_outer,loss_inner,loss_matching,loss_boundary,total`.
pub fn write_log<W: Write>(log: &[Checkpoint], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "loss_outer", "loss_inner", "loss_matching", "loss_boundary", "total"])?;
    for c in log {
        let p = &c.parts;
        let mut rec = vec![c.iteration.to_string()];
        rec.extend([p.outer, p.inner, p.matching, p.boundary, p.total].iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()
}

fn is_checkpoint(it: usize, cfg: &TrainConfig) -> bool {
    it == cfg.iterations || (cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0)
}

/// Runs `cfg.iterations` joint Adam updates on all networks and returns the
/// lowest-loss checkpoint (ties keep the earliest). Iteration 0 and the final
/// iteration are always checkpoints.
pub fn train(nets: Vec<Surrogate>, objective: &dyn Objective, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let mut nets = nets;
    let mut states: Vec<AdamState> = nets.iter().map(|n| AdamState::new(n.param_count(), cfg.adam)).collect();
    let mut params: Vec<Vec<f64>> = nets
        .iter()
        .map(|n| {
            let mut p = vec![0.0; n.param_count()];
            n.copy_params_to(&mut p);
            p
        })
        .collect();
    let mut grads: Vec<Vec<f64>> = nets.iter().map(|n| vec![0.0; n.param_count()]).collect();
    let mut log = Vec::new();
    let mut best: Option<(Checkpoint, Vec<Surrogate>)> = None;

    let fail = |iteration: usize, reason: String, best: &Option<(Checkpoint, Vec<Surrogate>)>, log: &[Checkpoint], nets: &[Surrogate]| {
        let partial = match best {
            Some((c, n)) => TrainOutcome { nets: n.clone(), best: *c, log: log.to_vec() },
            None => TrainOutcome {
                nets: nets.to_vec(),
                best: Checkpoint { iteration: 0, parts: LossParts::zero() },
                log: log.to_vec(),
            },
        };
        TrainError::Diverged { iteration, reason, partial: Box::new(partial) }
    };

    for it in 0..=cfg.iterations {
        let last = it == cfg.iterations;
        let parts = match objective.evaluate(&nets, if last { None } else { Some(&mut grads) }) {
            Ok(p) => p,
            Err(e @ (LossError::NonFinite(_) | LossError::Nn(NnError::NonFinite(_)))) => {
                return Err(fail(it, e.to_string(), &best, &log, &nets));
            }
            Err(e) => return Err(e.into()),
        };
        if is_checkpoint(it, cfg) {
            let c = Checkpoint { iteration: it, parts };
            log.push(c);
            if best.as_ref().is_none_or(|(b, _)| parts.total < b.parts.total) {
                best = Some((c, nets.clone()));
            }
            log::debug!("iteration {it}: total {:.3e}", parts.total);
        }
        if last {
            break;
        }
        for (k, net) in nets.iter_mut().enumerate() {
            if let Err(e) = states[k].step(&mut params[k], &grads[k]) {
                return Err(fail(it, e.to_string(), &best, &log, &[]));
            }
            net.load_params(&params[k]);
        }
    }
    let (best, nets) = best.expect("iteration 0 is always a checkpoint");
    Ok(TrainOutcome { nets, best, log })
}

//! Experiment configuration (TOML) and the desk / full presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::AdamConfig;
use crate::problem::{BoundaryLayerProblem, ProblemError, ProblemKind};
use crate::pvd_net::loss::LossWeights;
use crate::pvd_net::{CompositeOptions, Order};
use crate::pvd_onet::{BcBox, OperatorShape, OperatorTraining, OperatorVariant};
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown method key `{0}`")]
    UnknownMethod(String),
    #[error("unknown preset `{0}` (expected desk or full)")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize configuration: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pvdnet-leading")]
    PvdNetLeading,
    #[serde(rename = "pvdnet-high")]
    PvdNetHigh,
    #[serde(rename = "blpinns")]
    BlPinns,
    #[serde(rename = "pvdonet-leading")]
    PvdOnetLeading,
    #[serde(rename = "pvdonet-high")]
    PvdOnetHigh,
    #[serde(rename = "pideeponet")]
    PiDeepOnet,
    #[serde(rename = "datadriven")]
    DataDriven,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::PvdNetLeading,
        Method::PvdNetHigh,
        Method::BlPinns,
        Method::PvdOnetLeading,
        Method::PvdOnetHigh,
        Method::PiDeepOnet,
        Method::DataDriven,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Method::PvdNetLeading => "pvdnet-leading",
            Method::PvdNetHigh => "pvdnet-high",
            Method::BlPinns => "blpinns",
            Method::PvdOnetLeading => "pvdonet-leading",
            Method::PvdOnetHigh => "pvdonet-high",
            Method::PiDeepOnet => "pideeponet",
            Method::DataDriven => "datadriven",
        }
    }

    pub fn net_count(&self) -> usize {
        match self {
            Method::PvdNetHigh | Method::PvdOnetHigh => 5,
            Method::PiDeepOnet => 1,
            _ => 2,
        }
    }

    /// Point-wise order, `None` for operator methods.
    pub fn point_order(&self) -> Option<Order> {
        match self {
            Method::PvdNetLeading | Method::BlPinns => Some(Order::Leading),
            Method::PvdNetHigh => Some(Order::High),
            _ => None,
        }
    }

    pub fn operator_variant(&self) -> Option<OperatorVariant> {
        match self {
            Method::PvdOnetLeading => Some(OperatorVariant::Leading),
            Method::PvdOnetHigh => Some(OperatorVariant::High),
            Method::PiDeepOnet => Some(OperatorVariant::PiDeepOnet),
            Method::DataDriven => Some(OperatorVariant::DataDriven),
            _ => None,
        }
    }

    /// Keeps the total neuron count equal: five-network methods get 40 per layer.
    pub fn default_width(&self) -> usize {
        if self.net_count() == 5 {
            40
        } else {
            100
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.key() == s).ok_or_else(|| ConfigError::UnknownMethod(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Full,
}

impl FromStr for Preset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(ConfigError::UnknownPreset(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub xi0: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { kind: ProblemKind::Constant, eps: 1e-3, alpha: 1.0, beta: 2.0, xi0: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub hidden: usize,
    /// Neurons per hidden layer; unset means the method default.
    pub width: Option<usize>,
    /// Basis size of branch/trunk pairs.
    pub latent: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self { hidden: 5, width: None, latent: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub iterations: usize,
    pub checkpoint_interval: usize,
    pub seed: u64,
    pub n_outer: usize,
    pub n_inner: usize,
    /// Residual points of the single-network baseline.
    pub n_global: usize,
    /// Observation points per region of the supervised fit.
    pub n_obs: usize,
    pub adam: AdamConfig,
    pub weights: LossWeights,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            checkpoint_interval: 500,
            seed: 0,
            n_outer: 200,
            n_inner: 200,
            n_global: 400,
            n_obs: 100,
            adam: AdamConfig::default(),
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySection {
    pub bounds: BcBox,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for FamilySection {
    fn default() -> Self {
        Self { bounds: BcBox::default(), n_train: 1000, n_test: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// FDM intervals for variable-coefficient ground truth.
    pub truth_intervals: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "runs/default".into(), truth_intervals: crate::reference::DEFAULT_INTERVALS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub problem: ProblemSection,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub composite: CompositeOptions,
    pub family: FamilySection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::PvdNetLeading,
            problem: ProblemSection::default(),
            network: NetworkSection::default(),
            training: TrainingSection::default(),
            composite: CompositeOptions::default(),
            family: FamilySection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    /// Overrides iteration count and family sizes.
    pub fn apply_preset(&mut self, preset: Preset) {
        let (iterations, n_train, n_test) = match preset {
            Preset::Desk => (20_000, 100, 20),
            Preset::Full => (100_000, 1000, 100),
        };
        self.training.iterations = iterations;
        self.family.n_train = n_train;
        self.family.n_test = n_test;
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let prob = self.build_problem()?;
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(prob.eps * prob.xi0 < 1.0) {
            return bad("the inner horizon eps * xi0 must stay inside the unit interval");
        }
        if self.network.hidden == 0 || self.width() == 0 || self.network.latent == 0 {
            return bad("network sizes must be positive");
        }
        let t = &self.training;
        if self.method.point_order().is_some() || matches!(self.method, Method::PvdOnetLeading | Method::PvdOnetHigh) {
            if t.n_outer < 2 || t.n_inner < 2 {
                return bad("need at least two collocation points per region");
            }
        }
        if self.method == Method::PiDeepOnet && t.n_global == 0 {
            return bad("n_global must be positive");
        }
        if self.method == Method::DataDriven && self.problem.kind != ProblemKind::Constant {
            return bad("the data-driven fit needs closed-form labels (constant problem)");
        }
        if self.method.operator_variant().is_some() {
            if !self.family.bounds.is_valid() {
                return bad("empty boundary-value box");
            }
            if self.family.n_train == 0 || self.family.n_test == 0 {
                return bad("operator runs need training and test pairs");
            }
        }
        if !(t.adam.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.network.width.unwrap_or_else(|| self.method.default_width())
    }

    pub fn build_problem(&self) -> Result<BoundaryLayerProblem, ProblemError> {
        let p = &self.problem;
        BoundaryLayerProblem::new(p.kind, p.eps, p.alpha, p.beta, p.xi0)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.training.iterations,
            checkpoint_interval: self.training.checkpoint_interval,
            adam: self.training.adam,
        }
    }

    pub fn operator_shape(&self) -> OperatorShape {
        OperatorShape { hidden: self.network.hidden, width: self.width(), latent: self.network.latent }
    }

    pub fn operator_training(&self) -> OperatorTraining {
        let t = &self.training;
        OperatorTraining {
            n_outer: t.n_outer,
            n_inner: t.n_inner,
            n_global: t.n_global,
            n_obs: t.n_obs,
            weights: t.weights,
            seed: t.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.problem.eps, c.problem.xi0, c.training.iterations), (1e-3, 20.0, 100_000));
        assert_eq!((c.training.n_outer, c.training.n_inner), (200, 200));
        assert_eq!((c.family.n_train, c.family.n_test), (1000, 100));
        assert_eq!(c.width(), 100);
        assert_eq!(ExperimentConfig::for_method(Method::PvdNetHigh).width(), 40);
        assert_eq!(ExperimentConfig::for_method(Method::PvdOnetHigh).width(), 40);
    }

    #[test]
    fn method_keys_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.key().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("pinn".parse::<Method>(), Err(ConfigError::UnknownMethod(_))));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::for_method(Method::PvdOnetHigh);
        c.apply_preset(Preset::Desk);
        c.problem.kind = ProblemKind::Variable;
        c.problem.eps = 2.5e-3;
        c.network.width = Some(17);
        c.training.weights.matching = 3.0;
        c.output.dir = "somewhere/else".into();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = ExperimentConfig::from_toml("method = \"pvdnet-high\"\n[problem]\nkind = \"variable\"\n").unwrap();
        assert_eq!(c.method, Method::PvdNetHigh);
        assert_eq!(c.problem.kind, ProblemKind::Variable);
        assert_eq!(c.problem.beta, 2.0);
        assert!(ExperimentConfig::from_toml("method = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml("[problem]\neps = 0.5\n").is_err());
        assert!(ExperimentConfig::from_toml("[problem]\neps = 1.5\n").is_err());
        assert!(ExperimentConfig::from_toml("[problem]\nepsilon = 0.5\n").is_err());
    }

    #[test]
    fn presets() {
        let mut c = ExperimentConfig::default();
        c.apply_preset(Preset::Desk);
        assert_eq!((c.training.iterations, c.family.n_train, c.family.n_test), (20_000, 100, 20));
        c.apply_preset(Preset::Full);
        assert_eq!((c.training.iterations, c.family.n_train, c.family.n_test), (100_000, 1000, 100));
    }
}

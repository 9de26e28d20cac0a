//! Parameterized-variable-decomposition networks for singularly perturbed
//! boundary-value problems.

pub mod autodiff;
pub mod linalg;
pub mod nn;
pub mod problem;
pub mod eval;
pub mod reference;
pub mod pvd_net;
pub mod train;
pub mod gradcheck;
pub mod pvd_onet;
pub mod config;
pub mod persist;
pub mod plot;
pub mod runner;

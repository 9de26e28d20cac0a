//! The singularly perturbed two-point problem
//!
//! ```text
//! eps u'' + a(x) u' + b(x) u = 0,  x in (0, 1),  u(0) = alpha,  u(1) = beta
//! ```
//!
//! together with the stretching `xi = (x - x0) / eps` and the residual
//! operators of the order-0 and order-1 outer/inner hierarchies.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Jet2, Real};

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("eps must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("xi0 must be positive and finite, got {0}")]
    InvalidTruncation(f64),
    #[error("closed form needs eps < 1/4 (real characteristic roots), got {0}")]
    ComplexRoots(f64),
    #[error("a(x) changes sign on [0, 1]; no single boundary layer")]
    MixedSign,
    #[error("first-order outer term requested but not supplied")]
    MissingTerm,
}

/// Built-in coefficient pairs `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// `a = 1`, `b = 1`.
    Constant,
    /// `a = x + 1`, `b = 5 cos(5x)`.
    Variable,
}

impl ProblemKind {
    pub fn key(&self) -> &'static str {
        match self {
            ProblemKind::Constant => "constant",
            ProblemKind::Variable => "variable",
        }
    }

    #[inline]
    pub fn a(&self, x: f64) -> f64 {
        match self {
            ProblemKind::Constant => 1.0,
            ProblemKind::Variable => x + 1.0,
        }
    }

    #[inline]
    pub fn b(&self, x: f64) -> f64 {
        match self {
            ProblemKind::Constant => 1.0,
            ProblemKind::Variable => 5.0 * (5.0 * x).cos(),
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(ProblemKind::Constant),
            "variable" => Ok(ProblemKind::Variable),
            other => Err(format!("unknown problem `{other}` (expected constant | variable)")),
        }
    }
}

/// Which end of the interval carries the layer: `a > 0` puts it at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLayerProblem {
    pub kind: ProblemKind,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Location of the layer.
    pub x0: f64,
    /// Finite stand-in for `xi -> infinity` in the matching conditions.
    pub xi0: f64,
}

impl BoundaryLayerProblem {
    pub fn new(kind: ProblemKind, eps: f64, alpha: f64, beta: f64, xi0: f64) -> Result<Self, ProblemError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ProblemError::InvalidEpsilon(eps));
        }
        if !(xi0 > 0.0 && xi0.is_finite()) {
            return Err(ProblemError::InvalidTruncation(xi0));
        }
        let side = side_of(kind)?;
        let x0 = match side {
            LayerSide::Left => 0.0,
            LayerSide::Right => 1.0,
        };
        Ok(Self { kind, eps, alpha, beta, x0, xi0 })
    }

    /// `eps = 1e-3`, `alpha = 1`, `beta = 2`, `xi0 = 20`.
    pub fn standard(kind: ProblemKind) -> Self {
        Self::new(kind, 1e-3, 1.0, 2.0, 20.0).expect("standard parameters are valid")
    }

    /// Same equation with different boundary values.
    pub fn with_boundary_values(&self, alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, ..*self }
    }

    pub fn layer_side(&self) -> LayerSide {
        if self.x0 == 0.0 {
            LayerSide::Left
        } else {
            LayerSide::Right
        }
    }

    #[inline]
    pub fn a(&self, x: f64) -> f64 {
        self.kind.a(x)
    }

    #[inline]
    pub fn b(&self, x: f64) -> f64 {
        self.kind.b(x)
    }

    /// `min |a|` over `[0, 1]`, sampled on 1001 points.
    pub fn a_min(&self) -> f64 {
        (0..=1000).map(|i| self.a(i as f64 / 1000.0).abs()).fold(f64::INFINITY, f64::min)
    }

    /// `xi = (x - x0) / eps`.
    #[inline]
    pub fn stretch(&self, x: f64) -> f64 {
        (x - self.x0) / self.eps
    }

    #[inline]
    pub fn unstretch(&self, xi: f64) -> f64 {
        self.x0 + self.eps * xi
    }

    /// `x_j = x0 + eps * xi0`: where the inner training horizon lands in `x`.
    pub fn junction(&self) -> f64 {
        self.unstretch(self.xi0)
    }

    /// Order-0 outer residual `a u0' + b u0` at `x`.
    pub fn outer_residual0<T: Real>(&self, x: f64, u0: Jet2<T>) -> T {
        u0.d1.scale(self.a(x)) + u0.v.scale(self.b(x))
    }

    /// Order-1 outer residual `a u1' + b u1 + u0''` at `x`.
    pub fn outer_residual1<T: Real>(&self, x: f64, u0: Jet2<T>, u1: Jet2<T>) -> T {
        u1.d1.scale(self.a(x)) + u1.v.scale(self.b(x)) + u0.d2
    }

    /// `(r0, r1)`; `r1` only when the order-1 term is supplied.
    pub fn outer_residuals<T: Real>(
        &self,
        x: f64,
        u0: Jet2<T>,
        u1: Option<Jet2<T>>,
        want_first_order: bool,
    ) -> Result<(T, Option<T>), ProblemError> {
        let r0 = self.outer_residual0(x, u0);
        match (u1, want_first_order) {
            (Some(u1), _) => Ok((r0, Some(self.outer_residual1(x, u0, u1)))),
            (None, true) => Err(ProblemError::MissingTerm),
            (None, false) => Ok((r0, None)),
        }
    }

    /// Leading inner residual `psi0'' + a(x0) psi0'` (derivatives in `xi`).
    pub fn inner_residual_leading<T: Real>(&self, psi0: Jet2<T>) -> T {
        psi0.d2 + psi0.d1.scale(self.a(self.x0))
    }

    /// Full stretched residual `u'' + a(x0 + eps xi) u' + eps b(x0 + eps xi) u`.
    pub fn inner_residual_full<T: Real>(&self, xi: f64, u: Jet2<T>) -> T {
        let x = self.unstretch(xi);
        u.d2 + u.d1.scale(self.a(x)) + u.v.scale(self.eps * self.b(x))
    }

    /// `psi0 + eps (xi psic + psi1)` as a jet in `xi`.
    pub fn assemble_inner<T: Real>(&self, xi: f64, psi0: Jet2<T>, psic: Jet2<T>, psi1: Jet2<T>) -> Jet2<T> {
        let xi_jet = Jet2::variable(T::constant(xi));
        psi0 + (xi_jet * psic + psi1).scale(self.eps)
    }
}

fn side_of(kind: ProblemKind) -> Result<LayerSide, ProblemError> {
    let (mut pos, mut neg) = (false, false);
    for i in 0..=1000 {
        let a = kind.a(i as f64 / 1000.0);
        pos |= a > 0.0;
        neg |= a <= 0.0;
    }
    match (pos, neg) {
        (true, false) => Ok(LayerSide::Left),
        (false, true) => Ok(LayerSide::Right),
        _ => Err(ProblemError::MixedSign),
    }
}

/// Characteristic roots `(lambda1, lambda2)` of `eps r^2 + r + 1 = 0`.
pub fn characteristic_roots(eps: f64) -> Result<(f64, f64), ProblemError> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(ProblemError::ComplexRoots(eps));
    }
    let s = (1.0 - 4.0 * eps).sqrt();
    Ok(((-1.0 + s) / (2.0 * eps), (-1.0 - s) / (2.0 * eps)))
}

/// Closed-form solution of `eps u'' + u' + u = 0`, `u(0) = alpha`, `u(1) = beta`,
/// as a jet in `x`.
///
/// Written as `A e^{l1 (x - 1)} + B e^{l2 x}` so every exponent is bounded by
/// `|l1|` and no intermediate overflows.
pub fn analytic_solution_constant_jet(eps: f64, alpha: f64, beta: f64, x: f64) -> Result<Jet2, ProblemError> {
    let (l1, l2) = characteristic_roots(eps)?;
    let denom = 1.0 - (l2 - l1).exp();
    let a = (beta - alpha * l2.exp()) / denom;
    let b = (alpha - beta * (-l1).exp()) / denom;
    let t1 = a * (l1 * (x - 1.0)).exp();
    let t2 = b * (l2 * x).exp();
    Ok(Jet2::new(t1 + t2, l1 * t1 + l2 * t2, l1 * l1 * t1 + l2 * l2 * t2))
}

pub fn analytic_solution_constant(eps: f64, alpha: f64, beta: f64, x: f64) -> Result<f64, ProblemError> {
    Ok(analytic_solution_constant_jet(eps, alpha, beta, x)?.v)
}

/// Closed-form leading and first-order matched expansions of the
/// constant-coefficient problem (`a = b = 1`, layer at `x = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCaseOracle {
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ConstantCaseOracle {
    pub fn new(eps: f64, alpha: f64, beta: f64) -> Self {
        Self { eps, alpha, beta }
    }

    pub fn from_problem(p: &BoundaryLayerProblem) -> Self {
        Self::new(p.eps, p.alpha, p.beta)
    }

    /// `u0 = beta e^{1-x}`.
    pub fn outer0(&self, x: f64) -> Jet2 {
        let v = self.beta * (1.0 - x).exp();
        Jet2::new(v, -v, v)
    }

    /// `u1 = beta (1 - x) e^{1-x}`.
    pub fn outer1(&self, x: f64) -> Jet2 {
        let e = self.beta * (1.0 - x).exp();
        Jet2::new((1.0 - x) * e, -(2.0 - x) * e, (3.0 - x) * e)
    }

    fn layer_amplitude(&self) -> f64 {
        self.alpha - self.beta * E
    }

    /// `psi0 = beta e + (alpha - beta e) e^{-xi}`.
    pub fn inner0(&self, xi: f64) -> Jet2 {
        let d = self.layer_amplitude() * (-xi).exp();
        Jet2::new(self.beta * E + d, -d, d)
    }

    /// Order-reduction term `psic = -beta e + (alpha - beta e) e^{-xi}`.
    pub fn inner_c(&self, xi: f64) -> Jet2 {
        let d = self.layer_amplitude() * (-xi).exp();
        Jet2::new(-self.beta * E + d, -d, d)
    }

    /// `psi1 = beta e (1 - e^{-xi})`.
    pub fn inner1(&self, xi: f64) -> Jet2 {
        let c = self.beta * E;
        let e = (-xi).exp();
        Jet2::new(c * (1.0 - e), c * e, -c * e)
    }

    /// Leading composite `beta e^{1-x} + (alpha - beta e) e^{-x/eps}`.
    pub fn leading_composite(&self, x: f64) -> f64 {
        self.beta * (1.0 - x).exp() + self.layer_amplitude() * (-x / self.eps).exp()
    }

    /// Far-field limits `(psic(inf), psi1(inf)) = (-beta e, beta e)` demanded by
    /// Van Dyke matching against the first-order outer term.
    pub fn van_dyke_targets(&self) -> (f64, f64) {
        (-self.beta * E, self.beta * E)
    }
}

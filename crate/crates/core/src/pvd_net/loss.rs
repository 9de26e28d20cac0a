//! Two-region losses of the leading- and first-order decompositions.
//!
//! Every loss is written over a family of `N` boundary-value pairs: point-wise
//! networks are the `N = 1` case. Two routes share the formulas:
//! [`evaluate_grids`] works on batched network outputs and produces output
//! adjoints for the fast reverse sweep; [`evaluate_jets`] works on any
//! [`Real`] scalar and drives the tape-based gradient used as a cross-check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::collocation::CollocationSets;
use super::Order;
use crate::autodiff::{param_gradient, AutodiffError, Jet2, Real};
use crate::linalg::Matrix;
use crate::nn::{forward_generic, JetGrid, NnError, Surrogate};
use crate::problem::BoundaryLayerProblem;

pub const OUTER0: usize = 0;
pub const INNER0: usize = 1;
pub const OUTER1: usize = 2;
pub const INNER_C: usize = 3;
pub const INNER1: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("non-finite {0} loss")]
    NonFinite(&'static str),
    #[error("loss inputs are inconsistent: {0}")]
    Shape(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Multipliers of the four loss parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub outer: f64,
    pub inner: f64,
    pub matching: f64,
    pub boundary: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { outer: 1.0, inner: 1.0, matching: 1.0, boundary: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T = f64> {
    pub outer: T,
    pub inner: T,
    pub matching: T,
    pub boundary: T,
    /// Individual matching conditions; leading order only fills the first.
    pub matching_terms: [T; 3],
    /// Weighted sum of the four parts.
    pub total: T,
}

impl LossParts<f64> {
    pub fn zero() -> Self {
        Self { outer: 0.0, inner: 0.0, matching: 0.0, boundary: 0.0, matching_terms: [0.0; 3], total: 0.0 }
    }

    pub fn with_total(mut self, w: &LossWeights) -> Self {
        self.total = w.outer * self.outer + w.inner * self.inner + w.matching * self.matching + w.boundary * self.boundary;
        self
    }

    pub fn check_finite(&self) -> Result<(), LossError> {
        for (name, v) in [
            ("outer", self.outer),
            ("inner", self.inner),
            ("matching", self.matching),
            ("boundary", self.boundary),
        ] {
            if !v.is_finite() {
                return Err(LossError::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// Boundary values `(alpha_n, beta_n)` of each function in the family.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Targets {
    pub fn single(alpha: f64, beta: f64) -> Self {
        Self { alpha: vec![alpha], beta: vec![beta] }
    }

    /// Reads an `N x 2` sensor matrix of `(alpha, beta)` rows.
    pub fn from_sensors(sensors: &Matrix) -> Self {
        let (alpha, beta) = (0..sensors.rows()).map(|n| (sensors.get(n, 0), sensors.get(n, 1))).unzip();
        Self { alpha, beta }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// `(is_outer, jet channels)` of each network slot.
pub fn slot_layout(order: Order) -> &'static [(bool, usize)] {
    match order {
        Order::Leading => &[(true, 2), (false, 3)],
        Order::High => &[(true, 3), (false, 3), (true, 2), (false, 3), (false, 3)],
    }
}

struct Adjoints<'a>(Option<&'a mut [JetGrid]>);

impl Adjoints<'_> {
    #[inline]
    fn add(&mut self, slot: usize, ch: usize, n: usize, j: usize, v: f64) {
        if let Some(a) = self.0.as_deref_mut() {
            a[slot].add(ch, n, j, v);
        }
    }
}

fn check_grids(order: Order, colloc: &CollocationSets, targets: &Targets, grids: &[JetGrid]) -> Result<(), LossError> {
    let layout = slot_layout(order);
    if grids.len() != layout.len() {
        return Err(LossError::Shape(format!("{} networks supplied, {} expected", grids.len(), layout.len())));
    }
    for (g, &(outer, ch)) in grids.iter().zip(layout) {
        let pts = if outer { colloc.outer.len() + 2 } else { colloc.inner.len() + 2 };
        if g.points != pts || g.channels < ch {
            return Err(LossError::Shape(format!("grid {}x{}x{} does not fit its slot", g.channels, g.functions, g.points)));
        }
        if g.functions != targets.len() {
            return Err(LossError::Shape(format!("{} function rows for {} targets", g.functions, targets.len())));
        }
    }
    Ok(())
}

/// Loss parts from batched outputs; when `adjoints` is given, accumulates
/// `d total / d output` into grids shaped like `grids`.
pub fn evaluate_grids(
    order: Order,
    prob: &BoundaryLayerProblem,
    colloc: &CollocationSets,
    targets: &Targets,
    weights: &LossWeights,
    grids: &[JetGrid],
    adjoints: Option<&mut [JetGrid]>,
) -> Result<LossParts, LossError> {
    check_grids(order, colloc, targets, grids)?;
    if colloc.outer.is_empty() || colloc.inner.is_empty() {
        return Err(LossError::Shape("empty collocation set".into()));
    }
    let mut adj = Adjoints(adjoints);
    let nf = targets.len() as f64;
    let (po, pi) = (colloc.outer.len(), colloc.inner.len());
    let (jx0, j1) = (po, po + 1);
    let (jxi0, j0) = (pi, pi + 1);
    let so = 1.0 / (nf * po as f64);
    let si = 1.0 / (nf * pi as f64);
    let ao: Vec<f64> = colloc.outer.iter().map(|&x| prob.a(x)).collect();
    let bo: Vec<f64> = colloc.outer.iter().map(|&x| prob.b(x)).collect();
    let w = weights;
    let mut p = LossParts::zero();

    match order {
        Order::Leading => {
            let (uo, ui) = (&grids[OUTER0], &grids[INNER0]);
            let a0 = prob.a(prob.x0);
            for n in 0..targets.len() {
                for j in 0..po {
                    let r = ao[j] * uo.d1(n, j) + bo[j] * uo.v(n, j);
                    p.outer += r * r * so;
                    let g = 2.0 * w.outer * r * so;
                    adj.add(OUTER0, 0, n, j, g * bo[j]);
                    adj.add(OUTER0, 1, n, j, g * ao[j]);
                }
                for j in 0..pi {
                    let r = ui.d2(n, j) + a0 * ui.d1(n, j);
                    p.inner += r * r * si;
                    let g = 2.0 * w.inner * r * si;
                    adj.add(INNER0, 1, n, j, g * a0);
                    adj.add(INNER0, 2, n, j, g);
                }
                let m = uo.v(n, jx0) - ui.v(n, jxi0);
                p.matching_terms[0] += m * m / nf;
                let g = 2.0 * w.matching * m / nf;
                adj.add(OUTER0, 0, n, jx0, g);
                adj.add(INNER0, 0, n, jxi0, -g);

                let bi = ui.v(n, j0) - targets.alpha[n];
                let bb = uo.v(n, j1) - targets.beta[n];
                p.boundary += (bi * bi + bb * bb) / nf;
                let g = 2.0 * w.boundary / nf;
                adj.add(INNER0, 0, n, j0, g * bi);
                adj.add(OUTER0, 0, n, j1, g * bb);
            }
        }
        Order::High => {
            let (u0, i0, u1, ic, i1) = (&grids[OUTER0], &grids[INNER0], &grids[OUTER1], &grids[INNER_C], &grids[INNER1]);
            let eps = prob.eps;
            let ai: Vec<f64> = colloc.inner.iter().map(|&xi| prob.a(prob.unstretch(xi))).collect();
            let bi: Vec<f64> = colloc.inner.iter().map(|&xi| eps * prob.b(prob.unstretch(xi))).collect();
            for n in 0..targets.len() {
                for j in 0..po {
                    let r0 = ao[j] * u0.d1(n, j) + bo[j] * u0.v(n, j);
                    let r1 = ao[j] * u1.d1(n, j) + bo[j] * u1.v(n, j) + u0.d2(n, j);
                    p.outer += (r0 * r0 + r1 * r1) * so;
                    let (g0, g1) = (2.0 * w.outer * r0 * so, 2.0 * w.outer * r1 * so);
                    adj.add(OUTER0, 0, n, j, g0 * bo[j]);
                    adj.add(OUTER0, 1, n, j, g0 * ao[j]);
                    adj.add(OUTER0, 2, n, j, g1);
                    adj.add(OUTER1, 0, n, j, g1 * bo[j]);
                    adj.add(OUTER1, 1, n, j, g1 * ao[j]);
                }
                for j in 0..pi {
                    let xi = colloc.inner[j];
                    let (a, b) = (ai[j], bi[j]);
                    // u = psi0 + eps (xi psic + psi1), derivatives in xi.
                    let u = i0.v(n, j) + eps * (xi * ic.v(n, j) + i1.v(n, j));
                    let du = i0.d1(n, j) + eps * (ic.v(n, j) + xi * ic.d1(n, j) + i1.d1(n, j));
                    let ddu = i0.d2(n, j) + eps * (2.0 * ic.d1(n, j) + xi * ic.d2(n, j) + i1.d2(n, j));
                    let r = ddu + a * du + b * u;
                    p.inner += r * r * si;
                    let g = 2.0 * w.inner * r * si;
                    adj.add(INNER0, 0, n, j, g * b);
                    adj.add(INNER0, 1, n, j, g * a);
                    adj.add(INNER0, 2, n, j, g);
                    adj.add(INNER_C, 0, n, j, g * eps * (xi * b + a));
                    adj.add(INNER_C, 1, n, j, g * eps * (xi * a + 2.0));
                    adj.add(INNER_C, 2, n, j, g * eps * xi);
                    adj.add(INNER1, 0, n, j, g * eps * b);
                    adj.add(INNER1, 1, n, j, g * eps * a);
                    adj.add(INNER1, 2, n, j, g * eps);
                }
                let m0 = u0.v(n, jx0) - i0.v(n, jxi0);
                let m1 = u1.v(n, jx0) - i1.v(n, jxi0);
                let mc = u0.d1(n, jx0) - ic.v(n, jxi0);
                p.matching_terms[0] += m0 * m0 / nf;
                p.matching_terms[1] += m1 * m1 / nf;
                p.matching_terms[2] += mc * mc / nf;
                let g = 2.0 * w.matching / nf;
                adj.add(OUTER0, 0, n, jx0, g * m0);
                adj.add(INNER0, 0, n, jxi0, -g * m0);
                adj.add(OUTER1, 0, n, jx0, g * m1);
                adj.add(INNER1, 0, n, jxi0, -g * m1);
                adj.add(OUTER0, 1, n, jx0, g * mc);
                adj.add(INNER_C, 0, n, jxi0, -g * mc);

                let b_o1 = u1.v(n, j1);
                let b_o0 = u0.v(n, j1) - targets.beta[n];
                let b_i1 = i1.v(n, j0);
                let b_i0 = i0.v(n, j0) - targets.alpha[n];
                p.boundary += (b_o1 * b_o1 + b_o0 * b_o0 + b_i1 * b_i1 + b_i0 * b_i0) / nf;
                let g = 2.0 * w.boundary / nf;
                adj.add(OUTER1, 0, n, j1, g * b_o1);
                adj.add(OUTER0, 0, n, j1, g * b_o0);
                adj.add(INNER1, 0, n, j0, g * b_i1);
                adj.add(INNER0, 0, n, j0, g * b_i0);
            }
        }
    }
    p.matching = p.matching_terms.iter().sum();
    let p = p.with_total(weights);
    p.check_finite()?;
    Ok(p)
}

/// Jets of each network slot, indexed `[function][point]`.
pub type JetTable<T> = Vec<Vec<Jet2<T>>>;

/// The same loss written directly with the problem's residual operators over
/// any [`Real`] scalar.
pub fn evaluate_jets<T: Real>(
    order: Order,
    prob: &BoundaryLayerProblem,
    colloc: &CollocationSets,
    targets: &Targets,
    weights: &LossWeights,
    tables: &[JetTable<T>],
) -> LossParts<T> {
    let zero = T::constant(0.0);
    let nf = targets.len() as f64;
    let (po, pi) = (colloc.outer.len(), colloc.inner.len());
    let (jx0, j1, jxi0, j0) = (po, po + 1, pi, pi + 1);
    let (so, si) = (1.0 / (nf * po as f64), 1.0 / (nf * pi as f64));
    let sq = |v: T| v * v;
    let (mut outer, mut inner, mut boundary) = (zero, zero, zero);
    let mut terms = [zero; 3];
    for n in 0..targets.len() {
        let alpha = T::constant(targets.alpha[n]);
        let beta = T::constant(targets.beta[n]);
        let u0 = &tables[OUTER0][n];
        let i0 = &tables[INNER0][n];
        match order {
            Order::Leading => {
                for j in 0..po {
                    outer = outer + sq(prob.outer_residual0(colloc.outer[j], u0[j])).scale(so);
                }
                for j in 0..pi {
                    inner = inner + sq(prob.inner_residual_leading(i0[j])).scale(si);
                }
                terms[0] = terms[0] + sq(u0[jx0].v - i0[jxi0].v).scale(1.0 / nf);
                boundary = boundary + (sq(i0[j0].v - alpha) + sq(u0[j1].v - beta)).scale(1.0 / nf);
            }
            Order::High => {
                let (u1, ic, i1) = (&tables[OUTER1][n], &tables[INNER_C][n], &tables[INNER1][n]);
                for j in 0..po {
                    let x = colloc.outer[j];
                    let r0 = prob.outer_residual0(x, u0[j]);
                    let r1 = prob.outer_residual1(x, u0[j], u1[j]);
                    outer = outer + (sq(r0) + sq(r1)).scale(so);
                }
                for j in 0..pi {
                    let xi = colloc.inner[j];
                    let u = prob.assemble_inner(xi, i0[j], ic[j], i1[j]);
                    inner = inner + sq(prob.inner_residual_full(xi, u)).scale(si);
                }
                terms[0] = terms[0] + sq(u0[jx0].v - i0[jxi0].v).scale(1.0 / nf);
                terms[1] = terms[1] + sq(u1[jx0].v - i1[jxi0].v).scale(1.0 / nf);
                terms[2] = terms[2] + sq(u0[jx0].d1 - ic[jxi0].v).scale(1.0 / nf);
                let b = sq(u1[j1].v) + sq(u0[j1].v - beta) + sq(i1[j0].v) + sq(i0[j0].v - alpha);
                boundary = boundary + b.scale(1.0 / nf);
            }
        }
    }
    let matching = terms[0] + terms[1] + terms[2];
    let total = outer.scale(weights.outer)
        + inner.scale(weights.inner)
        + matching.scale(weights.matching)
        + boundary.scale(weights.boundary);
    LossParts { outer, inner, matching, boundary, matching_terms: terms, total }
}

/// Per-point generic forward of one network over `coords` for every sensor row.
pub fn surrogate_jets<T: Real>(net: &Surrogate, params: &[T], sensors: &Matrix, coords: &[f64]) -> JetTable<T> {
    match net {
        Surrogate::Point(m) => {
            let row = coords
                .iter()
                .map(|&s| forward_generic(m.widths(), params, &[Jet2::variable(T::constant(s))])[0])
                .collect();
            vec![row]
        }
        Surrogate::Operator(d) => {
            let nb = d.branch().param_count();
            let (bp, tp) = params.split_at(nb);
            let trunk: Vec<Vec<Jet2<T>>> = coords
                .iter()
                .map(|&s| forward_generic(d.trunk().widths(), tp, &[Jet2::variable(T::constant(s))]))
                .collect();
            (0..sensors.rows())
                .map(|n| {
                    let input: Vec<Jet2<T>> = sensors.row(n).iter().map(|&v| Jet2::constant(T::constant(v))).collect();
                    let b = forward_generic(d.branch().widths(), bp, &input);
                    trunk
                        .iter()
                        .map(|t| {
                            let mut acc = Jet2::constant(T::constant(0.0));
                            for (bi, ti) in b.iter().zip(t) {
                                acc = acc + Jet2::constant(bi.v) * *ti;
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Everything the two-region loss needs besides the networks.
#[derive(Debug, Clone)]
pub struct AsymptoticLoss {
    pub order: Order,
    pub problem: BoundaryLayerProblem,
    pub colloc: CollocationSets,
    pub weights: LossWeights,
    /// `N x 2` rows of `(alpha, beta)`; a single row for point-wise networks.
    pub sensors: Matrix,
}

impl AsymptoticLoss {
    pub fn targets(&self) -> Targets {
        Targets::from_sensors(&self.sensors)
    }

    fn coords(&self) -> (Vec<f64>, Vec<f64>) {
        (self.colloc.outer_coords(), self.colloc.inner_coords())
    }

    fn check_nets(&self, nets: &[Surrogate]) -> Result<(), LossError> {
        let want = self.order.net_count();
        if nets.len() != want {
            return Err(LossError::Shape(format!("{} networks supplied, {want} expected", nets.len())));
        }
        Ok(())
    }

    /// Batched forward pass: one jet grid per network.
    pub fn forward(&self, nets: &[Surrogate]) -> Result<Vec<JetGrid>, LossError> {
        self.check_nets(nets)?;
        let (oc, ic) = self.coords();
        let layout = slot_layout(self.order);
        nets.par_iter()
            .zip(layout.par_iter())
            .map(|(net, &(outer, ch))| {
                let coords = if outer { &oc } else { &ic };
                Ok(net.forward(&self.sensors, coords, ch)?.0)
            })
            .collect()
    }

    /// Loss parts and, when `grads` is given, their parameter gradients
    /// (one buffer per network, overwritten).
    pub fn evaluate(&self, nets: &[Surrogate], grads: Option<&mut [Vec<f64>]>) -> Result<LossParts, LossError> {
        self.check_nets(nets)?;
        let targets = self.targets();
        let (oc, ic) = self.coords();
        let layout = slot_layout(self.order);
        let Some(grads) = grads else {
            let grids = self.forward(nets)?;
            return evaluate_grids(self.order, &self.problem, &self.colloc, &targets, &self.weights, &grids, None);
        };
        let passes = nets
            .par_iter()
            .zip(layout.par_iter())
            .map(|(net, &(outer, ch))| {
                let coords = if outer { &oc } else { &ic };
                net.forward(&self.sensors, coords, ch)
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        let (grids, traces): (Vec<_>, Vec<_>) = passes.into_iter().unzip();
        let mut adjoints: Vec<JetGrid> =
            grids.iter().map(|g| JetGrid::zeros(g.functions, g.points, g.channels)).collect();
        let parts = evaluate_grids(
            self.order,
            &self.problem,
            &self.colloc,
            &targets,
            &self.weights,
            &grids,
            Some(&mut adjoints),
        )?;
        nets.par_iter()
            .zip(traces.par_iter())
            .zip(adjoints.par_iter())
            .zip(grads.par_iter_mut())
            .try_for_each(|(((net, trace), adj), g)| {
                g.clear();
                g.resize(net.param_count(), 0.0);
                net.backward(trace, adj, g)
            })?;
        Ok(parts)
    }

    /// Reference gradient: the generic route recorded on a tape.
    pub fn tape_gradient(&self, nets: &[Surrogate]) -> Result<(f64, Vec<f64>), LossError> {
        self.check_nets(nets)?;
        let targets = self.targets();
        let (oc, ic) = self.coords();
        let layout = slot_layout(self.order);
        let sizes: Vec<usize> = nets.iter().map(Surrogate::param_count).collect();
        let mut flat = vec![0.0; sizes.iter().sum()];
        let mut off = 0;
        for (net, &s) in nets.iter().zip(&sizes) {
            net.copy_params_to(&mut flat[off..off + s]);
            off += s;
        }
        Ok(param_gradient(&flat, |vars| {
            let mut off = 0;
            let tables: Vec<_> = nets
                .iter()
                .zip(layout)
                .zip(&sizes)
                .map(|((net, &(outer, _)), &s)| {
                    let coords = if outer { &oc } else { &ic };
                    let t = surrogate_jets(net, &vars[off..off + s], &self.sensors, coords);
                    off += s;
                    t
                })
                .collect();
            evaluate_jets(self.order, &self.problem, &self.colloc, &targets, &self.weights, &tables).total
        })?)
    }
}

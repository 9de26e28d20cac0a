use std::cell::{Cell, RefCell};
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use super::real::{sigmoid_f64, Real};

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("tape holds {tape} parameters but {params} were supplied")]
    DimensionMismatch { tape: usize, params: usize },
    #[error("non-finite value on the tape (loss = {0})")]
    NonFinite(f64),
}

const NONE: usize = usize::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [usize; 2],
    partials: [f64; 2],
}

/// Scalar reverse-mode tape. Leaves registered through [`GradientTape::parameters`]
/// occupy the first slots, so their adjoints form the gradient directly.
#[derive(Default)]
pub struct GradientTape {
    nodes: RefCell<Vec<Node>>,
    leaves: Cell<usize>,
}

/// A scalar recorded on a [`GradientTape`]; constants carry no tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t GradientTape>,
    idx: usize,
    val: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.val)
    }
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers one leaf per parameter. Must be called before any other recording.
    pub fn parameters(&self, values: &[f64]) -> Vec<Var<'_>> {
        let mut nodes = self.nodes.borrow_mut();
        assert!(nodes.len() == self.leaves.get(), "parameters must be registered first");
        let start = nodes.len();
        nodes.extend(values.iter().map(|_| Node { parents: [NONE; 2], partials: [0.0; 2] }));
        self.leaves.set(nodes.len());
        values
            .iter()
            .enumerate()
            .map(|(i, &val)| Var { tape: Some(self), idx: start + i, val })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, parents: [usize; 2], partials: [f64; 2], val: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, partials });
        Var { tape: Some(self), idx: nodes.len() - 1, val }
    }

    /// Back-propagates `output` and returns the adjoint of every parameter leaf.
    pub fn gradient(&self, output: Var<'_>, params: usize) -> Result<Vec<f64>, AutodiffError> {
        let leaves = self.leaves.get();
        if leaves != params {
            return Err(AutodiffError::DimensionMismatch { tape: leaves, params });
        }
        if !output.val.is_finite() {
            return Err(AutodiffError::NonFinite(output.val));
        }
        let Some(_) = output.tape else {
            return Ok(vec![0.0; params]);
        };
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; output.idx + 1];
        adj[output.idx] = 1.0;
        for i in (0..=output.idx).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                if node.parents[k] != NONE {
                    adj[node.parents[k]] += a * node.partials[k];
                }
            }
        }
        adj.resize(params.max(adj.len()), 0.0);
        adj.truncate(params);
        if let Some(bad) = adj.iter().find(|g| !g.is_finite()) {
            return Err(AutodiffError::NonFinite(*bad));
        }
        Ok(adj)
    }
}

/// Gradient of `loss` at `params`, recorded on a fresh tape.
pub fn param_gradient<F>(params: &[f64], loss: F) -> Result<(f64, Vec<f64>), AutodiffError>
where
    F: for<'t> FnOnce(&[Var<'t>]) -> Var<'t>,
{
    let tape = GradientTape::new();
    let vars = tape.parameters(params);
    let out = loss(&vars);
    let grad = tape.gradient(out, params.len())?;
    Ok((out.val, grad))
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Var { tape: None, idx: NONE, val }
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    fn unary(self, val: f64, partial: f64) -> Self {
        match self.tape {
            Some(t) => t.push([self.idx, NONE], [partial, 0.0], val),
            None => Var::constant(val),
        }
    }

    fn binary(self, o: Self, val: f64, pa: f64, pb: f64) -> Self {
        match (self.tape, o.tape) {
            (Some(t), Some(_)) => t.push([self.idx, o.idx], [pa, pb], val),
            (Some(t), None) => t.push([self.idx, NONE], [pa, 0.0], val),
            (None, Some(t)) => t.push([o.idx, NONE], [pb, 0.0], val),
            (None, None) => Var::constant(val),
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Real for Var<'t> {
    fn constant(c: f64) -> Self {
        Var::constant(c)
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.val);
        self.unary(s, s * (1.0 - s))
    }
    fn scale(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NnError;
use crate::autodiff::{silu_derivatives, Jet2, Real};
use crate::linalg::{gemm, matmul, MatRef, Matrix};

/// Fully connected network: silu on hidden layers, identity on the output layer.
///
/// Parameters live in one flat vector, layer by layer: the `fan_out x fan_in`
/// weight matrix row-major, then the `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_batch`] for the reverse sweep.
///
/// Every matrix stacks `channels` blocks of `rows` rows: values first, then
/// first input derivatives, then second input derivatives.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    pub channels: usize,
    pub rows: usize,
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    /// `silu'`, `silu''`, `silu'''` at the value channel of each hidden layer.
    dsilu: Vec<Vec<f64>>,
    output: Matrix,
}

impl BatchTrace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn into_output(self) -> Matrix {
        self.output
    }
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights on `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(widths: &[usize], seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::glorot_with(widths, &mut rng)
    }

    pub fn glorot_with<R: Rng>(widths: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::zeros(widths)?;
        let mut offset = 0;
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize]) -> Result<Self, NnError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(NnError::ZeroWidth);
        }
        Ok(Self { widths: widths.to_vec(), params: vec![0.0; param_count(widths)] })
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self, NnError> {
        let net = Self::zeros(widths)?;
        if params.len() != net.params.len() {
            return Err(NnError::Shape(format!(
                "{} parameters for widths {widths:?} (expected {})",
                params.len(),
                net.params.len()
            )));
        }
        Ok(Self { params, ..net })
    }

    /// `[1, width, ..., width, 1]` with `hidden` hidden layers.
    pub fn scalar_widths(hidden: usize, width: usize) -> Vec<usize> {
        Self::widths_for(1, hidden, width, 1)
    }

    pub fn widths_for(input: usize, hidden: usize, width: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(width, hidden));
        w.push(output);
        w
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated widths")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |w| {
            let start = offset;
            offset += w[0] * w[1] + w[1];
            (start, w[0], w[1])
        })
    }

    /// Per-point jet forward for a scalar-input, scalar-output network.
    pub fn forward_jet(&self, s: Jet2) -> Result<Jet2, NnError> {
        if self.input_dim() != 1 || self.output_dim() != 1 {
            return Err(NnError::Shape(format!("forward_jet needs a 1 -> 1 network, got {:?}", self.widths)));
        }
        let out = forward_generic(&self.widths, &self.params, &[s])[0];
        if !out.is_finite() {
            return Err(NnError::NonFinite("mlp output".into()));
        }
        Ok(out)
    }

    /// Batched forward over `input` (`channels * rows` x `input_dim`).
    pub fn forward_batch(&self, input: Matrix, channels: usize) -> Result<BatchTrace, NnError> {
        if input.cols() != self.input_dim() {
            return Err(NnError::Shape(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        if channels == 0 || channels > 3 || input.rows() % channels != 0 {
            return Err(NnError::Shape(format!("{} rows cannot hold {channels} jet channels", input.rows())));
        }
        let rows = input.rows() / channels;
        let n_layers = self.widths.len() - 1;
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut dsilu = Vec::with_capacity(n_layers - 1);
        let mut x = input;
        for (l, (off, fan_in, fan_out)) in self.layers().enumerate() {
            let w = MatRef::new(&self.params[off..off + fan_in * fan_out], fan_out, fan_in);
            let bias = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let mut z = matmul(x.view(), w.t());
            // Bias only shifts the value channel.
            for r in 0..rows {
                for (zv, b) in z.row_mut(r).iter_mut().zip(bias) {
                    *zv += b;
                }
            }
            inputs.push(x);
            if l + 1 == n_layers {
                if !z.is_finite() {
                    return Err(NnError::NonFinite(format!("layer {l} output")));
                }
                return Ok(BatchTrace { channels, rows, inputs, pre, dsilu, output: z });
            }
            let (h, d) = silu_jet_forward(&z, channels, rows);
            if !h.is_finite() {
                return Err(NnError::NonFinite(format!("layer {l} activation")));
            }
            pre.push(z);
            dsilu.push(d);
            x = h;
        }
        unreachable!("validated widths have at least one layer")
    }

    /// Reverse sweep: accumulates `d loss / d params` into `grad` given the
    /// adjoint of the stacked output block.
    pub fn backward_batch(&self, trace: &BatchTrace, grad_out: Matrix, grad: &mut [f64]) -> Result<(), NnError> {
        if grad.len() != self.params.len() {
            return Err(NnError::Shape(format!(
                "gradient buffer of {} for {} parameters",
                grad.len(),
                self.params.len()
            )));
        }
        if grad_out.rows() != trace.output.rows() || grad_out.cols() != trace.output.cols() {
            return Err(NnError::Shape("output adjoint does not match the forward output".into()));
        }
        let layers: Vec<_> = self.layers().collect();
        let mut g = grad_out;
        for l in (0..layers.len()).rev() {
            let (off, fan_in, fan_out) = layers[l];
            let x = &trace.inputs[l];
            let (gw, rest) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            gemm(1.0, g.view().t(), x.view(), 1.0, gw, fan_in);
            for r in 0..trace.rows {
                for (gb, gv) in rest.iter_mut().zip(g.row(r)) {
                    *gb += gv;
                }
            }
            if l == 0 {
                break;
            }
            let w = MatRef::new(&self.params[off..off + fan_in * fan_out], fan_out, fan_in);
            let gh = matmul(g.view(), w);
            g = silu_jet_backward(&trace.pre[l - 1], &trace.dsilu[l - 1], &gh, trace.channels, trace.rows);
        }
        Ok(())
    }
}

/// Generic per-point forward over any [`Real`] scalar (plain or taped).
pub fn forward_generic<T: Real>(widths: &[usize], params: &[T], input: &[Jet2<T>]) -> Vec<Jet2<T>> {
    assert_eq!(input.len(), widths[0], "input length must equal the input width");
    assert_eq!(params.len(), param_count(widths), "parameter count does not match widths");
    let n_layers = widths.len() - 1;
    let mut x: Vec<Jet2<T>> = input.to_vec();
    let mut off = 0;
    for (l, w) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bias_off = off + fan_in * fan_out;
        let mut next = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let mut acc = Jet2::constant(params[bias_off + o]);
            for (i, xi) in x.iter().enumerate() {
                acc = acc + xi.affine(params[off + o * fan_in + i], T::constant(0.0));
            }
            next.push(if l + 1 < n_layers { acc.silu() } else { acc });
        }
        off = bias_off + fan_out;
        x = next;
    }
    x
}

fn silu_jet_forward(z: &Matrix, channels: usize, rows: usize) -> (Matrix, Vec<f64>) {
    let width = z.cols();
    let block = rows * width;
    let zs = z.as_slice();
    let mut h = Vec::with_capacity(channels * block);
    let mut d = vec![0.0; 3 * block];
    let (d1, rest) = d.split_at_mut(block);
    let (d2, d3) = rest.split_at_mut(block);
    h.extend(zs[..block].iter().enumerate().map(|(e, &v)| {
        let [f, f1, f2, f3] = silu_derivatives(v);
        (d1[e], d2[e], d3[e]) = (f1, f2, f3);
        f
    }));
    if channels > 1 {
        let z1 = &zs[block..2 * block];
        h.extend(z1.iter().zip(d1.iter()).map(|(a, f1)| f1 * a));
        if channels > 2 {
            let z2 = &zs[2 * block..3 * block];
            h.extend((0..block).map(|e| d2[e] * z1[e] * z1[e] + d1[e] * z2[e]));
        }
    }
    (Matrix::from_vec(z.rows(), width, h).expect("sized above"), d)
}

fn silu_jet_backward(z: &Matrix, d: &[f64], gh: &Matrix, channels: usize, rows: usize) -> Matrix {
    let width = z.cols();
    let block = rows * width;
    let zs = z.as_slice();
    let gs = gh.as_slice();
    let (f1, f2, f3) = (&d[..block], &d[block..2 * block], &d[2 * block..]);
    let mut out = Vec::with_capacity(channels * block);
    match channels {
        1 => out.extend((0..block).map(|e| gs[e] * f1[e])),
        2 => {
            let (z1, g1) = (&zs[block..], &gs[block..]);
            out.extend((0..block).map(|e| gs[e] * f1[e] + g1[e] * f2[e] * z1[e]));
            out.extend((0..block).map(|e| g1[e] * f1[e]));
        }
        _ => {
            let (z1, z2) = (&zs[block..2 * block], &zs[2 * block..]);
            let (g1, g2) = (&gs[block..2 * block], &gs[2 * block..]);
            out.extend(
                (0..block)
                    .map(|e| gs[e] * f1[e] + g1[e] * f2[e] * z1[e] + g2[e] * (f3[e] * z1[e] * z1[e] + f2[e] * z2[e])),
            );
            out.extend((0..block).map(|e| g1[e] * f1[e] + 2.0 * g2[e] * f2[e] * z1[e]));
            out.extend((0..block).map(|e| g2[e] * f1[e]));
        }
    }
    Matrix::from_vec(z.rows(), width, out).expect("sized above")
}

/// Stacks scalar coordinates into a `channels * n` x 1 jet input (unit slope).
pub fn jet_input(coords: &[f64], channels: usize) -> Matrix {
    let n = coords.len();
    let mut data = vec![0.0; channels * n];
    data[..n].copy_from_slice(coords);
    if channels > 1 {
        data[n..2 * n].iter_mut().for_each(|v| *v = 1.0);
    }
    Matrix::from_vec(channels * n, 1, data).expect("sized above")
}

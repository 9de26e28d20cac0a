use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{jet_input, BatchTrace, JetGrid, Mlp, NnError};
use crate::autodiff::Jet2;
use crate::linalg::{gemm, MatRef, Matrix};

/// Branch/trunk operator network: `G(v)(s) = sum_i b_i(v) t_i(s)`, no output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepOnet {
    branch: Mlp,
    trunk: Mlp,
}

#[derive(Debug, Clone)]
pub struct DeepOnetTrace {
    branch: BatchTrace,
    trunk: BatchTrace,
}

impl DeepOnet {
    pub fn new(branch: Mlp, trunk: Mlp) -> Result<Self, NnError> {
        if trunk.input_dim() != 1 {
            return Err(NnError::Shape("trunk network must take one coordinate".into()));
        }
        if branch.output_dim() != trunk.output_dim() {
            return Err(NnError::Shape(format!(
                "branch width {} differs from trunk width {}",
                branch.output_dim(),
                trunk.output_dim()
            )));
        }
        Ok(Self { branch, trunk })
    }

    /// Glorot-initialised branch (`sensors -> p`) and trunk (`1 -> p`) with
    /// `hidden` hidden layers of `width` each.
    pub fn glorot(sensors: usize, hidden: usize, width: usize, p: usize, seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let branch = Mlp::glorot_with(&Mlp::widths_for(sensors, hidden, width, p), &mut rng)?;
        let trunk = Mlp::glorot_with(&Mlp::widths_for(1, hidden, width, p), &mut rng)?;
        Self::new(branch, trunk)
    }

    pub fn branch(&self) -> &Mlp {
        &self.branch
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn branch_mut(&mut self) -> &mut Mlp {
        &mut self.branch
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp {
        &mut self.trunk
    }

    pub fn sensor_dim(&self) -> usize {
        self.branch.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.branch.param_count() + self.trunk.param_count()
    }

    fn check_sensors(&self, got: usize) -> Result<(), NnError> {
        if got != self.sensor_dim() {
            return Err(NnError::SensorLength { expected: self.sensor_dim(), got });
        }
        Ok(())
    }

    /// Branch outputs are constants w.r.t. the coordinate, so derivatives flow
    /// through the trunk only.
    pub fn forward_jet(&self, sensor: &[f64], s: Jet2) -> Result<Jet2, NnError> {
        self.check_sensors(sensor.len())?;
        let inputs: Vec<Jet2> = sensor.iter().map(|&v| Jet2::constant(v)).collect();
        let b = super::forward_generic(self.branch.widths(), self.branch.params(), &inputs);
        let t = super::forward_generic(self.trunk.widths(), self.trunk.params(), &[s]);
        let mut out = Jet2::constant(0.0);
        for (bi, ti) in b.iter().zip(&t) {
            out = out + ti.scale(bi.v);
        }
        if !out.is_finite() {
            return Err(NnError::NonFinite("operator output".into()));
        }
        Ok(out)
    }

    pub fn forward_batch(
        &self,
        sensors: &Matrix,
        coords: &[f64],
        channels: usize,
    ) -> Result<(JetGrid, DeepOnetTrace), NnError> {
        self.check_sensors(sensors.cols())?;
        let branch = self.branch.forward_batch(sensors.clone(), 1)?;
        let trunk = self.trunk.forward_batch(jet_input(coords, channels), channels)?;
        let (n, pts, p) = (sensors.rows(), coords.len(), self.latent_dim());
        let mut grid = JetGrid::zeros(n, pts, channels);
        for ch in 0..channels {
            let t = trunk.output().row_block(ch * pts, pts);
            let out = &mut grid.data[ch * n * pts..(ch + 1) * n * pts];
            gemm(1.0, branch.output().view(), t.t(), 0.0, out, pts);
        }
        debug_assert_eq!(branch.output().cols(), p);
        Ok((grid, DeepOnetTrace { branch, trunk }))
    }

    /// Accumulates the parameter gradient (branch block first, then trunk).
    pub fn backward_batch(&self, trace: &DeepOnetTrace, adjoint: &JetGrid, grad: &mut [f64]) -> Result<(), NnError> {
        if grad.len() != self.param_count() {
            return Err(NnError::Shape(format!("gradient buffer of {} for {} parameters", grad.len(), self.param_count())));
        }
        let (n, pts, p, ch_count) = (adjoint.functions, adjoint.points, self.latent_dim(), adjoint.channels);
        let b = trace.branch.output();
        let t = trace.trunk.output();
        if b.rows() != n || t.rows() != ch_count * pts {
            return Err(NnError::Shape("adjoint grid does not match the forward pass".into()));
        }
        let mut gb = Matrix::zeros(n, p);
        let mut gt = Matrix::zeros(ch_count * pts, p);
        for ch in 0..ch_count {
            let a = MatRef::new(&adjoint.data[ch * n * pts..(ch + 1) * n * pts], n, pts);
            gemm(1.0, a, t.row_block(ch * pts, pts), 1.0, gb.as_mut_slice(), p);
            let block = &mut gt.as_mut_slice()[ch * pts * p..(ch + 1) * pts * p];
            gemm(1.0, a.t(), b.view(), 0.0, block, p);
        }
        let nb = self.branch.param_count();
        let (g_branch, g_trunk) = grad.split_at_mut(nb);
        self.branch.backward_batch(&trace.branch, gb, g_branch)?;
        self.trunk.backward_batch(&trace.trunk, gt, g_trunk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_branch_output(net: &DeepOnet, scale: f64, p: usize) -> DeepOnet {
        // Zero weights, constant bias: branch output is exactly `scale` per entry.
        let widths = net.branch().widths().to_vec();
        let mut branch = Mlp::zeros(&widths).unwrap();
        let np = branch.param_count();
        for v in &mut branch.params_mut()[np - p..] {
            *v = scale;
        }
        DeepOnet::new(branch, net.trunk().clone()).unwrap()
    }

    #[test]
    fn zero_branch_annihilates() {
        let net = DeepOnet::glorot(2, 2, 8, 1, 4).unwrap();
        let zero = with_branch_output(&net, 0.0, 1);
        assert_eq!(zero.forward_jet(&[0.5, 2.0], Jet2::variable(0.3)).unwrap(), Jet2::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn unit_branch_returns_trunk_jet() {
        let net = DeepOnet::glorot(2, 2, 8, 1, 4).unwrap();
        let unit = with_branch_output(&net, 1.0, 1);
        let s = Jet2::variable(1.7);
        let trunk = unit.trunk().forward_jet(s).unwrap();
        assert_eq!(unit.forward_jet(&[0.9, 2.1], s).unwrap(), trunk);
    }

    #[test]
    fn doubling_branch_doubles_output() {
        let net = DeepOnet::glorot(2, 2, 8, 5, 9).unwrap();
        let one = with_branch_output(&net, 0.7, 5);
        let two = with_branch_output(&net, 1.4, 5);
        let s = Jet2::variable(-0.4);
        let a = one.forward_jet(&[1.0, 2.0], s).unwrap();
        let b = two.forward_jet(&[1.0, 2.0], s).unwrap();
        assert!((b.v - 2.0 * a.v).abs() < 1e-14);
        assert!((b.d1 - 2.0 * a.d1).abs() < 1e-14);
        assert!((b.d2 - 2.0 * a.d2).abs() < 1e-14);
    }

    #[test]
    fn sensor_length_mismatch() {
        let net = DeepOnet::glorot(2, 1, 4, 3, 0).unwrap();
        assert_eq!(
            net.forward_jet(&[1.0], Jet2::variable(0.0)).unwrap_err(),
            NnError::SensorLength { expected: 2, got: 1 }
        );
    }

    #[test]
    fn batched_grid_matches_per_point() {
        let net = DeepOnet::glorot(2, 2, 7, 6, 21).unwrap();
        let sensors = Matrix::from_vec(3, 2, vec![0.5, 1.6, 1.2, 2.4, 0.9, 2.0]).unwrap();
        let coords = [0.0, 0.3, 5.0, 20.0];
        let (grid, _) = net.forward_batch(&sensors, &coords, 3).unwrap();
        for n in 0..3 {
            for (j, &c) in coords.iter().enumerate() {
                let jet = net.forward_jet(sensors.row(n), Jet2::variable(c)).unwrap();
                assert!((grid.v(n, j) - jet.v).abs() < 1e-12);
                assert!((grid.d1(n, j) - jet.d1).abs() < 1e-12);
                assert!((grid.d2(n, j) - jet.d2).abs() < 1e-12);
            }
        }
    }
}
